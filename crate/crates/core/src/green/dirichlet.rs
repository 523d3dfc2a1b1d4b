//! Red-black SOR relaxation on lattice domains with Shortley–Weller arms.

use num_complex::Complex64;
use rayon::prelude::*;
use std::sync::Arc;

use crate::error::{Error, Result};
use crate::fields::{GridDomain, ScalarField, DIRECTIONS};

/// Stopping rule of a relaxation.
#[derive(Debug, Clone, Copy, PartialEq, serde::Serialize)]
pub struct RelaxOptions {
    /// Stop once the largest update of a sweep is below this value.
    pub tolerance: f64,
    pub max_sweeps: usize,
    /// Over-relaxation factor; `None` picks the classical optimum for the
    /// grid size.
    pub omega: Option<f64>,
}

impl Default for RelaxOptions {
    fn default() -> Self {
        Self {
            tolerance: 1e-10,
            max_sweeps: 200_000,
            omega: None,
        }
    }
}

/// Sweep count and final step of a converged relaxation.
#[derive(Debug, Clone, Copy, PartialEq, serde::Serialize)]
pub struct RelaxStats {
    pub sweeps: usize,
    pub last_step: f64,
    pub omega: f64,
}

/// One unknown `x_p = (Σ w_e x_{n_e} + c_p) / d_p`.
#[derive(Debug, Clone)]
pub(crate) struct Row {
    pub node: usize,
    pub nbr: Vec<(usize, f64)>,
    pub constant: f64,
    pub diag: f64,
}

/// Linear fixed-point system solved by red-black SOR, optionally projected
/// below an obstacle.
#[derive(Debug, Clone)]
pub(crate) struct System {
    /// Rows split by lattice parity.
    pub colors: [Vec<Row>; 2],
    pub size: usize,
}

impl System {
    pub fn new(grid: &GridDomain, rows: Vec<Row>) -> Self {
        let mut colors = [Vec::new(), Vec::new()];
        for r in rows {
            let (a, b) = grid.lattice(r.node);
            colors[((a + b).rem_euclid(2)) as usize].push(r);
        }
        System {
            colors,
            size: grid.nx().max(grid.ny()),
        }
    }

    fn default_omega(&self) -> f64 {
        let n = self.size.max(2) as f64;
        2.0 / (1.0 + (std::f64::consts::PI / n).sin())
    }

    /// Relaxes `x` in place. With an obstacle the update is `min(cap, ·)`.
    pub fn solve(&self, x: &mut [f64], obstacle: Option<&[f64]>, opts: &RelaxOptions) -> Result<RelaxStats> {
        let omega = opts.omega.unwrap_or_else(|| self.default_omega());
        let mut last_step = f64::INFINITY;
        for sweep in 1..=opts.max_sweeps {
            let mut step: f64 = 0.0;
            for rows in &self.colors {
                let snapshot: &[f64] = x;
                let updates: Vec<f64> = rows
                    .par_iter()
                    .with_min_len(512)
                    .map(|r| {
                        let s: f64 = r.nbr.iter().map(|&(q, w)| w * snapshot[q]).sum();
                        let target = (s + r.constant) / r.diag;
                        let old = snapshot[r.node];
                        let mut new = old + omega * (target - old);
                        if let Some(cap) = obstacle {
                            new = new.min(cap[r.node]);
                        }
                        new
                    })
                    .collect();
                for (r, v) in rows.iter().zip(updates) {
                    step = step.max((v - x[r.node]).abs());
                    x[r.node] = v;
                }
            }
            last_step = step;
            if step < opts.tolerance {
                return Ok(RelaxStats { sweeps: sweep, last_step, omega });
            }
            if !step.is_finite() {
                break;
            }
        }
        Err(Error::NotConverged {
            sweeps: opts.max_sweeps,
            last_step,
        })
    }
}

/// Shortley–Weller row for an inside node whose free neighbours are given
/// by `is_unknown`; known neighbours contribute `known(q)` and arms that
/// leave the domain contribute `boundary(point)`.
pub(crate) fn sw_row(
    grid: &GridDomain,
    p: usize,
    is_unknown: &dyn Fn(usize) -> bool,
    known: &dyn Fn(usize) -> f64,
    boundary: &dyn Fn(Complex64) -> f64,
) -> Row {
    let arms = grid.arms(p);
    let nb = grid.neighbours(p);
    let mut nbr = Vec::with_capacity(4);
    let mut constant = 0.0;
    let mut diag = 0.0;
    for e in 0..4 {
        let theta = arms[e];
        let theta_opp = arms[e ^ 1];
        let w = 2.0 / (theta * (theta + theta_opp));
        diag += w;
        match nb[e] {
            Some(q) if grid.is_inside(q) => {
                if is_unknown(q) {
                    nbr.push((q, w));
                } else {
                    constant += w * known(q);
                }
            }
            _ => {
                let z = grid
                    .arm_boundary_point(p, e)
                    .unwrap_or_else(|| grid.point_flat(p) + Complex64::new(DIRECTIONS[e].0 as f64, DIRECTIONS[e].1 as f64) * grid.spacing());
                constant += w * boundary(z);
            }
        }
    }
    Row { node: p, nbr, constant, diag }
}

/// Solves the discrete Dirichlet problem on the grid's domain with boundary
/// data `g` evaluated at the boundary crossing points.
///
/// Nodes outside the domain carry `g` evaluated at the node (undefined where
/// `g` is not finite).
pub fn solve_dirichlet(
    grid: Arc<GridDomain>,
    g: &(dyn Fn(Complex64) -> f64 + Sync),
    opts: &RelaxOptions,
) -> Result<(ScalarField, RelaxStats)> {
    let data: Vec<f64> = (0..grid.len()).map(|p| g(grid.point_flat(p))).collect();
    let rows: Vec<Row> = (0..grid.len())
        .filter(|&p| grid.is_inside(p))
        .map(|p| sw_row(&grid, p, &|_| true, &|_| 0.0, g))
        .collect();
    if rows.iter().any(|r| !r.constant.is_finite()) {
        return Err(Error::InvalidArgument("boundary data must be finite".into()));
    }
    let system = System::new(&grid, rows);
    // Start from the mean of the boundary samples.
    let samples: Vec<f64> = grid.shape().boundary_samples(256).into_iter().map(g).collect();
    let mean = samples.iter().sum::<f64>() / samples.len() as f64;
    let mut x: Vec<f64> = (0..grid.len())
        .map(|p| {
            if grid.is_inside(p) {
                mean
            } else if data[p].is_finite() {
                data[p]
            } else {
                f64::NAN
            }
        })
        .collect();
    let stats = system.solve(&mut x, None, opts)?;
    Ok((ScalarField::from_values(grid, x)?, stats))
}

/// Largest `|u(p) − average of neighbours|` over inside nodes whose stencil
/// stays inside and that satisfy `keep`.
pub fn mean_value_residual(u: &ScalarField, keep: impl Fn(usize) -> bool) -> f64 {
    let grid = u.grid();
    let mut worst: f64 = 0.0;
    for p in 0..grid.len() {
        if !grid.is_inside(p) || !keep(p) {
            continue;
        }
        let nb = grid.neighbours(p);
        if nb.iter().any(|q| q.is_none_or(|q| !grid.is_inside(q))) {
            continue;
        }
        let avg = nb.iter().map(|q| u.at(q.unwrap())).sum::<f64>() / 4.0;
        let r = (u.at(p) - avg).abs();
        if r.is_finite() {
            worst = worst.max(r);
        }
    }
    worst
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fields::Shape;

    #[test]
    fn constant_data() {
        let g = Arc::new(GridDomain::new(Shape::unit_disk(), 1.0 / 32.0).unwrap());
        let (u, _) = solve_dirichlet(g.clone(), &|_| 3.0, &RelaxOptions::default()).unwrap();
        for p in 0..g.len() {
            assert!((u.at(p) - 3.0).abs() < 1e-9);
        }
    }

    #[test]
    fn harmonic_trace_is_reproduced() {
        let g = Arc::new(GridDomain::new(Shape::unit_disk(), 1.0 / 64.0).unwrap());
        let (u, stats) = solve_dirichlet(g.clone(), &|z| z.re, &RelaxOptions::default()).unwrap();
        assert!(stats.last_step < 1e-10);
        for p in 0..g.len() {
            assert!((u.at(p) - g.point_flat(p).re).abs() <= 1e-6);
        }
        let sq = |z: Complex64| (z * z).re;
        let (v, _) = solve_dirichlet(g.clone(), &sq, &RelaxOptions::default()).unwrap();
        for p in 0..g.len() {
            assert!((v.at(p) - sq(g.point_flat(p))).abs() <= 1e-6);
        }
    }

    #[test]
    fn curved_rectangle_and_annulus() {
        let rect = Shape::Rectangle { x_min: -0.53, x_max: 0.61, y_min: -0.4, y_max: 0.37 };
        let g = Arc::new(GridDomain::new(rect, 1.0 / 64.0).unwrap());
        let f = |z: Complex64| z.re * z.im + 2.0 * z.re;
        let (u, _) = solve_dirichlet(g.clone(), &f, &RelaxOptions::default()).unwrap();
        for p in 0..g.len() {
            assert!((u.at(p) - f(g.point_flat(p))).abs() <= 1e-6);
        }
        let ann = Shape::Annulus { center: Complex64::new(0.0, 0.0), inner: 0.3, outer: 1.0 };
        let g = Arc::new(GridDomain::new(ann, 1.0 / 64.0).unwrap());
        let lg = |z: Complex64| z.norm().ln();
        let (u, _) = solve_dirichlet(g.clone(), &lg, &RelaxOptions::default()).unwrap();
        let worst = (0..g.len()).map(|p| (u.at(p) - lg(g.point_flat(p))).abs()).fold(0.0, f64::max);
        assert!(worst < 1e-3, "{worst}");
    }

    #[test]
    fn non_convergence_is_reported() {
        let g = Arc::new(GridDomain::new(Shape::unit_disk(), 1.0 / 32.0).unwrap());
        let opts = RelaxOptions { max_sweeps: 3, ..Default::default() };
        assert!(matches!(
            solve_dirichlet(g, &|z| z.re, &opts),
            Err(Error::NotConverged { sweeps: 3, .. })
        ));
    }
}
