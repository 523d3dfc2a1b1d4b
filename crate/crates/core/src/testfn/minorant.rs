//! Greatest subharmonic minorant of an obstacle on `D∖S` with zero boundary
//! values at `∂D`, by projected over-relaxation.

use log::warn;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::fields::{ExclusionSet, ScalarField};
use crate::green::dirichlet::{sw_row, Row, System};
use crate::green::{RelaxOptions, RelaxStats};

/// Options of [`greatest_minorant_with`].
#[derive(Debug, Clone, Copy, PartialEq, serde::Serialize)]
pub struct MinorantOptions {
    pub relax: RelaxOptions,
}

impl Default for MinorantOptions {
    fn default() -> Self {
        Self {
            relax: RelaxOptions {
                tolerance: 1e-13,
                max_sweeps: 1_000_000,
                omega: None,
            },
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Role {
    Outside,
    InS,
    NextToS,
    Free,
}

/// Output of the minorant relaxation.
#[derive(Debug, Clone)]
pub struct MinorantResult {
    /// The minorant on `D∖S`, 0 outside `D`, undefined on `S`.
    pub field: ScalarField,
    pub stats: RelaxStats,
    /// Nodes where a non-finite obstacle value was clipped.
    pub clipped: usize,
    /// Nodes of `D∖S` next to `S`, where the minorant equals the obstacle.
    pub fixed: Vec<usize>,
}

/// Dominance data of [`MinorantResult::dominance`].
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Dominance {
    /// `b / min g` over the nodes next to `S`.
    pub constant: f64,
    /// `max (minorant − constant·g)` over `D∖S`; `≤ 0` means dominated.
    pub worst_excess: f64,
}

impl MinorantResult {
    /// `max (candidate − minorant)` over the nodes where the minorant is
    /// defined; `≤ 0` means the minorant dominates the candidate.
    pub fn excess_of(&self, candidate: &ScalarField) -> Result<f64> {
        self.field.require_same_grid(candidate)?;
        Ok((0..self.field.grid().len())
            .filter(|&p| self.field.grid().is_inside(p) && self.field.is_defined(p) && candidate.is_defined(p))
            .map(|p| candidate.at(p) - self.field.at(p))
            .fold(f64::NEG_INFINITY, f64::max))
    }

    /// Compares the minorant of `w ≤ b` with `C·g` where
    /// `C = b / min g` over the fixed nodes next to `S`.
    pub fn dominance(&self, g: &ScalarField, b: f64) -> Result<Dominance> {
        self.field.require_same_grid(g)?;
        let gmin = self.fixed.iter().map(|&p| g.at(p)).fold(f64::INFINITY, f64::min);
        if !(gmin > 0.0) {
            return Err(Error::Degenerate("the Green function vanishes next to S".into()));
        }
        let constant = b / gmin;
        let grid = self.field.grid();
        let worst_excess = (0..grid.len())
            .filter(|&p| grid.is_inside(p) && self.field.is_defined(p))
            .map(|p| self.field.at(p) - constant * g.at(p))
            .fold(f64::NEG_INFINITY, f64::max);
        Ok(Dominance { constant, worst_excess })
    }
}

/// [`greatest_minorant_with`] with default options.
pub fn greatest_minorant(w: &ScalarField, s: &ExclusionSet) -> Result<MinorantResult> {
    greatest_minorant_with(w, s, &MinorantOptions::default())
}

/// Largest grid function `v ≤ w` on `D∖S` that is discretely subharmonic at
/// every node whose stencil avoids `S`, with boundary value 0 at `∂D`
/// (Shortley–Weller arms on the outermost collar).
///
/// Nodes next to `S` carry no sub-mean-value constraint and therefore take
/// the obstacle value. The iteration starts from `min(w, H)` with `H` the
/// discrete harmonic function sharing those fixed values, and applies
/// `v ← min(w, relaxed neighbour average)` until the largest update falls
/// below the tolerance. Non-finite obstacle values inside are clipped to the
/// smallest finite obstacle value, with a warning.
pub fn greatest_minorant_with(w: &ScalarField, s: &ExclusionSet, opts: &MinorantOptions) -> Result<MinorantResult> {
    let grid = w.grid();
    let n = grid.len();
    let role: Vec<Role> = (0..n)
        .map(|p| {
            let z = grid.point_flat(p);
            if !grid.is_inside(p) {
                Role::Outside
            } else if s.contains(z) {
                Role::InS
            } else if grid.neighbours(p).iter().flatten().any(|&q| s.contains(grid.point_flat(q))) {
                Role::NextToS
            } else {
                Role::Free
            }
        })
        .collect();

    let in_domain = |p: usize| matches!(role[p], Role::NextToS | Role::Free);
    let finite_min = (0..n)
        .filter(|&p| in_domain(p) && w.at(p).is_finite())
        .map(|p| w.at(p))
        .fold(f64::INFINITY, f64::min);
    if !finite_min.is_finite() {
        return Err(Error::InvalidArgument("obstacle has no finite value on D∖S".into()));
    }
    let mut clipped = 0usize;
    let cap: Vec<f64> = (0..n)
        .map(|p| {
            if !in_domain(p) {
                return f64::NAN;
            }
            let x = w.at(p);
            if x.is_finite() {
                x
            } else if x == f64::INFINITY {
                f64::MAX
            } else {
                clipped += 1;
                finite_min
            }
        })
        .collect();
    if clipped > 0 {
        warn!("obstacle clipped to {finite_min} at {clipped} nodes");
    }

    let fixed_value = |p: usize| if role[p] == Role::NextToS { cap[p] } else { 0.0 };
    let rows: Vec<Row> = (0..n)
        .filter(|&p| role[p] == Role::Free)
        .map(|p| sw_row(grid, p, &|q| role[q] == Role::Free, &fixed_value, &|_| 0.0))
        .collect();
    if rows.iter().any(|r| !r.constant.is_finite()) {
        return Err(Error::InvalidArgument("obstacle next to S or ∂D is not finite".into()));
    }
    let system = System::new(grid, rows);

    let mut x: Vec<f64> = (0..n)
        .map(|p| match role[p] {
            Role::Outside => 0.0,
            Role::InS => f64::NAN,
            Role::NextToS => fixed_value(p),
            Role::Free => 0.0,
        })
        .collect();
    let harmonic = RelaxOptions { tolerance: 1e-10, ..opts.relax };
    system.solve(&mut x, None, &harmonic)?;
    for p in 0..n {
        if role[p] == Role::Free {
            x[p] = x[p].min(cap[p]);
        }
    }
    let stats = system.solve(&mut x, Some(&cap), &opts.relax)?;
    let fixed = (0..n).filter(|&p| role[p] == Role::NextToS).collect();
    Ok(MinorantResult {
        field: ScalarField::from_values(w.grid_arc().clone(), x)?,
        stats,
        clipped,
        fixed,
    })
}
