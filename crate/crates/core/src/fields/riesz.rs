//! Riesz charge extraction, the discrete sub-mean-value test and the
//! `dom M` shell test.
//!
//! Cell masses come from the 5-point Laplacian: for a node with spacing `h`
//! the mass is `(Σ neighbours − 4u)/s₁` with `s₁ = 2π`. Logarithmic
//! singularities are found as seeds (infinite markers, isolated undefined
//! nodes, or cells with a large mass) and turned into atoms whose mass is the
//! discrete flux through a `(2k+1)²` block around the seed. The flux of
//! `log|z|` through such a block is not exactly `2π` on the lattice, so the
//! block flux is divided by the lattice value. The atom position is
//! recovered from the discrete Green identity with the coordinate functions.
//! The singular part `Σ m log|z − a|` is then subtracted and the remaining
//! field yields the cell density.

use std::f64::consts::TAU;
use std::sync::OnceLock;

use num_complex::Complex64;

use super::charge::{hahn_jordan, Atom, RieszCharge};
use super::grid::GridDomain;
use super::scalar::ScalarField;
use crate::error::{Error, NodeIndex, Result};
use crate::kernels::Dimension;

/// Knobs of the extraction.
#[derive(Debug, Clone, PartialEq)]
pub struct RieszOptions {
    /// Minimum |mass| for a seed to become an atom.
    pub atom_threshold: f64,
    /// Minimum |cell mass| for a cell to become a seed.
    pub seed_threshold: f64,
    /// Half-width `k` of the flux block.
    pub block_half_width: usize,
}

impl Default for RieszOptions {
    fn default() -> Self {
        Self {
            atom_threshold: 0.5,
            seed_threshold: 0.05,
            block_half_width: 3,
        }
    }
}

/// Result of [`riesz_extract`]: the charge plus the regularized field.
#[derive(Debug, Clone)]
pub struct RieszExtraction {
    pub charge: RieszCharge,
    /// `u − Σ m log|z − a|` at every node, `NaN` where undefined or singular.
    pub regular: Vec<f64>,
}

/// Flux of `log|z|` through the boundary of the `(2k+1)²` block centred at
/// the origin of the unit lattice, divided by `2π`.
pub fn lattice_flux_factor(k: usize) -> f64 {
    static CACHE: OnceLock<Vec<f64>> = OnceLock::new();
    let table = CACHE.get_or_init(|| (0..=16).map(flux_factor_uncached).collect());
    table.get(k).copied().unwrap_or_else(|| flux_factor_uncached(k))
}

fn flux_factor_uncached(k: usize) -> f64 {
    let k = k as i64;
    let lg = |a: i64, b: i64| 0.5 * ((a * a + b * b) as f64).ln();
    let mut f = 0.0;
    for t in -k..=k {
        // east, west, north, south sides
        f += lg(k + 1, t) - lg(k, t);
        f += lg(-k - 1, t) - lg(-k, t);
        f += lg(t, k + 1) - lg(t, k);
        f += lg(t, -k - 1) - lg(t, -k);
    }
    f / TAU
}

/// Riesz charge `Δu/s₁` of a planar field with default options.
pub fn riesz_measure(u: &ScalarField) -> Result<RieszCharge> {
    Ok(riesz_extract(u, &RieszOptions::default())?.charge)
}

/// Raw 5-point stencil sum `Σ neighbours − 4u` where all five values are
/// finite.
fn stencil(grid: &GridDomain, v: &[f64], p: usize) -> Option<f64> {
    let c = v[p];
    if !c.is_finite() {
        return None;
    }
    let mut s = -4.0 * c;
    for q in grid.neighbours(p) {
        let x = v[q?];
        if !x.is_finite() {
            return None;
        }
        s += x;
    }
    Some(s)
}

/// `Σ (x_p v_q − v_p x_q)` over the boundary edges of the block around node
/// `c`, coordinates relative to `c`.
fn block_moment(grid: &GridDomain, v: &[f64], c: usize, k: i64) -> Option<Complex64> {
    let (ci, cj) = grid.lattice(c);
    let cz = grid.point_flat(c);
    let mut moment = Complex64::new(0.0, 0.0);
    for t in -k..=k {
        for (pi, pj, qi, qj) in [
            (ci + k, cj + t, ci + k + 1, cj + t),
            (ci - k, cj + t, ci - k - 1, cj + t),
            (ci + t, cj + k, ci + t, cj + k + 1),
            (ci + t, cj - k, ci + t, cj - k - 1),
        ] {
            let p = grid.from_lattice(pi, pj)?;
            let q = grid.from_lattice(qi, qj)?;
            let (vp, vq) = (v[p], v[q]);
            if !vp.is_finite() || !vq.is_finite() {
                return None;
            }
            moment += (grid.point_flat(p) - cz) * vq - (grid.point_flat(q) - cz) * vp;
        }
    }
    Some(moment)
}

struct Seed {
    node: usize,
    marker: bool,
    weight: f64,
}

/// Full extraction with explicit options.
pub fn riesz_extract(u: &ScalarField, opts: &RieszOptions) -> Result<RieszExtraction> {
    let grid = u.grid();
    let vals = u.values();
    let n = grid.len();

    let raw: Vec<Option<f64>> = (0..n).map(|p| stencil(grid, vals, p)).collect();
    if raw.iter().all(Option::is_none) {
        return Err(Error::RegionTooSmall);
    }

    // Seeds.
    let mut seeds = Vec::new();
    for p in 0..n {
        let v = vals[p];
        let isolated_hole = v.is_nan()
            && grid
                .neighbours(p)
                .iter()
                .all(|q| q.is_some_and(|q| vals[q].is_finite()));
        if v.is_infinite() || isolated_hole {
            seeds.push(Seed { node: p, marker: true, weight: f64::INFINITY });
        } else if let Some(s) = raw[p] {
            let m = s / TAU;
            if m.abs() > opts.seed_threshold {
                seeds.push(Seed { node: p, marker: false, weight: m.abs() });
            }
        }
    }
    seeds.sort_by(|a, b| b.weight.total_cmp(&a.weight).then(a.node.cmp(&b.node)));

    let k = opts.block_half_width as i64;
    let ck = lattice_flux_factor(opts.block_half_width);
    let h = grid.spacing();
    let cheb = |p: usize, q: usize| {
        let (a, b) = grid.lattice(p);
        let (c, d) = grid.lattice(q);
        (a - c).abs().max((b - d).abs())
    };

    let mut centres: Vec<(usize, bool)> = Vec::new();
    for s in &seeds {
        if centres.iter().all(|&(c, _)| cheb(c, s.node) > k) {
            centres.push((s.node, s.marker));
        }
    }

    // Block flux and dipole moment for each centre.
    let mut atoms: Vec<(Atom, usize)> = Vec::new();
    for &(c, marker) in &centres {
        let (ci, cj) = grid.lattice(c);
        let cz = grid.point_flat(c);
        let mut flux = 0.0;
        let mut moment = Complex64::new(0.0, 0.0);
        let mut ok = true;
        'edges: for t in -k..=k {
            for (pi, pj, qi, qj) in [
                (ci + k, cj + t, ci + k + 1, cj + t),
                (ci - k, cj + t, ci - k - 1, cj + t),
                (ci + t, cj + k, ci + t, cj + k + 1),
                (ci + t, cj - k, ci + t, cj - k - 1),
            ] {
                let (Some(p), Some(q)) = (grid.from_lattice(pi, pj), grid.from_lattice(qi, qj)) else {
                    ok = false;
                    break 'edges;
                };
                let (up, uq) = (vals[p], vals[q]);
                if !up.is_finite() || !uq.is_finite() {
                    ok = false;
                    break 'edges;
                }
                let xp = grid.point_flat(p) - cz;
                let xq = grid.point_flat(q) - cz;
                flux += uq - up;
                moment += xp * uq - xq * up;
            }
        }
        if !ok {
            continue;
        }
        let mass = flux / (TAU * ck);
        if mass.abs() < opts.atom_threshold {
            continue;
        }
        let offset = moment / flux;
        let point = if marker || !offset.is_finite() || offset.norm() > 1.5 * h {
            cz
        } else {
            cz + offset
        };
        atoms.push((Atom { point, mass }, c));
    }

    let regular_of = |atoms: &[(Atom, usize)]| -> Vec<f64> {
        (0..n)
            .map(|p| {
                let v = vals[p];
                if !v.is_finite() {
                    return f64::NAN;
                }
                let z = grid.point_flat(p);
                let mut r = v;
                for (a, _) in atoms {
                    let d = (z - a.point).norm();
                    if d == 0.0 {
                        return f64::NAN;
                    }
                    r -= a.mass * d.ln();
                }
                r
            })
            .collect()
    };
    let cells_of = |reg: &[f64]| -> Vec<f64> {
        (0..n)
            .map(|p| stencil(grid, reg, p).map_or(0.0, |s| s / TAU))
            .collect()
    };

    let mut regular = regular_of(&atoms);

    // The moment identity is exact only up to a lattice factor close to 1;
    // re-measuring the moment of the regular part removes most of the
    // remaining position error.
    for _ in 0..2 {
        let mut moved = false;
        for (atom, c) in atoms.iter_mut() {
            if vals[*c].is_infinite() || vals[*c].is_nan() {
                continue;
            }
            let Some(moment) = block_moment(grid, &regular, *c, k) else {
                continue;
            };
            let step = moment / (TAU * ck * atom.mass);
            if step.is_finite() && step.norm() < 0.5 * h {
                atom.point += step;
                moved = true;
            }
        }
        if !moved {
            break;
        }
        regular = regular_of(&atoms);
    }
    let mut cells = cells_of(&regular);

    // The block flux also carries the smooth density inside the block; move
    // it back to the cells using the density seen just outside the block.
    if !atoms.is_empty() {
        let side = (2 * k + 1) as f64;
        for (atom, c) in atoms.iter_mut() {
            let (ci, cj) = grid.lattice(*c);
            let mut sum = 0.0;
            let mut count = 0usize;
            for a in (ci - k - 3)..=(ci + k + 3) {
                for b in (cj - k - 3)..=(cj + k + 3) {
                    let d = (a - ci).abs().max((b - cj).abs());
                    if d <= k {
                        continue;
                    }
                    if let Some(q) = grid.from_lattice(a, b) {
                        if stencil(grid, &regular, q).is_some() {
                            sum += cells[q];
                            count += 1;
                        }
                    }
                }
            }
            if count > 0 {
                let density = sum / count as f64;
                atom.mass -= density * side * side / ck;
            }
        }
        regular = regular_of(&atoms);
        cells = cells_of(&regular);
    }

    let charge = RieszCharge::from_cells(u.grid_arc().clone(), cells)?
        .with_atoms(atoms.into_iter().map(|(a, _)| a).collect());
    Ok(RieszExtraction { charge, regular })
}

/// Where the sub-mean-value test is applied.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum CheckRegion {
    /// Inside nodes of the grid's domain.
    #[default]
    Inside,
    /// Inside nodes not in the exclusion set.
    Free,
    /// Every node with a defined stencil.
    Everywhere,
}

/// Options of [`check_subharmonic_with`].
#[derive(Debug, Clone, PartialEq)]
pub struct SubharmonicCheck {
    pub tol_abs: f64,
    /// Slack `tol_h2·h²` added to `tol_abs`.
    pub tol_h2: f64,
    /// Nodes closer than this many cells to a positive atom are skipped.
    pub atom_clearance: f64,
    /// Points `(x, r)` whose `r`-neighbourhood is not tested.
    pub exclude: Vec<(Complex64, f64)>,
    pub region: CheckRegion,
}

impl Default for SubharmonicCheck {
    fn default() -> Self {
        Self {
            tol_abs: 1e-9,
            tol_h2: 0.25,
            atom_clearance: 8.0,
            exclude: Vec::new(),
            region: CheckRegion::Inside,
        }
    }
}

/// Nodes violating the discrete sub-mean-value inequality, default options.
pub fn check_subharmonic(u: &ScalarField) -> Vec<NodeIndex> {
    check_subharmonic_with(u, &SubharmonicCheck::default())
}

/// Nodes where `u(centre) > average of the 4 neighbours + tolerance`, after
/// removal of the logarithmic singular part; negative atoms are reported at
/// their nearest node.
pub fn check_subharmonic_with(u: &ScalarField, opts: &SubharmonicCheck) -> Vec<NodeIndex> {
    let grid = u.grid();
    let h = grid.spacing();
    let (regular, atoms) = match riesz_extract(u, &RieszOptions::default()) {
        Ok(ext) => (ext.regular, ext.charge.atoms().to_vec()),
        Err(_) => (u.values().to_vec(), Vec::new()),
    };
    let excluded = |z: Complex64| opts.exclude.iter().any(|&(x, r)| (z - x).norm() <= r);
    let near_atom = |z: Complex64| {
        atoms
            .iter()
            .any(|a| a.mass > 0.0 && (z - a.point).norm() <= opts.atom_clearance * h)
    };
    let in_region = |p: usize| match opts.region {
        CheckRegion::Inside => grid.is_inside(p),
        CheckRegion::Free => grid.is_free(p),
        CheckRegion::Everywhere => true,
    };
    let tol = opts.tol_abs + opts.tol_h2 * h * h;
    let mut out = Vec::new();
    for p in 0..grid.len() {
        if !in_region(p) {
            continue;
        }
        if opts.region == CheckRegion::Free
            && grid.neighbours(p).iter().any(|q| q.is_some_and(|q| grid.is_excluded(q)))
        {
            continue;
        }
        let Some(s) = stencil(grid, &regular, p) else {
            continue;
        };
        let z = grid.point_flat(p);
        if excluded(z) || near_atom(z) {
            continue;
        }
        // u − avg = −s/4
        if -s / 4.0 > tol {
            out.push(grid.unflat(p));
        }
    }
    for a in atoms.iter().filter(|a| a.mass < 0.0) {
        if excluded(a.point) {
            continue;
        }
        if let Some(p) = grid.nearest(a.point) {
            if in_region(p) {
                out.push(grid.unflat(p));
            }
        }
    }
    out.sort_unstable();
    out.dedup();
    out
}

/// Shell-ladder terms `|ν|(x, t_k)·(t_k − t_{k+1})/t_k^{m−1}` for dyadic
/// radii from `r_x` down to `floor`.
fn shell_terms(total_variation: &RieszCharge, x: Complex64, r_x: f64, floor: f64, m: Dimension) -> Vec<f64> {
    let mut terms = Vec::new();
    let mut t = r_x;
    while t >= floor {
        let mass = total_variation.ball_mass(x, t);
        terms.push(mass * (0.5 * t) / t.powi(m.get() as i32 - 1));
        t *= 0.5;
    }
    terms
}

/// Tests convergence of `∫₀^{r_x} |ν|(x,t)/t^{m−1} dt` on a dyadic shell
/// ladder from `r_x` down to `4h`; an atom within `4h` of `x` forces `false`.
pub fn dom_check(c: &RieszCharge, x: Complex64, r_x: f64, m: Dimension) -> bool {
    let h = c.grid().map_or(r_x / 1024.0, |g| g.spacing());
    if c.atoms().iter().any(|a| a.mass != 0.0 && (a.point - x).norm() <= 4.0 * h) {
        return false;
    }
    let abs = c.abs();
    let terms = shell_terms(&abs, x, r_x, 4.0 * h, m);
    ladder_converges(&terms)
}

fn ladder_converges(terms: &[f64]) -> bool {
    if terms.iter().any(|t| !t.is_finite()) {
        return false;
    }
    if terms.len() < 2 {
        return true;
    }
    let total: f64 = terms.iter().sum();
    let last = terms[terms.len() - 1];
    let prev = terms[terms.len() - 2];
    !(last > 1e-12 * (1.0 + total) && last >= 0.75 * prev)
}

/// `dom_check` at every `stride`-th node of the lattice with a local ladder
/// of radius `16h`; unsampled nodes copy the nearest sample, and nodes near
/// atoms or where `finite` is false are always outside.
pub fn dom_mask(c: &RieszCharge, grid: &GridDomain, finite: &[bool], stride: usize) -> Vec<bool> {
    let h = grid.spacing();
    let stride = stride.max(1) as i64;
    let (pos, neg) = hahn_jordan(c);
    let abs_cells: Vec<f64> = if pos.cells().is_empty() {
        vec![0.0; grid.len()]
    } else {
        pos.cells().iter().zip(neg.cells()).map(|(a, b)| a + b).collect()
    };
    let r_x = 16.0 * h;
    let window = 17i64;
    let m = Dimension::PLANE;
    let sample = |a: i64, b: i64| -> bool {
        let x = Complex64::new(a as f64 * h, b as f64 * h);
        if c.atoms().iter().any(|at| at.mass != 0.0 && (at.point - x).norm() <= 4.0 * h) {
            return false;
        }
        let mut local: Vec<(f64, f64)> = Vec::new();
        for at in c.atoms() {
            let d = (at.point - x).norm();
            if d <= r_x {
                local.push((d, at.mass.abs()));
            }
        }
        for da in -window..=window {
            for db in -window..=window {
                if let Some(q) = grid.from_lattice(a + da, b + db) {
                    if abs_cells[q] != 0.0 {
                        local.push(((grid.point_flat(q) - x).norm(), abs_cells[q]));
                    }
                }
            }
        }
        let mut terms = Vec::new();
        let mut t = r_x;
        while t >= 4.0 * h {
            let mass: f64 = local.iter().filter(|(d, _)| *d <= t).map(|(_, w)| w).sum();
            terms.push(mass * (0.5 * t) / t.powi(m.get() as i32 - 1));
            t *= 0.5;
        }
        ladder_converges(&terms)
    };
    let mut mask = vec![false; grid.len()];
    let mut cache = std::collections::HashMap::new();
    for p in 0..grid.len() {
        if !finite[p] {
            continue;
        }
        let (a, b) = grid.lattice(p);
        let z = grid.point_flat(p);
        if c.atoms().iter().any(|at| at.mass != 0.0 && (at.point - z).norm() <= 4.0 * h) {
            continue;
        }
        let key = (
            (a as f64 / stride as f64).round() as i64 * stride,
            (b as f64 / stride as f64).round() as i64 * stride,
        );
        mask[p] = *cache.entry(key).or_insert_with(|| sample(key.0, key.1));
    }
    mask
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fields::{GridDomain, Shape};
    use std::f64::consts::PI;
    use std::sync::Arc;

    fn disk(h: f64) -> Arc<GridDomain> {
        Arc::new(GridDomain::new(Shape::unit_disk(), h).unwrap())
    }

    #[test]
    fn flux_factor_table() {
        // Independent recomputation by walking the block boundary edge by edge.
        for k in [2usize, 3, 4, 6] {
            let k = k as i64;
            let mut f = 0.0;
            for a in -k..=k {
                for b in -k..=k {
                    if a.abs().max(b.abs()) != k {
                        continue;
                    }
                    for (da, db) in [(1, 0), (-1, 0), (0, 1), (0, -1)] {
                        let (c, d) = (a + da, b + db);
                        if c.abs().max(d.abs()) > k {
                            f += (((c * c + d * d) as f64).sqrt()).ln() - (((a * a + b * b) as f64).sqrt()).ln();
                        }
                    }
                }
            }
            assert!((f / (2.0 * PI) - lattice_flux_factor(k as usize)).abs() < 1e-14);
        }
        assert!((lattice_flux_factor(3) - 1.00433).abs() < 1e-4);
    }

    #[test]
    fn harmonic_field_has_no_mass() {
        let g = disk(1.0 / 64.0);
        let u = ScalarField::from_fn(g, |z| (z * z).re);
        let c = riesz_measure(&u).unwrap();
        assert!(c.atoms().is_empty());
        assert!(c.cells().iter().all(|m| m.abs() < 1e-8));
    }

    #[test]
    fn quadratic_density() {
        let h = 1.0 / 64.0;
        let g = disk(h);
        let u = ScalarField::from_fn(g.clone(), |z| z.norm_sqr());
        let c = riesz_measure(&u).unwrap();
        let expected = 4.0 * h * h / (2.0 * PI);
        for p in 0..g.len() {
            if g.is_inside(p) {
                assert!((c.cells()[p] - expected).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn log_atom_on_and_off_lattice() {
        let h = 1.0 / 128.0;
        let g = disk(h);
        for a in [Complex64::new(0.0, 0.0), Complex64::new(0.3, -0.1), Complex64::new(0.2037, 0.4119)] {
            let u = ScalarField::from_fn(g.clone(), move |z| (z - a).norm().ln());
            let c = riesz_measure(&u).unwrap();
            assert_eq!(c.atoms().len(), 1, "{a}");
            let atom = c.atoms()[0];
            assert!((atom.mass - 1.0).abs() < 1e-3, "{}", atom.mass);
            assert!((atom.point - a).norm() < 0.02 * h, "{} vs {a}", atom.point);
            let cell_total: f64 = c.cells().iter().map(|m| m.abs()).sum();
            assert!(cell_total < 1e-3, "{cell_total}");
        }
    }

    #[test]
    fn annulus_log_has_only_the_atom() {
        let h = 1.0 / 256.0;
        let shape = Shape::Annulus { center: Complex64::new(0.0, 0.0), inner: 0.1, outer: 1.0 };
        let g = Arc::new(GridDomain::new(shape, h).unwrap());
        let u = ScalarField::from_fn(g, |z| z.norm().ln());
        let c = riesz_measure(&u).unwrap();
        assert_eq!(c.atoms().len(), 1);
        assert!((c.atoms()[0].mass - 1.0).abs() <= 0.02);
        assert!(c.atoms()[0].point.norm() < 1e-12);
        assert!(c.cells().iter().all(|m| m.abs() < 1e-6));
    }

    #[test]
    fn atom_with_smooth_background() {
        let h = 1.0 / 64.0;
        let g = disk(h);
        let a = Complex64::new(0.25, 0.25);
        let u = ScalarField::from_fn(g, move |z| (z - a).norm().ln() + 2.0 * z.norm_sqr());
        let c = riesz_measure(&u).unwrap();
        assert!((c.atoms()[0].mass - 1.0).abs() < 1e-4, "{}", c.atoms()[0].mass);
    }

    #[test]
    fn subharmonic_examples() {
        let g = disk(1.0 / 64.0);
        assert!(check_subharmonic(&ScalarField::from_fn(g.clone(), |z| z.norm_sqr())).is_empty());
        let neg = check_subharmonic(&ScalarField::from_fn(g.clone(), |z| -z.norm_sqr()));
        let inside_with_stencil = (0..g.len()).filter(|&p| g.is_inside(p)).count();
        assert_eq!(neg.len(), inside_with_stencil);
        let a = Complex64::new(0.3, 0.2);
        let b = Complex64::new(-0.4, 0.1);
        let mx = ScalarField::from_fn(g.clone(), move |z| (z - a).norm().ln().max((z - b).norm().ln()));
        assert!(check_subharmonic(&mx).is_empty());
        let lg = ScalarField::from_fn(g.clone(), move |z| (z - a).norm().ln());
        assert!(check_subharmonic(&lg).is_empty());
        let neg_log = ScalarField::from_fn(g, move |z| -(z - a).norm().ln());
        assert!(!check_subharmonic(&neg_log).is_empty());
    }

    #[test]
    fn dom_check_examples() {
        let x = Complex64::new(0.1, 0.1);
        let atom = RieszCharge::from_atoms(vec![Atom { point: x, mass: 1.0 }]);
        assert!(!dom_check(&atom, x, 0.25, Dimension::PLANE));
        assert!(dom_check(&RieszCharge::zero(), x, 0.25, Dimension::PLANE));
        let g = disk(1.0 / 64.0);
        let u = ScalarField::from_fn(g, |z| z.norm_sqr());
        let smooth = riesz_measure(&u).unwrap();
        assert!(dom_check(&smooth, x, 0.25, Dimension::PLANE));
    }

    #[test]
    fn dom_mask_excludes_atoms() {
        let h = 1.0 / 32.0;
        let g = disk(h);
        let a = Complex64::new(0.25, 0.0);
        let u = ScalarField::from_fn(g.clone(), move |z| (z - a).norm().ln() + z.norm_sqr());
        let c = riesz_measure(&u).unwrap();
        let finite: Vec<bool> = u.values().iter().map(|v| v.is_finite()).collect();
        let mask = dom_mask(&c, &g, &finite, 4);
        assert!(!mask[g.nearest(a).unwrap()]);
        assert!(mask[g.nearest(Complex64::new(-0.5, 0.0)).unwrap()]);
    }
}
