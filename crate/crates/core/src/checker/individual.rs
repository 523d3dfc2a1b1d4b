//! Finiteness of weighted zero sums near the boundary for a single function.

use num_complex::Complex64;
use serde::Serialize;

use super::{passes, verify_uniform, CheckOptions, InequalityReport};
use crate::error::{Error, NodeIndex, Result};
use crate::fields::{ExclusionSet, MajorantSpec, ScalarField};
use crate::green::{extend_green, green_function, ModelDomain};
use crate::testfn::{classify_test, greatest_minorant, Dominance, TestFunction, TestReport, DECAY_CELLS};
use crate::zeros::{weighted_zero_sum, HoloFunction, ZeroDivisor};

/// Outcome of [`verify_individual_1`].
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct BoundednessReport {
    /// `Σ v·Z` over the zeros in `S_k∖S₀`, one entry per ring of the ladder.
    pub partial_sums: Vec<f64>,
    /// `Σ v·Z` over all zeros in `D∖S₀`.
    pub full_sum: f64,
    /// Right-hand side of the uniform bound on `D∖S₀`.
    pub budget: f64,
    /// `∫_{D∖S₀} w dν_M`.
    pub w_integral: f64,
    pub monotone: bool,
    pub bounded: bool,
    pub uniform: InequalityReport,
    pub verdict: bool,
}

/// Hypothesis on the boundary behaviour of the obstacle.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, serde::Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum KeyCondition {
    /// `w → 0` at `∂D`, tested on the outermost collar.
    Decay,
    /// `D` is regular for the Dirichlet problem.
    Regular,
}

/// Outcome of [`verify_individual_2`].
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct MinorantCheckReport {
    pub key: KeyCondition,
    /// Largest obstacle value next to `S`.
    pub b: f64,
    /// Bound used for the test class (`b`, or 1 when `b = 0`).
    pub b_used: f64,
    /// `∫_{D∖S} w dν_M`.
    pub w_integral: f64,
    pub sweeps: usize,
    pub last_step: f64,
    /// `max (gm w − w)` over `D∖S`; `≤ 0` up to round-off.
    pub above_obstacle: f64,
    /// `max |gm w − w|` over `D∖S`.
    pub distance_to_obstacle: f64,
    pub dominance: Dominance,
    pub test: TestReport,
    pub uniform: InequalityReport,
    pub verdict: bool,
}

fn node_witness(grid: &crate::fields::GridDomain, z: Complex64) -> Vec<NodeIndex> {
    grid.nearest(z).map(|p| grid.unflat(p)).into_iter().collect()
}

/// Checks that `v ≤ w` on the support of `ν_M` in `D∖S`.
fn below_on_support(m: &MajorantSpec, v: &ScalarField, w: &ScalarField, s: &ExclusionSet) -> Result<()> {
    let grid = v.grid();
    let d = *grid.shape();
    let slack = |x: f64| 1e-9 * x.abs().max(1.0);
    let mut witnesses = Vec::new();
    for a in m.charge.atoms() {
        if a.mass != 0.0 && d.contains(a.point) && !s.contains(a.point) {
            let (vv, ww) = (v.eval(a.point)?, w.eval(a.point)?);
            if vv > ww + slack(ww) {
                witnesses.extend(node_witness(grid, a.point));
            }
        }
    }
    for (p, z, mass) in m.charge.cell_masses() {
        if mass.abs() > 1e-14 && grid.is_inside(p) && !s.contains(z) && v.at(p) > w.at(p) + slack(w.at(p)) {
            witnesses.push(grid.unflat(p));
        }
    }
    if witnesses.is_empty() {
        Ok(())
    } else {
        Err(Error::Precondition {
            what: "v <= w fails on the support of the majorant's charge".into(),
            witnesses,
        })
    }
}

fn w_integral(m: &MajorantSpec, w: &ScalarField, s: &ExclusionSet) -> Result<f64> {
    let d = *w.grid().shape();
    let x = m.charge.integrate_field(w, |z| d.contains(z) && !s.contains(z))?;
    if !x.is_finite() {
        return Err(Error::Precondition {
            what: "the integral of w against the majorant's charge diverges".into(),
            witnesses: Vec::new(),
        });
    }
    Ok(x)
}

/// Partial sums of `Σ v·Z` along an exhaustion `S₀ ⊂ S₁ ⊂ …` with
/// `S₀ = v.exclusion()`, each compared with the uniform bound on `D∖S₀`.
///
/// `z` defaults to the full divisor of `f` and must be a subdivisor of it.
#[allow(clippy::too_many_arguments)]
pub fn verify_individual_1(
    f: &HoloFunction,
    z: Option<&ZeroDivisor>,
    m: &MajorantSpec,
    w: &ScalarField,
    v: &TestFunction,
    exhaustion: &[ExclusionSet],
    z0: Complex64,
    opts: &CheckOptions,
) -> Result<BoundednessReport> {
    let z = z.unwrap_or(&f.zeros);
    if !z.is_subdivisor_of(&f.zeros) {
        return Err(Error::InvalidArgument("Z is not a subdivisor of the zero divisor of f".into()));
    }
    w.require_same_grid(v.field())?;
    let s0 = v.exclusion();
    let mut inner = s0;
    for sk in exhaustion {
        if !inner.boundary_samples(256).into_iter().all(|q| sk.contains(q)) {
            return Err(Error::Geometry("the exhaustion is not increasing".into()));
        }
        inner = sk;
    }
    below_on_support(m, v.field(), w, s0)?;
    let w_integral = w_integral(m, w, s0)?;

    let d = *v.field().grid().shape();
    let within = |keep: &dyn Fn(Complex64) -> bool| {
        ZeroDivisor::new(
            z.entries()
                .iter()
                .filter(|e| d.contains(e.point) && keep(e.point))
                .map(|e| (e.point, e.multiplicity))
                .collect(),
        )
    };
    let partial_sums = exhaustion
        .iter()
        .map(|sk| weighted_zero_sum(&within(&|q| sk.contains(q))?, v.field(), s0))
        .collect::<Result<Vec<f64>>>()?;
    let full_sum = weighted_zero_sum(&within(&|_| true)?, v.field(), s0)?;
    let uniform = verify_uniform(f, m, v, s0, z0, v.bound(), opts)?;
    let budget = uniform.rhs;
    let monotone = partial_sums.windows(2).all(|p| p[1] >= p[0] - 1e-12);
    let bounded = partial_sums
        .iter()
        .chain(std::iter::once(&full_sum))
        .all(|&p| passes(p, budget, opts.tolerance));
    Ok(BoundednessReport {
        verdict: monotone && bounded && uniform.verdict,
        partial_sums,
        full_sum,
        budget,
        w_integral,
        monotone,
        bounded,
        uniform,
    })
}

/// Replaces `w` by its greatest subharmonic minorant on `D∖S`, checks that
/// the result is a test function dominated by `C·g_D(·, z₀)`, and runs the
/// uniform check with it.
pub fn verify_individual_2(
    f: &HoloFunction,
    m: &MajorantSpec,
    w: &ScalarField,
    s: &ExclusionSet,
    z0: Complex64,
    key: KeyCondition,
    opts: &CheckOptions,
) -> Result<MinorantCheckReport> {
    w.require_same_grid(&m.u1)?;
    let grid = w.grid();
    let h = grid.spacing();
    let off_s = |p: usize| grid.is_inside(p) && !s.contains(grid.point_flat(p));
    let negative: Vec<NodeIndex> = (0..grid.len())
        .filter(|&p| off_s(p) && w.at(p) < 0.0)
        .map(|p| grid.unflat(p))
        .collect();
    if !negative.is_empty() {
        return Err(Error::Precondition {
            what: "the obstacle takes negative values".into(),
            witnesses: negative,
        });
    }
    match key {
        KeyCondition::Decay => {
            let tol = DECAY_CELLS * h;
            let high: Vec<NodeIndex> = grid
                .collar_nodes(1)
                .into_iter()
                .filter(|&p| off_s(p) && w.at(p) > tol)
                .map(|p| grid.unflat(p))
                .collect();
            if !high.is_empty() {
                return Err(Error::Precondition {
                    what: "condition (i) fails: w does not tend to 0 at the boundary".into(),
                    witnesses: high,
                });
            }
        }
        KeyCondition::Regular => {
            // Disks, annuli and rectangles are all regular.
        }
    }
    let w_integral = w_integral(m, w, s)?;
    let gm = greatest_minorant(w, s)?;
    let b = gm.fixed.iter().map(|&p| w.at(p)).fold(0.0, f64::max);
    if !b.is_finite() {
        return Err(Error::Precondition {
            what: "w is unbounded next to S".into(),
            witnesses: gm.fixed.iter().filter(|&&p| !w.at(p).is_finite()).map(|&p| grid.unflat(p)).collect(),
        });
    }
    let b_used = if b > 0.0 { b } else { 1.0 };
    let defined = |p: usize| off_s(p) && gm.field.is_defined(p) && w.at(p).is_finite();
    let (mut above, mut dist) = (f64::NEG_INFINITY, 0.0f64);
    for p in (0..grid.len()).filter(|&p| defined(p)) {
        let d = gm.field.at(p) - w.at(p);
        above = above.max(d);
        dist = dist.max(d.abs());
    }
    let test = classify_test(&gm.field, s, b_used);
    if let Some(clause) = test.failing {
        let path = match key {
            KeyCondition::Decay => "condition (i)",
            KeyCondition::Regular => "condition (ii)",
        };
        return Err(Error::Precondition {
            what: format!("the minorant is not a test function under {path}: {clause:?} fails"),
            witnesses: test.witnesses,
        });
    }
    let tf = TestFunction::new(gm.field.clone(), s.clone(), b_used)?;
    let g = extend_green(
        &green_function(&ModelDomain::from_shape(*grid.shape()), z0, w.grid_arc().clone())?,
        &ModelDomain::from_shape(*grid.shape()),
    );
    let dominance = gm.dominance(&g, b_used)?;
    let uniform = verify_uniform(f, m, &tf, s, z0, b_used, opts)?;
    let verdict = uniform.verdict
        && above <= 1e-9 * b_used.max(1.0)
        && dominance.worst_excess <= opts.tolerance * b_used.max(1.0);
    Ok(MinorantCheckReport {
        key,
        b,
        b_used,
        w_integral,
        sweeps: gm.stats.sweeps,
        last_step: gm.stats.last_step,
        above_obstacle: above,
        distance_to_obstacle: dist,
        dominance,
        test,
        uniform,
        verdict,
    })
}
