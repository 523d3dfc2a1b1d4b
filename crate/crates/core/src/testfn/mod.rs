//! Test functions near the boundary, the gluing theorem, the extension `Ṽ`
//! of a test function across `S`, its truncations `Vₙ`, and the greatest
//! subharmonic minorant.

mod minorant;

use std::sync::Arc;

use num_complex::Complex64;
use serde::Serialize;

use crate::error::{Error, NodeIndex, Result};
use crate::fields::{
    check_subharmonic_with, CheckRegion, Evaluator, ExclusionSet, GridDomain, ScalarField, SubharmonicCheck,
};
use crate::green::{extend_green, green_function, mean_value_residual, GreenFunction, ModelDomain};
use crate::jensen::normalization_ratio;

pub use minorant::{greatest_minorant, greatest_minorant_with, Dominance, MinorantOptions, MinorantResult};

/// Decay tolerance on the outermost collar, in cells.
pub const DECAY_CELLS: f64 = 10.0;

/// Boundary samples per ball of `S`.
pub const BOUNDARY_SAMPLES: usize = 1024;

/// Number of collars recorded in a decay profile.
const PROFILE_COLLARS: u32 = 8;

/// Nodes closer than this many cells to the pole are left out of the
/// harmonicity residual of `Ṽ` (the 5-point stencil of `log r` is off by
/// `O(h⁴/r⁴)`).
const POLE_CLEARANCE: f64 = 4.0;

/// Membership clauses of the test-function class.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum TestClause {
    Nonnegative,
    Subharmonic,
    Bounded,
    BoundaryDecay,
}

/// Outcome of [`classify_test`].
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TestReport {
    pub member: bool,
    pub failing: Option<TestClause>,
    pub witnesses: Vec<NodeIndex>,
    /// Supremum over the inside nodes of `D∖S`.
    pub sup: f64,
    pub bound: f64,
    /// Maxima over collars 1, 2, … (collar 1 is outermost).
    pub collar_maxima: Vec<f64>,
    pub decay_tolerance: f64,
}

fn off_s(grid: &GridDomain, s: &ExclusionSet, p: usize) -> bool {
    grid.is_inside(p) && !s.contains(grid.point_flat(p))
}

/// Maxima of `v` over the first collars of `D∖S`.
pub fn collar_profile(v: &ScalarField, s: &ExclusionSet) -> Vec<f64> {
    let grid = v.grid();
    let depth = grid.max_collar().min(PROFILE_COLLARS);
    (1..=depth)
        .map(|k| {
            grid.collar_nodes(k)
                .into_iter()
                .filter(|&p| !s.contains(grid.point_flat(p)))
                .map(|p| v.at(p))
                .fold(f64::NEG_INFINITY, f64::max)
        })
        .collect()
}

fn s_clearance(s: &ExclusionSet, pad: f64) -> Vec<(Complex64, f64)> {
    s.balls().iter().map(|b| (b.center, b.radius + pad)).collect()
}

/// [`classify_test_with`] with decay tolerance `10·h`.
pub fn classify_test(v: &ScalarField, s: &ExclusionSet, b: f64) -> TestReport {
    classify_test_with(v, s, b, DECAY_CELLS * v.grid().spacing())
}

/// Checks nonnegativity, subharmonicity on `D∖S`, `sup ≤ b` and decay on the
/// outermost collar, reporting the first failing clause.
pub fn classify_test_with(v: &ScalarField, s: &ExclusionSet, b: f64, decay_tolerance: f64) -> TestReport {
    let grid = v.grid();
    let h = grid.spacing();
    let nodes: Vec<usize> = (0..grid.len()).filter(|&p| off_s(grid, s, p)).collect();
    let sup = nodes.iter().map(|&p| v.at(p)).fold(f64::NEG_INFINITY, f64::max);
    let collar_maxima = collar_profile(v, s);
    let mut report = TestReport {
        member: true,
        failing: None,
        witnesses: Vec::new(),
        sup,
        bound: b,
        collar_maxima,
        decay_tolerance,
    };
    let fail = |r: &mut TestReport, clause, w: Vec<NodeIndex>| {
        r.member = false;
        r.failing = Some(clause);
        r.witnesses = w;
    };

    let negative: Vec<NodeIndex> = nodes
        .iter()
        .filter(|&&p| !(v.at(p) >= -1e-12))
        .map(|&p| grid.unflat(p))
        .collect();
    if !negative.is_empty() {
        fail(&mut report, TestClause::Nonnegative, negative);
        return report;
    }
    let check = SubharmonicCheck {
        exclude: s_clearance(s, 1.5 * h),
        region: CheckRegion::Inside,
        ..SubharmonicCheck::default()
    };
    let bad = check_subharmonic_with(v, &check);
    if !bad.is_empty() {
        fail(&mut report, TestClause::Subharmonic, bad);
        return report;
    }
    let slack = 1e-9 * b.abs().max(1.0);
    let high: Vec<NodeIndex> = nodes
        .iter()
        .filter(|&&p| v.at(p) > b + slack)
        .map(|&p| grid.unflat(p))
        .collect();
    if !high.is_empty() {
        fail(&mut report, TestClause::Bounded, high);
        return report;
    }
    if report.collar_maxima.first().is_some_and(|&m| m > decay_tolerance) {
        let w = grid
            .collar_nodes(1)
            .into_iter()
            .filter(|&p| !s.contains(grid.point_flat(p)) && v.at(p) > decay_tolerance)
            .map(|p| grid.unflat(p))
            .collect();
        fail(&mut report, TestClause::BoundaryDecay, w);
    }
    report
}

/// Member of the class of nonnegative subharmonic functions on `D∖S`,
/// bounded by `b` and tending to 0 at `∂D`.
#[derive(Debug, Clone)]
pub struct TestFunction {
    field: ScalarField,
    exclusion: ExclusionSet,
    bound: f64,
    profile: Vec<f64>,
}

impl TestFunction {
    /// Classifies `field`; a failing clause is returned as a precondition
    /// error with its witnesses.
    pub fn new(field: ScalarField, s: ExclusionSet, b: f64) -> Result<Self> {
        let r = classify_test(&field, &s, b);
        if let Some(clause) = r.failing {
            return Err(Error::Precondition {
                what: format!("not a test function: {clause:?} fails"),
                witnesses: r.witnesses,
            });
        }
        Ok(Self { field, exclusion: s, bound: b, profile: r.collar_maxima })
    }

    /// `v ≡ 0`, a member for every `b ≥ 0`.
    pub fn zero(grid: Arc<GridDomain>, s: ExclusionSet, b: f64) -> Result<Self> {
        Self::new(ScalarField::zeros(grid), s, b)
    }

    /// `b·g_D(·, y)/max_{∂S} g_D(·, y)` for a pole `y` inside `S`, extended by
    /// 0 outside `D`.
    pub fn green_family(dom: &ModelDomain, y: Complex64, s: ExclusionSet, grid: Arc<GridDomain>, b: f64) -> Result<Self> {
        if !s.contains_interior(y) {
            return Err(Error::Geometry("the Green pole must lie inside S".into()));
        }
        let g = extend_green(&green_function(dom, y, grid)?, dom);
        let top = s
            .boundary_samples(BOUNDARY_SAMPLES)
            .into_iter()
            .map(|z| g.eval(z))
            .collect::<Result<Vec<f64>>>()?
            .into_iter()
            .fold(0.0, f64::max);
        if !(top > 0.0) {
            return Err(Error::Degenerate("Green function vanishes on the boundary of S".into()));
        }
        // Grid values next to ∂S can exceed the sampled maximum by O(h);
        // the max over the grid nodes off S is folded in so the bound holds.
        let grid = g.grid();
        let node_top = (0..grid.len())
            .filter(|&p| off_s(grid, &s, p))
            .map(|p| g.at(p))
            .fold(0.0, f64::max);
        let k = b / top.max(node_top);
        Self::new(g.map(move |x| k * x), s, b)
    }

    pub fn field(&self) -> &ScalarField {
        &self.field
    }

    pub fn exclusion(&self) -> &ExclusionSet {
        &self.exclusion
    }

    pub fn bound(&self) -> f64 {
        self.bound
    }

    pub fn profile(&self) -> &[f64] {
        &self.profile
    }

    /// Pointwise scaling by `t ∈ [0, 1]` (the bound is kept).
    pub fn scaled(&self, t: f64) -> Result<Self> {
        Self::new(self.field.map(move |x| t * x), self.exclusion.clone(), self.bound)
    }
}

/// Compatibility tolerance of [`glue`].
pub const GLUE_TOLERANCE: f64 = 1e-9;

/// Gluing: `max{v, v0}` on `O`, `v0` on `O0∖O`, undefined elsewhere.
///
/// Compatibility is checked on the seam: for every node of `O0∖O` within two
/// rings of `O`, the largest value of `v` over the nodes of `O` in those two
/// rings must not exceed `v0` there.
pub fn glue(
    v: &ScalarField,
    in_o: impl Fn(Complex64) -> bool + Send + Sync + Clone + 'static,
    v0: &ScalarField,
    in_o0: impl Fn(Complex64) -> bool + Send + Sync + Clone + 'static,
) -> Result<ScalarField> {
    v.require_same_grid(v0)?;
    let grid = v.grid();
    let mut witnesses = Vec::new();
    for q in 0..grid.len() {
        let zq = grid.point_flat(q);
        if !in_o0(zq) || in_o(zq) {
            continue;
        }
        let (a, b) = grid.lattice(q);
        let mut limsup = f64::NEG_INFINITY;
        for da in -2..=2 {
            for db in -2..=2 {
                if let Some(p) = grid.from_lattice(a + da, b + db) {
                    if in_o(grid.point_flat(p)) && !v.at(p).is_nan() {
                        limsup = limsup.max(v.at(p));
                    }
                }
            }
        }
        let cap = v0.at(q);
        if limsup > cap + GLUE_TOLERANCE * cap.abs().max(1.0) {
            witnesses.push(grid.unflat(q));
        }
    }
    if !witnesses.is_empty() {
        return Err(Error::Precondition {
            what: "gluing compatibility fails on the seam".into(),
            witnesses,
        });
    }
    let values = (0..grid.len())
        .map(|p| {
            let z = grid.point_flat(p);
            if in_o(z) {
                v.at(p).max(v0.at(p))
            } else if in_o0(z) {
                v0.at(p)
            } else {
                f64::NAN
            }
        })
        .collect();
    let exact = match (v.evaluator(), v0.evaluator()) {
        (Some(e), Some(e0)) => {
            let (e, e0) = (e.clone(), e0.clone());
            Some(Arc::new(move |z: Complex64| {
                if in_o(z) {
                    e(z).max(e0(z))
                } else if in_o0(z) {
                    e0(z)
                } else {
                    f64::NAN
                }
            }) as Evaluator)
        }
        _ => None,
    };
    Ok(ScalarField::from_values(v.grid_arc().clone(), values)?.with_evaluator(exact))
}

/// Result of [`extend_test`].
#[derive(Debug, Clone)]
pub struct ExtendedTest {
    pub vtilde: ScalarField,
    /// `c̃ = inf_{∂S} g_{D̃}(·, x₀)/b`.
    pub c_tilde: f64,
    /// `inf_{∂S} g_{D̃}(·, x₀)`.
    pub green_inf: f64,
    pub green: GreenFunction,
}

/// Builds `Ṽ`: `g_{D̃}(·, x₀)` on `S`, `max{g, c̃·v}` on `D̃∖S`, `c̃·v` on
/// `D∖D̃` and 0 outside `D`.
pub fn extend_test(v: &TestFunction, x0: Complex64, dtilde: &ModelDomain, b: f64) -> Result<ExtendedTest> {
    let s = v.exclusion().clone();
    let grid = v.field().grid_arc().clone();
    let d = *grid.shape();
    if !(b > 0.0) {
        return Err(Error::InvalidArgument("b must be positive".into()));
    }
    if !s.contains_interior(x0) {
        return Err(Error::Geometry("x0 must lie in the interior of S".into()));
    }
    if !dtilde.regular {
        return Err(Error::Geometry("the auxiliary domain must be regular".into()));
    }
    let samples = s.boundary_samples(BOUNDARY_SAMPLES);
    if samples.iter().any(|&z| dtilde.boundary_distance(z) <= 0.0) {
        return Err(Error::Geometry("S is not compactly inside the auxiliary domain".into()));
    }
    let dt_shape = dtilde.shape().ok_or(Error::Dimension(1, "extend_test"))?;
    if dt_shape.boundary_samples(256).iter().any(|&z| !d.contains_closed(z, 1e-12)) {
        return Err(Error::Geometry("the auxiliary domain leaves D".into()));
    }
    let green = GreenFunction::new(dtilde, x0, grid.spacing())?;
    let a = green.inf_on(&samples);
    if !(a > 0.0) {
        return Err(Error::Degenerate(format!("inf of the Green function on the boundary of S is {a}")));
    }
    let c_tilde = a / b;

    let dt = *dtilde;
    let piece = {
        let s = s.clone();
        let g = green.clone();
        move |z: Complex64, vz: f64| -> f64 {
            if !d.contains(z) {
                0.0
            } else if s.contains(z) {
                g.eval(z)
            } else if dt.contains(z) {
                g.eval(z).max(c_tilde * vz)
            } else {
                c_tilde * vz
            }
        }
    };
    let vf = v.field();
    let values: Vec<f64> = (0..grid.len())
        .map(|p| {
            let z = grid.point_flat(p);
            let vz = if d.contains(z) && !s.contains(z) { vf.at(p) } else { 0.0 };
            piece(z, vz)
        })
        .collect();
    let vexact = vf.clone();
    let d2 = d;
    let s2 = s.clone();
    let exact: Evaluator = Arc::new(move |z: Complex64| {
        let vz = if d2.contains(z) && !s2.contains(z) {
            vexact.eval(z).unwrap_or(f64::NAN)
        } else {
            0.0
        };
        piece(z, vz)
    });
    Ok(ExtendedTest {
        vtilde: ScalarField::from_values(grid, values)?.with_evaluator(Some(exact)),
        c_tilde,
        green_inf: a,
        green,
    })
}

/// Discrete form of the three properties of `Ṽ`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ExtensionChecks {
    /// Largest 5-point mean-value defect on `Int S∖{x₀}` (nodes at least
    /// `4h` from the pole).
    pub harmonic_residual: f64,
    /// Largest value on the outermost collar of `D`.
    pub outer_collar_max: f64,
    pub ratio: f64,
    pub harmonic_ok: bool,
    pub decay_ok: bool,
    pub ratio_ok: bool,
}

impl ExtensionChecks {
    pub fn passed(&self) -> bool {
        self.harmonic_ok && self.decay_ok && self.ratio_ok
    }
}

/// Tolerance of the harmonicity residual of `Ṽ` on `Int S`.
pub const HARMONIC_TOLERANCE: f64 = 5e-3;

/// Checks harmonicity inside `S`, decay at `∂D` and the normalization.
pub fn check_extension(vt: &ScalarField, x0: Complex64, s: &ExclusionSet) -> Result<ExtensionChecks> {
    let grid = vt.grid();
    let h = grid.spacing();
    let harmonic_residual = mean_value_residual(vt, |p| {
        let z = grid.point_flat(p);
        (z - x0).norm() >= POLE_CLEARANCE * h
            && s.contains_interior(z)
            && grid.neighbours(p).iter().flatten().all(|&q| s.contains_interior(grid.point_flat(q)))
    });
    let outer_collar_max = grid.collar_nodes(1).into_iter().map(|p| vt.at(p)).fold(0.0, f64::max);
    let ratio = normalization_ratio(vt, x0)?;
    Ok(ExtensionChecks {
        harmonic_residual,
        outer_collar_max,
        ratio,
        harmonic_ok: harmonic_residual <= HARMONIC_TOLERANCE,
        decay_ok: outer_collar_max <= DECAY_CELLS * h,
        ratio_ok: (0.98..=1.02).contains(&ratio),
    })
}

/// `Vₙ = max{0, Ṽ − 1/n}`.
pub fn truncate_sequence(vtilde: &ScalarField, n: u32) -> Result<ScalarField> {
    if n == 0 {
        return Err(Error::InvalidArgument("n must be at least 1".into()));
    }
    let cut = 1.0 / f64::from(n);
    Ok(vtilde.map(move |x| (x - cut).max(0.0)))
}

/// Outcome of [`is_jensen_potential`].
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PotentialReport {
    pub nonnegative: bool,
    pub subharmonic_violations: Vec<NodeIndex>,
    /// Vanishes on the outermost collar and outside `D`.
    pub compact_support: bool,
    pub ratio: f64,
    pub tolerance: f64,
    pub verdict: bool,
}

/// Checks the defining properties of a Jensen potential with pole `x0`.
pub fn is_jensen_potential(v: &ScalarField, x0: Complex64, tolerance: f64) -> Result<PotentialReport> {
    let grid = v.grid();
    let h = grid.spacing();
    let nonnegative = v.values().iter().all(|&x| x >= -1e-12);
    let check = SubharmonicCheck {
        exclude: vec![(x0, 2.0 * h)],
        region: CheckRegion::Everywhere,
        ..SubharmonicCheck::default()
    };
    let subharmonic_violations = check_subharmonic_with(v, &check);
    let compact_support = (0..grid.len())
        .filter(|&p| !grid.is_inside(p) || grid.collar(p) <= 1)
        .all(|p| v.at(p).abs() <= 1e-12);
    let ratio = normalization_ratio(v, x0)?;
    let verdict = nonnegative && subharmonic_violations.is_empty() && compact_support && ratio <= 1.0 + tolerance;
    Ok(PotentialReport {
        nonnegative,
        subharmonic_violations,
        compact_support,
        ratio,
        tolerance,
        verdict,
    })
}
