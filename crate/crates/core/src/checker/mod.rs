//! Numerical checks of the main inequality, its uniform and individual
//! corollaries, and the identities used in its proof.
//!
//! Both sides of every inequality are assembled from Riesz charges extracted
//! on the grid. A report keeps the constants, each integral separately and
//! the numeric knobs, and passes when
//! `margin ≥ −tolerance·max(1, |lhs|, |rhs|)`.

mod chain;
mod individual;

use num_complex::Complex64;
use rayon::prelude::*;
use serde::Serialize;

use crate::error::{Error, NodeIndex, Result};
use crate::fields::{
    check_subharmonic, dom_check, hahn_jordan, riesz_measure, ExclusionSet, GridDomain, MajorantSpec, RieszCharge,
    ScalarField, Shape,
};
use crate::green::{GreenFunction, ModelDomain};
use crate::kernels::Dimension;
use crate::testfn::{TestFunction, BOUNDARY_SAMPLES};
use crate::zeros::{weighted_zero_sum, HoloFunction, ZeroDivisor};

pub use chain::{proof_chain_check, ChainOptions, ChainReport, ChainStep};
pub use individual::{
    verify_individual_1, verify_individual_2, BoundednessReport, KeyCondition, MinorantCheckReport,
};

/// Default relative tolerance of a verdict.
pub const DEFAULT_TOLERANCE: f64 = 1e-3;

/// Gap, in cells, between `S` and the default auxiliary disk and between
/// that disk and `∂D`.
pub const DTILDE_MARGIN_CELLS: f64 = 4.0;

/// Sub-lattice used to average a function with a logarithmic pole over the
/// cell containing the pole.
const POLE_SUBSAMPLES: usize = 8;

/// Which inequality a report belongs to.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum CheckKind {
    Main,
    Uniform,
    Individual1,
    Individual2,
    ProofChain,
}

/// Knobs shared by the checks.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CheckOptions {
    pub tolerance: f64,
    /// Auxiliary regular domain; [`default_dtilde`] when absent.
    pub dtilde: Option<ModelDomain>,
}

impl Default for CheckOptions {
    fn default() -> Self {
        Self {
            tolerance: DEFAULT_TOLERANCE,
            dtilde: None,
        }
    }
}

/// Serializes an extended real: finite values as numbers, infinities as the
/// strings `"inf"` and `"-inf"`, `NaN` as `null`.
pub mod extended {
    use serde::Serializer;

    pub fn serialize<S: Serializer>(x: &f64, s: S) -> std::result::Result<S::Ok, S::Error> {
        if x.is_finite() {
            s.serialize_f64(*x)
        } else if x.is_nan() {
            s.serialize_none()
        } else if *x > 0.0 {
            s.serialize_str("inf")
        } else {
            s.serialize_str("-inf")
        }
    }
}

/// `C̄_M` and its three terms.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct CbarConstant {
    #[serde(with = "extended")]
    pub value: f64,
    /// `∫_{D̃∖{x₀}} g dν_M`.
    pub green_nu_m: f64,
    /// `∫_{D̃∖S} g dν_M⁻`.
    pub green_nu_m_minus: f64,
    /// `M⁺(x₀)`.
    #[serde(with = "extended")]
    pub m_plus_x0: f64,
    /// Set when the value is `+∞` because `ν_M⁻` concentrates at `x₀`.
    pub diverges: bool,
    /// Whether `D̃` stays a positive distance away from `∂D`.
    pub dtilde_compact: bool,
}

/// Constants of a report.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Constants {
    #[serde(rename = "C")]
    pub c: f64,
    pub c_tilde: f64,
    #[serde(rename = "Cbar", with = "extended")]
    pub cbar: f64,
}

/// The integrals entering a report.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Components {
    /// `u(x₀)`, or `log|f(z₀)|` for the uniform check.
    #[serde(with = "extended")]
    pub u_x0: f64,
    /// `∫_{D∖S} v dν_u`, or the weighted zero sum for the uniform check.
    pub zero_term: f64,
    /// `∫_{D∖S} v dν_M`.
    pub v_nu_m: f64,
    /// `∫_{D̃∖S} v dν_M⁻`.
    pub v_nu_m_minus: f64,
    pub cbar: CbarConstant,
    /// `∫_{D∖S} v dν_{log|f|}` from the extracted charge (uniform check).
    pub extracted_zero_term: Option<f64>,
}

/// Numeric knobs recorded in a report.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Diagnostics {
    pub h: f64,
    pub tolerance: f64,
    pub scale: f64,
    pub b: f64,
    pub dtilde: ModelDomain,
    pub boundary_samples: usize,
    /// Relaxation sweeps of a numeric Green function, if one was solved.
    pub iterations: Option<usize>,
}

/// Both sides of an inequality `lhs ≤ rhs`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct InequalityReport {
    pub check: CheckKind,
    #[serde(with = "extended")]
    pub lhs: f64,
    #[serde(with = "extended")]
    pub rhs: f64,
    /// `rhs − lhs`.
    #[serde(with = "extended")]
    pub margin: f64,
    pub constants: Constants,
    pub components: Components,
    pub diagnostics: Diagnostics,
    pub verdict: bool,
}

/// `max(1, |lhs|, |rhs|)` over the finite sides.
pub fn verdict_scale(lhs: f64, rhs: f64) -> f64 {
    [lhs, rhs]
        .into_iter()
        .filter(|x| x.is_finite())
        .fold(1.0, |a, x| a.max(x.abs()))
}

/// `margin ≥ −tolerance·scale`.
pub fn passes(lhs: f64, rhs: f64, tolerance: f64) -> bool {
    rhs - lhs >= -tolerance * verdict_scale(lhs, rhs)
}

fn boundary_inf(s: &ExclusionSet, x0: Complex64, dtilde: &ModelDomain, h: f64) -> Result<(GreenFunction, f64)> {
    if s.is_empty() {
        return Err(Error::Geometry("S is empty".into()));
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
    let green = GreenFunction::new(dtilde, x0, h)?;
    let inf = green.inf_on(&samples);
    if !(inf > 0.0) || !inf.is_finite() {
        return Err(Error::Degenerate(format!("inf of the Green function on the boundary of S is {inf}")));
    }
    Ok((green, inf))
}

/// `C = b / inf_{∂S} g_{D̃}(·, x₀)`.
pub fn main_constant(s: &ExclusionSet, x0: Complex64, dtilde: &ModelDomain, b: f64, h: f64) -> Result<f64> {
    if !(b > 0.0) || !b.is_finite() {
        return Err(Error::InvalidArgument("b must be positive and finite".into()));
    }
    let (_, inf) = boundary_inf(s, x0, dtilde, h)?;
    Ok(b / inf)
}

/// Smallest disk around `S` that keeps a gap of [`DTILDE_MARGIN_CELLS`]
/// cells to `S` and to `∂D`. It is centred at the mean of the ball centres.
pub fn default_dtilde(d: &Shape, s: &ExclusionSet, h: f64) -> Result<ModelDomain> {
    if s.is_empty() {
        return Err(Error::Geometry("S is empty".into()));
    }
    let n = s.balls().len() as f64;
    let centre = s.balls().iter().map(|b| b.center).sum::<Complex64>() / n;
    let gap = DTILDE_MARGIN_CELLS * h;
    let dt = ModelDomain::disk(centre, s.extent_from(centre) + gap);
    let shape = dt.shape().expect("a disk is planar");
    if shape
        .boundary_samples(BOUNDARY_SAMPLES)
        .iter()
        .any(|&z| d.boundary_distance(z) < gap - 1e-12)
    {
        return Err(Error::Geometry("no auxiliary disk fits between S and the boundary of D".into()));
    }
    Ok(dt)
}

fn dtilde_inside(d: &Shape, dtilde: &ModelDomain) -> Result<bool> {
    let shape = dtilde
        .shape()
        .ok_or(Error::Dimension(1, "the auxiliary domain must be planar"))?;
    let samples = shape.boundary_samples(BOUNDARY_SAMPLES);
    if samples.iter().any(|&z| !d.contains_closed(z, 1e-12)) {
        return Err(Error::Geometry("the auxiliary domain leaves D".into()));
    }
    Ok(samples.iter().all(|&z| d.contains(z)))
}

/// `∫_E f dν` where `f` may have a logarithmic pole at `pole`: cells whose
/// node lies within `1.5h` of the pole use the midpoint average of `f` over
/// the cell.
fn integrate_near_pole(
    nu: &RieszCharge,
    mut f: impl FnMut(Complex64) -> f64,
    pole: Complex64,
    keep: impl Fn(Complex64) -> bool,
) -> f64 {
    let mut acc = 0.0;
    for a in nu.atoms() {
        if a.mass != 0.0 && keep(a.point) {
            acc += a.mass * f(a.point);
        }
    }
    let Some(grid) = nu.grid() else {
        return acc;
    };
    let h = grid.spacing();
    for (_, z, m) in nu.cell_masses() {
        if !keep(z) {
            continue;
        }
        if (z - pole).norm() < 1.5 * h {
            let k = POLE_SUBSAMPLES;
            let d = h / k as f64;
            let mut s = 0.0;
            for i in 0..k {
                for j in 0..k {
                    let w = z + Complex64::new(-0.5 * h + (i as f64 + 0.5) * d, -0.5 * h + (j as f64 + 0.5) * d);
                    s += f(w);
                }
            }
            acc += m * s / (k * k) as f64;
        } else {
            acc += m * f(z);
        }
    }
    acc
}

/// [`integrate_near_pole`] for a field, through its exact evaluator when it
/// has one and its node values otherwise.
fn integrate_field_near_pole(
    nu: &RieszCharge,
    v: &ScalarField,
    pole: Complex64,
    keep: impl Fn(Complex64) -> bool,
) -> Result<f64> {
    let mut err = None;
    let total = integrate_near_pole(
        nu,
        |z| match v.eval(z) {
            Ok(x) => x,
            Err(e) => {
                err.get_or_insert(e);
                0.0
            }
        },
        pole,
        keep,
    );
    match err {
        Some(e) => Err(e),
        None => Ok(total),
    }
}

/// `C̄_M = ∫_{D̃∖{x₀}} g dν_M + ∫_{D̃∖S} g dν_M⁻ + M⁺(x₀)`.
///
/// A negative atom of `ν_M` at `x₀` (so `M(x₀) = +∞`) gives `+∞`; any other
/// failure of `x₀ ∈ dom M` is rejected.
pub fn cbar_constant(x0: Complex64, s: &ExclusionSet, dtilde: &ModelDomain, m: &MajorantSpec) -> Result<CbarConstant> {
    let grid = m.u1.grid();
    let h = grid.spacing();
    let dtilde_compact = dtilde_inside(grid.shape(), dtilde)?;
    let (green, _) = boundary_inf(s, x0, dtilde, h)?;
    let (_, neg) = hahn_jordan(&m.charge);
    if !m.in_dom(x0) {
        let negative_atom = m
            .charge
            .atoms()
            .iter()
            .any(|a| a.mass < 0.0 && (a.point - x0).norm() <= 4.0 * h);
        let neg_diverges = negative_atom || !dom_check(&neg, x0, 16.0 * h, Dimension::PLANE);
        if neg_diverges {
            return Ok(CbarConstant {
                value: f64::INFINITY,
                green_nu_m: f64::NAN,
                green_nu_m_minus: f64::NAN,
                m_plus_x0: f64::INFINITY,
                diverges: true,
                dtilde_compact,
            });
        }
        let w = grid.nearest(x0).map(|p| grid.unflat(p)).into_iter().collect();
        return Err(Error::Precondition {
            what: "x0 is not in dom M".into(),
            witnesses: w,
        });
    }
    let m_x0 = m.eval(x0)?;
    if m_x0.is_nan() {
        return Err(Error::Precondition {
            what: "M is undefined at x0".into(),
            witnesses: Vec::new(),
        });
    }
    let dt = *dtilde;
    let g = |z: Complex64| green.eval(z);
    let green_nu_m = integrate_near_pole(&m.charge, g, x0, |z| dt.contains(z) && z != x0);
    let green_nu_m_minus = integrate_near_pole(&neg, g, x0, |z| dt.contains(z) && !s.contains(z));
    let m_plus_x0 = m_x0.max(0.0);
    Ok(CbarConstant {
        value: green_nu_m + green_nu_m_minus + m_plus_x0,
        green_nu_m,
        green_nu_m_minus,
        m_plus_x0,
        diverges: false,
        dtilde_compact,
    })
}

/// Nodes inside `D` where `lower > upper` beyond round-off; `−∞` on the
/// left and undefined values are skipped.
fn dominance_witnesses(
    grid: &GridDomain,
    lower: impl Fn(usize) -> f64 + Sync,
    upper: impl Fn(usize) -> f64 + Sync,
) -> Vec<NodeIndex> {
    (0..grid.len())
        .into_par_iter()
        .filter(|&p| grid.is_inside(p))
        .filter(|&p| {
            let (a, b) = (lower(p), upper(p));
            if a == f64::NEG_INFINITY || a.is_nan() || b.is_nan() {
                return false;
            }
            a > b + 1e-9 * b.abs().max(1.0)
        })
        .map(|p| grid.unflat(p))
        .collect()
}

/// State shared by every test function checked against one majorant.
struct Prepared {
    c: f64,
    c_tilde: f64,
    cbar: CbarConstant,
    dtilde: ModelDomain,
    d: Shape,
    s: ExclusionSet,
    neg: RieszCharge,
    h: f64,
    b: f64,
    tolerance: f64,
    iterations: Option<usize>,
}

impl Prepared {
    fn new(m: &MajorantSpec, s: &ExclusionSet, x0: Complex64, b: f64, opts: &CheckOptions) -> Result<Self> {
        let grid = m.u1.grid();
        let h = grid.spacing();
        let d = *grid.shape();
        let dtilde = match opts.dtilde {
            Some(dt) => dt,
            None => default_dtilde(&d, s, h)?,
        };
        if !(b > 0.0) || !b.is_finite() {
            return Err(Error::InvalidArgument("b must be positive and finite".into()));
        }
        let (green, inf) = boundary_inf(s, x0, &dtilde, h)?;
        let cbar = cbar_constant(x0, s, &dtilde, m)?;
        let (_, neg) = hahn_jordan(&m.charge);
        Ok(Self {
            c: b / inf,
            c_tilde: inf / b,
            cbar,
            dtilde,
            d,
            s: s.clone(),
            neg,
            h,
            b,
            tolerance: opts.tolerance,
            iterations: green.relax_stats().map(|st| st.sweeps),
        })
    }

    fn check_test(&self, v: &TestFunction) -> Result<()> {
        if v.exclusion() != &self.s {
            return Err(Error::InvalidArgument("the test function is defined off a different S".into()));
        }
        if v.bound() > self.b * (1.0 + 1e-12) {
            return Err(Error::InvalidArgument(format!(
                "the test function is bounded by {} > b = {}",
                v.bound(),
                self.b
            )));
        }
        Ok(())
    }

    /// `(∫_{D∖S} v dν_M, ∫_{D̃∖S} v dν_M⁻)`.
    fn majorant_terms(&self, m: &MajorantSpec, v: &TestFunction) -> Result<(f64, f64)> {
        let (d, s, dt) = (&self.d, &self.s, &self.dtilde);
        let v_nu_m = m.charge.integrate_field(v.field(), |z| d.contains(z) && !s.contains(z))?;
        let v_nu_m_minus = self.neg.integrate_field(v.field(), |z| dt.contains(z) && !s.contains(z))?;
        Ok((v_nu_m, v_nu_m_minus))
    }

    fn report(&self, check: CheckKind, lhs: f64, rhs: f64, components: Components) -> InequalityReport {
        InequalityReport {
            check,
            lhs,
            rhs,
            margin: rhs - lhs,
            constants: Constants {
                c: self.c,
                c_tilde: self.c_tilde,
                cbar: self.cbar.value,
            },
            components,
            diagnostics: Diagnostics {
                h: self.h,
                tolerance: self.tolerance,
                scale: verdict_scale(lhs, rhs),
                b: self.b,
                dtilde: self.dtilde,
                boundary_samples: BOUNDARY_SAMPLES,
                iterations: self.iterations,
            },
            verdict: passes(lhs, rhs, self.tolerance),
        }
    }
}

/// Checks `C·u(x₀) + ∫_{D∖S} v dν_u ≤ ∫_{D∖S} v dν_M + ∫_{D̃∖S} v dν_M⁻ + C·C̄_M`.
///
/// `u ≤ M` is checked at the inside nodes and violations are returned as a
/// precondition error with witnesses; `u` must pass the sub-mean-value test.
pub fn verify_main(
    u: &ScalarField,
    m: &MajorantSpec,
    v: &TestFunction,
    s: &ExclusionSet,
    x0: Complex64,
    b: f64,
    opts: &CheckOptions,
) -> Result<InequalityReport> {
    u.require_same_grid(&m.u1)?;
    u.require_same_grid(v.field())?;
    let grid = u.grid();
    let witnesses = dominance_witnesses(grid, |p| u.at(p), |p| m.u1.at(p) - m.u2.at(p));
    if !witnesses.is_empty() {
        return Err(Error::Precondition {
            what: "u <= M fails".into(),
            witnesses,
        });
    }
    let bad = check_subharmonic(u);
    if !bad.is_empty() {
        return Err(Error::NotSubharmonic { violations: bad });
    }
    let prep = Prepared::new(m, s, x0, b, opts)?;
    prep.check_test(v)?;
    let u_x0 = u.eval(x0)?;
    let nu_u = riesz_measure(u)?;
    let d = prep.d;
    let zero_term = nu_u.integrate_field(v.field(), |z| d.contains(z) && !s.contains(z))?;
    let (v_nu_m, v_nu_m_minus) = prep.majorant_terms(m, v)?;
    let lhs = prep.c * u_x0 + zero_term;
    let rhs = v_nu_m + v_nu_m_minus + prep.c * prep.cbar.value;
    Ok(prep.report(
        CheckKind::Main,
        lhs,
        rhs,
        Components {
            u_x0,
            zero_term,
            v_nu_m,
            v_nu_m_minus,
            cbar: prep.cbar,
            extracted_zero_term: None,
        },
    ))
}

/// Zeros of `f` inside `D`.
fn zeros_inside(f: &HoloFunction, d: &Shape) -> Result<ZeroDivisor> {
    ZeroDivisor::new(
        f.zeros
            .entries()
            .iter()
            .filter(|e| d.contains(e.point))
            .map(|e| (e.point, e.multiplicity))
            .collect(),
    )
}

fn uniform_preconditions(f: &HoloFunction, m: &MajorantSpec, z0: Complex64) -> Result<f64> {
    let grid = m.u1.grid();
    let log_f: Vec<f64> = (0..grid.len()).map(|p| f.log_modulus(grid.point_flat(p))).collect();
    let witnesses = dominance_witnesses(grid, |p| log_f[p], |p| m.u1.at(p) - m.u2.at(p));
    if !witnesses.is_empty() {
        return Err(Error::Precondition {
            what: "|f| <= exp M fails".into(),
            witnesses,
        });
    }
    let log_f0 = f.log_modulus(z0);
    if !log_f0.is_finite() {
        return Err(Error::Precondition {
            what: "f vanishes at z0".into(),
            witnesses: grid.nearest(z0).map(|p| grid.unflat(p)).into_iter().collect(),
        });
    }
    if m.eval(z0)? == f64::NEG_INFINITY {
        return Err(Error::Precondition {
            what: "M(z0) = -inf".into(),
            witnesses: Vec::new(),
        });
    }
    Ok(log_f0)
}

fn uniform_with(
    prep: &Prepared,
    zeros: &ZeroDivisor,
    nu_f: &RieszCharge,
    log_f0: f64,
    m: &MajorantSpec,
    v: &TestFunction,
) -> Result<InequalityReport> {
    prep.check_test(v)?;
    let s = &prep.s;
    let d = prep.d;
    let zero_term = weighted_zero_sum(zeros, v.field(), s)?;
    let extracted = nu_f.integrate_field(v.field(), |z| d.contains(z) && !s.contains(z))?;
    let (v_nu_m, v_nu_m_minus) = prep.majorant_terms(m, v)?;
    let lhs = zero_term;
    let rhs = v_nu_m + v_nu_m_minus - prep.c * log_f0 + prep.c * prep.cbar.value;
    Ok(prep.report(
        CheckKind::Uniform,
        lhs,
        rhs,
        Components {
            u_x0: log_f0,
            zero_term,
            v_nu_m,
            v_nu_m_minus,
            cbar: prep.cbar,
            extracted_zero_term: Some(extracted),
        },
    ))
}

/// Checks `Σ_{D∖S} v·Zero_f ≤ ∫_{D∖S} v dν_M + ∫_{D̃∖S} v dν_M⁻ − C log|f(z₀)| + C·C̄_M`.
///
/// The middle term vanishes for a subharmonic `M`. `|f| ≤ exp M` is checked
/// at the inside nodes.
pub fn verify_uniform(
    f: &HoloFunction,
    m: &MajorantSpec,
    v: &TestFunction,
    s: &ExclusionSet,
    z0: Complex64,
    b: f64,
    opts: &CheckOptions,
) -> Result<InequalityReport> {
    let mut all = verify_uniform_sweep(f, m, std::slice::from_ref(v), s, z0, b, opts)?;
    Ok(all.pop().expect("one test function in, one report out"))
}

/// [`verify_uniform`] for a family of test functions sharing `S`, `z₀` and
/// `b`; the constants `C` and `C̄_M` are computed once.
pub fn verify_uniform_sweep(
    f: &HoloFunction,
    m: &MajorantSpec,
    family: &[TestFunction],
    s: &ExclusionSet,
    z0: Complex64,
    b: f64,
    opts: &CheckOptions,
) -> Result<Vec<InequalityReport>> {
    for v in family {
        v.field().require_same_grid(&m.u1)?;
    }
    let log_f0 = uniform_preconditions(f, m, z0)?;
    let prep = Prepared::new(m, s, z0, b, opts)?;
    let zeros = zeros_inside(f, &prep.d)?;
    let nu_f = riesz_measure(&f.log_modulus_field(m.u1.grid_arc().clone()))?;
    family
        .par_iter()
        .map(|v| uniform_with(&prep, &zeros, &nu_f, log_f0, m, v))
        .collect()
}
