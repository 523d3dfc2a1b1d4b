//! Step-by-step check of the proof of the main inequality: the three
//! Poisson–Jensen identities for the measures dual to the truncations `Vₙ`
//! of `Ṽ`, the inequality they combine into, and its monotone limit.

use num_complex::Complex64;
use serde::Serialize;

use super::{dominance_witnesses, integrate_field_near_pole};
use crate::error::{Error, Result};
use crate::fields::{riesz_measure, MajorantSpec, RieszCharge, ScalarField};
use crate::jensen::{duality_inverse, log_potential, poisson_jensen_terms, JensenPotential, PoissonJensenReport};
use crate::testfn::truncate_sequence;

/// Tolerances of [`proof_chain_check`].
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ChainOptions {
    /// Bound on each Poisson–Jensen residual.
    pub residual_tolerance: f64,
    /// Slack allowed in the sign and monotonicity of the margins.
    pub slack: f64,
    /// Normalization tolerance passed to the duality inverse.
    pub duality_tolerance: f64,
}

impl Default for ChainOptions {
    fn default() -> Self {
        Self {
            residual_tolerance: 5e-3,
            slack: 1e-3,
            duality_tolerance: 0.02,
        }
    }
}

/// One truncation level.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ChainStep {
    pub n: u32,
    /// Normalization ratio of `Vₙ` at the pole.
    pub ratio: f64,
    /// Mass the dual measure puts at `x₀`.
    pub pole_mass: f64,
    pub pj_u: PoissonJensenReport,
    pub pj_u1: PoissonJensenReport,
    pub pj_u2: PoissonJensenReport,
    /// `M(x₀) + ∫Vₙ dν_M⁺ − u(x₀) − ∫Vₙ dν_u − ∫Vₙ dν_M⁻`.
    pub margin: f64,
    /// `∫ (M − u) dμₙ`, the same quantity through the identities.
    pub mean_gap: f64,
}

impl ChainStep {
    pub fn max_residual(&self) -> f64 {
        self.pj_u.residual.max(self.pj_u1.residual).max(self.pj_u2.residual)
    }
}

/// Outcome of [`proof_chain_check`].
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ChainReport {
    pub x0: Complex64,
    pub steps: Vec<ChainStep>,
    /// The margin with `Ṽ` in place of `Vₙ`.
    pub limit_margin: f64,
    pub max_residual: f64,
    /// Margins nondecreasing in `n` within the slack.
    pub monotone: bool,
    /// Margins at most the limit margin, within the slack.
    pub below_limit: bool,
    pub options: ChainOptions,
    pub verdict: bool,
}

fn margin_with(
    v: &ScalarField,
    x0: Complex64,
    m_x0: f64,
    u_x0: f64,
    nu_u: &RieszCharge,
    pos: &RieszCharge,
    neg: &RieszCharge,
) -> Result<f64> {
    let all = |_: Complex64| true;
    Ok(m_x0 + integrate_field_near_pole(pos, v, x0, all)?
        - u_x0
        - integrate_field_near_pole(nu_u, v, x0, all)?
        - integrate_field_near_pole(neg, v, x0, all)?)
}

/// Runs the proof of the main inequality for `u ≤ M` with the extended test
/// function `Ṽ` (pole `x₀`) at the truncation levels `n_list`, which must
/// be strictly increasing.
pub fn proof_chain_check(
    u: &ScalarField,
    m: &MajorantSpec,
    vtilde: &ScalarField,
    x0: Complex64,
    n_list: &[u32],
    opts: &ChainOptions,
) -> Result<ChainReport> {
    u.require_same_grid(&m.u1)?;
    u.require_same_grid(vtilde)?;
    if n_list.is_empty() || n_list.windows(2).any(|w| w[1] <= w[0]) {
        return Err(Error::InvalidArgument("n_list must be nonempty and strictly increasing".into()));
    }
    let grid = u.grid();
    if !m.in_dom(x0) {
        return Err(Error::Precondition {
            what: "x0 is not in dom M".into(),
            witnesses: grid.nearest(x0).map(|p| grid.unflat(p)).into_iter().collect(),
        });
    }
    let witnesses = dominance_witnesses(grid, |p| u.at(p), |p| m.u1.at(p) - m.u2.at(p));
    if !witnesses.is_empty() {
        return Err(Error::Precondition {
            what: "u <= M fails".into(),
            witnesses,
        });
    }
    let u_x0 = u.eval(x0)?;
    if u_x0 == f64::NEG_INFINITY {
        return Err(Error::InvalidArgument("u(x0) = -inf".into()));
    }
    let m_x0 = m.eval(x0)?;
    let nu_u = riesz_measure(u)?;
    let nu_u1 = riesz_measure(&m.u1)?;
    let nu_u2 = riesz_measure(&m.u2)?;
    let (pos, neg) = m.parts();

    let mut steps = Vec::with_capacity(n_list.len());
    for &n in n_list {
        let vn = truncate_sequence(vtilde, n)?;
        let jp = JensenPotential::new(vn.clone(), x0)?;
        let ratio = jp.ratio();
        let mu = duality_inverse(&jp, opts.duality_tolerance)?;
        let pole_mass = mu.measure().atoms().iter().filter(|a| a.point == x0).map(|a| a.mass).sum();
        let vmu = log_potential(&mu, u.grid_arc().clone())?;
        let pj_u = poisson_jensen_terms(u, &nu_u, &vmu, &mu)?;
        let pj_u1 = poisson_jensen_terms(&m.u1, &nu_u1, &vmu, &mu)?;
        let pj_u2 = poisson_jensen_terms(&m.u2, &nu_u2, &vmu, &mu)?;
        let margin = margin_with(&vn, x0, m_x0, u_x0, &nu_u, &pos, &neg)?;
        let mean_gap = pj_u1.mean_term - pj_u2.mean_term - pj_u.mean_term;
        steps.push(ChainStep {
            n,
            ratio,
            pole_mass,
            pj_u,
            pj_u1,
            pj_u2,
            margin,
            mean_gap,
        });
    }
    let limit_margin = margin_with(vtilde, x0, m_x0, u_x0, &nu_u, &pos, &neg)?;
    let max_residual = steps.iter().map(ChainStep::max_residual).fold(0.0, f64::max);
    let monotone = steps.windows(2).all(|w| w[1].margin >= w[0].margin - opts.slack);
    let below_limit = steps.iter().all(|s| s.margin <= limit_margin + opts.slack);
    let signs = steps.iter().all(|s| s.margin >= -opts.slack) && limit_margin >= -opts.slack;
    Ok(ChainReport {
        x0,
        verdict: max_residual <= opts.residual_tolerance && monotone && below_limit && signs,
        steps,
        limit_margin,
        max_residual,
        monotone,
        below_limit,
        options: *opts,
    })
}
