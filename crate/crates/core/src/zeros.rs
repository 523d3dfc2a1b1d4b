//! Zero divisors of holomorphic functions of one variable, their counting
//! measures, the Poincaré–Lelong cross-check and weighted zero sums.

use std::sync::Arc;

use num_complex::Complex64;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::fields::{riesz_measure, Atom, ExclusionSet, GridDomain, RieszCharge, ScalarField};
use crate::kernels::{ball_volume_constant, sphere_constant, Dimension};

/// Finite list of distinct points with positive multiplicities.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "Vec<DivisorEntry>", into = "Vec<DivisorEntry>")]
pub struct ZeroDivisor {
    entries: Vec<DivisorEntry>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DivisorEntry {
    pub point: Complex64,
    pub multiplicity: u32,
}

impl TryFrom<Vec<DivisorEntry>> for ZeroDivisor {
    type Error = Error;
    fn try_from(entries: Vec<DivisorEntry>) -> Result<Self> {
        ZeroDivisor::new(entries.into_iter().map(|e| (e.point, e.multiplicity)).collect())
    }
}

impl From<ZeroDivisor> for Vec<DivisorEntry> {
    fn from(d: ZeroDivisor) -> Self {
        d.entries
    }
}

impl ZeroDivisor {
    pub fn new(entries: Vec<(Complex64, u32)>) -> Result<Self> {
        for (k, &(z, m)) in entries.iter().enumerate() {
            if m == 0 || !z.is_finite() {
                return Err(Error::InvalidArgument(format!("bad divisor entry ({z}, {m})")));
            }
            if entries[..k].iter().any(|&(w, _)| w == z) {
                return Err(Error::InvalidArgument(format!("repeated divisor point {z}")));
            }
        }
        Ok(Self {
            entries: entries
                .into_iter()
                .map(|(point, multiplicity)| DivisorEntry { point, multiplicity })
                .collect(),
        })
    }

    /// Simple zeros at the given points.
    pub fn simple(points: &[Complex64]) -> Result<Self> {
        Self::new(points.iter().map(|&z| (z, 1)).collect())
    }

    pub fn empty() -> Self {
        Self::default()
    }

    pub fn entries(&self) -> &[DivisorEntry] {
        &self.entries
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn degree(&self) -> u32 {
        self.entries.iter().map(|e| e.multiplicity).sum()
    }

    pub fn multiplicity_at(&self, z: Complex64) -> u32 {
        self.entries.iter().find(|e| e.point == z).map_or(0, |e| e.multiplicity)
    }

    /// Entrywise `self ≤ other`.
    pub fn is_subdivisor_of(&self, other: &ZeroDivisor) -> bool {
        self.entries.iter().all(|e| e.multiplicity <= other.multiplicity_at(e.point))
    }

    /// Disjoint union (multiplicities add on common points).
    pub fn union(&self, other: &ZeroDivisor) -> ZeroDivisor {
        let mut entries = self.entries.clone();
        for e in &other.entries {
            match entries.iter_mut().find(|f| f.point == e.point) {
                Some(f) => f.multiplicity += e.multiplicity,
                None => entries.push(*e),
            }
        }
        ZeroDivisor { entries }
    }

    /// Multiplicities halved, rounding down (entries reaching 0 dropped).
    pub fn scaled_down(&self, divisor: u32) -> ZeroDivisor {
        ZeroDivisor {
            entries: self
                .entries
                .iter()
                .filter(|e| e.multiplicity / divisor > 0)
                .map(|e| DivisorEntry { point: e.point, multiplicity: e.multiplicity / divisor })
                .collect(),
        }
    }

    /// Smallest distance between two distinct points.
    pub fn separation(&self) -> f64 {
        let mut best = f64::INFINITY;
        for (k, a) in self.entries.iter().enumerate() {
            for b in &self.entries[k + 1..] {
                best = best.min((a.point - b.point).norm());
            }
        }
        best
    }
}

/// Counting measure `n_Z`: one atom of mass `multiplicity` per entry.
pub fn counting_measure(d: &ZeroDivisor) -> RieszCharge {
    RieszCharge::from_atoms(
        d.entries
            .iter()
            .map(|e| Atom { point: e.point, mass: f64::from(e.multiplicity) })
            .collect(),
    )
}

/// Representation of a holomorphic function.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum HoloKind {
    /// `leading · ∏ (z − a)^m`.
    Polynomial,
    /// `leading · ∏ ((z − a)/(1 − ā z))^m`, roots in the unit disk.
    Blaschke,
}

/// `f = exp(P(z)) · (polynomial or finite Blaschke product)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HoloFunction {
    pub kind: HoloKind,
    pub zeros: ZeroDivisor,
    #[serde(default = "one")]
    pub leading: Complex64,
    /// Coefficients `c₀, c₁, …` of `P(z) = Σ c_k z^k`.
    #[serde(default)]
    pub exp_poly: Vec<Complex64>,
}

fn one() -> Complex64 {
    Complex64::new(1.0, 0.0)
}

impl HoloFunction {
    pub fn polynomial(zeros: ZeroDivisor, leading: Complex64) -> Result<Self> {
        if leading == Complex64::new(0.0, 0.0) {
            return Err(Error::InvalidArgument("the zero function is excluded".into()));
        }
        Ok(Self { kind: HoloKind::Polynomial, zeros, leading, exp_poly: Vec::new() })
    }

    pub fn blaschke(zeros: ZeroDivisor) -> Result<Self> {
        if zeros.entries().iter().any(|e| e.point.norm() >= 1.0) {
            return Err(Error::InvalidArgument("Blaschke roots must lie in the unit disk".into()));
        }
        Ok(Self { kind: HoloKind::Blaschke, zeros, leading: one(), exp_poly: Vec::new() })
    }

    /// `exp(P)` with no zeros.
    pub fn exp_of(poly: Vec<Complex64>) -> Self {
        Self { kind: HoloKind::Polynomial, zeros: ZeroDivisor::empty(), leading: one(), exp_poly: poly }
    }

    pub fn with_exp(mut self, poly: Vec<Complex64>) -> Self {
        self.exp_poly = poly;
        self
    }

    fn poly_value(&self, z: Complex64) -> Complex64 {
        self.exp_poly.iter().rev().fold(Complex64::new(0.0, 0.0), |acc, &c| acc * z + c)
    }

    pub fn eval(&self, z: Complex64) -> Complex64 {
        let mut v = self.leading * self.poly_value(z).exp();
        for e in self.zeros.entries() {
            let mut factor = z - e.point;
            if self.kind == HoloKind::Blaschke {
                factor /= Complex64::new(1.0, 0.0) - e.point.conj() * z;
            }
            v *= factor.powu(e.multiplicity);
        }
        v
    }

    /// `log|f(z)|`, `−∞` at the zeros.
    pub fn log_modulus(&self, z: Complex64) -> f64 {
        let mut v = self.leading.norm().ln() + self.poly_value(z).re;
        for e in self.zeros.entries() {
            let m = f64::from(e.multiplicity);
            v += m * (z - e.point).norm().ln();
            if self.kind == HoloKind::Blaschke {
                v -= m * (Complex64::new(1.0, 0.0) - e.point.conj() * z).norm().ln();
            }
        }
        v
    }

    /// `log|f|` sampled on the grid, with the exact evaluator attached.
    pub fn log_modulus_field(&self, grid: Arc<GridDomain>) -> ScalarField {
        let f = self.clone();
        ScalarField::from_fn(grid, move |z| f.log_modulus(z))
    }
}

/// Recovered atom for one root.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct RootMatch {
    pub point: Complex64,
    pub multiplicity: u32,
    pub recovered: f64,
}

/// Outcome of [`poincare_lelong_residual`].
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PoincareLelongReport {
    pub matches: Vec<RootMatch>,
    /// `max |recovered − multiplicity|` over roots.
    pub residual: f64,
    /// Total variation of the recovered charge over the inside nodes and
    /// the atoms not matched to a root.
    pub spurious_mass: f64,
    pub spacing: f64,
}

/// Extracts the Riesz charge of `log|f|` on `grid` and compares it with the
/// counting measure of the zeros of `f` inside the grid's domain.
pub fn poincare_lelong_residual(f: &HoloFunction, grid: Arc<GridDomain>) -> Result<PoincareLelongReport> {
    let h = grid.spacing();
    let inside: Vec<&DivisorEntry> = f
        .zeros
        .entries()
        .iter()
        .filter(|e| grid.shape().contains(e.point))
        .collect();
    let local = ZeroDivisor { entries: inside.iter().map(|e| **e).collect() };
    if local.separation() < 8.0 * h {
        return Err(Error::Precondition {
            what: format!("roots closer than 8h = {}", 8.0 * h),
            witnesses: local
                .entries()
                .iter()
                .filter_map(|e| grid.nearest(e.point).map(|p| grid.unflat(p)))
                .collect(),
        });
    }
    let u = f.log_modulus_field(grid.clone());
    let charge = riesz_measure(&u)?;
    let mut used = vec![false; charge.atoms().len()];
    let matches: Vec<RootMatch> = local
        .entries()
        .iter()
        .map(|e| {
            let found = charge
                .atoms()
                .iter()
                .enumerate()
                .filter(|(k, a)| !used[*k] && (a.point - e.point).norm() <= 2.0 * h)
                .min_by(|x, y| (x.1.point - e.point).norm().total_cmp(&(y.1.point - e.point).norm()));
            let recovered = match found {
                Some((k, a)) => {
                    used[k] = true;
                    a.mass
                }
                None => 0.0,
            };
            RootMatch { point: e.point, multiplicity: e.multiplicity, recovered }
        })
        .collect();
    let residual = matches
        .iter()
        .map(|m| (m.recovered - f64::from(m.multiplicity)).abs())
        .fold(0.0, f64::max);
    let cells: f64 = charge
        .cells()
        .iter()
        .enumerate()
        .filter(|(p, _)| grid.is_inside(*p))
        .map(|(_, m)| m.abs())
        .sum();
    let stray: f64 = charge
        .atoms()
        .iter()
        .zip(&used)
        .filter(|(a, u)| !**u && grid.shape().contains(a.point))
        .map(|(a, _)| a.mass.abs())
        .sum();
    Ok(PoincareLelongReport { matches, residual, spurious_mass: cells + stray, spacing: h })
}

/// `Σ multiplicity · v(point)` over divisor points outside `S`.
pub fn weighted_zero_sum(d: &ZeroDivisor, v: &ScalarField, s: &ExclusionSet) -> Result<f64> {
    let terms: Vec<Result<f64>> = d
        .entries()
        .par_iter()
        .filter(|e| !s.contains(e.point))
        .map(|e| Ok(f64::from(e.multiplicity) * v.eval(e.point)?))
        .collect();
    let mut acc = 0.0;
    for t in terms {
        acc += t?;
    }
    Ok(acc)
}

/// Constants of the `n`-variable Poincaré–Lelong normalization:
/// `(s_{2n−1}, b_{2n−2})`.
pub fn poincare_lelong_constants(n: u32) -> Result<(f64, f64)> {
    if n == 0 {
        return Err(Error::InvalidArgument("n must be at least 1".into()));
    }
    Ok((sphere_constant(Dimension::new(2 * n)?)?, ball_volume_constant(2 * n - 2)?))
}
