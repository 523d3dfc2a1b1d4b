//! Jensen measures, genus-zero logarithmic potentials and the duality between
//! them, plus the extended Poisson–Jensen identity.
//!
//! A Jensen measure for `x₀` is a probability measure `μ` with
//! `u(x₀) ≤ ∫u dμ` for every subharmonic `u`. Its potential is
//! `V_μ(y) = ∫ (log|y − x| − log|y − x₀|) dμ(x)`.

use std::f64::consts::{FRAC_PI_4, LN_2};
use std::sync::Arc;

use num_complex::Complex64;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::fields::{
    riesz_extract, riesz_measure, sphere_average_with, Atom, ChargeJson, Evaluator, GridDomain, RieszCharge,
    RieszOptions, ScalarField, Shape,
};
use crate::green::BoundaryMeasure;

/// Mean of `log|z|` over the unit square centred at the origin.
pub const CELL_LOG_MEAN: f64 = FRAC_PI_4 - 1.5 - 0.5 * LN_2;

/// Version tag of [`default_testbank`].
pub const TESTBANK_VERSION: u32 = 1;

/// Radii, in cells, of the circles used to read off the logarithmic
/// coefficient of a potential at its pole.
pub const NORMALIZATION_RADII: [f64; 3] = [8.0, 16.0, 32.0];

/// Default slack on the normalization ratio.
pub const NORMALIZATION_TOLERANCE: f64 = 0.02;

const MASS_TOLERANCE: f64 = 1e-10;

/// Probability measure attached to a base point.
#[derive(Debug, Clone)]
pub struct JensenMeasure {
    x0: Complex64,
    measure: RieszCharge,
}

/// JSON form: base point plus the charge.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct JensenMeasureJson {
    pub x0: Complex64,
    #[serde(flatten)]
    pub measure: ChargeJson,
}

impl JensenMeasure {
    /// Checks positivity and unit mass.
    pub fn new(x0: Complex64, measure: RieszCharge) -> Result<Self> {
        if !measure.is_positive() {
            return Err(Error::InvalidArgument("a Jensen measure must be positive".into()));
        }
        let total = measure.total();
        if (total - 1.0).abs() > MASS_TOLERANCE {
            return Err(Error::InvalidArgument(format!("total mass {total} is not 1")));
        }
        Ok(Self { x0, measure })
    }

    pub fn dirac(x0: Complex64) -> Self {
        Self {
            x0,
            measure: RieszCharge::from_atoms(vec![Atom { point: x0, mass: 1.0 }]),
        }
    }

    /// Uniform measure on `|z − x₀| = r`, discretized with `k` equal atoms.
    pub fn circle(x0: Complex64, r: f64, k: usize) -> Result<Self> {
        if !(r > 0.0) || k < 3 {
            return Err(Error::InvalidArgument("circle measure needs r > 0 and k >= 3".into()));
        }
        let atoms = (0..k)
            .map(|s| Atom {
                point: x0 + Complex64::from_polar(r, std::f64::consts::TAU * s as f64 / k as f64),
                mass: 1.0 / k as f64,
            })
            .collect();
        Self::new(x0, RieszCharge::from_atoms(atoms))
    }

    /// Boundary measure (e.g. a harmonic measure) rescaled to mass 1.
    pub fn from_boundary(x0: Complex64, b: &BoundaryMeasure) -> Result<Self> {
        let total = b.total();
        if !(total > 0.0) {
            return Err(Error::Degenerate("boundary measure has no mass".into()));
        }
        Self::new(x0, b.to_charge().scale(1.0 / total))
    }

    /// `t·self + (1 − t)·other`.
    pub fn mix(&self, other: &JensenMeasure, t: f64) -> Result<Self> {
        if self.x0 != other.x0 {
            return Err(Error::InvalidArgument("measures have different base points".into()));
        }
        if !(0.0..=1.0).contains(&t) {
            return Err(Error::InvalidArgument(format!("mixing weight {t} outside [0, 1]")));
        }
        let m = self.measure.scale(t).add(&other.measure.scale(1.0 - t))?;
        Self::new(self.x0, m)
    }

    pub fn x0(&self) -> Complex64 {
        self.x0
    }

    pub fn measure(&self) -> &RieszCharge {
        &self.measure
    }

    /// `∫ u dμ` for a field sharing the lattice of the cell part.
    pub fn integrate(&self, u: &ScalarField) -> Result<f64> {
        self.measure.integrate_field(u, |_| true)
    }

    /// `∫ f dμ` for a pointwise function.
    pub fn integrate_fn(&self, f: impl Fn(Complex64) -> f64) -> f64 {
        self.measure.integrate(f)
    }

    /// Every mass lies in the open `shape`.
    pub fn support_within(&self, shape: &Shape) -> bool {
        self.measure.point_masses().iter().all(|&(z, m)| m == 0.0 || shape.contains(z))
    }

    pub fn to_json(&self) -> JensenMeasureJson {
        JensenMeasureJson { x0: self.x0, measure: self.measure.to_json() }
    }
}

impl TryFrom<JensenMeasureJson> for JensenMeasure {
    type Error = Error;
    fn try_from(j: JensenMeasureJson) -> Result<Self> {
        JensenMeasure::new(j.x0, RieszCharge::try_from(j.measure)?)
    }
}

/// Named subharmonic function on the plane.
#[derive(Clone)]
pub struct TestField {
    pub name: String,
    pub f: Evaluator,
}

impl std::fmt::Debug for TestField {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("TestField").field("name", &self.name).finish()
    }
}

impl TestField {
    pub fn new(name: impl Into<String>, f: impl Fn(Complex64) -> f64 + Send + Sync + 'static) -> Self {
        Self { name: name.into(), f: Arc::new(f) }
    }

    pub fn eval(&self, z: Complex64) -> f64 {
        (self.f)(z)
    }

    /// Samples the function on `grid`, keeping it as the exact evaluator.
    pub fn field(&self, grid: Arc<GridDomain>) -> ScalarField {
        let f = self.f.clone();
        ScalarField::from_fn(grid, move |z| f(z))
    }
}

/// The ten subharmonic test functions used to probe Jensen measures at `x0`,
/// scaled so that they are of order one on the disk `|z − x₀| ≤ scale`.
///
/// Harmonic functions enter with both signs so that a Jensen measure must
/// reproduce them.
pub fn default_testbank(x0: Complex64, scale: f64) -> Vec<TestField> {
    let s = scale;
    let a1 = x0 + s * Complex64::new(0.3, 0.1);
    let a2 = x0 + s * Complex64::new(-0.2, 0.35);
    let a3 = x0 + s * Complex64::new(0.05, -0.62);
    vec![
        TestField::new("re", move |z| (z - x0).re / s),
        TestField::new("-re", move |z| -(z - x0).re / s),
        TestField::new("im", move |z| (z - x0).im / s),
        TestField::new("-im", move |z| -(z - x0).im / s),
        TestField::new("abs2", move |z| (z - x0).norm_sqr() / (s * s)),
        TestField::new("re-square", move |z| ((z - x0) * (z - x0)).re / (s * s)),
        TestField::new("log-a1", move |z| (z - a1).norm().ln()),
        TestField::new("log-a2", move |z| (z - a2).norm().ln()),
        TestField::new("max-re-im", move |z| (z - x0).re.max((z - x0).im) / s),
        TestField::new("max-log-a1-a3", move |z| (z - a1).norm().ln().max((z - a3).norm().ln())),
    ]
}

/// Margin of one test function.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TestMargin {
    pub name: String,
    /// `∫u dμ − u(x₀)`.
    pub margin: f64,
}

/// Outcome of [`is_jensen`].
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct JensenReport {
    pub margins: Vec<TestMargin>,
    pub tolerance: f64,
    pub verdict: bool,
}

impl JensenReport {
    pub fn worst(&self) -> f64 {
        self.margins.iter().map(|m| m.margin).fold(f64::INFINITY, f64::min)
    }
}

/// Sub-mean-value test of `μ` against every function of the bank.
pub fn is_jensen(mu: &JensenMeasure, testbank: &[TestField], tolerance: f64) -> JensenReport {
    let margins: Vec<TestMargin> = testbank
        .par_iter()
        .map(|t| {
            let integral = mu.integrate_fn(|z| t.eval(z));
            TestMargin { name: t.name.clone(), margin: integral - t.eval(mu.x0) }
        })
        .collect();
    let verdict = margins.iter().all(|m| m.margin >= -tolerance);
    JensenReport { margins, tolerance, verdict }
}

/// `max_k |∫u_k dμ₁ − ∫u_k dμ₂|` over a test bank.
pub fn weak_distance(mu1: &RieszCharge, mu2: &RieszCharge, testbank: &[TestField]) -> f64 {
    testbank
        .par_iter()
        .map(|t| (mu1.integrate(|z| t.eval(z)) - mu2.integrate(|z| t.eval(z))).abs())
        .reduce(|| 0.0, f64::max)
}

/// Total-variation distance after binning both measures into `sectors`
/// angular sectors about `centre`.
pub fn sector_distance(mu1: &RieszCharge, mu2: &RieszCharge, centre: Complex64, sectors: usize) -> f64 {
    let bin = |c: &RieszCharge| {
        let mut b = vec![0.0; sectors];
        for (z, m) in c.point_masses() {
            let t = (z - centre).arg().rem_euclid(std::f64::consts::TAU);
            let k = ((t / std::f64::consts::TAU * sectors as f64) as usize).min(sectors - 1);
            b[k] += m;
        }
        b
    };
    bin(mu1).iter().zip(bin(mu2)).map(|(a, b)| (a - b).abs()).sum()
}

/// Nonnegative potential with a logarithmic pole at `x₀`.
#[derive(Debug, Clone)]
pub struct JensenPotential {
    field: ScalarField,
    pole: Complex64,
    ratio: f64,
}

impl JensenPotential {
    /// Wraps a field and estimates its normalization ratio at `pole`.
    pub fn new(field: ScalarField, pole: Complex64) -> Result<Self> {
        let ratio = normalization_ratio(&field, pole)?;
        Ok(Self { field, pole, ratio })
    }

    pub fn field(&self) -> &ScalarField {
        &self.field
    }

    pub fn into_field(self) -> ScalarField {
        self.field
    }

    pub fn pole(&self) -> Complex64 {
        self.pole
    }

    /// Estimated `limsup V(x)/(−log|x − x₀|)` as `x → x₀`.
    pub fn ratio(&self) -> f64 {
        self.ratio
    }

    /// `V(∞)`.
    pub fn at_infinity(&self) -> f64 {
        0.0
    }
}

/// Slope of the circle averages of `v` about `x0` against `−log r` over the
/// radii [`NORMALIZATION_RADII`] (in cells), fitted by least squares.
///
/// For `v = c·(−log|x − x₀|) + (harmonic)` the averages are exactly affine in
/// `log r`, so the slope returns `c`.
pub fn normalization_ratio(v: &ScalarField, x0: Complex64) -> Result<f64> {
    let h = v.grid().spacing();
    let mut pts = Vec::with_capacity(NORMALIZATION_RADII.len());
    for k in NORMALIZATION_RADII {
        let r = k * h;
        pts.push((-r.ln(), sphere_average_with(v, x0, r, 256)?));
    }
    let n = pts.len() as f64;
    let mx = pts.iter().map(|p| p.0).sum::<f64>() / n;
    let my = pts.iter().map(|p| p.1).sum::<f64>() / n;
    let sxy: f64 = pts.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
    let sxx: f64 = pts.iter().map(|p| (p.0 - mx).powi(2)).sum();
    Ok(sxy / sxx)
}

/// Sources of a measure as `(point, mass, is_cell)`, excluding masses at
/// the pole (their kernel difference vanishes).
fn sources(mu: &JensenMeasure) -> Vec<(Complex64, f64, bool)> {
    let c = mu.measure();
    c.atoms()
        .iter()
        .map(|a| (a.point, a.mass, false))
        .chain(c.cell_masses().map(|(_, z, m)| (z, m, true)))
        .filter(|&(z, m, _)| m != 0.0 && z != mu.x0)
        .collect()
}

/// `V_μ` by direct summation over atoms and cells, sampled on `grid`.
///
/// At a node that coincides with a source (or with the pole) the kernel
/// `log|y − x|` is replaced by its mean over the node's cell,
/// `log h + CELL_LOG_MEAN`; atoms use the same value as a floor. The exact
/// evaluator keeps the true kernel and returns `+∞` at the pole.
pub fn log_potential(mu: &JensenMeasure, grid: Arc<GridDomain>) -> Result<JensenPotential> {
    let src = Arc::new(sources(mu));
    let x0 = mu.x0;
    let h = grid.spacing();
    let floor = h.ln() + CELL_LOG_MEAN;
    let kernel = move |d: f64| if d == 0.0 { floor } else { d.ln().max(floor) };
    // Squared-distance form of the floored kernel: 0.5·ln(max(d², e^{2·floor})).
    let floor2 = (2.0 * floor).exp();
    let total: f64 = src.iter().map(|s| s.1).sum();
    let values: Vec<f64> = (0..grid.len())
        .into_par_iter()
        .map(|p| {
            let y = grid.point_flat(p);
            let k0 = kernel((y - x0).norm());
            let mut acc = 0.0;
            for &(x, m, _) in src.iter() {
                let (dx, dy) = (y.re - x.re, y.im - x.im);
                acc += m * (dx * dx + dy * dy).max(floor2).ln();
            }
            0.5 * acc - total * k0
        })
        .collect();
    let exact_src = src.clone();
    let exact: Evaluator = Arc::new(move |y: Complex64| {
        if exact_src.is_empty() {
            return 0.0;
        }
        if y == x0 {
            return f64::INFINITY;
        }
        let k0 = (y - x0).norm().ln();
        exact_src
            .iter()
            .map(|&(x, m, cell)| {
                let d = (y - x).norm();
                let k = if cell { kernel(d) } else { d.ln() };
                m * (k - k0)
            })
            .sum()
    });
    let field = ScalarField::from_values(grid, values)?.with_evaluator(Some(exact));
    JensenPotential::new(field, x0)
}

/// Inverse of the duality map: the Riesz charge of `V` away from the pole,
/// plus an atom `1 − ratio` at the pole.
///
/// The extracted part is clipped at 0 (removing round-off of both signs
/// around harmonic regions) and rescaled to carry exactly `ratio`.
pub fn duality_inverse(v: &JensenPotential, tolerance: f64) -> Result<JensenMeasure> {
    let ratio = v.ratio;
    if ratio > 1.0 + tolerance {
        return Err(Error::NormalizationExceeded { ratio, tolerance });
    }
    let ratio = ratio.clamp(0.0, 1.0);
    let x0 = v.pole;
    let opts = RieszOptions::default();
    let h = v.field.grid().spacing();
    let near = (opts.block_half_width as f64 + 1.0) * h;
    let charge = riesz_extract(&v.field, &opts)?.charge;
    let mut kept = charge.restrict(|z| (z - x0).norm() > near);
    let atoms: Vec<Atom> = kept.atoms().iter().copied().filter(|a| a.mass > 0.0).collect();
    for m in kept.cells_mut() {
        *m = m.max(0.0);
    }
    let spread = RieszCharge::from_atoms(atoms);
    let spread = match kept.grid() {
        Some(g) => RieszCharge::from_cells(g.clone(), kept.cells().to_vec())?.add(&spread)?,
        None => spread,
    };
    let off_pole = spread.total();
    let mut measure = if ratio > 0.0 {
        if !(off_pole > 0.0) {
            return Err(Error::Degenerate("potential has a pole but no charge away from it".into()));
        }
        spread.scale(ratio / off_pole)
    } else {
        RieszCharge::zero()
    };
    if ratio < 1.0 {
        measure = measure.add(&RieszCharge::from_atoms(vec![Atom { point: x0, mass: 1.0 - ratio }]))?;
    }
    JensenMeasure::new(x0, measure)
}

/// Terms of the Poisson–Jensen identity `u(x₀) + ∫V_μ dν_u = ∫u dμ`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct PoissonJensenReport {
    pub u_x0: f64,
    /// `∫ V_μ dν_u`.
    pub potential_term: f64,
    /// `∫ u dμ`.
    pub mean_term: f64,
    pub residual: f64,
}

/// `|u(x₀) + ∫V_μ dν_u − ∫u dμ|` with `ν_u` extracted from the grid.
pub fn poisson_jensen_residual(u: &ScalarField, mu: &JensenMeasure) -> Result<PoissonJensenReport> {
    let u_x0 = u.eval(mu.x0)?;
    if u_x0 == f64::NEG_INFINITY {
        return Err(Error::InvalidArgument("u(x0) = -inf".into()));
    }
    let nu = riesz_measure(u)?;
    let v = log_potential(mu, u.grid_arc().clone())?;
    poisson_jensen_terms(u, &nu, &v, mu)
}

/// [`poisson_jensen_residual`] with the Riesz charge of `u` and the
/// potential of `mu` supplied by the caller.
pub fn poisson_jensen_terms(
    u: &ScalarField,
    nu: &RieszCharge,
    v: &JensenPotential,
    mu: &JensenMeasure,
) -> Result<PoissonJensenReport> {
    let u_x0 = u.eval(mu.x0)?;
    if u_x0 == f64::NEG_INFINITY {
        return Err(Error::InvalidArgument("u(x0) = -inf".into()));
    }
    let potential_term = nu.integrate_field(v.field(), |_| true)?;
    let mean_term = mu.integrate(u)?;
    Ok(PoissonJensenReport {
        u_x0,
        potential_term,
        mean_term,
        residual: (u_x0 + potential_term - mean_term).abs(),
    })
}
