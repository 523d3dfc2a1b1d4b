//! Suite configuration: the JSON schema and the conversion of its pieces
//! into fields, majorants and test functions on a grid.

use std::collections::BTreeSet;
use std::path::Path;
use std::sync::Arc;

use anyhow::{bail, ensure, Context};
use potlab::checker::KeyCondition;
use potlab::fields::{make_delta_sbh, ExclusionSet, GridDomain, MajorantSpec, ScalarField, Shape};
use potlab::green::{extend_green, green_function, ModelDomain};
use potlab::testfn::{greatest_minorant, TestFunction};
use potlab::zeros::{HoloFunction, HoloKind, ZeroDivisor};
use potlab::Complex64;
use serde::{Deserialize, Serialize};

/// Version of the configuration format understood by this build.
pub const SCHEMA_VERSION: u32 = 1;

/// Top-level configuration file.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Suite {
    pub schema_version: u32,
    #[serde(default)]
    pub scenarios: Vec<Scenario>,
}

impl Suite {
    /// Reads and validates a configuration file.
    pub fn load(path: &Path) -> anyhow::Result<Self> {
        let text = std::fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
        Self::parse(&text).with_context(|| format!("in {}", path.display()))
    }

    pub fn parse(text: &str) -> anyhow::Result<Self> {
        let suite: Suite = serde_json::from_str(text).context("configuration does not match the schema")?;
        suite.validate()?;
        Ok(suite)
    }

    pub fn validate(&self) -> anyhow::Result<()> {
        ensure!(
            self.schema_version == SCHEMA_VERSION,
            "schema_version {} is not supported (expected {SCHEMA_VERSION})",
            self.schema_version
        );
        let mut names = BTreeSet::new();
        for (k, s) in self.scenarios.iter().enumerate() {
            ensure!(!s.name.is_empty(), "scenarios[{k}]: empty name");
            ensure!(names.insert(s.name.as_str()), "scenarios[{k}]: duplicate name {:?}", s.name);
        }
        Ok(())
    }
}

/// Which verification a scenario runs.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Check {
    Main,
    Uniform,
    Individual1,
    Individual2,
    ProofChain,
    PoincareLelong,
    Duality,
}

impl Check {
    pub const ALL: [Check; 7] = [
        Check::Main,
        Check::Uniform,
        Check::Individual1,
        Check::Individual2,
        Check::ProofChain,
        Check::PoincareLelong,
        Check::Duality,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Check::Main => "main",
            Check::Uniform => "uniform",
            Check::Individual1 => "individual1",
            Check::Individual2 => "individual2",
            Check::ProofChain => "proof-chain",
            Check::PoincareLelong => "poincare-lelong",
            Check::Duality => "duality",
        }
    }

    pub fn summary(self) -> &'static str {
        match self {
            Check::Main => "weighted Riesz-charge inequality for u <= M (needs u or function, test)",
            Check::Uniform => "zero-sum bound for log|f| <= M with fixed constants (needs function, test or sweep)",
            Check::Individual1 => "zero sums along an exhaustion stay below the uniform bound (needs function, w, test, exhaustion)",
            Check::Individual2 => "greatest minorant of w as the test function (needs function, w, key)",
            Check::ProofChain => "Poisson-Jensen identities along truncations of the extended test function",
            Check::PoincareLelong => "Riesz charge of log|f| against the zeros of f (needs function)",
            Check::Duality => "dual measure of the Green function against harmonic measure of the comparison domain",
        }
    }

    /// Tolerance used when neither the scenario nor the command line sets one.
    pub fn default_tolerance(self) -> f64 {
        match self {
            Check::ProofChain => 5e-3,
            Check::PoincareLelong | Check::Duality => 0.02,
            _ => potlab::checker::DEFAULT_TOLERANCE,
        }
    }
}

impl std::fmt::Display for Check {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.name())
    }
}

/// The region `D` and the lattice spacing.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DomainSpec {
    pub shape: Shape,
    pub h: f64,
}

fn one() -> f64 {
    1.0
}

/// Closed-form building block of a field.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case", deny_unknown_fields)]
pub enum Term {
    /// `weight · ½ log(|z − at|² + eps²)`.
    Log {
        at: Complex64,
        #[serde(default = "one")]
        weight: f64,
        #[serde(default)]
        eps: f64,
    },
    /// `coef · |z − center|²`.
    Quadratic {
        coef: f64,
        #[serde(default)]
        center: Complex64,
    },
    /// `Re(coef · z)`.
    Linear { coef: Complex64 },
    Constant { value: f64 },
    /// `weight · g(·, pole)` extended by 0, on `domain` (default: `D`).
    Green {
        #[serde(default)]
        domain: Option<ModelDomain>,
        pole: Complex64,
        #[serde(default = "one")]
        weight: f64,
    },
}

impl Term {
    fn closed_form(&self) -> Option<Box<dyn Fn(Complex64) -> f64 + Send + Sync>> {
        Some(match *self {
            Term::Log { at, weight, eps } => {
                Box::new(move |z: Complex64| weight * 0.5 * ((z - at).norm_sqr() + eps * eps).ln())
            }
            Term::Quadratic { coef, center } => Box::new(move |z: Complex64| coef * (z - center).norm_sqr()),
            Term::Linear { coef } => Box::new(move |z: Complex64| (coef * z).re),
            Term::Constant { value } => Box::new(move |_| value),
            Term::Green { .. } => return None,
        })
    }
}

/// Sum of `terms` sampled on `grid`; closed-form sums keep an exact
/// evaluator.
pub fn build_field(terms: &[Term], grid: &Arc<GridDomain>) -> anyhow::Result<ScalarField> {
    let closed: Vec<_> = terms.iter().filter_map(Term::closed_form).collect();
    let mut field = ScalarField::from_fn(grid.clone(), move |z| closed.iter().map(|f| f(z)).sum());
    let d = ModelDomain::from_shape(*grid.shape());
    for t in terms {
        if let Term::Green { domain, pole, weight } = *t {
            let dom = domain.unwrap_or(d);
            let g = extend_green(&green_function(&dom, pole, grid.clone())?, &dom);
            field = field.add(&g.map(move |x| weight * x))?;
        }
    }
    Ok(field)
}

/// `M = u₁ − u₂`.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MajorantConfig {
    #[serde(default)]
    pub u1: Vec<Term>,
    #[serde(default)]
    pub u2: Vec<Term>,
}

impl MajorantConfig {
    pub fn build(&self, grid: &Arc<GridDomain>) -> anyhow::Result<MajorantSpec> {
        Ok(make_delta_sbh(build_field(&self.u1, grid)?, build_field(&self.u2, grid)?)?)
    }
}

/// Validates a holomorphic function read from a configuration.
pub fn validated(f: &HoloFunction) -> anyhow::Result<HoloFunction> {
    let g = match f.kind {
        HoloKind::Polynomial => HoloFunction::polynomial(f.zeros.clone(), f.leading)?,
        HoloKind::Blaschke => {
            let mut g = HoloFunction::blaschke(f.zeros.clone())?;
            ensure!(f.leading.norm() > 0.0, "leading coefficient must not vanish");
            g.leading = f.leading;
            g
        }
    };
    Ok(g.with_exp(f.exp_poly.clone()))
}

/// How the test function `v` is obtained.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum TestSpec {
    Zero,
    /// `scale · b · g(·, pole) / max_{D∖S} g` on `domain` (default: `D`).
    Green {
        #[serde(default)]
        domain: Option<ModelDomain>,
        pole: Complex64,
        #[serde(default = "one")]
        scale: f64,
    },
    /// A field given by terms, used as is.
    Field { terms: Vec<Term> },
    /// Greatest subharmonic minorant of the obstacle `w` on `D∖S`.
    Minorant { w: Vec<Term> },
}

impl TestSpec {
    pub fn build(&self, grid: &Arc<GridDomain>, s: &ExclusionSet, b: f64) -> anyhow::Result<TestFunction> {
        let d = ModelDomain::from_shape(*grid.shape());
        Ok(match self {
            TestSpec::Zero => TestFunction::zero(grid.clone(), s.clone(), b)?,
            TestSpec::Green { domain, pole, scale } => {
                TestFunction::green_family(&domain.unwrap_or(d), *pole, s.clone(), grid.clone(), b)?.scaled(*scale)?
            }
            TestSpec::Field { terms } => TestFunction::new(build_field(terms, grid)?, s.clone(), b)?,
            TestSpec::Minorant { w } => {
                let gm = greatest_minorant(&build_field(w, grid)?, s)?;
                TestFunction::new(gm.field, s.clone(), b)?
            }
        })
    }
}

fn origin() -> Complex64 {
    Complex64::new(0.0, 0.0)
}

/// One verification job.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Scenario {
    pub name: String,
    pub check: Check,
    pub domain: DomainSpec,
    /// The compact set `S`, a union of closed balls.
    #[serde(default)]
    pub s: ExclusionSet,
    /// The point `x₀` (or `z₀`).
    #[serde(default = "origin")]
    pub x0: Complex64,
    #[serde(default = "one")]
    pub b: f64,
    /// Comparison domain; the smallest admissible disk when absent.
    #[serde(default)]
    pub dtilde: Option<ModelDomain>,
    #[serde(default)]
    pub tolerance: Option<f64>,
    /// Defaults to `M ≡ 0`.
    #[serde(default)]
    pub majorant: MajorantConfig,
    #[serde(default)]
    pub function: Option<HoloFunction>,
    /// The subharmonic function `u`; `log|f|` when absent.
    #[serde(default)]
    pub u: Option<Vec<Term>>,
    #[serde(default)]
    pub test: Option<TestSpec>,
    /// Extra test functions checked with the same constants.
    #[serde(default)]
    pub sweep: Vec<TestSpec>,
    /// Obstacle `w`.
    #[serde(default)]
    pub w: Option<Vec<Term>>,
    #[serde(default)]
    pub exhaustion: Vec<ExclusionSet>,
    #[serde(default)]
    pub subdivisor: Option<ZeroDivisor>,
    #[serde(default)]
    pub key: Option<KeyCondition>,
    #[serde(default)]
    pub n_list: Option<Vec<u32>>,
}

impl Scenario {
    pub fn grid(&self) -> anyhow::Result<Arc<GridDomain>> {
        let d = &self.domain;
        ensure!(d.h > 0.0 && d.h.is_finite(), "grid spacing h must be positive");
        Ok(Arc::new(GridDomain::new(d.shape, d.h)?))
    }

    pub fn exclusion(&self) -> anyhow::Result<ExclusionSet> {
        Ok(ExclusionSet::from_balls(self.s.balls().to_vec())?)
    }

    /// Points named by the scenario must lie in `D`.
    pub fn check_points(&self) -> anyhow::Result<()> {
        let d = self.domain.shape;
        if !d.contains(self.x0) {
            bail!("x0 = {} lies outside D", self.x0);
        }
        for b in self.s.balls() {
            if !d.contains(b.center) {
                bail!("S ball centre {} lies outside D", b.center);
            }
        }
        Ok(())
    }

    pub fn function(&self) -> anyhow::Result<HoloFunction> {
        validated(self.function.as_ref().context("this check needs a `function`")?)
    }

    /// `u` from its terms, or `log|f|`.
    pub fn u_field(&self, grid: &Arc<GridDomain>) -> anyhow::Result<ScalarField> {
        match (&self.u, &self.function) {
            (Some(terms), _) => build_field(terms, grid),
            (None, Some(_)) => Ok(self.function()?.log_modulus_field(grid.clone())),
            (None, None) => bail!("this check needs `u` or `function`"),
        }
    }

    pub fn test_spec(&self) -> anyhow::Result<&TestSpec> {
        self.test.as_ref().context("this check needs a `test` function")
    }

    pub fn w_field(&self, grid: &Arc<GridDomain>) -> anyhow::Result<ScalarField> {
        build_field(self.w.as_deref().context("this check needs an obstacle `w`")?, grid)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn minimal_suite_parses() {
        let s = Suite::parse(r#"{"schema_version": 1}"#).unwrap();
        assert!(s.scenarios.is_empty());
    }

    #[test]
    fn unknown_fields_are_reported_with_position() {
        let err = Suite::parse("{\n  \"schema_version\": 1,\n  \"scenarioz\": []\n}").unwrap_err();
        let msg = format!("{err:#}");
        assert!(msg.contains("scenarioz") && msg.contains("line 3"), "{msg}");
    }

    #[test]
    fn version_and_names_are_checked() {
        assert!(Suite::parse(r#"{"schema_version": 2}"#).is_err());
        let dup = r#"{"schema_version": 1, "scenarios": [
            {"name": "a", "check": "duality", "domain": {"shape": {"kind": "disk", "center": [0, 0], "radius": 1}, "h": 0.1}},
            {"name": "a", "check": "duality", "domain": {"shape": {"kind": "disk", "center": [0, 0], "radius": 1}, "h": 0.1}}
        ]}"#;
        assert!(format!("{:#}", Suite::parse(dup).unwrap_err()).contains("duplicate"));
    }

    #[test]
    fn terms_sum_in_closed_form() {
        let grid = Arc::new(GridDomain::new(Shape::unit_disk(), 0.125).unwrap());
        let terms = vec![
            Term::Log { at: Complex64::new(0.5, 0.0), weight: 2.0, eps: 0.0 },
            Term::Quadratic { coef: 0.5, center: origin() },
            Term::Linear { coef: Complex64::new(0.0, 1.0) },
            Term::Constant { value: -1.0 },
        ];
        let f = build_field(&terms, &grid).unwrap();
        let z = Complex64::new(0.1, 0.2);
        let expected = 2.0 * (z - 0.5).norm().ln() + 0.5 * z.norm_sqr() - z.im - 1.0;
        assert!((f.eval(z).unwrap() - expected).abs() < 1e-14);
    }

    #[test]
    fn green_term_vanishes_outside_its_domain() {
        let grid = Arc::new(GridDomain::new(Shape::unit_disk(), 1.0 / 32.0).unwrap());
        let dom = ModelDomain::disk(origin(), 0.5);
        let f = build_field(&[Term::Green { domain: Some(dom), pole: origin(), weight: 1.0 }], &grid).unwrap();
        assert_eq!(f.eval(Complex64::new(0.75, 0.0)).unwrap(), 0.0);
        assert!((f.eval(Complex64::new(0.25, 0.0)).unwrap() - 2f64.ln()).abs() < 1e-9);
    }

    #[test]
    fn blaschke_roots_must_lie_in_the_disk() {
        let f = HoloFunction {
            kind: HoloKind::Blaschke,
            zeros: ZeroDivisor::simple(&[Complex64::new(1.5, 0.0)]).unwrap(),
            leading: Complex64::new(1.0, 0.0),
            exp_poly: vec![],
        };
        assert!(validated(&f).is_err());
    }
}
