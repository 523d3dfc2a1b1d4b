//! Seeded random scenarios for the main inequality on the unit disk.
//!
//! Each scenario takes `u = log|c·∏(z − aₖ)|` and the majorant
//! `M = Σ ½ log(|z − aₖ|² + ε²) + log c + η(1 − |z|²)`, so that `u ≤ M`
//! holds in the disk and `ν_M` has both signs when `η > 0`. The test
//! function is a scaled Green function of the disk with a random pole in
//! `S`.

use potlab::fields::{Ball, ExclusionSet, Shape};
use potlab::green::ModelDomain;
use potlab::zeros::{HoloFunction, ZeroDivisor};
use potlab::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::scenario::{Check, DomainSpec, MajorantConfig, Scenario, Suite, TestSpec, Term, SCHEMA_VERSION};

fn point_in_disk(rng: &mut ChaCha8Rng, radius: f64) -> Complex64 {
    let r = radius * rng.random::<f64>().sqrt();
    Complex64::from_polar(r, rng.random_range(0.0..std::f64::consts::TAU))
}

fn roots(rng: &mut ChaCha8Rng, x0: Complex64) -> Vec<Complex64> {
    let k = rng.random_range(1..=4);
    let mut out: Vec<Complex64> = Vec::with_capacity(k);
    while out.len() < k {
        let a = point_in_disk(rng, 0.85);
        if (a - x0).norm() > 0.08 && out.iter().all(|b| (a - b).norm() > 0.12) {
            out.push(a);
        }
    }
    out
}

/// One random scenario; scenarios with odd `index` get an explicit
/// comparison disk, the others use the default one.
pub fn random_scenario(rng: &mut ChaCha8Rng, index: usize, h: f64) -> Scenario {
    let origin = Complex64::new(0.0, 0.0);
    let radius = rng.random_range(0.3..0.5);
    let x0 = point_in_disk(rng, 0.5 * radius);
    let zs = roots(rng, x0);
    let c = rng.random_range(0.5..2.0);
    let eps = rng.random_range(0.05..0.3);
    let eta = rng.random_range(0.0..0.5);
    let mut u1: Vec<Term> = zs.iter().map(|&at| Term::Log { at, weight: 1.0, eps }).collect();
    u1.push(Term::Constant { value: f64::ln(c) + eta });
    let u2 = vec![Term::Quadratic { coef: eta, center: origin }];
    let f = HoloFunction::polynomial(ZeroDivisor::simple(&zs).expect("distinct roots"), Complex64::new(c, 0.0))
        .expect("valid polynomial");
    let dtilde = (index % 2 == 1).then(|| ModelDomain::disk(origin, rng.random_range(radius + 0.15..0.97)));
    Scenario {
        name: format!("random-{index:02}"),
        check: Check::Main,
        domain: DomainSpec { shape: Shape::unit_disk(), h },
        s: ExclusionSet::from_balls(vec![Ball { center: origin, radius }]).expect("positive radius"),
        x0,
        b: rng.random_range(0.5..2.0),
        dtilde,
        tolerance: None,
        majorant: MajorantConfig { u1, u2 },
        function: Some(f),
        u: None,
        test: Some(TestSpec::Green {
            domain: None,
            pole: point_in_disk(rng, 0.8 * radius),
            scale: rng.random_range(0.3..1.0),
        }),
        sweep: Vec::new(),
        w: None,
        exhaustion: Vec::new(),
        subdivisor: None,
        key: None,
        n_list: None,
    }
}

/// `count` random scenarios drawn from `seed`.
pub fn random_suite(seed: u64, count: usize, h: f64) -> Suite {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    Suite {
        schema_version: SCHEMA_VERSION,
        scenarios: (0..count).map(|k| random_scenario(&mut rng, k, h)).collect(),
    }
}
