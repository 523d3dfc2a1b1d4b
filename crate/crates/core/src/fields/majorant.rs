//! δ-subharmonic majorants `M = u₁ − u₂`.

use num_complex::Complex64;

use super::charge::{hahn_jordan, RieszCharge};
use super::riesz::{check_subharmonic_with, dom_mask, riesz_measure, SubharmonicCheck};
use super::scalar::ScalarField;
use crate::error::{Error, Result};

/// `M = u₁ − u₂` with its Riesz charge and defining-set mask.
#[derive(Debug, Clone)]
pub struct MajorantSpec {
    pub u1: ScalarField,
    pub u2: ScalarField,
    /// `ν_M = ν_{u₁} − ν_{u₂}`.
    pub charge: RieszCharge,
    /// Per-node membership in `dom M`.
    pub dom: Vec<bool>,
    /// Sampling stride used for `dom`.
    pub stride: usize,
}

/// Default stride of the `dom M` sampling.
pub const DEFAULT_DOM_STRIDE: usize = 4;

/// Builds `M = u₁ − u₂`; both fields must pass the sub-mean-value test.
pub fn make_delta_sbh(u1: ScalarField, u2: ScalarField) -> Result<MajorantSpec> {
    make_delta_sbh_with(u1, u2, DEFAULT_DOM_STRIDE, &SubharmonicCheck::default())
}

pub fn make_delta_sbh_with(
    u1: ScalarField,
    u2: ScalarField,
    stride: usize,
    check: &SubharmonicCheck,
) -> Result<MajorantSpec> {
    u1.require_same_grid(&u2)?;
    for u in [&u1, &u2] {
        let violations = check_subharmonic_with(u, check);
        if !violations.is_empty() {
            return Err(Error::NotSubharmonic { violations });
        }
    }
    let charge = riesz_measure(&u1)?.sub(&riesz_measure(&u2)?)?;
    let grid = u1.grid_arc().clone();
    let finite: Vec<bool> = u1
        .values()
        .iter()
        .zip(u2.values())
        .map(|(a, b)| a.is_finite() && b.is_finite())
        .collect();
    let dom = dom_mask(&charge, &grid, &finite, stride);
    Ok(MajorantSpec {
        u1,
        u2,
        charge,
        dom,
        stride,
    })
}

impl MajorantSpec {
    /// `M` at an arbitrary point; `NaN` where undefined (`−∞ − (−∞)`).
    pub fn eval(&self, z: Complex64) -> Result<f64> {
        Ok(self.u1.eval(z)? - self.u2.eval(z)?)
    }

    /// Node values of `M`.
    pub fn field(&self) -> ScalarField {
        self.u1.sub(&self.u2).expect("u1 and u2 share a grid")
    }

    /// `(ν_M⁺, ν_M⁻)`.
    pub fn parts(&self) -> (RieszCharge, RieszCharge) {
        hahn_jordan(&self.charge)
    }

    /// Membership of `z` in `dom M` according to the nearest node.
    pub fn in_dom(&self, z: Complex64) -> bool {
        self.u1.grid().nearest(z).is_some_and(|p| self.dom[p])
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fields::{GridDomain, Shape};
    use std::sync::Arc;

    fn grid() -> Arc<GridDomain> {
        Arc::new(GridDomain::new(Shape::unit_disk(), 1.0 / 32.0).unwrap())
    }

    #[test]
    fn zero_second_part() {
        let g = grid();
        let a = Complex64::new(0.25, 0.125);
        let u1 = ScalarField::from_fn(g.clone(), move |z| (z - a).norm().ln());
        let m = make_delta_sbh(u1.clone(), ScalarField::zeros(g.clone())).unwrap();
        let direct = riesz_measure(&u1).unwrap();
        assert_eq!(m.charge.atoms(), direct.atoms());
        // dom M is the finiteness mask away from the atom
        let far = g.nearest(Complex64::new(-0.5, -0.5)).unwrap();
        assert!(m.dom[far]);
        assert!(!m.dom[g.nearest(a).unwrap()]);
    }

    #[test]
    fn equal_parts_cancel() {
        let g = grid();
        let u = ScalarField::from_fn(g, |z| (z - Complex64::new(0.1, 0.0)).norm().ln() + z.norm_sqr());
        let m = make_delta_sbh(u.clone(), u).unwrap();
        assert!(m.charge.atoms().is_empty());
        assert!(m.charge.total_variation() < 1e-12);
        assert_eq!(m.eval(Complex64::new(0.3, 0.3)).unwrap(), 0.0);
    }

    #[test]
    fn two_logs_give_signed_atoms() {
        let g = grid();
        let a = Complex64::new(0.25, 0.25);
        let b = Complex64::new(-0.25, 0.0);
        let m = make_delta_sbh(
            ScalarField::from_fn(g.clone(), move |z| (z - a).norm().ln()),
            ScalarField::from_fn(g, move |z| (z - b).norm().ln()),
        )
        .unwrap();
        let (p, n) = m.parts();
        assert_eq!(p.atoms().len(), 1);
        assert_eq!(n.atoms().len(), 1);
        assert!((p.atoms()[0].point - a).norm() < 1e-9);
        assert!((n.atoms()[0].point - b).norm() < 1e-9);
        assert!((p.atoms()[0].mass - 1.0).abs() < 1e-3);
    }

    #[test]
    fn rejects_superharmonic_part() {
        let g = grid();
        let bad = ScalarField::from_fn(g.clone(), |z| -z.norm_sqr());
        assert!(matches!(
            make_delta_sbh(bad, ScalarField::zeros(g)),
            Err(Error::NotSubharmonic { .. })
        ));
    }
}
