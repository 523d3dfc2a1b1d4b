//! Fundamental kernels `h_m`, the normalizing constants `s_{m-1}` and `b_p`,
//! inversion in a sphere and the Kelvin transform.

use std::f64::consts::PI;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::fields::{GridDomain, ScalarField};

/// Real dimension `m` of the ambient space.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(try_from = "u32", into = "u32")]
pub struct Dimension(u32);

impl Dimension {
    pub const PLANE: Dimension = Dimension(2);

    pub fn new(m: u32) -> Result<Self> {
        if m == 0 {
            return Err(Error::Dimension(m, "m must be at least 1"));
        }
        Ok(Dimension(m))
    }

    pub fn get(self) -> u32 {
        self.0
    }

    /// Rejects `m = 1` for operations that only make sense for `m >= 2`.
    pub fn require_at_least_two(self, op: &'static str) -> Result<()> {
        if self.0 < 2 {
            Err(Error::Dimension(self.0, op))
        } else {
            Ok(())
        }
    }
}

impl TryFrom<u32> for Dimension {
    type Error = Error;
    fn try_from(m: u32) -> Result<Self> {
        Dimension::new(m)
    }
}

impl From<Dimension> for u32 {
    fn from(d: Dimension) -> u32 {
        d.0
    }
}

/// `h_1(t) = t`, `h_2(t) = log|t|`, `h_m(t) = -|t|^{2-m}` for `m >= 3`.
pub fn kernel_h(m: Dimension, t: f64) -> f64 {
    match m.0 {
        1 => t,
        2 => {
            if t == 0.0 {
                f64::NEG_INFINITY
            } else {
                t.abs().ln()
            }
        }
        k => {
            if t == 0.0 {
                f64::NEG_INFINITY
            } else {
                -t.abs().powi(2 - k as i32)
            }
        }
    }
}

/// `Γ(m/2)` for `1 <= m <= 16` from the integer and half-integer closed forms.
fn gamma_half(m: u32) -> f64 {
    debug_assert!((1..=16).contains(&m));
    if m % 2 == 0 {
        // Γ(k) = (k-1)!
        (1..m / 2).map(f64::from).product()
    } else {
        // Γ(k + 1/2) = (2k-1)!! √π / 2^k, with k = (m-1)/2
        let k = (m - 1) / 2;
        let double_fact: f64 = (1..=k).map(|j| f64::from(2 * j - 1)).product();
        double_fact * PI.sqrt() / 2f64.powi(k as i32)
    }
}

/// `s_{m-1} = 2 π^{m/2} max{1, m-2} / Γ(m/2)`: the area of the unit sphere in
/// `R^m` times `max{1, m-2}`.
///
/// Only `m <= 16` is supported.
pub fn sphere_constant(m: Dimension) -> Result<f64> {
    let m = m.0;
    if m > 16 {
        return Err(Error::Dimension(m, "closed forms for Γ(m/2) cover m <= 16"));
    }
    let factor = f64::from(m.saturating_sub(2).max(1));
    Ok(2.0 * PI.powf(f64::from(m) / 2.0) * factor / gamma_half(m))
}

/// `b_0 = 1`, `b_p = s_{p-1} / (p max{1, p-2})`: the volume of the unit ball
/// in `R^p`.
pub fn ball_volume_constant(p: u32) -> Result<f64> {
    if p == 0 {
        return Ok(1.0);
    }
    let s = sphere_constant(Dimension(p))?;
    Ok(s / (f64::from(p) * f64::from(p.saturating_sub(2).max(1))))
}

/// A point of the one-point compactification.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum ExtPoint<P> {
    Finite(P),
    Infinity,
}

/// Minimal Euclidean structure needed by [`inversion`].
pub trait EuclideanPoint: Copy {
    fn sub(self, other: Self) -> Self;
    fn add(self, other: Self) -> Self;
    fn scale(self, k: f64) -> Self;
    fn norm_sqr(self) -> f64;
}

impl EuclideanPoint for Complex64 {
    fn sub(self, other: Self) -> Self {
        self - other
    }
    fn add(self, other: Self) -> Self {
        self + other
    }
    fn scale(self, k: f64) -> Self {
        self * k
    }
    fn norm_sqr(self) -> f64 {
        Complex64::norm_sqr(&self)
    }
}

impl<const N: usize> EuclideanPoint for [f64; N] {
    fn sub(self, other: Self) -> Self {
        std::array::from_fn(|i| self[i] - other[i])
    }
    fn add(self, other: Self) -> Self {
        std::array::from_fn(|i| self[i] + other[i])
    }
    fn scale(self, k: f64) -> Self {
        self.map(|x| x * k)
    }
    fn norm_sqr(self) -> f64 {
        self.iter().map(|x| x * x).sum()
    }
}

/// Inversion in the unit sphere about `center`: `y ↦ y / |y|²` with
/// `y = x - center`, `center ↦ ∞`, `∞ ↦ center`.
pub fn inversion<P: EuclideanPoint>(x: ExtPoint<P>, center: P) -> ExtPoint<P> {
    match x {
        ExtPoint::Infinity => ExtPoint::Finite(center),
        ExtPoint::Finite(p) => {
            let y = p.sub(center);
            let r2 = y.norm_sqr();
            if r2 == 0.0 {
                ExtPoint::Infinity
            } else {
                ExtPoint::Finite(center.add(y.scale(1.0 / r2)))
            }
        }
    }
}

/// Kelvin transform `u*(x*) = |x - c|^{m-2} u(x)` about a finite center `c`.
///
/// The result is sampled on `target`; nodes whose preimage falls outside the
/// region where `u` is defined are left undefined. The source region must keep
/// at least one cell of distance from the center.
pub fn kelvin_transform(
    u: &ScalarField,
    m: Dimension,
    center: Complex64,
    target: &GridDomain,
) -> Result<ScalarField> {
    let h = u.grid().spacing();
    let touches = u
        .grid()
        .nodes()
        .filter(|&(i, j)| !u.value(i, j).is_nan())
        .any(|(i, j)| (u.grid().point(i, j) - center).norm() < h);
    if touches {
        return Err(Error::Geometry(
            "the field's region touches the inversion center".into(),
        ));
    }
    let exponent = f64::from(m.get()) - 2.0;
    let values = target
        .nodes()
        .map(|(i, j)| {
            let y = target.point(i, j);
            match inversion(ExtPoint::Finite(y), center) {
                ExtPoint::Infinity => f64::NAN,
                ExtPoint::Finite(x) => match u.eval(x) {
                    Ok(v) => (x - center).norm().powf(exponent) * v,
                    Err(_) => f64::NAN,
                },
            }
        })
        .collect();
    ScalarField::from_values(target.clone().into(), values)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    #[test]
    fn kernel_values() {
        assert_eq!(kernel_h(Dimension::PLANE, 1.0), 0.0);
        assert_eq!(kernel_h(Dimension::new(3).unwrap(), 1.0), -1.0);
        assert_eq!(kernel_h(Dimension::PLANE, 0.0), f64::NEG_INFINITY);
        assert_eq!(kernel_h(Dimension::new(4).unwrap(), 0.0), f64::NEG_INFINITY);
        assert_eq!(kernel_h(Dimension::new(1).unwrap(), -2.5), -2.5);
        assert_relative_eq!(kernel_h(Dimension::new(4).unwrap(), 2.0), -0.25);
    }

    #[test]
    fn zero_dimension_rejected() {
        assert!(Dimension::new(0).is_err());
        assert!(Dimension::new(1).unwrap().require_at_least_two("x").is_err());
    }

    #[test]
    fn gamma_closed_forms() {
        // Γ(1/2) = √π, Γ(3/2) = √π/2, Γ(5/2) = 3√π/4, Γ(4) = 6
        assert_relative_eq!(gamma_half(1), PI.sqrt(), max_relative = 1e-15);
        assert_relative_eq!(gamma_half(3), PI.sqrt() / 2.0, max_relative = 1e-15);
        assert_relative_eq!(gamma_half(5), 0.75 * PI.sqrt(), max_relative = 1e-15);
        assert_relative_eq!(gamma_half(8), 6.0, max_relative = 1e-15);
    }

    #[test]
    fn sphere_and_ball_constants() {
        let s = |m| sphere_constant(Dimension::new(m).unwrap()).unwrap();
        assert_relative_eq!(s(2), 2.0 * PI, max_relative = 1e-12);
        assert_relative_eq!(s(3), 4.0 * PI, max_relative = 1e-12);
        assert_relative_eq!(s(4), 4.0 * PI * PI, max_relative = 1e-12);
        assert_relative_eq!(s(1), 2.0, max_relative = 1e-12);
        assert_relative_eq!(ball_volume_constant(0).unwrap(), 1.0);
        assert_relative_eq!(ball_volume_constant(2).unwrap(), PI, max_relative = 1e-12);
        assert_relative_eq!(ball_volume_constant(4).unwrap(), PI * PI / 2.0, max_relative = 1e-12);
        assert_relative_eq!(ball_volume_constant(3).unwrap(), 4.0 * PI / 3.0, max_relative = 1e-12);
        assert!(sphere_constant(Dimension::new(17).unwrap()).is_err());
    }

    #[test]
    fn complex_dimension_chain() {
        // s_{2n-1} = 2π^n max{1, 2n-2} / (n-1)!, b_{2n-2} = π^{n-1} / (n-1)!
        for n in 1..=8u32 {
            let fact: f64 = (1..n).map(f64::from).product();
            let s = sphere_constant(Dimension::new(2 * n).unwrap()).unwrap();
            let expected_s = 2.0 * PI.powi(n as i32) * f64::from((2 * n).saturating_sub(2).max(1)) / fact;
            assert_relative_eq!(s, expected_s, max_relative = 1e-12);
            let b = ball_volume_constant(2 * n - 2).unwrap();
            assert_relative_eq!(b, PI.powi(n as i32 - 1) / fact, max_relative = 1e-12);
        }
    }

    #[test]
    fn inversion_basics() {
        let c = Complex64::new(0.0, 0.0);
        assert_eq!(inversion(ExtPoint::Finite(c), c), ExtPoint::Infinity);
        assert_eq!(inversion(ExtPoint::Infinity, c), ExtPoint::Finite(c));
        let x = Complex64::from_polar(1.0, 0.7);
        match inversion(ExtPoint::Finite(x), c) {
            ExtPoint::Finite(y) => assert_relative_eq!((y - x).norm(), 0.0, epsilon = 1e-15),
            ExtPoint::Infinity => panic!("unit circle must be fixed"),
        }
        let p = [1.0, 2.0, -0.5];
        let q = [0.25, 0.0, 0.0];
        match inversion(inversion(ExtPoint::Finite(p), q), q) {
            ExtPoint::Finite(r) => {
                for k in 0..3 {
                    assert_relative_eq!(r[k], p[k], epsilon = 1e-14);
                }
            }
            ExtPoint::Infinity => panic!(),
        }
    }

    fn disk(center: f64, radius: f64, h: f64) -> GridDomain {
        let shape = crate::fields::Shape::Disk {
            center: Complex64::new(center, 0.0),
            radius,
        };
        GridDomain::new(shape, h).unwrap()
    }

    #[test]
    fn kelvin_keeps_planar_harmonics() {
        // the disk |x − 2| < 0.5 inverts into |y − 8/15| < 2/15
        let src = std::sync::Arc::new(disk(2.0, 0.5, 1.0 / 64.0));
        let u = ScalarField::from_fn(src, |z| z.re);
        let target = disk(8.0 / 15.0, 0.12, 1.0 / 512.0);
        let k = kelvin_transform(&u, Dimension::PLANE, Complex64::new(0.0, 0.0), &target).unwrap();
        let mut seen = 0;
        for (i, j) in target.nodes() {
            let y = target.point(i, j);
            let v = k.value(i, j);
            if (y - Complex64::new(8.0 / 15.0, 0.0)).norm() < 0.12 {
                assert_relative_eq!(v, y.re / y.norm_sqr(), epsilon = 1e-9);
                seen += 1;
            }
        }
        assert!(seen > 100);
    }

    #[test]
    fn kelvin_weight_in_higher_dimension() {
        let src = std::sync::Arc::new(disk(2.0, 0.5, 1.0 / 64.0));
        let u = ScalarField::from_fn(src, |_| 1.0);
        let target = disk(8.0 / 15.0, 0.1, 1.0 / 256.0);
        let m = Dimension::new(4).unwrap();
        let k = kelvin_transform(&u, m, Complex64::new(0.0, 0.0), &target).unwrap();
        let (i, j) = target.nodes().find(|&(i, j)| (target.point(i, j).re - 0.5).abs() < 1e-9 && target.point(i, j).im == 0.0).unwrap();
        // |x|² with x = y/|y|² is 1/|y|²
        assert_relative_eq!(k.value(i, j), 4.0, epsilon = 1e-12);
    }

    #[test]
    fn kelvin_rejects_center_in_region() {
        let src = std::sync::Arc::new(disk(0.0, 0.5, 1.0 / 32.0));
        let u = ScalarField::from_fn(src, |z| z.re);
        let target = disk(0.0, 0.5, 1.0 / 32.0);
        assert!(kelvin_transform(&u, Dimension::PLANE, Complex64::new(0.0, 0.0), &target).is_err());
    }
}
