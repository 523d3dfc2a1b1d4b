//! Circle and disk averages of grid fields.

use std::f64::consts::TAU;

use num_complex::Complex64;

use super::scalar::ScalarField;
use crate::error::{Error, Result};

/// Default number of quadrature nodes on a circle.
pub const DEFAULT_CIRCLE_NODES: usize = 1024;

/// Trapezoid average of `u` over the circle `|z − x| = r` with `k` nodes.
pub fn sphere_average_with(u: &ScalarField, x: Complex64, r: f64, k: usize) -> Result<f64> {
    if !(r > 0.0) || k == 0 {
        return Err(Error::InvalidArgument("sphere_average needs r > 0 and k > 0".into()));
    }
    let mut acc = 0.0;
    for s in 0..k {
        let z = x + Complex64::from_polar(r, TAU * s as f64 / k as f64);
        acc += u.eval(z)?;
    }
    Ok(acc / k as f64)
}

/// [`sphere_average_with`] with [`DEFAULT_CIRCLE_NODES`] nodes.
pub fn sphere_average(u: &ScalarField, x: Complex64, r: f64) -> Result<f64> {
    sphere_average_with(u, x, r, DEFAULT_CIRCLE_NODES)
}

/// Average of `u` over the disk `|z − x| <= r`.
///
/// Cells fully inside the disk use the node value; cells cut by the circle,
/// and cells whose node is a `−∞` marker, are subsampled on a `32×32`
/// sub-lattice. Marker cells without an exact evaluator are left out. The sum
/// is normalized by the total weight actually used.
pub fn ball_average(u: &ScalarField, x: Complex64, r: f64) -> Result<f64> {
    if !(r > 0.0) {
        return Err(Error::InvalidArgument("ball_average needs r > 0".into()));
    }
    let grid = u.grid();
    let h = grid.spacing();
    const SUB: usize = 32;
    let half_diag = h * std::f64::consts::FRAC_1_SQRT_2;
    let reach = ((r + h) / h).ceil() as i64;
    let (ci, cj) = ((x.re / h).round() as i64, (x.im / h).round() as i64);
    let mut acc = 0.0;
    let mut weight = 0.0;
    for a in (ci - reach)..=(ci + reach) {
        for b in (cj - reach)..=(cj + reach) {
            let z = Complex64::new(a as f64 * h, b as f64 * h);
            let d = (z - x).norm();
            if d > r + half_diag {
                continue;
            }
            let p = grid
                .from_lattice(a, b)
                .ok_or(Error::OutsideRegion { x: (z.re, z.im) })?;
            let v = u.at(p);
            if d <= r - half_diag && v.is_finite() {
                acc += v * h * h;
                weight += h * h;
                continue;
            }
            if v == f64::NEG_INFINITY && u.evaluator().is_none() {
                continue;
            }
            let dh = h / SUB as f64;
            for s in 0..SUB {
                for t in 0..SUB {
                    let w = z + Complex64::new(
                        -0.5 * h + (s as f64 + 0.5) * dh,
                        -0.5 * h + (t as f64 + 0.5) * dh,
                    );
                    if (w - x).norm() <= r {
                        acc += u.eval(w)? * dh * dh;
                        weight += dh * dh;
                    }
                }
            }
        }
    }
    if weight == 0.0 {
        return Err(Error::OutsideRegion { x: (x.re, x.im) });
    }
    Ok(acc / weight)
}
