//! Grid-sampled extended-real functions.

use std::fmt;
use std::sync::Arc;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use super::grid::GridDomain;
use crate::error::{Error, Result};

/// Pointwise evaluator attached to a field whose closed form is known.
///
/// Returns `NaN` where the function is undefined.
pub type Evaluator = Arc<dyn Fn(Complex64) -> f64 + Send + Sync>;

/// Extended-real function sampled at every node of a [`GridDomain`] lattice.
///
/// `NaN` marks nodes where the function is undefined; `±∞` are markers, the
/// `−∞` markers being the `(−∞)`-set of a subharmonic function.
#[derive(Clone)]
pub struct ScalarField {
    grid: Arc<GridDomain>,
    values: Vec<f64>,
    exact: Option<Evaluator>,
}

impl fmt::Debug for ScalarField {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("ScalarField")
            .field("spacing", &self.grid.spacing())
            .field("nodes", &self.values.len())
            .field("exact", &self.exact.is_some())
            .finish()
    }
}

impl ScalarField {
    pub fn from_values(grid: Arc<GridDomain>, values: Vec<f64>) -> Result<Self> {
        if values.len() != grid.len() {
            return Err(Error::InvalidArgument(format!(
                "expected {} values, got {}",
                grid.len(),
                values.len()
            )));
        }
        Ok(Self {
            grid,
            values,
            exact: None,
        })
    }

    /// Samples `f` at every node and keeps it as the exact evaluator.
    pub fn from_fn<F>(grid: Arc<GridDomain>, f: F) -> Self
    where
        F: Fn(Complex64) -> f64 + Send + Sync + 'static,
    {
        let values = (0..grid.len()).map(|p| f(grid.point_flat(p))).collect();
        Self {
            grid,
            values,
            exact: Some(Arc::new(f)),
        }
    }

    /// Like [`ScalarField::from_fn`], undefined outside the domain's closure
    /// of inside nodes.
    pub fn from_fn_inside<F>(grid: Arc<GridDomain>, f: F) -> Self
    where
        F: Fn(Complex64) -> f64 + Send + Sync + 'static,
    {
        let shape = *grid.shape();
        let values = (0..grid.len())
            .map(|p| if grid.is_inside(p) { f(grid.point_flat(p)) } else { f64::NAN })
            .collect();
        Self {
            grid,
            values,
            exact: Some(Arc::new(move |z| if shape.contains(z) { f(z) } else { f64::NAN })),
        }
    }

    pub fn constant(grid: Arc<GridDomain>, c: f64) -> Self {
        Self::from_fn(grid, move |_| c)
    }

    pub fn zeros(grid: Arc<GridDomain>) -> Self {
        Self::constant(grid, 0.0)
    }

    pub fn with_evaluator(mut self, exact: Option<Evaluator>) -> Self {
        self.exact = exact;
        self
    }

    pub fn evaluator(&self) -> Option<&Evaluator> {
        self.exact.as_ref()
    }

    pub fn grid(&self) -> &GridDomain {
        &self.grid
    }

    pub fn grid_arc(&self) -> &Arc<GridDomain> {
        &self.grid
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn value(&self, i: usize, j: usize) -> f64 {
        self.values[self.grid.flat(i, j)]
    }

    pub fn at(&self, p: usize) -> f64 {
        self.values[p]
    }

    pub fn is_defined(&self, p: usize) -> bool {
        !self.values[p].is_nan()
    }

    pub fn neg_inf_markers(&self) -> Vec<usize> {
        (0..self.values.len())
            .filter(|&p| self.values[p] == f64::NEG_INFINITY)
            .collect()
    }

    pub fn pos_inf_markers(&self) -> Vec<usize> {
        (0..self.values.len())
            .filter(|&p| self.values[p] == f64::INFINITY)
            .collect()
    }

    /// Value at an arbitrary point.
    ///
    /// Uses the exact evaluator when present, otherwise bilinear
    /// interpolation renormalized over the defined corners.
    pub fn eval(&self, z: Complex64) -> Result<f64> {
        let outside = || Error::OutsideRegion { x: (z.re, z.im) };
        if let Some(f) = &self.exact {
            let v = f(z);
            return if v.is_nan() { Err(outside()) } else { Ok(v) };
        }
        self.interpolate(z).ok_or_else(outside)
    }

    /// Bilinear interpolation of the node values only.
    pub fn interpolate(&self, z: Complex64) -> Option<f64> {
        let h = self.grid.spacing();
        let (a, b) = ((z.re / h).floor(), (z.im / h).floor());
        let (tx, ty) = (z.re / h - a, z.im / h - b);
        let (a, b) = (a as i64, b as i64);
        let corners = [
            (a, b, (1.0 - tx) * (1.0 - ty)),
            (a + 1, b, tx * (1.0 - ty)),
            (a, b + 1, (1.0 - tx) * ty),
            (a + 1, b + 1, tx * ty),
        ];
        let mut acc = 0.0;
        let mut wsum = 0.0;
        for (x, y, w) in corners {
            if w <= 0.0 {
                continue;
            }
            let p = self.grid.from_lattice(x, y)?;
            let v = self.values[p];
            if v.is_nan() {
                continue;
            }
            acc += w * v;
            wsum += w;
        }
        if wsum <= 1e-12 || acc.is_nan() {
            None
        } else {
            Some(acc / wsum)
        }
    }

    /// Pointwise map; the exact evaluator is mapped too.
    pub fn map<F>(&self, f: F) -> ScalarField
    where
        F: Fn(f64) -> f64 + Send + Sync + Clone + 'static,
    {
        let values = self.values.iter().map(|&v| if v.is_nan() { v } else { f(v) }).collect();
        let exact = self.exact.clone().map(|e| {
            Arc::new(move |z: Complex64| {
                let v = e(z);
                if v.is_nan() {
                    v
                } else {
                    f(v)
                }
            }) as Evaluator
        });
        ScalarField {
            grid: self.grid.clone(),
            values,
            exact,
        }
    }

    /// Pointwise combination of two fields on the same lattice.
    pub fn zip_with<F>(&self, other: &ScalarField, f: F) -> Result<ScalarField>
    where
        F: Fn(f64, f64) -> f64 + Send + Sync + Clone + 'static,
    {
        self.require_same_grid(other)?;
        let values = self
            .values
            .iter()
            .zip(&other.values)
            .map(|(&a, &b)| if a.is_nan() || b.is_nan() { f64::NAN } else { f(a, b) })
            .collect();
        let exact = match (&self.exact, &other.exact) {
            (Some(e1), Some(e2)) => {
                let (e1, e2) = (e1.clone(), e2.clone());
                Some(Arc::new(move |z: Complex64| {
                    let (a, b) = (e1(z), e2(z));
                    if a.is_nan() || b.is_nan() {
                        f64::NAN
                    } else {
                        f(a, b)
                    }
                }) as Evaluator)
            }
            _ => None,
        };
        Ok(ScalarField {
            grid: self.grid.clone(),
            values,
            exact,
        })
    }

    /// `self − other`, with `−∞ − finite = −∞` and `finite − (−∞) = +∞`.
    pub fn sub(&self, other: &ScalarField) -> Result<ScalarField> {
        self.zip_with(other, |a, b| a - b)
    }

    pub fn add(&self, other: &ScalarField) -> Result<ScalarField> {
        self.zip_with(other, |a, b| a + b)
    }

    pub fn require_same_grid(&self, other: &ScalarField) -> Result<()> {
        if Arc::ptr_eq(&self.grid, &other.grid) || *self.grid == *other.grid {
            Ok(())
        } else {
            Err(Error::GridMismatch("fields live on different grids".into()))
        }
    }

    /// Copies node values onto another grid of the same spacing; nodes
    /// without a source node become undefined.
    pub fn resample_onto(&self, target: Arc<GridDomain>) -> Result<ScalarField> {
        if target.spacing() != self.grid.spacing() {
            return Err(Error::GridMismatch("spacings differ".into()));
        }
        let values = (0..target.len())
            .map(|p| {
                let (a, b) = target.lattice(p);
                self.grid.from_lattice(a, b).map_or(f64::NAN, |q| self.values[q])
            })
            .collect();
        Ok(ScalarField {
            grid: target,
            values,
            exact: self.exact.clone(),
        })
    }

    /// Values with the `−∞` markers clipped at `floor` for display.
    pub fn clipped(&self, floor: f64) -> Vec<f64> {
        self.values.iter().map(|&v| if v < floor { floor } else { v }).collect()
    }

    /// Largest finite value over the nodes selected by `keep`.
    pub fn max_over(&self, keep: impl Fn(usize) -> bool) -> f64 {
        (0..self.values.len())
            .filter(|&p| keep(p) && !self.values[p].is_nan())
            .map(|p| self.values[p])
            .fold(f64::NEG_INFINITY, f64::max)
    }

    pub fn min_over(&self, keep: impl Fn(usize) -> bool) -> f64 {
        (0..self.values.len())
            .filter(|&p| keep(p) && !self.values[p].is_nan())
            .map(|p| self.values[p])
            .fold(f64::INFINITY, f64::min)
    }

    pub fn to_json(&self) -> FieldJson {
        FieldJson::from(self)
    }
}

/// JSON form of a field: grid descriptor, row-major values with `null` for
/// undefined and infinite nodes, and the marker index lists.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FieldJson {
    pub grid: GridDomain,
    pub nx: usize,
    pub ny: usize,
    pub values: Vec<Option<f64>>,
    pub neg_inf: Vec<usize>,
    pub pos_inf: Vec<usize>,
}

impl From<&ScalarField> for FieldJson {
    fn from(f: &ScalarField) -> Self {
        FieldJson {
            grid: (*f.grid).clone(),
            nx: f.grid.nx(),
            ny: f.grid.ny(),
            values: f
                .values
                .iter()
                .map(|&v| if v.is_finite() { Some(v) } else { None })
                .collect(),
            neg_inf: f.neg_inf_markers(),
            pos_inf: f.pos_inf_markers(),
        }
    }
}

impl TryFrom<FieldJson> for ScalarField {
    type Error = Error;
    fn try_from(j: FieldJson) -> Result<Self> {
        let grid = Arc::new(j.grid);
        let mut values: Vec<f64> = j.values.into_iter().map(|v| v.unwrap_or(f64::NAN)).collect();
        for (list, mark) in [(j.neg_inf, f64::NEG_INFINITY), (j.pos_inf, f64::INFINITY)] {
            for p in list {
                let slot = values
                    .get_mut(p)
                    .ok_or_else(|| Error::InvalidArgument(format!("marker index {p} out of range")))?;
                *slot = mark;
            }
        }
        ScalarField::from_values(grid, values)
    }
}
