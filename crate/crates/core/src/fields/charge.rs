//! Signed measures made of point atoms and per-cell masses.

use std::sync::Arc;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use super::grid::GridDomain;
use super::scalar::ScalarField;
use crate::error::{Error, Result};

/// Point mass.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Atom {
    pub point: Complex64,
    pub mass: f64,
}

/// Signed measure: atoms plus masses attached to the cells of a lattice.
///
/// Cell `p` is the square of side `h` centred at node `p`; its mass is
/// treated as sitting at the node.
#[derive(Debug, Clone, Default)]
pub struct RieszCharge {
    atoms: Vec<Atom>,
    grid: Option<Arc<GridDomain>>,
    cells: Vec<f64>,
}

impl RieszCharge {
    pub fn zero() -> Self {
        Self::default()
    }

    pub fn from_atoms(atoms: Vec<Atom>) -> Self {
        Self {
            atoms,
            grid: None,
            cells: Vec::new(),
        }
    }

    pub fn from_cells(grid: Arc<GridDomain>, cells: Vec<f64>) -> Result<Self> {
        if cells.len() != grid.len() {
            return Err(Error::InvalidArgument("cell vector does not match the grid".into()));
        }
        Ok(Self {
            atoms: Vec::new(),
            grid: Some(grid),
            cells,
        })
    }

    pub fn with_atoms(mut self, atoms: Vec<Atom>) -> Self {
        self.atoms.extend(atoms);
        self
    }

    pub fn atoms(&self) -> &[Atom] {
        &self.atoms
    }

    pub fn grid(&self) -> Option<&Arc<GridDomain>> {
        self.grid.as_ref()
    }

    /// Per-node cell masses (empty when the charge has no cell part).
    pub fn cells(&self) -> &[f64] {
        &self.cells
    }

    pub fn cells_mut(&mut self) -> &mut [f64] {
        &mut self.cells
    }

    /// Non-zero cell masses as `(point, mass)`.
    pub fn cell_masses(&self) -> impl Iterator<Item = (usize, Complex64, f64)> + '_ {
        let grid = self.grid.as_ref();
        self.cells
            .iter()
            .enumerate()
            .filter(|(_, &m)| m != 0.0)
            .map(move |(p, &m)| (p, grid.map(|g| g.point_flat(p)).unwrap_or_default(), m))
    }

    /// Every mass as `(point, mass)`, atoms first.
    pub fn point_masses(&self) -> Vec<(Complex64, f64)> {
        self.atoms
            .iter()
            .map(|a| (a.point, a.mass))
            .chain(self.cell_masses().map(|(_, z, m)| (z, m)))
            .collect()
    }

    pub fn total(&self) -> f64 {
        self.atoms.iter().map(|a| a.mass).sum::<f64>() + self.cells.iter().sum::<f64>()
    }

    pub fn total_variation(&self) -> f64 {
        self.atoms.iter().map(|a| a.mass.abs()).sum::<f64>()
            + self.cells.iter().map(|m| m.abs()).sum::<f64>()
    }

    pub fn is_positive(&self) -> bool {
        self.atoms.iter().all(|a| a.mass >= 0.0) && self.cells.iter().all(|&m| m >= 0.0)
    }

    /// Mass of the closed ball `B(x, r)`.
    pub fn ball_mass(&self, x: Complex64, r: f64) -> f64 {
        self.mass_where(|z| (z - x).norm() <= r)
    }

    /// Mass of the set `{ z : keep(z) }`.
    pub fn mass_where(&self, keep: impl Fn(Complex64) -> bool) -> f64 {
        let a: f64 = self.atoms.iter().filter(|a| keep(a.point)).map(|a| a.mass).sum();
        let c: f64 = self.cell_masses().filter(|(_, z, _)| keep(*z)).map(|(_, _, m)| m).sum();
        a + c
    }

    /// `|ν|` as a positive charge.
    pub fn abs(&self) -> RieszCharge {
        let (p, n) = hahn_jordan(self);
        p.add(&n).expect("parts share a grid")
    }

    pub fn scale(&self, k: f64) -> RieszCharge {
        RieszCharge {
            atoms: self.atoms.iter().map(|a| Atom { point: a.point, mass: k * a.mass }).collect(),
            grid: self.grid.clone(),
            cells: self.cells.iter().map(|m| k * m).collect(),
        }
    }

    /// Sum of two charges; coincident atoms (closer than `1e-12`) are merged.
    pub fn add(&self, other: &RieszCharge) -> Result<RieszCharge> {
        let grid = match (&self.grid, &other.grid) {
            (Some(a), Some(b)) if !(Arc::ptr_eq(a, b) || a.same_lattice(b)) => {
                return Err(Error::GridMismatch("charges live on different lattices".into()))
            }
            (Some(a), _) => Some(a.clone()),
            (None, b) => b.clone(),
        };
        let cells = match (self.cells.is_empty(), other.cells.is_empty()) {
            (true, true) => Vec::new(),
            (false, true) => self.cells.clone(),
            (true, false) => other.cells.clone(),
            (false, false) => self.cells.iter().zip(&other.cells).map(|(a, b)| a + b).collect(),
        };
        let mut atoms = self.atoms.clone();
        for b in &other.atoms {
            match atoms.iter_mut().find(|a| (a.point - b.point).norm() < 1e-12) {
                Some(a) => a.mass += b.mass,
                None => atoms.push(*b),
            }
        }
        atoms.retain(|a| a.mass != 0.0);
        Ok(RieszCharge { atoms, grid, cells })
    }

    pub fn sub(&self, other: &RieszCharge) -> Result<RieszCharge> {
        self.add(&other.scale(-1.0))
    }

    /// `∫ f dν` for a pointwise function.
    pub fn integrate(&self, f: impl Fn(Complex64) -> f64) -> f64 {
        self.integrate_where(f, |_| true)
    }

    /// `∫_E f dν` with `E = { z : keep(z) }`; masses on which `f` is zero
    /// never contribute, even where `f` would be infinite elsewhere.
    pub fn integrate_where(&self, f: impl Fn(Complex64) -> f64, keep: impl Fn(Complex64) -> bool) -> f64 {
        let mut acc = 0.0;
        for (z, m) in self.point_masses() {
            if m != 0.0 && keep(z) {
                acc += m * f(z);
            }
        }
        acc
    }

    /// `∫_E v dν` for a field on the same lattice as the cell part; cells use
    /// node values, atoms use [`ScalarField::eval`].
    pub fn integrate_field(&self, v: &ScalarField, keep: impl Fn(Complex64) -> bool) -> Result<f64> {
        let mut acc = 0.0;
        for a in &self.atoms {
            if a.mass != 0.0 && keep(a.point) {
                acc += a.mass * v.eval(a.point)?;
            }
        }
        if let Some(g) = &self.grid {
            if !g.same_lattice(v.grid()) {
                return Err(Error::GridMismatch("field and charge lattices differ".into()));
            }
            for (p, z, m) in self.cell_masses() {
                if !keep(z) {
                    continue;
                }
                let val = v.at(p);
                if val.is_nan() {
                    return Err(Error::OutsideRegion { x: (z.re, z.im) });
                }
                acc += m * val;
            }
        }
        Ok(acc)
    }

    /// Drops every mass outside `{ z : keep(z) }`.
    pub fn restrict(&self, keep: impl Fn(Complex64) -> bool) -> RieszCharge {
        let mut out = self.clone();
        out.atoms.retain(|a| keep(a.point));
        if let Some(g) = &self.grid {
            for (p, m) in out.cells.iter_mut().enumerate() {
                if !keep(g.point_flat(p)) {
                    *m = 0.0;
                }
            }
        }
        out
    }

    pub fn to_json(&self) -> ChargeJson {
        ChargeJson {
            atoms: self.atoms.clone(),
            cells: self
                .cell_masses()
                .map(|(p, _, m)| {
                    let g = self.grid.as_ref().expect("cells imply a grid");
                    let (i, j) = g.unflat(p);
                    (i, j, m)
                })
                .collect(),
            grid: self.grid.as_deref().cloned(),
        }
    }
}

/// JSON form of a charge: atom list and sparse `(i, j, mass)` cells.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ChargeJson {
    pub atoms: Vec<Atom>,
    pub cells: Vec<(usize, usize, f64)>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub grid: Option<GridDomain>,
}

impl TryFrom<ChargeJson> for RieszCharge {
    type Error = Error;
    fn try_from(j: ChargeJson) -> Result<Self> {
        let mut c = RieszCharge::from_atoms(j.atoms);
        if let Some(g) = j.grid {
            let g = Arc::new(g);
            let mut cells = vec![0.0; g.len()];
            for (i, k, m) in j.cells {
                if i >= g.nx() || k >= g.ny() {
                    return Err(Error::InvalidArgument("cell index out of range".into()));
                }
                cells[g.flat(i, k)] = m;
            }
            c.grid = Some(g);
            c.cells = cells;
        } else if !j.cells.is_empty() {
            return Err(Error::InvalidArgument("cells given without a grid".into()));
        }
        Ok(c)
    }
}

/// Hahn–Jordan decomposition `ν = ν⁺ − ν⁻`.
///
/// Each atom and each cell goes to exactly one part.
pub fn hahn_jordan(c: &RieszCharge) -> (RieszCharge, RieszCharge) {
    let split = |sign: f64| RieszCharge {
        atoms: c
            .atoms
            .iter()
            .filter(|a| sign * a.mass > 0.0)
            .map(|a| Atom { point: a.point, mass: sign * a.mass })
            .collect(),
        grid: c.grid.clone(),
        cells: c.cells.iter().map(|&m| (sign * m).max(0.0)).collect(),
    };
    (split(1.0), split(-1.0))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fields::Shape;
    use proptest::prelude::*;

    fn grid() -> Arc<GridDomain> {
        Arc::new(GridDomain::new(Shape::unit_disk(), 0.125).unwrap())
    }

    #[test]
    fn atom_parts() {
        let a = Complex64::new(0.1, 0.0);
        let b = Complex64::new(-0.3, 0.2);
        let c = RieszCharge::from_atoms(vec![Atom { point: a, mass: 1.0 }, Atom { point: b, mass: -1.0 }]);
        let (p, n) = hahn_jordan(&c);
        assert_eq!(p.atoms(), &[Atom { point: a, mass: 1.0 }]);
        assert_eq!(n.atoms(), &[Atom { point: b, mass: 1.0 }]);
        assert_eq!(c.ball_mass(a, 1e-3), 1.0);
        assert_eq!(RieszCharge::zero().ball_mass(a, 1.0), 0.0);
    }

    #[test]
    fn positive_charge_is_its_own_positive_part() {
        let g = grid();
        let cells = (0..g.len()).map(|p| if g.is_inside(p) { 0.01 } else { 0.0 }).collect();
        let c = RieszCharge::from_cells(g, cells).unwrap();
        let (p, n) = hahn_jordan(&c);
        assert_eq!(p.cells(), c.cells());
        assert_eq!(n.total_variation(), 0.0);
    }

    #[test]
    fn uniform_density_quarter_ball() {
        let g = Arc::new(GridDomain::new(Shape::unit_disk(), 1.0 / 128.0).unwrap());
        let cells: Vec<f64> = (0..g.len()).map(|p| if g.is_inside(p) { 1.0 } else { 0.0 }).collect();
        let c = RieszCharge::from_cells(g, cells).unwrap();
        let ratio = c.ball_mass(Complex64::new(0.0, 0.0), 0.5) / c.total();
        assert!((ratio - 0.25).abs() <= 0.03 * 0.25, "{ratio}");
    }

    #[test]
    fn json_round_trip() {
        let g = grid();
        let mut cells = vec![0.0; g.len()];
        cells[g.nearest(Complex64::new(0.25, 0.125)).unwrap()] = 0.5;
        let c = RieszCharge::from_cells(g, cells)
            .unwrap()
            .with_atoms(vec![Atom { point: Complex64::new(0.0, 0.1), mass: 2.0 }]);
        let s = serde_json::to_string(&c.to_json()).unwrap();
        let back = RieszCharge::try_from(serde_json::from_str::<ChargeJson>(&s).unwrap()).unwrap();
        assert_eq!(back.cells(), c.cells());
        assert_eq!(back.atoms(), c.atoms());
    }

    proptest! {
        #[test]
        fn hahn_jordan_parts_are_singular_and_exact(
            masses in proptest::collection::vec(-1.0f64..1.0, 1..64),
            atom_masses in proptest::collection::vec(-2.0f64..2.0, 0..5),
        ) {
            let g = grid();
            let mut cells = vec![0.0; g.len()];
            for (k, m) in masses.iter().enumerate() {
                cells[k * 3] = *m;
            }
            let atoms = atom_masses
                .iter()
                .enumerate()
                .map(|(k, &m)| Atom { point: Complex64::new(0.1 * k as f64, 0.0), mass: m })
                .collect();
            let c = RieszCharge::from_cells(g, cells).unwrap().with_atoms(atoms);
            let (p, n) = hahn_jordan(&c);
            for ((a, b), m) in p.cells().iter().zip(n.cells()).zip(c.cells()) {
                prop_assert!(*a >= 0.0 && *b >= 0.0);
                prop_assert!(*a == 0.0 || *b == 0.0);
                prop_assert_eq!(a - b, *m);
            }
            prop_assert!((p.total_variation() + n.total_variation() - c.total_variation()).abs() < 1e-12);
            prop_assert!((p.total() - n.total() - c.total()).abs() < 1e-12);
        }

        #[test]
        fn ball_mass_monotone_for_positive(r1 in 0.01f64..1.0, dr in 0.0f64..0.5) {
            let g = grid();
            let cells = (0..g.len()).map(|p| if g.is_inside(p) { 0.3 } else { 0.0 }).collect();
            let c = RieszCharge::from_cells(g, cells).unwrap()
                .with_atoms(vec![Atom { point: Complex64::new(0.2, 0.1), mass: 1.0 }]);
            let x = Complex64::new(0.05, -0.1);
            prop_assert!(c.ball_mass(x, r1) <= c.ball_mass(x, r1 + dr));
        }
    }
}
