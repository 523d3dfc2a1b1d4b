//! Lattice discretization of planar domains.
//!
//! Every grid lives on the global lattice `h·Z²` anchored at the origin, so two
//! grids with the same spacing always share nodes and fields can be moved
//! between them node for node.

use std::collections::VecDeque;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Neighbour directions in the order east, west, north, south.
pub const DIRECTIONS: [(i64, i64); 4] = [(1, 0), (-1, 0), (0, 1), (0, -1)];

/// Index of the opposite direction in [`DIRECTIONS`].
pub const fn opposite(e: usize) -> usize {
    e ^ 1
}

/// Open planar region with a boundary that can be tested pointwise.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Shape {
    Disk {
        center: Complex64,
        radius: f64,
    },
    Annulus {
        center: Complex64,
        inner: f64,
        outer: f64,
    },
    Rectangle {
        x_min: f64,
        x_max: f64,
        y_min: f64,
        y_max: f64,
    },
}

impl Shape {
    pub fn unit_disk() -> Self {
        Shape::Disk {
            center: Complex64::new(0.0, 0.0),
            radius: 1.0,
        }
    }

    pub fn validate(&self) -> Result<()> {
        let ok = match *self {
            Shape::Disk { radius, center } => radius > 0.0 && radius.is_finite() && center.is_finite(),
            Shape::Annulus { inner, outer, center } => {
                inner > 0.0 && outer > inner && outer.is_finite() && center.is_finite()
            }
            Shape::Rectangle { x_min, x_max, y_min, y_max } => {
                x_max > x_min && y_max > y_min && x_min.is_finite() && y_max.is_finite()
                    && x_max.is_finite() && y_min.is_finite()
            }
        };
        if ok {
            Ok(())
        } else {
            Err(Error::Geometry(format!("degenerate shape {self:?}")))
        }
    }

    /// Strict membership in the open set.
    pub fn contains(&self, z: Complex64) -> bool {
        match *self {
            Shape::Disk { center, radius } => (z - center).norm() < radius,
            Shape::Annulus { center, inner, outer } => {
                let r = (z - center).norm();
                r > inner && r < outer
            }
            Shape::Rectangle { x_min, x_max, y_min, y_max } => {
                z.re > x_min && z.re < x_max && z.im > y_min && z.im < y_max
            }
        }
    }

    /// Membership in the closure enlarged by `tol`.
    pub fn contains_closed(&self, z: Complex64, tol: f64) -> bool {
        match *self {
            Shape::Disk { center, radius } => (z - center).norm() <= radius + tol,
            Shape::Annulus { center, inner, outer } => {
                let r = (z - center).norm();
                r >= inner - tol && r <= outer + tol
            }
            Shape::Rectangle { x_min, x_max, y_min, y_max } => {
                z.re >= x_min - tol && z.re <= x_max + tol && z.im >= y_min - tol && z.im <= y_max + tol
            }
        }
    }

    /// Distance from an interior point to the boundary (0 outside).
    pub fn boundary_distance(&self, z: Complex64) -> f64 {
        if !self.contains(z) {
            return 0.0;
        }
        match *self {
            Shape::Disk { center, radius } => radius - (z - center).norm(),
            Shape::Annulus { center, inner, outer } => {
                let r = (z - center).norm();
                (r - inner).min(outer - r)
            }
            Shape::Rectangle { x_min, x_max, y_min, y_max } => (z.re - x_min)
                .min(x_max - z.re)
                .min(z.im - y_min)
                .min(y_max - z.im),
        }
    }

    /// Bounding box `(x_min, x_max, y_min, y_max)` of the closure.
    pub fn bounds(&self) -> (f64, f64, f64, f64) {
        match *self {
            Shape::Disk { center, radius } | Shape::Annulus { center, outer: radius, .. } => (
                center.re - radius,
                center.re + radius,
                center.im - radius,
                center.im + radius,
            ),
            Shape::Rectangle { x_min, x_max, y_min, y_max } => (x_min, x_max, y_min, y_max),
        }
    }

    /// Points sampled along the boundary, `n` per boundary component.
    pub fn boundary_samples(&self, n: usize) -> Vec<Complex64> {
        let circle = |c: Complex64, r: f64| {
            (0..n).map(move |k| c + Complex64::from_polar(r, std::f64::consts::TAU * k as f64 / n as f64))
        };
        match *self {
            Shape::Disk { center, radius } => circle(center, radius).collect(),
            Shape::Annulus { center, inner, outer } => {
                circle(center, inner).chain(circle(center, outer)).collect()
            }
            Shape::Rectangle { x_min, x_max, y_min, y_max } => {
                let per_side = n.div_ceil(4).max(1);
                let mut out = Vec::with_capacity(4 * per_side);
                for k in 0..per_side {
                    let t = k as f64 / per_side as f64;
                    out.push(Complex64::new(x_min + t * (x_max - x_min), y_min));
                    out.push(Complex64::new(x_max, y_min + t * (y_max - y_min)));
                    out.push(Complex64::new(x_max - t * (x_max - x_min), y_max));
                    out.push(Complex64::new(x_min, y_max - t * (y_max - y_min)));
                }
                out
            }
        }
    }
}

/// Closed ball `{ z : |z - center| <= radius }`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Ball {
    pub center: Complex64,
    pub radius: f64,
}

/// Finite union of closed balls.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct ExclusionSet {
    balls: Vec<Ball>,
}

impl ExclusionSet {
    pub fn empty() -> Self {
        Self::default()
    }

    pub fn ball(center: Complex64, radius: f64) -> Self {
        Self {
            balls: vec![Ball { center, radius }],
        }
    }

    pub fn from_balls(balls: Vec<Ball>) -> Result<Self> {
        if balls.iter().any(|b| !(b.radius > 0.0) || !b.center.is_finite()) {
            return Err(Error::Geometry("exclusion balls need positive radius".into()));
        }
        Ok(Self { balls })
    }

    pub fn balls(&self) -> &[Ball] {
        &self.balls
    }

    pub fn is_empty(&self) -> bool {
        self.balls.is_empty()
    }

    pub fn contains(&self, z: Complex64) -> bool {
        self.balls.iter().any(|b| (z - b.center).norm() <= b.radius)
    }

    /// Interior of the union (as far as the ball-wise test sees it).
    pub fn contains_interior(&self, z: Complex64) -> bool {
        self.balls.iter().any(|b| (z - b.center).norm() < b.radius)
    }

    /// `n` points per ball circle, keeping only points on the boundary of the
    /// union.
    pub fn boundary_samples(&self, n: usize) -> Vec<Complex64> {
        let mut out = Vec::new();
        for (k, b) in self.balls.iter().enumerate() {
            for s in 0..n {
                let z = b.center
                    + Complex64::from_polar(b.radius, std::f64::consts::TAU * s as f64 / n as f64);
                let covered = self
                    .balls
                    .iter()
                    .enumerate()
                    .any(|(l, o)| l != k && (z - o.center).norm() < o.radius);
                if !covered {
                    out.push(z);
                }
            }
        }
        out
    }

    /// Largest distance from `c` to a point of the set.
    pub fn extent_from(&self, c: Complex64) -> f64 {
        self.balls
            .iter()
            .map(|b| (b.center - c).norm() + b.radius)
            .fold(0.0, f64::max)
    }
}

/// Parameters that fully determine a [`GridDomain`]; this is its JSON form.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GridSpec {
    pub shape: Shape,
    pub spacing: f64,
    #[serde(default = "default_padding")]
    pub padding: usize,
    #[serde(default)]
    pub exclusion: ExclusionSet,
}

fn default_padding() -> usize {
    3
}

/// Discretized planar domain `D` with an optional exclusion set `S ⋐ D`.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(try_from = "GridSpec", into = "GridSpec")]
pub struct GridDomain {
    spec: GridSpec,
    /// Lattice coordinates of node `(0, 0)`.
    origin: (i64, i64),
    nx: usize,
    ny: usize,
    inside: Vec<bool>,
    excluded: Vec<bool>,
    /// BFS distance to the exterior for inside nodes, 0 outside.
    collar: Vec<u32>,
    /// Shortley–Weller arm fractions for inside nodes, 1 where the neighbour
    /// is inside.
    arms: Vec<[f64; 4]>,
}

impl PartialEq for GridDomain {
    fn eq(&self, other: &Self) -> bool {
        self.spec == other.spec
    }
}

impl TryFrom<GridSpec> for GridDomain {
    type Error = Error;
    fn try_from(spec: GridSpec) -> Result<Self> {
        GridDomain::from_spec(spec)
    }
}

impl From<GridDomain> for GridSpec {
    fn from(g: GridDomain) -> GridSpec {
        g.spec
    }
}

impl GridDomain {
    pub fn new(shape: Shape, spacing: f64) -> Result<Self> {
        Self::from_spec(GridSpec {
            shape,
            spacing,
            padding: default_padding(),
            exclusion: ExclusionSet::empty(),
        })
    }

    pub fn with_exclusion(shape: Shape, spacing: f64, exclusion: ExclusionSet) -> Result<Self> {
        Self::from_spec(GridSpec {
            shape,
            spacing,
            padding: default_padding(),
            exclusion,
        })
    }

    pub fn from_spec(spec: GridSpec) -> Result<Self> {
        spec.shape.validate()?;
        let h = spec.spacing;
        if !(h > 0.0 && h.is_finite()) {
            return Err(Error::InvalidArgument(format!("grid spacing must be positive, got {h}")));
        }
        if spec.padding < 2 {
            return Err(Error::InvalidArgument("at least two ghost layers are required".into()));
        }
        let (x0, x1, y0, y1) = spec.shape.bounds();
        let pad = spec.padding as i64;
        let i_min = (x0 / h).floor() as i64 - pad;
        let i_max = (x1 / h).ceil() as i64 + pad;
        let j_min = (y0 / h).floor() as i64 - pad;
        let j_max = (y1 / h).ceil() as i64 + pad;
        let nx = (i_max - i_min + 1) as usize;
        let ny = (j_max - j_min + 1) as usize;
        if nx.saturating_mul(ny) > 50_000_000 {
            return Err(Error::InvalidArgument("grid too large".into()));
        }
        let point = |i: usize, j: usize| {
            Complex64::new((i_min + i as i64) as f64 * h, (j_min + j as i64) as f64 * h)
        };
        let mut inside = vec![false; nx * ny];
        let mut excluded = vec![false; nx * ny];
        for j in 0..ny {
            for i in 0..nx {
                let z = point(i, j);
                inside[j * nx + i] = spec.shape.contains(z);
                excluded[j * nx + i] = spec.exclusion.contains(z);
            }
        }
        let n_inside = inside.iter().filter(|&&b| b).count();
        if n_inside < 9 {
            return Err(Error::RegionTooSmall);
        }

        // S must be compactly inside D.
        for b in spec.exclusion.balls() {
            let clear = b.radius.max(0.0) + h;
            let ok = spec.shape.boundary_distance(b.center) > clear
                && (0..256).all(|k| {
                    let z = b.center
                        + Complex64::from_polar(b.radius, std::f64::consts::TAU * k as f64 / 256.0);
                    spec.shape.boundary_distance(z) > h
                });
            if !ok {
                return Err(Error::Geometry(format!(
                    "exclusion ball {b:?} is not compactly inside the domain"
                )));
            }
        }

        let mut grid = GridDomain {
            spec,
            origin: (i_min, j_min),
            nx,
            ny,
            inside,
            excluded,
            collar: vec![0; nx * ny],
            arms: vec![[1.0; 4]; nx * ny],
        };
        grid.check_connected()?;
        grid.compute_collars();
        grid.compute_arms();
        Ok(grid)
    }

    fn check_connected(&self) -> Result<()> {
        let start = match self.inside.iter().position(|&b| b) {
            Some(s) => s,
            None => return Err(Error::RegionTooSmall),
        };
        let mut seen = vec![false; self.inside.len()];
        let mut queue = VecDeque::from([start]);
        seen[start] = true;
        let mut count = 1usize;
        while let Some(p) = queue.pop_front() {
            for q in self.neighbours(p).into_iter().flatten() {
                if self.inside[q] && !seen[q] {
                    seen[q] = true;
                    count += 1;
                    queue.push_back(q);
                }
            }
        }
        if count == self.inside.iter().filter(|&&b| b).count() {
            Ok(())
        } else {
            Err(Error::Geometry("interior mask is not connected at this spacing".into()))
        }
    }

    fn compute_collars(&mut self) {
        let mut queue = VecDeque::new();
        for p in 0..self.inside.len() {
            if self.inside[p]
                && self
                    .neighbours(p)
                    .iter()
                    .any(|q| q.is_none_or(|q| !self.inside[q]))
            {
                self.collar[p] = 1;
                queue.push_back(p);
            }
        }
        while let Some(p) = queue.pop_front() {
            let next = self.collar[p] + 1;
            for q in self.neighbours(p).into_iter().flatten() {
                if self.inside[q] && self.collar[q] == 0 {
                    self.collar[q] = next;
                    queue.push_back(q);
                }
            }
        }
    }

    fn compute_arms(&mut self) {
        let h = self.spec.spacing;
        let shape = self.spec.shape;
        for p in 0..self.inside.len() {
            if !self.inside[p] {
                continue;
            }
            let z = self.point_flat(p);
            for (e, &(di, dj)) in DIRECTIONS.iter().enumerate() {
                let step = Complex64::new(di as f64, dj as f64) * h;
                if shape.contains(z + step) {
                    continue;
                }
                // Bisection for the first crossing along the segment.
                let (mut lo, mut hi) = (0.0f64, 1.0f64);
                for _ in 0..60 {
                    let mid = 0.5 * (lo + hi);
                    if shape.contains(z + step * mid) {
                        lo = mid;
                    } else {
                        hi = mid;
                    }
                }
                self.arms[p][e] = hi.max(1e-6);
            }
        }
    }

    pub fn spec(&self) -> &GridSpec {
        &self.spec
    }

    pub fn shape(&self) -> &Shape {
        &self.spec.shape
    }

    pub fn spacing(&self) -> f64 {
        self.spec.spacing
    }

    pub fn exclusion(&self) -> &ExclusionSet {
        &self.spec.exclusion
    }

    pub fn nx(&self) -> usize {
        self.nx
    }

    pub fn ny(&self) -> usize {
        self.ny
    }

    pub fn len(&self) -> usize {
        self.nx * self.ny
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn origin(&self) -> (i64, i64) {
        self.origin
    }

    pub fn flat(&self, i: usize, j: usize) -> usize {
        j * self.nx + i
    }

    pub fn unflat(&self, p: usize) -> (usize, usize) {
        (p % self.nx, p / self.nx)
    }

    pub fn point(&self, i: usize, j: usize) -> Complex64 {
        let h = self.spec.spacing;
        Complex64::new(
            (self.origin.0 + i as i64) as f64 * h,
            (self.origin.1 + j as i64) as f64 * h,
        )
    }

    pub fn point_flat(&self, p: usize) -> Complex64 {
        let (i, j) = self.unflat(p);
        self.point(i, j)
    }

    /// Global lattice coordinates of a node.
    pub fn lattice(&self, p: usize) -> (i64, i64) {
        let (i, j) = self.unflat(p);
        (self.origin.0 + i as i64, self.origin.1 + j as i64)
    }

    /// Flat index of the node with global lattice coordinates `(a, b)`.
    pub fn from_lattice(&self, a: i64, b: i64) -> Option<usize> {
        let i = a - self.origin.0;
        let j = b - self.origin.1;
        if i < 0 || j < 0 || i >= self.nx as i64 || j >= self.ny as i64 {
            None
        } else {
            Some(self.flat(i as usize, j as usize))
        }
    }

    /// Node closest to `z`, if `z` lies in the bounding box.
    pub fn nearest(&self, z: Complex64) -> Option<usize> {
        let h = self.spec.spacing;
        self.from_lattice((z.re / h).round() as i64, (z.im / h).round() as i64)
    }

    /// All node indices `(i, j)` in row-major order.
    pub fn nodes(&self) -> impl Iterator<Item = (usize, usize)> + '_ {
        (0..self.ny).flat_map(move |j| (0..self.nx).map(move |i| (i, j)))
    }

    /// The four neighbours of a node (east, west, north, south).
    pub fn neighbours(&self, p: usize) -> [Option<usize>; 4] {
        let (i, j) = self.unflat(p);
        let (i, j) = (i as i64, j as i64);
        DIRECTIONS.map(|(di, dj)| {
            let (a, b) = (i + di, j + dj);
            if a < 0 || b < 0 || a >= self.nx as i64 || b >= self.ny as i64 {
                None
            } else {
                Some(b as usize * self.nx + a as usize)
            }
        })
    }

    pub fn is_inside(&self, p: usize) -> bool {
        self.inside[p]
    }

    pub fn inside_mask(&self) -> &[bool] {
        &self.inside
    }

    pub fn is_excluded(&self, p: usize) -> bool {
        self.excluded[p]
    }

    /// Node of `D \ S`.
    pub fn is_free(&self, p: usize) -> bool {
        self.inside[p] && !self.excluded[p]
    }

    /// Collar index: 1 for inside nodes touching the exterior, 0 outside.
    pub fn collar(&self, p: usize) -> u32 {
        self.collar[p]
    }

    pub fn max_collar(&self) -> u32 {
        self.collar.iter().copied().max().unwrap_or(0)
    }

    /// Nodes of collar `k`.
    pub fn collar_nodes(&self, k: u32) -> Vec<usize> {
        (0..self.len()).filter(|&p| self.collar[p] == k).collect()
    }

    /// Shortley–Weller arm fractions of an inside node.
    pub fn arms(&self, p: usize) -> [f64; 4] {
        self.arms[p]
    }

    /// Boundary point reached along arm `e` of inside node `p`, if that arm
    /// leaves the domain.
    pub fn arm_boundary_point(&self, p: usize, e: usize) -> Option<Complex64> {
        let nb = self.neighbours(p)[e];
        if !self.inside[p] || nb.is_some_and(|q| self.inside[q]) {
            return None;
        }
        let (di, dj) = DIRECTIONS[e];
        Some(self.point_flat(p) + Complex64::new(di as f64, dj as f64) * (self.arms[p][e] * self.spec.spacing))
    }

    /// Whether `z` lies in the bounding box of the lattice.
    pub fn in_bounds(&self, z: Complex64) -> bool {
        let lo = self.point(0, 0);
        let hi = self.point(self.nx - 1, self.ny - 1);
        z.re >= lo.re && z.re <= hi.re && z.im >= lo.im && z.im <= hi.im
    }

    /// Same lattice and same bounding box.
    pub fn same_lattice(&self, other: &GridDomain) -> bool {
        self.spec.spacing == other.spec.spacing
            && self.origin == other.origin
            && self.nx == other.nx
            && self.ny == other.ny
    }
}
