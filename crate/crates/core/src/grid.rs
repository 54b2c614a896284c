//! Uniform grids on a padded periodic box, domain masks and grid functions.
//!
//! A [`Grid`] covers the box `[-L, L)` along each axis with `N` points of
//! spacing `h`, `N·h = 2L`, `N` a power of two. Point `j` sits at
//! `-L + j·h`. Masks select the grid points strictly inside an open domain;
//! everything outside is implicitly zero, which is how the Dirichlet
//! condition of the restricted operators is realized.
//!
//! For two-dimensional tubes axis 0 carries the cross-section coordinate
//! `x'` and axis 1 the tube axis `z`.

use std::collections::VecDeque;
use std::sync::Arc;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Minimum number of points per axis.
pub const MIN_POINTS: usize = 8;

/// Relative slack (in units of `h`) used for the strict inside tests.
const SNAP_EPS: f64 = 1e-9;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Grid {
    dim: usize,
    spacing: f64,
    points: [usize; 2],
}

impl Grid {
    /// Grid with the given spacing and points per axis; the box half-length
    /// of each axis follows from `points·h = 2L`.
    pub fn new(spacing: f64, points: &[usize]) -> Result<Self> {
        let dim = points.len();
        if !(1..=2).contains(&dim) {
            return Err(Error::InvalidGrid(format!(
                "dimension {dim} not in {{1, 2}}"
            )));
        }
        if !(spacing.is_finite() && spacing > 0.0) {
            return Err(Error::InvalidGrid(format!(
                "spacing {spacing} must be positive"
            )));
        }
        for &n in points {
            if n < MIN_POINTS || !n.is_power_of_two() {
                return Err(Error::InvalidGrid(format!(
                    "{n} points per axis; need a power of two >= {MIN_POINTS}"
                )));
            }
        }
        let mut p = [1usize; 2];
        p[..dim].copy_from_slice(points);
        Ok(Self {
            dim,
            spacing,
            points: p,
        })
    }

    /// Smallest grid with spacing `h` whose box keeps every point with
    /// `|x_i| <= reach[i]` at least half a box half-length away from the
    /// periodic boundary, i.e. `L_i >= 2·reach_i`.
    pub fn covering(spacing: f64, reach: &[f64]) -> Result<Self> {
        if !(spacing.is_finite() && spacing > 0.0) {
            return Err(Error::InvalidGrid(format!(
                "spacing {spacing} must be positive"
            )));
        }
        let points: Vec<usize> = reach
            .iter()
            .map(|&r| {
                let needed = (4.0 * r / spacing - 1e-9).ceil().max(1.0) as usize;
                needed.next_power_of_two().max(MIN_POINTS)
            })
            .collect();
        Self::new(spacing, &points)
    }

    /// Like [`Grid::covering`] but with at least `min_half_length` per axis.
    pub fn covering_at_least(spacing: f64, reach: &[f64], min_half_length: f64) -> Result<Self> {
        let reach: Vec<f64> = reach
            .iter()
            .map(|&r| r.max(min_half_length / 2.0))
            .collect();
        Self::covering(spacing, &reach)
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn spacing(&self) -> f64 {
        self.spacing
    }

    pub fn points(&self) -> &[usize] {
        &self.points[..self.dim]
    }

    pub fn points_along(&self, axis: usize) -> usize {
        self.points[axis]
    }

    /// Half-length `L` of the periodic box along `axis`.
    pub fn half_length(&self, axis: usize) -> f64 {
        0.5 * self.points[axis] as f64 * self.spacing
    }

    /// Total number of grid points in the box.
    pub fn len(&self) -> usize {
        self.points[0] * self.points[1]
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    /// `h^n`, the measure of one cell.
    pub fn cell_volume(&self) -> f64 {
        self.spacing.powi(self.dim as i32)
    }

    pub fn coord(&self, axis: usize, index: usize) -> f64 {
        -self.half_length(axis) + index as f64 * self.spacing
    }

    /// Angular frequency `π·j/L` of DFT bin `index`, with `j` taken in
    /// `[-N/2, N/2)`.
    pub fn frequency(&self, axis: usize, index: usize) -> f64 {
        let n = self.points[axis];
        let j = if index < n / 2 {
            index as f64
        } else {
            index as f64 - n as f64
        };
        std::f64::consts::PI * j / self.half_length(axis)
    }

    /// Multi-index of a flat (row-major, axis 1 fastest) index.
    pub fn unflatten(&self, flat: usize) -> [usize; 2] {
        [flat / self.points[1], flat % self.points[1]]
    }

    pub fn flatten(&self, idx: [usize; 2]) -> usize {
        idx[0] * self.points[1] + idx[1]
    }

    /// Physical coordinates of a flat index (second entry is 0 in 1D).
    pub fn position(&self, flat: usize) -> [f64; 2] {
        let [i0, i1] = self.unflatten(flat);
        if self.dim == 1 {
            [self.coord(0, i0), 0.0]
        } else {
            [self.coord(0, i0), self.coord(1, i1)]
        }
    }

    /// Index of the grid point at coordinate `x` along `axis`, if `x` is on
    /// a grid line.
    pub fn index_of(&self, axis: usize, x: f64) -> Option<usize> {
        let t = (x + self.half_length(axis)) / self.spacing;
        let r = t.round();
        if (t - r).abs() < 1e-6 && r >= 0.0 && (r as usize) < self.points[axis] {
            Some(r as usize)
        } else {
            None
        }
    }

    /// The one-dimensional grid of axis `axis` (same spacing and points).
    pub fn axis_grid(&self, axis: usize) -> Result<Grid> {
        Grid::new(self.spacing, &[self.points[axis]])
    }
}

/// One semi-tube of a multi-tube: a strip of the common half-width leaving
/// the junction at the origin in direction `direction` (degrees, measured
/// from the +z axis towards +x', multiple of 45).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Arm {
    pub direction: i32,
    pub length: f64,
}

impl Arm {
    fn unit(&self) -> [f64; 2] {
        let t = (self.direction as f64).to_radians();
        [t.sin(), t.cos()]
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MaskKind {
    Interval,
    Rectangle,
    Disk,
    TruncatedTube,
    EnlargedTube,
    Multitube,
}

/// Geometric description of an open domain centred at the origin.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Geometry {
    /// `(-a, a)`.
    Interval {
        half_width: f64,
    },
    /// `(-a0, a0) × (-a1, a1)`.
    Rectangle {
        half_widths: [f64; 2],
    },
    Disk {
        radius: f64,
    },
    /// `(-a, a) × (-T, T)`: the tube `ω × ℝ` cut off at `|z| = T`.
    TruncatedTube {
        half_width: f64,
        truncation: f64,
    },
    /// The truncated tube with a one-sided rectangular bump
    /// `[a, a + b) × (-ℓ, ℓ)` attached to its `x' = a` wall.
    EnlargedTube {
        half_width: f64,
        truncation: f64,
        bump_depth: f64,
        bump_half_length: f64,
    },
    /// Union of strips of half-width `a` leaving the origin.
    Multitube {
        half_width: f64,
        arms: Vec<Arm>,
    },
}

impl Geometry {
    pub fn kind(&self) -> MaskKind {
        match self {
            Geometry::Interval { .. } => MaskKind::Interval,
            Geometry::Rectangle { .. } => MaskKind::Rectangle,
            Geometry::Disk { .. } => MaskKind::Disk,
            Geometry::TruncatedTube { .. } => MaskKind::TruncatedTube,
            Geometry::EnlargedTube { .. } => MaskKind::EnlargedTube,
            Geometry::Multitube { .. } => MaskKind::Multitube,
        }
    }

    pub fn dim(&self) -> usize {
        match self {
            Geometry::Interval { .. } => 1,
            _ => 2,
        }
    }

    fn validate(&self) -> Result<()> {
        fn positive(name: &'static str, v: f64) -> Result<()> {
            if v.is_finite() && v > 0.0 {
                Ok(())
            } else {
                Err(Error::Geometry(format!("{name} = {v} must be positive")))
            }
        }
        match self {
            Geometry::Interval { half_width } => positive("half_width", *half_width),
            Geometry::Rectangle { half_widths } => {
                positive("half_widths[0]", half_widths[0])?;
                positive("half_widths[1]", half_widths[1])
            }
            Geometry::Disk { radius } => positive("radius", *radius),
            Geometry::TruncatedTube {
                half_width,
                truncation,
            } => {
                positive("half_width", *half_width)?;
                positive("truncation", *truncation)
            }
            Geometry::EnlargedTube {
                half_width,
                truncation,
                bump_depth,
                bump_half_length,
            } => {
                positive("half_width", *half_width)?;
                positive("truncation", *truncation)?;
                positive("bump_depth", *bump_depth)?;
                positive("bump_half_length", *bump_half_length)?;
                if truncation <= bump_half_length {
                    return Err(Error::Geometry(format!(
                        "truncation inside bump (T = {truncation} <= l = {bump_half_length})"
                    )));
                }
                Ok(())
            }
            Geometry::Multitube { half_width, arms } => {
                positive("half_width", *half_width)?;
                if arms.len() < 2 {
                    return Err(Error::Geometry(
                        "a multitube needs at least two arms".into(),
                    ));
                }
                for (i, arm) in arms.iter().enumerate() {
                    positive("arm length", arm.length)?;
                    if arm.direction.rem_euclid(45) != 0 {
                        return Err(Error::Geometry(format!(
                            "arm direction {} is not a multiple of 45 degrees",
                            arm.direction
                        )));
                    }
                    for other in &arms[..i] {
                        if other.direction.rem_euclid(360) == arm.direction.rem_euclid(360) {
                            return Err(Error::Geometry(format!(
                                "arms with co-directional axes ({} degrees)",
                                arm.direction
                            )));
                        }
                    }
                }
                Ok(())
            }
        }
    }

    /// Axis-aligned bounding box `[lo, hi]` per axis.
    pub fn bounding_box(&self) -> Vec<[f64; 2]> {
        match self {
            Geometry::Interval { half_width } => vec![[-half_width, *half_width]],
            Geometry::Rectangle { half_widths } => vec![
                [-half_widths[0], half_widths[0]],
                [-half_widths[1], half_widths[1]],
            ],
            Geometry::Disk { radius } => vec![[-radius, *radius], [-radius, *radius]],
            Geometry::TruncatedTube {
                half_width,
                truncation,
            } => vec![[-half_width, *half_width], [-truncation, *truncation]],
            Geometry::EnlargedTube {
                half_width,
                truncation,
                bump_depth,
                ..
            } => vec![
                [-half_width, half_width + bump_depth],
                [-truncation, *truncation],
            ],
            Geometry::Multitube { half_width, arms } => {
                let a = *half_width;
                let mut bb = vec![[-a, a], [-a, a]];
                for arm in arms {
                    let d = arm.unit();
                    let n = [d[1], -d[0]];
                    for t in [-a, arm.length] {
                        for w in [-a, a] {
                            let p = [t * d[0] + w * n[0], t * d[1] + w * n[1]];
                            for ax in 0..2 {
                                bb[ax][0] = bb[ax][0].min(p[ax]);
                                bb[ax][1] = bb[ax][1].max(p[ax]);
                            }
                        }
                    }
                }
                bb
            }
        }
    }

    /// Largest coordinate magnitude per axis.
    pub fn reach(&self) -> Vec<f64> {
        self.bounding_box()
            .iter()
            .map(|[lo, hi]| lo.abs().max(hi.abs()))
            .collect()
    }

    /// Strict membership in the open domain, with a slack of `eps`.
    fn contains(&self, p: [f64; 2], eps: f64) -> bool {
        let [x, z] = p;
        match self {
            Geometry::Interval { half_width } => x.abs() < half_width - eps,
            Geometry::Rectangle { half_widths } => {
                x.abs() < half_widths[0] - eps && z.abs() < half_widths[1] - eps
            }
            Geometry::Disk { radius } => (x * x + z * z).sqrt() < radius - eps,
            Geometry::TruncatedTube {
                half_width,
                truncation,
            } => x.abs() < half_width - eps && z.abs() < truncation - eps,
            Geometry::EnlargedTube {
                half_width,
                truncation,
                bump_depth,
                bump_half_length,
            } => {
                let tube = x.abs() < half_width - eps && z.abs() < truncation - eps;
                let bump = x > -half_width + eps
                    && x < half_width + bump_depth - eps
                    && z.abs() < bump_half_length - eps;
                tube || bump
            }
            Geometry::Multitube { half_width, arms } => arms.iter().any(|arm| {
                let d = arm.unit();
                let along = x * d[0] + z * d[1];
                let across = x * d[1] - z * d[0];
                along > -half_width + eps
                    && along < arm.length - eps
                    && across.abs() < half_width - eps
            }),
        }
    }
}

/// The set of grid points strictly inside a geometry.
#[derive(Debug, Clone)]
pub struct DomainMask {
    grid: Grid,
    geometry: Geometry,
    inside: Vec<bool>,
    indices: Vec<usize>,
}

impl PartialEq for DomainMask {
    fn eq(&self, other: &Self) -> bool {
        self.grid == other.grid && self.indices == other.indices
    }
}

/// Builds the mask of `geometry` on `grid`.
///
/// Fails with [`Error::InsufficientPadding`] when the geometry comes closer
/// than `L/2` to the periodic box boundary along some axis, and with
/// [`Error::DegenerateDomain`] when no grid point falls inside.
pub fn make_mask(geometry: Geometry, grid: Grid) -> Result<DomainMask> {
    geometry.validate()?;
    if geometry.dim() != grid.dim() {
        return Err(Error::Geometry(format!(
            "{:?} is {}-dimensional but the grid is {}-dimensional",
            geometry.kind(),
            geometry.dim(),
            grid.dim()
        )));
    }
    let tol = SNAP_EPS * grid.spacing();
    for (axis, [lo, hi]) in geometry.bounding_box().into_iter().enumerate() {
        let limit = 0.5 * grid.half_length(axis);
        if lo < -limit - tol || hi > limit + tol {
            return Err(Error::InsufficientPadding(format!(
                "{:?} spans [{lo}, {hi}] on axis {axis} but the box half-length is {} (need |x| <= {limit})",
                geometry.kind(),
                grid.half_length(axis),
            )));
        }
    }

    let mut inside = vec![false; grid.len()];
    let mut indices = Vec::new();
    for (flat, flag) in inside.iter_mut().enumerate() {
        if geometry.contains(grid.position(flat), tol) {
            *flag = true;
            indices.push(flat);
        }
    }
    if indices.is_empty() {
        return Err(Error::DegenerateDomain(format!(
            "{:?} contains no grid points at spacing {}",
            geometry.kind(),
            grid.spacing()
        )));
    }
    if let Geometry::EnlargedTube {
        half_width,
        truncation,
        ..
    } = &geometry
    {
        let plain = Geometry::TruncatedTube {
            half_width: *half_width,
            truncation: *truncation,
        };
        let extra = indices
            .iter()
            .filter(|&&f| !plain.contains(grid.position(f), tol))
            .count();
        if extra == 0 {
            return Err(Error::DegenerateDomain(
                "bump adds no grid points to the tube".into(),
            ));
        }
    }
    Ok(DomainMask {
        grid,
        geometry,
        inside,
        indices,
    })
}

impl DomainMask {
    /// Every point of the box; the operator restricted to it is the plain
    /// periodic one. Bypasses the padding check on purpose.
    pub fn full_box(grid: Grid) -> DomainMask {
        let half = [grid.half_length(0), grid.half_length(1)];
        let geometry = if grid.dim() == 1 {
            Geometry::Interval {
                half_width: half[0],
            }
        } else {
            Geometry::Rectangle { half_widths: half }
        };
        DomainMask {
            grid,
            geometry,
            inside: vec![true; grid.len()],
            indices: (0..grid.len()).collect(),
        }
    }

    pub fn grid(&self) -> &Grid {
        &self.grid
    }

    pub fn geometry(&self) -> &Geometry {
        &self.geometry
    }

    pub fn kind(&self) -> MaskKind {
        self.geometry.kind()
    }

    /// Per-box-point indicator.
    pub fn inside(&self) -> &[bool] {
        &self.inside
    }

    /// Flat box indices of the masked points, increasing.
    pub fn indices(&self) -> &[usize] {
        &self.indices
    }

    /// Number of masked points.
    pub fn len(&self) -> usize {
        self.indices.len()
    }

    pub fn is_empty(&self) -> bool {
        self.indices.is_empty()
    }

    pub fn position(&self, k: usize) -> [f64; 2] {
        self.grid.position(self.indices[k])
    }

    /// Position of a flat box index inside `indices`, if masked.
    pub fn local_index(&self, flat: usize) -> Option<usize> {
        if self.inside.get(flat).copied().unwrap_or(false) {
            self.indices.binary_search(&flat).ok()
        } else {
            None
        }
    }

    /// Smallest distance from a masked point to the periodic box boundary,
    /// divided by the box half-length of that axis.
    pub fn padding_fraction(&self) -> f64 {
        let g = &self.grid;
        let mut worst = f64::INFINITY;
        for &flat in &self.indices {
            let p = g.position(flat);
            for axis in 0..g.dim() {
                let l = g.half_length(axis);
                worst = worst.min((l - p[axis].abs()) / l);
            }
        }
        worst
    }

    /// Number of nearest-neighbour connected components.
    pub fn component_count(&self) -> usize {
        let g = &self.grid;
        let mut seen = vec![false; g.len()];
        let mut count = 0;
        let mut queue = VecDeque::new();
        for &start in &self.indices {
            if seen[start] {
                continue;
            }
            count += 1;
            seen[start] = true;
            queue.push_back(start);
            while let Some(f) = queue.pop_front() {
                let [i0, i1] = g.unflatten(f);
                let mut nbrs = Vec::with_capacity(4);
                if i0 > 0 {
                    nbrs.push([i0 - 1, i1]);
                }
                if i0 + 1 < g.points_along(0) {
                    nbrs.push([i0 + 1, i1]);
                }
                if g.dim() == 2 {
                    if i1 > 0 {
                        nbrs.push([i0, i1 - 1]);
                    }
                    if i1 + 1 < g.points_along(1) {
                        nbrs.push([i0, i1 + 1]);
                    }
                }
                for n in nbrs {
                    let nf = g.flatten(n);
                    if self.inside[nf] && !seen[nf] {
                        seen[nf] = true;
                        queue.push_back(nf);
                    }
                }
            }
        }
        count
    }

    /// Whether every point of `self` is also a point of `other` (same grid).
    pub fn is_subset_of(&self, other: &DomainMask) -> bool {
        self.grid == other.grid && self.indices.iter().all(|&f| other.inside[f])
    }
}

/// Complex values on the points of a mask, zero elsewhere.
#[derive(Debug, Clone)]
pub struct GridFunction {
    mask: Arc<DomainMask>,
    values: Vec<Complex64>,
}

impl GridFunction {
    pub fn zeros(mask: Arc<DomainMask>) -> Self {
        let values = vec![Complex64::new(0.0, 0.0); mask.len()];
        Self { mask, values }
    }

    pub fn from_values(mask: Arc<DomainMask>, values: Vec<Complex64>) -> Result<Self> {
        if values.len() != mask.len() {
            return Err(Error::MaskMismatch);
        }
        Ok(Self { mask, values })
    }

    pub fn from_real(mask: Arc<DomainMask>, values: &[f64]) -> Result<Self> {
        Self::from_values(
            mask,
            values.iter().map(|&v| Complex64::new(v, 0.0)).collect(),
        )
    }

    /// Samples `f` at the masked points.
    pub fn from_fn(mask: Arc<DomainMask>, f: impl Fn([f64; 2]) -> Complex64) -> Self {
        let values = (0..mask.len()).map(|k| f(mask.position(k))).collect();
        Self { mask, values }
    }

    pub fn from_real_fn(mask: Arc<DomainMask>, f: impl Fn([f64; 2]) -> f64) -> Self {
        Self::from_fn(mask, |p| Complex64::new(f(p), 0.0))
    }

    pub fn mask(&self) -> &Arc<DomainMask> {
        &self.mask
    }

    pub fn values(&self) -> &[Complex64] {
        &self.values
    }

    pub fn values_mut(&mut self) -> &mut [Complex64] {
        &mut self.values
    }

    pub fn real_parts(&self) -> Vec<f64> {
        self.values.iter().map(|v| v.re).collect()
    }

    pub fn same_mask(&self, other: &GridFunction) -> bool {
        Arc::ptr_eq(&self.mask, &other.mask) || *self.mask == *other.mask
    }

    /// Zero extension to the whole box (row-major order).
    pub fn to_box(&self) -> Vec<Complex64> {
        let mut out = vec![Complex64::new(0.0, 0.0); self.mask.grid().len()];
        for (&f, &v) in self.mask.indices().iter().zip(&self.values) {
            out[f] = v;
        }
        out
    }

    pub fn norm_sq(&self) -> f64 {
        self.mask.grid().cell_volume() * self.values.iter().map(|v| v.norm_sqr()).sum::<f64>()
    }

    /// `L₂` norm `h^{n/2}·|values|`.
    pub fn norm(&self) -> f64 {
        self.norm_sq().sqrt()
    }

    pub fn scaled(&self, c: Complex64) -> GridFunction {
        GridFunction {
            mask: self.mask.clone(),
            values: self.values.iter().map(|v| v * c).collect(),
        }
    }

    /// `self - other`.
    pub fn sub(&self, other: &GridFunction) -> Result<GridFunction> {
        if !self.same_mask(other) {
            return Err(Error::MaskMismatch);
        }
        Ok(GridFunction {
            mask: self.mask.clone(),
            values: self
                .values
                .iter()
                .zip(&other.values)
                .map(|(a, b)| a - b)
                .collect(),
        })
    }
}

/// Multilinear interpolation of the zero extension of `u` at the points of
/// `target` (any grid of the same dimension).
pub fn interpolate(u: &GridFunction, target: Arc<DomainMask>) -> Result<GridFunction> {
    let src = *u.mask().grid();
    let dst = *target.grid();
    if src.dim() != dst.dim() {
        return Err(Error::InvalidGrid("interpolation across dimensions".into()));
    }
    let data = u.to_box();
    let h = src.spacing();
    // per axis: lower index and weight of the upper neighbour, or None outside
    let locate = |axis: usize, x: f64| -> Option<(usize, f64)> {
        let t = (x + src.half_length(axis)) / h;
        let i = t.floor();
        if i < 0.0 || i + 1.0 >= src.points_along(axis) as f64 {
            return None;
        }
        Some((i as usize, t - i))
    };
    let values = (0..target.len())
        .map(|k| {
            let p = target.position(k);
            let Some((i0, w0)) = locate(0, p[0]) else {
                return Complex64::new(0.0, 0.0);
            };
            if src.dim() == 1 {
                return data[i0] * (1.0 - w0) + data[i0 + 1] * w0;
            }
            let Some((i1, w1)) = locate(1, p[1]) else {
                return Complex64::new(0.0, 0.0);
            };
            let at = |a: usize, b: usize| data[src.flatten([a, b])];
            at(i0, i1) * ((1.0 - w0) * (1.0 - w1))
                + at(i0 + 1, i1) * (w0 * (1.0 - w1))
                + at(i0, i1 + 1) * ((1.0 - w0) * w1)
                + at(i0 + 1, i1 + 1) * (w0 * w1)
        })
        .collect();
    GridFunction::from_values(target, values)
}

/// `L₂` pairing `h^n·Σ u·conj(v)`.
pub fn inner(u: &GridFunction, v: &GridFunction) -> Result<Complex64> {
    if !u.same_mask(v) {
        return Err(Error::MaskMismatch);
    }
    let sum: Complex64 = u
        .values
        .iter()
        .zip(&v.values)
        .map(|(a, b)| a * b.conj())
        .sum();
    Ok(sum * u.mask.grid().cell_volume())
}
