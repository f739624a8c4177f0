//! Concrete locally compact groups in global chart coordinates.
//!
//! Four built-in models, all given by explicit coordinate formulas:
//!
//! - `Euclidean(n)` — the abelian group ℝⁿ (n ≤ 4), Lebesgue Haar measure.
//! - `PhasePlane` — ℝ², the Heisenberg group modulo its center. Identical to
//!   `Euclidean(2)` as a group; kept separate because the Schrödinger
//!   representation is attached to it.
//! - `Affine` — the `ax+b` group in the chart (b, a) with a > 0 and law
//!   (b, a)(b′, a′) = (b + a b′, a a′). Right Haar density 1/a, modular
//!   function Δ(b, a) = 1/a. The only non-unimodular model.
//! - `Heisenberg` — ℍ¹ = ℝ³ with (x, y, z)(x′, y′, z′) =
//!   (x + x′, y + y′, z + z′ + x y′). Unimodular, homogeneous dimension 4.
//!
//! Every model carries a dilation family used for scaled region sequences:
//! scalar dilation on ℝⁿ (measure scales by rⁿ), (b, a) ↦ (r b, aʳ) on the
//! affine group (measure scales by r²), and (x, y, z) ↦ (r x, r y, r² z)
//! on ℍ¹ (measure scales by r⁴).

use crate::error::{Error, Result};
use rayon::prelude::*;
use std::sync::Arc;

/// Maximum chart dimension supported by [`Point`].
pub const MAX_DIM: usize = 4;

/// Fixed node count per parallel quadrature chunk. Chunking is independent
/// of the thread count so reductions are run-to-run deterministic.
const CHUNK: usize = 8192;

/// A group element in chart coordinates. Plain value type, cheap to copy.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Point {
    coords: [f64; MAX_DIM],
    dim: u8,
}

impl Point {
    pub fn new(coords: &[f64]) -> Self {
        assert!(coords.len() <= MAX_DIM, "chart dimension above {MAX_DIM}");
        let mut c = [0.0; MAX_DIM];
        c[..coords.len()].copy_from_slice(coords);
        Point {
            coords: c,
            dim: coords.len() as u8,
        }
    }

    pub fn dim(&self) -> usize {
        self.dim as usize
    }

    pub fn coords(&self) -> &[f64] {
        &self.coords[..self.dim as usize]
    }

    pub fn coord(&self, axis: usize) -> f64 {
        self.coords()[axis]
    }
}

pub fn point1(x: f64) -> Point {
    Point::new(&[x])
}

pub fn point2(x: f64, y: f64) -> Point {
    Point::new(&[x, y])
}

pub fn point3(x: f64, y: f64, z: f64) -> Point {
    Point::new(&[x, y, z])
}

/// One of the built-in group models.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Group {
    Euclidean(usize),
    PhasePlane,
    Affine,
    Heisenberg,
}

impl Group {
    pub fn name(&self) -> String {
        match self {
            Group::Euclidean(n) => format!("euclidean{n}"),
            Group::PhasePlane => "phase_plane".into(),
            Group::Affine => "affine".into(),
            Group::Heisenberg => "heisenberg".into(),
        }
    }

    pub fn chart_dim(&self) -> usize {
        match self {
            Group::Euclidean(n) => *n,
            Group::PhasePlane => 2,
            Group::Affine => 2,
            Group::Heisenberg => 3,
        }
    }

    pub fn is_abelian(&self) -> bool {
        matches!(self, Group::Euclidean(_) | Group::PhasePlane)
    }

    pub fn is_unimodular(&self) -> bool {
        !matches!(self, Group::Affine)
    }

    pub fn identity(&self) -> Point {
        match self {
            Group::Affine => point2(0.0, 1.0),
            g => Point::new(&vec![0.0; g.chart_dim()]),
        }
    }

    /// Checks chart dimension and, for the affine model, positivity of the
    /// scale coordinate.
    pub fn validate(&self, p: Point) -> Result<()> {
        if p.dim() != self.chart_dim() {
            return Err(Error::DimensionMismatch {
                expected: self.chart_dim(),
                got: p.dim(),
            });
        }
        if matches!(self, Group::Affine) && p.coord(1) <= 0.0 {
            return Err(Error::NonPositiveScale(p.coord(1)));
        }
        Ok(())
    }

    /// Group product in chart coordinates. Inputs are assumed valid; use
    /// [`Group::try_multiply`] at API boundaries.
    pub fn multiply(&self, x: Point, y: Point) -> Point {
        match self {
            Group::Euclidean(_) | Group::PhasePlane => {
                let mut c = x.coords;
                for (a, b) in c.iter_mut().zip(y.coords.iter()) {
                    *a += b;
                }
                Point { coords: c, dim: x.dim }
            }
            Group::Affine => point2(x.coord(0) + x.coord(1) * y.coord(0), x.coord(1) * y.coord(1)),
            Group::Heisenberg => point3(
                x.coord(0) + y.coord(0),
                x.coord(1) + y.coord(1),
                x.coord(2) + y.coord(2) + x.coord(0) * y.coord(1),
            ),
        }
    }

    pub fn try_multiply(&self, x: Point, y: Point) -> Result<Point> {
        self.validate(x)?;
        self.validate(y)?;
        Ok(self.multiply(x, y))
    }

    pub fn invert(&self, x: Point) -> Point {
        match self {
            Group::Euclidean(_) | Group::PhasePlane => {
                let mut c = x.coords;
                for a in c.iter_mut() {
                    *a = -*a;
                }
                Point { coords: c, dim: x.dim }
            }
            Group::Affine => point2(-x.coord(0) / x.coord(1), 1.0 / x.coord(1)),
            Group::Heisenberg => point3(
                -x.coord(0),
                -x.coord(1),
                -x.coord(2) + x.coord(0) * x.coord(1),
            ),
        }
    }

    /// Density of the right Haar measure with respect to chart Lebesgue
    /// measure.
    pub fn right_haar_density(&self, x: Point) -> f64 {
        match self {
            Group::Affine => 1.0 / x.coord(1),
            _ => 1.0,
        }
    }

    /// Modular function Δ_G. Identically 1 on the unimodular models.
    pub fn modular(&self, x: Point) -> f64 {
        match self {
            Group::Affine => 1.0 / x.coord(1),
            _ => 1.0,
        }
    }

    /// Dilation family Γ_r.
    pub fn dilate(&self, r: f64, x: Point) -> Point {
        assert!(r > 0.0, "dilation scale must be positive");
        match self {
            Group::Euclidean(_) | Group::PhasePlane => {
                let mut c = x.coords;
                for a in c.iter_mut() {
                    *a *= r;
                }
                Point { coords: c, dim: x.dim }
            }
            Group::Affine => point2(r * x.coord(0), x.coord(1).powf(r)),
            Group::Heisenberg => point3(r * x.coord(0), r * x.coord(1), r * r * x.coord(2)),
        }
    }

    /// Homogeneous dimension Q: μ(Γ_r E) = r^Q μ(E).
    pub fn homogeneous_dim(&self) -> u32 {
        match self {
            Group::Euclidean(n) => *n as u32,
            Group::PhasePlane => 2,
            Group::Affine => 2,
            Group::Heisenberg => 4,
        }
    }

    /// Axes whose quadrature nodes are laid out uniformly in log coordinates.
    /// Only the affine scale axis; a uniform grid in `a` cannot cover the
    /// dilated boxes [1, e^r] at any usable resolution.
    pub fn log_axes(&self) -> [bool; MAX_DIM] {
        match self {
            Group::Affine => [false, true, false, false],
            _ => [false; MAX_DIM],
        }
    }
}

/// Axis-aligned bounding box in chart coordinates.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct BBox {
    lo: [f64; MAX_DIM],
    hi: [f64; MAX_DIM],
    dim: u8,
}

impl BBox {
    pub fn new(lo: &[f64], hi: &[f64]) -> Self {
        assert_eq!(lo.len(), hi.len());
        assert!(lo.len() <= MAX_DIM);
        let mut l = [0.0; MAX_DIM];
        let mut h = [0.0; MAX_DIM];
        l[..lo.len()].copy_from_slice(lo);
        h[..hi.len()].copy_from_slice(hi);
        BBox {
            lo: l,
            hi: h,
            dim: lo.len() as u8,
        }
    }

    pub fn dim(&self) -> usize {
        self.dim as usize
    }

    pub fn lo(&self, axis: usize) -> f64 {
        self.lo[axis]
    }

    pub fn hi(&self, axis: usize) -> f64 {
        self.hi[axis]
    }

    pub fn contains(&self, p: Point) -> bool {
        // closed box with a hair of slack so boundary nodes are not lost to
        // rounding in transformed bboxes
        const EPS: f64 = 1e-12;
        p.coords().iter().enumerate().all(|(i, &c)| {
            let w = (self.hi[i] - self.lo[i]).abs().max(1.0);
            c >= self.lo[i] - EPS * w && c <= self.hi[i] + EPS * w
        })
    }

    pub fn is_finite(&self) -> bool {
        (0..self.dim())
            .all(|i| self.lo[i].is_finite() && self.hi[i].is_finite() && self.lo[i] <= self.hi[i])
    }

    fn corners(&self) -> Vec<Point> {
        let d = self.dim();
        (0..(1usize << d))
            .map(|mask| {
                let mut c = [0.0; MAX_DIM];
                for i in 0..d {
                    c[i] = if mask & (1 << i) != 0 { self.hi[i] } else { self.lo[i] };
                }
                Point {
                    coords: c,
                    dim: d as u8,
                }
            })
            .collect()
    }

    /// Smallest box containing the images of all corners under `map`. All
    /// built-in group maps are coordinate-wise monotone in each input, so
    /// corner images bound the image of the box.
    fn mapped(&self, map: impl Fn(Point) -> Point) -> BBox {
        let d = self.dim();
        let mut lo = [f64::INFINITY; MAX_DIM];
        let mut hi = [f64::NEG_INFINITY; MAX_DIM];
        for corner in self.corners() {
            let q = map(corner);
            for i in 0..d {
                lo[i] = lo[i].min(q.coord(i));
                hi[i] = hi[i].max(q.coord(i));
            }
        }
        BBox {
            lo,
            hi,
            dim: d as u8,
        }
    }
}

/// Which translated set a region represents.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum TranslateSide {
    /// x⁻¹E: membership of y tests xy ∈ E.
    LeftInverse,
    /// Ex⁻¹: membership of y tests yx ∈ E.
    RightInverse,
}

#[derive(Clone, Debug)]
enum RegionKind {
    /// The bbox itself.
    Box,
    Disk {
        center: [f64; 2],
        radius: f64,
    },
    Annulus {
        center: [f64; 2],
        inner: f64,
        outer: f64,
    },
    /// Box clipped by the half plane n·p ≤ c.
    HalfPlaneBox {
        normal: [f64; 2],
        offset: f64,
    },
    Translated {
        group: Group,
        x: Point,
        side: TranslateSide,
        inner: Arc<Region>,
    },
    Dilated {
        group: Group,
        r: f64,
        inner: Arc<Region>,
    },
    Inverted {
        group: Group,
        inner: Arc<Region>,
    },
    Intersection(Arc<Region>, Arc<Region>),
}

/// A measurable subset of a group chart: indicator plus bounding box.
#[derive(Clone, Debug)]
pub struct Region {
    kind: RegionKind,
    bbox: BBox,
    label: String,
}

impl Region {
    pub fn bbox(&self) -> BBox {
        self.bbox
    }

    pub fn label(&self) -> &str {
        &self.label
    }

    pub fn named_box(label: impl Into<String>, lo: &[f64], hi: &[f64]) -> Region {
        Region {
            kind: RegionKind::Box,
            bbox: BBox::new(lo, hi),
            label: label.into(),
        }
    }

    pub fn interval(lo: f64, hi: f64) -> Region {
        Region::named_box(format!("[{lo},{hi}]"), &[lo], &[hi])
    }

    pub fn rect(lo: [f64; 2], hi: [f64; 2]) -> Region {
        Region::named_box(
            format!("box[{},{}]x[{},{}]", lo[0], hi[0], lo[1], hi[1]),
            &lo,
            &hi,
        )
    }

    pub fn disk(center: [f64; 2], radius: f64) -> Region {
        assert!(radius > 0.0);
        Region {
            kind: RegionKind::Disk { center, radius },
            bbox: BBox::new(
                &[center[0] - radius, center[1] - radius],
                &[center[0] + radius, center[1] + radius],
            ),
            label: format!("disk(r={radius})"),
        }
    }

    pub fn annulus(center: [f64; 2], inner: f64, outer: f64) -> Region {
        assert!(0.0 <= inner && inner < outer);
        Region {
            kind: RegionKind::Annulus {
                center,
                inner,
                outer,
            },
            bbox: BBox::new(
                &[center[0] - outer, center[1] - outer],
                &[center[0] + outer, center[1] + outer],
            ),
            label: format!("annulus({inner},{outer})"),
        }
    }

    pub fn half_plane_box(lo: [f64; 2], hi: [f64; 2], normal: [f64; 2], offset: f64) -> Region {
        Region {
            kind: RegionKind::HalfPlaneBox { normal, offset },
            bbox: BBox::new(&lo, &hi),
            label: format!("halfbox(n=({},{}),c={offset})", normal[0], normal[1]),
        }
    }

    /// Region whose indicator at y tests the translated point: `RightInverse`
    /// gives Ex⁻¹ (test yx ∈ E), `LeftInverse` gives x⁻¹E (test xy ∈ E).
    pub fn translated(&self, group: Group, x: Point, side: TranslateSide) -> Region {
        // Ex^{-1} = {e x^{-1} | e in E}; x^{-1}E = {x^{-1} e | e in E}
        let xi = group.invert(x);
        let bbox = match side {
            TranslateSide::RightInverse => self.bbox.mapped(|e| group.multiply(e, xi)),
            TranslateSide::LeftInverse => self.bbox.mapped(|e| group.multiply(xi, e)),
        };
        Region {
            kind: RegionKind::Translated {
                group,
                x,
                side,
                inner: Arc::new(self.clone()),
            },
            bbox,
            label: self.label.clone(),
        }
    }

    /// Γ_r(E) under the model's dilation family.
    pub fn dilated(&self, group: Group, r: f64) -> Region {
        assert!(r > 0.0);
        let bbox = self.bbox.mapped(|e| group.dilate(r, e));
        Region {
            kind: RegionKind::Dilated {
                group,
                r,
                inner: Arc::new(self.clone()),
            },
            bbox,
            label: format!("{}*{r}", self.label),
        }
    }

    /// E⁻¹ = {y : y⁻¹ ∈ E}.
    pub fn inverted(&self, group: Group) -> Region {
        let bbox = self.bbox.mapped(|e| group.invert(e));
        Region {
            kind: RegionKind::Inverted {
                group,
                inner: Arc::new(self.clone()),
            },
            bbox,
            label: format!("{}^-1", self.label),
        }
    }

    pub fn intersect(&self, other: &Region) -> Region {
        let d = self.bbox.dim();
        let mut lo = [0.0; MAX_DIM];
        let mut hi = [0.0; MAX_DIM];
        for i in 0..d {
            lo[i] = self.bbox.lo(i).max(other.bbox.lo(i));
            hi[i] = self.bbox.hi(i).min(other.bbox.hi(i));
            if lo[i] > hi[i] {
                // empty; collapse to a degenerate box
                hi[i] = lo[i];
            }
        }
        Region {
            kind: RegionKind::Intersection(Arc::new(self.clone()), Arc::new(other.clone())),
            bbox: BBox {
                lo,
                hi,
                dim: d as u8,
            },
            label: format!("{}&{}", self.label, other.label),
        }
    }

    /// Indicator function. Always false outside the bounding box.
    pub fn contains(&self, p: Point) -> bool {
        if !self.bbox.contains(p) {
            return false;
        }
        self.contains_inner(p)
    }

    fn contains_inner(&self, p: Point) -> bool {
        match &self.kind {
            RegionKind::Box => true,
            RegionKind::Disk { center, radius } => {
                let dx = p.coord(0) - center[0];
                let dy = p.coord(1) - center[1];
                dx * dx + dy * dy <= radius * radius
            }
            RegionKind::Annulus {
                center,
                inner,
                outer,
            } => {
                let dx = p.coord(0) - center[0];
                let dy = p.coord(1) - center[1];
                let d2 = dx * dx + dy * dy;
                d2 >= inner * inner && d2 <= outer * outer
            }
            RegionKind::HalfPlaneBox { normal, offset } => {
                normal[0] * p.coord(0) + normal[1] * p.coord(1) <= *offset
            }
            RegionKind::Translated {
                group,
                x,
                side,
                inner,
            } => {
                let q = match side {
                    TranslateSide::RightInverse => group.multiply(p, *x),
                    TranslateSide::LeftInverse => group.multiply(*x, p),
                };
                inner.contains(q)
            }
            RegionKind::Dilated { group, r, inner } => inner.contains(group.dilate(1.0 / r, p)),
            RegionKind::Inverted { group, inner } => inner.contains(group.invert(p)),
            RegionKind::Intersection(a, b) => a.contains(p) && b.contains(p),
        }
    }
}

/// Requested quadrature resolution (nodes per chart axis).
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct QuadSpec {
    pub per_axis: usize,
}

impl QuadSpec {
    pub fn new(per_axis: usize) -> Self {
        QuadSpec { per_axis }
    }
}

#[derive(Clone, Copy, Debug)]
struct GridAxis {
    /// parameter-space bounds: the chart coordinate or its logarithm
    lo: f64,
    hi: f64,
    n: usize,
    log: bool,
}

impl GridAxis {
    fn step(&self) -> f64 {
        (self.hi - self.lo) / self.n as f64
    }

    /// Midpoint node: chart coordinate and the Jacobian d(chart)/d(param).
    fn node(&self, i: usize) -> (f64, f64) {
        let t = self.lo + (i as f64 + 0.5) * self.step();
        if self.log {
            let c = t.exp();
            (c, c)
        } else {
            (t, 1.0)
        }
    }
}

/// Midpoint quadrature grid over a bounding box, with right-Haar weights.
///
/// Nodes are uniform per axis in the parametrizing coordinate (the chart
/// coordinate, or its logarithm on log axes). The weight of a node is
/// `right_haar_density(x) * prod_axis(jacobian * step)`, so summing weights
/// over the nodes of a region approximates its Haar measure.
#[derive(Clone, Debug)]
pub struct Grid {
    group: Group,
    axes: Vec<GridAxis>,
}

impl Grid {
    pub fn over(group: Group, bbox: BBox, spec: QuadSpec) -> Result<Grid> {
        if spec.per_axis == 0 {
            return Err(Error::EmptyGrid);
        }
        if bbox.dim() != group.chart_dim() || !bbox.is_finite() {
            return Err(Error::BadBBox);
        }
        let log_axes = group.log_axes();
        let mut axes = Vec::with_capacity(bbox.dim());
        for i in 0..bbox.dim() {
            let (mut lo, mut hi) = (bbox.lo(i), bbox.hi(i));
            if log_axes[i] {
                if lo <= 0.0 {
                    return Err(Error::NonPositiveScale(lo));
                }
                lo = lo.ln();
                hi = hi.ln();
            }
            axes.push(GridAxis {
                lo,
                hi,
                n: spec.per_axis,
                log: log_axes[i],
            });
        }
        Ok(Grid { group, axes })
    }

    pub fn len(&self) -> usize {
        self.axes.iter().map(|a| a.n).product()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn group(&self) -> Group {
        self.group
    }

    pub fn axis_count(&self) -> usize {
        self.axes.len()
    }

    pub fn axis_len(&self, axis: usize) -> usize {
        self.axes[axis].n
    }

    /// Node by flat index; axis 0 is the outermost (slowest) index.
    pub fn node(&self, mut idx: usize) -> (Point, f64) {
        let d = self.axes.len();
        let mut coords = [0.0; MAX_DIM];
        let mut cellw = 1.0;
        for ax in (0..d).rev() {
            let a = &self.axes[ax];
            let i = idx % a.n;
            idx /= a.n;
            let (c, jac) = a.node(i);
            coords[ax] = c;
            cellw *= jac * a.step();
        }
        let p = Point {
            coords,
            dim: d as u8,
        };
        (p, self.group.right_haar_density(p) * cellw)
    }

    /// Chart coordinate of node `i` on one axis together with the axis
    /// weight factor (Jacobian times step).
    pub fn axis_node(&self, axis: usize, i: usize) -> (f64, f64) {
        let a = &self.axes[axis];
        let (c, jac) = a.node(i);
        (c, jac * a.step())
    }
}

/// Haar measure of a region by midpoint quadrature.
///
/// Deterministic under any thread count: the node range is split into
/// fixed-size chunks, chunk subtotals are computed independently, and the
/// subtotals are combined in index order with compensated summation.
pub fn measure(group: Group, region: &Region, spec: QuadSpec) -> Result<f64> {
    let grid = Grid::over(group, region.bbox(), spec)?;
    Ok(measure_on(&grid, region))
}

pub fn measure_on(grid: &Grid, region: &Region) -> f64 {
    let n = grid.len();
    let partials: Vec<f64> = (0..n.div_ceil(CHUNK))
        .into_par_iter()
        .map(|c| {
            let start = c * CHUNK;
            let end = (start + CHUNK).min(n);
            let mut acc = 0.0;
            for idx in start..end {
                let (p, w) = grid.node(idx);
                if region.contains(p) {
                    acc += w;
                }
            }
            acc
        })
        .collect();
    kahan_sum(&partials)
}

pub fn kahan_sum(values: &[f64]) -> f64 {
    let mut sum = 0.0;
    let mut comp = 0.0;
    for &v in values {
        let y = v - comp;
        let t = sum + y;
        comp = (t - sum) - y;
        sum = t;
    }
    sum
}

/// Measure of E ∩ x⁻¹E, the overlap appearing in the main accumulation
/// bound. Evaluated on a grid over E's bounding box.
pub fn left_overlap_measure(group: Group, region: &Region, x: Point, spec: QuadSpec) -> Result<f64> {
    let shifted = region.translated(group, x, TranslateSide::LeftInverse);
    let grid = Grid::over(group, region.bbox(), spec)?;
    Ok(measure_on(&grid, &region.intersect(&shifted)))
}

/// Crude per-region quadrature tolerance: boundary-cell measure relative to
/// the region measure. Used as the slack unit in grid-based inequalities.
pub fn grid_tolerance(group: Group, region: &Region, spec: QuadSpec) -> Result<f64> {
    let mu = measure(group, region, spec)?;
    if mu <= 0.0 {
        return Err(Error::ZeroMeasure(region.label().into()));
    }
    let bbox = region.bbox();
    let d = bbox.dim();
    // one layer of cells around the bbox faces, in Haar measure
    let mut boundary = 0.0;
    for i in 0..d {
        let h = (bbox.hi(i) - bbox.lo(i)) / spec.per_axis as f64;
        let mut face = h;
        for j in 0..d {
            if j != i {
                face *= bbox.hi(j) - bbox.lo(j);
            }
        }
        // affine scale axis: Haar density up to 1/lo
        let dens = match group {
            Group::Affine => 1.0 / bbox.lo(1).max(f64::MIN_POSITIVE),
            _ => 1.0,
        };
        boundary += 2.0 * face * dens;
    }
    Ok((boundary / mu).min(1.0))
}
