//! Discrete support functions on a uniform angle grid, the polygon they
//! reconstruct, and the diameter of planar polylines.
//!
//! Conventions used throughout the crate:
//! - angles are `theta_i = i * h` with `h = 2π / n`, indices are cyclic mod `n`;
//! - polylines are implicitly closed and counterclockwise, so the outward
//!   normal of edge `a → b` is the edge direction rotated clockwise.

use std::f64::consts::PI;
use std::fmt::Write as _;

use nalgebra::Vector2;
use serde::{Deserialize, Serialize};

use crate::constraints::{ConstraintRow, RowTag, Sense};
use crate::error::{Error, Result};

pub type Point = Vector2<f64>;

/// Relative tolerance for membership in the diameter-point set.
pub const DEFAULT_PAIR_TOL: f64 = 1e-8;

/// Uniform grid `theta_i = 2πi/n` on the circle, `n` even and at least 8.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct AngleGrid {
    n_angles: usize,
}

impl AngleGrid {
    pub fn new(n_angles: usize) -> Result<Self> {
        if n_angles < 8 || !n_angles.is_multiple_of(2) {
            return Err(Error::InvalidInput(format!(
                "angle count must be even and >= 8, got {n_angles}"
            )));
        }
        Ok(Self { n_angles })
    }

    pub fn len(&self) -> usize {
        self.n_angles
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn step(&self) -> f64 {
        2.0 * PI / self.n_angles as f64
    }

    pub fn theta(&self, i: usize) -> f64 {
        (i % self.n_angles) as f64 * self.step()
    }

    /// Index of the antipodal angle `theta_i + π`.
    pub fn opposite(&self, i: usize) -> usize {
        (i + self.n_angles / 2) % self.n_angles
    }
}

/// Support values `p_i = p(theta_i)`.
#[derive(Debug, Clone, PartialEq)]
pub struct SupportVector {
    grid: AngleGrid,
    values: Vec<f64>,
}

impl Serialize for SupportVector {
    fn serialize<S: serde::Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        self.values.serialize(s)
    }
}

impl SupportVector {
    /// Builds a support vector; all values must be finite and strictly positive.
    pub fn new(values: Vec<f64>) -> Result<Self> {
        let grid = AngleGrid::new(values.len())?;
        if let Some((i, v)) = values
            .iter()
            .enumerate()
            .find(|(_, v)| !v.is_finite() || **v <= 0.0)
        {
            return Err(Error::InvalidInput(format!(
                "support value p[{i}] = {v} must be finite and positive"
            )));
        }
        Ok(Self { grid, values })
    }

    /// Samples a support function `p(theta)` on an `n`-point grid.
    pub fn from_fn(n: usize, p: impl Fn(f64) -> f64) -> Result<Self> {
        let grid = AngleGrid::new(n)?;
        Self::new((0..n).map(|i| p(grid.theta(i))).collect())
    }

    /// The disk of radius `r` centred at the origin.
    pub fn disk(n: usize, r: f64) -> Result<Self> {
        Self::from_fn(n, |_| r)
    }

    pub fn grid(&self) -> AngleGrid {
        self.grid
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn into_values(self) -> Vec<f64> {
        self.values
    }

    pub fn max(&self) -> f64 {
        self.values.iter().copied().fold(f64::MIN, f64::max)
    }

    /// Central-difference derivative `(p_{i+1} - p_{i-1}) / 2h`.
    pub fn derivative(&self, i: usize) -> f64 {
        let n = self.len();
        (self.values[(i + 1) % n] - self.values[(i + n - 1) % n]) / (2.0 * self.grid.step())
    }

    pub fn convexity_residuals(&self) -> Vec<f64> {
        convexity_residuals(&self.values)
    }

    /// Largest width `max_i (p_i + p_{i+n/2})`.
    pub fn max_width(&self) -> f64 {
        let n = self.len();
        (0..n / 2)
            .map(|i| self.values[i] + self.values[i + n / 2])
            .fold(f64::MIN, f64::max)
    }

    pub fn to_json(&self) -> String {
        serde_json::json!({ "support": self.values }).to_string()
    }

    pub fn from_json(text: &str) -> Result<Self> {
        #[derive(Deserialize)]
        struct Wire {
            support: Vec<f64>,
        }
        let wire: Wire = serde_json::from_str(text)
            .map_err(|e| Error::InvalidInput(format!("support json: {e}")))?;
        Self::new(wire.support)
    }
}

/// Convexity residuals `p_i + (p_{i+1} + p_{i-1} - 2 p_i) / h²`, indices mod `n`.
///
/// Linear in `p`; nonnegative residuals everywhere is the discrete `p + p'' >= 0`.
pub fn convexity_residuals(p: &[f64]) -> Vec<f64> {
    let n = p.len();
    let h = 2.0 * PI / n as f64;
    let inv_h2 = 1.0 / (h * h);
    (0..n)
        .map(|i| {
            let next = p[(i + 1) % n];
            let prev = p[(i + n - 1) % n];
            p[i] + (next + prev - 2.0 * p[i]) * inv_h2
        })
        .collect()
}

/// Width rows `p_i + p_{i+n/2} <= d` for `i < n/2` and the anchor row
/// `p_0 + p_{n/2} >= d` that pins the diameter to exactly `d`.
pub fn diameter_constraints(n: usize, d: f64) -> Vec<ConstraintRow> {
    let half = n / 2;
    let mut rows: Vec<ConstraintRow> = (0..half)
        .map(|i| ConstraintRow {
            coeffs: vec![(i, 1.0), (i + half, 1.0)],
            bound: d,
            sense: Sense::Le,
            tag: RowTag::Width,
        })
        .collect();
    rows.push(ConstraintRow {
        coeffs: vec![(0, 1.0), (half, 1.0)],
        bound: d,
        sense: Sense::Ge,
        tag: RowTag::Anchor,
    });
    rows
}

/// Closed polygon `(x(theta_i), y(theta_i))` from the support parametrization
/// `x = p cos θ - p' sin θ`, `y = p sin θ + p' cos θ`.
pub fn reconstruct_boundary(sv: &SupportVector) -> Result<BoundaryPolyline> {
    let grid = sv.grid();
    let vertices = (0..sv.len())
        .map(|i| {
            let (s, c) = grid.theta(i).sin_cos();
            let p = sv.values()[i];
            let dp = sv.derivative(i);
            Point::new(p * c - dp * s, p * s + dp * c)
        })
        .collect();
    BoundaryPolyline::new(vertices)
}

/// Implicitly closed, ordered vertex loop.
#[derive(Debug, Clone, PartialEq)]
pub struct BoundaryPolyline {
    vertices: Vec<Point>,
}

impl BoundaryPolyline {
    /// Validates vertex count and that consecutive vertices are distinct
    /// (relative to the bounding-box diagonal).
    pub fn new(vertices: Vec<Point>) -> Result<Self> {
        if vertices.len() < 3 {
            return Err(Error::DegenerateBoundary(format!(
                "need at least 3 vertices, got {}",
                vertices.len()
            )));
        }
        if vertices.iter().any(|v| !v.x.is_finite() || !v.y.is_finite()) {
            return Err(Error::DegenerateBoundary("non-finite vertex".into()));
        }
        let scale = bbox_diagonal(&vertices);
        let n = vertices.len();
        for i in 0..n {
            let j = (i + 1) % n;
            if (vertices[j] - vertices[i]).norm() <= 1e-12 * scale {
                return Err(Error::DegenerateBoundary(format!(
                    "consecutive vertices {i} and {j} coincide"
                )));
            }
        }
        Ok(Self { vertices })
    }

    pub fn vertices(&self) -> &[Point] {
        &self.vertices
    }

    pub fn len(&self) -> usize {
        self.vertices.len()
    }

    pub fn is_empty(&self) -> bool {
        self.vertices.is_empty()
    }

    pub fn vertex(&self, i: usize) -> Point {
        self.vertices[i % self.vertices.len()]
    }

    /// Edge `i` runs from vertex `i` to vertex `i + 1`.
    pub fn edge(&self, i: usize) -> (Point, Point) {
        (self.vertex(i), self.vertex(i + 1))
    }

    pub fn edge_length(&self, i: usize) -> f64 {
        let (a, b) = self.edge(i);
        (b - a).norm()
    }

    /// Outward unit normal of edge `i` (for counterclockwise orientation).
    pub fn edge_normal(&self, i: usize) -> Point {
        let (a, b) = self.edge(i);
        let t = (b - a).normalize();
        Point::new(t.y, -t.x)
    }

    /// Shoelace signed area, positive for counterclockwise loops.
    pub fn signed_area(&self) -> f64 {
        let n = self.len();
        0.5 * (0..n)
            .map(|i| {
                let (a, b) = self.edge(i);
                a.x * b.y - a.y * b.x
            })
            .sum::<f64>()
    }

    pub fn area(&self) -> f64 {
        self.signed_area().abs()
    }

    pub fn perimeter(&self) -> f64 {
        (0..self.len()).map(|i| self.edge_length(i)).sum()
    }

    pub fn is_ccw(&self) -> bool {
        self.signed_area() > 0.0
    }

    /// Convex in the weak sense: every corner turns left (or goes straight),
    /// by exact orientation predicates.
    pub fn is_convex(&self) -> bool {
        let n = self.len();
        self.is_ccw()
            && (0..n).all(|i| {
                orient(self.vertex(i + n - 1), self.vertex(i), self.vertex(i + 1)) >= 0.0
            })
    }

    pub fn scale(&self) -> f64 {
        bbox_diagonal(&self.vertices)
    }

    pub fn scaled(&self, t: f64) -> Result<Self> {
        Self::new(self.vertices.iter().map(|v| v * t).collect())
    }

    pub fn translated(&self, c: Point) -> Result<Self> {
        Self::new(self.vertices.iter().map(|v| v + c).collect())
    }

    /// One `x,y` row per vertex, no header.
    pub fn to_csv(&self) -> String {
        let mut out = String::new();
        for v in &self.vertices {
            let _ = writeln!(out, "{:.17e},{:.17e}", v.x, v.y);
        }
        out
    }

    pub fn from_csv(text: &str) -> Result<Self> {
        let mut vertices = Vec::new();
        for (lineno, line) in text.lines().enumerate() {
            let line = line.trim();
            if line.is_empty() {
                continue;
            }
            let mut parts = line.split(',');
            let mut next = || -> Result<f64> {
                parts
                    .next()
                    .and_then(|s| s.trim().parse::<f64>().ok())
                    .ok_or_else(|| {
                        Error::InvalidInput(format!("csv line {}: expected x,y", lineno + 1))
                    })
            };
            let x = next()?;
            let y = next()?;
            vertices.push(Point::new(x, y));
        }
        Self::new(vertices)
    }

    /// Closed SVG path in a square viewBox around the shape, y axis pointing up.
    pub fn to_svg(&self) -> String {
        let (lo, hi) = bbox(&self.vertices);
        let pad = 0.05 * (hi - lo).norm();
        let (x0, y0) = (lo.x - pad, lo.y - pad);
        let w = hi.x - lo.x + 2.0 * pad;
        let h = hi.y - lo.y + 2.0 * pad;
        let mut path = String::new();
        for (i, v) in self.vertices.iter().enumerate() {
            let cmd = if i == 0 { 'M' } else { 'L' };
            // flip y so the picture is not mirrored
            let _ = write!(path, "{cmd}{:.6} {:.6} ", v.x, y0 + h - (v.y - y0));
        }
        path.push('Z');
        format!(
            "<svg xmlns=\"http://www.w3.org/2000/svg\" viewBox=\"{x0:.6} {y0:.6} {w:.6} {h:.6}\">\n\
             <path d=\"{path}\" fill=\"#cfe0f3\" stroke=\"#1f4e79\" stroke-width=\"{sw:.6}\"/>\n</svg>\n",
            sw = 0.004 * w.max(h)
        )
    }
}

/// Diameter of a polyline together with the vertex pairs that realise it.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct DiameterReport {
    pub diameter: f64,
    pub pairs: Vec<(usize, usize)>,
    pub pair_tol: f64,
}

pub fn compute_diameter(b: &BoundaryPolyline) -> Result<DiameterReport> {
    compute_diameter_with_tol(b, DEFAULT_PAIR_TOL)
}

/// Rotating calipers over antipodal pairs when the polyline is convex,
/// all-pairs scan otherwise.
pub fn compute_diameter_with_tol(b: &BoundaryPolyline, pair_tol: f64) -> Result<DiameterReport> {
    let candidates = if b.is_convex() {
        antipodal_pairs(b.vertices())
    } else {
        all_pairs(b.len())
    };
    report_from_candidates(b.vertices(), candidates, pair_tol)
}

/// All-pairs diameter, independent of convexity. Quadratic.
pub fn diameter_brute_force(b: &BoundaryPolyline) -> Result<DiameterReport> {
    report_from_candidates(b.vertices(), all_pairs(b.len()), DEFAULT_PAIR_TOL)
}

fn all_pairs(n: usize) -> Vec<(usize, usize)> {
    (0..n)
        .flat_map(|i| (i + 1..n).map(move |j| (i, j)))
        .collect()
}

/// Antipodal vertex pairs of a counterclockwise convex polygon.
fn antipodal_pairs(v: &[Point]) -> Vec<(usize, usize)> {
    let n = v.len();
    let at = |i: usize| v[i % n];
    let mut out = Vec::with_capacity(2 * n);
    let mut j = 1;
    for i in 0..n {
        let e = at(i + 1) - at(i);
        // advance while the next vertex is strictly farther from edge i's line
        let mut guard = 0;
        while e.perp(&(at(j + 1) - at(j))) > 0.0 && guard < n {
            j = (j + 1) % n;
            guard += 1;
        }
        out.push((i, j));
        out.push(((i + 1) % n, j));
        // parallel edge: both its endpoints are antipodal to edge i
        if e.perp(&(at(j + 1) - at(j))) == 0.0 {
            out.push((i, (j + 1) % n));
            out.push(((i + 1) % n, (j + 1) % n));
        }
    }
    out
}

fn report_from_candidates(
    v: &[Point],
    candidates: Vec<(usize, usize)>,
    pair_tol: f64,
) -> Result<DiameterReport> {
    let dist = |(i, j): (usize, usize)| (v[i] - v[j]).norm();
    let diameter = candidates.iter().map(|&c| dist(c)).fold(0.0, f64::max);
    if diameter <= 0.0 {
        return Err(Error::DegenerateBoundary(
            "fewer than two distinct vertices".into(),
        ));
    }
    let mut pairs: Vec<(usize, usize)> = candidates
        .into_iter()
        .filter(|&c| dist(c) >= diameter * (1.0 - pair_tol))
        .map(|(i, j)| if i < j { (i, j) } else { (j, i) })
        .collect();
    pairs.sort_unstable();
    pairs.dedup();
    Ok(DiameterReport {
        diameter,
        pairs,
        pair_tol,
    })
}

/// One-sided derivative of the diameter under the deformation `x + tV(x)`:
/// `(1/D) max over diameter pairs of <Q_i - Q_j, V_i - V_j>`.
pub fn diameter_directional_derivative(
    b: &BoundaryPolyline,
    rep: &DiameterReport,
    field: &[Point],
) -> Result<f64> {
    if field.len() != b.len() {
        return Err(Error::InvalidInput(format!(
            "field has {} vectors for {} vertices",
            field.len(),
            b.len()
        )));
    }
    rep.pairs
        .iter()
        .map(|&(i, j)| (b.vertex(i) - b.vertex(j)).dot(&(field[i] - field[j])))
        .reduce(f64::max)
        .map(|m| m / rep.diameter)
        .ok_or(Error::EmptyDiameterSet)
}

/// Deformation data attached to the vertices of a polyline.
///
/// `Normal` gives the normal velocity at each vertex, interpolated linearly
/// along edges; `Vector` gives a full displacement per vertex, so along an
/// edge the normal velocity is the interpolated vector dotted with the edge's
/// normal.
#[derive(Debug, Clone, PartialEq)]
pub enum BoundaryField {
    Normal(Vec<f64>),
    Vector(Vec<Point>),
}

impl BoundaryField {
    pub fn len(&self) -> usize {
        match self {
            BoundaryField::Normal(v) => v.len(),
            BoundaryField::Vector(v) => v.len(),
        }
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// Normal velocity at the start and end of polyline edge `e`.
    pub fn edge_normal_velocity(&self, b: &BoundaryPolyline, e: usize) -> (f64, f64) {
        let n = b.len();
        match self {
            BoundaryField::Normal(v) => (v[e % n], v[(e + 1) % n]),
            BoundaryField::Vector(v) => {
                let nrm = b.edge_normal(e);
                (v[e % n].dot(&nrm), v[(e + 1) % n].dot(&nrm))
            }
        }
    }

    /// Vectors sampled from a plane field at the polyline vertices.
    pub fn from_vector_fn(b: &BoundaryPolyline, f: impl Fn(Point) -> Point) -> Self {
        BoundaryField::Vector(b.vertices().iter().map(|&v| f(v)).collect())
    }

    /// Indicator of one vertex; along the boundary this is the hat function
    /// that is 1 at vertex `i`, 0 at every other vertex.
    pub fn hat(n: usize, i: usize) -> Self {
        let mut v = vec![0.0; n];
        v[i] = 1.0;
        BoundaryField::Normal(v)
    }
}

/// Orientation of `c` relative to the directed line `a → b`, exact in sign.
pub fn orient(a: Point, b: Point, c: Point) -> f64 {
    robust::orient2d(coord(a), coord(b), coord(c))
}

pub(crate) fn coord(p: Point) -> robust::Coord<f64> {
    robust::Coord { x: p.x, y: p.y }
}

fn bbox(v: &[Point]) -> (Point, Point) {
    let mut lo = Point::new(f64::MAX, f64::MAX);
    let mut hi = Point::new(f64::MIN, f64::MIN);
    for p in v {
        lo = lo.inf(p);
        hi = hi.sup(p);
    }
    (lo, hi)
}

fn bbox_diagonal(v: &[Point]) -> f64 {
    let (lo, hi) = bbox(v);
    (hi - lo).norm()
}
