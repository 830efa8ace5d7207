//! Quality triangle meshes of simple polygons.
//!
//! The pipeline is: simplicity check → ear-clipping triangulation → Lawson
//! flips to the constrained Delaunay triangulation → Ruppert refinement
//! (segment splitting + circumcenter insertion) until every triangle meets the
//! size bound and the 20° minimum-angle bound.

mod cdt;
mod refine;

use std::fmt::Write as _;

use crate::error::{Error, Result};
use crate::geometry::{orient, BoundaryPolyline, Point};

pub use refine::MeshOptions;

/// Default refinement vertex budget.
pub const DEFAULT_MAX_VERTICES: usize = 50_000;

/// Minimum-angle target of the refinement, in degrees.
pub const MIN_ANGLE_DEG: f64 = 20.0;

/// A mesh vertex on the boundary, located on the source polyline.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BoundaryNode {
    pub vertex: usize,
    /// Index of the polyline edge `Q_j → Q_{j+1}` the node lies on.
    pub poly_edge: usize,
    /// Fraction along that edge, `0` exactly at `Q_j`, in `[0, 1)`.
    pub frac: f64,
}

/// Triangulated polygon interior.
///
/// Mesh vertex `i` is polyline vertex `i` for every `i < polyline.len()`;
/// refinement vertices (boundary or interior) follow.
#[derive(Debug, Clone, PartialEq)]
pub struct TriangleMesh {
    pub vertices: Vec<Point>,
    /// Counterclockwise vertex triples.
    pub triangles: Vec<[usize; 3]>,
    /// Boundary loop in counterclockwise order; edge `k` joins node `k` and
    /// node `k + 1` (cyclically), interior on the left.
    pub boundary: Vec<BoundaryNode>,
    /// Polyline vertex index → mesh vertex index.
    pub boundary_vertex_map: Vec<usize>,
}

impl TriangleMesh {
    pub fn n_vertices(&self) -> usize {
        self.vertices.len()
    }

    pub fn n_triangles(&self) -> usize {
        self.triangles.len()
    }

    /// Directed boundary edges, counterclockwise.
    pub fn boundary_edges(&self) -> Vec<[usize; 2]> {
        let m = self.boundary.len();
        (0..m)
            .map(|k| [self.boundary[k].vertex, self.boundary[(k + 1) % m].vertex])
            .collect()
    }

    /// Undirected edges, each once, sorted.
    pub fn edges(&self) -> Vec<[usize; 2]> {
        let mut edges: Vec<[usize; 2]> = self
            .triangles
            .iter()
            .flat_map(|t| {
                (0..3).map(move |i| {
                    let (a, b) = (t[i], t[(i + 1) % 3]);
                    [a.min(b), a.max(b)]
                })
            })
            .collect();
        edges.sort_unstable();
        edges.dedup();
        edges
    }

    pub fn triangle_area(&self, t: usize) -> f64 {
        let [a, b, c] = self.triangles[t];
        let (a, b, c) = (self.vertices[a], self.vertices[b], self.vertices[c]);
        0.5 * (b - a).perp(&(c - a))
    }

    pub fn area(&self) -> f64 {
        (0..self.n_triangles()).map(|t| self.triangle_area(t)).sum()
    }

    /// Smallest interior angle of triangle `t`, in degrees.
    pub fn min_angle_deg(&self, t: usize) -> f64 {
        let [a, b, c] = self.triangles[t];
        let p = [self.vertices[a], self.vertices[b], self.vertices[c]];
        (0..3)
            .map(|i| {
                let u = p[(i + 1) % 3] - p[i];
                let v = p[(i + 2) % 3] - p[i];
                u.perp(&v).abs().atan2(u.dot(&v)).to_degrees()
            })
            .fold(f64::MAX, f64::min)
    }

    pub fn max_edge_length(&self) -> f64 {
        self.edges()
            .iter()
            .map(|[a, b]| (self.vertices[*a] - self.vertices[*b]).norm())
            .fold(0.0, f64::max)
    }

    /// Same connectivity with every vertex moved by `disp`.
    pub fn displaced(&self, disp: &[Point]) -> TriangleMesh {
        assert_eq!(disp.len(), self.vertices.len());
        TriangleMesh {
            vertices: self.vertices.iter().zip(disp).map(|(v, d)| v + d).collect(),
            ..self.clone()
        }
    }

    /// Uniformly scaled copy.
    pub fn scaled(&self, t: f64) -> TriangleMesh {
        TriangleMesh {
            vertices: self.vertices.iter().map(|v| v * t).collect(),
            ..self.clone()
        }
    }

    /// Mesh vertex displacements induced by moving polyline vertex `j` by
    /// `poly_disp[j]`: boundary nodes interpolate linearly along their
    /// polyline edge, interior vertices stay put.
    pub fn boundary_displacement(&self, poly_disp: &[Point]) -> Vec<Point> {
        let n = poly_disp.len();
        let mut disp = vec![Point::zeros(); self.vertices.len()];
        for node in &self.boundary {
            let j = node.poly_edge;
            disp[node.vertex] =
                poly_disp[j] * (1.0 - node.frac) + poly_disp[(j + 1) % n] * node.frac;
        }
        disp
    }

    /// OFF-style text: `OFF`, counts line, vertex lines, triangle lines.
    pub fn to_off(&self) -> String {
        let mut out = String::from("OFF\n");
        let _ = writeln!(out, "{} {} 0", self.vertices.len(), self.triangles.len());
        for v in &self.vertices {
            let _ = writeln!(out, "{:.17e} {:.17e} 0", v.x, v.y);
        }
        for t in &self.triangles {
            let _ = writeln!(out, "3 {} {} {}", t[0], t[1], t[2]);
        }
        out
    }
}

/// Fails with `SelfIntersection(i, j)` if two non-adjacent edges of the
/// polyline touch, or two adjacent edges fold back onto each other.
pub fn check_simple(b: &BoundaryPolyline) -> Result<()> {
    let n = b.len();
    if n < 3 {
        return Err(Error::DegenerateBoundary("fewer than 3 vertices".into()));
    }
    // bounding boxes prune most pairs
    let boxes: Vec<(Point, Point)> = (0..n)
        .map(|i| {
            let (a, c) = b.edge(i);
            (a.inf(&c), a.sup(&c))
        })
        .collect();
    for i in 0..n {
        let (a, c) = b.edge(i);
        // adjacent edge folding back over edge i
        let d = b.vertex(i + 2);
        if orient(a, c, d) == 0.0 && (d - c).dot(&(a - c)) > 0.0 {
            return Err(Error::SelfIntersection(i, (i + 1) % n));
        }
        for j in i + 2..n {
            if i == 0 && j == n - 1 {
                continue;
            }
            let (lo_i, hi_i) = boxes[i];
            let (lo_j, hi_j) = boxes[j];
            if hi_i.x < lo_j.x || hi_j.x < lo_i.x || hi_i.y < lo_j.y || hi_j.y < lo_i.y {
                continue;
            }
            let (p, q) = b.edge(j);
            if segments_intersect(a, c, p, q) {
                return Err(Error::SelfIntersection(i, j));
            }
        }
    }
    Ok(())
}

/// Closed-segment intersection by exact orientation signs.
pub(crate) fn segments_intersect(a: Point, b: Point, c: Point, d: Point) -> bool {
    let o1 = orient(a, b, c).signum_or_zero();
    let o2 = orient(a, b, d).signum_or_zero();
    let o3 = orient(c, d, a).signum_or_zero();
    let o4 = orient(c, d, b).signum_or_zero();
    if o1 * o2 < 0 && o3 * o4 < 0 {
        return true;
    }
    let on = |p: Point, q: Point, r: Point| {
        r.x >= p.x.min(q.x) && r.x <= p.x.max(q.x) && r.y >= p.y.min(q.y) && r.y <= p.y.max(q.y)
    };
    (o1 == 0 && on(a, b, c))
        || (o2 == 0 && on(a, b, d))
        || (o3 == 0 && on(c, d, a))
        || (o4 == 0 && on(c, d, b))
}

trait SignumOrZero {
    fn signum_or_zero(self) -> i8;
}

impl SignumOrZero for f64 {
    fn signum_or_zero(self) -> i8 {
        if self > 0.0 {
            1
        } else if self < 0.0 {
            -1
        } else {
            0
        }
    }
}

/// Quality mesh of the polygon interior with edges no longer than `target_h`.
pub fn triangulate(b: &BoundaryPolyline, target_h: f64) -> Result<TriangleMesh> {
    triangulate_with(
        b,
        &MeshOptions {
            target_h,
            ..MeshOptions::default()
        },
    )
}

pub fn triangulate_with(b: &BoundaryPolyline, opts: &MeshOptions) -> Result<TriangleMesh> {
    if !(opts.target_h > 0.0 && opts.target_h.is_finite()) {
        return Err(Error::InvalidInput(format!(
            "target_h must be positive, got {}",
            opts.target_h
        )));
    }
    if !b.is_ccw() {
        return Err(Error::MeshFailure("polyline is not counterclockwise".into()));
    }
    check_simple(b)?;
    let mut tri = cdt::Triangulation::from_polygon(b)?;
    tri.make_delaunay();
    refine::refine(&mut tri, b, opts)?;
    tri.into_mesh(b.len())
}
