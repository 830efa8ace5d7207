//! Ruppert-style Delaunay refinement.

use std::collections::{HashSet, VecDeque};

use crate::error::{Error, Result};
use crate::geometry::{orient, BoundaryPolyline, Point};

use super::cdt::{incircle, Located, Triangulation, NONE};
use super::{DEFAULT_MAX_VERTICES, MIN_ANGLE_DEG};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MeshOptions {
    /// Upper bound on every mesh edge length.
    pub target_h: f64,
    pub max_vertices: usize,
}

impl Default for MeshOptions {
    fn default() -> Self {
        Self {
            target_h: 0.1,
            max_vertices: DEFAULT_MAX_VERTICES,
        }
    }
}

struct Refiner<'a> {
    tri: &'a mut Triangulation,
    poly: &'a BoundaryPolyline,
    opts: &'a MeshOptions,
    /// circumradius / shortest edge above which a triangle is skinny
    max_ratio: f64,
    /// input corners sharper than 60°, where the angle bound is not enforced
    acute: Vec<bool>,
    segments: VecDeque<usize>,
    triangles: VecDeque<usize>,
    give_up: HashSet<[usize; 3]>,
}

pub(super) fn refine(
    tri: &mut Triangulation,
    poly: &BoundaryPolyline,
    opts: &MeshOptions,
) -> Result<()> {
    let n = poly.len();
    let acute = (0..n)
        .map(|j| {
            let a = poly.vertex(j + n - 1) - poly.vertex(j);
            let b = poly.vertex(j + 1) - poly.vertex(j);
            // interior angle at j (interior on the left of the ccw loop)
            let mut ang = b.perp(&a).atan2(b.dot(&a));
            if ang < 0.0 {
                ang += 2.0 * std::f64::consts::PI;
            }
            ang < std::f64::consts::PI / 3.0
        })
        .collect();
    let mut r = Refiner {
        tri,
        poly,
        opts,
        max_ratio: 1.0 / (2.0 * MIN_ANGLE_DEG.to_radians().sin()),
        acute,
        segments: (0..n).collect(),
        triangles: VecDeque::new(),
        give_up: HashSet::new(),
    };
    r.split_pending_segments()?;
    r.triangles = (0..r.tri.tris.len()).collect();
    while let Some(t) = r.triangles.pop_front() {
        r.fix_triangle(t)?;
        r.split_pending_segments()?;
    }
    Ok(())
}

impl Refiner<'_> {
    fn check_budget(&self) -> Result<()> {
        if self.tri.n_vertices() >= self.opts.max_vertices {
            return Err(Error::MeshFailure(format!(
                "refinement exceeded the vertex budget of {}",
                self.opts.max_vertices
            )));
        }
        Ok(())
    }

    fn segment_needs_split(&self, a: usize) -> bool {
        let b = self.tri.bnext[a];
        if b == NONE {
            return false;
        }
        let (pa, pb) = (self.tri.pts[a], self.tri.pts[b]);
        if (pb - pa).norm() > self.opts.target_h {
            return true;
        }
        match self.tri.segment_triangle(a) {
            Some((t, i)) => {
                let c = self.tri.pts[self.tri.tris[t].v[i]];
                encroaches(c, pa, pb)
            }
            None => false,
        }
    }

    fn split_pending_segments(&mut self) -> Result<()> {
        while let Some(a) = self.segments.pop_front() {
            if self.segment_needs_split(a) {
                self.split_segment(a)?;
            }
        }
        Ok(())
    }

    /// Splits boundary segment `a → bnext[a]` at its midpoint along the
    /// polyline edge it belongs to.
    fn split_segment(&mut self, a: usize) -> Result<()> {
        self.check_budget()?;
        let b = self.tri.bnext[a];
        let (edge, fa) = self.tri.bcoord[a].expect("segment start is on the boundary");
        let fb = match self.tri.bcoord[b] {
            Some((e, f)) if e == edge => f,
            _ => 1.0,
        };
        let frac = 0.5 * (fa + fb);
        let (q0, q1) = self.poly.edge(edge);
        let p = q0 + (q1 - q0) * frac;
        let (t, i) = self
            .tri
            .segment_triangle(a)
            .ok_or_else(|| Error::MeshFailure("segment lost its triangle".into()))?;
        let (v, touched) = self.tri.insert_on_edge(t, i, p, Some((edge, frac)));
        self.after_insert(v, touched);
        Ok(())
    }

    fn after_insert(&mut self, v: usize, touched: Vec<usize>) {
        self.triangles.extend(touched);
        // segments whose adjacent apex may now encroach
        for t in self.tri.triangles_around(v) {
            self.triangles.push_back(t);
            let tri = self.tri.tris[t];
            for i in 0..3 {
                if tri.n[i] == NONE {
                    self.segments.push_back(tri.v[(i + 1) % 3]);
                }
            }
        }
    }

    fn classify(&self, t: usize) -> Option<Point> {
        let [a, b, c] = self.tri.tris[t].v;
        let p = [self.tri.pts[a], self.tri.pts[b], self.tri.pts[c]];
        let l2 = [
            (p[1] - p[2]).norm_squared(),
            (p[2] - p[0]).norm_squared(),
            (p[0] - p[1]).norm_squared(),
        ];
        let longest = l2.iter().copied().fold(0.0, f64::max).sqrt();
        let (short_i, shortest2) = l2
            .iter()
            .copied()
            .enumerate()
            .fold((0, f64::MAX), |acc, (i, x)| if x < acc.1 { (i, x) } else { acc });
        let cc = circumcenter(p[0], p[1], p[2])?;
        let radius = (cc - p[0]).norm();
        let too_big = longest > self.opts.target_h;
        let mut skinny = radius > self.max_ratio * shortest2.sqrt();
        if skinny {
            // the smallest angle sits opposite the shortest edge
            let apex = self.tri.tris[t].v[short_i];
            if apex < self.acute.len() && self.acute[apex] {
                skinny = false;
            }
        }
        (too_big || skinny).then_some(cc)
    }

    fn fix_triangle(&mut self, t: usize) -> Result<()> {
        let mut key = self.tri.tris[t].v;
        key.sort_unstable();
        if self.give_up.contains(&key) {
            return Ok(());
        }
        let Some(cc) = self.classify(t) else {
            return Ok(());
        };
        self.check_budget()?;
        match self.tri.locate(t, cc) {
            Located::Outside(tb, i) => {
                let a = self.tri.tris[tb].v[(i + 1) % 3];
                self.split_segment(a)?;
                self.triangles.push_back(t);
            }
            Located::OnVertex(_) => {
                self.give_up.insert(key);
            }
            Located::OnEdge(te, i) if self.tri.tris[te].n[i] == NONE => {
                let a = self.tri.tris[te].v[(i + 1) % 3];
                self.split_segment(a)?;
                self.triangles.push_back(t);
            }
            located => {
                let host = match located {
                    Located::Inside(h) | Located::OnEdge(h, _) => h,
                    _ => unreachable!(),
                };
                let encroached = self.encroached_by(cc, host);
                if !encroached.is_empty() {
                    for a in encroached {
                        if self.tri.bnext[a] != NONE {
                            self.split_segment(a)?;
                        }
                    }
                    self.triangles.push_back(t);
                    return Ok(());
                }
                let (v, touched) = match located {
                    Located::Inside(h) => self.tri.insert_in_triangle(h, cc),
                    Located::OnEdge(h, i) => self.tri.insert_on_edge(h, i, cc, None),
                    _ => unreachable!(),
                };
                self.after_insert(v, touched);
            }
        }
        Ok(())
    }

    /// Boundary segments on the Delaunay cavity of `p` whose diametral
    /// circle contains `p`. Returned as segment start vertices.
    fn encroached_by(&self, p: Point, host: usize) -> Vec<usize> {
        let mut seen = HashSet::new();
        let mut stack = vec![host];
        let mut out = Vec::new();
        seen.insert(host);
        while let Some(t) = stack.pop() {
            let tri = self.tri.tris[t];
            for i in 0..3 {
                let u = tri.n[i];
                let (a, b) = (tri.v[(i + 1) % 3], tri.v[(i + 2) % 3]);
                if u == NONE {
                    if encroaches(p, self.tri.pts[a], self.tri.pts[b]) {
                        out.push(a);
                    }
                    continue;
                }
                if seen.contains(&u) {
                    continue;
                }
                let [x, y, z] = self.tri.tris[u].v;
                if incircle(self.tri.pts[x], self.tri.pts[y], self.tri.pts[z], p) > 0.0 {
                    seen.insert(u);
                    stack.push(u);
                }
            }
        }
        out
    }
}

/// `c` lies strictly inside the circle with diameter `ab`.
fn encroaches(c: Point, a: Point, b: Point) -> bool {
    (a - c).dot(&(b - c)) < 0.0
}

fn circumcenter(a: Point, b: Point, c: Point) -> Option<Point> {
    let ab = b - a;
    let ac = c - a;
    let d = 2.0 * ab.perp(&ac);
    if d == 0.0 || orient(a, b, c) == 0.0 {
        return None;
    }
    let (ab2, ac2) = (ab.norm_squared(), ac.norm_squared());
    let off = Point::new(ac.y * ab2 - ab.y * ac2, ab.x * ac2 - ac.x * ab2) / d;
    Some(a + off)
}
