//! Triangle/neighbor data structure restricted to a polygon interior.
//!
//! Every edge without a neighbor is a boundary segment; those are the only
//! constrained edges, so Lawson flips never touch them.

use std::collections::HashMap;

use crate::error::{Error, Result};
use crate::geometry::{coord, orient, BoundaryPolyline, Point};

use super::{BoundaryNode, TriangleMesh};

pub(super) const NONE: usize = usize::MAX;

/// `n[i]` is the neighbor across the edge opposite `v[i]`, i.e. the edge
/// `(v[i+1], v[i+2])`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub(super) struct Tri {
    pub v: [usize; 3],
    pub n: [usize; 3],
}

impl Tri {
    pub fn local(&self, vertex: usize) -> Option<usize> {
        self.v.iter().position(|&x| x == vertex)
    }

    pub fn local_neighbor(&self, tri: usize) -> Option<usize> {
        self.n.iter().position(|&x| x == tri)
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub(super) enum Located {
    Inside(usize),
    /// On the edge opposite local vertex `.1` of triangle `.0`.
    OnEdge(usize, usize),
    OnVertex(usize),
    /// The straight walk left the domain through boundary edge `.1` of `.0`.
    Outside(usize, usize),
}

#[derive(Debug, Clone)]
pub(super) struct Triangulation {
    pub pts: Vec<Point>,
    pub tris: Vec<Tri>,
    /// Boundary location `(polyline edge, fraction)` per vertex.
    pub bcoord: Vec<Option<(usize, f64)>>,
    /// Next vertex along the counterclockwise boundary, for boundary vertices.
    pub bnext: Vec<usize>,
    pub vert_tri: Vec<usize>,
}

pub(super) fn incircle(a: Point, b: Point, c: Point, d: Point) -> f64 {
    robust::incircle(coord(a), coord(b), coord(c), coord(d))
}

impl Triangulation {
    /// Ear-clipping triangulation of a simple counterclockwise polygon.
    pub fn from_polygon(b: &BoundaryPolyline) -> Result<Self> {
        let n = b.len();
        let pts: Vec<Point> = b.vertices().to_vec();
        let mut prev: Vec<usize> = (0..n).map(|i| (i + n - 1) % n).collect();
        let mut next: Vec<usize> = (0..n).map(|i| (i + 1) % n).collect();
        let mut alive = n;
        let mut faces: Vec<[usize; 3]> = Vec::with_capacity(n - 2);

        let convex = |pts: &[Point], a: usize, c: usize, d: usize| orient(pts[a], pts[c], pts[d]) > 0.0;
        let mut cur = 0;
        let mut since_last_ear = 0;
        while alive > 3 {
            let (a, c) = (prev[cur], next[cur]);
            let mut is_ear = convex(&pts, a, cur, c);
            if is_ear {
                // no remaining non-convex vertex may lie in the closed ear
                let mut k = next[c];
                while k != a {
                    let (kp, kn) = (prev[k], next[k]);
                    if !convex(&pts, kp, k, kn)
                        && orient(pts[a], pts[cur], pts[k]) >= 0.0
                        && orient(pts[cur], pts[c], pts[k]) >= 0.0
                        && orient(pts[c], pts[a], pts[k]) >= 0.0
                    {
                        is_ear = false;
                        break;
                    }
                    k = next[k];
                }
            }
            if is_ear {
                faces.push([a, cur, c]);
                next[a] = c;
                prev[c] = a;
                alive -= 1;
                since_last_ear = 0;
                cur = c;
            } else {
                cur = next[cur];
                since_last_ear += 1;
                if since_last_ear > alive {
                    return Err(Error::MeshFailure("ear clipping found no ear".into()));
                }
            }
        }
        let (a, c) = (prev[cur], next[cur]);
        if orient(pts[a], pts[cur], pts[c]) <= 0.0 {
            return Err(Error::MeshFailure("degenerate final ear".into()));
        }
        faces.push([a, cur, c]);

        let mut tris: Vec<Tri> = faces
            .iter()
            .map(|&v| Tri { v, n: [NONE; 3] })
            .collect();
        let mut half: HashMap<(usize, usize), (usize, usize)> = HashMap::with_capacity(3 * n);
        for (t, tri) in tris.iter().enumerate() {
            for i in 0..3 {
                half.insert((tri.v[(i + 1) % 3], tri.v[(i + 2) % 3]), (t, i));
            }
        }
        for t in 0..tris.len() {
            for i in 0..3 {
                let (p, q) = (tris[t].v[(i + 1) % 3], tris[t].v[(i + 2) % 3]);
                if let Some(&(u, _)) = half.get(&(q, p)) {
                    tris[t].n[i] = u;
                }
            }
        }

        let mut vert_tri = vec![NONE; n];
        for (t, tri) in tris.iter().enumerate() {
            for &v in &tri.v {
                vert_tri[v] = t;
            }
        }
        Ok(Self {
            pts,
            tris,
            bcoord: (0..n).map(|j| Some((j, 0.0))).collect(),
            bnext: (0..n).map(|j| (j + 1) % n).collect(),
            vert_tri,
        })
    }

    pub fn n_vertices(&self) -> usize {
        self.pts.len()
    }

    fn write(&mut self, t: usize, tri: Tri) {
        for &v in &tri.v {
            self.vert_tri[v] = t;
        }
        if t == self.tris.len() {
            self.tris.push(tri);
        } else {
            self.tris[t] = tri;
        }
    }

    fn relink(&mut self, t: usize, old: usize, new: usize) {
        if t == NONE {
            return;
        }
        if let Some(k) = self.tris[t].local_neighbor(old) {
            self.tris[t].n[k] = new;
        }
    }

    /// Edge opposite local `i` of `t` is not locally Delaunay.
    fn is_illegal(&self, t: usize, i: usize) -> bool {
        let u = self.tris[t].n[i];
        if u == NONE {
            return false;
        }
        let j = match self.tris[u].local_neighbor(t) {
            Some(j) => j,
            None => return false,
        };
        let d = self.tris[u].v[j];
        let [a, b, c] = self.tris[t].v;
        incircle(self.pts[a], self.pts[b], self.pts[c], self.pts[d]) > 0.0
    }

    /// Flips the edge opposite local `i` of `t`. Afterwards both triangles
    /// have the former `t.v[i]` at local index 0.
    fn flip(&mut self, t: usize, i: usize) -> (usize, usize) {
        let tt = self.tris[t];
        let u = tt.n[i];
        let uu = self.tris[u];
        let j = uu.local_neighbor(t).expect("neighbor link is symmetric");
        let (p, a, b) = (tt.v[i], tt.v[(i + 1) % 3], tt.v[(i + 2) % 3]);
        let d = uu.v[j];
        let n_ad = uu.n[(j + 1) % 3];
        let n_db = uu.n[(j + 2) % 3];
        let n_bp = tt.n[(i + 1) % 3];
        let n_pa = tt.n[(i + 2) % 3];
        self.write(
            t,
            Tri {
                v: [p, a, d],
                n: [n_ad, u, n_pa],
            },
        );
        self.write(
            u,
            Tri {
                v: [p, d, b],
                n: [n_db, n_bp, t],
            },
        );
        self.relink(n_ad, u, t);
        self.relink(n_bp, t, u);
        (t, u)
    }

    /// Lawson flips until every interior edge is locally Delaunay.
    pub fn make_delaunay(&mut self) {
        let mut stack: Vec<(usize, usize)> = (0..self.tris.len())
            .flat_map(|t| (0..3).map(move |i| (t, i)))
            .collect();
        while let Some((t, i)) = stack.pop() {
            if self.is_illegal(t, i) {
                let (t, u) = self.flip(t, i);
                stack.extend([(t, 0), (t, 2), (u, 0), (u, 1)]);
            }
        }
    }

    /// Restores the Delaunay property around freshly inserted vertex `p`.
    /// `seeds` are triangles that have `p` at local index `.1`.
    fn legalize(&mut self, seeds: Vec<(usize, usize)>, touched: &mut Vec<usize>) {
        let mut stack = seeds;
        while let Some((t, i)) = stack.pop() {
            touched.push(t);
            if self.is_illegal(t, i) {
                let (t, u) = self.flip(t, i);
                stack.push((t, 0));
                stack.push((u, 0));
            }
        }
    }

    fn push_vertex(&mut self, p: Point, bcoord: Option<(usize, f64)>) -> usize {
        self.pts.push(p);
        self.bcoord.push(bcoord);
        self.bnext.push(NONE);
        self.vert_tri.push(NONE);
        self.pts.len() - 1
    }

    /// Inserts `p` strictly inside triangle `t`. Returns the new vertex and
    /// the triangles created or modified.
    pub fn insert_in_triangle(&mut self, t: usize, p: Point) -> (usize, Vec<usize>) {
        let tt = self.tris[t];
        let [a, b, c] = tt.v;
        let [n_a, n_b, n_c] = tt.n;
        let v = self.push_vertex(p, None);
        let t1 = self.tris.len();
        let t2 = t1 + 1;
        self.write(
            t,
            Tri {
                v: [a, b, v],
                n: [t1, t2, n_c],
            },
        );
        self.write(
            t1,
            Tri {
                v: [b, c, v],
                n: [t2, t, n_a],
            },
        );
        self.write(
            t2,
            Tri {
                v: [c, a, v],
                n: [t, t1, n_b],
            },
        );
        self.relink(n_a, t, t1);
        self.relink(n_b, t, t2);
        let mut touched = vec![t, t1, t2];
        self.legalize(vec![(t, 2), (t1, 2), (t2, 2)], &mut touched);
        (v, touched)
    }

    /// Inserts `p` on the edge opposite local `i` of `t`. When that edge is a
    /// boundary segment, `bcoord` records where on the polyline `p` sits.
    pub fn insert_on_edge(
        &mut self,
        t: usize,
        i: usize,
        p: Point,
        bcoord: Option<(usize, f64)>,
    ) -> (usize, Vec<usize>) {
        let tt = self.tris[t];
        let (a, b, c) = (tt.v[i], tt.v[(i + 1) % 3], tt.v[(i + 2) % 3]);
        let n_b = tt.n[(i + 1) % 3]; // across (c, a)
        let n_c = tt.n[(i + 2) % 3]; // across (a, b)
        let u = tt.n[i];
        let v = self.push_vertex(p, bcoord);
        let t1 = self.tris.len();
        if u == NONE {
            // boundary segment b → c becomes b → v → c
            self.bnext[b] = v;
            self.bnext[v] = c;
            self.write(
                t,
                Tri {
                    v: [a, b, v],
                    n: [NONE, t1, n_c],
                },
            );
            self.write(
                t1,
                Tri {
                    v: [a, v, c],
                    n: [NONE, n_b, t],
                },
            );
            self.relink(n_b, t, t1);
            let mut touched = vec![t, t1];
            self.legalize(vec![(t, 2), (t1, 1)], &mut touched);
            return (v, touched);
        }
        let uu = self.tris[u];
        let j = uu.local_neighbor(t).expect("neighbor link is symmetric");
        let d = uu.v[j];
        // u = (d, c, b) in local order starting at j
        let m_c = uu.n[(j + 1) % 3]; // across (b, d)
        let m_b = uu.n[(j + 2) % 3]; // across (d, c)
        let u1 = t1 + 1;
        self.write(
            t,
            Tri {
                v: [a, b, v],
                n: [u1, t1, n_c],
            },
        );
        self.write(
            t1,
            Tri {
                v: [a, v, c],
                n: [u, n_b, t],
            },
        );
        self.write(
            u,
            Tri {
                v: [d, c, v],
                n: [t1, u1, m_b],
            },
        );
        self.write(
            u1,
            Tri {
                v: [d, v, b],
                n: [t, m_c, u],
            },
        );
        self.relink(n_b, t, t1);
        self.relink(m_c, u, u1);
        let mut touched = vec![t, t1, u, u1];
        self.legalize(vec![(t, 2), (t1, 1), (u, 2), (u1, 1)], &mut touched);
        (v, touched)
    }

    pub fn centroid(&self, t: usize) -> Point {
        let [a, b, c] = self.tris[t].v;
        (self.pts[a] + self.pts[b] + self.pts[c]) / 3.0
    }

    /// Straight-line walk from the centroid of `start` towards `target`.
    pub fn locate(&self, start: usize, target: Point) -> Located {
        let origin = self.centroid(start);
        let mut t = start;
        for _ in 0..4 * self.tris.len() + 16 {
            let tri = &self.tris[t];
            let mut exit = None;
            let mut zeros = 0;
            let mut zero_edge = 0;
            for i in 0..3 {
                let a = self.pts[tri.v[(i + 1) % 3]];
                let b = self.pts[tri.v[(i + 2) % 3]];
                let o = orient(a, b, target);
                if o < 0.0 {
                    if orient(origin, target, a) <= 0.0 && orient(origin, target, b) >= 0.0 {
                        exit = Some(i);
                        break;
                    }
                    if exit.is_none() {
                        // keep as fallback; the line may graze a vertex
                        exit = Some(i + 3);
                    }
                } else if o == 0.0 {
                    zeros += 1;
                    zero_edge = i;
                }
            }
            match exit {
                None => {
                    return match zeros {
                        0 => Located::Inside(t),
                        1 => Located::OnEdge(t, zero_edge),
                        _ => Located::OnVertex(t),
                    }
                }
                Some(k) => {
                    let i = k % 3;
                    let u = tri.n[i];
                    if u == NONE {
                        return Located::Outside(t, i);
                    }
                    t = u;
                }
            }
        }
        self.locate_brute(target)
    }

    fn locate_brute(&self, target: Point) -> Located {
        for (t, tri) in self.tris.iter().enumerate() {
            let o: Vec<f64> = (0..3)
                .map(|i| {
                    orient(
                        self.pts[tri.v[(i + 1) % 3]],
                        self.pts[tri.v[(i + 2) % 3]],
                        target,
                    )
                })
                .collect();
            if o.iter().all(|&x| x >= 0.0) {
                let zeros: Vec<usize> = (0..3).filter(|&i| o[i] == 0.0).collect();
                return match zeros.len() {
                    0 => Located::Inside(t),
                    1 => Located::OnEdge(t, zeros[0]),
                    _ => Located::OnVertex(t),
                };
            }
        }
        // outside the domain: report an arbitrary boundary edge of the start
        let (t, i) = self
            .tris
            .iter()
            .enumerate()
            .find_map(|(t, tri)| tri.n.iter().position(|&x| x == NONE).map(|i| (t, i)))
            .expect("a polygon triangulation has boundary edges");
        Located::Outside(t, i)
    }

    /// Triangles incident to vertex `v`.
    pub fn triangles_around(&self, v: usize) -> Vec<usize> {
        let start = self.vert_tri[v];
        let mut out = vec![start];
        // rotate one way across edges (v, v[k+1])
        let mut t = start;
        loop {
            let k = self.tris[t].local(v).expect("vert_tri is consistent");
            let u = self.tris[t].n[(k + 2) % 3];
            if u == NONE || u == start {
                if u == start {
                    return out;
                }
                break;
            }
            out.push(u);
            t = u;
        }
        // open fan: rotate the other way
        let mut t = start;
        loop {
            let k = self.tris[t].local(v).expect("vert_tri is consistent");
            let u = self.tris[t].n[(k + 1) % 3];
            if u == NONE {
                break;
            }
            out.push(u);
            t = u;
        }
        out
    }

    /// The triangle holding boundary segment `a → bnext[a]`, and the local
    /// index of the vertex opposite it.
    pub fn segment_triangle(&self, a: usize) -> Option<(usize, usize)> {
        self.triangles_around(a).into_iter().find_map(|t| {
            let k = self.tris[t].local(a)?;
            let i = (k + 2) % 3;
            (self.tris[t].n[i] == NONE).then_some((t, i))
        })
    }

    /// Packs the triangulation into the public mesh type.
    pub fn into_mesh(self, n_poly: usize) -> Result<TriangleMesh> {
        let mut boundary = Vec::new();
        let mut v = 0;
        loop {
            let (poly_edge, frac) = self.bcoord[v]
                .ok_or_else(|| Error::MeshFailure("boundary vertex without location".into()))?;
            boundary.push(BoundaryNode {
                vertex: v,
                poly_edge,
                frac,
            });
            v = self.bnext[v];
            if v == 0 {
                break;
            }
            if v == NONE || boundary.len() > self.pts.len() {
                return Err(Error::MeshFailure("boundary loop is broken".into()));
            }
        }
        let n_boundary_edges = self
            .tris
            .iter()
            .map(|t| t.n.iter().filter(|&&x| x == NONE).count())
            .sum::<usize>();
        if n_boundary_edges != boundary.len() {
            return Err(Error::MeshFailure(format!(
                "boundary loop has {} edges but triangulation has {}",
                boundary.len(),
                n_boundary_edges
            )));
        }
        Ok(TriangleMesh {
            vertices: self.pts,
            triangles: self.tris.iter().map(|t| t.v).collect(),
            boundary,
            boundary_vertex_map: (0..n_poly).collect(),
        })
    }
}
