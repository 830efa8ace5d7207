//! Lagrange finite elements for the Steklov problem
//! `∫ ∇u·∇v = σ ∫_∂ uv`.

mod sparse;
mod spectrum;
pub mod tridiag;

use std::collections::HashMap;

use crate::error::{Error, Result};
use crate::geometry::Point;
use crate::mesh::TriangleMesh;

pub use sparse::{reverse_cuthill_mckee, CsrMatrix, EnvelopeCholesky};
pub use spectrum::{rayleigh_quotient, solve_spectrum, SteklovSpectrum};

/// Gauss-Legendre nodes and weights on `[0, 1]`, exact to degree 5.
pub(crate) const GAUSS3: [(f64, f64); 3] = [
    (0.112_701_665_379_258_3, 5.0 / 18.0),
    (0.5, 8.0 / 18.0),
    (0.887_298_334_620_741_7, 5.0 / 18.0),
];

/// Degrees of freedom of a P1 or P2 space on a triangle mesh.
///
/// Vertex dofs come first (dof `i` is vertex `i`); for order 2 one dof per
/// edge follows. Boundary dofs are listed in loop order: for order 2 the
/// entries `2k` and `2k + 1` are boundary node `k` and the midpoint of
/// boundary edge `k`.
#[derive(Debug, Clone)]
pub struct FemSpace {
    pub mesh: TriangleMesh,
    pub order: usize,
    dof_count: usize,
    /// Local dofs per triangle: 3 vertices, then the midpoints of edges
    /// `(0,1)`, `(1,2)`, `(2,0)` for order 2.
    elements: Vec<[usize; 6]>,
    dof_points: Vec<Point>,
    boundary_dofs: Vec<usize>,
    boundary_arc: Vec<f64>,
}

impl FemSpace {
    pub fn new(mesh: TriangleMesh, order: usize) -> Result<Self> {
        if order != 1 && order != 2 {
            return Err(Error::InvalidInput(format!(
                "fem: order must be 1 or 2, got {order}"
            )));
        }
        if mesh.triangles.is_empty() || mesh.boundary.len() < 3 {
            return Err(Error::InvalidInput("fem: empty mesh".into()));
        }
        let nv = mesh.n_vertices();
        let mut dof_points = mesh.vertices.clone();
        let mut edge_dof: HashMap<[usize; 2], usize> = HashMap::new();
        if order == 2 {
            for [a, b] in mesh.edges() {
                edge_dof.insert([a, b], dof_points.len());
                dof_points.push((mesh.vertices[a] + mesh.vertices[b]) * 0.5);
            }
        }
        let key = |a: usize, b: usize| [a.min(b), a.max(b)];
        let elements = mesh
            .triangles
            .iter()
            .map(|&[a, b, c]| {
                if order == 2 {
                    [a, b, c, edge_dof[&key(a, b)], edge_dof[&key(b, c)], edge_dof[&key(c, a)]]
                } else {
                    [a, b, c, 0, 0, 0]
                }
            })
            .collect();
        let mut boundary_dofs = Vec::new();
        let mut boundary_arc = Vec::new();
        let mut arc = 0.0;
        for [a, b] in mesh.boundary_edges() {
            let len = (mesh.vertices[b] - mesh.vertices[a]).norm();
            boundary_dofs.push(a);
            boundary_arc.push(arc);
            if order == 2 {
                let m = *edge_dof.get(&key(a, b)).ok_or_else(|| {
                    Error::InvalidInput("fem: boundary edge missing from triangles".into())
                })?;
                boundary_dofs.push(m);
                boundary_arc.push(arc + 0.5 * len);
            }
            arc += len;
        }
        debug_assert!(boundary_dofs.iter().all(|&d| d < nv + edge_dof.len()));
        Ok(Self {
            dof_count: dof_points.len(),
            mesh,
            order,
            elements,
            dof_points,
            boundary_dofs,
            boundary_arc,
        })
    }

    pub fn dof_count(&self) -> usize {
        self.dof_count
    }

    pub fn boundary_dofs(&self) -> &[usize] {
        &self.boundary_dofs
    }

    /// Arclength from boundary node 0 to each boundary dof.
    pub fn boundary_arc(&self) -> &[f64] {
        &self.boundary_arc
    }

    /// Nodal position of every dof.
    pub fn dof_points(&self) -> &[Point] {
        &self.dof_points
    }

    pub fn interpolate(&self, f: impl Fn(Point) -> f64) -> Vec<f64> {
        self.dof_points.iter().map(|&p| f(p)).collect()
    }

    pub fn n_boundary_edges(&self) -> usize {
        self.mesh.boundary.len()
    }

    /// Positions in a trace vector of the nodes of boundary edge `k`:
    /// start, midpoint (order 2 only), end.
    pub fn edge_trace_slots(&self, k: usize) -> (usize, Option<usize>, usize) {
        let nb = self.boundary_dofs.len();
        if self.order == 2 {
            (2 * k, Some(2 * k + 1), (2 * k + 2) % nb)
        } else {
            (k, None, (k + 1) % nb)
        }
    }

    pub fn boundary_edge_length(&self, k: usize) -> f64 {
        let m = &self.mesh;
        let nb = m.boundary.len();
        let a = m.vertices[m.boundary[k].vertex];
        let b = m.vertices[m.boundary[(k + 1) % nb].vertex];
        (b - a).norm()
    }

    /// Value and arclength derivative at parameter `s ∈ [0, 1]` of boundary
    /// edge `k` of the function whose boundary trace is `trace`.
    pub fn trace_on_edge(&self, trace: &[f64], k: usize, s: f64) -> (f64, f64) {
        let len = self.boundary_edge_length(k);
        let (a, m, b) = self.edge_trace_slots(k);
        let (ua, ub) = (trace[a], trace[b]);
        match m {
            Some(m) => {
                let um = trace[m];
                let val = ua * (1.0 - s) * (1.0 - 2.0 * s) + um * 4.0 * s * (1.0 - s)
                    + ub * s * (2.0 * s - 1.0);
                let der = ua * (4.0 * s - 3.0) + um * (4.0 - 8.0 * s) + ub * (4.0 * s - 1.0);
                (val, der / len)
            }
            None => (ua * (1.0 - s) + ub * s, (ub - ua) / len),
        }
    }

    /// Tangential derivative at each boundary dof. At boundary nodes the two
    /// one-sided values are averaged.
    pub fn tangential_derivative(&self, trace: &[f64]) -> Vec<f64> {
        let ne = self.n_boundary_edges();
        let mut out = vec![0.0; self.boundary_dofs.len()];
        for k in 0..ne {
            let (a, m, b) = self.edge_trace_slots(k);
            out[a] += 0.5 * self.trace_on_edge(trace, k, 0.0).1;
            out[b] += 0.5 * self.trace_on_edge(trace, k, 1.0).1;
            if let Some(m) = m {
                out[m] = self.trace_on_edge(trace, k, 0.5).1;
            }
        }
        out
    }

    /// Restriction of a full dof vector to the boundary dofs.
    pub fn trace_of(&self, v: &[f64]) -> Vec<f64> {
        self.boundary_dofs.iter().map(|&d| v[d]).collect()
    }
}

/// Gradients of the barycentric coordinates of a counterclockwise triangle,
/// and its area.
fn barycentric_gradients(p: [Point; 3]) -> ([Point; 3], f64) {
    let two_a = (p[1] - p[0]).perp(&(p[2] - p[0]));
    let g = |i: usize| {
        let e = p[(i + 2) % 3] - p[(i + 1) % 3];
        Point::new(-e.y, e.x) / two_a
    };
    ([g(0), g(1), g(2)], 0.5 * two_a)
}

fn element_stiffness(order: usize, p: [Point; 3]) -> [[f64; 6]; 6] {
    let (g, area) = barycentric_gradients(p);
    let mut k = [[0.0; 6]; 6];
    if order == 1 {
        for i in 0..3 {
            for j in 0..3 {
                k[i][j] = area * g[i].dot(&g[j]);
            }
        }
        return k;
    }
    // edge-midpoint rule, exact for the quadratic integrand
    let mids = [[0.5, 0.5, 0.0], [0.0, 0.5, 0.5], [0.5, 0.0, 0.5]];
    for l in mids {
        let grads: [Point; 6] = [
            g[0] * (4.0 * l[0] - 1.0),
            g[1] * (4.0 * l[1] - 1.0),
            g[2] * (4.0 * l[2] - 1.0),
            (g[0] * l[1] + g[1] * l[0]) * 4.0,
            (g[1] * l[2] + g[2] * l[1]) * 4.0,
            (g[2] * l[0] + g[0] * l[2]) * 4.0,
        ];
        for i in 0..6 {
            for j in 0..6 {
                k[i][j] += area / 3.0 * grads[i].dot(&grads[j]);
            }
        }
    }
    k
}

fn edge_mass(order: usize, len: f64) -> [[f64; 3]; 3] {
    let mut m = [[0.0; 3]; 3];
    for (s, w) in GAUSS3 {
        let phi = if order == 2 {
            [(1.0 - s) * (1.0 - 2.0 * s), 4.0 * s * (1.0 - s), s * (2.0 * s - 1.0)]
        } else {
            [1.0 - s, 0.0, s]
        };
        for i in 0..3 {
            for j in 0..3 {
                m[i][j] += w * len * phi[i] * phi[j];
            }
        }
    }
    m
}

/// Stiffness matrix `K` and boundary mass matrix `B` over all dofs.
pub fn assemble(space: &FemSpace) -> (CsrMatrix, CsrMatrix) {
    let nl = if space.order == 2 { 6 } else { 3 };
    let mesh = &space.mesh;
    let mut kt = Vec::with_capacity(space.elements.len() * nl * nl);
    for (t, dofs) in mesh.triangles.iter().zip(&space.elements) {
        let p = [mesh.vertices[t[0]], mesh.vertices[t[1]], mesh.vertices[t[2]]];
        let ke = element_stiffness(space.order, p);
        for i in 0..nl {
            for j in 0..nl {
                kt.push((dofs[i], dofs[j], ke[i][j]));
            }
        }
    }
    let mut bt = Vec::new();
    let bd = &space.boundary_dofs;
    for k in 0..space.n_boundary_edges() {
        let me = edge_mass(space.order, space.boundary_edge_length(k));
        let (a, m, b) = space.edge_trace_slots(k);
        let slots = [Some(a), m, Some(b)];
        for i in 0..3 {
            for j in 0..3 {
                if let (Some(si), Some(sj)) = (slots[i], slots[j]) {
                    bt.push((bd[si], bd[sj], me[i][j]));
                }
            }
        }
    }
    (
        CsrMatrix::from_triplets(space.dof_count, kt),
        CsrMatrix::from_triplets(space.dof_count, bt),
    )
}
