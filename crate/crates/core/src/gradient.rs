//! Hadamard shape derivatives of Steklov eigenvalues on polygons.
//!
//! For a simple eigenvalue with B-normalized eigenfunction `u`,
//! `σ′ = ∫_∂Ω (u_τ² − σ²u² − σHu²) Vn`, where the normal derivative has been
//! replaced through the boundary condition `∂u/∂n = σu`. Along each polyline
//! edge the normal velocity is affine, so the edge part is a combination of
//! two moments per edge. On a polygon the curvature is concentrated at the
//! vertices: the variation of the boundary measure contributes
//! `u(Q)²·V(Q)·(t_in − t_out)` at each vertex `Q`.

use std::ops::Range;

use nalgebra::DMatrix;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::fem::{FemSpace, SteklovSpectrum};
use crate::geometry::{BoundaryField, BoundaryPolyline, Point};
use crate::graphs::GraphPair;

/// Relative gap below which neighboring eigenvalues form a cluster.
pub const DEFAULT_CLUSTER_TOL: f64 = 1e-3;

const GAUSS4: [(f64, f64); 4] = [
    (0.069_431_844_202_973_71, 0.173_927_422_568_726_93),
    (0.330_009_478_207_571_9, 0.326_072_577_431_273_07),
    (0.669_990_521_792_428_1, 0.326_072_577_431_273_07),
    (0.930_568_155_797_026_3, 0.173_927_422_568_726_93),
];

/// Discrete curvature per polyline vertex.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CurvatureField {
    pub values: Vec<f64>,
}

/// Turning angle at each vertex over half the length of its two edges;
/// positive at convex corners of a counterclockwise polyline.
pub fn polyline_curvature(b: &BoundaryPolyline) -> CurvatureField {
    let n = b.len();
    let values = (0..n)
        .map(|i| {
            let a = b.vertex(i) - b.vertex(i + n - 1);
            let c = b.vertex(i + 1) - b.vertex(i);
            let turn = a.perp(&c).atan2(a.dot(&c));
            turn / (0.5 * (a.norm() + c.norm()))
        })
        .collect();
    CurvatureField { values }
}

/// `∫_e G·(1 − t) ds` and `∫_e G·t ds` per polyline edge `e`, with `t` the
/// affine parameter from `Q_e` to `Q_{e+1}` and `G = u_τ² − σ²u²`, plus the
/// vertex weights `−σu(Q)²` of the curvature term.
#[derive(Debug, Clone, PartialEq)]
pub struct EdgeMoments {
    pub start: Vec<f64>,
    pub end: Vec<f64>,
    pub vertex: Vec<f64>,
}

/// Unit tangents of the edges entering and leaving vertex `i`.
fn tangents(b: &BoundaryPolyline, i: usize) -> (Point, Point) {
    let n = b.len();
    let t_in = (b.vertex(i) - b.vertex(i + n - 1)).normalize();
    let t_out = (b.vertex(i + 1) - b.vertex(i)).normalize();
    (t_in, t_out)
}

/// `2 tan(θ/2)` for the turning angle `θ` at vertex `i`: the curvature
/// weight of a normal velocity that is continuous through the vertex.
pub fn corner_weight(b: &BoundaryPolyline, i: usize) -> f64 {
    let (t_in, t_out) = tangents(b, i);
    2.0 * t_in.perp(&t_out) / (1.0 + t_in.dot(&t_out))
}

impl EdgeMoments {
    /// `σ′` for a deformation field given at the polyline vertices.
    pub fn apply(&self, b: &BoundaryPolyline, field: &BoundaryField) -> f64 {
        let n = b.len();
        let edges: f64 = (0..n)
            .map(|e| {
                let (va, vb) = field.edge_normal_velocity(b, e);
                va * self.start[e] + vb * self.end[e]
            })
            .sum();
        let corners: f64 = match field {
            BoundaryField::Normal(v) => (0..n).map(|i| self.vertex[i] * v[i] * corner_weight(b, i)).sum(),
            BoundaryField::Vector(v) => (0..n)
                .map(|i| {
                    let (t_in, t_out) = tangents(b, i);
                    self.vertex[i] * v[i].dot(&(t_in - t_out))
                })
                .sum(),
        };
        edges + corners
    }

    /// Derivative under `Vn = χ_i` for every vertex `i`.
    pub fn hat_gradient(&self, b: &BoundaryPolyline) -> Vec<f64> {
        let n = self.start.len();
        (0..n)
            .map(|i| self.start[i] + self.end[(i + n - 1) % n] + self.vertex[i] * corner_weight(b, i))
            .collect()
    }

    /// Derivative with respect to the position of every vertex.
    pub fn vertex_gradient(&self, b: &BoundaryPolyline) -> Vec<Point> {
        let mut g = self.edge_vertex_gradient(b);
        for (i, gi) in g.iter_mut().enumerate() {
            let (t_in, t_out) = tangents(b, i);
            *gi += (t_in - t_out) * self.vertex[i];
        }
        g
    }

    /// The edge part of `vertex_gradient`, without the corner terms.
    fn edge_vertex_gradient(&self, b: &BoundaryPolyline) -> Vec<Point> {
        let n = b.len();
        (0..n)
            .map(|i| {
                let j = (i + n - 1) % n;
                b.edge_normal(i) * self.start[i] + b.edge_normal(j) * self.end[j]
            })
            .collect()
    }
}

/// Symmetric derivative matrix of an eigenvalue cluster.
#[derive(Debug, Clone, PartialEq)]
pub struct ClusterDerivativeMatrix {
    pub indices: Range<usize>,
    pub matrix: DMatrix<f64>,
}

impl ClusterDerivativeMatrix {
    /// Eigenvalues ascending: the one-sided derivatives of the branches.
    pub fn eigenvalues(&self) -> Vec<f64> {
        let mut v: Vec<f64> = self.matrix.clone().symmetric_eigenvalues().iter().copied().collect();
        v.sort_by(f64::total_cmp);
        v
    }
}

/// One real per optimization variable.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct GradientVector {
    pub gradient: Vec<f64>,
}

impl GradientVector {
    pub fn to_json(&self) -> String {
        serde_json::to_string(self).expect("gradient serializes")
    }
}

/// Relative gaps `((σ_k − σ_{k−1})/σ_k, (σ_{k+1} − σ_k)/σ_k)`; a missing
/// neighbor gives an infinite gap.
pub fn relative_gaps(eigs: &[f64], k: usize) -> (f64, f64) {
    let s = eigs[k];
    let lower = if k > 0 { (s - eigs[k - 1]) / s } else { f64::INFINITY };
    let upper = eigs.get(k + 1).map_or(f64::INFINITY, |t| (t - s) / s);
    (lower, upper)
}

/// Maximal run of indices around `k` whose consecutive relative gaps are at
/// most `tol`. Index 0 never joins.
pub fn cluster_range(eigs: &[f64], k: usize, tol: f64) -> Range<usize> {
    let mut lo = k;
    while lo > 1 && (eigs[lo] - eigs[lo - 1]) <= tol * eigs[lo] {
        lo -= 1;
    }
    let mut hi = k + 1;
    while hi < eigs.len() && (eigs[hi] - eigs[hi - 1]) <= tol * eigs[hi - 1] {
        hi += 1;
    }
    lo..hi
}

/// The data a shape derivative needs: space, spectrum and polyline.
pub struct ShapeCalculus<'a> {
    pub space: &'a FemSpace,
    pub spectrum: &'a SteklovSpectrum,
    pub poly: &'a BoundaryPolyline,
}

impl<'a> ShapeCalculus<'a> {
    pub fn new(space: &'a FemSpace, spectrum: &'a SteklovSpectrum, poly: &'a BoundaryPolyline) -> Result<Self> {
        if space.mesh.boundary_vertex_map.len() != poly.len() {
            return Err(Error::InvalidInput(format!(
                "gradient: mesh built on {} polyline vertices, polyline has {}",
                space.mesh.boundary_vertex_map.len(),
                poly.len()
            )));
        }
        Ok(Self {
            space,
            spectrum,
            poly,
        })
    }

    /// Edge moments of `u_i,τ u_j,τ − σ_iσ_j u_i u_j` and vertex weights
    /// `−σ̄ u_i u_j` with `σ̄ = (σ_i + σ_j)/2`.
    pub fn moments(&self, i: usize, j: usize) -> Result<EdgeMoments> {
        let spec = self.spectrum;
        if i >= spec.len() || j >= spec.len() {
            return Err(Error::InvalidInput(format!(
                "gradient: eigenpair {} requested, {} computed",
                i.max(j),
                spec.len()
            )));
        }
        let (si, sj) = (spec.eigenvalues[i], spec.eigenvalues[j]);
        let sbar = 0.5 * (si + sj);
        let (ti, tj) = (&spec.traces[i], &spec.traces[j]);
        let n = self.poly.len();
        let nodes = &self.space.mesh.boundary;
        let nb = nodes.len();
        let mut start = vec![0.0; n];
        let mut end = vec![0.0; n];
        let mut vertex = vec![0.0; n];
        for k in 0..nb {
            let e = nodes[k].poly_edge;
            let fa = nodes[k].frac;
            let next = nodes[(k + 1) % nb];
            let fb = if next.poly_edge == e { next.frac } else { 1.0 };
            let len = self.space.boundary_edge_length(k);
            if fa == 0.0 {
                let slot = self.space.edge_trace_slots(k).0;
                vertex[e] = -sbar * ti[slot] * tj[slot];
            }
            for (s, w) in GAUSS4 {
                let (ui, di) = self.space.trace_on_edge(ti, k, s);
                let (uj, dj) = self.space.trace_on_edge(tj, k, s);
                let t = fa + s * (fb - fa);
                let g = di * dj - si * sj * ui * uj;
                start[e] += w * len * g * (1.0 - t);
                end[e] += w * len * g * t;
            }
        }
        Ok(EdgeMoments { start, end, vertex })
    }

    fn check_simple(&self, k: usize, cluster_tol: f64) -> Result<()> {
        let (lo, up) = relative_gaps(&self.spectrum.eigenvalues, k);
        if k + 1 >= self.spectrum.len() {
            return Err(Error::InvalidInput(format!(
                "gradient: σ_{} is needed to test the gap above σ_{k}",
                k + 1
            )));
        }
        let gap = lo.min(up);
        if gap <= cluster_tol {
            return Err(Error::ClusteredEigenvalue { index: k, gap });
        }
        Ok(())
    }

    /// `σ_k′` under `vn`; fails with `ClusteredEigenvalue` when σ_k is not
    /// separated from its neighbors by more than `cluster_tol` (relative).
    pub fn eigenvalue_shape_derivative(
        &self,
        k: usize,
        vn: &BoundaryField,
        cluster_tol: f64,
    ) -> Result<f64> {
        self.check_simple(k, cluster_tol)?;
        Ok(self.moments(k, k)?.apply(self.poly, vn))
    }

    /// Moments for every unordered pair of a cluster, row-major by pair.
    fn cluster_moments(&self, cluster: &Range<usize>) -> Result<Vec<Vec<EdgeMoments>>> {
        cluster
            .clone()
            .map(|i| cluster.clone().map(|j| self.moments(i, j)).collect())
            .collect()
    }

    pub fn cluster_matrix(
        &self,
        cluster: Range<usize>,
        vn: &BoundaryField,
    ) -> Result<ClusterDerivativeMatrix> {
        let mom = self.cluster_moments(&cluster)?;
        let m = cluster.len();
        let matrix = DMatrix::from_fn(m, m, |a, b| mom[a][b].apply(self.poly, vn));
        Ok(ClusterDerivativeMatrix {
            indices: cluster,
            matrix: (&matrix + matrix.transpose()) * 0.5,
        })
    }

    /// Per-coordinate derivatives with respect to the polyline vertices:
    /// `coordinate(moments)` gives one column of values per coordinate. A
    /// simple eigenvalue uses its own moments; a cluster uses, coordinate by
    /// coordinate, the smallest eigenvalue of the cluster matrix.
    fn coordinate_gradient(
        &self,
        k: usize,
        cluster_tol: f64,
        coordinate: impl Fn(&EdgeMoments) -> Vec<f64>,
    ) -> Result<Vec<f64>> {
        let cluster = cluster_range(&self.spectrum.eigenvalues, k, cluster_tol);
        if cluster.len() == 1 {
            return Ok(coordinate(&self.moments(k, k)?));
        }
        let mom = self.cluster_moments(&cluster)?;
        let cols: Vec<Vec<Vec<f64>>> = mom
            .iter()
            .map(|row| row.iter().map(&coordinate).collect())
            .collect();
        let m = cluster.len();
        let n = cols[0][0].len();
        Ok((0..n)
            .map(|c| {
                let mat = DMatrix::from_fn(m, m, |a, b| 0.5 * (cols[a][b][c] + cols[b][a][c]));
                mat.symmetric_eigenvalues().iter().copied().fold(f64::INFINITY, f64::min)
            })
            .collect())
    }

    /// `∂σ_k/∂p_i` for support values: the edge part of the vertex gradient
    /// pulled back through `Q_j = p_j e_j + p′_j e_j^⊥` with the central
    /// difference `p′`, plus the curvature part. A support perturbation moves
    /// the boundary point with normal `θ` by `Vn = δp(θ)` and `H ds = dθ`, so
    /// the curvature term is `−σ u(Q_i)² h` per value; unlike the corner form
    /// it stays smooth where the radius of curvature vanishes and edges
    /// degenerate. The polyline must be the reconstruction of the support
    /// values.
    pub fn support_gradient(&self, k: usize, cluster_tol: f64) -> Result<GradientVector> {
        let gradient = self.coordinate_gradient(k, cluster_tol, |m| support_coordinates(self.poly, m))?;
        Ok(GradientVector { gradient })
    }

    /// Gradient of the `(i, j)` entry of the cluster matrix with respect to
    /// the support values.
    pub fn support_pair_gradient(&self, i: usize, j: usize) -> Result<Vec<f64>> {
        Ok(support_coordinates(self.poly, &self.moments(i, j)?))
    }

    /// Gradient of the `(i, j)` entry of the cluster matrix with respect to
    /// the graph values.
    pub fn graph_pair_gradient(&self, i: usize, j: usize, graphs: &GraphPair) -> Result<Vec<f64>> {
        Ok(graph_coordinates(self.poly, graphs, &self.moments(i, j)?))
    }

    /// Derivatives under the hat fields `Vn = χ_i`, one per polyline vertex.
    pub fn hat_gradient(&self, k: usize, cluster_tol: f64) -> Result<GradientVector> {
        Ok(GradientVector {
            gradient: self.coordinate_gradient(k, cluster_tol, |m| m.hat_gradient(self.poly))?,
        })
    }

    /// `∂σ_k/∂(p, q)` for a two-graph domain: vertical motion of each graph
    /// vertex, ordered like `GraphPair::to_vars`.
    pub fn graph_gradient(
        &self,
        k: usize,
        graphs: &GraphPair,
        cluster_tol: f64,
    ) -> Result<GradientVector> {
        let gradient = self.coordinate_gradient(k, cluster_tol, |m| graph_coordinates(self.poly, graphs, m))?;
        Ok(GradientVector { gradient })
    }
}

fn support_coordinates(poly: &BoundaryPolyline, m: &EdgeMoments) -> Vec<f64> {
    let n = poly.len();
    let step = 2.0 * std::f64::consts::PI / n as f64;
    let vg = m.edge_vertex_gradient(poly);
    let perp = |j: usize| {
        let t = step * j as f64;
        Point::new(-t.sin(), t.cos())
    };
    (0..n)
        .map(|i| {
            let t = step * i as f64;
            let (prev, next) = ((i + n - 1) % n, (i + 1) % n);
            vg[i].dot(&Point::new(t.cos(), t.sin()))
                + (vg[prev].dot(&perp(prev)) - vg[next].dot(&perp(next))) / (2.0 * step)
                + m.vertex[i] * step
        })
        .collect()
}

fn graph_coordinates(poly: &BoundaryPolyline, graphs: &GraphPair, m: &EdgeMoments) -> Vec<f64> {
    let vg = m.vertex_gradient(poly);
    (0..graphs.len())
        .map(|i| vg[graphs.lower_vertex(i)].y)
        .chain((0..graphs.len()).map(|i| vg[graphs.upper_vertex(i)].y))
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::{reconstruct_boundary, SupportVector};
    use std::f64::consts::PI;

    #[test]
    fn curvature_examples() {
        let sq = BoundaryPolyline::new(vec![
            Point::new(0.0, 0.0),
            Point::new(1.0, 0.0),
            Point::new(1.0, 1.0),
            Point::new(0.0, 1.0),
        ])
        .unwrap();
        for h in polyline_curvature(&sq).values {
            assert!((h - std::f64::consts::FRAC_PI_2).abs() < 1e-15);
        }
        let line = BoundaryPolyline::new(vec![
            Point::new(0.0, 0.0),
            Point::new(1.0, 0.0),
            Point::new(2.0, 0.0),
            Point::new(1.0, 1.0),
        ])
        .unwrap();
        assert_eq!(polyline_curvature(&line).values[1], 0.0);
        for n in [50, 200, 800] {
            let b = reconstruct_boundary(&SupportVector::disk(n, 1.0).unwrap()).unwrap();
            for h in polyline_curvature(&b).values {
                assert!((h - 1.0).abs() < 5.0 / n as f64);
            }
        }
    }

    #[test]
    fn clusters_and_gaps() {
        let eigs = [0.0, 1.0, 1.0005, 2.0, 2.0, 2.001];
        assert_eq!(cluster_range(&eigs, 1, 1e-3), 1..3);
        assert_eq!(cluster_range(&eigs, 2, 1e-3), 1..3);
        assert_eq!(cluster_range(&eigs, 4, 1e-3), 3..6);
        assert_eq!(cluster_range(&eigs, 3, 1e-4), 3..5);
        let (lo, up) = relative_gaps(&[0.0, 1.0, 2.0], 1);
        assert_eq!((lo, up), (1.0, 1.0));
        assert_eq!(relative_gaps(&[0.0, 1.0], 1).1, f64::INFINITY);
    }

    #[test]
    fn hat_gradient_sums_to_the_constant_field() {
        let m = EdgeMoments {
            start: vec![1.0, 2.0, 3.0],
            end: vec![0.5, 0.25, 0.125],
            vertex: vec![-0.3, 0.7, 0.2],
        };
        let b = BoundaryPolyline::new(vec![
            Point::new(0.0, 0.0),
            Point::new(1.0, 0.0),
            Point::new(0.0, 1.0),
        ])
        .unwrap();
        let total: f64 = m.hat_gradient(&b).iter().sum();
        let ones = BoundaryField::Normal(vec![1.0; 3]);
        assert!((m.apply(&b, &ones) - total).abs() < 1e-13);
    }

    #[test]
    fn vertex_gradient_matches_vector_fields() {
        let m = EdgeMoments {
            start: vec![1.0, -2.0, 3.0, 0.5],
            end: vec![0.5, 0.25, -0.125, 1.0],
            vertex: vec![-0.3, 0.7, 0.2, -1.1],
        };
        let b = BoundaryPolyline::new(vec![
            Point::new(0.0, 0.0),
            Point::new(2.0, 0.0),
            Point::new(1.5, 1.0),
            Point::new(0.0, 0.5),
        ])
        .unwrap();
        let v = vec![
            Point::new(0.3, -0.1),
            Point::new(0.0, 0.0),
            Point::new(-1.0, 0.4),
            Point::new(0.2, 0.9),
        ];
        let vg = m.vertex_gradient(&b);
        let direct: f64 = vg.iter().zip(&v).map(|(g, x)| g.dot(x)).sum();
        assert!((m.apply(&b, &BoundaryField::Vector(v)) - direct).abs() < 1e-14);
    }

    #[test]
    fn corner_weights() {
        let sq = BoundaryPolyline::new(vec![
            Point::new(0.0, 0.0),
            Point::new(1.0, 0.0),
            Point::new(1.0, 1.0),
            Point::new(0.0, 1.0),
        ])
        .unwrap();
        for i in 0..4 {
            assert!((corner_weight(&sq, i) - 2.0).abs() < 1e-15);
        }
        // a normal field continuous through a corner moves it along the miter
        let n = 64;
        let b = reconstruct_boundary(&SupportVector::disk(n, 1.0).unwrap()).unwrap();
        let w = corner_weight(&b, 5);
        assert!((w - 2.0 * (PI / n as f64).tan()).abs() < 1e-12);
    }
}
