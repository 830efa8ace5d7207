//! Randomized invariants of geometry, meshing, FEM, gradients and the
//! experiment formulas.

use std::f64::consts::PI;

use proptest::prelude::*;

use steklov_core::experiments::{check_bound, predicted_slope};
use steklov_core::fem::{assemble, rayleigh_quotient, solve_spectrum, FemSpace, SteklovSpectrum};
use steklov_core::geometry::{
    compute_diameter, convexity_residuals, diameter_directional_derivative, reconstruct_boundary, BoundaryField,
    BoundaryPolyline, Point, SupportVector,
};
use steklov_core::gradient::ShapeCalculus;
use steklov_core::mesh::triangulate;

/// Support function `1 + Σ_{m=2}^{4} c_m(θ)` whose radius of curvature stays
/// above 1/4, so the shape is strictly convex.
fn smooth_support(n: usize, c: &[f64]) -> SupportVector {
    SupportVector::from_fn(n, |t| {
        1.0 + (2..=4)
            .map(|m| {
                let w = 0.25 / ((m * m - 1) as f64);
                let j = 2 * (m - 2);
                w * (c[j] * (m as f64 * t).cos() + c[j + 1] * (m as f64 * t).sin())
            })
            .sum::<f64>()
    })
    .unwrap()
}

fn coeffs() -> impl Strategy<Value = Vec<f64>> {
    prop::collection::vec(-1.0f64..1.0, 6)
}

/// Star-shaped, usually non-convex polygon.
fn star(n: usize, a: f64, m: usize, phase: f64) -> BoundaryPolyline {
    BoundaryPolyline::new(
        (0..n)
            .map(|i| {
                let t = 2.0 * PI * i as f64 / n as f64;
                let r = 1.0 + a * (m as f64 * t + phase).cos();
                Point::new(r * t.cos(), r * t.sin())
            })
            .collect(),
    )
    .unwrap()
}

fn solve(poly: &BoundaryPolyline, h: f64, m: usize) -> (FemSpace, SteklovSpectrum) {
    let space = FemSpace::new(triangulate(poly, h).unwrap(), 2).unwrap();
    let (k, b) = assemble(&space);
    let spec = solve_spectrum(&space, &k, &b, m).unwrap();
    (space, spec)
}

fn max_abs(v: &[f64]) -> f64 {
    v.iter().fold(0.0, |m, x| m.max(x.abs()))
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn convexity_residuals_are_linear(
        p in prop::collection::vec(0.5f64..1.5, 48),
        q in prop::collection::vec(0.5f64..1.5, 48),
        a in -3.0f64..3.0,
        b in -3.0f64..3.0,
    ) {
        let z: Vec<f64> = p.iter().zip(&q).map(|(x, y)| a * x + b * y).collect();
        let (rp, rq, rz) = (convexity_residuals(&p), convexity_residuals(&q), convexity_residuals(&z));
        let scale = max_abs(&rp).max(max_abs(&rq)) * (a.abs() + b.abs()) + 1.0;
        for i in 0..rz.len() {
            prop_assert!((rz[i] - a * rp[i] - b * rq[i]).abs() < 1e-12 * scale);
        }
    }

    #[test]
    fn feasible_supports_reconstruct_convex_polygons(c in coeffs(), e in 5usize..8) {
        let sv = smooth_support(1 << e, &c);
        prop_assume!(sv.convexity_residuals().iter().all(|r| *r >= 0.0));
        prop_assert!(reconstruct_boundary(&sv).unwrap().is_convex());
    }

    #[test]
    fn constant_support_has_diameter_twice_the_radius(half in 4usize..100, r in 0.1f64..10.0) {
        let b = reconstruct_boundary(&SupportVector::disk(2 * half, r).unwrap()).unwrap();
        let d = compute_diameter(&b).unwrap().diameter;
        prop_assert!((d - 2.0 * r).abs() < 1e-14 * r, "{d} vs {}", 2.0 * r);
    }

    #[test]
    fn diameter_is_bounded_by_the_widths(c in coeffs(), e in 5usize..8) {
        let n = 1 << e;
        let sv = smooth_support(n, &c);
        let p = sv.values();
        let width = (0..n / 2).map(|i| p[i] + p[i + n / 2]).fold(0.0, f64::max);
        let h = 2.0 * PI / n as f64;
        let d = compute_diameter(&reconstruct_boundary(&sv).unwrap()).unwrap().diameter;
        prop_assert!(d <= width + 10.0 * h * h * sv.max());
    }

    #[test]
    fn diameter_derivative_ignores_translations(
        c in coeffs(),
        v in prop::collection::vec(-1.0f64..1.0, 128),
        (cx, cy) in (-2.0f64..2.0, -2.0f64..2.0),
    ) {
        let b = reconstruct_boundary(&smooth_support(64, &c)).unwrap();
        let rep = compute_diameter(&b).unwrap();
        let f: Vec<Point> = (0..64).map(|i| Point::new(v[2 * i], v[2 * i + 1])).collect();
        let g: Vec<Point> = f.iter().map(|p| p + Point::new(cx, cy)).collect();
        let a = diameter_directional_derivative(&b, &rep, &f).unwrap();
        let t = diameter_directional_derivative(&b, &rep, &g).unwrap();
        prop_assert!((a - t).abs() < 1e-12, "{a} vs {t}");
    }

    #[test]
    fn predicted_slope_is_affine(a2 in -2.0f64..2.0, a4 in -2.0f64..2.0, b2 in -2.0f64..2.0, b4 in -2.0f64..2.0, s in -2.0f64..2.0, k in 0.0f64..2.0) {
        let lhs = predicted_slope(a2 + s * b2, a4 + s * b4, k);
        let rhs = predicted_slope(a2, a4, k) + s * predicted_slope(b2, b4, k);
        prop_assert!((lhs - rhs).abs() < 1e-12);
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(16))]

    #[test]
    fn meshes_partition_the_polygon(a in 0.0f64..0.45, m in 2usize..6, phase in 0.0f64..6.3, h in 0.08f64..0.4) {
        let poly = star(60, a, m, phase);
        let mesh = triangulate(&poly, h).unwrap();
        let sum: f64 = (0..mesh.n_triangles()).map(|t| mesh.triangle_area(t)).sum();
        prop_assert!((sum - poly.area()).abs() < 1e-12 * poly.area());
        for node in &mesh.boundary {
            let (q0, q1) = poly.edge(node.poly_edge);
            let on_edge = q0 + (q1 - q0) * node.frac;
            prop_assert!((mesh.vertices[node.vertex] - on_edge).norm() < 1e-12);
        }
        // consecutive boundary nodes stay on one polyline edge or pass a vertex
        let nb = mesh.boundary.len();
        for k in 0..nb {
            let (a, b) = (mesh.boundary[k], mesh.boundary[(k + 1) % nb]);
            prop_assert!(b.poly_edge == a.poly_edge || (b.frac == 0.0 && b.poly_edge == (a.poly_edge + 1) % poly.len()));
        }
    }

    #[test]
    fn spectra_are_nonnegative_orthonormal_and_minimal(c in coeffs(), a in 0.0f64..0.3, seed in 0u64..1000) {
        let convex = reconstruct_boundary(&smooth_support(64, &c)).unwrap();
        let nonconvex = star(48, a, 3, 0.0);
        for poly in [convex, nonconvex] {
            let space = FemSpace::new(triangulate(&poly, 0.25).unwrap(), 2).unwrap();
            let (k, b) = assemble(&space);
            let spec = solve_spectrum(&space, &k, &b, 4).unwrap();
            prop_assert!(spec.eigenvalues.iter().all(|s| *s >= 0.0));
            prop_assert!(spec.eigenvalues[0] < 1e-8 * spec.eigenvalues[1]);
            for i in 0..spec.len() {
                for j in 0..spec.len() {
                    let g = b.bilinear(&spec.modes[i], &spec.modes[j]);
                    let want = if i == j { 1.0 } else { 0.0 };
                    prop_assert!((g - want).abs() < 1e-8, "gram ({i},{j}) = {g}");
                }
            }
            // B-orthogonal to constants ⇒ Rayleigh quotient at least σ_1
            let mut v: Vec<f64> = space
                .dof_points()
                .iter()
                .map(|p| ((seed as f64 + 1.0) * p.x).sin() + (p.y * p.x * 3.0).cos() + p.y)
                .collect();
            let c0 = b.bilinear(&v, &spec.modes[0]);
            for (x, m) in v.iter_mut().zip(&spec.modes[0]) {
                *x -= c0 * m;
            }
            let rq = rayleigh_quotient(&k, &b, &v).unwrap();
            prop_assert!(rq >= spec.eigenvalues[1] - 1e-10, "{rq} < {}", spec.eigenvalues[1]);
            for kk in 1..=3 {
                prop_assert!(check_bound(&poly, &spec, kk).unwrap().pass);
            }
        }
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(8))]

    #[test]
    fn shape_derivative_identities(
        c in coeffs(),
        f1 in prop::collection::vec(-1.0f64..1.0, 96),
        f2 in prop::collection::vec(-1.0f64..1.0, 96),
        (a, b) in (-2.0f64..2.0, -2.0f64..2.0),
    ) {
        let poly = reconstruct_boundary(&smooth_support(96, &c)).unwrap();
        let (space, spec) = solve(&poly, 0.1, 5);
        let calc = ShapeCalculus::new(&space, &spec, &poly).unwrap();

        // linearity in Vn, evaluated with the branch moments so clusters do not matter
        let m = calc.moments(1, 1).unwrap();
        let comb: Vec<f64> = f1.iter().zip(&f2).map(|(x, y)| a * x + b * y).collect();
        let (d1, d2) = (m.apply(&poly, &BoundaryField::Normal(f1.clone())), m.apply(&poly, &BoundaryField::Normal(f2.clone())));
        let dc = m.apply(&poly, &BoundaryField::Normal(comb));
        prop_assert!((dc - a * d1 - b * d2).abs() < 1e-12 * (1.0 + d1.abs() + d2.abs()) * (a.abs() + b.abs() + 1.0));

        // hat functions sum to the uniform field on the same quadrature
        let hats: f64 = m.hat_gradient(&poly).iter().sum();
        let uniform = m.apply(&poly, &BoundaryField::Normal(vec![1.0; poly.len()]));
        prop_assert!((hats - uniform).abs() < 1e-10 * uniform.abs().max(1.0));

        // cluster matrix: symmetric, trace = sum of branch derivatives
        let field = BoundaryField::Normal(f1.clone());
        let cm = calc.cluster_matrix(1..4, &field).unwrap();
        let branches: f64 = (1..4).map(|k| calc.moments(k, k).unwrap().apply(&poly, &field)).sum();
        prop_assert!((cm.matrix.trace() - branches).abs() < 1e-12 * (1.0 + branches.abs()));
        prop_assert!((&cm.matrix - cm.matrix.transpose()).amax() < 1e-12);

        // translations and dilations, branch by branch
        let t = BoundaryField::from_vector_fn(&poly, |_| Point::new(0.7, -0.4));
        let x = BoundaryField::from_vector_fn(&poly, |p| p);
        for k in 1..=3 {
            let mk = calc.moments(k, k).unwrap();
            let sk = spec.eigenvalues[k];
            prop_assert!(mk.apply(&poly, &t).abs() < 5e-3 * sk);
            prop_assert!((mk.apply(&poly, &x) + sk).abs() < 1e-2 * sk);
        }
    }
}
