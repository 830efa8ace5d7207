use proptest::prelude::*;

use steklov_core::constraints::{ConstraintRow, LinearConstraintSet, RowTag, Sense};
use steklov_core::geometry::SupportVector;
use steklov_core::graphs::GraphPair;
use steklov_core::optimizer::{
    ascend, ascend_nonconvex, build_constraints, build_graph_constraints, optimize, project,
    random_start, OptimOptions, OptimState, Variables,
};
use steklov_core::Error;

fn opts(n: usize) -> OptimOptions {
    OptimOptions {
        n_angles: n,
        ..Default::default()
    }
}

fn small_run(k: usize, iters: usize) -> OptimOptions {
    OptimOptions {
        n_angles: 40,
        k,
        max_iters: iters,
        mesh_factor: 0.1,
        restarts: 0,
        ..Default::default()
    }
}

fn bound_holds(st: &OptimState, k: usize) -> bool {
    let c = 2.0 * ((k + 1) as f64).powi(3);
    st.history
        .iter()
        .all(|r| r.sigma_k <= c * r.area / r.diameter.powi(3))
}

#[test]
fn constraint_counts_for_eight_angles() {
    let cons = build_constraints(&opts(8));
    assert_eq!(cons.len(), 21);
    assert_eq!(cons.count(RowTag::Convexity), 8);
    assert_eq!(cons.count(RowTag::Width), 4);
    assert_eq!(cons.count(RowTag::Anchor), 1);
    assert_eq!(cons.count(RowTag::Positivity), 8);
}

#[test]
fn unit_support_is_feasible_and_inflated_support_breaks_widths() {
    let cons = build_constraints(&opts(8));
    assert!(cons.min_residual(&[1.0; 8]) >= 0.0);
    let res = cons.residuals(&[1.2; 8]);
    for (r, row) in res.iter().zip(&cons.rows) {
        if row.tag == RowTag::Width {
            assert!((r + 0.4).abs() < 1e-12, "{r}");
        } else {
            assert!(*r >= 0.0);
        }
    }
}

#[test]
fn projection_of_inflated_support_is_the_unit_disk() {
    for n in [8, 16, 64] {
        let cons = build_constraints(&opts(n));
        let p = project(&vec![1.2; n], &cons).unwrap();
        for v in &p {
            assert!((v - 1.0).abs() < 1e-12, "n = {n}: {v}");
        }
        assert!(cons.min_residual(&p) >= -1e-10);
    }
}

#[test]
fn feasible_point_projects_to_itself_exactly() {
    let cons = build_constraints(&opts(16));
    let p: Vec<f64> = (0..16).map(|i| 1.0 - 0.01 * ((i % 4) == 1) as u8 as f64).collect();
    assert!(cons.min_residual(&p) >= 0.0);
    assert_eq!(project(&p, &cons).unwrap(), p);
}

#[test]
fn single_halfspace_projection() {
    let a = [1.0, -2.0, 0.5, 3.0];
    let b = 1.0;
    let cons = LinearConstraintSet::new(
        4,
        vec![ConstraintRow {
            coeffs: a.iter().copied().enumerate().collect(),
            bound: b,
            sense: Sense::Le,
            tag: RowTag::Width,
        }],
    );
    let p = [2.0, -1.0, 1.0, 0.5];
    let ap: f64 = a.iter().zip(&p).map(|(x, y)| x * y).sum();
    let a2: f64 = a.iter().map(|x| x * x).sum();
    let out = project(&p, &cons).unwrap();
    for i in 0..4 {
        let expect = p[i] - (ap - b) / a2 * a[i];
        assert!((out[i] - expect).abs() < 1e-14);
    }
}

#[test]
fn empty_polyhedron_fails_projection() {
    let row = |sense, bound| ConstraintRow {
        coeffs: vec![(0, 1.0), (1, 1.0)],
        bound,
        sense,
        tag: RowTag::Width,
    };
    let cons = LinearConstraintSet::new(2, vec![row(Sense::Le, 0.0), row(Sense::Ge, 1.0)]);
    assert!(matches!(
        project(&[3.0, 3.0], &cons),
        Err(Error::ProjectionFailure(_))
    ));
}

#[test]
fn graph_constraint_rows() {
    let o = opts(40);
    let cons = build_graph_constraints(&o);
    assert_eq!(cons.n_vars, 40);
    assert_eq!(cons.count(RowTag::Ordering), 20);
    assert_eq!(cons.count(RowTag::Box), 40);
    let disk = GraphPair::disk(20, 2.0).unwrap();
    assert!(cons.min_residual(&disk.to_vars()) >= 0.0);
}

#[test]
fn options_are_validated() {
    for bad in [
        OptimOptions { n_angles: 41, ..Default::default() },
        OptimOptions { k: 0, ..Default::default() },
        OptimOptions { backtrack: 1.0, ..Default::default() },
        OptimOptions { diameter: -1.0, ..Default::default() },
        OptimOptions { fem_order: 3, ..Default::default() },
    ] {
        assert!(matches!(bad.validate(), Err(Error::InvalidInput(_))));
    }
    assert!(OptimOptions::default().validate().is_ok());
    let o = small_run(1, 1);
    assert!(ascend(&SupportVector::disk(42, 1.0).unwrap(), &o).is_err());
}

#[test]
fn convex_ascent_invariants() {
    let o = small_run(1, 12);
    let st = ascend(&SupportVector::disk(40, 1.0).unwrap(), &o).unwrap();
    assert!(st.history.len() >= 3);
    for w in st.history.windows(2) {
        assert!(w[1].sigma_k >= w[0].sigma_k, "{} -> {}", w[0].sigma_k, w[1].sigma_k);
    }
    assert!(st.sigma_k > st.history[0].sigma_k);
    let cons = build_constraints(&o);
    let Variables::Support(sv) = &st.variables else { panic!("convex mode returns support values") };
    let p = sv.values();
    assert!(cons.min_residual(p) >= -1e-9);
    assert!((p[0] + p[20] - 2.0).abs() < 1e-8);
    assert!(bound_holds(&st, 1));
    assert!((st.objective - st.sigma_k * st.diameter.diameter).abs() < 1e-12);
}

#[test]
fn convex_ascent_projects_an_infeasible_start() {
    let o = small_run(1, 2);
    let st = ascend(&SupportVector::disk(40, 1.3).unwrap(), &o).unwrap();
    let Variables::Support(sv) = &st.variables else { panic!() };
    assert!(build_constraints(&o).min_residual(sv.values()) >= -1e-9);
}

#[test]
fn nonconvex_ascent_invariants() {
    let o = small_run(2, 8);
    let st = ascend_nonconvex(&GraphPair::disk(20, 2.0).unwrap(), &o).unwrap();
    for w in st.history.windows(2) {
        assert!(w[1].sigma_k >= w[0].sigma_k);
    }
    assert!(st.sigma_k > st.history[0].sigma_k);
    let Variables::Graphs(g) = &st.variables else { panic!("graph variables expected") };
    assert!(build_graph_constraints(&o).min_residual(&g.to_vars()) >= -1e-9);
    assert!(bound_holds(&st, 2));
}

#[test]
fn runs_are_deterministic() {
    let o = OptimOptions {
        restarts: 1,
        jobs: 2,
        ..small_run(1, 3)
    };
    let a = optimize(Variables::Support(SupportVector::disk(40, 1.0).unwrap()), &o).unwrap();
    let b = optimize(
        Variables::Support(SupportVector::disk(40, 1.0).unwrap()),
        &OptimOptions { jobs: 1, ..o.clone() },
    )
    .unwrap();
    assert_eq!(a, b);
}

#[test]
fn random_starts_are_seeded_and_project_to_feasible_points() {
    let o = opts(40);
    for convex in [true, false] {
        let a = random_start(&o, convex, 0).unwrap();
        assert_eq!(a, random_start(&o, convex, 0).unwrap());
        assert_ne!(a, random_start(&o, convex, 1).unwrap());
        let cons = if convex { build_constraints(&o) } else { build_graph_constraints(&o) };
        let p = project(&a.values(), &cons).unwrap();
        assert!(cons.min_residual(&p) >= -1e-10);
    }
}

fn perturbed(n: usize) -> impl Strategy<Value = Vec<f64>> {
    prop::collection::vec(0.6..1.4f64, n)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn projection_is_feasible_and_idempotent(p in perturbed(24)) {
        let cons = build_constraints(&opts(24));
        let x = project(&p, &cons).unwrap();
        prop_assert!(cons.min_residual(&x) >= -1e-10);
        let y = project(&x, &cons).unwrap();
        for (a, b) in x.iter().zip(&y) {
            prop_assert!((a - b).abs() < 1e-10);
        }
    }

    #[test]
    fn projection_satisfies_the_obtuse_angle_condition(p in perturbed(24), q in perturbed(24)) {
        let cons = build_constraints(&opts(24));
        let x = project(&p, &cons).unwrap();
        let z = project(&q, &cons).unwrap();
        let ip: f64 = (0..24).map(|i| (p[i] - x[i]) * (z[i] - x[i])).sum();
        prop_assert!(ip <= 1e-9, "{ip}");
    }

    #[test]
    fn residuals_are_affine(p in perturbed(16), q in perturbed(16), t in 0.0..1.0f64) {
        let cons = build_constraints(&opts(16));
        let mix: Vec<f64> = p.iter().zip(&q).map(|(a, b)| t * a + (1.0 - t) * b).collect();
        let (rp, rq, rm) = (cons.residuals(&p), cons.residuals(&q), cons.residuals(&mix));
        for i in 0..rp.len() {
            prop_assert!((rm[i] - (t * rp[i] + (1.0 - t) * rq[i])).abs() < 1e-9);
        }
    }
}

#[test]
fn step_metric_is_symmetric_positive_and_smooth() {
    use steklov_core::optimizer::step_metric;
    let o = opts(16);
    let sv = Variables::Support(SupportVector::disk(16, 1.0).unwrap());
    let m = step_metric(&sv, &o).unwrap();
    assert_eq!(m, m.transpose());
    // constants are not penalized by the cyclic differences
    let ones = nalgebra::DVector::from_element(16, 1.0);
    assert!(((&m * &ones) - &ones).norm() < 1e-12);
    assert!(m.clone().cholesky().is_some());
    let g = Variables::Graphs(GraphPair::disk(8, 2.0).unwrap());
    let mg = step_metric(&g, &o).unwrap();
    assert_eq!(mg.nrows(), 16);
    // the two graphs are not coupled and the pinned ends penalize constants
    assert_eq!(mg[(7, 8)], 0.0);
    assert!((&mg * nalgebra::DVector::from_element(16, 1.0))[0] > 1.0);
    assert!(step_metric(&sv, &OptimOptions { smoothing: 0.0, ..o }).is_none());
}

#[test]
fn euclidean_and_smoothed_steps_both_ascend() {
    for smoothing in [0.0, 0.1] {
        let o = OptimOptions { smoothing, ..small_run(1, 4) };
        let st = ascend(&SupportVector::disk(40, 1.0).unwrap(), &o).unwrap();
        assert!(st.sigma_k > st.history[0].sigma_k + 1e-3, "smoothing {smoothing}");
    }
}
