//! Projected ascent of a Steklov eigenvalue over support values (convex
//! mode) or over two graphs (non-convex mode).

pub mod qp;

use std::f64::consts::PI;

use nalgebra::DMatrix;
use rand::{RngExt, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::constraints::{ConstraintRow, LinearConstraintSet, RowTag, Sense};
use crate::error::{Error, Result};
use crate::fem::{assemble, solve_spectrum, FemSpace, SteklovSpectrum};
use crate::geometry::{
    compute_diameter, diameter_constraints, reconstruct_boundary, BoundaryPolyline,
    DiameterReport, SupportVector,
};
use crate::gradient::{ShapeCalculus, DEFAULT_CLUSTER_TOL};
use crate::graphs::GraphPair;
use crate::mesh::triangulate;

use qp::{solve_qp, Hessian, LeRow};

/// Rows within this slack count as active in snapshots and logs.
pub const ACTIVE_TOL: f64 = 1e-8;

const QP_MAX_ITER: usize = 20_000;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OptimOptions {
    pub n_angles: usize,
    pub diameter: f64,
    pub k: usize,
    pub max_iters: usize,
    /// Initial step multiplying the gradient.
    pub step0: f64,
    pub backtrack: f64,
    pub armijo: f64,
    /// Relative objective change over `stop_window` accepted steps.
    pub stop_tol: f64,
    pub stop_window: usize,
    /// Relative gap below which eigenvalues count as one cluster in gradients.
    pub cluster_tol: f64,
    /// Relative gap above σ_k within which upper branches join the ascent model.
    pub ascent_gap: f64,
    /// Target mesh size as a fraction of the diameter.
    pub mesh_factor: f64,
    pub fem_order: usize,
    /// Smoothing length of the step metric `|d|² + ℓ²|d′|²`, as a fraction
    /// of the diameter; 0 gives the Euclidean projected gradient.
    pub smoothing: f64,
    /// Positivity floor (convex mode) and minimal graph gap (non-convex
    /// mode), as a fraction of the diameter.
    pub p_min_factor: f64,
    pub restarts: usize,
    pub seed: u64,
    pub jobs: usize,
    pub verbose: bool,
}

impl Default for OptimOptions {
    fn default() -> Self {
        Self {
            n_angles: 200,
            diameter: 2.0,
            k: 1,
            max_iters: 500,
            step0: 1.0,
            backtrack: 0.5,
            armijo: 1e-4,
            stop_tol: 1e-7,
            stop_window: 10,
            cluster_tol: DEFAULT_CLUSTER_TOL,
            ascent_gap: 0.05,
            mesh_factor: 0.05,
            fem_order: 2,
            smoothing: 0.1,
            p_min_factor: 1e-3,
            restarts: 3,
            seed: 0,
            jobs: 1,
            verbose: false,
        }
    }
}

impl OptimOptions {
    pub fn validate(&self) -> Result<()> {
        let bad = |what: &str| Err(Error::InvalidInput(format!("optimizer: {what}")));
        if self.n_angles < 8 || !self.n_angles.is_multiple_of(2) {
            return bad("n_angles must be even and at least 8");
        }
        if self.k == 0 {
            return bad("k must be at least 1");
        }
        if self.max_iters == 0 || self.stop_window == 0 || self.jobs == 0 {
            return bad("iteration counts must be positive");
        }
        let positive = [
            self.diameter,
            self.step0,
            self.armijo,
            self.stop_tol,
            self.cluster_tol,
            self.ascent_gap,
            self.mesh_factor,
            self.p_min_factor,
        ];
        if positive.iter().any(|v| !(v.is_finite() && *v > 0.0)) {
            return bad("tolerances, steps and sizes must be positive");
        }
        if !(self.backtrack > 0.0 && self.backtrack < 1.0) {
            return bad("backtracking factor must lie in (0, 1)");
        }
        if !(self.smoothing.is_finite() && self.smoothing >= 0.0) {
            return bad("smoothing must be nonnegative");
        }
        if self.fem_order != 1 && self.fem_order != 2 {
            return bad("finite element order must be 1 or 2");
        }
        Ok(())
    }

    pub fn mesh_h(&self) -> f64 {
        self.mesh_factor * self.diameter
    }

    pub fn p_min(&self) -> f64 {
        self.p_min_factor * self.diameter
    }

    /// Graph values per graph in non-convex mode.
    pub fn graph_len(&self) -> usize {
        self.n_angles / 2
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Variables {
    Support(SupportVector),
    Graphs(GraphPair),
}

impl Variables {
    pub fn values(&self) -> Vec<f64> {
        match self {
            Variables::Support(sv) => sv.values().to_vec(),
            Variables::Graphs(g) => g.to_vars(),
        }
    }

    pub fn with_values(&self, values: &[f64]) -> Result<Self> {
        Ok(match self {
            Variables::Support(_) => Variables::Support(SupportVector::new(values.to_vec())?),
            Variables::Graphs(g) => Variables::Graphs(GraphPair::from_vars(values, g.span)?),
        })
    }

    pub fn polyline(&self) -> Result<BoundaryPolyline> {
        match self {
            Variables::Support(sv) => reconstruct_boundary(sv),
            Variables::Graphs(g) => g.to_polyline(),
        }
    }
}

/// A meshed and solved candidate shape.
#[derive(Debug, Clone)]
pub struct Evaluation {
    pub poly: BoundaryPolyline,
    pub space: FemSpace,
    pub spectrum: SteklovSpectrum,
    pub diameter: DiameterReport,
}

impl Evaluation {
    pub fn sigma(&self, k: usize) -> f64 {
        self.spectrum.eigenvalues[k]
    }

    pub fn objective(&self, k: usize) -> f64 {
        self.sigma(k) * self.diameter.diameter
    }
}

/// Meshes the shape described by `vars` and solves for σ_0..σ_{k+3}.
pub fn evaluate(vars: &Variables, opts: &OptimOptions) -> Result<Evaluation> {
    let poly = vars.polyline()?;
    let mesh = triangulate(&poly, opts.mesh_h())?;
    let space = FemSpace::new(mesh, opts.fem_order)?;
    let (k, b) = assemble(&space);
    let spectrum = solve_spectrum(&space, &k, &b, opts.k + 3)?;
    let diameter = compute_diameter(&poly)?;
    Ok(Evaluation {
        poly,
        space,
        spectrum,
        diameter,
    })
}

/// One accepted iterate.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct IterateRecord {
    pub iteration: usize,
    pub sigma_k: f64,
    /// σ_k·D with the measured diameter.
    pub objective: f64,
    pub area: f64,
    pub diameter: f64,
    pub step: f64,
    /// Number of eigenvalue branches in the ascent model.
    pub cluster: usize,
    pub active: Vec<(RowTag, usize)>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct OptimState {
    /// Final iterate, which is also the best one since accepted steps never
    /// decrease σ_k.
    pub variables: Variables,
    pub eigenvalues: Vec<f64>,
    pub sigma_k: f64,
    pub objective: f64,
    pub diameter: DiameterReport,
    pub history: Vec<IterateRecord>,
    pub active_set: Vec<(RowTag, usize)>,
    pub iterations: usize,
    pub converged: bool,
    /// Backtracking hit the minimal step without an acceptable candidate.
    pub no_ascent: bool,
    /// Non-convex mode: measured diameter within `d·(1 + 1e−3)`.
    pub diameter_ok: bool,
    /// 0 for the given start, `r` for the r-th random restart.
    pub start: usize,
}

/// Convexity, width, anchor and positivity rows over the support values.
pub fn build_constraints(opts: &OptimOptions) -> LinearConstraintSet {
    let n = opts.n_angles;
    let h = 2.0 * PI / n as f64;
    let c = 1.0 / (h * h);
    let mut rows: Vec<ConstraintRow> = (0..n)
        .map(|i| ConstraintRow {
            coeffs: vec![((i + n - 1) % n, c), (i, 1.0 - 2.0 * c), ((i + 1) % n, c)],
            bound: 0.0,
            sense: Sense::Ge,
            tag: RowTag::Convexity,
        })
        .collect();
    rows.extend(diameter_constraints(n, opts.diameter));
    rows.extend((0..n).map(|i| ConstraintRow {
        coeffs: vec![(i, 1.0)],
        bound: opts.p_min(),
        sense: Sense::Ge,
        tag: RowTag::Positivity,
    }));
    LinearConstraintSet::new(n, rows)
}

/// Ordering rows `q_i − p_i >= gap` and box rows `p_i >= −d/2`,
/// `q_i <= d/2` over `GraphPair::to_vars` ordering.
pub fn build_graph_constraints(opts: &OptimOptions) -> LinearConstraintSet {
    let n = opts.graph_len();
    let r = 0.5 * opts.diameter;
    let mut rows: Vec<ConstraintRow> = (0..n)
        .map(|i| ConstraintRow {
            coeffs: vec![(i, -1.0), (n + i, 1.0)],
            bound: opts.p_min(),
            sense: Sense::Ge,
            tag: RowTag::Ordering,
        })
        .collect();
    rows.extend((0..n).map(|i| ConstraintRow {
        coeffs: vec![(i, 1.0)],
        bound: -r,
        sense: Sense::Ge,
        tag: RowTag::Box,
    }));
    rows.extend((0..n).map(|i| ConstraintRow {
        coeffs: vec![(n + i, 1.0)],
        bound: r,
        sense: Sense::Le,
        tag: RowTag::Box,
    }));
    LinearConstraintSet::new(2 * n, rows)
}

fn le_rows(cons: &LinearConstraintSet) -> Vec<LeRow> {
    cons.rows
        .iter()
        .map(|r| {
            let (coeffs, bound) = r.as_le();
            LeRow { coeffs, bound }
        })
        .collect()
}

/// Euclidean projection onto the constraint polyhedron. Feasible points are
/// returned unchanged.
pub fn project(vars: &[f64], cons: &LinearConstraintSet) -> Result<Vec<f64>> {
    if vars.len() != cons.n_vars {
        return Err(Error::InvalidInput(format!(
            "optimizer: {} values for {} variables",
            vars.len(),
            cons.n_vars
        )));
    }
    if cons.is_feasible(vars, 0.0) {
        return Ok(vars.to_vec());
    }
    let hess = vec![1.0; vars.len()];
    let linear: Vec<f64> = vars.iter().map(|v| -v).collect();
    let scale = 1.0 + vars.iter().fold(0.0f64, |m, v| m.max(v.abs()));
    let sol = solve_qp(Hessian::Diagonal(&hess), &linear, &le_rows(cons), 1e-13 * scale, QP_MAX_ITER)?;
    Ok(sol.x)
}

/// First-order model of σ_k near the current iterate: for unit `v` over the
/// branches `k..k+m`, `σ_k(x + d) ≈ min_v vᵀ(Λ − σ_k + M(d))v`, where
/// `M(d)_ab = g_ab·d`.
struct AscentModel {
    offsets: Vec<f64>,
    /// Row-major `m × m` entry gradients.
    pair_grads: Vec<Vec<f64>>,
}

impl AscentModel {
    fn size(&self) -> usize {
        self.offsets.len()
    }

    fn cut(&self, v: &[f64]) -> (Vec<f64>, f64) {
        let m = self.size();
        let n = self.pair_grads[0].len();
        let mut g = vec![0.0; n];
        let mut off = 0.0;
        for a in 0..m {
            off += v[a] * v[a] * self.offsets[a];
            for b in 0..m {
                let w = v[a] * v[b];
                for (gi, x) in g.iter_mut().zip(&self.pair_grads[a * m + b]) {
                    *gi += w * x;
                }
            }
        }
        (g, off)
    }

    /// Model value at `d` and its minimizing unit vector.
    fn value(&self, d: &[f64]) -> (f64, Vec<f64>) {
        let m = self.size();
        let mat = DMatrix::from_fn(m, m, |a, b| {
            let md: f64 = self.pair_grads[a * m + b].iter().zip(d).map(|(g, x)| g * x).sum();
            md + if a == b { self.offsets[a] } else { 0.0 }
        });
        let eig = mat.symmetric_eigen();
        let (i, val) = eig
            .eigenvalues
            .iter()
            .copied()
            .enumerate()
            .min_by(|a, b| a.1.total_cmp(&b.1))
            .expect("model has a branch");
        (val, eig.eigenvectors.column(i).iter().copied().collect())
    }
}

fn ascent_model(eval: &Evaluation, vars: &Variables, opts: &OptimOptions) -> Result<AscentModel> {
    let k = opts.k;
    let eigs = &eval.spectrum.eigenvalues;
    let mut hi = k + 1;
    while hi < eigs.len() && eigs[hi] - eigs[k] <= opts.ascent_gap * eigs[k] {
        hi += 1;
    }
    let calc = ShapeCalculus::new(&eval.space, &eval.spectrum, &eval.poly)?;
    let mut pair_grads = Vec::new();
    for a in k..hi {
        for b in k..hi {
            pair_grads.push(match vars {
                Variables::Support(_) => calc.support_pair_gradient(a, b)?,
                Variables::Graphs(g) => calc.graph_pair_gradient(a, b, g)?,
            });
        }
    }
    Ok(AscentModel {
        offsets: (k..hi).map(|j| eigs[j] - eigs[k]).collect(),
        pair_grads,
    })
}

/// Unit vectors seeding the cutting-plane description of the model.
fn initial_cut_vectors(m: usize, rng: &mut ChaCha8Rng) -> Vec<Vec<f64>> {
    if m == 1 {
        return vec![vec![1.0]];
    }
    if m == 2 {
        return (0..16)
            .map(|i| {
                let a = PI * i as f64 / 16.0;
                vec![a.cos(), a.sin()]
            })
            .collect();
    }
    let mut out = Vec::new();
    for a in 0..m {
        let mut v = vec![0.0; m];
        v[a] = 1.0;
        out.push(v);
        for b in a + 1..m {
            for s in [1.0, -1.0] {
                let mut v = vec![0.0; m];
                v[a] = std::f64::consts::FRAC_1_SQRT_2;
                v[b] = s * std::f64::consts::FRAC_1_SQRT_2;
                out.push(v);
            }
        }
    }
    for _ in 0..8 * m {
        let v: Vec<f64> = (0..m).map(|_| rng.random::<f64>() - 0.5).collect();
        let nrm = v.iter().map(|x| x * x).sum::<f64>().sqrt();
        if nrm > 1e-3 {
            out.push(v.iter().map(|x| x / nrm).collect());
        }
    }
    out
}

/// `I + (ℓ/Δ)² D₁ᵀD₁` with first differences `D₁` along the boundary:
/// cyclic for support values, and per graph with the fixed zero ends for
/// graph values. `Δ` is the spacing of the variables along the boundary.
pub fn step_metric(vars: &Variables, opts: &OptimOptions) -> Option<DMatrix<f64>> {
    if opts.smoothing == 0.0 {
        return None;
    }
    let ell = opts.smoothing * opts.diameter;
    let (n, spacing, chains): (usize, f64, Vec<(usize, usize, bool)>) = match vars {
        Variables::Support(sv) => {
            let n = sv.len();
            (n, 0.5 * opts.diameter * 2.0 * PI / n as f64, vec![(0, n, true)])
        }
        Variables::Graphs(g) => {
            let n = g.len();
            (2 * n, g.span / (n + 1) as f64, vec![(0, n, false), (n, n, false)])
        }
    };
    let c = (ell / spacing).powi(2);
    let mut m = DMatrix::identity(n, n);
    for (off, len, cyclic) in chains {
        for i in 0..len {
            // difference between i and i + 1 within the chain
            let a = off + i;
            if i + 1 < len || cyclic {
                let b = off + (i + 1) % len;
                m[(a, a)] += c;
                m[(b, b)] += c;
                m[(a, b)] -= c;
                m[(b, a)] -= c;
            }
        }
        if !cyclic {
            // differences against the pinned ends
            m[(off, off)] += c;
            m[(off + len - 1, off + len - 1)] += c;
        }
    }
    Some(m)
}

/// Step `d` maximizing `model(d) − dᵀMd/(2s)` with `x + d` feasible, and
/// the model value at `d`.
fn ascent_direction(
    x: &[f64],
    model: &AscentModel,
    cons: &LinearConstraintSet,
    s: f64,
    metric: Option<&DMatrix<f64>>,
    rng: &mut ChaCha8Rng,
) -> Result<(Vec<f64>, f64)> {
    let n = x.len();
    if model.size() == 1 && metric.is_none() {
        let g = &model.pair_grads[0];
        let target: Vec<f64> = x.iter().zip(g).map(|(xi, gi)| xi + s * gi).collect();
        let y = project(&target, cons)?;
        let d: Vec<f64> = y.iter().zip(x).map(|(a, b)| a - b).collect();
        let pred = g.iter().zip(&d).map(|(a, b)| a * b).sum();
        return Ok((d, pred));
    }
    let gnorm2 = model
        .pair_grads
        .iter()
        .map(|g| g.iter().map(|v| v * v).sum::<f64>())
        .fold(0.0f64, f64::max)
        .max(1e-300);
    let t_weight = 1e-6 / (s * gnorm2);
    let diag;
    let dense;
    let hess = match metric {
        None => {
            let mut h = vec![1.0 / s; n + 1];
            h[n] = t_weight;
            diag = h;
            Hessian::Diagonal(&diag)
        }
        Some(m) => {
            let mut h = DMatrix::zeros(n + 1, n + 1);
            h.view_mut((0, 0), (n, n)).copy_from(&(m / s));
            h[(n, n)] = t_weight;
            dense = h;
            Hessian::Dense(&dense)
        }
    };
    let mut linear = vec![0.0; n + 1];
    linear[n] = -1.0;
    let mut rows: Vec<LeRow> = cons
        .rows
        .iter()
        .map(|r| {
            let (coeffs, bound) = r.as_le();
            let ax: f64 = coeffs.iter().map(|&(i, a)| a * x[i]).sum();
            LeRow {
                coeffs,
                bound: bound - ax,
            }
        })
        .collect();
    let add_cut = |rows: &mut Vec<LeRow>, v: &[f64]| {
        let (g, off) = model.cut(v);
        let mut coeffs: Vec<(usize, f64)> = g.iter().enumerate().map(|(i, &a)| (i, -a)).collect();
        coeffs.push((n, 1.0));
        rows.push(LeRow { coeffs, bound: off });
    };
    for v in initial_cut_vectors(model.size(), rng) {
        add_cut(&mut rows, &v);
    }
    let mut best = None;
    for _ in 0..8 {
        let sol = solve_qp(hess, &linear, &rows, 1e-14, QP_MAX_ITER)?;
        let d = sol.x[..n].to_vec();
        let t = sol.x[n];
        let (val, v) = model.value(&d);
        let done = t - val <= 0.05 * t.abs().max(1e-300);
        best = Some((d, val));
        if done {
            break;
        }
        add_cut(&mut rows, &v);
    }
    Ok(best.expect("at least one QP solve"))
}

fn record(
    iteration: usize,
    eval: &Evaluation,
    x: &[f64],
    cons: &LinearConstraintSet,
    opts: &OptimOptions,
    step: f64,
    cluster: usize,
) -> IterateRecord {
    IterateRecord {
        iteration,
        sigma_k: eval.sigma(opts.k),
        objective: eval.objective(opts.k),
        area: eval.poly.area(),
        diameter: eval.diameter.diameter,
        step,
        cluster,
        active: cons.active_counts(x, ACTIVE_TOL),
    }
}

fn log_line(r: &IterateRecord) {
    let active: Vec<String> = r
        .active
        .iter()
        .map(|(t, c)| format!("{}={c}", format!("{t:?}").to_lowercase()))
        .collect();
    println!(
        "{}\t{:.10}\t{:.10}\t{:.3e}\t{}\t{}",
        r.iteration,
        r.sigma_k,
        r.objective,
        r.step,
        active.join(","),
        r.cluster
    );
}

fn run(initial: Variables, cons: &LinearConstraintSet, opts: &OptimOptions, start: usize) -> Result<OptimState> {
    opts.validate()?;
    let k = opts.k;
    let mut x = initial.values();
    if !cons.is_feasible(&x, 1e-12) {
        x = project(&x, cons)?;
    }
    let mut vars = initial.with_values(&x)?;
    let mut eval = evaluate(&vars, opts)?;
    let mut rng = ChaCha8Rng::seed_from_u64(opts.seed ^ (start as u64).wrapping_mul(0x9E37_79B9_7F4A_7C15));
    let mut history = vec![record(0, &eval, &x, cons, opts, 0.0, 1)];
    if opts.verbose {
        log_line(&history[0]);
    }
    let metric = step_metric(&vars, opts);
    let mut s = opts.step0;
    let s_min = opts.step0 * 1e-10;
    let mut converged = false;
    let mut no_ascent = false;
    let mut iterations = 0;
    while iterations < opts.max_iters {
        iterations += 1;
        let model = ascent_model(&eval, &vars, opts)?;
        let sigma = eval.sigma(k);
        let mut first = true;
        let mut ratio = 0.0;
        let mut accepted = None;
        loop {
            if s < s_min {
                no_ascent = true;
                break;
            }
            let (d, pred) = match ascent_direction(&x, &model, cons, s, metric.as_ref(), &mut rng) {
                Ok(r) => r,
                Err(Error::ProjectionFailure(_)) => {
                    s *= opts.backtrack;
                    first = false;
                    continue;
                }
                Err(e) => return Err(e),
            };
            if pred <= 1e-15 * sigma {
                converged = true;
                break;
            }
            let cand: Vec<f64> = x.iter().zip(&d).map(|(a, b)| a + b).collect();
            let cand_vars = match vars.with_values(&cand) {
                Ok(v) => v,
                Err(Error::InvalidInput(_)) => {
                    s *= opts.backtrack;
                    first = false;
                    continue;
                }
                Err(e) => return Err(e),
            };
            match evaluate(&cand_vars, opts) {
                Ok(e) if e.sigma(k) >= sigma + opts.armijo * pred => {
                    ratio = (e.sigma(k) - sigma) / pred;
                    accepted = Some((cand, cand_vars, e));
                    break;
                }
                Ok(_) => {}
                Err(e) if e.is_candidate_rejection() => {}
                Err(e) => return Err(e),
            }
            s *= opts.backtrack;
            first = false;
        }
        let Some((cx, cv, ce)) = accepted else { break };
        x = cx;
        vars = cv;
        eval = ce;
        let rec = record(iterations, &eval, &x, cons, opts, s, model.size());
        if opts.verbose {
            log_line(&rec);
        }
        history.push(rec);
        // the next trial step follows the agreement between model and objective
        if first && ratio > 0.75 {
            s *= 2.0;
        } else if ratio < 0.25 {
            s *= opts.backtrack;
        }
        let h = history.len();
        if h > opts.stop_window {
            let old = history[h - 1 - opts.stop_window].sigma_k;
            let now = history[h - 1].sigma_k;
            if (now - old).abs() <= opts.stop_tol * now.abs() {
                converged = true;
                break;
            }
        }
    }
    let d = eval.diameter.clone();
    Ok(OptimState {
        eigenvalues: eval.spectrum.eigenvalues.clone(),
        sigma_k: eval.sigma(k),
        objective: eval.objective(k),
        diameter_ok: d.diameter <= opts.diameter * (1.0 + 1e-3),
        diameter: d,
        active_set: cons.active_counts(&x, ACTIVE_TOL),
        variables: vars,
        history,
        iterations,
        converged,
        no_ascent,
        start,
    })
}

/// Convex-mode ascent from `initial` (projected first if infeasible).
pub fn ascend(initial: &SupportVector, opts: &OptimOptions) -> Result<OptimState> {
    opts.validate()?;
    if initial.len() != opts.n_angles {
        return Err(Error::InvalidInput(format!(
            "optimizer: {} support values for {} angles",
            initial.len(),
            opts.n_angles
        )));
    }
    run(Variables::Support(initial.clone()), &build_constraints(opts), opts, 0)
}

/// Non-convex-mode ascent over two graphs.
pub fn ascend_nonconvex(initial: &GraphPair, opts: &OptimOptions) -> Result<OptimState> {
    opts.validate()?;
    if initial.len() != opts.graph_len() || (initial.span - opts.diameter).abs() > 1e-12 * opts.diameter {
        return Err(Error::InvalidInput(format!(
            "optimizer: graphs need {} values over a span of {}",
            opts.graph_len(),
            opts.diameter
        )));
    }
    run(Variables::Graphs(initial.clone()), &build_graph_constraints(opts), opts, 0)
}

/// A random smooth perturbation of the disk, seeded by `(seed, r)`; it may
/// be infeasible and is projected by the ascent.
pub fn random_start(opts: &OptimOptions, convex: bool, r: usize) -> Result<Variables> {
    let mut rng = ChaCha8Rng::seed_from_u64(opts.seed.wrapping_add(1 + r as u64));
    let radius = 0.5 * opts.diameter;
    let coeffs: Vec<(f64, f64)> = (2..=6)
        .map(|m| {
            let amp = 0.15 / m as f64;
            (amp * (2.0 * rng.random::<f64>() - 1.0), amp * (2.0 * rng.random::<f64>() - 1.0))
        })
        .collect();
    let bump = move |t: f64| {
        1.0 + coeffs
            .iter()
            .enumerate()
            .map(|(j, (a, b))| {
                let m = (j + 2) as f64;
                a * (m * t).cos() + b * (m * t).sin()
            })
            .sum::<f64>()
    };
    if convex {
        return Ok(Variables::Support(SupportVector::from_fn(opts.n_angles, |t| {
            radius * bump(t)
        })?));
    }
    let disk = GraphPair::disk(opts.graph_len(), opts.diameter)?;
    let n = disk.len();
    let p: Vec<f64> = (0..n)
        .map(|i| disk.p[i] * bump(PI + PI * (i + 1) as f64 / (n + 1) as f64))
        .collect();
    let q: Vec<f64> = (0..n)
        .map(|i| disk.q[i] * bump(PI - PI * (i + 1) as f64 / (n + 1) as f64))
        .collect();
    Ok(Variables::Graphs(GraphPair::new(p, q, opts.diameter)?))
}

/// Runs the ascent from `initial` and from `opts.restarts` seeded random
/// starts, on up to `opts.jobs` threads, and keeps the largest σ_k·D.
/// Non-convex runs must also pass the diameter check to be kept, unless
/// none does.
pub fn optimize(initial: Variables, opts: &OptimOptions) -> Result<OptimState> {
    best_of(optimize_all(initial, opts)?)
}

/// The start kept by [`optimize`]; the first error if every start failed.
pub fn best_of(results: Vec<Result<OptimState>>) -> Result<OptimState> {
    let mut best: Option<OptimState> = None;
    let mut first_err = None;
    for res in results {
        match res {
            Ok(st) => {
                let better = match &best {
                    None => true,
                    Some(b) => (st.diameter_ok, st.objective) > (b.diameter_ok, b.objective),
                };
                if better {
                    best = Some(st);
                }
            }
            Err(e) => {
                first_err.get_or_insert(e);
            }
        }
    }
    match (best, first_err) {
        (Some(b), _) => Ok(b),
        (None, Some(e)) => Err(e),
        (None, None) => Err(Error::InvalidInput("optimizer: no starts".into())),
    }
}

/// Every start of [`optimize`], in start order.
pub fn optimize_all(initial: Variables, opts: &OptimOptions) -> Result<Vec<Result<OptimState>>> {
    opts.validate()?;
    let convex = matches!(initial, Variables::Support(_));
    let cons = if convex {
        build_constraints(opts)
    } else {
        build_graph_constraints(opts)
    };
    let mut starts = vec![initial];
    for r in 0..opts.restarts {
        starts.push(random_start(opts, convex, r)?);
    }
    Ok(run_starts(starts, &cons, opts))
}

fn run_starts(starts: Vec<Variables>, cons: &LinearConstraintSet, opts: &OptimOptions) -> Vec<Result<OptimState>> {
    let jobs = opts.jobs.min(starts.len()).max(1);
    if jobs == 1 {
        return starts
            .into_iter()
            .enumerate()
            .map(|(i, v)| run(v, cons, opts, i))
            .collect();
    }
    let mut slots: Vec<Option<Result<OptimState>>> = (0..starts.len()).map(|_| None).collect();
    let next = std::sync::atomic::AtomicUsize::new(0);
    let out = std::sync::Mutex::new(&mut slots);
    std::thread::scope(|scope| {
        for _ in 0..jobs {
            scope.spawn(|| loop {
                let i = next.fetch_add(1, std::sync::atomic::Ordering::SeqCst);
                if i >= starts.len() {
                    break;
                }
                let r = run(starts[i].clone(), cons, opts, i);
                out.lock().expect("result lock")[i] = Some(r);
            });
        }
    });
    slots.into_iter().map(|r| r.expect("every start ran")).collect()
}
