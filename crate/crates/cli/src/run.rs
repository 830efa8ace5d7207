//! Executes a configured run and writes its artifacts.

use std::fmt::Write as _;
use std::path::{Path, PathBuf};
use std::time::Instant;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use steklov_core::experiments::{
    bound_check_values, disk_perturbation_slope, multiplicity_from_eigenvalues, perturbed_disk,
    BoundCheck, DiskDiscretization, PerturbationSpec,
};
use steklov_core::fem::{assemble, solve_spectrum, FemSpace};
use steklov_core::geometry::{compute_diameter, BoundaryPolyline, SupportVector};
use steklov_core::graphs::GraphPair;
use steklov_core::mesh::triangulate;
use steklov_core::optimizer::{best_of, evaluate, optimize_all, IterateRecord, OptimState, Variables};

use crate::config::{ConfigError, Initial, Mode, RunConfig};

#[derive(Debug, Error)]
pub enum RunError {
    #[error(transparent)]
    Config(#[from] ConfigError),
    #[error(transparent)]
    Solver(#[from] steklov_core::Error),
    #[error("output: {0}")]
    Io(String),
}

impl RunError {
    /// 2 on solver failure, 3 on configuration error.
    pub fn exit_code(&self) -> i32 {
        match self {
            RunError::Config(_) => 3,
            RunError::Solver(_) | RunError::Io(_) => 2,
        }
    }
}

/// Pass/fail summary written by experiment and benchmark modes.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Verdict {
    pub pass: bool,
    pub report: serde_json::Value,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RunResult {
    pub config: RunConfig,
    /// σ_k·D with the measured diameter.
    pub objective: f64,
    pub sigma_k: f64,
    pub eigenvalues: Vec<f64>,
    pub diameter: f64,
    pub diameter_pairs: Vec<(usize, usize)>,
    pub area: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub support: Option<Vec<f64>>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub graphs: Option<GraphPair>,
    pub history: Vec<IterateRecord>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub converged: Option<bool>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub experiment: Option<Verdict>,
    pub wall_time_s: f64,
    #[serde(skip)]
    pub polyline: Option<BoundaryPolyline>,
    /// Every optimizer start, including the one reported.
    #[serde(skip)]
    pub starts: Vec<OptimState>,
    /// Extra rows for history.csv when there is no iterate history.
    #[serde(skip)]
    pub table: Option<(String, Vec<Vec<f64>>)>,
}

/// What an `--initial file:` points at.
#[derive(Debug, Clone)]
pub enum LoadedShape {
    Variables(Variables),
    Polyline(BoundaryPolyline),
}

#[derive(Debug, Deserialize)]
struct ShapeFile {
    support: Option<Vec<f64>>,
    graphs: Option<GraphPair>,
    #[serde(default)]
    history: Vec<HistoryRow>,
}

/// The bound-relevant part of a stored iterate.
#[derive(Debug, Clone, Copy, Deserialize)]
pub struct HistoryRow {
    pub sigma_k: f64,
    pub area: f64,
    pub diameter: f64,
}

fn config_err(path: &Path, msg: impl ToString) -> RunError {
    RunError::Config(ConfigError::Io {
        path: path.display().to_string(),
        msg: msg.to_string(),
    })
}

/// Reads a polyline CSV (`.csv`) or a JSON file with `support` or `graphs`.
pub fn load_shape(path: &Path) -> Result<(LoadedShape, Vec<HistoryRow>), RunError> {
    let text = std::fs::read_to_string(path).map_err(|e| config_err(path, e))?;
    if path.extension().is_some_and(|e| e.eq_ignore_ascii_case("csv")) {
        let mut poly = BoundaryPolyline::from_csv(&text).map_err(|e| config_err(path, e))?;
        if poly.signed_area() < 0.0 {
            let mut v = poly.vertices().to_vec();
            v.reverse();
            poly = BoundaryPolyline::new(v)?;
        }
        return Ok((LoadedShape::Polyline(poly), Vec::new()));
    }
    let file: ShapeFile = serde_json::from_str(&text).map_err(|e| config_err(path, e))?;
    let vars = match (file.support, file.graphs) {
        (Some(s), None) => Variables::Support(SupportVector::new(s).map_err(|e| config_err(path, e))?),
        (None, Some(g)) => Variables::Graphs(
            GraphPair::new(g.p, g.q, g.span).map_err(|e| config_err(path, e))?,
        ),
        _ => return Err(config_err(path, "expected exactly one of 'support' or 'graphs'")),
    };
    Ok((LoadedShape::Variables(vars), file.history))
}

fn initial_variables(cfg: &RunConfig, convex: bool) -> Result<Variables, RunError> {
    let vars = match &cfg.initial {
        Initial::Disk if convex => Variables::Support(SupportVector::disk(cfg.n_angles, 0.5 * cfg.diameter)?),
        Initial::Disk => Variables::Graphs(GraphPair::disk(cfg.n_angles / 2, cfg.diameter)?),
        Initial::File(p) => match load_shape(p)?.0 {
            LoadedShape::Variables(v) => v,
            LoadedShape::Polyline(_) => {
                return Err(config_err(p, "optimization needs support or graph values, not a polyline"))
            }
        },
    };
    let ok = match &vars {
        Variables::Support(sv) => convex && sv.len() == cfg.n_angles,
        Variables::Graphs(g) => {
            !convex && g.len() == cfg.n_angles / 2 && (g.span - cfg.diameter).abs() <= 1e-12 * cfg.diameter
        }
    };
    if !ok {
        let what = if convex {
            format!("{} support values", cfg.n_angles)
        } else {
            format!("two graphs of {} values over a span of {}", cfg.n_angles / 2, cfg.diameter)
        };
        return Err(RunError::Config(ConfigError::BadValue {
            key: "initial".into(),
            value: cfg.initial.to_string(),
            reason: format!("mode {} needs {what}", cfg.mode),
        }));
    }
    Ok(vars)
}

fn initial_polyline(cfg: &RunConfig) -> Result<(BoundaryPolyline, Vec<HistoryRow>), RunError> {
    match &cfg.initial {
        Initial::Disk => Ok((
            Variables::Support(SupportVector::disk(cfg.n_angles, 0.5 * cfg.diameter)?).polyline()?,
            Vec::new(),
        )),
        Initial::File(p) => {
            let (shape, hist) = load_shape(p)?;
            let poly = match shape {
                LoadedShape::Variables(v) => v.polyline()?,
                LoadedShape::Polyline(b) => b,
            };
            Ok((poly, hist))
        }
    }
}

struct Solved {
    eigenvalues: Vec<f64>,
    diameter: f64,
    pairs: Vec<(usize, usize)>,
}

fn solve_polyline(poly: &BoundaryPolyline, h: f64, m: usize) -> Result<Solved, RunError> {
    let space = FemSpace::new(triangulate(poly, h)?, 2)?;
    let (k, b) = assemble(&space);
    let spec = solve_spectrum(&space, &k, &b, m)?;
    let d = compute_diameter(poly)?;
    Ok(Solved {
        eigenvalues: spec.eigenvalues,
        diameter: d.diameter,
        pairs: d.pairs,
    })
}

fn shape_result(cfg: &RunConfig, poly: BoundaryPolyline, solved: Solved) -> RunResult {
    let sigma_k = solved.eigenvalues[cfg.k];
    RunResult {
        config: cfg.clone(),
        objective: sigma_k * solved.diameter,
        sigma_k,
        eigenvalues: solved.eigenvalues,
        diameter: solved.diameter,
        diameter_pairs: solved.pairs,
        area: poly.area(),
        support: None,
        graphs: None,
        history: Vec::new(),
        converged: None,
        experiment: None,
        wall_time_s: 0.0,
        polyline: Some(poly),
        starts: Vec::new(),
        table: None,
    }
}

fn optimize_result(cfg: &RunConfig, st: OptimState) -> Result<RunResult, RunError> {
    let poly = st.variables.polyline()?;
    let (support, graphs) = match &st.variables {
        Variables::Support(sv) => (Some(sv.values().to_vec()), None),
        Variables::Graphs(g) => (None, Some(g.clone())),
    };
    Ok(RunResult {
        config: cfg.clone(),
        objective: st.objective,
        sigma_k: st.sigma_k,
        eigenvalues: st.eigenvalues,
        diameter: st.diameter.diameter,
        diameter_pairs: st.diameter.pairs,
        area: poly.area(),
        support,
        graphs,
        history: st.history,
        converged: Some(st.converged),
        experiment: None,
        wall_time_s: 0.0,
        polyline: Some(poly),
        starts: Vec::new(),
        table: None,
    })
}

fn verdict(pass: bool, report: impl Serialize) -> Option<Verdict> {
    Some(Verdict {
        pass,
        report: serde_json::to_value(report).expect("reports serialize"),
    })
}

/// Relative tolerance of the disk benchmark.
pub const DISK_BENCHMARK_TOL: f64 = 5e-3;
/// Upper gap below which σ_k counts as multiple.
pub const MULTIPLICITY_TOL: f64 = 2e-2;
/// Agreement required between measured and predicted perturbation slopes.
pub const SLOPE_TOL: f64 = 0.1;

/// Runs the configured pipeline without touching the filesystem.
pub fn execute(cfg: &RunConfig) -> Result<RunResult, RunError> {
    let t0 = Instant::now();
    let mut res = match cfg.mode {
        Mode::OptimizeConvex | Mode::OptimizeNonconvex => {
            let vars = initial_variables(cfg, cfg.mode == Mode::OptimizeConvex)?;
            let starts: Vec<OptimState> = optimize_all(vars, &cfg.optim_options())?
                .into_iter()
                .collect::<Result<_, _>>()?;
            let mut res = optimize_result(cfg, best_of(starts.iter().cloned().map(Ok).collect())?)?;
            res.starts = starts;
            res
        }
        Mode::Spectrum => {
            let (poly, _) = initial_polyline(cfg)?;
            let solved = solve_polyline(&poly, cfg.mesh_h(), cfg.k + 3)?;
            shape_result(cfg, poly, solved)
        }
        Mode::BenchmarkDisk => {
            let poly = Variables::Support(SupportVector::disk(cfg.n_angles, 0.5 * cfg.diameter)?).polyline()?;
            let solved = solve_polyline(&poly, cfg.mesh_h(), 8.max(cfg.k + 1))?;
            let r = 0.5 * cfg.diameter;
            let errors: Vec<f64> = (1..=8usize)
                .map(|i| {
                    let exact = i.div_ceil(2) as f64 / r;
                    (solved.eigenvalues[i] - exact).abs() / exact
                })
                .collect();
            let worst = errors.iter().copied().fold(0.0, f64::max);
            let mut res = shape_result(cfg, poly, solved);
            res.experiment = verdict(
                worst < DISK_BENCHMARK_TOL,
                serde_json::json!({ "relative_errors": errors, "max_relative_error": worst, "tolerance": DISK_BENCHMARK_TOL }),
            );
            res
        }
        Mode::ExperimentBound => {
            let (poly, hist) = initial_polyline(cfg)?;
            let solved = solve_polyline(&poly, cfg.mesh_h(), cfg.k + 3)?;
            let res0 = shape_result(cfg, poly, solved);
            let fin = bound_check_values(
                cfg.k,
                res0.sigma_k,
                res0.area,
                res0.diameter,
            )?;
            let stored: Vec<BoundCheck> = hist
                .iter()
                .map(|h| bound_check_values(cfg.k, h.sigma_k, h.area, h.diameter))
                .collect::<Result<_, _>>()?;
            let pass = fin.pass && stored.iter().all(|c| c.pass);
            let worst = stored.iter().map(|c| c.margin_ratio).fold(fin.margin_ratio, f64::max);
            let mut res = res0;
            res.experiment = verdict(
                pass,
                serde_json::json!({ "final": fin, "history_checked": stored.len(), "worst_margin_ratio": worst }),
            );
            res
        }
        Mode::ExperimentMultiplicity => {
            let (poly, _) = initial_polyline(cfg)?;
            let solved = solve_polyline(&poly, cfg.mesh_h(), cfg.k + 3)?;
            let rep = multiplicity_from_eigenvalues(&solved.eigenvalues, cfg.k)?;
            let mut res = shape_result(cfg, poly, solved);
            res.experiment = verdict(
                rep.upper_gap < MULTIPLICITY_TOL,
                serde_json::json!({ "gaps": rep, "tolerance": MULTIPLICITY_TOL }),
            );
            res
        }
        Mode::ExperimentSlope => {
            let spec = PerturbationSpec {
                a2: cfg.a2,
                a4: cfg.a4,
                epsilons: cfg.epsilons.clone(),
            };
            let disc = DiskDiscretization {
                n_points: cfg.n_angles,
                mesh_h: 2.0 * cfg.mesh_h_factor,
                fem_order: 2,
                scale: 0.5 * cfg.diameter,
            };
            let rep = disk_perturbation_slope(&spec, &disc)?;
            let eps = *cfg.epsilons.last().expect("validated");
            let poly = perturbed_disk(cfg.a2, cfg.a4, eps, cfg.n_angles, disc.scale)?;
            let solved = solve_polyline(&poly, cfg.mesh_h(), cfg.k + 3)?;
            let close = |want: f64| (rep.measured_slope - want).abs() <= SLOPE_TOL * want.abs();
            let pass = close(rep.predicted_slope);
            let mut res = shape_result(cfg, poly, solved);
            res.table = Some((
                "epsilon,objective".into(),
                rep.epsilons.iter().zip(&rep.values).map(|(e, v)| vec![*e, *v]).collect(),
            ));
            res.experiment = verdict(
                pass,
                serde_json::json!({
                    "slope": rep,
                    "tolerance": SLOPE_TOL,
                    "matches_predicted": pass,
                    "matches_corrected": close(rep.corrected_slope),
                }),
            );
            res
        }
    };
    res.wall_time_s = t0.elapsed().as_secs_f64();
    Ok(res)
}

/// Re-evaluates stored variables the way the optimizer does.
pub fn reevaluate(vars: &Variables, cfg: &RunConfig) -> Result<Vec<f64>, RunError> {
    Ok(evaluate(vars, &cfg.optim_options())?.spectrum.eigenvalues)
}

fn spectrum_csv(eigs: &[f64]) -> String {
    let mut out = String::from("index,sigma\n");
    for (i, s) in eigs.iter().enumerate() {
        let _ = writeln!(out, "{i},{s:.17e}");
    }
    out
}

fn history_csv(res: &RunResult) -> String {
    if let Some((header, rows)) = &res.table {
        let mut out = format!("{header}\n");
        for r in rows {
            let cells: Vec<String> = r.iter().map(|v| format!("{v:.17e}")).collect();
            let _ = writeln!(out, "{}", cells.join(","));
        }
        return out;
    }
    let mut out = String::from("iteration,sigma_k,objective,area,diameter,step,cluster\n");
    for h in &res.history {
        let _ = writeln!(
            out,
            "{},{:.17e},{:.17e},{:.17e},{:.17e},{:.6e},{}",
            h.iteration, h.sigma_k, h.objective, h.area, h.diameter, h.step, h.cluster
        );
    }
    out
}

/// Writes result.json, shape.csv, shape.svg, spectrum.csv and history.csv.
pub fn write_artifacts(res: &RunResult, dir: &Path) -> Result<Vec<PathBuf>, RunError> {
    std::fs::create_dir_all(dir).map_err(|e| config_err(dir, e))?;
    let poly = res.polyline.as_ref().expect("every mode produces a shape");
    let files = [
        ("result.json", serde_json::to_string_pretty(res).expect("result serializes") + "\n"),
        ("shape.csv", poly.to_csv()),
        ("shape.svg", poly.to_svg()),
        ("spectrum.csv", spectrum_csv(&res.eigenvalues)),
        ("history.csv", history_csv(res)),
    ];
    let mut written = Vec::new();
    for (name, body) in files {
        let path = dir.join(name);
        std::fs::write(&path, body).map_err(|e| RunError::Io(format!("{}: {e}", path.display())))?;
        written.push(path);
    }
    Ok(written)
}

/// Executes and writes the artifacts into `cfg.out_dir`.
pub fn run(cfg: &RunConfig) -> Result<RunResult, RunError> {
    std::fs::create_dir_all(&cfg.out_dir).map_err(|e| config_err(&cfg.out_dir, e))?;
    let res = execute(cfg)?;
    write_artifacts(&res, &cfg.out_dir)?;
    Ok(res)
}
