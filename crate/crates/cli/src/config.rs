//! Run configuration from flags and an optional `key = value` file.

use std::fmt;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use clap::Parser;
use serde::{Serialize, Serializer};
use thiserror::Error;

use steklov_core::optimizer::OptimOptions;

#[derive(Debug, Error, PartialEq)]
pub enum ConfigError {
    #[error("config: unknown key '{key}' (line {line})")]
    UnknownKey { key: String, line: usize },
    #[error("config: line {line}: expected 'key = value', got '{text}'")]
    Syntax { line: usize, text: String },
    #[error("config: {key} = '{value}': {reason}")]
    BadValue { key: String, value: String, reason: String },
    #[error("config: {path}: {msg}")]
    Io { path: String, msg: String },
    #[error("{0}")]
    Flags(String),
    /// `--help` or `--version`; not a failure.
    #[error("{0}")]
    Help(String),
}

fn bad(key: &str, value: impl ToString, reason: impl ToString) -> ConfigError {
    ConfigError::BadValue {
        key: key.to_string(),
        value: value.to_string(),
        reason: reason.to_string(),
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Mode {
    OptimizeConvex,
    OptimizeNonconvex,
    Spectrum,
    ExperimentSlope,
    ExperimentBound,
    ExperimentMultiplicity,
    BenchmarkDisk,
}

impl Mode {
    const NAMES: [(&'static str, Mode); 7] = [
        ("optimize-convex", Mode::OptimizeConvex),
        ("optimize-nonconvex", Mode::OptimizeNonconvex),
        ("spectrum", Mode::Spectrum),
        ("experiment:slope", Mode::ExperimentSlope),
        ("experiment:bound", Mode::ExperimentBound),
        ("experiment:multiplicity", Mode::ExperimentMultiplicity),
        ("benchmark-disk", Mode::BenchmarkDisk),
    ];
}

impl fmt::Display for Mode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let name = Mode::NAMES.iter().find(|(_, m)| m == self).map(|(n, _)| *n).unwrap_or("?");
        f.write_str(name)
    }
}

impl FromStr for Mode {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, String> {
        Mode::NAMES
            .iter()
            .find(|(n, _)| *n == s)
            .map(|(_, m)| *m)
            .ok_or_else(|| {
                let all: Vec<&str> = Mode::NAMES.iter().map(|(n, _)| *n).collect();
                format!("expected one of {}", all.join(", "))
            })
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Initial {
    Disk,
    /// A support/graph JSON (including a previous result.json) or a
    /// polyline CSV.
    File(PathBuf),
}

impl fmt::Display for Initial {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Initial::Disk => f.write_str("disk"),
            Initial::File(p) => write!(f, "file:{}", p.display()),
        }
    }
}

impl FromStr for Initial {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, String> {
        match s {
            "disk" => Ok(Initial::Disk),
            _ => match s.strip_prefix("file:") {
                Some(p) if !p.is_empty() => Ok(Initial::File(PathBuf::from(p))),
                _ => Err("expected 'disk' or 'file:<path>'".into()),
            },
        }
    }
}

fn display_str<T: fmt::Display, S: Serializer>(v: &T, s: S) -> Result<S::Ok, S::Error> {
    s.collect_str(v)
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RunConfig {
    #[serde(serialize_with = "display_str")]
    pub mode: Mode,
    pub k: usize,
    pub n_angles: usize,
    pub diameter: f64,
    pub mesh_h_factor: f64,
    pub max_iters: usize,
    pub tol: f64,
    pub seed: u64,
    #[serde(serialize_with = "display_str")]
    pub initial: Initial,
    pub out_dir: PathBuf,
    pub jobs: usize,
    pub verbose: bool,
    /// Random restarts on top of the initial shape.
    pub restarts: usize,
    pub a2: f64,
    pub a4: f64,
    pub epsilons: Vec<f64>,
}

pub const DEFAULT_OUT_DIR: &str = "steklov-out";

impl Default for RunConfig {
    fn default() -> Self {
        let o = OptimOptions::default();
        Self {
            mode: Mode::OptimizeConvex,
            k: o.k,
            n_angles: o.n_angles,
            diameter: o.diameter,
            mesh_h_factor: o.mesh_factor,
            max_iters: o.max_iters,
            tol: o.stop_tol,
            seed: o.seed,
            initial: Initial::Disk,
            out_dir: PathBuf::from(DEFAULT_OUT_DIR),
            jobs: o.jobs,
            verbose: o.verbose,
            restarts: o.restarts,
            a2: 1.0,
            a4: 1.0,
            epsilons: vec![0.005, 0.01, 0.02],
        }
    }
}

impl RunConfig {
    pub fn optim_options(&self) -> OptimOptions {
        OptimOptions {
            n_angles: self.n_angles,
            diameter: self.diameter,
            k: self.k,
            max_iters: self.max_iters,
            stop_tol: self.tol,
            mesh_factor: self.mesh_h_factor,
            restarts: self.restarts,
            seed: self.seed,
            jobs: self.jobs,
            verbose: self.verbose,
            ..OptimOptions::default()
        }
    }

    pub fn mesh_h(&self) -> f64 {
        self.mesh_h_factor * self.diameter
    }

    fn validate(&self) -> Result<(), ConfigError> {
        if self.n_angles < 8 || !self.n_angles.is_multiple_of(2) {
            return Err(bad("n_angles", self.n_angles, "must be even and at least 8"));
        }
        if self.k == 0 {
            return Err(bad("k", self.k, "must be at least 1"));
        }
        for (key, v) in [("diameter", self.diameter), ("mesh_h_factor", self.mesh_h_factor), ("tol", self.tol)] {
            if !(v.is_finite() && v > 0.0) {
                return Err(bad(key, v, "must be positive"));
            }
        }
        if self.max_iters == 0 {
            return Err(bad("max_iters", 0, "must be positive"));
        }
        if self.jobs == 0 {
            return Err(bad("jobs", 0, "must be positive"));
        }
        if !(self.a2.is_finite() && self.a4.is_finite()) {
            return Err(bad("a2/a4", format!("{}/{}", self.a2, self.a4), "must be finite"));
        }
        let eps_ok = self.epsilons.len() >= 3
            && self.epsilons.windows(2).all(|w| w[0] < w[1])
            && self.epsilons.iter().all(|&e| e > 0.0 && e <= 0.05);
        if !eps_ok {
            return Err(bad(
                "epsilons",
                format!("{:?}", self.epsilons),
                "need at least 3 increasing values in (0, 0.05]",
            ));
        }
        self.optim_options()
            .validate()
            .map_err(|e| ConfigError::Flags(format!("config: {e}")))
    }
}

#[derive(Debug, Parser)]
#[command(name = "steklov", version, about = "Maximize Steklov eigenvalues under a diameter constraint")]
struct Flags {
    /// Plain-text file of `key = value` lines; flags override it.
    #[arg(long)]
    config: Option<PathBuf>,
    /// optimize-convex, optimize-nonconvex, spectrum, experiment:slope,
    /// experiment:bound, experiment:multiplicity or benchmark-disk.
    #[arg(long)]
    mode: Option<String>,
    /// Eigenvalue index to maximize (σ_k, k ≥ 1).
    #[arg(long)]
    k: Option<String>,
    /// Number of support angles (even); non-convex mode uses half per graph.
    #[arg(long)]
    n_angles: Option<String>,
    /// Prescribed diameter.
    #[arg(long)]
    diameter: Option<String>,
    /// Maximal triangle edge length as a fraction of the diameter.
    #[arg(long)]
    mesh_h_factor: Option<String>,
    /// Iteration cap per start.
    #[arg(long)]
    max_iters: Option<String>,
    /// Relative change of σ_k over the stopping window.
    #[arg(long)]
    tol: Option<String>,
    /// Seed of the random restarts.
    #[arg(long)]
    seed: Option<String>,
    /// `disk` or `file:<path>`.
    #[arg(long)]
    initial: Option<String>,
    /// Output directory; falls back to STEKLOV_OUT_DIR.
    #[arg(long)]
    out_dir: Option<String>,
    /// Worker threads for the independent starts.
    #[arg(long)]
    jobs: Option<String>,
    /// Print one line per accepted iterate.
    #[arg(long)]
    verbose: bool,
    /// Random starts in addition to the initial shape.
    #[arg(long)]
    restarts: Option<String>,
    /// cos 2θ amplitude of the disk perturbation.
    #[arg(long)]
    a2: Option<String>,
    /// cos 4θ amplitude of the disk perturbation.
    #[arg(long)]
    a4: Option<String>,
    /// Comma-separated perturbation sizes.
    #[arg(long)]
    epsilons: Option<String>,
}

impl Flags {
    fn pairs(&self) -> Vec<(&'static str, String)> {
        let mut out = Vec::new();
        let mut push = |k: &'static str, v: &Option<String>| {
            if let Some(v) = v {
                out.push((k, v.clone()));
            }
        };
        push("mode", &self.mode);
        push("k", &self.k);
        push("n_angles", &self.n_angles);
        push("diameter", &self.diameter);
        push("mesh_h_factor", &self.mesh_h_factor);
        push("max_iters", &self.max_iters);
        push("tol", &self.tol);
        push("seed", &self.seed);
        push("initial", &self.initial);
        push("out_dir", &self.out_dir);
        push("jobs", &self.jobs);
        push("restarts", &self.restarts);
        push("a2", &self.a2);
        push("a4", &self.a4);
        push("epsilons", &self.epsilons);
        if self.verbose {
            out.push(("verbose", "true".into()));
        }
        out
    }
}

fn parse_num<T: FromStr>(key: &str, value: &str) -> Result<T, ConfigError>
where
    T::Err: fmt::Display,
{
    value.parse::<T>().map_err(|e| bad(key, value, e))
}

fn apply(cfg: &mut RunConfig, key: &str, value: &str) -> Result<(), ConfigError> {
    match key {
        "mode" => cfg.mode = value.parse().map_err(|e| bad(key, value, e))?,
        "k" => cfg.k = parse_num(key, value)?,
        "n_angles" => cfg.n_angles = parse_num(key, value)?,
        "diameter" => cfg.diameter = parse_num(key, value)?,
        "mesh_h_factor" => cfg.mesh_h_factor = parse_num(key, value)?,
        "max_iters" => cfg.max_iters = parse_num(key, value)?,
        "tol" => cfg.tol = parse_num(key, value)?,
        "seed" => cfg.seed = parse_num(key, value)?,
        "initial" => cfg.initial = value.parse().map_err(|e| bad(key, value, e))?,
        "out_dir" => cfg.out_dir = PathBuf::from(value),
        "jobs" => cfg.jobs = parse_num(key, value)?,
        "verbose" => cfg.verbose = parse_num(key, value)?,
        "restarts" => cfg.restarts = parse_num(key, value)?,
        "a2" => cfg.a2 = parse_num(key, value)?,
        "a4" => cfg.a4 = parse_num(key, value)?,
        "epsilons" => {
            cfg.epsilons = value
                .split(',')
                .map(|s| parse_num::<f64>(key, s.trim()))
                .collect::<Result<_, _>>()?
        }
        _ => unreachable!("keys are checked before applying"),
    }
    Ok(())
}

const KEYS: [&str; 16] = [
    "mode", "k", "n_angles", "diameter", "mesh_h_factor", "max_iters", "tol", "seed", "initial",
    "out_dir", "jobs", "verbose", "restarts", "a2", "a4", "epsilons",
];

/// `key = value` lines with `#` comments. Dashes in keys read as underscores.
pub fn parse_config_text(text: &str) -> Result<Vec<(String, String)>, ConfigError> {
    let mut out = Vec::new();
    for (i, raw) in text.lines().enumerate() {
        let line = raw.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        let Some((k, v)) = line.split_once('=') else {
            return Err(ConfigError::Syntax { line: i + 1, text: raw.to_string() });
        };
        let key = k.trim().replace('-', "_");
        if !KEYS.contains(&key.as_str()) {
            return Err(ConfigError::UnknownKey { key, line: i + 1 });
        }
        out.push((key, v.trim().to_string()));
    }
    Ok(out)
}

fn read_file(path: &Path) -> Result<String, ConfigError> {
    std::fs::read_to_string(path).map_err(|e| ConfigError::Io {
        path: path.display().to_string(),
        msg: e.to_string(),
    })
}

/// Builds the configuration from command-line arguments (without the
/// program name). `env_out_dir` is the value of `STEKLOV_OUT_DIR`, used
/// when neither flags nor file set `out_dir`.
pub fn parse_config<I, S>(args: I, env_out_dir: Option<&str>) -> Result<RunConfig, ConfigError>
where
    I: IntoIterator<Item = S>,
    S: Into<String>,
{
    let argv = std::iter::once("steklov".to_string()).chain(args.into_iter().map(Into::into));
    let flags = Flags::try_parse_from(argv).map_err(|e| match e.kind() {
        clap::error::ErrorKind::DisplayHelp | clap::error::ErrorKind::DisplayVersion => {
            ConfigError::Help(e.to_string())
        }
        _ => ConfigError::Flags(e.to_string()),
    })?;
    let mut cfg = RunConfig::default();
    let mut out_dir_set = false;
    if let Some(path) = &flags.config {
        for (k, v) in parse_config_text(&read_file(path)?)? {
            out_dir_set |= k == "out_dir";
            apply(&mut cfg, &k, &v)?;
        }
    }
    for (k, v) in flags.pairs() {
        out_dir_set |= k == "out_dir";
        apply(&mut cfg, k, &v)?;
    }
    if !out_dir_set {
        if let Some(dir) = env_out_dir.filter(|d| !d.is_empty()) {
            cfg.out_dir = PathBuf::from(dir);
        }
    }
    cfg.validate()?;
    Ok(cfg)
}
