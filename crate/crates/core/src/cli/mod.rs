//! Command-line experiment runner.
//!
//! Every subcommand maps onto an [`ExperimentConfig`]; `--config` loads a JSON
//! object whose keys override the flags. The report goes to `--output` or
//! stdout. Exit status: 0 when every check passed, 1 on a failed check or a
//! numerical failure, 2 on bad input.

pub mod experiments;
pub mod fixture;
pub mod report;

use std::path::PathBuf;

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::{Deserialize, Serialize};

use crate::distance::ProbeMode;
use crate::error::{Error, Result};
use crate::io::FieldFile;

pub use report::{Format, Report};

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, ValueEnum, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Mode {
    #[default]
    Collapse,
    Blowup,
}

impl From<Mode> for ProbeMode {
    fn from(m: Mode) -> Self {
        match m {
            Mode::Collapse => ProbeMode::Collapse,
            Mode::Blowup => ProbeMode::Blowup,
        }
    }
}

impl From<ProbeMode> for Mode {
    fn from(m: ProbeMode) -> Self {
        match m {
            ProbeMode::Collapse => Mode::Collapse,
            ProbeMode::Blowup => Mode::Blowup,
        }
    }
}

pub const EXPERIMENTS: [&str; 8] =
    ["geodesic", "ode-compare", "curvature", "distance", "completion", "duality", "verify-all", "generate-fixture"];

/// Everything an experiment run depends on. Unset `p`, `t_max` and `tol`
/// fall back to per-experiment defaults.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ExperimentConfig {
    pub experiment: String,
    /// Metric field file; a generated fixture is used when absent.
    pub input: Option<PathBuf>,
    pub n: usize,
    pub points: usize,
    pub seed: u64,
    pub spread: f64,
    pub p: Option<f64>,
    pub t_max: Option<f64>,
    pub dt: f64,
    pub tol: Option<f64>,
    pub mode: Mode,
    pub k_max: usize,
    /// Random cases (pairs, planes, initial conditions) per experiment.
    pub cases: usize,
    pub output: Option<PathBuf>,
    pub format: Format,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        ExperimentConfig {
            experiment: String::new(),
            input: None,
            n: 2,
            points: 8,
            seed: 7,
            spread: fixture::DEFAULT_SPREAD,
            p: None,
            t_max: None,
            dt: 1e-3,
            tol: None,
            mode: Mode::Collapse,
            k_max: 20,
            cases: 10,
            output: None,
            format: Format::Csv,
        }
    }
}

impl ExperimentConfig {
    pub fn validate(&self) -> Result<()> {
        if !EXPERIMENTS.contains(&self.experiment.as_str()) {
            return Err(Error::UnknownExperiment(self.experiment.clone()));
        }
        let bad = |what: &str, v: f64| Err(Error::InvalidInput(format!("{what} must be positive, got {v}")));
        if !(self.dt > 0.0 && self.dt.is_finite()) {
            return bad("dt", self.dt);
        }
        if let Some(t) = self.tol.filter(|t| !(*t > 0.0)) {
            return bad("tol", t);
        }
        if let Some(t) = self.t_max.filter(|t| !(*t > 0.0)) {
            return bad("t_max", t);
        }
        if !(self.spread >= 1.0) {
            return Err(Error::InvalidInput(format!("spread must be at least 1, got {}", self.spread)));
        }
        if self.n == 0 || self.points == 0 {
            return Err(Error::InvalidInput("n and points must be at least 1".into()));
        }
        Ok(())
    }

    /// Overlays the keys of a JSON object onto this configuration.
    pub fn merge_json(&self, text: &str) -> Result<Self> {
        let overlay: serde_json::Value = serde_json::from_str(text).map_err(|e| Error::Parse(e.to_string()))?;
        let serde_json::Value::Object(fields) = overlay else {
            return Err(Error::Parse("config must be a JSON object".into()));
        };
        let mut base = serde_json::to_value(self).expect("config serializes");
        let obj = base.as_object_mut().expect("config is an object");
        for (k, v) in fields {
            obj.insert(k, v);
        }
        serde_json::from_value(base).map_err(|e| Error::Parse(format!("config: {e}")))
    }
}

#[derive(Debug, Args, Clone, Default)]
pub struct CommonArgs {
    /// JSON config file; its keys override the flags.
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
    #[arg(long, global = true, allow_negative_numbers = true)]
    pub p: Option<f64>,
    #[arg(long, global = true)]
    pub t_max: Option<f64>,
    #[arg(long, global = true)]
    pub dt: Option<f64>,
    #[arg(long, global = true)]
    pub tol: Option<f64>,
    #[arg(long, global = true)]
    pub seed: Option<u64>,
    /// Metric field file (JSON field format).
    #[arg(long, global = true)]
    pub input: Option<PathBuf>,
    #[arg(long, global = true)]
    pub output: Option<PathBuf>,
    #[arg(long, global = true, value_enum)]
    pub format: Option<Format>,
    /// Random cases per experiment.
    #[arg(long, global = true)]
    pub cases: Option<usize>,
}

#[derive(Debug, Parser)]
#[command(name = "metricspace", version, about = "Experiments on the space of Riemannian metrics")]
pub struct Cli {
    #[command(flatten)]
    pub common: CommonArgs,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand, Clone)]
pub enum Command {
    /// Integrate a g_p geodesic and report its constants of motion.
    Geodesic,
    /// Compare closed-form g_N geodesics with RK4.
    OdeCompare,
    /// Sectional curvature checks.
    Curvature,
    /// Distance intervals on random pairs.
    Distance,
    /// Completion probes along conformal sequences.
    Completion {
        #[arg(long, value_enum, default_value_t = Mode::Collapse)]
        mode: Mode,
        #[arg(long, default_value_t = 20)]
        k_max: usize,
    },
    /// The duality map and its pullback identity.
    Duality,
    /// Every experiment with a summary table.
    VerifyAll,
    /// Write a seeded random metric field.
    GenerateFixture {
        #[arg(long, default_value_t = 2)]
        n: usize,
        #[arg(long, default_value_t = 8)]
        points: usize,
        #[arg(long, default_value_t = fixture::DEFAULT_SPREAD)]
        spread: f64,
    },
}

impl Command {
    pub fn name(&self) -> &'static str {
        match self {
            Command::Geodesic => "geodesic",
            Command::OdeCompare => "ode-compare",
            Command::Curvature => "curvature",
            Command::Distance => "distance",
            Command::Completion { .. } => "completion",
            Command::Duality => "duality",
            Command::VerifyAll => "verify-all",
            Command::GenerateFixture { .. } => "generate-fixture",
        }
    }
}

impl Cli {
    pub fn config(&self) -> Result<ExperimentConfig> {
        let c = &self.common;
        let mut cfg = ExperimentConfig { experiment: self.command.name().into(), ..Default::default() };
        cfg.p = c.p;
        cfg.t_max = c.t_max;
        cfg.tol = c.tol;
        cfg.input = c.input.clone();
        cfg.output = c.output.clone();
        if let Some(v) = c.dt {
            cfg.dt = v;
        }
        if let Some(v) = c.seed {
            cfg.seed = v;
        }
        if let Some(v) = c.format {
            cfg.format = v;
        }
        if let Some(v) = c.cases {
            cfg.cases = v;
        }
        match &self.command {
            Command::Completion { mode, k_max } => {
                cfg.mode = *mode;
                cfg.k_max = *k_max;
            }
            Command::GenerateFixture { n, points, spread } => {
                cfg.n = *n;
                cfg.points = *points;
                cfg.spread = *spread;
            }
            _ => {}
        }
        if let Some(path) = &c.config {
            cfg = cfg.merge_json(&std::fs::read_to_string(path)?)?;
        }
        cfg.validate()?;
        Ok(cfg)
    }
}

/// Output of a run: the rendered document and whether every check passed.
#[derive(Clone, Debug)]
pub struct RunOutput {
    pub text: String,
    pub passed: bool,
    pub failures: Vec<String>,
}

/// Runs the experiment named in `cfg` and renders its report.
pub fn run(cfg: &ExperimentConfig) -> Result<RunOutput> {
    cfg.validate()?;
    if cfg.experiment == "generate-fixture" {
        let g = fixture::generate_fixture(cfg.n, cfg.points, cfg.seed, cfg.spread)?;
        return Ok(RunOutput { text: FieldFile::from_metric(&g).to_json(), passed: true, failures: vec![] });
    }
    let report = match cfg.experiment.as_str() {
        "geodesic" => experiments::geodesic(cfg)?,
        "ode-compare" => experiments::ode_compare(cfg)?,
        "curvature" => experiments::curvature(cfg)?,
        "distance" => experiments::distance(cfg)?,
        "completion" => experiments::completion(cfg)?,
        "duality" => experiments::duality(cfg)?,
        "verify-all" => experiments::verify_all(cfg)?,
        other => return Err(experiments::unknown(other)),
    };
    let failures = report.failures().iter().map(|c| format!("{}: {}", c.name, c.detail)).collect();
    Ok(RunOutput { text: report.render(cfg.format), passed: report.passed(), failures })
}

/// Runs and writes the output; returns the process exit status.
pub fn execute(cfg: &ExperimentConfig) -> i32 {
    let out = match run(cfg) {
        Ok(out) => out,
        Err(e) => {
            eprintln!("error: {e}");
            return if e.is_input_error() { 2 } else { 1 };
        }
    };
    let written = match &cfg.output {
        Some(path) => std::fs::write(path, &out.text),
        None => {
            use std::io::Write;
            std::io::stdout().write_all(out.text.as_bytes())
        }
    };
    if let Err(e) = written {
        eprintln!("error: {e}");
        return 2;
    }
    for f in &out.failures {
        eprintln!("FAIL {f}");
    }
    if out.passed {
        0
    } else {
        1
    }
}
