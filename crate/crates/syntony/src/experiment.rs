//! Reproducible experiment runner behind the command-line interface.
//!
//! An [`ExperimentConfig`] fully determines an experiment: kind, parameters,
//! master seed, output directory. `run_experiment` validates it, executes the
//! corresponding simulation or sweep, and writes result CSVs next to a
//! `config.json` sidecar holding the exact config that produced them. Feeding
//! that sidecar back through [`ExperimentConfig::from_json`] and
//! [`run_experiment`] regenerates every result file byte for byte.
//!
//! Configuration precedence is flags over config file over per-kind defaults;
//! the defaults are the experiment settings used throughout: 1 GHz carrier,
//! 100 ppm initial spread, 2e-3 Hz stopping threshold, ADEV 1e-9 at a 1 s
//! interval, connectivity 0.15 for drift runs.

use std::fmt;
use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::array_model::{
    generate_sparse_array, radiation_pattern_cut, radiation_pattern_uv, steering_phases,
    Direction,
};
use crate::consensus::{
    init_frequencies, run_dynamic, run_static, ConsensusConfig, DriftConfig,
};
use crate::montecarlo::{
    convergence_iterations_sweep, drift_experiment, dynamic_convergence_sweep,
    lambda2_product_comparison, prob_gain_exceeds, rms_error_sweep, rms_oracle_ppm,
    steady_state_gain, MonteCarloError,
};
use crate::rng::{master_rng, replica_rng};
use crate::stats::rms;
use crate::topology::{
    build_mixing_matrix, generate_connected_graph, second_eigenvalue, MutationKind, MutationProbs,
};

use rand_distr::{Distribution, StandardNormal};

// ---------------------------------------------------------------------------
// errors
// ---------------------------------------------------------------------------

/// One failed configuration check: the offending field, the constraint it
/// violates, and a human-readable message.
#[derive(Debug, Clone, PartialEq)]
pub struct ConfigViolation {
    pub field: String,
    pub constraint: String,
    pub message: String,
}

impl fmt::Display for ConfigViolation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{} [{}]: {}", self.field, self.constraint, self.message)
    }
}

#[derive(Debug)]
pub enum ExperimentError {
    /// The config failed validation; every violation is listed.
    Invalid(Vec<ConfigViolation>),
    /// Malformed config file or value.
    Parse(String),
    /// File-system failure, with the path involved.
    Io(String),
    /// An operation rejected its inputs at run time.
    Op(MonteCarloError),
}

impl fmt::Display for ExperimentError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Self::Invalid(violations) => {
                writeln!(f, "invalid config:")?;
                for v in violations {
                    writeln!(f, "  {v}")?;
                }
                Ok(())
            }
            Self::Parse(msg) => write!(f, "config parse error: {msg}"),
            Self::Io(msg) => write!(f, "io error: {msg}"),
            Self::Op(e) => write!(f, "{e}"),
        }
    }
}

impl std::error::Error for ExperimentError {
    fn source(&self) -> Option<&(dyn std::error::Error + 'static)> {
        match self {
            Self::Op(e) => Some(e),
            _ => None,
        }
    }
}

impl From<MonteCarloError> for ExperimentError {
    fn from(e: MonteCarloError) -> Self {
        Self::Op(e)
    }
}

// ---------------------------------------------------------------------------
// config
// ---------------------------------------------------------------------------

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ExperimentKind {
    Static,
    Dynamic,
    Drift,
    ProbGain,
    RmsSweep,
    IterSweep,
    Lambda2,
    Pattern,
    Layout,
}

impl fmt::Display for ExperimentKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let name = match self {
            Self::Static => "static",
            Self::Dynamic => "dynamic",
            Self::Drift => "drift",
            Self::ProbGain => "prob-gain",
            Self::RmsSweep => "rms-sweep",
            Self::IterSweep => "iter-sweep",
            Self::Lambda2 => "lambda2",
            Self::Pattern => "pattern",
            Self::Layout => "layout",
        };
        f.write_str(name)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum PatternKind {
    Cut,
    Uv,
}

impl std::str::FromStr for PatternKind {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "cut" => Ok(Self::Cut),
            "uv" => Ok(Self::Uv),
            other => Err(format!("unknown pattern kind {other:?} (expected cut or uv)")),
        }
    }
}

/// Complete, serializable description of one experiment run. Which fields an
/// experiment consumes depends on its kind; unused fields are carried along
/// so configs stay round-trippable.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentConfig {
    pub experiment: ExperimentKind,
    /// Network size or element count.
    pub n: usize,
    /// Sizes for multi-size sweeps (rms-sweep, iter-sweep, drift).
    pub n_list: Vec<usize>,
    /// Connectivity ratio.
    pub r: f64,
    /// Ratios for connectivity sweeps (iter-sweep, dynamic sweep).
    pub r_list: Vec<f64>,
    pub carrier_hz: f64,
    pub sigma_ppm: f64,
    pub epsilon_hz: f64,
    pub max_iterations: usize,
    /// No-change probability for single dynamic runs.
    pub p1: f64,
    /// (no-change, add, remove) triples for the dynamic sweep.
    pub p_triples: Vec<[f64; 3]>,
    pub adev: f64,
    pub interval_t_s: f64,
    pub phase_threshold_deg: f64,
    /// Monte Carlo trials for prob-gain.
    pub trials: usize,
    /// Replicas per sweep point (or lambda2 sample count); 1 means a single
    /// trajectory run for the dynamic experiment.
    pub sims: usize,
    /// Phase-error standard deviations for the prob-gain sweep axis.
    pub sigma_deg_list: Vec<f64>,
    /// Phase-error standard deviation for the pattern experiment.
    pub sigma_deg: f64,
    /// Coherent-gain threshold for prob-gain.
    pub gain_threshold: f64,
    pub extent_wl: f64,
    pub grid_step_wl: f64,
    pub pattern_kind: PatternKind,
    /// Points per pattern axis: a cut uses this many samples over
    /// [-90, 90] degrees, a uv map squares it.
    pub pattern_points: usize,
    pub steer_theta_deg: f64,
    pub steer_phi_deg: f64,
    pub seed: u64,
    pub out_dir: PathBuf,
}

impl ExperimentConfig {
    /// Documented defaults per experiment kind.
    pub fn default_for(kind: ExperimentKind) -> Self {
        let mut cfg = Self {
            experiment: kind,
            n: 100,
            n_list: vec![20, 60, 100],
            r: 0.1,
            r_list: vec![0.1, 0.3, 0.5, 0.9],
            carrier_hz: 1e9,
            sigma_ppm: 100.0,
            epsilon_hz: 2e-3,
            max_iterations: 50_000,
            p1: 0.9,
            p_triples: vec![[0.9, 0.05, 0.05], [0.3, 0.35, 0.35], [0.0, 0.5, 0.5]],
            adev: 1e-9,
            interval_t_s: 1.0,
            phase_threshold_deg: 18.0,
            trials: 100_000,
            sims: 1,
            sigma_deg_list: (0..=20).map(|k| 2.0 * k as f64).collect(),
            sigma_deg: 0.0,
            gain_threshold: 0.9,
            extent_wl: 10.0,
            grid_step_wl: 0.5,
            pattern_kind: PatternKind::Cut,
            pattern_points: 181,
            steer_theta_deg: 0.0,
            steer_phi_deg: 0.0,
            seed: 1,
            out_dir: PathBuf::from(format!("out/{kind}")),
        };
        match kind {
            ExperimentKind::Static => {}
            ExperimentKind::Dynamic => {
                cfg.r = 0.03;
                cfg.r_list = vec![0.03, 0.08];
            }
            ExperimentKind::Drift => {
                cfg.r = 0.15;
                cfg.max_iterations = 200;
            }
            ExperimentKind::ProbGain => {
                cfg.n = 1000;
            }
            ExperimentKind::RmsSweep => {
                cfg.r = 0.4;
                cfg.n_list = vec![5, 20, 60, 100];
                cfg.sims = 1000;
            }
            ExperimentKind::IterSweep => {
                cfg.sims = 500;
            }
            ExperimentKind::Lambda2 => {
                cfg.r = 0.05;
                cfg.sims = 10_000;
            }
            ExperimentKind::Pattern | ExperimentKind::Layout => {
                cfg.n = 20;
            }
        }
        cfg
    }

    /// Parses the JSON sidecar format written next to every result file.
    pub fn from_json(text: &str) -> Result<Self, ExperimentError> {
        serde_json::from_str(text).map_err(|e| ExperimentError::Parse(e.to_string()))
    }

    pub fn to_json(&self) -> String {
        let mut s = serde_json::to_string_pretty(self).expect("config serializes");
        s.push('\n');
        s
    }
}

// ---------------------------------------------------------------------------
// overrides: config file and command-line flags
// ---------------------------------------------------------------------------

/// Partial config: every field optional, applied on top of another config.
/// Both the flat key=value config-file format and the CLI flags produce one.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct ConfigOverrides {
    pub n: Option<usize>,
    pub n_list: Option<Vec<usize>>,
    pub r: Option<f64>,
    pub r_list: Option<Vec<f64>>,
    pub carrier_hz: Option<f64>,
    pub sigma_ppm: Option<f64>,
    pub epsilon_hz: Option<f64>,
    pub max_iterations: Option<usize>,
    pub p1: Option<f64>,
    pub p_triples: Option<Vec<[f64; 3]>>,
    pub adev: Option<f64>,
    pub interval_t_s: Option<f64>,
    pub phase_threshold_deg: Option<f64>,
    pub trials: Option<usize>,
    pub sims: Option<usize>,
    pub sigma_deg_list: Option<Vec<f64>>,
    pub sigma_deg: Option<f64>,
    pub gain_threshold: Option<f64>,
    pub extent_wl: Option<f64>,
    pub grid_step_wl: Option<f64>,
    pub pattern_kind: Option<PatternKind>,
    pub pattern_points: Option<usize>,
    pub steer_theta_deg: Option<f64>,
    pub steer_phi_deg: Option<f64>,
    pub seed: Option<u64>,
    pub out_dir: Option<PathBuf>,
}

macro_rules! apply_fields {
    ($self:ident, $cfg:ident: $($field:ident),* $(,)?) => {
        $(if let Some(v) = $self.$field { $cfg.$field = v; })*
    };
}

impl ConfigOverrides {
    pub fn apply(self, cfg: &mut ExperimentConfig) {
        apply_fields!(self, cfg:
            n, n_list, r, r_list, carrier_hz, sigma_ppm, epsilon_hz, max_iterations,
            p1, p_triples, adev, interval_t_s, phase_threshold_deg, trials, sims,
            sigma_deg_list, sigma_deg, gain_threshold, extent_wl, grid_step_wl,
            pattern_kind, pattern_points, steer_theta_deg, steer_phi_deg, seed, out_dir,
        );
    }
}

fn parse_num<T: std::str::FromStr>(key: &str, value: &str) -> Result<T, ExperimentError>
where
    T::Err: fmt::Display,
{
    value
        .parse()
        .map_err(|e| ExperimentError::Parse(format!("{key}: cannot parse {value:?}: {e}")))
}

fn parse_list<T: std::str::FromStr>(key: &str, value: &str) -> Result<Vec<T>, ExperimentError>
where
    T::Err: fmt::Display,
{
    value
        .split(',')
        .map(str::trim)
        .filter(|t| !t.is_empty())
        .map(|t| parse_num(key, t))
        .collect()
}

/// Parses `a,b,c;d,e,f` into probability triples.
pub fn parse_p_triples(key: &str, value: &str) -> Result<Vec<[f64; 3]>, ExperimentError> {
    value
        .split(';')
        .map(str::trim)
        .filter(|t| !t.is_empty())
        .map(|triple| {
            let parts: Vec<f64> = parse_list(key, triple)?;
            if parts.len() != 3 {
                return Err(ExperimentError::Parse(format!(
                    "{key}: triple {triple:?} must have exactly 3 components"
                )));
            }
            Ok([parts[0], parts[1], parts[2]])
        })
        .collect()
}

/// Parses the flat config-file format: one `key = value` pair per line, `#`
/// starts a comment, lists are comma-separated, probability triples are
/// separated by semicolons. Keys match the JSON sidecar field names.
pub fn parse_kv_overrides(text: &str) -> Result<ConfigOverrides, ExperimentError> {
    let mut ov = ConfigOverrides::default();
    for (lineno, raw) in text.lines().enumerate() {
        let line = raw.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        let (key, value) = line.split_once('=').ok_or_else(|| {
            ExperimentError::Parse(format!("line {}: expected key = value", lineno + 1))
        })?;
        let (key, value) = (key.trim(), value.trim());
        match key {
            "n" => ov.n = Some(parse_num(key, value)?),
            "n_list" => ov.n_list = Some(parse_list(key, value)?),
            "r" => ov.r = Some(parse_num(key, value)?),
            "r_list" => ov.r_list = Some(parse_list(key, value)?),
            "carrier_hz" => ov.carrier_hz = Some(parse_num(key, value)?),
            "sigma_ppm" => ov.sigma_ppm = Some(parse_num(key, value)?),
            "epsilon_hz" => ov.epsilon_hz = Some(parse_num(key, value)?),
            "max_iterations" => ov.max_iterations = Some(parse_num(key, value)?),
            "p1" => ov.p1 = Some(parse_num(key, value)?),
            "p_triples" => ov.p_triples = Some(parse_p_triples(key, value)?),
            "adev" => ov.adev = Some(parse_num(key, value)?),
            "interval_t_s" => ov.interval_t_s = Some(parse_num(key, value)?),
            "phase_threshold_deg" => ov.phase_threshold_deg = Some(parse_num(key, value)?),
            "trials" => ov.trials = Some(parse_num(key, value)?),
            "sims" => ov.sims = Some(parse_num(key, value)?),
            "sigma_deg_list" => ov.sigma_deg_list = Some(parse_list(key, value)?),
            "sigma_deg" => ov.sigma_deg = Some(parse_num(key, value)?),
            "gain_threshold" => ov.gain_threshold = Some(parse_num(key, value)?),
            "extent_wl" => ov.extent_wl = Some(parse_num(key, value)?),
            "grid_step_wl" => ov.grid_step_wl = Some(parse_num(key, value)?),
            "pattern_kind" => {
                ov.pattern_kind =
                    Some(value.parse().map_err(|e: String| ExperimentError::Parse(e))?)
            }
            "pattern_points" => ov.pattern_points = Some(parse_num(key, value)?),
            "steer_theta_deg" => ov.steer_theta_deg = Some(parse_num(key, value)?),
            "steer_phi_deg" => ov.steer_phi_deg = Some(parse_num(key, value)?),
            "seed" => ov.seed = Some(parse_num(key, value)?),
            "out_dir" => ov.out_dir = Some(PathBuf::from(value)),
            other => {
                return Err(ExperimentError::Parse(format!(
                    "line {}: unknown key {other:?}",
                    lineno + 1
                )))
            }
        }
    }
    Ok(ov)
}

// ---------------------------------------------------------------------------
// validation
// ---------------------------------------------------------------------------

fn edges_for(n: usize, r: f64) -> usize {
    (r * (n * (n - 1) / 2) as f64).round() as usize
}

/// Checks every precondition of the operations the config's experiment kind
/// feeds. Returns all violations, empty when the config is runnable.
pub fn validate_config(cfg: &ExperimentConfig) -> Vec<ConfigViolation> {
    use ExperimentKind::*;
    let mut out = Vec::new();
    let mut fail = |field: &str, constraint: &str, message: String| {
        out.push(ConfigViolation {
            field: field.into(),
            constraint: constraint.into(),
            message,
        });
    };

    let check_ratio = |fail: &mut dyn FnMut(&str, &str, String), field: &str, r: f64| {
        if !(r > 0.0 && r <= 1.0) {
            fail(field, "range", format!("connectivity ratio {r} outside (0, 1]"));
        }
    };
    let check_edges = |fail: &mut dyn FnMut(&str, &str, String), field: &str, n: usize, r: f64| {
        if r > 0.0 && r <= 1.0 && n >= 2 {
            let m = edges_for(n, r);
            if m < n - 1 {
                fail(
                    field,
                    "insufficient_edges",
                    format!("r = {r} gives {m} edges but n = {n} needs at least {}", n - 1),
                );
            }
        }
    };
    let check_n = |fail: &mut dyn FnMut(&str, &str, String), n: usize| {
        if n < 2 {
            fail("n", "range", format!("n = {n} must be at least 2"));
        }
    };
    let check_n_list = |fail: &mut dyn FnMut(&str, &str, String), ns: &[usize]| {
        if ns.is_empty() {
            fail("n_list", "nonempty", "n_list must be nonempty".into());
        }
        if ns.iter().any(|&n| n < 2) {
            fail("n_list", "range", format!("every size in {ns:?} must be at least 2"));
        }
        if ns.windows(2).any(|w| w[0] >= w[1]) {
            fail("n_list", "axis_order", format!("{ns:?} must be strictly increasing"));
        }
    };
    let check_r_list = |fail: &mut dyn FnMut(&str, &str, String), rs: &[f64]| {
        if rs.is_empty() {
            fail("r_list", "nonempty", "r_list must be nonempty".into());
        }
        if rs.iter().any(|&r| !(r > 0.0 && r <= 1.0)) {
            fail("r_list", "range", format!("every ratio in {rs:?} must lie in (0, 1]"));
        }
        if rs.windows(2).any(|w| w[0] >= w[1]) {
            fail("r_list", "axis_order", format!("{rs:?} must be strictly increasing"));
        }
    };
    let check_consensus = |fail: &mut dyn FnMut(&str, &str, String), cfg: &ExperimentConfig| {
        if !(cfg.epsilon_hz > 0.0) {
            fail("epsilon_hz", "positivity", format!("epsilon_hz = {}", cfg.epsilon_hz));
        }
        if cfg.max_iterations == 0 {
            fail("max_iterations", "range", "max_iterations must be at least 1".into());
        }
        if !(cfg.sigma_ppm > 0.0) {
            fail("sigma_ppm", "positivity", format!("sigma_ppm = {}", cfg.sigma_ppm));
        }
        if !(cfg.carrier_hz > 0.0) {
            fail("carrier_hz", "positivity", format!("carrier_hz = {}", cfg.carrier_hz));
        }
    };
    let check_sims = |fail: &mut dyn FnMut(&str, &str, String), sims: usize| {
        if sims == 0 {
            fail("sims", "range", "sims must be at least 1".into());
        }
    };
    let check_triples = |fail: &mut dyn FnMut(&str, &str, String), triples: &[[f64; 3]]| {
        if triples.is_empty() {
            fail("p_triples", "nonempty", "p_triples must be nonempty".into());
        }
        for t in triples {
            if t.iter().any(|&p| !(0.0..=1.0).contains(&p)) {
                fail("p_triples", "range", format!("components of {t:?} must lie in [0, 1]"));
            } else if (t.iter().sum::<f64>() - 1.0).abs() > 1e-9 {
                fail(
                    "p_triples",
                    "probability_sum",
                    format!("{t:?} sums to {}, expected 1", t.iter().sum::<f64>()),
                );
            }
        }
    };
    let check_grid = |fail: &mut dyn FnMut(&str, &str, String), cfg: &ExperimentConfig| {
        if !(cfg.grid_step_wl > 0.0) {
            fail("grid_step_wl", "positivity", format!("grid_step_wl = {}", cfg.grid_step_wl));
        }
        if cfg.extent_wl < 0.0 {
            fail("extent_wl", "range", format!("extent_wl = {} must be nonnegative", cfg.extent_wl));
        }
        if cfg.n == 0 {
            fail("n", "range", "n must be at least 1".into());
        }
        if cfg.grid_step_wl > 0.0 && cfg.extent_wl >= 0.0 {
            let per_axis = (cfg.extent_wl / cfg.grid_step_wl + 1e-9).floor() as usize + 1;
            let capacity = per_axis * per_axis;
            if cfg.n > capacity {
                fail(
                    "n",
                    "capacity",
                    format!("n = {} exceeds the {capacity}-point grid", cfg.n),
                );
            }
        }
    };

    if cfg.out_dir.as_os_str().is_empty() {
        fail("out_dir", "nonempty", "output directory must be set".into());
    }

    match cfg.experiment {
        Static => {
            check_n(&mut fail, cfg.n);
            check_ratio(&mut fail, "r", cfg.r);
            check_edges(&mut fail, "r", cfg.n, cfg.r);
            check_consensus(&mut fail, cfg);
        }
        Dynamic => {
            check_n(&mut fail, cfg.n);
            check_consensus(&mut fail, cfg);
            check_sims(&mut fail, cfg.sims);
            if cfg.sims == 1 {
                check_ratio(&mut fail, "r", cfg.r);
                check_edges(&mut fail, "r", cfg.n, cfg.r);
                if !(0.0..=1.0).contains(&cfg.p1) {
                    fail("p1", "range", format!("p1 = {} outside [0, 1]", cfg.p1));
                }
            } else {
                check_r_list(&mut fail, &cfg.r_list);
                check_triples(&mut fail, &cfg.p_triples);
            }
        }
        Drift => {
            check_n_list(&mut fail, &cfg.n_list);
            check_ratio(&mut fail, "r", cfg.r);
            check_consensus(&mut fail, cfg);
            if !(cfg.adev >= 0.0) {
                fail("adev", "range", format!("adev = {} must be nonnegative", cfg.adev));
            }
            if !(cfg.interval_t_s > 0.0) {
                fail("interval_t_s", "positivity", format!("interval_t_s = {}", cfg.interval_t_s));
            }
            if !(cfg.phase_threshold_deg > 0.0) {
                fail(
                    "phase_threshold_deg",
                    "positivity",
                    format!("phase_threshold_deg = {}", cfg.phase_threshold_deg),
                );
            }
        }
        ProbGain => {
            if cfg.n == 0 {
                fail("n", "range", "n must be at least 1".into());
            }
            if cfg.trials == 0 {
                fail("trials", "range", "trials must be at least 1".into());
            }
            if !(0.0..=1.0).contains(&cfg.gain_threshold) {
                fail(
                    "gain_threshold",
                    "range",
                    format!("gain_threshold = {} outside [0, 1]", cfg.gain_threshold),
                );
            }
            if cfg.sigma_deg_list.is_empty() {
                fail("sigma_deg_list", "nonempty", "sigma_deg_list must be nonempty".into());
            }
            if cfg.sigma_deg_list.iter().any(|&s| s < 0.0) {
                fail(
                    "sigma_deg_list",
                    "range",
                    format!("{:?} must be nonnegative", cfg.sigma_deg_list),
                );
            }
            if cfg.sigma_deg_list.windows(2).any(|w| w[0] >= w[1]) {
                fail(
                    "sigma_deg_list",
                    "axis_order",
                    format!("{:?} must be strictly increasing", cfg.sigma_deg_list),
                );
            }
        }
        RmsSweep => {
            check_n_list(&mut fail, &cfg.n_list);
            check_ratio(&mut fail, "r", cfg.r);
            check_consensus(&mut fail, cfg);
            check_sims(&mut fail, cfg.sims);
        }
        IterSweep => {
            check_n_list(&mut fail, &cfg.n_list);
            check_r_list(&mut fail, &cfg.r_list);
            check_consensus(&mut fail, cfg);
            check_sims(&mut fail, cfg.sims);
        }
        Lambda2 => {
            check_n(&mut fail, cfg.n);
            check_ratio(&mut fail, "r", cfg.r);
            check_edges(&mut fail, "r", cfg.n, cfg.r);
            if cfg.sims < 2 {
                fail("sims", "range", "lambda2 needs at least 2 samples".into());
            }
        }
        Pattern => {
            check_grid(&mut fail, cfg);
            if cfg.pattern_points < 2 {
                fail("pattern_points", "range", "need at least 2 pattern points".into());
            }
            if cfg.sigma_deg < 0.0 {
                fail("sigma_deg", "range", format!("sigma_deg = {}", cfg.sigma_deg));
            }
        }
        Layout => {
            check_grid(&mut fail, cfg);
        }
    }
    out
}

// ---------------------------------------------------------------------------
// execution
// ---------------------------------------------------------------------------

/// What a finished experiment produced: the files written (sidecar included)
/// and a one-line summary for the terminal.
#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentOutcome {
    pub files: Vec<PathBuf>,
    pub summary: String,
}

fn write_file(
    files: &mut Vec<PathBuf>,
    dir: &Path,
    name: &str,
    content: &str,
) -> Result<(), ExperimentError> {
    let path = dir.join(name);
    fs::write(&path, content)
        .map_err(|e| ExperimentError::Io(format!("{}: {e}", path.display())))?;
    files.push(path);
    Ok(())
}

fn consensus_config(cfg: &ExperimentConfig) -> ConsensusConfig {
    ConsensusConfig {
        epsilon_hz: cfg.epsilon_hz,
        max_iterations: cfg.max_iterations,
        sigma_ppm: cfg.sigma_ppm,
    }
}

fn drift_config(cfg: &ExperimentConfig) -> DriftConfig {
    DriftConfig {
        adev: cfg.adev,
        interval_t_s: cfg.interval_t_s,
        phase_threshold_deg: cfg.phase_threshold_deg,
    }
}

fn fmt_converged(converged_at: Option<usize>) -> String {
    match converged_at {
        Some(k) => k.to_string(),
        None => "censored".to_string(),
    }
}

/// Validates the config, runs the experiment, writes every output file into
/// `cfg.out_dir` (creating it if needed), and returns the file list plus a
/// one-line summary. All outputs are deterministic in (config, seed).
pub fn run_experiment(cfg: &ExperimentConfig) -> Result<ExperimentOutcome, ExperimentError> {
    let violations = validate_config(cfg);
    if !violations.is_empty() {
        return Err(ExperimentError::Invalid(violations));
    }
    fs::create_dir_all(&cfg.out_dir)
        .map_err(|e| ExperimentError::Io(format!("{}: {e}", cfg.out_dir.display())))?;
    let dir = cfg.out_dir.clone();
    let mut files = Vec::new();
    let ccfg = consensus_config(cfg);

    let summary = match cfg.experiment {
        ExperimentKind::Static => {
            let mut rng = master_rng(cfg.seed);
            let g = generate_connected_graph(cfg.n, cfg.r, &mut rng)
                .map_err(|e| ExperimentError::Op(e.into()))?;
            let w = build_mixing_matrix(&g).map_err(|e| ExperimentError::Op(e.into()))?;
            let f0 = init_frequencies(cfg.n, cfg.carrier_hz, cfg.sigma_ppm, &mut rng);
            let traj = run_static(&w, &f0, &ccfg).map_err(|e| ExperimentError::Op(e.into()))?;
            write_file(&mut files, &dir, "graph.edges", &g.to_edge_list_string())?;
            write_file(&mut files, &dir, "mixing.csv", &w.to_csv_string())?;
            write_file(&mut files, &dir, "trajectory.csv", &traj.to_csv_string())?;
            let final_ppm: Vec<f64> = traj
                .snapshots
                .last()
                .unwrap()
                .iter()
                .map(|&o| o / cfg.carrier_hz * 1e6)
                .collect();
            format!(
                "static: n={} r={} seed={} lambda2={:.4} converged_at={} final_rms_ppm={:.3}",
                cfg.n,
                cfg.r,
                cfg.seed,
                second_eigenvalue(&w),
                fmt_converged(traj.converged_at),
                rms(&final_ppm),
            )
        }
        ExperimentKind::Dynamic if cfg.sims == 1 => {
            let mut rng = master_rng(cfg.seed);
            let g = generate_connected_graph(cfg.n, cfg.r, &mut rng)
                .map_err(|e| ExperimentError::Op(e.into()))?;
            let w = build_mixing_matrix(&g).map_err(|e| ExperimentError::Op(e.into()))?;
            let f0 = init_frequencies(cfg.n, cfg.carrier_hz, cfg.sigma_ppm, &mut rng);
            let traj = run_dynamic(&w, &g, &f0, cfg.p1, &ccfg, &mut rng)
                .map_err(|e| ExperimentError::Op(e.into()))?;
            write_file(&mut files, &dir, "graph.edges", &g.to_edge_list_string())?;
            write_file(&mut files, &dir, "mixing.csv", &w.to_csv_string())?;
            write_file(&mut files, &dir, "trajectory.csv", &traj.to_csv_string())?;
            let adds =
                traj.mutations.iter().filter(|m| matches!(m, MutationKind::Added(..))).count();
            let removes =
                traj.mutations.iter().filter(|m| matches!(m, MutationKind::Removed(..))).count();
            format!(
                "dynamic: n={} r={} p1={} seed={} converged_at={} adds={} removes={}",
                cfg.n,
                cfg.r,
                cfg.p1,
                cfg.seed,
                fmt_converged(traj.converged_at),
                adds,
                removes,
            )
        }
        ExperimentKind::Dynamic => {
            let triples: Vec<MutationProbs> = cfg
                .p_triples
                .iter()
                .map(|t| MutationProbs::new(t[0], t[1], t[2]))
                .collect::<Result<_, _>>()
                .map_err(|e| ExperimentError::Op(e.into()))?;
            let series = dynamic_convergence_sweep(
                cfg.n,
                &cfg.r_list,
                &triples,
                cfg.sims,
                &ccfg,
                cfg.carrier_hz,
                cfg.seed,
            )?;
            let mut csv = String::from("series,r,mean_iterations,std_dev,count,censored\n");
            for s in &series {
                for p in &s.points {
                    csv.push_str(&format!(
                        "{},{},{:.16e},{:.16e},{},{}\n",
                        s.label, p.axis, p.mean, p.std_dev, p.count, p.censored
                    ));
                }
            }
            write_file(&mut files, &dir, "dynamic_sweep.csv", &csv)?;
            let at_first: Vec<String> = series
                .iter()
                .map(|s| format!("{}={:.0}", s.label, s.points[0].mean))
                .collect();
            format!(
                "dynamic sweep: n={} sims={} mean iterations at r={}: {}",
                cfg.n,
                cfg.sims,
                cfg.r_list[0],
                at_first.join(" "),
            )
        }
        ExperimentKind::Drift => {
            let runs = drift_experiment(
                &cfg.n_list,
                cfg.r,
                &drift_config(cfg),
                &ccfg,
                cfg.carrier_hz,
                cfg.seed,
            )?;
            let mut parts = Vec::new();
            for run in &runs {
                let name = format!("drift_n{}.csv", run.n);
                write_file(&mut files, &dir, &name, &run.trajectory.to_csv_string())?;
                parts.push(format!(
                    "n={} crossed_at={} steady_gain={:.3}",
                    run.n,
                    fmt_converged(run.trajectory.converged_at),
                    steady_state_gain(run),
                ));
            }
            format!("drift: r={} adev={:e} {}", cfg.r, cfg.adev, parts.join(" | "))
        }
        ExperimentKind::ProbGain => {
            let mut csv = String::from("sigma_deg,probability,trials,n\n");
            let mut summary_p = None;
            for &sigma_deg in &cfg.sigma_deg_list {
                let p = prob_gain_exceeds(
                    cfg.n,
                    sigma_deg.to_radians(),
                    cfg.gain_threshold,
                    cfg.trials,
                    cfg.seed,
                )?;
                csv.push_str(&format!("{sigma_deg},{p:.6},{},{}\n", cfg.trials, cfg.n));
                if summary_p.is_none() || sigma_deg <= 18.0 {
                    summary_p = Some((sigma_deg, p));
                }
            }
            write_file(&mut files, &dir, "prob_gain.csv", &csv)?;
            let (s, p) = summary_p.unwrap();
            format!(
                "prob-gain: n={} trials={} P(G>={} | sigma={s}deg)={p:.4}",
                cfg.n, cfg.trials, cfg.gain_threshold,
            )
        }
        ExperimentKind::RmsSweep => {
            let sweep = rms_error_sweep(&cfg.n_list, cfg.r, cfg.sims, &ccfg, cfg.seed)?;
            let mut csv = String::from("n,rms_ppm,std_dev,count,censored,oracle_ppm\n");
            let mut parts = Vec::new();
            for p in &sweep.points {
                let oracle = rms_oracle_ppm(cfg.sigma_ppm, p.axis as usize);
                csv.push_str(&format!(
                    "{},{:.16e},{:.16e},{},{},{:.16e}\n",
                    p.axis, p.mean, p.std_dev, p.count, p.censored, oracle
                ));
                parts.push(format!("n={}: {:.2}ppm (oracle {:.2})", p.axis, p.mean, oracle));
            }
            write_file(&mut files, &dir, "rms_sweep.csv", &csv)?;
            format!("rms-sweep: sims={} {}", cfg.sims, parts.join(" "))
        }
        ExperimentKind::IterSweep => {
            let series = convergence_iterations_sweep(
                &cfg.n_list,
                &cfg.r_list,
                cfg.sims,
                &ccfg,
                cfg.carrier_hz,
                cfg.seed,
            )?;
            let mut csv = String::from("n,r,mean_iterations,std_dev,count,censored\n");
            for (s, &n) in series.iter().zip(&cfg.n_list) {
                for p in &s.points {
                    csv.push_str(&format!(
                        "{n},{},{:.16e},{:.16e},{},{}\n",
                        p.axis, p.mean, p.std_dev, p.count, p.censored
                    ));
                }
            }
            write_file(&mut files, &dir, "iter_sweep.csv", &csv)?;
            let last = series.last().unwrap();
            let means: Vec<String> = last
                .points
                .iter()
                .map(|p| format!("r={}: {:.0}", p.axis, p.mean))
                .collect();
            format!(
                "iter-sweep: sims={} mean iterations for {}: {}",
                cfg.sims,
                last.label,
                means.join(" "),
            )
        }
        ExperimentKind::Lambda2 => {
            let cmp = lambda2_product_comparison(cfg.n, cfg.r, cfg.sims, cfg.seed)?;
            write_file(&mut files, &dir, "lambda2_samples.csv", &cmp.to_csv_string())?;
            format!(
                "lambda2: n={} r={} samples={} fraction_mutated_less={:.4} mean_static={:.5} mean_mutated={:.5}",
                cfg.n, cfg.r, cfg.sims, cmp.fraction_mutated_less, cmp.mean_unchanged, cmp.mean_mutated,
            )
        }
        ExperimentKind::Pattern => {
            let mut grng = replica_rng(cfg.seed, 0);
            let geom = generate_sparse_array(cfg.n, cfg.extent_wl, cfg.grid_step_wl, &mut grng)
                .map_err(|e| ExperimentError::Op(MonteCarloError::InvalidParameter(e.to_string())))?;
            let steer_dir = Direction::from_theta_phi(cfg.steer_theta_deg, cfg.steer_phi_deg);
            let steering = steering_phases(&geom, steer_dir);
            let mut erng = replica_rng(cfg.seed, 1);
            let sigma_rad = cfg.sigma_deg.to_radians();
            let errors: Vec<f64> = (0..cfg.n)
                .map(|_| {
                    sigma_rad
                        * <StandardNormal as Distribution<f64>>::sample(&StandardNormal, &mut erng)
                })
                .collect();
            write_file(&mut files, &dir, "geometry.csv", &geom.to_csv_string())?;
            let level_db = match cfg.pattern_kind {
                PatternKind::Cut => {
                    let cut = radiation_pattern_cut(
                        &geom,
                        &steering,
                        &errors,
                        cfg.steer_phi_deg,
                        cfg.pattern_points,
                    )
                    .map_err(|e| ExperimentError::Op(MonteCarloError::InvalidParameter(e.to_string())))?;
                    write_file(&mut files, &dir, "pattern_cut.csv", &cut.to_csv_string())?;
                    let target = cfg.steer_theta_deg;
                    let (idx, _) = cut
                        .theta_deg
                        .iter()
                        .enumerate()
                        .min_by(|a, b| {
                            (a.1 - target).abs().partial_cmp(&(b.1 - target).abs()).unwrap()
                        })
                        .unwrap();
                    cut.value_db[idx]
                }
                PatternKind::Uv => {
                    let grid = radiation_pattern_uv(
                        &geom,
                        &steering,
                        &errors,
                        cfg.pattern_points,
                    )
                    .map_err(|e| ExperimentError::Op(MonteCarloError::InvalidParameter(e.to_string())))?;
                    write_file(&mut files, &dir, "pattern_uv.csv", &grid.to_csv_string())?;
                    let nearest = |axis: &[f64], t: f64| {
                        axis.iter()
                            .enumerate()
                            .min_by(|a, b| (a.1 - t).abs().partial_cmp(&(b.1 - t).abs()).unwrap())
                            .map(|(i, _)| i)
                            .unwrap()
                    };
                    let iu = nearest(&grid.u, steer_dir.u);
                    let iv = nearest(&grid.v, steer_dir.v);
                    grid.value_db[iv][iu]
                }
            };
            format!(
                "pattern: n={} sigma_deg={} steer=({}, {}) level_at_steer={level_db:.3} dB",
                cfg.n, cfg.sigma_deg, cfg.steer_theta_deg, cfg.steer_phi_deg,
            )
        }
        ExperimentKind::Layout => {
            let mut rng = replica_rng(cfg.seed, 0);
            let geom = generate_sparse_array(cfg.n, cfg.extent_wl, cfg.grid_step_wl, &mut rng)
                .map_err(|e| ExperimentError::Op(MonteCarloError::InvalidParameter(e.to_string())))?;
            write_file(&mut files, &dir, "layout.csv", &geom.to_csv_string())?;
            let per_axis = (cfg.extent_wl / cfg.grid_step_wl + 1e-9).floor() as usize + 1;
            format!(
                "layout: n={} on a {per_axis}x{per_axis} grid of step {} within {} wavelengths",
                cfg.n, cfg.grid_step_wl, cfg.extent_wl,
            )
        }
    };

    write_file(&mut files, &dir, "config.json", &cfg.to_json())?;
    Ok(ExperimentOutcome { files, summary })
}
