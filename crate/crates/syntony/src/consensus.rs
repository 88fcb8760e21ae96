//! Decentralized frequency alignment by iterative neighbor averaging.
//!
//! Every node holds a local oscillator frequency, stored as an offset from the
//! nominal carrier (offsets near 1e5 Hz keep full double precision, absolute
//! values near 1e9 Hz would not). One iteration multiplies the offset vector
//! by the network's mixing matrix; because the matrix is doubly stochastic the
//! network mean is preserved and all nodes contract geometrically toward it at
//! rate `second_eigenvalue`.
//!
//! Three run modes:
//! * [`run_static`]: fixed topology, stop at convergence or iteration cap.
//! * [`run_dynamic`]: the topology mutates (edge add/remove) before each
//!   averaging step, modeling links that come and go at runtime.
//! * [`run_with_drift`]: every oscillator drifts by a fresh uniform
//!   perturbation each interval before averaging, so exact consensus is never
//!   reached; convergence is judged on the spread of per-interval phases
//!   instead.

use std::fmt;

use rand::RngExt;
use rand_distr::{Distribution, StandardNormal};

use crate::rng::SimRng;
use crate::stats::{mean, sample_std};
use crate::topology::{MixingMatrix, MutationKind, MutationProbs, NetworkGraph, TopologyError};

// ---------------------------------------------------------------------------
// errors and configs
// ---------------------------------------------------------------------------

#[derive(Debug, Clone, PartialEq)]
pub enum ConsensusError {
    /// State length does not match the mixing matrix size.
    DimensionMismatch { expected: usize, got: usize },
    /// A config field violates its invariant (message names it).
    InvalidConfig(String),
    /// Topology-level failure surfaced by a dynamic run.
    Topology(TopologyError),
}

impl fmt::Display for ConsensusError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Self::DimensionMismatch { expected, got } => {
                write!(f, "state has {got} nodes but the matrix expects {expected}")
            }
            Self::InvalidConfig(msg) => write!(f, "invalid config: {msg}"),
            Self::Topology(e) => write!(f, "topology error: {e}"),
        }
    }
}

impl std::error::Error for ConsensusError {
    fn source(&self) -> Option<&(dyn std::error::Error + 'static)> {
        match self {
            Self::Topology(e) => Some(e),
            _ => None,
        }
    }
}

impl From<TopologyError> for ConsensusError {
    fn from(e: TopologyError) -> Self {
        Self::Topology(e)
    }
}

/// Stopping rule and initialization scale for consensus runs.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ConsensusConfig {
    /// Convergence threshold on `max_i |f_i - mean|`, in Hz.
    pub epsilon_hz: f64,
    /// Iteration cap; hitting it flags the run as censored, not an error.
    pub max_iterations: usize,
    /// Initial offset scale in parts per million of the carrier.
    pub sigma_ppm: f64,
}

impl Default for ConsensusConfig {
    fn default() -> Self {
        Self { epsilon_hz: 2e-3, max_iterations: 50_000, sigma_ppm: 100.0 }
    }
}

impl ConsensusConfig {
    pub fn validate(&self) -> Result<(), ConsensusError> {
        if !(self.epsilon_hz > 0.0) {
            return Err(ConsensusError::InvalidConfig(format!(
                "epsilon_hz = {} must be positive",
                self.epsilon_hz
            )));
        }
        if self.max_iterations == 0 {
            return Err(ConsensusError::InvalidConfig("max_iterations must be at least 1".into()));
        }
        if !(self.sigma_ppm > 0.0) {
            return Err(ConsensusError::InvalidConfig(format!(
                "sigma_ppm = {} must be positive",
                self.sigma_ppm
            )));
        }
        Ok(())
    }
}

/// Oscillator drift model: each interval every node gains a frequency
/// perturbation drawn uniformly from `[0, adev * carrier]` Hz.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DriftConfig {
    /// Allan deviation at the update interval (fractional frequency).
    /// Zero is allowed and reduces a drift run to a static run.
    pub adev: f64,
    /// Update interval in seconds; scales frequency errors into phases.
    pub interval_t_s: f64,
    /// Phase-spread threshold, in degrees, that stands in for convergence.
    pub phase_threshold_deg: f64,
}

impl Default for DriftConfig {
    fn default() -> Self {
        Self { adev: 1e-9, interval_t_s: 1.0, phase_threshold_deg: 18.0 }
    }
}

impl DriftConfig {
    pub fn validate(&self) -> Result<(), ConsensusError> {
        if !(self.adev >= 0.0) {
            return Err(ConsensusError::InvalidConfig(format!(
                "adev = {} must be nonnegative",
                self.adev
            )));
        }
        if !(self.interval_t_s > 0.0) {
            return Err(ConsensusError::InvalidConfig(format!(
                "interval_t_s = {} must be positive",
                self.interval_t_s
            )));
        }
        if !(self.phase_threshold_deg > 0.0) {
            return Err(ConsensusError::InvalidConfig(format!(
                "phase_threshold_deg = {} must be positive",
                self.phase_threshold_deg
            )));
        }
        Ok(())
    }
}

// ---------------------------------------------------------------------------
// state and trajectory
// ---------------------------------------------------------------------------

/// Oscillator frequencies of the whole network at one instant, stored as
/// offsets `f_i - carrier` in Hz.
#[derive(Debug, Clone, PartialEq)]
pub struct FrequencyState {
    pub carrier_hz: f64,
    pub offsets: Vec<f64>,
}

impl FrequencyState {
    pub fn n(&self) -> usize {
        self.offsets.len()
    }

    /// Absolute frequency of node `i`.
    pub fn frequency_hz(&self, i: usize) -> f64 {
        self.carrier_hz + self.offsets[i]
    }
}

/// Draws initial offsets `sigma * X_i` with `X_i` standard normal and
/// `sigma = sigma_ppm * 1e-6 * carrier` Hz.
pub fn init_frequencies(
    n: usize,
    carrier_hz: f64,
    sigma_ppm: f64,
    rng: &mut SimRng,
) -> FrequencyState {
    assert!(n >= 2, "need at least 2 nodes, got {n}");
    let sigma = sigma_ppm * 1e-6 * carrier_hz;
    let offsets = (0..n)
        .map(|_| sigma * <StandardNormal as Distribution<f64>>::sample(&StandardNormal, rng))
        .collect();
    FrequencyState { carrier_hz, offsets }
}

/// One averaging iteration: `offsets' = W * offsets`; the carrier is untouched.
pub fn consensus_step(
    w: &MixingMatrix,
    f: &FrequencyState,
) -> Result<FrequencyState, ConsensusError> {
    if f.n() != w.n() {
        return Err(ConsensusError::DimensionMismatch { expected: w.n(), got: f.n() });
    }
    Ok(FrequencyState { carrier_hz: f.carrier_hz, offsets: w.apply(&f.offsets) })
}

/// True iff every node sits within `epsilon_hz` of the current network mean.
pub fn has_converged(f: &FrequencyState, epsilon_hz: f64) -> bool {
    let m = mean(&f.offsets);
    f.offsets.iter().all(|&x| (x - m).abs() < epsilon_hz)
}

/// Full record of one run: every state, plus per-iteration phase data for
/// drift runs and mutation events for dynamic runs.
#[derive(Debug, Clone, PartialEq)]
pub struct Trajectory {
    pub carrier_hz: f64,
    /// Offset vectors for iterations `0..=iterations()`; entry 0 is the
    /// initial state.
    pub snapshots: Vec<Vec<f64>>,
    /// First iteration satisfying the stopping rule, `None` if censored by
    /// the iteration cap.
    pub converged_at: Option<usize>,
    /// Mutation taken before each step (dynamic runs); empty otherwise.
    pub mutations: Vec<MutationKind>,
    /// Per-interval phases `2 pi T (f_i - mean)` per iteration (drift runs);
    /// empty otherwise.
    pub phase_rad: Vec<Vec<f64>>,
    /// Sample standard deviation of each phase vector, in degrees.
    pub phase_std_deg: Vec<f64>,
}

impl Trajectory {
    /// Number of averaging iterations executed.
    pub fn iterations(&self) -> usize {
        self.snapshots.len() - 1
    }

    pub fn mean_offset_hz(&self, k: usize) -> f64 {
        mean(&self.snapshots[k])
    }

    pub fn max_abs_deviation_hz(&self, k: usize) -> f64 {
        let m = mean(&self.snapshots[k]);
        self.snapshots[k].iter().map(|&x| (x - m).abs()).fold(0.0, f64::max)
    }

    pub fn mean_offset_series(&self) -> Vec<f64> {
        (0..self.snapshots.len()).map(|k| self.mean_offset_hz(k)).collect()
    }

    pub fn max_abs_deviation_series(&self) -> Vec<f64> {
        (0..self.snapshots.len()).map(|k| self.max_abs_deviation_hz(k)).collect()
    }

    /// Coherent gain of the recorded phase vectors (drift runs only).
    pub fn coherent_gain_series(&self) -> Vec<f64> {
        self.phase_rad
            .iter()
            .map(|p| crate::array_model::coherent_gain(p).expect("non-empty phases"))
            .collect()
    }

    /// CSV form: one row per recorded iteration. Base columns `iteration`,
    /// `max_abs_deviation_hz`, `mean_offset_hz`; drift runs append
    /// `phase_std_deg` and `coherent_gain`; dynamic runs append
    /// `mutation_event` (`none` for row 0, no mutation precedes the initial
    /// state).
    pub fn to_csv_string(&self) -> String {
        let drift = !self.phase_rad.is_empty();
        let dynamic = !self.mutations.is_empty();
        let gains = if drift { self.coherent_gain_series() } else { Vec::new() };
        let mut header = String::from("iteration,max_abs_deviation_hz,mean_offset_hz");
        if drift {
            header.push_str(",phase_std_deg,coherent_gain");
        }
        if dynamic {
            header.push_str(",mutation_event");
        }
        let mut out = header;
        out.push('\n');
        for k in 0..self.snapshots.len() {
            out.push_str(&format!(
                "{k},{:.16e},{:.16e}",
                self.max_abs_deviation_hz(k),
                self.mean_offset_hz(k)
            ));
            if drift {
                out.push_str(&format!(",{:.16e},{:.16e}", self.phase_std_deg[k], gains[k]));
            }
            if dynamic {
                if k == 0 {
                    out.push_str(",none");
                } else {
                    out.push_str(&format!(",{}", self.mutations[k - 1]));
                }
            }
            out.push('\n');
        }
        out
    }
}

// ---------------------------------------------------------------------------
// run modes
// ---------------------------------------------------------------------------

/// Runs averaging on a fixed topology until `has_converged` or the iteration
/// cap. A censored run (cap reached) returns `converged_at: None`.
pub fn run_static(
    w: &MixingMatrix,
    f0: &FrequencyState,
    cfg: &ConsensusConfig,
) -> Result<Trajectory, ConsensusError> {
    cfg.validate()?;
    if f0.n() != w.n() {
        return Err(ConsensusError::DimensionMismatch { expected: w.n(), got: f0.n() });
    }
    let mut traj = Trajectory {
        carrier_hz: f0.carrier_hz,
        snapshots: vec![f0.offsets.clone()],
        converged_at: None,
        mutations: Vec::new(),
        phase_rad: Vec::new(),
        phase_std_deg: Vec::new(),
    };
    let mut state = f0.clone();
    if has_converged(&state, cfg.epsilon_hz) {
        traj.converged_at = Some(0);
        return Ok(traj);
    }
    for k in 1..=cfg.max_iterations {
        state = consensus_step(w, &state)?;
        traj.snapshots.push(state.offsets.clone());
        if has_converged(&state, cfg.epsilon_hz) {
            traj.converged_at = Some(k);
            break;
        }
    }
    Ok(traj)
}

/// Dynamic-topology run: before each averaging step the topology mutates with
/// no-change probability `p1`, the rest split evenly between removing and
/// adding an edge. Events are recorded per iteration.
pub fn run_dynamic(
    w: &MixingMatrix,
    g: &NetworkGraph,
    f0: &FrequencyState,
    p1: f64,
    cfg: &ConsensusConfig,
    rng: &mut SimRng,
) -> Result<Trajectory, ConsensusError> {
    let probs = MutationProbs::symmetric(p1)?;
    run_dynamic_weighted(w, g, f0, &probs, cfg, rng)
}

/// [`run_dynamic`] generalized to an arbitrary mutation-probability triple.
pub fn run_dynamic_weighted(
    w: &MixingMatrix,
    g: &NetworkGraph,
    f0: &FrequencyState,
    probs: &MutationProbs,
    cfg: &ConsensusConfig,
    rng: &mut SimRng,
) -> Result<Trajectory, ConsensusError> {
    cfg.validate()?;
    if f0.n() != w.n() {
        return Err(ConsensusError::DimensionMismatch { expected: w.n(), got: f0.n() });
    }
    if g.n() != w.n() {
        return Err(ConsensusError::InvalidConfig(format!(
            "graph has {} nodes but the matrix expects {}",
            g.n(),
            w.n()
        )));
    }
    let mut traj = Trajectory {
        carrier_hz: f0.carrier_hz,
        snapshots: vec![f0.offsets.clone()],
        converged_at: None,
        mutations: Vec::new(),
        phase_rad: Vec::new(),
        phase_std_deg: Vec::new(),
    };
    let mut state = f0.clone();
    if has_converged(&state, cfg.epsilon_hz) {
        traj.converged_at = Some(0);
        return Ok(traj);
    }
    let mut wc = w.clone();
    let mut gc = g.clone();
    for k in 1..=cfg.max_iterations {
        let kind = crate::topology::mutate_in_place(&mut wc, &mut gc, probs, rng);
        traj.mutations.push(kind);
        state = consensus_step(&wc, &state)?;
        traj.snapshots.push(state.offsets.clone());
        if has_converged(&state, cfg.epsilon_hz) {
            traj.converged_at = Some(k);
            break;
        }
    }
    Ok(traj)
}

/// Drift run: each iteration first adds an independent uniform perturbation
/// from `[0, adev * carrier]` Hz to every node, then averages. The injection
/// never stops, so the run always executes the full `cfg.max_iterations`
/// budget; `converged_at` reports the first iteration whose phase spread
/// (sample std of `2 pi T (f_i - mean)`) dropped below the configured
/// threshold.
///
/// The perturbation is deliberately one-sided: the common-mode component it
/// adds shifts every node together and cancels out of the relative phases, so
/// alignment is unaffected even though the network mean wanders upward.
pub fn run_with_drift(
    w: &MixingMatrix,
    f0: &FrequencyState,
    drift: &DriftConfig,
    cfg: &ConsensusConfig,
    rng: &mut SimRng,
) -> Result<Trajectory, ConsensusError> {
    cfg.validate()?;
    drift.validate()?;
    if f0.n() != w.n() {
        return Err(ConsensusError::DimensionMismatch { expected: w.n(), got: f0.n() });
    }
    let two_pi_t = 2.0 * std::f64::consts::PI * drift.interval_t_s;
    let record_phases = |traj: &mut Trajectory, offsets: &[f64]| {
        let m = mean(offsets);
        let phases: Vec<f64> = offsets.iter().map(|&x| two_pi_t * (x - m)).collect();
        let std_deg = sample_std(&phases).to_degrees();
        traj.phase_rad.push(phases);
        traj.phase_std_deg.push(std_deg);
    };
    let mut traj = Trajectory {
        carrier_hz: f0.carrier_hz,
        snapshots: vec![f0.offsets.clone()],
        converged_at: None,
        mutations: Vec::new(),
        phase_rad: Vec::new(),
        phase_std_deg: Vec::new(),
    };
    record_phases(&mut traj, &f0.offsets);
    let bound = drift.adev * f0.carrier_hz;
    let mut state = f0.clone();
    for _ in 1..=cfg.max_iterations {
        for x in &mut state.offsets {
            *x += rng.random::<f64>() * bound;
        }
        state = consensus_step(w, &state)?;
        traj.snapshots.push(state.offsets.clone());
        record_phases(&mut traj, &state.offsets);
    }
    traj.converged_at = traj
        .phase_std_deg
        .iter()
        .position(|&s| s < drift.phase_threshold_deg);
    Ok(traj)
}
