//! Monte Carlo sweeps over the simulation primitives.
//!
//! Every operation takes a master seed instead of a live RNG: replica `i` of a
//! sweep draws from an independent ChaCha stream derived from (seed, i), so
//! results are bit-identical regardless of how rayon schedules the replicas
//! across threads. Reruns with the same seed and config reproduce every file
//! byte for byte.
//!
//! Statistics are aggregated per sweep point; runs that hit the iteration cap
//! without converging are counted as censored and excluded from means rather
//! than silently biasing them.

use std::fmt;

use rand_distr::{Distribution, StandardNormal};
use rayon::prelude::*;

use crate::consensus::{
    init_frequencies, run_dynamic_weighted, run_static, run_with_drift, ConsensusConfig,
    ConsensusError, DriftConfig, Trajectory,
};
use crate::rng::replica_rng;
use crate::stats::{mean, rms, sample_std};
use crate::topology::{
    build_mixing_matrix, generate_connected_graph, mutate_topology_weighted, second_eigenvalue,
    second_eigenvalue_of_product, MutationProbs, TopologyError,
};

/// Carrier used where a sweep needs an absolute frequency scale. The swept
/// statistics are expressed in carrier-relative units (ppm, iteration counts,
/// eigenvalues), so the specific value only anchors the Hz-denominated
/// convergence threshold, matching the 1 GHz used throughout the experiments.
pub const DEFAULT_CARRIER_HZ: f64 = 1e9;

#[derive(Debug, Clone, PartialEq)]
pub enum MonteCarloError {
    /// A parameter violates an operation precondition (message names it).
    InvalidParameter(String),
    Topology(TopologyError),
    Consensus(ConsensusError),
}

impl fmt::Display for MonteCarloError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Self::InvalidParameter(msg) => write!(f, "invalid parameter: {msg}"),
            Self::Topology(e) => write!(f, "topology error: {e}"),
            Self::Consensus(e) => write!(f, "consensus error: {e}"),
        }
    }
}

impl std::error::Error for MonteCarloError {
    fn source(&self) -> Option<&(dyn std::error::Error + 'static)> {
        match self {
            Self::Topology(e) => Some(e),
            Self::Consensus(e) => Some(e),
            Self::InvalidParameter(_) => None,
        }
    }
}

impl From<TopologyError> for MonteCarloError {
    fn from(e: TopologyError) -> Self {
        Self::Topology(e)
    }
}

impl From<ConsensusError> for MonteCarloError {
    fn from(e: ConsensusError) -> Self {
        Self::Consensus(e)
    }
}

// ---------------------------------------------------------------------------
// sweep result containers
// ---------------------------------------------------------------------------

/// Statistics at one swept axis value. The meaning of `mean` is defined by the
/// producing operation (mean iterations, RMS error in ppm, ...); `count` is
/// the number of uncensored samples behind it.
#[derive(Debug, Clone, PartialEq)]
pub struct SweepPoint {
    pub axis: f64,
    pub mean: f64,
    pub std_dev: f64,
    pub count: usize,
    pub censored: usize,
}

/// One labeled series over a strictly increasing axis.
#[derive(Debug, Clone, PartialEq)]
pub struct SweepResult {
    pub label: String,
    pub axis_name: String,
    pub seed: u64,
    pub points: Vec<SweepPoint>,
}

impl SweepResult {
    /// CSV form: `axis_name,mean,std_dev,count,censored` rows.
    pub fn to_csv_string(&self) -> String {
        let mut out = format!("{},mean,std_dev,count,censored\n", self.axis_name);
        for p in &self.points {
            out.push_str(&format!(
                "{},{:.16e},{:.16e},{},{}\n",
                p.axis, p.mean, p.std_dev, p.count, p.censored
            ));
        }
        out
    }
}

fn require(cond: bool, msg: impl Into<String>) -> Result<(), MonteCarloError> {
    if cond {
        Ok(())
    } else {
        Err(MonteCarloError::InvalidParameter(msg.into()))
    }
}

fn require_increasing(axis: &[f64], name: &str) -> Result<(), MonteCarloError> {
    require(!axis.is_empty(), format!("{name} must be nonempty"))?;
    require(
        axis.windows(2).all(|w| w[0] < w[1]),
        format!("{name} must be strictly increasing"),
    )
}

/// Requested edge count, floored at a spanning tree so every size in a sweep
/// stays feasible; returns the ratio actually realized.
fn clamp_ratio(n: usize, r: f64) -> f64 {
    let total = (n * (n - 1) / 2) as f64;
    let m = (r * total).round();
    if m < (n - 1) as f64 {
        (n - 1) as f64 / total
    } else {
        r
    }
}

// ---------------------------------------------------------------------------
// operations
// ---------------------------------------------------------------------------

/// Probability that the coherent gain of `n` elements with i.i.d. zero-mean
/// normal phase errors of standard deviation `sigma_phi_rad` reaches at least
/// `x`, estimated over `trials` independent draws.
pub fn prob_gain_exceeds(
    n: usize,
    sigma_phi_rad: f64,
    x: f64,
    trials: usize,
    seed: u64,
) -> Result<f64, MonteCarloError> {
    require(n >= 1, format!("n = {n} must be at least 1"))?;
    require(trials >= 1, format!("trials = {trials} must be at least 1"))?;
    require((0.0..=1.0).contains(&x), format!("threshold x = {x} outside [0, 1]"))?;
    require(sigma_phi_rad >= 0.0, format!("sigma_phi = {sigma_phi_rad} must be nonnegative"))?;
    let hits = (0..trials as u64)
        .into_par_iter()
        .filter(|&t| {
            let mut rng = replica_rng(seed, t);
            let (mut re, mut im) = (0.0f64, 0.0f64);
            for _ in 0..n {
                let z: f64 =
                    <StandardNormal as Distribution<f64>>::sample(&StandardNormal, &mut rng);
                let p = sigma_phi_rad * z;
                re += p.cos();
                im += p.sin();
            }
            let nn = n as f64;
            (re * re + im * im) / (nn * nn) >= x
        })
        .count();
    Ok(hits as f64 / trials as f64)
}

/// Analytic oracle for the RMS sweep: the consensus value is the mean of `n`
/// i.i.d. normal draws of scale `sigma_ppm`, so its RMS is `sigma_ppm/sqrt(n)`.
pub fn rms_oracle_ppm(sigma_ppm: f64, n: usize) -> f64 {
    sigma_ppm / (n as f64).sqrt()
}

/// RMS of the normalized post-convergence frequency error, in ppm of the
/// carrier, versus network size. Per run the statistic is the RMS over nodes
/// of the final offsets; the point value is the quadratic mean of that over
/// uncensored runs, which the `rms_oracle_ppm` closed form predicts.
pub fn rms_error_sweep(
    ns: &[usize],
    r: f64,
    sims: usize,
    cfg: &ConsensusConfig,
    seed: u64,
) -> Result<SweepResult, MonteCarloError> {
    cfg.validate()?;
    require(sims >= 1, "sims must be at least 1")?;
    let axis: Vec<f64> = ns.iter().map(|&n| n as f64).collect();
    require_increasing(&axis, "ns")?;
    require(ns.iter().all(|&n| n >= 2), "every n must be at least 2")?;
    let mut points = Vec::with_capacity(ns.len());
    for (ni, &n) in ns.iter().enumerate() {
        let r_eff = clamp_ratio(n, r);
        let samples: Vec<Option<f64>> = (0..sims as u64)
            .into_par_iter()
            .map(|s| {
                let mut rng = replica_rng(seed, ((ni as u64) << 32) | s);
                let g = generate_connected_graph(n, r_eff, &mut rng).expect("feasible ratio");
                let w = build_mixing_matrix(&g).expect("generated graphs are connected");
                let f0 = init_frequencies(n, DEFAULT_CARRIER_HZ, cfg.sigma_ppm, &mut rng);
                let traj = run_static(&w, &f0, cfg).expect("validated dimensions");
                traj.converged_at.map(|_| {
                    let last = traj.snapshots.last().unwrap();
                    let ppm: Vec<f64> =
                        last.iter().map(|&o| o / DEFAULT_CARRIER_HZ * 1e6).collect();
                    rms(&ppm)
                })
            })
            .collect();
        let kept: Vec<f64> = samples.iter().flatten().copied().collect();
        let censored = sims - kept.len();
        require(!kept.is_empty(), format!("all runs censored at n = {n}"))?;
        points.push(SweepPoint {
            axis: n as f64,
            mean: rms(&kept),
            std_dev: sample_std(&kept),
            count: kept.len(),
            censored,
        });
    }
    Ok(SweepResult { label: format!("rms_ppm(r={r})"), axis_name: "n".into(), seed, points })
}

/// Mean iterations to convergence on static topologies over an `(n, r)` grid;
/// one series per network size, swept over connectivity ratio.
pub fn convergence_iterations_sweep(
    ns: &[usize],
    rs: &[f64],
    sims: usize,
    cfg: &ConsensusConfig,
    carrier_hz: f64,
    seed: u64,
) -> Result<Vec<SweepResult>, MonteCarloError> {
    cfg.validate()?;
    require(sims >= 1, "sims must be at least 1")?;
    require(!ns.is_empty(), "ns must be nonempty")?;
    require(ns.iter().all(|&n| n >= 2), "every n must be at least 2")?;
    require(carrier_hz > 0.0, "carrier must be positive")?;
    require_increasing(rs, "rs")?;
    let mut results = Vec::with_capacity(ns.len());
    for (ni, &n) in ns.iter().enumerate() {
        let mut points = Vec::with_capacity(rs.len());
        for (ri, &r) in rs.iter().enumerate() {
            let r_eff = clamp_ratio(n, r);
            let samples: Vec<Option<usize>> = (0..sims as u64)
                .into_par_iter()
                .map(|s| {
                    let stream = ((ni as u64) << 48) | ((ri as u64) << 40) | s;
                    let mut rng = replica_rng(seed, stream);
                    let g = generate_connected_graph(n, r_eff, &mut rng).expect("feasible ratio");
                    let w = build_mixing_matrix(&g).expect("connected");
                    let f0 = init_frequencies(n, carrier_hz, cfg.sigma_ppm, &mut rng);
                    run_static(&w, &f0, cfg).expect("validated").converged_at
                })
                .collect();
            let kept: Vec<f64> = samples.iter().flatten().map(|&k| k as f64).collect();
            let censored = sims - kept.len();
            require(!kept.is_empty(), format!("all runs censored at n = {n}, r = {r}"))?;
            points.push(SweepPoint {
                axis: r,
                mean: mean(&kept),
                std_dev: sample_std(&kept),
                count: kept.len(),
                censored,
            });
        }
        results.push(SweepResult {
            label: format!("n={n}"),
            axis_name: "r".into(),
            seed,
            points,
        });
    }
    Ok(results)
}

/// Paired second-eigenvalue samples for two-step averaging: `unchanged[i]` is
/// the second eigenvalue magnitude of `W*W` and `mutated[i]` of `W*W1`, where
/// `W1` is `W` after one random mutation (add or remove, equal odds).
#[derive(Debug, Clone, PartialEq)]
pub struct Lambda2Comparison {
    pub n: usize,
    pub r: f64,
    pub samples: usize,
    pub seed: u64,
    pub unchanged: Vec<f64>,
    pub mutated: Vec<f64>,
    pub mean_unchanged: f64,
    pub mean_mutated: f64,
    /// Fraction of samples with `mutated < unchanged`, strictly.
    pub fraction_mutated_less: f64,
}

impl Lambda2Comparison {
    /// CSV form: `sample,lambda2_static_product,lambda2_mutated_product` rows.
    pub fn to_csv_string(&self) -> String {
        let mut out = String::from("sample,lambda2_static_product,lambda2_mutated_product\n");
        for (i, (a, b)) in self.unchanged.iter().zip(&self.mutated).enumerate() {
            out.push_str(&format!("{i},{a:.16e},{b:.16e}\n"));
        }
        out
    }
}

/// Samples the effect of one topology mutation on the two-step averaging
/// contraction (second eigenvalue of the product of consecutive matrices).
pub fn lambda2_product_comparison(
    n: usize,
    r: f64,
    samples: usize,
    seed: u64,
) -> Result<Lambda2Comparison, MonteCarloError> {
    require(n >= 2, format!("n = {n} must be at least 2"))?;
    require(samples >= 2, format!("samples = {samples} must be at least 2"))?;
    let m = (r * (n * (n - 1) / 2) as f64).round() as usize;
    require(
        m + 1 >= n,
        format!("r = {r} gives {m} edges, below the {} needed for connectivity", n - 1),
    )?;
    let probs = MutationProbs::new(0.0, 0.5, 0.5)?;
    let pairs: Vec<(f64, f64)> = (0..samples as u64)
        .into_par_iter()
        .map(|i| {
            let mut rng = replica_rng(seed, i);
            let g = generate_connected_graph(n, r, &mut rng).expect("feasible ratio");
            let w = build_mixing_matrix(&g).expect("connected");
            // W*W is a square of a symmetric matrix, so its second eigenvalue
            // is exactly the square of W's (cheap symmetric solve).
            let l2 = second_eigenvalue(&w);
            let a = l2 * l2;
            let (w1, _, _) =
                mutate_topology_weighted(&w, &g, &probs, &mut rng).expect("valid probs");
            let b = second_eigenvalue_of_product(&w, &w1);
            (a, b)
        })
        .collect();
    let unchanged: Vec<f64> = pairs.iter().map(|p| p.0).collect();
    let mutated: Vec<f64> = pairs.iter().map(|p| p.1).collect();
    let less = pairs.iter().filter(|(a, b)| b < a).count();
    Ok(Lambda2Comparison {
        n,
        r,
        samples,
        seed,
        mean_unchanged: mean(&unchanged),
        mean_mutated: mean(&mutated),
        fraction_mutated_less: less as f64 / samples as f64,
        unchanged,
        mutated,
    })
}

/// Mean convergence iterations of dynamic-topology runs versus connectivity
/// ratio, one series per mutation-probability triple plus a static baseline.
/// Each (r, replica) pair shares its graph and initial frequencies across all
/// series so the comparison is paired rather than fully independent.
pub fn dynamic_convergence_sweep(
    n: usize,
    rs: &[f64],
    p_triples: &[MutationProbs],
    sims: usize,
    cfg: &ConsensusConfig,
    carrier_hz: f64,
    seed: u64,
) -> Result<Vec<SweepResult>, MonteCarloError> {
    cfg.validate()?;
    require(n >= 2, format!("n = {n} must be at least 2"))?;
    require(sims >= 1, "sims must be at least 1")?;
    require(carrier_hz > 0.0, "carrier must be positive")?;
    require_increasing(rs, "rs")?;
    let n_series = 1 + p_triples.len();
    // counts[series][r_idx] collects uncensored iteration counts.
    let mut counts: Vec<Vec<Vec<f64>>> = vec![vec![Vec::new(); rs.len()]; n_series];
    let mut censored: Vec<Vec<usize>> = vec![vec![0; rs.len()]; n_series];
    for (ri, &r) in rs.iter().enumerate() {
        let r_eff = clamp_ratio(n, r);
        let replicas: Vec<Vec<Option<usize>>> = (0..sims as u64)
            .into_par_iter()
            .map(|s| {
                let stream = |series: u64| ((ri as u64) << 48) | (series << 40) | s;
                let mut rng = replica_rng(seed, stream(0));
                let g = generate_connected_graph(n, r_eff, &mut rng).expect("feasible ratio");
                let w = build_mixing_matrix(&g).expect("connected");
                let f0 = init_frequencies(n, carrier_hz, cfg.sigma_ppm, &mut rng);
                let mut row =
                    vec![run_static(&w, &f0, cfg).expect("validated").converged_at];
                for (t, probs) in p_triples.iter().enumerate() {
                    let mut mrng = replica_rng(seed, stream(t as u64 + 1));
                    row.push(
                        run_dynamic_weighted(&w, &g, &f0, probs, cfg, &mut mrng)
                            .expect("validated")
                            .converged_at,
                    );
                }
                row
            })
            .collect();
        for row in &replicas {
            for (series, outcome) in row.iter().enumerate() {
                match outcome {
                    Some(k) => counts[series][ri].push(*k as f64),
                    None => censored[series][ri] += 1,
                }
            }
        }
    }
    let label = |series: usize| {
        if series == 0 {
            "static".to_string()
        } else {
            let p = &p_triples[series - 1];
            format!("p=({},{},{})", p.no_change(), p.add(), p.remove())
        }
    };
    (0..n_series)
        .map(|series| {
            let points = rs
                .iter()
                .enumerate()
                .map(|(ri, &r)| {
                    let kept = &counts[series][ri];
                    require(
                        !kept.is_empty(),
                        format!("all runs censored for series {} at r = {r}", label(series)),
                    )?;
                    Ok(SweepPoint {
                        axis: r,
                        mean: mean(kept),
                        std_dev: sample_std(kept),
                        count: kept.len(),
                        censored: censored[series][ri],
                    })
                })
                .collect::<Result<Vec<_>, MonteCarloError>>()?;
            Ok(SweepResult { label: label(series), axis_name: "r".into(), seed, points })
        })
        .collect()
}

/// One drift run and its derived series for a single network size.
#[derive(Debug, Clone, PartialEq)]
pub struct DriftRun {
    pub n: usize,
    pub r_requested: f64,
    pub r_effective: f64,
    pub trajectory: Trajectory,
}

impl DriftRun {
    pub fn phase_std_deg(&self) -> &[f64] {
        &self.trajectory.phase_std_deg
    }

    pub fn coherent_gain_series(&self) -> Vec<f64> {
        self.trajectory.coherent_gain_series()
    }
}

/// Runs the drift scenario once per network size at a shared connectivity
/// ratio (floored to keep small sizes connected), recording full phase and
/// gain series.
pub fn drift_experiment(
    n_list: &[usize],
    r_min: f64,
    drift: &DriftConfig,
    cfg: &ConsensusConfig,
    carrier_hz: f64,
    seed: u64,
) -> Result<Vec<DriftRun>, MonteCarloError> {
    cfg.validate()?;
    drift.validate()?;
    require(!n_list.is_empty(), "n_list must be nonempty")?;
    require(n_list.iter().all(|&n| n >= 2), "every n must be at least 2")?;
    require(carrier_hz > 0.0, "carrier must be positive")?;
    n_list
        .par_iter()
        .enumerate()
        .map(|(i, &n)| {
            let r_eff = clamp_ratio(n, r_min);
            let mut rng = replica_rng(seed, i as u64);
            let g = generate_connected_graph(n, r_eff, &mut rng)?;
            let w = build_mixing_matrix(&g)?;
            let f0 = init_frequencies(n, carrier_hz, cfg.sigma_ppm, &mut rng);
            let trajectory = run_with_drift(&w, &f0, drift, cfg, &mut rng)?;
            Ok(DriftRun {
                n,
                r_requested: r_min,
                r_effective: g.connectivity_ratio(),
                trajectory,
            })
        })
        .collect()
}

/// Mean coherent gain over the tail (second half) of a drift run, the
/// steady-state figure of merit once phases have clustered.
pub fn steady_state_gain(run: &DriftRun) -> f64 {
    let gains = run.coherent_gain_series();
    let tail = &gains[gains.len() / 2..];
    mean(tail)
}
