//! Experiment runner for decentralized frequency-alignment simulations.
//!
//! Each subcommand selects an experiment, builds its configuration from
//! per-kind defaults, an optional config file, and command-line flags (later
//! sources win), runs it, and writes the result CSVs plus a `config.json`
//! sidecar into the output directory. Re-running a subcommand with the
//! sidecar as `--config` and the same seed regenerates every file
//! byte for byte.

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use syntony::experiment::{
    parse_kv_overrides, parse_p_triples, run_experiment, ConfigOverrides, ExperimentConfig,
    ExperimentError, ExperimentKind,
};

#[derive(Parser)]
#[command(
    name = "syntony",
    about = "Simulation experiments for decentralized frequency alignment in distributed antenna arrays",
    version
)]
struct Cli {
    #[command(subcommand)]
    cmd: Cmd,
}

#[derive(Subcommand)]
enum Cmd {
    /// Run average consensus once on a fixed random topology and record the trajectory.
    #[command(name = "static")]
    Static(Flags),
    /// Run consensus while the topology mutates between iterations (single run or sweep when --sims > 1).
    Dynamic(Flags),
    /// Run consensus under per-iteration oscillator drift for each network size.
    Drift(Flags),
    /// Estimate the probability that random phase errors keep coherent gain above a threshold.
    ProbGain(Flags),
    /// Sweep network size and measure the residual frequency error after convergence.
    RmsSweep(Flags),
    /// Sweep network size and connectivity and measure iterations to convergence.
    IterSweep(Flags),
    /// Compare convergence rates of an unchanged topology against a randomly mutated one.
    Lambda2(Flags),
    /// Compute the radiation pattern of a sparse array with random phase errors.
    Pattern(Flags),
    /// Draw a sparse array layout and write the element coordinates.
    Layout(Flags),
}

impl Cmd {
    fn kind(&self) -> ExperimentKind {
        match self {
            Self::Static(_) => ExperimentKind::Static,
            Self::Dynamic(_) => ExperimentKind::Dynamic,
            Self::Drift(_) => ExperimentKind::Drift,
            Self::ProbGain(_) => ExperimentKind::ProbGain,
            Self::RmsSweep(_) => ExperimentKind::RmsSweep,
            Self::IterSweep(_) => ExperimentKind::IterSweep,
            Self::Lambda2(_) => ExperimentKind::Lambda2,
            Self::Pattern(_) => ExperimentKind::Pattern,
            Self::Layout(_) => ExperimentKind::Layout,
        }
    }

    fn flags(&self) -> &Flags {
        match self {
            Self::Static(f)
            | Self::Dynamic(f)
            | Self::Drift(f)
            | Self::ProbGain(f)
            | Self::RmsSweep(f)
            | Self::IterSweep(f)
            | Self::Lambda2(f)
            | Self::Pattern(f)
            | Self::Layout(f) => f,
        }
    }
}

#[derive(Args)]
struct Flags {
    /// Config file: flat key = value lines, or a config.json sidecar.
    #[arg(long, value_name = "PATH")]
    config: Option<PathBuf>,
    /// Network size or element count.
    #[arg(long)]
    n: Option<usize>,
    /// Comma-separated sizes for sweeps (rms-sweep, iter-sweep, drift).
    #[arg(long, value_name = "N,N,...", value_delimiter = ',')]
    ns: Option<Vec<usize>>,
    /// Connectivity ratio in (0, 1].
    #[arg(long)]
    r: Option<f64>,
    /// Comma-separated connectivity ratios for sweeps.
    #[arg(long, value_name = "R,R,...", value_delimiter = ',')]
    rs: Option<Vec<f64>>,
    /// Carrier frequency in Hz.
    #[arg(long)]
    fc: Option<f64>,
    /// Initial frequency-offset spread in parts per million of the carrier.
    #[arg(long)]
    sigma_ppm: Option<f64>,
    /// Convergence threshold on the max offset deviation, in Hz.
    #[arg(long)]
    epsilon: Option<f64>,
    /// Iteration budget per run.
    #[arg(long)]
    max_iter: Option<usize>,
    /// Probability that the topology stays unchanged in one iteration.
    #[arg(long)]
    p1: Option<f64>,
    /// Semicolon-separated (no-change, add, remove) triples, e.g. "0.9,0.05,0.05;0,0.5,0.5".
    #[arg(long, value_name = "TRIPLES")]
    p_triples: Option<String>,
    /// Allan deviation of the oscillators at the iteration interval.
    #[arg(long)]
    adev: Option<f64>,
    /// Iteration interval in seconds.
    #[arg(long)]
    interval: Option<f64>,
    /// Phase-alignment threshold in degrees for drift runs.
    #[arg(long)]
    threshold_deg: Option<f64>,
    /// Monte Carlo trials for prob-gain.
    #[arg(long)]
    trials: Option<usize>,
    /// Replicas per sweep point (or lambda2 samples); 1 keeps dynamic a single run.
    #[arg(long)]
    sims: Option<usize>,
    /// Phase-error standard deviation in degrees (pattern; single-point prob-gain axis).
    #[arg(long)]
    sigma_deg: Option<f64>,
    /// Comma-separated phase-error standard deviations for the prob-gain axis.
    #[arg(long, value_name = "DEG,DEG,...", value_delimiter = ',')]
    sigma_deg_list: Option<Vec<f64>>,
    /// Coherent-gain threshold for prob-gain.
    #[arg(long)]
    x: Option<f64>,
    /// Aperture extent per axis in wavelengths.
    #[arg(long)]
    extent: Option<f64>,
    /// Grid step in wavelengths.
    #[arg(long)]
    step: Option<f64>,
    /// Pattern output: "cut" (elevation cut) or "uv" (full direction-cosine map).
    #[arg(long, value_name = "cut|uv")]
    pattern: Option<String>,
    /// Points per pattern axis.
    #[arg(long)]
    points: Option<usize>,
    /// Steering elevation angle in degrees.
    #[arg(long)]
    theta: Option<f64>,
    /// Steering azimuth angle in degrees.
    #[arg(long)]
    phi: Option<f64>,
    /// Master seed; fixes every random draw in the experiment.
    #[arg(long)]
    seed: Option<u64>,
    /// Output directory (created if missing).
    #[arg(long, value_name = "DIR")]
    out: Option<PathBuf>,
}

impl Flags {
    fn to_overrides(&self, kind: ExperimentKind) -> Result<ConfigOverrides, ExperimentError> {
        let mut ov = ConfigOverrides {
            n: self.n,
            n_list: self.ns.clone(),
            r: self.r,
            r_list: self.rs.clone(),
            carrier_hz: self.fc,
            sigma_ppm: self.sigma_ppm,
            epsilon_hz: self.epsilon,
            max_iterations: self.max_iter,
            p1: self.p1,
            adev: self.adev,
            interval_t_s: self.interval,
            phase_threshold_deg: self.threshold_deg,
            trials: self.trials,
            sims: self.sims,
            sigma_deg_list: self.sigma_deg_list.clone(),
            sigma_deg: self.sigma_deg,
            gain_threshold: self.x,
            extent_wl: self.extent,
            grid_step_wl: self.step,
            pattern_points: self.points,
            steer_theta_deg: self.theta,
            steer_phi_deg: self.phi,
            seed: self.seed,
            out_dir: self.out.clone(),
            ..ConfigOverrides::default()
        };
        if let Some(text) = &self.p_triples {
            ov.p_triples = Some(parse_p_triples("p-triples", text)?);
        }
        if let Some(text) = &self.pattern {
            ov.pattern_kind = Some(text.parse().map_err(ExperimentError::Parse)?);
        }
        // A bare --sigma-deg on prob-gain narrows the sweep axis to that one
        // value; an explicit --sigma-deg-list wins.
        if kind == ExperimentKind::ProbGain && ov.sigma_deg_list.is_none() {
            if let Some(v) = self.sigma_deg {
                ov.sigma_deg_list = Some(vec![v]);
            }
        }
        Ok(ov)
    }
}

fn build_config(cmd: &Cmd) -> Result<ExperimentConfig, ExperimentError> {
    let kind = cmd.kind();
    let flags = cmd.flags();
    let mut cfg = ExperimentConfig::default_for(kind);
    if let Some(path) = &flags.config {
        let text = std::fs::read_to_string(path)
            .map_err(|e| ExperimentError::Io(format!("{}: {e}", path.display())))?;
        if text.trim_start().starts_with('{') {
            cfg = ExperimentConfig::from_json(&text)?;
            // The subcommand names the experiment; a sidecar for a different
            // kind only contributes its parameters.
            cfg.experiment = kind;
        } else {
            parse_kv_overrides(&text)?.apply(&mut cfg);
        }
    }
    flags.to_overrides(kind)?.apply(&mut cfg);
    Ok(cfg)
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let cfg = match build_config(&cli.cmd) {
        Ok(cfg) => cfg,
        Err(e) => {
            eprintln!("error: {e}");
            return ExitCode::FAILURE;
        }
    };
    match run_experiment(&cfg) {
        Ok(outcome) => {
            println!("{}", outcome.summary);
            for f in &outcome.files {
                println!("wrote {}", f.display());
            }
            ExitCode::SUCCESS
        }
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::FAILURE
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use syntony::experiment::PatternKind;

    #[test]
    fn every_subcommand_parses_with_shared_flags() {
        for sub in [
            "static", "dynamic", "drift", "prob-gain", "rms-sweep", "iter-sweep", "lambda2",
            "pattern", "layout",
        ] {
            let cli = Cli::try_parse_from(["syntony", sub, "--n", "10", "--seed", "3"])
                .unwrap_or_else(|e| panic!("{sub}: {e}"));
            let cfg = build_config(&cli.cmd).unwrap();
            assert_eq!(cfg.n, 10);
            assert_eq!(cfg.seed, 3);
        }
    }

    #[test]
    fn flags_override_defaults_and_kind_follows_subcommand() {
        let cli = Cli::try_parse_from([
            "syntony", "dynamic", "--p1", "0.7", "--r", "0.05", "--sims", "1",
        ])
        .unwrap();
        let cfg = build_config(&cli.cmd).unwrap();
        assert_eq!(cfg.experiment, ExperimentKind::Dynamic);
        assert_eq!(cfg.p1, 0.7);
        assert_eq!(cfg.r, 0.05);
    }

    #[test]
    fn list_flags_split_on_commas() {
        let cli = Cli::try_parse_from([
            "syntony",
            "iter-sweep",
            "--ns",
            "20,60",
            "--rs",
            "0.1,0.9",
            "--sims",
            "5",
        ])
        .unwrap();
        let cfg = build_config(&cli.cmd).unwrap();
        assert_eq!(cfg.n_list, vec![20, 60]);
        assert_eq!(cfg.r_list, vec![0.1, 0.9]);
    }

    #[test]
    fn sigma_deg_narrows_prob_gain_axis() {
        let cli =
            Cli::try_parse_from(["syntony", "prob-gain", "--sigma-deg", "18"]).unwrap();
        let cfg = build_config(&cli.cmd).unwrap();
        assert_eq!(cfg.sigma_deg_list, vec![18.0]);
    }

    #[test]
    fn pattern_kind_flag_parses() {
        let cli = Cli::try_parse_from(["syntony", "pattern", "--pattern", "uv"]).unwrap();
        let cfg = build_config(&cli.cmd).unwrap();
        assert_eq!(cfg.pattern_kind, PatternKind::Uv);
        assert!(Cli::try_parse_from(["syntony", "pattern", "--pattern", "bogus"])
            .map(|cli| build_config(&cli.cmd))
            .unwrap()
            .is_err());
    }
}
