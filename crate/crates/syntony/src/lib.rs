//! Simulation library for decentralized frequency alignment (syntonization)
//! in open-loop coherent distributed antenna arrays.
//!
//! Distributed arrays only beamform coherently if every element sits on the
//! same frequency. This crate models a network of free-running oscillators
//! that align themselves by gossiping with neighbors: each node repeatedly
//! averages its frequency estimate with its neighbors' through a Metropolis
//! mixing matrix, driving the whole network to the common mean without any
//! reference node or central controller. On top of the consensus core sit an
//! antenna-array model that converts residual frequency error into phase
//! error and coherent-gain loss, and Monte Carlo drivers that reproduce the
//! headline experiments: convergence speed versus network size and
//! connectivity, behavior under topology churn and oscillator drift, and the
//! probability that a partially aligned array still beamforms.
//!
//! # Modules
//!
//! - [`topology`]: random connected graphs at a prescribed connectivity
//!   ratio, Metropolis mixing matrices, spectral convergence factors, and
//!   random edge add/remove mutations that keep the network connected.
//! - [`consensus`]: oscillator initialization, the averaging iteration, and
//!   full trajectory runs on static, mutating, and drifting networks.
//! - [`array_model`]: sparse planar arrays on a half-wavelength grid,
//!   steering, radiation patterns, and coherent gain under phase errors.
//! - [`montecarlo`]: seeded, parallel replica sweeps over the above.
//! - [`experiment`]: config-file/flag-driven experiment runner backing the
//!   `syntony` binary; writes CSV results plus a JSON sidecar that
//!   regenerates them byte for byte.
//! - [`rng`]: the deterministic RNG scheme (one master seed, one
//!   independent stream per replica).
//!
//! # Examples
//!
//! Each major capability has a runnable example under `examples/`:
//!
//! - `static_consensus`: one averaging run on a fixed random topology.
//! - `dynamic_topology`: consensus while edges appear and disappear.
//! - `oscillator_drift`: alignment against per-iteration oscillator noise.
//! - `gain_probability`: chance that phase errors keep coherent gain high.
//! - `rms_vs_size`: residual frequency error shrinking with network size.
//! - `iteration_sweep`: convergence cost versus size and connectivity.
//! - `lambda2_comparison`: spectral effect of a single random mutation.
//! - `beam_pattern`: radiation pattern of a sparse array with phase errors.
//! - `array_layout`: drawing a random sparse aperture.
//!
//! Run one with `cargo run --release --example static_consensus`.
//!
//! # Determinism
//!
//! Every randomized entry point takes either a caller-provided RNG or a
//! `u64` master seed. Monte Carlo ops derive one independent counter-based
//! stream per replica from the master seed, so results are bit-identical
//! across runs and across thread schedules, and any single replica can be
//! reproduced in isolation.

pub mod array_model;
pub mod consensus;
pub mod experiment;
pub mod montecarlo;
pub mod rng;
mod stats;
pub mod topology;

pub use array_model::{coherent_gain, generate_sparse_array, ArrayGeometry, Direction};
pub use consensus::{
    init_frequencies, run_dynamic, run_static, run_with_drift, ConsensusConfig, DriftConfig,
    FrequencyState, Trajectory,
};
pub use experiment::{run_experiment, validate_config, ExperimentConfig, ExperimentKind};
pub use rng::{master_rng, replica_rng, SimRng};
pub use topology::{
    build_mixing_matrix, generate_connected_graph, second_eigenvalue, MixingMatrix, NetworkGraph,
};
