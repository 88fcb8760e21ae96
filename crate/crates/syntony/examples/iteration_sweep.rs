//! Convergence cost versus network size and connectivity.
//!
//! How many averaging iterations does alignment take? Denser networks mix
//! faster (smaller second eigenvalue), and at fixed connectivity ratio,
//! larger networks converge in fewer iterations because each node averages
//! over more neighbors. This example sweeps both axes with 100 replicas per
//! cell and prints the mean iteration count.
//!
//! ```bash
//! cargo run --release --example iteration_sweep
//! ```

use syntony::consensus::ConsensusConfig;
use syntony::montecarlo::convergence_iterations_sweep;

fn main() {
    let sizes = [20usize, 60, 100];
    let ratios = [0.1, 0.3, 0.5, 0.9];
    let (sims, seed) = (100, 17);
    let cfg = ConsensusConfig::default();

    let series = convergence_iterations_sweep(&sizes, &ratios, sims, &cfg, 1e9, seed)
        .expect("valid sweep");

    println!("mean iterations to align within {} Hz, {sims} replicas per cell\n", cfg.epsilon_hz);
    print!("        ");
    for r in ratios {
        print!("  {:>7}", format!("r={r}"));
    }
    println!();
    for (s, &n) in series.iter().zip(&sizes) {
        print!("  n={n:<4}");
        for point in &s.points {
            print!("  {:>7.1}", point.mean);
        }
        println!();
    }
    println!("\nReading along a row: more links, faster mixing. Reading down a column:");
    println!("at the same link ratio, bigger networks need fewer iterations.");
}
