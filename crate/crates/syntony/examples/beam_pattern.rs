//! Radiation pattern of a sparse array with imperfect phase alignment.
//!
//! Places 20 elements on a half-wavelength grid inside a 10x10 wavelength
//! aperture, steers the beam to broadside, and compares the elevation cut
//! with perfect phases against one where each element carries an
//! independent 18-degree-sigma phase error — the alignment level the
//! consensus network delivers. The main beam survives (about half a dB of
//! loss); the error power goes into the sidelobe floor.
//!
//! ```bash
//! cargo run --release --example beam_pattern
//! ```

use rand_distr::{Distribution, StandardNormal};
use syntony::array_model::{
    generate_sparse_array, radiation_pattern_cut, steering_phases, Direction,
};
use syntony::rng::{master_rng, replica_rng};

fn main() {
    let (n, extent, step, seed) = (20, 10.0, 0.5, 3);
    let mut rng = master_rng(seed);
    let geom = generate_sparse_array(n, extent, step, &mut rng).expect("grid holds 20 elements");
    let steering = steering_phases(&geom, Direction::broadside());

    let mut erng = replica_rng(seed, 1);
    let sigma = 18f64.to_radians();
    let errors: Vec<f64> = (0..n)
        .map(|_| sigma * <StandardNormal as Distribution<f64>>::sample(&StandardNormal, &mut erng))
        .collect();

    let ideal = radiation_pattern_cut(&geom, &steering, &vec![0.0; n], 0.0, 181)
        .expect("valid cut");
    let degraded = radiation_pattern_cut(&geom, &steering, &errors, 0.0, 181).expect("valid cut");

    println!("elevation cut through azimuth 0, {n} elements in {extent}x{extent} wavelengths\n");
    println!("  theta (deg)    ideal (dB)    18-deg errors (dB)");
    for k in (0..181).step_by(15) {
        println!(
            "  {:>11.0}    {:>10.2}    {:>18.2}",
            ideal.theta_deg[k], ideal.value_db[k], degraded.value_db[k]
        );
    }

    let peak = |cut: &syntony::array_model::PatternCut| {
        cut.value_db.iter().cloned().fold(f64::NEG_INFINITY, f64::max)
    };
    println!("\n  broadside peak: ideal {:.3} dB, with errors {:.3} dB", peak(&ideal), peak(&degraded));
    println!("  -> 18-degree phase errors cost a fraction of a dB at the peak (about");
    println!("     half a dB on average over error draws) and mostly fill in the nulls");
}
