//! Drawing a random sparse aperture.
//!
//! Picks 20 distinct element positions on a half-wavelength grid inside a
//! 10x10 wavelength aperture and sketches the layout. Sparse random
//! placement keeps element spacing irregular, which trades grating lobes
//! for a diffuse sidelobe floor — the geometry every other array example
//! builds on.
//!
//! ```bash
//! cargo run --release --example array_layout
//! ```

use syntony::array_model::generate_sparse_array;
use syntony::rng::master_rng;

fn main() {
    let (n, extent, step, seed) = (20, 10.0, 0.5, 3);
    let mut rng = master_rng(seed);
    let geom = generate_sparse_array(n, extent, step, &mut rng).expect("grid holds 20 elements");

    let cells = (extent / step) as usize + 1;
    let mut grid = vec![vec!['.'; cells]; cells];
    for &(x, y) in geom.positions() {
        grid[(y / step) as usize][(x / step) as usize] = 'o';
    }

    println!("{n} elements on a {cells}x{cells} half-wavelength grid ({extent}x{extent} wavelengths)\n");
    // y grows upward, so print rows top-down.
    for row in grid.iter().rev() {
        println!("  {}", row.iter().collect::<String>());
    }
    println!("\nelement coordinates (wavelengths):");
    for &(x, y) in geom.positions() {
        println!("  ({x:>4.1}, {y:>4.1})");
    }
}
