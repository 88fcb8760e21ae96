//! Sparse planar array geometries, far-field patterns, and coherent gain.
//!
//! Elements live on a half-wavelength grid inside a square aperture and are
//! modeled as isotropic radiators with uniform amplitude, so the far field
//! reduces to the array factor. Directions are expressed as direction cosines
//! `(u, v) = (sin θ cos φ, sin θ sin φ)`; positions are in wavelengths, which
//! removes the carrier frequency from every formula.
//!
//! The link between the frequency-alignment side of the library and this
//! module is `phase_from_freq_error`: a residual frequency error `Δf` held for
//! an update interval `T` advances the element phase by `2π·Δf·T`. Those phase
//! errors then feed `coherent_gain` and the pattern routines.

use std::fmt;

use rand::seq::index::sample;

use crate::rng::SimRng;

/// Per-element phases in radians.
pub type PhaseVector = Vec<f64>;

/// Linear amplitudes below this floor clamp to -300 dB instead of -inf.
const DB_FLOOR_LINEAR: f64 = 1e-15;

#[derive(Debug, Clone, PartialEq)]
pub enum ArrayError {
    /// More elements requested than grid points available.
    TooManyElements { requested: usize, available: usize },
    /// Gain of an empty phase vector is undefined.
    EmptyArray,
    /// Phase or amplitude vector length does not match the geometry.
    DimensionMismatch { expected: usize, got: usize },
    /// Direction cosines outside the unit disk, or nonpositive grid step.
    InvalidParameter(String),
    /// Malformed geometry CSV.
    Parse(String),
}

impl fmt::Display for ArrayError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Self::TooManyElements { requested, available } => {
                write!(f, "{requested} elements requested but the grid has {available} points")
            }
            Self::EmptyArray => write!(f, "empty phase vector"),
            Self::DimensionMismatch { expected, got } => {
                write!(f, "expected length {expected}, got {got}")
            }
            Self::InvalidParameter(msg) => write!(f, "invalid parameter: {msg}"),
            Self::Parse(msg) => write!(f, "parse error: {msg}"),
        }
    }
}

impl std::error::Error for ArrayError {}

/// Far-field look direction as direction cosines.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Direction {
    pub u: f64,
    pub v: f64,
}

impl Direction {
    /// Normal to the array plane: `u = v = 0`.
    pub fn broadside() -> Self {
        Self { u: 0.0, v: 0.0 }
    }

    /// Validated constructor; requires `u^2 + v^2 <= 1` (visible region).
    pub fn from_uv(u: f64, v: f64) -> Result<Self, ArrayError> {
        if u * u + v * v > 1.0 + 1e-12 {
            return Err(ArrayError::InvalidParameter(format!(
                "(u, v) = ({u}, {v}) outside the unit disk"
            )));
        }
        Ok(Self { u, v })
    }

    /// Spherical angles in degrees: `u = sin θ cos φ`, `v = sin θ sin φ`.
    pub fn from_theta_phi(theta_deg: f64, phi_deg: f64) -> Self {
        let theta = theta_deg.to_radians();
        let phi = phi_deg.to_radians();
        Self { u: theta.sin() * phi.cos(), v: theta.sin() * phi.sin() }
    }
}

/// Planar element layout: distinct points on a `grid_step`-spaced grid inside
/// `[0, extent] x [0, extent]`, coordinates in wavelengths.
#[derive(Debug, Clone, PartialEq)]
pub struct ArrayGeometry {
    positions: Vec<(f64, f64)>,
    grid_step: f64,
    extent: f64,
}

impl ArrayGeometry {
    pub fn n(&self) -> usize {
        self.positions.len()
    }

    pub fn positions(&self) -> &[(f64, f64)] {
        &self.positions
    }

    pub fn grid_step(&self) -> f64 {
        self.grid_step
    }

    pub fn extent(&self) -> f64 {
        self.extent
    }

    /// CSV form: one `x_wavelengths,y_wavelengths` row per element.
    pub fn to_csv_string(&self) -> String {
        let mut out = String::from("x_wavelengths,y_wavelengths\n");
        for &(x, y) in &self.positions {
            out.push_str(&format!("{x},{y}\n"));
        }
        out
    }

    /// Parses the CSV form written by [`to_csv_string`]. Grid step and extent
    /// are recovered from the coordinates themselves.
    ///
    /// [`to_csv_string`]: ArrayGeometry::to_csv_string
    pub fn parse_csv(text: &str) -> Result<Self, ArrayError> {
        let mut positions = Vec::new();
        for (idx, line) in text.lines().enumerate() {
            let line = line.trim();
            if line.is_empty() || (idx == 0 && line.starts_with('x')) {
                continue;
            }
            let mut it = line.split(',');
            let x: f64 = it
                .next()
                .and_then(|t| t.trim().parse().ok())
                .ok_or_else(|| ArrayError::Parse(format!("bad row: {line:?}")))?;
            let y: f64 = it
                .next()
                .and_then(|t| t.trim().parse().ok())
                .ok_or_else(|| ArrayError::Parse(format!("bad row: {line:?}")))?;
            positions.push((x, y));
        }
        if positions.is_empty() {
            return Err(ArrayError::Parse("no positions".into()));
        }
        let extent = positions
            .iter()
            .flat_map(|&(x, y)| [x, y])
            .fold(0.0f64, f64::max);
        let grid_step = positions
            .iter()
            .flat_map(|&(x, y)| [x, y])
            .filter(|&c| c > 0.0)
            .fold(f64::INFINITY, f64::min);
        let grid_step = if grid_step.is_finite() { grid_step } else { 0.5 };
        Ok(Self { positions, grid_step, extent })
    }
}

/// Samples `n` distinct grid points uniformly without replacement from the
/// `(extent/grid_step + 1)^2` candidates. Positions are returned sorted so a
/// geometry has one canonical representation.
pub fn generate_sparse_array(
    n: usize,
    extent_wl: f64,
    grid_step_wl: f64,
    rng: &mut SimRng,
) -> Result<ArrayGeometry, ArrayError> {
    if !(grid_step_wl > 0.0) {
        return Err(ArrayError::InvalidParameter(format!(
            "grid step {grid_step_wl} must be positive"
        )));
    }
    if extent_wl < 0.0 {
        return Err(ArrayError::InvalidParameter(format!(
            "extent {extent_wl} must be nonnegative"
        )));
    }
    if n == 0 {
        return Err(ArrayError::EmptyArray);
    }
    let per_axis = (extent_wl / grid_step_wl + 1e-9).floor() as usize + 1;
    let available = per_axis * per_axis;
    if n > available {
        return Err(ArrayError::TooManyElements { requested: n, available });
    }
    let mut positions: Vec<(f64, f64)> = sample(rng, available, n)
        .iter()
        .map(|idx| {
            let ix = idx / per_axis;
            let iy = idx % per_axis;
            (ix as f64 * grid_step_wl, iy as f64 * grid_step_wl)
        })
        .collect();
    positions.sort_by(|a, b| a.partial_cmp(b).unwrap());
    Ok(ArrayGeometry { positions, grid_step: grid_step_wl, extent: extent_wl })
}

/// Steering phases that point the main beam at `dir`:
/// `phi_n = -2 pi (x_n u + y_n v)`, zero at broadside.
pub fn steering_phases(geom: &ArrayGeometry, dir: Direction) -> PhaseVector {
    geom.positions
        .iter()
        .map(|&(x, y)| -2.0 * std::f64::consts::PI * (x * dir.u + y * dir.v))
        .collect()
}

/// Phase advance accumulated by a frequency error `delta_f` over interval `t`:
/// `2 pi delta_f t` radians.
pub fn phase_from_freq_error(delta_f_hz: f64, t_s: f64) -> f64 {
    2.0 * std::f64::consts::PI * delta_f_hz * t_s
}

/// Normalized linear array factor in direction `dir`:
/// `|sum_n a_n exp(j [2 pi (x_n u + y_n v) + steering_n + errors_n])| / sum_n a_n`.
///
/// `amplitudes: None` means uniform unit amplitudes, giving `/N`; the
/// error-free steered peak is then exactly 1.
pub fn array_factor_linear(
    geom: &ArrayGeometry,
    dir: Direction,
    steering: &[f64],
    errors: &[f64],
    amplitudes: Option<&[f64]>,
) -> Result<f64, ArrayError> {
    let n = geom.n();
    for len in [steering.len(), errors.len()] {
        if len != n {
            return Err(ArrayError::DimensionMismatch { expected: n, got: len });
        }
    }
    if let Some(a) = amplitudes {
        if a.len() != n {
            return Err(ArrayError::DimensionMismatch { expected: n, got: a.len() });
        }
    }
    let mut re = 0.0;
    let mut im = 0.0;
    let mut norm = 0.0;
    for (idx, &(x, y)) in geom.positions.iter().enumerate() {
        let amp = amplitudes.map_or(1.0, |a| a[idx]);
        let phase =
            2.0 * std::f64::consts::PI * (x * dir.u + y * dir.v) + steering[idx] + errors[idx];
        re += amp * phase.cos();
        im += amp * phase.sin();
        norm += amp;
    }
    Ok((re * re + im * im).sqrt() / norm)
}

/// Coherent gain of a phase-error vector: `|sum_n exp(j phi_n)|^2 / N^2`.
///
/// Equals 1 exactly when all phases are equal and degrades toward 0 as the
/// phases decohere; invariant under a common phase shift.
pub fn coherent_gain(errors: &[f64]) -> Result<f64, ArrayError> {
    if errors.is_empty() {
        return Err(ArrayError::EmptyArray);
    }
    let n = errors.len() as f64;
    let (mut re, mut im) = (0.0, 0.0);
    for &p in errors {
        re += p.cos();
        im += p.sin();
    }
    Ok((re * re + im * im) / (n * n))
}

fn to_db(linear: f64) -> f64 {
    20.0 * linear.max(DB_FLOOR_LINEAR).log10()
}

/// Principal-plane pattern cut at azimuth `plane_phi_deg`, sampled over
/// elevation `theta in [-90, 90]` degrees.
#[derive(Debug, Clone, PartialEq)]
pub struct PatternCut {
    pub plane_phi_deg: f64,
    pub theta_deg: Vec<f64>,
    pub value_db: Vec<f64>,
}

impl PatternCut {
    /// CSV form: `theta_deg,value_db` rows.
    pub fn to_csv_string(&self) -> String {
        let mut out = String::from("theta_deg,value_db\n");
        for (t, v) in self.theta_deg.iter().zip(&self.value_db) {
            out.push_str(&format!("{t},{v:.6}\n"));
        }
        out
    }
}

/// Two-dimensional pattern over a square `(u, v)` grid on `[-1, 1]^2`.
/// `value_db[iv][iu]` corresponds to `(u[iu], v[iv])`. Points outside the
/// visible region `u^2 + v^2 <= 1` are evaluated anyway for plotting ease.
#[derive(Debug, Clone, PartialEq)]
pub struct PatternGrid {
    pub u: Vec<f64>,
    pub v: Vec<f64>,
    pub value_db: Vec<Vec<f64>>,
}

impl PatternGrid {
    /// CSV form: `u,v,value_db` rows, v-major.
    pub fn to_csv_string(&self) -> String {
        let mut out = String::from("u,v,value_db\n");
        for (iv, vv) in self.v.iter().enumerate() {
            for (iu, uu) in self.u.iter().enumerate() {
                out.push_str(&format!("{uu},{vv},{:.6}\n", self.value_db[iv][iu]));
            }
        }
        out
    }
}

/// Pattern cut in dB, normalized so the error-free steered peak sits at 0 dB
/// (the `/N` normalization of `array_factor_linear`). `n_points` spans
/// [-90, 90] degrees inclusive; 181 gives a one-degree grid.
pub fn radiation_pattern_cut(
    geom: &ArrayGeometry,
    steering: &[f64],
    errors: &[f64],
    plane_phi_deg: f64,
    n_points: usize,
) -> Result<PatternCut, ArrayError> {
    if n_points < 2 {
        return Err(ArrayError::InvalidParameter("need at least 2 pattern points".into()));
    }
    let mut theta_deg = Vec::with_capacity(n_points);
    let mut value_db = Vec::with_capacity(n_points);
    for k in 0..n_points {
        let theta = -90.0 + 180.0 * k as f64 / (n_points - 1) as f64;
        let dir = Direction::from_theta_phi(theta, plane_phi_deg);
        let lin = array_factor_linear(geom, dir, steering, errors, None)?;
        theta_deg.push(theta);
        value_db.push(to_db(lin));
    }
    Ok(PatternCut { plane_phi_deg, theta_deg, value_db })
}

/// Full `(u, v)` map in dB with the same normalization as the cut; the grid is
/// `n_per_axis` x `n_per_axis` over `[-1, 1]^2`.
pub fn radiation_pattern_uv(
    geom: &ArrayGeometry,
    steering: &[f64],
    errors: &[f64],
    n_per_axis: usize,
) -> Result<PatternGrid, ArrayError> {
    if n_per_axis < 2 {
        return Err(ArrayError::InvalidParameter("need at least 2 pattern points".into()));
    }
    let axis: Vec<f64> = (0..n_per_axis)
        .map(|k| -1.0 + 2.0 * k as f64 / (n_per_axis - 1) as f64)
        .collect();
    let mut value_db = Vec::with_capacity(n_per_axis);
    for &vv in &axis {
        let mut row = Vec::with_capacity(n_per_axis);
        for &uu in &axis {
            let dir = Direction { u: uu, v: vv };
            row.push(to_db(array_factor_linear(geom, dir, steering, errors, None)?));
        }
        value_db.push(row);
    }
    Ok(PatternGrid { u: axis.clone(), v: axis, value_db })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::master_rng;
    use rand_distr::{Distribution, StandardNormal};

    fn grid_array(n: usize, seed: u64) -> ArrayGeometry {
        let mut rng = master_rng(seed);
        generate_sparse_array(n, 10.0, 0.5, &mut rng).unwrap()
    }

    #[test]
    fn sparse_array_respects_grid_and_distinctness() {
        for seed in 0..100 {
            let geom = grid_array(20, seed);
            assert_eq!(geom.n(), 20);
            let mut seen = std::collections::BTreeSet::new();
            for &(x, y) in geom.positions() {
                assert!((x / 0.5).fract() == 0.0 && (y / 0.5).fract() == 0.0);
                assert!((0.0..=10.0).contains(&x) && (0.0..=10.0).contains(&y));
                assert!(seen.insert((x.to_bits(), y.to_bits())), "duplicate at ({x}, {y})");
            }
        }
    }

    #[test]
    fn full_grid_sampling_is_exhaustive() {
        let geom = grid_array(441, 7);
        assert_eq!(geom.n(), 441);
        let mut expect = Vec::new();
        for ix in 0..21 {
            for iy in 0..21 {
                expect.push((ix as f64 * 0.5, iy as f64 * 0.5));
            }
        }
        expect.sort_by(|a, b| a.partial_cmp(b).unwrap());
        assert_eq!(geom.positions(), expect.as_slice());
    }

    #[test]
    fn oversubscribed_grid_rejected() {
        let mut rng = master_rng(0);
        assert!(matches!(
            generate_sparse_array(442, 10.0, 0.5, &mut rng),
            Err(ArrayError::TooManyElements { requested: 442, available: 441 })
        ));
    }

    #[test]
    fn steering_examples() {
        let geom = ArrayGeometry {
            positions: vec![(0.0, 0.0), (0.5, 0.0)],
            grid_step: 0.5,
            extent: 10.0,
        };
        let broad = steering_phases(&geom, Direction::broadside());
        assert_eq!(broad, vec![0.0, 0.0]);
        let end_fire = steering_phases(&geom, Direction::from_uv(1.0, 0.0).unwrap());
        assert_eq!(end_fire[0], 0.0);
        assert!((end_fire[1] + std::f64::consts::PI).abs() < 1e-15);
    }

    #[test]
    fn direction_constructors() {
        assert!(Direction::from_uv(0.9, 0.5).is_err());
        let d = Direction::from_theta_phi(90.0, 0.0);
        assert!((d.u - 1.0).abs() < 1e-15 && d.v.abs() < 1e-15);
        let b = Direction::from_theta_phi(0.0, 37.0);
        assert!(b.u.abs() < 1e-15 && b.v.abs() < 1e-15);
    }

    #[test]
    fn phase_from_freq_error_examples() {
        assert_eq!(phase_from_freq_error(0.0, 123.0), 0.0);
        let eighteen = phase_from_freq_error(0.05, 1.0);
        assert!((eighteen - 0.1 * std::f64::consts::PI).abs() < 1e-15);
        assert!((eighteen.to_degrees() - 18.0).abs() < 1e-12);
        assert!((phase_from_freq_error(1.0, 0.5) - std::f64::consts::PI).abs() < 1e-15);
        // Linearity in delta_f.
        let a = phase_from_freq_error(0.3, 2.0);
        let b = phase_from_freq_error(0.7, 2.0);
        assert_eq!(a + b, phase_from_freq_error(0.3 + 0.7, 2.0));
    }

    #[test]
    fn coherent_gain_examples() {
        assert_eq!(coherent_gain(&[]).unwrap_err(), ArrayError::EmptyArray);
        assert_eq!(coherent_gain(&[0.0; 8]).unwrap(), 1.0);
        let common = coherent_gain(&[1.234; 5]).unwrap();
        assert!((common - 1.0).abs() < 1e-12);
        let anti = coherent_gain(&[0.0, std::f64::consts::PI]).unwrap();
        assert!(anti < 1e-30);
        let quad = coherent_gain(&[
            0.0,
            std::f64::consts::FRAC_PI_2,
            std::f64::consts::PI,
            3.0 * std::f64::consts::FRAC_PI_2,
        ])
        .unwrap();
        assert!(quad < 1e-30);
    }

    #[test]
    fn coherent_gain_common_phase_invariance() {
        let mut rng = master_rng(21);
        for _ in 0..50 {
            let phases: Vec<f64> = (0..16)
                .map(|_| <StandardNormal as Distribution<f64>>::sample(&StandardNormal, &mut rng))
                .collect();
            let shift: f64 =
                <StandardNormal as Distribution<f64>>::sample(&StandardNormal, &mut rng);
            let shifted: Vec<f64> = phases.iter().map(|p| p + shift).collect();
            let g0 = coherent_gain(&phases).unwrap();
            let g1 = coherent_gain(&shifted).unwrap();
            assert!((g0 - g1).abs() < 1e-12);
            assert!((0.0..=1.0 + 1e-15).contains(&g0));
        }
    }

    #[test]
    fn pattern_peak_is_zero_db_at_broadside_without_errors() {
        let geom = grid_array(20, 3);
        let steer = steering_phases(&geom, Direction::broadside());
        let zeros = vec![0.0; 20];
        let cut = radiation_pattern_cut(&geom, &steer, &zeros, 0.0, 181).unwrap();
        let broadside_idx = 90;
        assert_eq!(cut.theta_deg[broadside_idx], 0.0);
        assert!(cut.value_db[broadside_idx].abs() < 1e-12);
        let peak = cut.value_db.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        assert!((peak - cut.value_db[broadside_idx]).abs() < 1e-12);
    }

    #[test]
    fn pattern_and_gain_agree_at_broadside() {
        let geom = grid_array(20, 4);
        let steer = steering_phases(&geom, Direction::broadside());
        let mut rng = master_rng(5);
        let errors: Vec<f64> = (0..20)
            .map(|_| {
                let x: f64 =
                    <StandardNormal as Distribution<f64>>::sample(&StandardNormal, &mut rng);
                x * 18f64.to_radians()
            })
            .collect();
        let lin =
            array_factor_linear(&geom, Direction::broadside(), &steer, &errors, None).unwrap();
        let gain = coherent_gain(&errors).unwrap();
        assert!((lin * lin - gain).abs() < 1e-12);
    }

    #[test]
    fn antiphase_pair_cancels_at_broadside() {
        let geom = ArrayGeometry {
            positions: vec![(0.0, 0.0), (0.5, 0.5)],
            grid_step: 0.5,
            extent: 10.0,
        };
        let steer = vec![0.0, 0.0];
        let errs = vec![0.0, std::f64::consts::PI];
        let cut = radiation_pattern_cut(&geom, &steer, &errs, 0.0, 181).unwrap();
        assert!(cut.value_db[90] < -100.0);
    }

    #[test]
    fn steered_pattern_peaks_at_steer_direction() {
        let geom = grid_array(30, 6);
        let target = Direction::from_theta_phi(30.0, 0.0);
        let steer = steering_phases(&geom, target);
        let zeros = vec![0.0; 30];
        let cut = radiation_pattern_cut(&geom, &steer, &zeros, 0.0, 181).unwrap();
        let (best_idx, _) = cut
            .value_db
            .iter()
            .enumerate()
            .max_by(|a, b| a.1.partial_cmp(b.1).unwrap())
            .unwrap();
        assert_eq!(cut.theta_deg[best_idx], 30.0);
        assert!(cut.value_db[best_idx].abs() < 1e-12);
    }

    #[test]
    fn uv_grid_shape_and_center() {
        let geom = grid_array(10, 8);
        let steer = steering_phases(&geom, Direction::broadside());
        let zeros = vec![0.0; 10];
        let grid = radiation_pattern_uv(&geom, &steer, &zeros, 201).unwrap();
        assert_eq!(grid.u.len(), 201);
        assert_eq!(grid.v.len(), 201);
        assert_eq!(grid.value_db.len(), 201);
        assert!(grid.value_db.iter().all(|row| row.len() == 201));
        assert!(grid.value_db[100][100].abs() < 1e-12);
    }

    #[test]
    fn amplitude_hook_changes_normalization_consistently() {
        let geom = grid_array(5, 9);
        let steer = steering_phases(&geom, Direction::broadside());
        let zeros = vec![0.0; 5];
        let amps = vec![2.0; 5];
        let uniform =
            array_factor_linear(&geom, Direction::broadside(), &steer, &zeros, None).unwrap();
        let scaled =
            array_factor_linear(&geom, Direction::broadside(), &steer, &zeros, Some(&amps))
                .unwrap();
        assert!((uniform - 1.0).abs() < 1e-15);
        assert!((scaled - 1.0).abs() < 1e-15);
    }

    #[test]
    fn dimension_mismatch_detected() {
        let geom = grid_array(5, 10);
        let bad = vec![0.0; 4];
        let good = vec![0.0; 5];
        assert!(matches!(
            array_factor_linear(&geom, Direction::broadside(), &bad, &good, None),
            Err(ArrayError::DimensionMismatch { expected: 5, got: 4 })
        ));
        assert!(matches!(
            array_factor_linear(&geom, Direction::broadside(), &good, &good, Some(&bad)),
            Err(ArrayError::DimensionMismatch { expected: 5, got: 4 })
        ));
    }

    #[test]
    fn geometry_csv_round_trip() {
        let geom = grid_array(20, 11);
        let text = geom.to_csv_string();
        let parsed = ArrayGeometry::parse_csv(&text).unwrap();
        assert_eq!(parsed.positions(), geom.positions());
    }
}
