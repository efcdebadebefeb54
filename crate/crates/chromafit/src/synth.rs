//! Synthetic spectra for demos and self-contained tests: a plausible
//! RGB-like camera built from Gaussian channel profiles and smooth random
//! reflectance sets. No measured dataset is required to exercise the full
//! pipeline with these.

use nalgebra::DMatrix;
use rand::prelude::*;
use rand_chacha::ChaCha8Rng;

use crate::error::Result;
use crate::spectral::{SensorSet, SpectralGrid};

/// A fixed camera-like sensor set: three overlapping Gaussian channels
/// peaking at 460, 540 and 610 nm. Deliberately not a linear recoding of the
/// CIE observer, so there is something for a filter to fix.
pub fn gaussian_camera(grid: &SpectralGrid) -> Result<SensorSet> {
    let channels = [(610.0, 45.0, 1.0), (540.0, 40.0, 0.95), (460.0, 32.0, 0.9)];
    let m = DMatrix::from_fn(grid.len(), 3, |i, k| {
        let w = grid.wavelengths()[i];
        let (center, width, gain): (f64, f64, f64) = channels[k];
        gain * (-((w - center) / width).powi(2)).exp()
    });
    SensorSet::new(grid.clone(), m)
}

/// A randomized camera-like sensor set: three Gaussian channels with jittered
/// centers, widths and gains over the usual blue/green/red bands, plus a
/// small positive floor so no wavelength row vanishes. Deterministic in
/// `rng_seed`.
pub fn random_smooth_camera(grid: &SpectralGrid, rng_seed: u64) -> Result<SensorSet> {
    let mut rng = ChaCha8Rng::seed_from_u64(rng_seed);
    let bands = [(590.0, 630.0), (520.0, 570.0), (440.0, 485.0)];
    let channels: Vec<(f64, f64, f64)> = bands
        .iter()
        .map(|&(lo, hi)| {
            (
                rng.random_range(lo..hi),
                rng.random_range(28.0..55.0),
                rng.random_range(0.6..1.0),
            )
        })
        .collect();
    let m = DMatrix::from_fn(grid.len(), 3, |i, k| {
        let w = grid.wavelengths()[i];
        let (center, width, gain) = channels[k];
        0.005 + gain * (-((w - center) / width).powi(2)).exp()
    });
    SensorSet::new(grid.clone(), m)
}

/// `count` smooth reflectances in [0.02, 0.98]: random low-order cosine
/// mixtures squashed through a logistic, which is how measured surface
/// reflectances tend to look. Deterministic in `rng_seed`.
pub fn smooth_reflectances(grid: &SpectralGrid, count: usize, rng_seed: u64) -> DMatrix<f64> {
    let mut rng = ChaCha8Rng::seed_from_u64(rng_seed);
    let n = grid.len();
    let span = grid.max_nm() - grid.min_nm();
    let mut out = DMatrix::zeros(n, count);
    for s in 0..count {
        let order = 4;
        let coeffs: Vec<f64> = (0..=order)
            .map(|k| rng.random_range(-1.5..1.5) / (1.0 + k as f64))
            .collect();
        let phase: f64 = rng.random_range(0.0..std::f64::consts::TAU);
        for i in 0..n {
            let t = (grid.wavelengths()[i] - grid.min_nm()) / span;
            let mut v = 0.0;
            for (k, c) in coeffs.iter().enumerate() {
                v += c * (std::f64::consts::PI * k as f64 * t + phase).cos();
            }
            // Logistic squash into a physical reflectance range.
            out[(i, s)] = 0.02 + 0.96 / (1.0 + (-1.6 * v).exp());
        }
    }
    out
}
