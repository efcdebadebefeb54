//! Solve the Luther-condition filter for a demo camera: the filter that makes
//! the filtered sensitivities as close as possible to a 3x3 transform of the
//! CIE 1931 color matching functions.
//!
//!     cargo run --release --example luther_filter

use chromafit::luther::optimize_luther;
use chromafit::spectral::SpectralGrid;
use chromafit::{metrics, synth, tables};

fn main() -> chromafit::Result<()> {
    let grid = SpectralGrid::default_visible();
    let camera = synth::gaussian_camera(&grid)?;
    let cmfs = tables::reference_cmfs();

    let result = optimize_luther(&camera, &cmfs, 1e-10, 500)?;

    println!(
        "converged: {} after {} iterations (objective {:.4e})",
        result.trace.converged,
        result.trace.iterations,
        result.trace.final_objective()
    );
    println!(
        "Vora-Value: {:.4} native -> {:.4} filtered",
        result.vora_before, result.vora_after
    );
    let positivity = result.positivity();
    println!(
        "filter range: [{:.4}, {:.4}], all positive: {}",
        positivity.min_value,
        result.filter.max_value(),
        positivity.all_positive
    );

    println!("\nwavelength_nm  transmittance");
    for (w, t) in grid.wavelengths().iter().zip(result.filter.values().iter()) {
        println!("{w:>10.0}     {t:.4}  {}", bar(*t));
    }

    // Sanity: the filter cannot make the spectral match worse.
    let filtered = chromafit::spectral::apply_filter(&camera, &result.filter)?;
    assert!(metrics::vora_value(&filtered, &cmfs)? >= result.vora_before);
    Ok(())
}

fn bar(t: f64) -> String {
    "#".repeat((t.clamp(0.0, 1.0) * 40.0).round() as usize)
}
