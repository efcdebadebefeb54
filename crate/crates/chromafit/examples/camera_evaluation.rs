//! The evaluation harness on its own: per-illuminant delta E statistics for a
//! camera with and without a designed filter, plus the Vora-Value spectral
//! match. Per light, camera responses are regressed onto ground-truth XYZ
//! with the best 3x3 matrix before errors are measured in CIELAB.
//!
//!     cargo run --release --example camera_evaluation

use chromafit::luther::optimize_luther;
use chromafit::metrics::{evaluate, vora_value, ErrorStats};
use chromafit::spectral::{apply_filter, SpectralGrid};
use chromafit::tables::{reference_cmfs, reference_illuminant, ReferenceIlluminant};
use chromafit::synth;

fn main() -> chromafit::Result<()> {
    let grid = SpectralGrid::default_visible();
    let camera = synth::gaussian_camera(&grid)?;
    let cmfs = reference_cmfs();
    let reflectances = synth::smooth_reflectances(&grid, 200, 77);
    let lights = vec![
        reference_illuminant(ReferenceIlluminant::D65),
        reference_illuminant(ReferenceIlluminant::A),
    ];

    let filter = optimize_luther(&camera, &cmfs, 1e-10, 500)?.filter;

    println!(
        "Vora-Value: native {:.4}, filtered {:.4}\n",
        vora_value(&camera, &cmfs)?,
        vora_value(&apply_filter(&camera, &filter)?, &cmfs)?
    );

    println!("{:12} {:>8} {:>8} {:>8} {:>8} {:>8} {:>8}", "", "mean", "median", "p90", "p95", "p99", "max");
    let native = evaluate(&camera, None, &lights, &reflectances, &cmfs)?;
    for (name, stats) in &native.per_illuminant {
        print_row(&format!("native {name}"), stats);
    }
    print_row("native all", &native.aggregate);

    let filtered = evaluate(&camera, Some(&filter), &lights, &reflectances, &cmfs)?;
    for (name, stats) in &filtered.per_illuminant {
        print_row(&format!("filtered {name}"), stats);
    }
    print_row("filtered all", &filtered.aggregate);
    Ok(())
}

fn print_row(label: &str, s: &ErrorStats) {
    println!(
        "{label:12} {:8.3} {:8.3} {:8.3} {:8.3} {:8.3} {:8.3}",
        s.mean, s.median, s.p90, s.p95, s.p99, s.max
    );
}
