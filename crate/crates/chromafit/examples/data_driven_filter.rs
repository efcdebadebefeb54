//! Solve a data-driven filter: instead of matching the observer curves
//! spectrally, minimize the error of predicted XYZ tristimuli over measured
//! lights and surfaces. Compares seeding with the fully transmissive filter
//! against seeding with the Luther-condition filter.
//!
//!     cargo run --release --example data_driven_filter

use chromafit::driven::{optimize_data_labeled, ConstraintSpec, Scenario, TargetMode};
use chromafit::luther::optimize_luther;
use chromafit::spectral::{color_signal, FilterCurve, SpectralGrid};
use chromafit::tables::{reference_cmfs, reference_illuminant, ReferenceIlluminant};
use chromafit::{metrics, synth};

fn main() -> chromafit::Result<()> {
    let grid = SpectralGrid::default_visible();
    let camera = synth::gaussian_camera(&grid)?;
    let cmfs = reference_cmfs();
    let reflectances = synth::smooth_reflectances(&grid, 120, 42);
    let lights = vec![
        reference_illuminant(ReferenceIlluminant::D65),
        reference_illuminant(ReferenceIlluminant::A),
    ];

    let signal_sets = lights
        .iter()
        .map(|e| color_signal(e, &reflectances, e.name().unwrap_or("light")))
        .collect::<chromafit::Result<Vec<_>>>()?;
    let scenario = Scenario::new(signal_sets, TargetMode::PerLight, cmfs.clone())?;

    let native = metrics::evaluate(&camera, None, &lights, &reflectances, &cmfs)?;
    println!("native camera:        mean dE {:.3}", native.aggregate.mean);

    for (seed, seed_id) in [
        (FilterCurve::ones(grid.clone()), "ones"),
        (optimize_luther(&camera, &cmfs, 1e-10, 500)?.filter, "luther"),
    ] {
        let result = optimize_data_labeled(
            &camera,
            &scenario,
            &seed,
            seed_id,
            &ConstraintSpec::Unconstrained,
            1e-10,
            500,
        )?;
        let eval = metrics::evaluate(
            &camera,
            Some(&result.filter),
            &lights,
            &reflectances,
            &cmfs,
        )?;
        println!(
            "seed {:6}: mean dE {:.3}  (objective {:.4e}, {} iterations, filter in [{:.3}, {:.3}])",
            result.seed_id,
            eval.aggregate.mean,
            result.trace.final_objective(),
            result.trace.iterations,
            result.filter.min_value(),
            result.filter.max_value(),
        );
        for (name, stats) in &eval.per_illuminant {
            println!(
                "    {name:4} mean {:.3}  median {:.3}  p95 {:.3}  max {:.3}",
                stats.mean, stats.median, stats.p95, stats.max
            );
        }
    }
    Ok(())
}
