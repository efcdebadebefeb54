//! Constrained filter design: restrict the filter to the span of the first
//! 6 or 8 cosine-basis terms (smooth, manufacturable) and require at least
//! 20% transmittance everywhere. Shows what the constraints cost in accuracy
//! relative to the unconstrained solution.
//!
//!     cargo run --release --example constrained_filter

use chromafit::basis::cosine_basis;
use chromafit::driven::{optimize_data_labeled, ConstraintSpec, Scenario, TargetMode};
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
    let seed = FilterCurve::ones(grid.clone());

    let cases = [
        ("unconstrained", ConstraintSpec::Unconstrained),
        (
            "bounds only (f >= 0.2)",
            ConstraintSpec::basis_bounded_with_max(cosine_basis(&grid, 31)?, 0.2, 1.0)?,
        ),
        (
            "6-term basis, f >= 0.2",
            ConstraintSpec::basis_bounded(cosine_basis(&grid, 6)?, 0.2)?,
        ),
        (
            "8-term basis, f >= 0.2",
            ConstraintSpec::basis_bounded(cosine_basis(&grid, 8)?, 0.2)?,
        ),
    ];

    for (label, cons) in cases {
        let result =
            optimize_data_labeled(&camera, &scenario, &seed, "ones", &cons, 1e-10, 500)?;
        let eval = metrics::evaluate(
            &camera,
            Some(&result.filter),
            &lights,
            &reflectances,
            &cmfs,
        )?;
        println!(
            "{label:24} mean dE {:.3}   filter range [{:+.3}, {:.3}]   roughness {:.4}",
            eval.aggregate.mean,
            result.filter.min_value(),
            result.filter.max_value(),
            roughness(result.filter.values().as_slice()),
        );
    }
    println!("\nroughness = mean squared second difference of the curve");
    Ok(())
}

fn roughness(values: &[f64]) -> f64 {
    let mut acc = 0.0;
    for w in values.windows(3) {
        acc += (w[2] - 2.0 * w[1] + w[0]).powi(2);
    }
    acc / (values.len() - 2) as f64
}
