//! Colorimetric evaluation: the Vora-Value spectral match measure, CIELAB
//! conversion and color difference, and the per-illuminant error-statistics
//! protocol used to score a camera (with or without a filter) against XYZ
//! ground truth.

use nalgebra::DMatrix;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::lls;
use crate::spectral::{
    apply_filter, check_same_grid, color_signal, responses, ColorSignalSet, FilterCurve,
    SensorSet, Spectrum,
};

/// Subspace closeness of two sensor sets: `Trace(Q Q+ X X+) / 3`, a number in
/// [0, 1] that hits 1 exactly when the two sets span the same space (i.e. the
/// camera is a lossless linear recoding of the observer). It is invariant to
/// any full-rank 3x3 recombination of either set.
pub fn vora_value(q: &SensorSet, x: &SensorSet) -> Result<f64> {
    check_same_grid(q.grid(), x.grid(), "vora_value")?;
    let pq = projector(q.channels())?;
    let px = projector(x.channels())?;
    Ok((pq * px).trace() / 3.0)
}

fn projector(a: &DMatrix<f64>) -> Result<DMatrix<f64>> {
    let pinv = lls::pseudoinverse(a)?;
    Ok(a * pinv)
}

/// A CIELAB coordinate, tagged with the white point used to normalize it so
/// distances between incompatible encodings are rejected.
#[derive(Debug, Clone, Copy, Serialize)]
pub struct LabColor {
    pub l: f64,
    pub a: f64,
    pub b: f64,
    white: [f64; 3],
}

fn lab_f(t: f64) -> f64 {
    const DELTA: f64 = 6.0 / 29.0;
    if t > DELTA * DELTA * DELTA {
        t.cbrt()
    } else {
        t / (3.0 * DELTA * DELTA) + 4.0 / 29.0
    }
}

/// Standard CIELAB with the cube-root/linear split at (6/29)^3.
pub fn xyz_to_lab(xyz: [f64; 3], white: [f64; 3]) -> Result<LabColor> {
    if white.iter().any(|w| w.is_nan() || *w <= 0.0) {
        return Err(Error::InvalidData(format!(
            "white point must be strictly positive, got {white:?}"
        )));
    }
    let fx = lab_f(xyz[0] / white[0]);
    let fy = lab_f(xyz[1] / white[1]);
    let fz = lab_f(xyz[2] / white[2]);
    Ok(LabColor {
        l: 116.0 * fy - 16.0,
        a: 500.0 * (fx - fy),
        b: 200.0 * (fy - fz),
        white,
    })
}

/// Euclidean distance in (L*, a*, b*). Roughly, 1.0 is a just-noticeable
/// color difference.
pub fn delta_e(a: &LabColor, b: &LabColor) -> Result<f64> {
    if a.white != b.white {
        return Err(Error::InvalidArgument(format!(
            "delta E between colors normalized to different whites: {:?} vs {:?}",
            a.white, b.white
        )));
    }
    Ok(((a.l - b.l).powi(2) + (a.a - b.a).powi(2) + (a.b - b.b).powi(2)).sqrt())
}

/// Order statistics of a batch of delta E errors.
#[derive(Debug, Clone, Copy, Serialize)]
pub struct ErrorStats {
    pub mean: f64,
    pub median: f64,
    pub p90: f64,
    pub p95: f64,
    pub p99: f64,
    pub max: f64,
}

impl ErrorStats {
    pub fn from_samples(samples: &[f64]) -> Result<Self> {
        if samples.is_empty() {
            return Err(Error::InvalidData("no error samples".into()));
        }
        if samples.iter().any(|v| !v.is_finite() || *v < 0.0) {
            return Err(Error::InvalidData(
                "error samples must be finite and nonnegative".into(),
            ));
        }
        let mut sorted = samples.to_vec();
        sorted.sort_by(f64::total_cmp);
        Ok(ErrorStats {
            mean: samples.iter().sum::<f64>() / samples.len() as f64,
            median: percentile(&sorted, 50.0),
            p90: percentile(&sorted, 90.0),
            p95: percentile(&sorted, 95.0),
            p99: percentile(&sorted, 99.0),
            max: *sorted.last().unwrap(),
        })
    }

    /// Componentwise mean over several stat rows (the aggregate row of a
    /// multi-light evaluation).
    pub fn mean_of(stats: &[ErrorStats]) -> Result<Self> {
        if stats.is_empty() {
            return Err(Error::InvalidData("no stats to aggregate".into()));
        }
        let n = stats.len() as f64;
        Ok(ErrorStats {
            mean: stats.iter().map(|s| s.mean).sum::<f64>() / n,
            median: stats.iter().map(|s| s.median).sum::<f64>() / n,
            p90: stats.iter().map(|s| s.p90).sum::<f64>() / n,
            p95: stats.iter().map(|s| s.p95).sum::<f64>() / n,
            p99: stats.iter().map(|s| s.p99).sum::<f64>() / n,
            max: stats.iter().map(|s| s.max).sum::<f64>() / n,
        })
    }
}

/// Linear interpolation between order statistics on a pre-sorted slice.
fn percentile(sorted: &[f64], p: f64) -> f64 {
    let n = sorted.len();
    if n == 1 {
        return sorted[0];
    }
    let rank = p / 100.0 * (n - 1) as f64;
    let lo = rank.floor() as usize;
    let hi = rank.ceil() as usize;
    let frac = rank - lo as f64;
    sorted[lo] * (1.0 - frac) + sorted[hi] * frac
}

/// One illuminant's worth of evaluation plus the aggregate across all of them.
#[derive(Debug, Clone, Serialize)]
pub struct EvalReport {
    pub per_illuminant: Vec<(String, ErrorStats)>,
    pub aggregate: ErrorStats,
}

/// Scores a camera against the observer over a set of lights and reflectances.
///
/// Per illuminant: build the color signals, compute ground-truth XYZ and the
/// (optionally filtered) camera responses, fit the per-light least-squares
/// 3x3 correction from responses to XYZ, convert both through CIELAB using
/// the perfect reflector under that light as the white point, and reduce the
/// per-reflectance delta E values to [`ErrorStats`]. The aggregate row is the
/// mean of each statistic across illuminants.
pub fn evaluate(
    camera: &SensorSet,
    filter: Option<&FilterCurve>,
    illuminants: &[Spectrum],
    reflectances: &DMatrix<f64>,
    cmfs: &SensorSet,
) -> Result<EvalReport> {
    if illuminants.is_empty() {
        return Err(Error::InvalidData("no illuminants to evaluate".into()));
    }
    check_same_grid(camera.grid(), cmfs.grid(), "evaluate")?;
    let effective = match filter {
        Some(f) => apply_filter(camera, f)?,
        None => camera.clone(),
    };

    // Lights evaluate independently; results assemble in input order, so the
    // aggregation is deterministic regardless of scheduling.
    use rayon::prelude::*;
    let per_illuminant: Vec<(String, ErrorStats)> = illuminants
        .par_iter()
        .enumerate()
        .map(|(idx, light)| {
            let name = light
                .name()
                .map(str::to_string)
                .unwrap_or_else(|| format!("light_{idx:03}"));
            let stats = evaluate_single(&effective, light, reflectances, cmfs)
                .map_err(|e| match e {
                    Error::RankDeficient { cond, context } => Error::RankDeficient {
                        cond,
                        context: format!("illuminant {name}: {context}"),
                    },
                    other => other,
                })?;
            Ok((name, stats))
        })
        .collect::<Result<_>>()?;
    let aggregate = ErrorStats::mean_of(
        &per_illuminant
            .iter()
            .map(|(_, s)| *s)
            .collect::<Vec<_>>(),
    )?;
    Ok(EvalReport {
        per_illuminant,
        aggregate,
    })
}

fn evaluate_single(
    effective: &SensorSet,
    light: &Spectrum,
    reflectances: &DMatrix<f64>,
    cmfs: &SensorSet,
) -> Result<ErrorStats> {
    let signals = color_signal(light, reflectances, "eval")?;
    let truth = responses(&signals, cmfs)?;
    let rgb = responses(&signals, effective)?;
    let map = lls::fit_linear_map(&rgb, &truth)?;
    let predicted = &rgb * lls::dyn3(&map);

    // White point: XYZ of the perfect reflector under this light.
    let white_signals = ColorSignalSet::new(
        light.grid().clone(),
        DMatrix::from_column_slice(light.grid().len(), 1, light.values().as_slice()),
        "white",
    )?;
    let white_xyz = responses(&white_signals, cmfs)?;
    let white = [white_xyz[(0, 0)], white_xyz[(0, 1)], white_xyz[(0, 2)]];

    let mut errors = Vec::with_capacity(truth.nrows());
    for s in 0..truth.nrows() {
        let lab_truth = xyz_to_lab([truth[(s, 0)], truth[(s, 1)], truth[(s, 2)]], white)?;
        let lab_pred = xyz_to_lab(
            [predicted[(s, 0)], predicted[(s, 1)], predicted[(s, 2)]],
            white,
        )?;
        errors.push(delta_e(&lab_truth, &lab_pred)?);
    }
    ErrorStats::from_samples(&errors)
}

/// Mean delta E of a camera+filter over the given lights/reflectances; the
/// ranking metric of the multi-start search.
pub fn mean_delta_e(
    camera: &SensorSet,
    filter: Option<&FilterCurve>,
    illuminants: &[Spectrum],
    reflectances: &DMatrix<f64>,
    cmfs: &SensorSet,
) -> Result<f64> {
    Ok(evaluate(camera, filter, illuminants, reflectances, cmfs)?.aggregate.mean)
}
