//! Seed-filter generation and multi-start search. The data-driven
//! optimisation converges to different filters from different initial
//! guesses, so a diverse constraint-feasible seed set is sampled from the
//! coefficient hypercube (whose per-dimension extremes come from linear
//! programs) with an angular de-duplication test, and the optimisation runs
//! once per seed.

use nalgebra::{DMatrix, DVector};
use rand::prelude::*;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use crate::basis::BasisMatrix;
use crate::driven::{optimize_data_labeled, ConstraintSpec, DataResult, Scenario};
use crate::error::{Error, Result};
use crate::metrics;
use crate::spectral::{FilterCurve, SensorSet, Spectrum};

/// A generated set of constraint-feasible, pairwise-distinct seed filters
/// together with everything needed to regenerate it.
#[derive(Debug, Clone)]
pub struct SeedSet {
    pub filters: Vec<FilterCurve>,
    pub basis: BasisMatrix,
    pub f_min: f64,
    pub f_max: f64,
    pub theta_deg: f64,
    pub rng_seed: u64,
    pub coeff_min: DVector<f64>,
    pub coeff_max: DVector<f64>,
}

impl SeedSet {
    /// Mean and maximum nearest-neighbour angle across the set, the sparsity
    /// diagnostic that says how much refinement the optimisation adds on top
    /// of raw sampling.
    pub fn nearest_neighbour_stats(&self) -> Option<(f64, f64)> {
        if self.filters.len() < 2 {
            return None;
        }
        let mut mean = 0.0;
        let mut max: f64 = 0.0;
        for (i, f) in self.filters.iter().enumerate() {
            let nearest = self
                .filters
                .iter()
                .enumerate()
                .filter(|(j, _)| *j != i)
                .map(|(_, q)| angle_degrees(f, q).unwrap_or(180.0))
                .fold(f64::INFINITY, f64::min);
            mean += nearest;
            max = max.max(nearest);
        }
        Some((mean / self.filters.len() as f64, max))
    }
}

/// Angle between two filters in degrees (scale-invariant, in [0, 180]).
pub fn angle_degrees(f: &FilterCurve, q: &FilterCurve) -> Result<f64> {
    let (a, b) = (f.values(), q.values());
    let na = a.norm();
    let nb = b.norm();
    if na == 0.0 || nb == 0.0 {
        return Err(Error::InvalidData(
            "angle of a zero-length filter is undefined".into(),
        ));
    }
    let cos = (a.dot(b) / (na * nb)).clamp(-1.0, 1.0);
    Ok(cos.acos().to_degrees())
}

/// Consecutive rejected samples tolerated before concluding the requested
/// count cannot be reached at this angular threshold.
const STALL_WINDOW: u64 = 1_000_000;

/// Samples `count` filters `f = B c` with `c` uniform in the coefficient
/// hypercube, keeping only those inside the transmittance bounds and more
/// than `theta_deg` away from every filter already kept.
pub fn generate_seed_set(
    basis: &BasisMatrix,
    f_min: f64,
    f_max: f64,
    count: usize,
    theta_deg: f64,
    rng_seed: u64,
) -> Result<SeedSet> {
    if count == 0 {
        return Err(Error::InvalidArgument("seed count must be positive".into()));
    }
    if f_min.is_nan() || f_max.is_nan() || f_min > f_max {
        return Err(Error::Infeasible(format!(
            "transmittance bounds are empty: f_min {f_min} > f_max {f_max}"
        )));
    }
    let m = basis.term_count();
    let mut coeff_min = DVector::zeros(m);
    let mut coeff_max = DVector::zeros(m);
    for dim in 0..m {
        coeff_min[dim] = crate::solvers::coefficient_extreme(
            basis.matrix(),
            f_min,
            f_max,
            dim,
            crate::solvers::Sense::Min,
        )?;
        coeff_max[dim] = crate::solvers::coefficient_extreme(
            basis.matrix(),
            f_min,
            f_max,
            dim,
            crate::solvers::Sense::Max,
        )?;
    }

    let mut rng = ChaCha8Rng::seed_from_u64(rng_seed);
    let mut filters: Vec<FilterCurve> = Vec::with_capacity(count);
    let mut rejections: u64 = 0;
    while filters.len() < count {
        if rejections >= STALL_WINDOW {
            return Err(Error::NoConvergence {
                limit: STALL_WINDOW as usize,
                context: format!(
                    "seed sampling stalled at {} of {count} filters; \
                     lower theta ({theta_deg} deg) or the requested count",
                    filters.len()
                ),
            });
        }
        let c = DVector::from_fn(m, |i, _| {
            if coeff_min[i] < coeff_max[i] {
                rng.random_range(coeff_min[i]..coeff_max[i])
            } else {
                coeff_min[i]
            }
        });
        let values = basis.matrix() * &c;
        // The hypercube over-approximates the feasible set: re-check bounds.
        if values.iter().any(|v| *v < f_min || *v > f_max) {
            rejections += 1;
            continue;
        }
        let candidate = FilterCurve::from_vector(basis.grid().clone(), values)?;
        let distinct = filters
            .iter()
            .all(|q| angle_degrees(&candidate, q).is_ok_and(|a| a > theta_deg));
        if distinct {
            filters.push(candidate);
            rejections = 0;
        } else {
            rejections += 1;
        }
    }

    Ok(SeedSet {
        filters,
        basis: basis.clone(),
        f_min,
        f_max,
        theta_deg,
        rng_seed,
        coeff_min,
        coeff_max,
    })
}

/// Held-out data the mean-delta-E ranking metric is computed on.
#[derive(Debug, Clone)]
pub struct MetricData {
    pub illuminants: Vec<Spectrum>,
    pub reflectances: DMatrix<f64>,
}

#[derive(Debug, Clone)]
pub enum SelectionMetric {
    /// Rank converged runs by their training objective.
    Objective,
    /// Rank by mean delta E over the given lights and reflectances.
    MeanDeltaE(MetricData),
}

/// One seed's outcome inside a multi-start run.
#[derive(Debug, Clone)]
pub struct SeedRun {
    pub seed_index: usize,
    pub outcome: std::result::Result<ScoredResult, String>,
}

#[derive(Debug, Clone)]
pub struct ScoredResult {
    pub result: DataResult,
    pub metric: f64,
}

#[derive(Debug)]
pub struct MultiStartOutcome {
    /// Per-seed entries in seed order; failures stay as entries.
    pub runs: Vec<SeedRun>,
    /// Indices into `runs`, best metric first (ties by seed index).
    pub ranking: Vec<usize>,
}

impl MultiStartOutcome {
    pub fn best(&self) -> Option<&ScoredResult> {
        self.ranking
            .first()
            .and_then(|&i| self.runs[i].outcome.as_ref().ok())
    }
}

/// Runs the data-driven optimisation once per seed (in parallel) and ranks
/// the converged results by the selection metric. Per-seed failures become
/// entries in the report rather than sinking the whole search.
pub fn multi_start(
    camera: &SensorSet,
    scenario: &Scenario,
    cons: &ConstraintSpec,
    seeds: &SeedSet,
    metric: &SelectionMetric,
    eps: f64,
    max_iter: usize,
) -> Result<MultiStartOutcome> {
    if seeds.filters.is_empty() {
        return Err(Error::InvalidArgument("empty seed set".into()));
    }
    let runs: Vec<SeedRun> = seeds
        .filters
        .par_iter()
        .enumerate()
        .map(|(seed_index, seed)| {
            let outcome = optimize_data_labeled(
                camera,
                scenario,
                seed,
                &format!("seed_{seed_index:03}"),
                cons,
                eps,
                max_iter,
            )
            .and_then(|result| {
                let metric_value = score(camera, scenario, &result, metric)?;
                Ok(ScoredResult {
                    result,
                    metric: metric_value,
                })
            })
            .map_err(|e| e.to_string());
            SeedRun {
                seed_index,
                outcome,
            }
        })
        .collect();

    let mut ranking: Vec<usize> = (0..runs.len())
        .filter(|&i| runs[i].outcome.is_ok())
        .collect();
    if ranking.is_empty() {
        return Err(Error::NoConvergence {
            limit: seeds.filters.len(),
            context: "every seed failed to optimize".into(),
        });
    }
    ranking.sort_by(|&a, &b| {
        let ma = runs[a].outcome.as_ref().unwrap().metric;
        let mb = runs[b].outcome.as_ref().unwrap().metric;
        ma.total_cmp(&mb).then(a.cmp(&b))
    });
    Ok(MultiStartOutcome { runs, ranking })
}

/// The metric value a converged run is ranked by (lower is better).
pub fn score(
    camera: &SensorSet,
    scenario: &Scenario,
    result: &DataResult,
    metric: &SelectionMetric,
) -> Result<f64> {
    match metric {
        SelectionMetric::Objective => Ok(result.trace.final_objective()),
        SelectionMetric::MeanDeltaE(data) => metrics::mean_delta_e(
            camera,
            Some(&result.filter),
            &data.illuminants,
            &data.reflectances,
            scenario.cmfs(),
        ),
    }
}
