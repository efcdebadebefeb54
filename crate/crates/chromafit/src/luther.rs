//! Alternating least squares for the Luther-condition filter: find `f` and a
//! 3x3 map `M` so that `diag(f) Q M` comes as close as possible to the
//! color-matching functions. Each half-step (per-row scalars for the filter,
//! then a pseudoinverse fit for the map) is an exact least-squares solve, so
//! the objective can only go down.

use nalgebra::{DVector, Matrix3};
use serde::Serialize;

use crate::error::{Error, Result};
use crate::lls;
use crate::metrics;
use crate::spectral::{check_same_grid, CorrectionMatrix, FilterCurve, SensorSet};

/// Convergence record of one alternating-least-squares run.
#[derive(Debug, Clone, Serialize)]
pub struct AlsTrace {
    /// Objective value after each iteration (non-increasing).
    pub objectives: Vec<f64>,
    pub iterations: usize,
    pub converged: bool,
    pub epsilon: f64,
    /// Iterations where a rank-deficient subproblem needed a ridge.
    pub regularized_steps: usize,
}

impl AlsTrace {
    pub fn final_objective(&self) -> f64 {
        *self.objectives.last().unwrap_or(&f64::NAN)
    }
}

#[derive(Debug, Clone)]
pub struct LutherResult {
    /// Accumulated filter, normalized to a maximum transmittance of 1.
    pub filter: FilterCurve,
    /// Accumulated correction map, rescaled to match the normalization.
    pub map: CorrectionMatrix,
    pub trace: AlsTrace,
    pub vora_before: f64,
    pub vora_after: f64,
    /// Wavelength indices whose sensitivity row vanished during iteration
    /// (their per-row scalar is defined as 0).
    pub zero_rows: Vec<usize>,
}

impl LutherResult {
    pub fn positivity(&self) -> PositivityReport {
        check_positivity(&self.filter)
    }
}

/// Min transmittance and where it happens; filters from exactly solvable
/// camera/observer pairs are provably all-positive, and real cameras come
/// out all-positive in practice, so a nonpositive value is worth surfacing.
#[derive(Debug, Clone, Serialize)]
pub struct PositivityReport {
    pub min_value: f64,
    pub min_wavelength_nm: f64,
    pub all_positive: bool,
    pub nonpositive_wavelengths_nm: Vec<f64>,
}

pub fn check_positivity(filter: &FilterCurve) -> PositivityReport {
    let values = filter.values();
    let (min_index, min_value) = values
        .iter()
        .enumerate()
        .min_by(|a, b| a.1.total_cmp(b.1))
        .map(|(i, v)| (i, *v))
        .unwrap();
    let nonpositive: Vec<f64> = values
        .iter()
        .enumerate()
        .filter(|(_, v)| **v <= 0.0)
        .map(|(i, _)| filter.grid().wavelengths()[i])
        .collect();
    PositivityReport {
        min_value,
        min_wavelength_nm: filter.grid().wavelengths()[min_index],
        all_positive: nonpositive.is_empty(),
        nonpositive_wavelengths_nm: nonpositive,
    }
}

/// Runs the alternating optimisation until the iterate movement
/// `||Q_i - Q_{i-1}||_F^2` drops below `eps` or `max_iter` is reached.
///
/// The returned filter and map are the componentwise product of the
/// per-iteration filters and the ordered product of the per-iteration maps,
/// then normalized so the filter peaks at 1 (the trade-off between `f` and
/// `M` is only determined up to a scale).
pub fn optimize_luther(
    camera: &SensorSet,
    cmfs: &SensorSet,
    eps: f64,
    max_iter: usize,
) -> Result<LutherResult> {
    check_same_grid(camera.grid(), cmfs.grid(), "optimize_luther")?;
    if eps.is_nan() || eps <= 0.0 {
        return Err(Error::InvalidArgument(format!(
            "eps must be positive, got {eps}"
        )));
    }
    if max_iter == 0 {
        return Err(Error::InvalidArgument("max_iter must be at least 1".into()));
    }

    let n = camera.grid().len();
    let x = cmfs.channels();
    let mut q = camera.channels().clone();

    let mut filter_acc = DVector::from_element(n, 1.0);
    let mut map_acc = Matrix3::<f64>::identity();
    let mut objectives = Vec::new();
    let mut zero_rows = Vec::new();
    let mut regularized_steps = 0usize;
    let mut converged = false;
    let mut iterations = 0usize;

    for iteration in 1..=max_iter {
        iterations = iteration;

        // Filter step: per-row scalars mapping the current iterate onto X.
        let (alphas, flagged) = lls::fit_row_scalars(&q, x)?;
        for r in flagged {
            if !zero_rows.contains(&r) {
                zero_rows.push(r);
            }
        }
        let mut filtered = q.clone();
        for i in 0..n {
            for k in 0..3 {
                filtered[(i, k)] *= alphas[i];
            }
        }

        // Map step: best 3x3 transform of the filtered iterate onto X.
        let (m, ridged) = lls::fit_linear_map_ridged(&filtered, x)?;
        if ridged {
            regularized_steps += 1;
        }

        let next = &filtered * lls::dyn3(&m);
        if next.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFinite {
                iteration,
                context: "Luther iterate".into(),
            });
        }

        filter_acc.component_mul_assign(&alphas);
        map_acc *= m;
        objectives.push((&next - x).norm_squared());

        let movement = (&next - &q).norm_squared();
        q = next;
        if movement < eps {
            converged = true;
            break;
        }
    }

    // Exact solutions come in (c f, M / c) families, so an all-nonpositive
    // filter is the same solution as its positive mirror; report that one.
    if filter_acc.max() <= 0.0 {
        filter_acc = -filter_acc;
        map_acc = -map_acc;
    }
    // Canonical scale: max transmittance 1 (the objective is unchanged when
    // f is divided by a constant and M multiplied by it).
    let peak = filter_acc.max();
    if peak > 0.0 {
        filter_acc /= peak;
        map_acc *= peak;
    }

    let filter = FilterCurve::from_vector(camera.grid().clone(), filter_acc)?;
    let vora_before = metrics::vora_value(camera, cmfs)?;
    let vora_after = metrics::vora_value(&crate::spectral::apply_filter(camera, &filter)?, cmfs)
        .unwrap_or(f64::NAN);

    Ok(LutherResult {
        filter,
        map: CorrectionMatrix::new(map_acc)?,
        trace: AlsTrace {
            objectives,
            iterations,
            converged,
            epsilon: eps,
            regularized_steps,
        },
        vora_before,
        vora_after,
        zero_rows,
    })
}

/// The Luther objective `||diag(f) Q M - X||_F^2` at a given filter and map.
pub fn objective(
    camera: &SensorSet,
    cmfs: &SensorSet,
    filter: &FilterCurve,
    map: &CorrectionMatrix,
) -> Result<f64> {
    check_same_grid(camera.grid(), cmfs.grid(), "luther objective")?;
    check_same_grid(camera.grid(), filter.grid(), "luther objective")?;
    let mut filtered = camera.channels().clone();
    for (i, f) in filter.values().iter().enumerate() {
        for k in 0..3 {
            filtered[(i, k)] *= f;
        }
    }
    Ok((filtered * lls::dyn3(map.matrix()) - cmfs.channels()).norm_squared())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::spectral::SpectralGrid;
    use crate::tables;
    use approx::assert_relative_eq;
    use nalgebra::DMatrix;
    use rand::prelude::*;
    use rand_chacha::ChaCha8Rng;

    fn random_camera(rng: &mut ChaCha8Rng) -> SensorSet {
        let grid = SpectralGrid::default_visible();
        SensorSet::new(
            grid,
            DMatrix::from_fn(31, 3, |_, _| rng.random_range(0.05..1.0)),
        )
        .unwrap()
    }

    /// Builds a target that the camera reaches exactly: `X = diag(f*) Q M`
    /// for a positive filter `f*` and a well-conditioned positive-entry map
    /// (a plausible sensor recombination).
    fn exactly_reachable_target(rng: &mut ChaCha8Rng, camera: &SensorSet) -> SensorSet {
        let n = camera.grid().len();
        let f_star = DVector::from_fn(n, |_, _| rng.random_range(0.2..1.0));
        loop {
            let m: Matrix3<f64> = Matrix3::from_fn(|_, _| rng.random_range(0.1..1.0));
            let sv = m.singular_values();
            if sv.min() < sv.max() * 0.05 {
                continue;
            }
            let mut x = camera.channels().clone();
            for i in 0..n {
                for ch in 0..3 {
                    x[(i, ch)] *= f_star[i];
                }
            }
            if let Ok(target) = SensorSet::new(camera.grid().clone(), x * lls::dyn3(&m)) {
                return target;
            }
        }
    }

    #[test]
    fn already_colorimetric_camera_needs_no_filter() {
        let cmfs = tables::reference_cmfs();
        let result = optimize_luther(&cmfs, &cmfs, 1e-8, 100).unwrap();
        assert!(result.trace.final_objective() < 1e-18);
        assert!(result
            .filter
            .values()
            .iter()
            .all(|v| (v - 1.0).abs() < 1e-9));
        assert!((result.map.matrix() - Matrix3::identity()).abs().max() < 1e-9);
        assert_relative_eq!(result.vora_after, 1.0, epsilon = 1e-10);
    }

    #[test]
    fn synthetic_exact_solution_is_recovered() {
        let mut rng = ChaCha8Rng::seed_from_u64(61);
        for _ in 0..5 {
            let camera = random_camera(&mut rng);
            let target = exactly_reachable_target(&mut rng, &camera);
            let result = optimize_luther(&camera, &target, 1e-16, 2000).unwrap();
            let goal = 1e-8 * target.channels().norm_squared();
            assert!(
                result.trace.final_objective() < goal,
                "objective {} above {}",
                result.trace.final_objective(),
                goal
            );
            let report = result.positivity();
            assert!(report.all_positive, "min {}", report.min_value);
        }
    }

    #[test]
    fn objective_is_monotone_and_beats_all_ones_baseline() {
        let cmfs = tables::reference_cmfs();
        let mut rng = ChaCha8Rng::seed_from_u64(62);
        for _ in 0..10 {
            let camera = random_camera(&mut rng);
            let result = optimize_luther(&camera, &cmfs, 1e-10, 300).unwrap();
            let objectives = &result.trace.objectives;
            for w in objectives.windows(2) {
                assert!(w[1] <= w[0] * (1.0 + 1e-12) + 1e-15);
            }
            // Baseline: keep the native camera, fit only the map.
            let m = lls::fit_linear_map(camera.channels(), cmfs.channels()).unwrap();
            let baseline =
                (camera.channels() * lls::dyn3(&m) - cmfs.channels()).norm_squared();
            assert!(result.trace.final_objective() <= baseline + 1e-12);
        }
    }

    #[test]
    fn accumulated_filter_and_map_reproduce_final_objective() {
        let cmfs = tables::reference_cmfs();
        let mut rng = ChaCha8Rng::seed_from_u64(63);
        let camera = random_camera(&mut rng);
        let result = optimize_luther(&camera, &cmfs, 1e-10, 300).unwrap();
        let replayed = objective(&camera, &cmfs, &result.filter, &result.map).unwrap();
        assert_relative_eq!(
            replayed,
            result.trace.final_objective(),
            epsilon = 1e-9,
            max_relative = 1e-9
        );
    }

    #[test]
    fn scale_ambiguity_leaves_objective_unchanged() {
        let cmfs = tables::reference_cmfs();
        let mut rng = ChaCha8Rng::seed_from_u64(64);
        let camera = random_camera(&mut rng);
        let result = optimize_luther(&camera, &cmfs, 1e-10, 300).unwrap();
        let base = objective(&camera, &cmfs, &result.filter, &result.map).unwrap();
        for scale in [0.37, 2.0, 113.0] {
            let rescaled_filter = FilterCurve::from_vector(
                camera.grid().clone(),
                result.filter.values() * scale,
            )
            .unwrap();
            let rescaled_map =
                CorrectionMatrix::new(result.map.matrix() / scale).unwrap();
            let moved = objective(&camera, &cmfs, &rescaled_filter, &rescaled_map).unwrap();
            assert_relative_eq!(base, moved, epsilon = 1e-12, max_relative = 1e-12);
        }
    }

    #[test]
    fn rerun_from_converged_state_stays_put() {
        let cmfs = tables::reference_cmfs();
        let mut rng = ChaCha8Rng::seed_from_u64(65);
        let camera = random_camera(&mut rng);
        let eps = 1e-12;
        let first = optimize_luther(&camera, &cmfs, eps, 500).unwrap();
        let filtered = crate::spectral::apply_filter(&camera, &first.filter).unwrap();
        let refit = SensorSet::from_matrix(
            camera.grid().clone(),
            filtered.channels() * lls::dyn3(first.map.matrix()),
        )
        .unwrap();
        let second = optimize_luther(&refit, &cmfs, eps, 500).unwrap();
        // Restarting from the converged iterate cannot find real improvement.
        let drift = (second.trace.final_objective() - first.trace.final_objective()).abs();
        assert!(drift <= 1e-6 * (1.0 + first.trace.final_objective()), "drift {drift}");
    }

    #[test]
    fn filter_improves_vora_value_for_random_cameras() {
        let cmfs = tables::reference_cmfs();
        let mut rng = ChaCha8Rng::seed_from_u64(66);
        for _ in 0..5 {
            let camera = random_camera(&mut rng);
            let result = optimize_luther(&camera, &cmfs, 1e-10, 500).unwrap();
            assert!(
                result.vora_after >= result.vora_before - 1e-9,
                "vora {} -> {}",
                result.vora_before,
                result.vora_after
            );
        }
    }

    #[test]
    fn flags_filter_with_nonpositive_entry() {
        let grid = SpectralGrid::default_visible();
        let mut values = vec![0.5; 31];
        values[7] = 0.0;
        let f = FilterCurve::new(grid, values).unwrap();
        let report = check_positivity(&f);
        assert!(!report.all_positive);
        assert_eq!(report.nonpositive_wavelengths_nm, vec![470.0]);
        assert_eq!(report.min_wavelength_nm, 470.0);
    }

    #[test]
    fn rejects_bad_parameters() {
        let cmfs = tables::reference_cmfs();
        assert!(optimize_luther(&cmfs, &cmfs, 0.0, 10).is_err());
        assert!(optimize_luther(&cmfs, &cmfs, 1e-8, 0).is_err());
    }
}
