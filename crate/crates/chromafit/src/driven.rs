//! Data-driven filter optimisation: find the filter (and per-light 3x3
//! corrections) that best map measured camera responses onto XYZ ground truth
//! over one or many lighting conditions, optionally restricted to a smooth
//! basis with transmittance bounds.
//!
//! The alternation solves the correction maps first (closed form per light),
//! then the filter (unconstrained least squares, or a QP when positivity or
//! basis/bound constraints are in force). When a basis constraint is active
//! the effective basis changes every iteration: the product of all previous
//! per-iteration filters must stay inside `span(B)` and the transmittance
//! box, so the current subproblem is solved against the rescaled basis.

use nalgebra::{DMatrix, DVector, Matrix3};

use crate::basis::BasisMatrix;
use crate::error::{Error, Result};
use crate::lls;
use crate::luther::AlsTrace;
use crate::solvers::{solve_qp, BoxLinearConstraints};
use crate::spectral::{
    check_same_grid, ColorSignalSet, CorrectionMatrix, FilterCurve, SensorSet,
};

/// Which XYZ ground truth each lighting condition is regressed onto.
#[derive(Debug, Clone)]
pub enum TargetMode {
    /// Every measurement light predicts its own XYZs.
    PerLight,
    /// All measurement lights predict the XYZs of one designated target
    /// condition (e.g. a reference light that cannot be physically realised).
    FixedTarget(ColorSignalSet),
    /// Exactly one measurement light, one target (the degenerate case).
    SingleLight,
}

/// A training setup: the color-signal sets to measure under, the target mode,
/// and the observer whose tristimuli are ground truth.
#[derive(Debug, Clone)]
pub struct Scenario {
    signal_sets: Vec<ColorSignalSet>,
    mode: TargetMode,
    cmfs: SensorSet,
    targets: Vec<DMatrix<f64>>,
}

impl Scenario {
    pub fn new(
        signal_sets: Vec<ColorSignalSet>,
        mode: TargetMode,
        cmfs: SensorSet,
    ) -> Result<Self> {
        if signal_sets.is_empty() {
            return Err(Error::InvalidData("scenario with no signal sets".into()));
        }
        for set in &signal_sets {
            check_same_grid(set.grid(), cmfs.grid(), "scenario signal set")?;
        }
        match &mode {
            TargetMode::SingleLight if signal_sets.len() != 1 => {
                return Err(Error::InvalidData(format!(
                    "single-light scenario with {} signal sets",
                    signal_sets.len()
                )));
            }
            TargetMode::FixedTarget(target) => {
                check_same_grid(target.grid(), cmfs.grid(), "scenario target set")?;
                for set in &signal_sets {
                    if set.signal_count() != target.signal_count() {
                        return Err(Error::ShapeMismatch(format!(
                            "signal set `{}` has {} columns but the target has {}",
                            set.label(),
                            set.signal_count(),
                            target.signal_count()
                        )));
                    }
                }
            }
            _ => {}
        }
        let targets = match &mode {
            TargetMode::FixedTarget(target) => {
                let t = target.signals().transpose() * cmfs.channels();
                signal_sets.iter().map(|_| t.clone()).collect()
            }
            TargetMode::PerLight | TargetMode::SingleLight => signal_sets
                .iter()
                .map(|set| set.signals().transpose() * cmfs.channels())
                .collect(),
        };
        Ok(Scenario {
            signal_sets,
            mode,
            cmfs,
            targets,
        })
    }

    pub fn signal_sets(&self) -> &[ColorSignalSet] {
        &self.signal_sets
    }

    pub fn mode(&self) -> &TargetMode {
        &self.mode
    }

    pub fn cmfs(&self) -> &SensorSet {
        &self.cmfs
    }

    pub fn condition_count(&self) -> usize {
        self.signal_sets.len()
    }

    /// Per-condition ground-truth tristimulus matrices.
    pub fn targets(&self) -> &[DMatrix<f64>] {
        &self.targets
    }

    /// Squared Frobenius norm of all targets: the natural magnitude for
    /// judging whether an objective value is effectively zero.
    pub fn target_scale(&self) -> f64 {
        self.targets.iter().map(|t| t.norm_squared()).sum()
    }
}

/// Filter constraints for the data-driven optimisation. `f_max` defaults to 1
/// (fully transmissive); `f_min` must be a nonnegative value below it.
#[derive(Debug, Clone)]
pub enum ConstraintSpec {
    Unconstrained,
    /// Per-iteration filters constrained nonnegative.
    PositiveOnly,
    /// Filter restricted to `span(basis)` with `f_min <= f <= f_max`.
    BasisBounded {
        basis: BasisMatrix,
        f_min: f64,
        f_max: f64,
    },
}

impl ConstraintSpec {
    pub fn basis_bounded(basis: BasisMatrix, f_min: f64) -> Result<Self> {
        Self::basis_bounded_with_max(basis, f_min, 1.0)
    }

    pub fn basis_bounded_with_max(basis: BasisMatrix, f_min: f64, f_max: f64) -> Result<Self> {
        if !(f_min >= 0.0 && f_min < f_max && f_max.is_finite()) {
            return Err(Error::InvalidArgument(format!(
                "need 0 <= f_min < f_max, got f_min {f_min}, f_max {f_max}"
            )));
        }
        Ok(ConstraintSpec::BasisBounded {
            basis,
            f_min,
            f_max,
        })
    }
}

#[derive(Debug, Clone)]
pub struct DataResult {
    /// Accumulated filter including the seed.
    pub filter: FilterCurve,
    /// Accumulated per-light correction maps.
    pub maps: Vec<CorrectionMatrix>,
    pub trace: AlsTrace,
    /// Provenance of the seed filter (e.g. "ones", "luther", "seed_042").
    pub seed_id: String,
    /// Whether the seed had to be projected into the constraint set.
    pub seed_projected: bool,
}

/// Smallest accumulated-filter magnitude the evolving-basis rescaling will
/// accept before giving up.
const ACCUM_FLOOR: f64 = 1e-12;

/// Tolerance for accepting a seed as already satisfying the constraints.
const SEED_BOUND_TOL: f64 = 1e-9;
const SEED_SPAN_TOL: f64 = 1e-7;

pub fn optimize_data(
    camera: &SensorSet,
    scenario: &Scenario,
    seed: &FilterCurve,
    cons: &ConstraintSpec,
    eps: f64,
    max_iter: usize,
) -> Result<DataResult> {
    optimize_data_labeled(camera, scenario, seed, "custom", cons, eps, max_iter)
}

pub fn optimize_data_labeled(
    camera: &SensorSet,
    scenario: &Scenario,
    seed: &FilterCurve,
    seed_id: &str,
    cons: &ConstraintSpec,
    eps: f64,
    max_iter: usize,
) -> Result<DataResult> {
    check_same_grid(camera.grid(), scenario.cmfs().grid(), "optimize_data")?;
    check_same_grid(camera.grid(), seed.grid(), "optimize_data seed")?;
    if eps.is_nan() || eps <= 0.0 {
        return Err(Error::InvalidArgument(format!(
            "eps must be positive, got {eps}"
        )));
    }
    if max_iter == 0 {
        return Err(Error::InvalidArgument("max_iter must be at least 1".into()));
    }

    let n = camera.grid().len();
    let cnt = scenario.condition_count();
    let signals: Vec<&DMatrix<f64>> = scenario.signal_sets().iter().map(|s| s.signals()).collect();
    let targets: Vec<&DMatrix<f64>> = scenario.targets.iter().collect();

    // Seed: keep as-is when feasible, otherwise project into the constraint
    // set and remember that we did.
    let (seed_values, seed_projected) = prepare_seed(seed, cons)?;

    // Q0_j = diag(seed) Q for every condition.
    let mut iterates: Vec<DMatrix<f64>> = {
        let mut q0 = camera.channels().clone();
        for i in 0..n {
            for k in 0..3 {
                q0[(i, k)] *= seed_values[i];
            }
        }
        vec![q0; cnt]
    };

    let mut accum = seed_values;
    let mut map_acc: Vec<Matrix3<f64>> = vec![Matrix3::identity(); cnt];
    let mut objectives = Vec::new();
    let mut regularized_steps = 0usize;
    let mut converged = false;
    let mut iterations = 0usize;

    for iteration in 1..=max_iter {
        iterations = iteration;

        // Per-light correction maps against the current iterates.
        let mut maps = Vec::with_capacity(cnt);
        let mut ridged_any = false;
        for j in 0..cnt {
            let measured = signals[j].transpose() * &iterates[j];
            let (m, ridged) = lls::fit_linear_map_ridged(&measured, targets[j])?;
            ridged_any |= ridged;
            maps.push(m);
        }

        // Filter subproblem on the stacked vectorized system.
        let iterate_refs: Vec<&DMatrix<f64>> = iterates.iter().collect();
        let system = lls::build_filter_system(&signals, &iterate_refs, &maps, &targets)?;
        let step_filter = match cons {
            ConstraintSpec::Unconstrained => {
                let (f, ridged) = system.solve_unconstrained();
                ridged_any |= ridged;
                f
            }
            ConstraintSpec::PositiveOnly => {
                let box_cons = BoxLinearConstraints::nonnegative(DMatrix::identity(n, n))?;
                let sol = solve_qp(system.design(), system.target(), &box_cons)?;
                ridged_any |= sol.ridged;
                sol.coefficients
            }
            ConstraintSpec::BasisBounded {
                basis,
                f_min,
                f_max,
            } => {
                // The accumulated filter must stay a basis synthesis inside
                // the box, so the subproblem sees V rescaled by the inverse
                // of the accumulated filter.
                if let Some(i) = (0..n).find(|&i| accum[i].abs() < ACCUM_FLOOR) {
                    return Err(Error::InvalidData(format!(
                        "accumulated filter vanished at {} nm during iteration {iteration}; \
                         raise f_min or loosen the basis constraint",
                        camera.grid().wavelengths()[i]
                    )));
                }
                let mut scaled = system.design().clone();
                for i in 0..n {
                    let inv = 1.0 / accum[i];
                    for r in 0..scaled.nrows() {
                        scaled[(r, i)] *= inv;
                    }
                }
                let box_cons =
                    BoxLinearConstraints::uniform(basis.matrix().clone(), *f_min, *f_max)?;
                let sol = solve_qp(&scaled, system.target(), &box_cons)?;
                ridged_any |= sol.ridged;
                let new_accum = basis.matrix() * &sol.coefficients;
                let step = DVector::from_fn(n, |i, _| new_accum[i] / accum[i]);
                accum = new_accum;
                step
            }
        };
        if ridged_any {
            regularized_steps += 1;
        }

        if !matches!(cons, ConstraintSpec::BasisBounded { .. }) {
            accum.component_mul_assign(&step_filter);
        }

        // Advance every condition's iterate and measure movement + objective.
        let mut movement: f64 = 0.0;
        let mut objective_value = 0.0;
        for j in 0..cnt {
            let mut filtered = iterates[j].clone();
            for i in 0..n {
                for k in 0..3 {
                    filtered[(i, k)] *= step_filter[i];
                }
            }
            let next = filtered * lls::dyn3(&maps[j]);
            if next.iter().any(|v| !v.is_finite()) {
                return Err(Error::NonFinite {
                    iteration,
                    context: format!("data-driven iterate for condition {j}"),
                });
            }
            movement = movement.max((&next - &iterates[j]).norm_squared());
            objective_value += (signals[j].transpose() * &next - targets[j]).norm_squared();
            map_acc[j] *= maps[j];
            iterates[j] = next;
        }
        objectives.push(objective_value);

        if movement < eps {
            converged = true;
            break;
        }
    }

    let filter = FilterCurve::from_vector(camera.grid().clone(), accum)?;
    let maps = map_acc
        .into_iter()
        .map(CorrectionMatrix::new)
        .collect::<Result<Vec<_>>>()?;
    Ok(DataResult {
        filter,
        maps,
        trace: AlsTrace {
            objectives,
            iterations,
            converged,
            epsilon: eps,
            regularized_steps,
        },
        seed_id: seed_id.to_string(),
        seed_projected,
    })
}

fn prepare_seed(seed: &FilterCurve, cons: &ConstraintSpec) -> Result<(DVector<f64>, bool)> {
    match cons {
        ConstraintSpec::Unconstrained | ConstraintSpec::PositiveOnly => {
            Ok((seed.values().clone(), false))
        }
        ConstraintSpec::BasisBounded {
            basis,
            f_min,
            f_max,
        } => {
            let within_bounds = seed.min_value() >= f_min - SEED_BOUND_TOL
                && seed.max_value() <= f_max + SEED_BOUND_TOL;
            if within_bounds {
                let c = basis.coefficients_for(seed.values());
                let span_residual = (basis.synthesize(&c)? - seed.values()).amax();
                if span_residual <= SEED_SPAN_TOL {
                    return Ok((seed.values().clone(), false));
                }
            }
            // Project: nearest basis synthesis inside the transmittance box.
            let n = seed.values().len();
            let cons_box = BoxLinearConstraints::uniform(basis.matrix().clone(), *f_min, *f_max)?;
            let sol = solve_qp(&DMatrix::identity(n, n), seed.values(), &cons_box)?;
            Ok((basis.matrix() * sol.coefficients, true))
        }
    }
}

/// The training objective `sum_j ||C_j' diag(f) Q M_j - target_j||_F^2` at an
/// arbitrary filter and map collection.
pub fn objective(
    camera: &SensorSet,
    scenario: &Scenario,
    filter: &FilterCurve,
    maps: &[CorrectionMatrix],
) -> Result<f64> {
    check_same_grid(camera.grid(), scenario.cmfs().grid(), "objective")?;
    check_same_grid(camera.grid(), filter.grid(), "objective")?;
    if maps.len() != scenario.condition_count() {
        return Err(Error::ShapeMismatch(format!(
            "{} maps for {} lighting conditions",
            maps.len(),
            scenario.condition_count()
        )));
    }
    let n = camera.grid().len();
    let mut filtered = camera.channels().clone();
    for i in 0..n {
        for k in 0..3 {
            filtered[(i, k)] *= filter.values()[i];
        }
    }
    let mut total = 0.0;
    for (j, set) in scenario.signal_sets().iter().enumerate() {
        let predicted = set.signals().transpose() * &filtered * lls::dyn3(maps[j].matrix());
        total += (predicted - &scenario.targets[j]).norm_squared();
    }
    Ok(total)
}
