//! Acceptance suite: one line per criterion, nonzero exit if any fails.
//!
//! Criteria 4 and 5 need measured datasets (camera sensitivities and the
//! survey reflectance set) that are not distributed with the repository;
//! point `CHROMAFIT_DATA_DIR` at a directory containing them (see README for
//! the expected layout) to activate those rows. Without the data they report
//! SKIPPED and the remaining criteria carry acceptance.

use std::path::{Path, PathBuf};
use std::time::{Duration, Instant};

use nalgebra::{DMatrix, DVector, Matrix3};
use rand::prelude::*;
use rand_chacha::ChaCha8Rng;

use chromafit::basis::cosine_basis;
use chromafit::driven::{
    optimize_data_labeled, ConstraintSpec, Scenario, TargetMode,
};
use chromafit::luther::optimize_luther;
use chromafit::seeding::{generate_seed_set, multi_start, MetricData, SelectionMetric};
use chromafit::solvers::{solve_qp, BoxLinearConstraints};
use chromafit::spectral::{
    color_signal, ColorSignalSet, FilterCurve, SensorSet, SpectralGrid,
};
use chromafit::{lls, metrics, synth, tables};

enum Status {
    Pass,
    Fail(String),
    Skipped(String),
}

struct Criterion {
    label: &'static str,
    status: Status,
    elapsed: Duration,
}

type CriterionFn = fn() -> Status;

fn main() {
    let criteria: Vec<(&'static str, CriterionFn)> = vec![
        ("criterion 1 (property suite)", criterion_1),
        ("criterion 2 (synthetic exact recovery)", criterion_2),
        ("criterion 3 (maximum-ignorance equivalence)", criterion_3),
        ("criterion 4 (measured-data error statistics)", criterion_4),
        ("criterion 5 (multi-camera Vora sweep)", criterion_5),
        ("criterion 6 (desk-scale multi-start)", criterion_6),
    ];

    let mut all_pass = true;
    let mut results = Vec::new();
    for (label, run) in criteria {
        let start = Instant::now();
        let status = run();
        let elapsed = start.elapsed();
        if matches!(status, Status::Fail(_)) {
            all_pass = false;
        }
        results.push(Criterion {
            label,
            status,
            elapsed,
        });
    }

    println!();
    for c in &results {
        let line = match &c.status {
            Status::Pass => format!("{}: PASS ({:.1} s)", c.label, c.elapsed.as_secs_f64()),
            Status::Fail(msg) => format!(
                "{}: FAIL ({:.1} s) -- {msg}",
                c.label,
                c.elapsed.as_secs_f64()
            ),
            Status::Skipped(msg) => format!("{}: SKIPPED -- {msg}", c.label),
        };
        println!("{line}");
    }
    std::process::exit(if all_pass { 0 } else { 1 });
}

fn fail(msg: impl Into<String>) -> Status {
    Status::Fail(msg.into())
}

fn budget(elapsed: Duration, limit_s: f64, what: &str) -> Option<Status> {
    if elapsed.as_secs_f64() >= limit_s {
        Some(fail(format!(
            "{what} took {:.1} s, budget {limit_s} s",
            elapsed.as_secs_f64()
        )))
    } else {
        None
    }
}

fn random_positive_camera(rng: &mut ChaCha8Rng, grid: &SpectralGrid) -> SensorSet {
    loop {
        let m = DMatrix::from_fn(grid.len(), 3, |_, _| rng.random_range(0.05..1.0));
        if let Ok(s) = SensorSet::new(grid.clone(), m) {
            return s;
        }
    }
}

fn random_rank3_target(rng: &mut ChaCha8Rng, grid: &SpectralGrid) -> SensorSet {
    loop {
        let m = DMatrix::from_fn(grid.len(), 3, |_, _| rng.random_range(-1.0..1.0));
        if let Ok(s) = SensorSet::new(grid.clone(), m) {
            return s;
        }
    }
}

// --- criterion 1: property suite, no external data, < 60 s ----------------

fn criterion_1() -> Status {
    let start = Instant::now();
    let grid = SpectralGrid::default_visible();
    let cmfs = tables::reference_cmfs();
    let mut rng = ChaCha8Rng::seed_from_u64(101);

    // ALS monotonicity over 50 random rank-3 problems.
    for case in 0..50 {
        let camera = random_positive_camera(&mut rng, &grid);
        let target = if case % 2 == 0 {
            cmfs.clone()
        } else {
            random_rank3_target(&mut rng, &grid)
        };
        let result = match optimize_luther(&camera, &target, 1e-10, 300) {
            Ok(r) => r,
            Err(e) => return fail(format!("monotonicity case {case}: {e}")),
        };
        let scale = result.trace.objectives[0].max(1e-300);
        for (i, w) in result.trace.objectives.windows(2).enumerate() {
            if w[1] - w[0] > 1e-12 * scale.max(w[0]) {
                return fail(format!(
                    "monotonicity violated in case {case} at iteration {i}: {} -> {}",
                    w[0], w[1]
                ));
            }
        }

        // Scale-ambiguity invariance on the converged pair, at a scale that
        // actually moves the numbers.
        let base =
            chromafit::luther::objective(&camera, &target, &result.filter, &result.map).unwrap();
        let scale = 0.25 + 0.1 * (case as f64);
        let moved_filter = FilterCurve::new(
            grid.clone(),
            result.filter.values().iter().map(|v| v * scale).collect(),
        )
        .unwrap();
        let moved_map =
            chromafit::spectral::CorrectionMatrix::new(result.map.matrix() / scale).unwrap();
        let moved =
            chromafit::luther::objective(&camera, &target, &moved_filter, &moved_map).unwrap();
        if (base - moved).abs() > 1e-12 * (1.0 + base) {
            return fail(format!(
                "scale ambiguity broke in case {case}: {base} vs {moved}"
            ));
        }
    }

    // Vectorization equivalence on 100 random small instances.
    for case in 0..100 {
        let nwl = rng.random_range(2..=8usize);
        let cnt = rng.random_range(1..=3usize);
        let mut signals = Vec::new();
        let mut sensors = Vec::new();
        let mut maps = Vec::new();
        let mut targets = Vec::new();
        for _ in 0..cnt {
            let n = rng.random_range(1..=5usize);
            signals.push(DMatrix::from_fn(nwl, n, |_, _| rng.random_range(0.0..1.0)));
            sensors.push(DMatrix::from_fn(nwl, 3, |_, _| rng.random_range(-1.0..1.0)));
            maps.push(Matrix3::from_fn(|_, _| rng.random_range(-1.0..1.0)));
            targets.push(DMatrix::from_fn(n, 3, |_, _| rng.random_range(-1.0..1.0)));
        }
        let system = lls::build_filter_system(
            &signals.iter().collect::<Vec<_>>(),
            &sensors.iter().collect::<Vec<_>>(),
            &maps,
            &targets.iter().collect::<Vec<_>>(),
        )
        .unwrap();
        let f = DVector::from_fn(nwl, |_, _| rng.random_range(-1.0..1.0));
        let via_system = system.residual_sq(&f);
        let mut direct = 0.0;
        for j in 0..cnt {
            let mut filtered = sensors[j].clone();
            for i in 0..nwl {
                for k in 0..3 {
                    filtered[(i, k)] *= f[i];
                }
            }
            direct += (signals[j].transpose() * filtered * lls::dyn3(&maps[j]) - &targets[j])
                .norm_squared();
        }
        if (via_system - direct).abs() > 1e-10 * direct.max(1.0) {
            return fail(format!(
                "vectorization mismatch in case {case}: {via_system} vs {direct}"
            ));
        }
    }

    // QP: KKT residuals and dense grid-search agreement on 5-D boxes.
    for case in 0..5 {
        let design = DMatrix::from_fn(8, 5, |_, _| rng.random_range(-0.3..0.3));
        let target = DVector::from_fn(8, |_, _| rng.random_range(-1.0..1.0));
        let cons = BoxLinearConstraints::uniform(DMatrix::identity(5, 5), 0.0, 0.1).unwrap();
        let sol = match solve_qp(&design, &target, &cons) {
            Ok(s) => s,
            Err(e) => return fail(format!("QP case {case}: {e}")),
        };
        if sol.stationarity >= 1e-7 {
            return fail(format!("QP case {case}: stationarity {}", sol.stationarity));
        }
        if sol.max_violation > 1e-9 {
            return fail(format!("QP case {case}: violation {}", sol.max_violation));
        }
        if sol.complementary_slackness >= 1e-7 {
            return fail(format!(
                "QP case {case}: complementary slackness {}",
                sol.complementary_slackness
            ));
        }
        let qp_obj = (&design * &sol.coefficients - &target).norm_squared();
        let mut best = f64::INFINITY;
        let mut idx = [0usize; 5];
        loop {
            let c = DVector::from_fn(5, |i, _| idx[i] as f64 * 0.01);
            best = best.min((&design * &c - &target).norm_squared());
            let mut d = 0;
            loop {
                idx[d] += 1;
                if idx[d] <= 10 {
                    break;
                }
                idx[d] = 0;
                d += 1;
                if d == 5 {
                    break;
                }
            }
            if d == 5 {
                break;
            }
        }
        if qp_obj > best + 1e-12 {
            return fail(format!("QP case {case}: {qp_obj} above grid best {best}"));
        }
        if (qp_obj - best).abs() >= 1e-4 {
            return fail(format!(
                "QP case {case}: grid gap {} above 1e-4",
                (qp_obj - best).abs()
            ));
        }
    }

    // Vora-Value invariance under full-rank channel recombination.
    for case in 0..20 {
        let camera = random_positive_camera(&mut rng, &grid);
        let k: Matrix3<f64> = loop {
            let k: Matrix3<f64> = Matrix3::from_fn(|_, _| rng.random_range(-1.0..1.0));
            if k.determinant().abs() > 1e-3 {
                break k;
            }
        };
        let recombined =
            SensorSet::new(grid.clone(), camera.channels() * lls::dyn3(&k)).unwrap();
        let a = metrics::vora_value(&camera, &cmfs).unwrap();
        let b = metrics::vora_value(&recombined, &cmfs).unwrap();
        if (a - b).abs() > 1e-10 {
            return fail(format!("Vora invariance case {case}: {a} vs {b}"));
        }
        if !(0.0..=1.0 + 1e-12).contains(&a) {
            return fail(format!("Vora out of range: {a}"));
        }
    }
    if (metrics::vora_value(&cmfs, &cmfs).unwrap() - 1.0).abs() > 1e-12 {
        return fail("Vora of identical sets is not 1");
    }

    if let Some(status) = budget(start.elapsed(), 60.0, "property suite") {
        return status;
    }
    Status::Pass
}

// --- criterion 2: synthetic exact-solution recovery, 20/20, < 10 s --------

fn criterion_2() -> Status {
    let start = Instant::now();
    let grid = SpectralGrid::default_visible();
    let mut rng = ChaCha8Rng::seed_from_u64(202);

    for case in 0..20 {
        let camera = random_positive_camera(&mut rng, &grid);
        let f_star = DVector::from_fn(grid.len(), |_, _| rng.random_range(0.2..1.0));
        let map: Matrix3<f64> = loop {
            let m = Matrix3::from_fn(|_, _| rng.random_range(0.1..1.0));
            let sv = m.singular_values();
            if sv.min() >= sv.max() * 0.05 {
                break m;
            }
        };
        let mut x = camera.channels().clone();
        for i in 0..grid.len() {
            for ch in 0..3 {
                x[(i, ch)] *= f_star[i];
            }
        }
        let x = x * lls::dyn3(&map);
        let target = match SensorSet::new(grid.clone(), x.clone()) {
            Ok(t) => t,
            Err(e) => return fail(format!("construction {case} degenerate: {e}")),
        };

        let result = match optimize_luther(&camera, &target, 1e-16, 2000) {
            Ok(r) => r,
            Err(e) => return fail(format!("recovery {case}: {e}")),
        };
        let goal = 1e-8 * x.norm_squared();
        if result.trace.final_objective() >= goal {
            return fail(format!(
                "recovery {case}: objective {:.3e} above {:.3e}",
                result.trace.final_objective(),
                goal
            ));
        }
        let positivity = result.positivity();
        if !positivity.all_positive {
            return fail(format!(
                "recovery {case}: filter dips to {:.3e}",
                positivity.min_value
            ));
        }
    }

    if let Some(status) = budget(start.elapsed(), 10.0, "synthetic recovery") {
        return status;
    }
    Status::Pass
}

// --- criterion 3: identity signals reproduce the Luther objective ---------

fn criterion_3() -> Status {
    let grid = SpectralGrid::default_visible();
    let cmfs = tables::reference_cmfs();

    for trial in 0..10u64 {
        let camera = match synth::random_smooth_camera(&grid, 3000 + trial) {
            Ok(c) => c,
            Err(e) => return fail(format!("camera {trial}: {e}")),
        };
        let luther = match optimize_luther(&camera, &cmfs, 1e-16, 100_000) {
            Ok(r) => r,
            Err(e) => return fail(format!("luther {trial}: {e}")),
        };
        let scenario = Scenario::new(
            vec![ColorSignalSet::maximum_ignorance(grid.clone())],
            TargetMode::PerLight,
            cmfs.clone(),
        )
        .unwrap();
        let data = match optimize_data_labeled(
            &camera,
            &scenario,
            &FilterCurve::ones(grid.clone()),
            "ones",
            &ConstraintSpec::Unconstrained,
            1e-16,
            100_000,
        ) {
            Ok(r) => r,
            Err(e) => return fail(format!("data {trial}: {e}")),
        };
        let a = luther.trace.final_objective();
        let b = data.trace.final_objective();
        if (a - b).abs() > 1e-8 * a.max(b).max(1e-300) {
            return fail(format!(
                "camera {trial}: luther {a:.12e} vs data {b:.12e}"
            ));
        }
    }
    Status::Pass
}

// --- criteria 4 and 5: measured datasets ----------------------------------

fn dataset_dir() -> Option<PathBuf> {
    if let Some(dir) = std::env::var_os(tables::DATA_DIR_ENV) {
        let p = PathBuf::from(dir);
        if p.is_dir() {
            return Some(p);
        }
    }
    let fallback = Path::new(env!("CARGO_MANIFEST_DIR")).join("../../data");
    fallback.is_dir().then_some(fallback)
}

fn load_sensor(path: &Path, grid: &SpectralGrid) -> chromafit::Result<SensorSet> {
    let table = tables::load_table(path)?;
    tables::sensor_set_from_table(&table, grid)
}

fn criterion_4() -> Status {
    let Some(dir) = dataset_dir() else {
        return Status::Skipped(format!(
            "set {} to a directory with cameras/canon_5d_mark_ii.csv and sfu_reflectances.csv",
            tables::DATA_DIR_ENV
        ));
    };
    let camera_path = dir.join("cameras/canon_5d_mark_ii.csv");
    let refl_path = dir.join("sfu_reflectances.csv");
    if !camera_path.is_file() || !refl_path.is_file() {
        return Status::Skipped(format!(
            "missing {} or {}",
            camera_path.display(),
            refl_path.display()
        ));
    }

    let start = Instant::now();
    let grid = SpectralGrid::default_visible();
    let cmfs = tables::reference_cmfs();
    let camera = match load_sensor(&camera_path, &grid) {
        Ok(c) => c,
        Err(e) => return fail(format!("loading camera: {e}")),
    };
    let reflectances = match tables::load_table(&refl_path)
        .and_then(|t| tables::matrix_from_table(&t, &grid))
    {
        Ok(r) => r,
        Err(e) => return fail(format!("loading reflectances: {e}")),
    };

    let luther = match optimize_luther(&camera, &cmfs, 1e-10, 2000) {
        Ok(r) => r,
        Err(e) => return fail(format!("luther: {e}")),
    };

    let mut checks: Vec<(String, f64, f64)> = Vec::new();
    for which in [
        tables::ReferenceIlluminant::D65,
        tables::ReferenceIlluminant::A,
    ] {
        let light = tables::reference_illuminant(which);
        let name = which.name();
        let eval = |filter: Option<&FilterCurve>| -> chromafit::Result<f64> {
            Ok(metrics::evaluate(
                &camera,
                filter,
                std::slice::from_ref(&light),
                &reflectances,
                &cmfs,
            )?
            .aggregate
            .mean)
        };
        let native = match eval(None) {
            Ok(v) => v,
            Err(e) => return fail(format!("NAT {name}: {e}")),
        };
        let luth = match eval(Some(&luther.filter)) {
            Ok(v) => v,
            Err(e) => return fail(format!("LUTH {name}: {e}")),
        };
        let expected_nat = if name == "D65" { 1.65 } else { 2.30 };
        let expected_luth = if name == "D65" { 0.46 } else { 0.64 };
        checks.push((format!("NAT {name}"), native, expected_nat));
        checks.push((format!("LUTH {name}"), luth, expected_luth));

        if name == "D65" {
            let signals = match color_signal(&light, &reflectances, name) {
                Ok(s) => s,
                Err(e) => return fail(format!("signals {name}: {e}")),
            };
            let scenario =
                Scenario::new(vec![signals], TargetMode::SingleLight, cmfs.clone()).unwrap();
            let data = match optimize_data_labeled(
                &camera,
                &scenario,
                &luther.filter,
                "luther",
                &ConstraintSpec::Unconstrained,
                1e-10,
                2000,
            ) {
                Ok(r) => r,
                Err(e) => return fail(format!("DATA {name}: {e}")),
            };
            let mean = match eval(Some(&data.filter)) {
                Ok(v) => v,
                Err(e) => return fail(format!("DATA {name} eval: {e}")),
            };
            checks.push((format!("DATA {name}"), mean, 0.38));
        }
    }

    for (label, got, expected) in &checks {
        println!("  {label}: mean dE {got:.3} (reference {expected:.2})");
        if (got - expected).abs() > 0.15 {
            return fail(format!(
                "{label}: mean {got:.3} outside {expected:.2} +/- 0.15"
            ));
        }
    }
    if let Some(status) = budget(start.elapsed(), 120.0, "measured-data statistics") {
        return status;
    }
    Status::Pass
}

fn criterion_5() -> Status {
    let Some(dir) = dataset_dir() else {
        return Status::Skipped(format!(
            "set {} to a directory with cameras/*.csv (28 cameras)",
            tables::DATA_DIR_ENV
        ));
    };
    let cameras_dir = dir.join("cameras");
    let mut camera_files: Vec<PathBuf> = match std::fs::read_dir(&cameras_dir) {
        Ok(entries) => entries
            .filter_map(|e| e.ok())
            .map(|e| e.path())
            .filter(|p| p.extension().is_some_and(|x| x == "csv"))
            .collect(),
        Err(_) => {
            return Status::Skipped(format!("no cameras directory at {}", cameras_dir.display()))
        }
    };
    camera_files.sort();
    if camera_files.len() < 28 {
        return Status::Skipped(format!(
            "found {} camera files at {}, need the 28-camera set",
            camera_files.len(),
            cameras_dir.display()
        ));
    }

    let grid = SpectralGrid::default_visible();
    let cmfs = tables::reference_cmfs();
    let mut native_values = Vec::new();
    let mut filtered_values = Vec::new();
    for path in &camera_files {
        let camera = match load_sensor(path, &grid) {
            Ok(c) => c,
            Err(e) => return fail(format!("{}: {e}", path.display())),
        };
        let result = match optimize_luther(&camera, &cmfs, 1e-10, 2000) {
            Ok(r) => r,
            Err(e) => return fail(format!("{}: {e}", path.display())),
        };
        if result.vora_after <= result.vora_before {
            return fail(format!(
                "{}: filtered Vora {:.4} does not exceed native {:.4}",
                path.display(),
                result.vora_after,
                result.vora_before
            ));
        }
        native_values.push(result.vora_before);
        filtered_values.push(result.vora_after);
    }
    let mean = |v: &[f64]| v.iter().sum::<f64>() / v.len() as f64;
    let native_mean = mean(&native_values);
    let filtered_mean = mean(&filtered_values);
    println!("  native mean Vora {native_mean:.4}, filtered mean Vora {filtered_mean:.4}");
    if (native_mean - 0.918).abs() > 0.01 {
        return fail(format!("native mean {native_mean:.4} outside 0.918 +/- 0.01"));
    }
    if (filtered_mean - 0.961).abs() > 0.01 {
        return fail(format!(
            "filtered mean {filtered_mean:.4} outside 0.961 +/- 0.01"
        ));
    }
    Status::Pass
}

// --- criterion 6: desk-scale multi-start, < 10 min -------------------------

fn criterion_6() -> Status {
    let start = Instant::now();
    let grid = SpectralGrid::default_visible();
    let cmfs = tables::reference_cmfs();
    let camera = synth::gaussian_camera(&grid).unwrap();
    let reflectances = synth::smooth_reflectances(&grid, 60, 13);
    let lights = vec![
        tables::reference_illuminant(tables::ReferenceIlluminant::D65),
        tables::reference_illuminant(tables::ReferenceIlluminant::A),
    ];
    let signal_sets: Vec<ColorSignalSet> = lights
        .iter()
        .map(|e| color_signal(e, &reflectances, e.name().unwrap_or("light")).unwrap())
        .collect();
    let scenario = Scenario::new(signal_sets, TargetMode::PerLight, cmfs.clone()).unwrap();
    let basis = cosine_basis(&grid, 6).unwrap();
    let cons = ConstraintSpec::basis_bounded(basis.clone(), 0.2).unwrap();
    let eps = 1e-8;
    let max_iter = 500;

    let mean_de = |filter: &FilterCurve| -> f64 {
        metrics::mean_delta_e(&camera, Some(filter), &lights, &reflectances, &cmfs).unwrap()
    };

    let ones = match optimize_data_labeled(
        &camera,
        &scenario,
        &FilterCurve::ones(grid.clone()),
        "ones",
        &cons,
        eps,
        max_iter,
    ) {
        Ok(r) => r,
        Err(e) => return fail(format!("ones-seeded run: {e}")),
    };
    let ones_de = mean_de(&ones.filter);

    let luther_seed = match optimize_luther(&camera, &cmfs, eps, max_iter) {
        Ok(r) => r.filter,
        Err(e) => return fail(format!("luther seed: {e}")),
    };
    let luther = match optimize_data_labeled(
        &camera,
        &scenario,
        &luther_seed,
        "luther",
        &cons,
        eps,
        max_iter,
    ) {
        Ok(r) => r,
        Err(e) => return fail(format!("luther-seeded run: {e}")),
    };
    let luther_de = mean_de(&luther.filter);

    let seeds = match generate_seed_set(&basis, 0.2, 1.0, 500, 1.0, 41) {
        Ok(s) => s,
        Err(e) => return fail(format!("seed generation: {e}")),
    };
    let metric = SelectionMetric::MeanDeltaE(MetricData {
        illuminants: lights.clone(),
        reflectances: reflectances.clone(),
    });
    let outcome = match multi_start(&camera, &scenario, &cons, &seeds, &metric, eps, max_iter) {
        Ok(o) => o,
        Err(e) => return fail(format!("multi-start: {e}")),
    };
    let best = outcome.best().unwrap();
    println!(
        "  mean dE: multistart best {:.4} ({}), ones-seeded {ones_de:.4}, luther-seeded {luther_de:.4}",
        best.metric, best.result.seed_id
    );
    if best.metric > ones_de {
        return fail(format!(
            "multistart best {:.4} worse than ones-seeded {ones_de:.4}",
            best.metric
        ));
    }
    if best.metric > luther_de {
        return fail(format!(
            "multistart best {:.4} worse than luther-seeded {luther_de:.4}",
            best.metric
        ));
    }

    // Bit-for-bit reproducibility of the whole search.
    let seeds2 = generate_seed_set(&basis, 0.2, 1.0, 500, 1.0, 41).unwrap();
    for (a, b) in seeds.filters.iter().zip(&seeds2.filters) {
        if a.values() != b.values() {
            return fail("seed regeneration differs");
        }
    }
    let outcome2 =
        match multi_start(&camera, &scenario, &cons, &seeds2, &metric, eps, max_iter) {
            Ok(o) => o,
            Err(e) => return fail(format!("multi-start rerun: {e}")),
        };
    if outcome.ranking != outcome2.ranking {
        return fail("rerun produced a different ranking");
    }
    for (&i, &j) in outcome.ranking.iter().zip(&outcome2.ranking) {
        let a = outcome.runs[i].outcome.as_ref().unwrap().metric;
        let b = outcome2.runs[j].outcome.as_ref().unwrap().metric;
        if a.to_bits() != b.to_bits() {
            return fail(format!("rerun metric differs bitwise: {a:e} vs {b:e}"));
        }
    }

    if let Some(status) = budget(start.elapsed(), 600.0, "desk-scale multi-start") {
        return status;
    }
    Status::Pass
}
