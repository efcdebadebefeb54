//! Batch workflows behind the command-line interface: load datasets, run one
//! of the four pipelines (Luther design, data-driven design, seed generation
//! plus multi-start, evaluation), and write machine-readable artifacts plus a
//! manifest sufficient to reproduce the run bit-for-bit.
//!
//! Artifact formats: JSON for structured results, CSV for anything tabular or
//! spectral. Numeric CSV output carries 9 significant digits, which keeps
//! round-tripped downstream results within 1e-7 relative.

use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use nalgebra::DMatrix;
use serde::Serialize;
use sha2::{Digest, Sha256};

use crate::basis::{cosine_basis, BasisMatrix};
use crate::driven::{optimize_data_labeled, ConstraintSpec, DataResult, Scenario, TargetMode};
use crate::error::{Error, Result};
use crate::luther::{check_positivity, optimize_luther, AlsTrace, LutherResult};
use crate::metrics::{self, EvalReport};
use crate::seeding::{self, MetricData, SeedSet, SelectionMetric};
use crate::spectral::{
    color_signal, ColorSignalSet, CorrectionMatrix, FilterCurve, SensorSet, SpectralGrid,
    Spectrum, SpectrumKind,
};
use crate::tables::{self, ReferenceIlluminant, SpectralTable};

/// Where the color-matching functions come from.
#[derive(Debug, Clone)]
pub enum CmfSource {
    Builtin,
    File(PathBuf),
}

impl CmfSource {
    pub fn parse(value: &str) -> Self {
        if value.eq_ignore_ascii_case("builtin") {
            CmfSource::Builtin
        } else {
            CmfSource::File(PathBuf::from(value))
        }
    }
}

/// Where the data-driven seed filter comes from.
#[derive(Debug, Clone)]
pub enum SeedSource {
    Ones,
    Luther,
    File(PathBuf),
}

impl SeedSource {
    pub fn parse(value: &str) -> Self {
        match value.to_ascii_lowercase().as_str() {
            "ones" => SeedSource::Ones,
            "luther" => SeedSource::Luther,
            _ => SeedSource::File(PathBuf::from(value)),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ScenarioMode {
    PerLight,
    FixedTarget,
    Single,
}

impl ScenarioMode {
    pub fn parse(value: &str) -> Result<Self> {
        match value.to_ascii_lowercase().as_str() {
            "per-light" => Ok(ScenarioMode::PerLight),
            "fixed-target" => Ok(ScenarioMode::FixedTarget),
            "single" => Ok(ScenarioMode::Single),
            other => Err(Error::InvalidArgument(format!(
                "unknown mode `{other}` (expected per-light, fixed-target or single)"
            ))),
        }
    }
}

/// Filter constraint flags as they arrive from the command line.
#[derive(Debug, Clone, Default)]
pub struct ConstraintOptions {
    pub basis_terms: Option<usize>,
    pub f_min: Option<f64>,
    pub f_max: Option<f64>,
    pub positive: bool,
}

impl ConstraintOptions {
    /// Bounds or a basis request make the run basis-bounded (a bounds-only
    /// run uses the complete cosine basis, which spans every filter);
    /// `positive` selects the per-iteration nonnegativity constraint; with
    /// nothing set the optimisation is unconstrained.
    pub fn build(&self, grid: &SpectralGrid) -> Result<ConstraintSpec> {
        if self.basis_terms.is_some() || self.f_min.is_some() || self.f_max.is_some() {
            let m = self.basis_terms.unwrap_or(grid.len());
            let basis = cosine_basis(grid, m)?;
            ConstraintSpec::basis_bounded_with_max(
                basis,
                self.f_min.unwrap_or(0.0),
                self.f_max.unwrap_or(1.0),
            )
        } else if self.positive {
            Ok(ConstraintSpec::PositiveOnly)
        } else {
            Ok(ConstraintSpec::Unconstrained)
        }
    }
}

#[derive(Debug, Serialize)]
struct InputDigest {
    path: String,
    sha256: String,
}

/// Everything needed to reproduce a run: the command, input digests, the
/// working grid, and all solver parameters.
#[derive(Debug, Serialize)]
pub struct RunManifest {
    pub command: String,
    pub tool_version: String,
    pub unix_time_secs: u64,
    pub grid_nm: Vec<f64>,
    inputs: Vec<InputDigest>,
    pub parameters: serde_json::Value,
}

impl RunManifest {
    fn new(command: &str, inputs: &[&Path], parameters: serde_json::Value) -> Result<Self> {
        let mut digests = Vec::new();
        for path in inputs {
            let bytes = std::fs::read(path).map_err(|e| Error::io(*path, e))?;
            let mut hasher = Sha256::new();
            hasher.update(&bytes);
            let digest = hasher.finalize();
            digests.push(InputDigest {
                path: path.display().to_string(),
                sha256: digest.iter().map(|b| format!("{b:02x}")).collect(),
            });
        }
        Ok(RunManifest {
            command: command.to_string(),
            tool_version: env!("CARGO_PKG_VERSION").to_string(),
            unix_time_secs: std::time::SystemTime::now()
                .duration_since(std::time::UNIX_EPOCH)
                .map(|d| d.as_secs())
                .unwrap_or(0),
            grid_nm: SpectralGrid::default_visible().wavelengths().to_vec(),
            inputs: digests,
            parameters,
        })
    }
}

fn sig9(x: f64) -> String {
    format!("{x:.8e}")
}

fn write_text(path: &Path, content: &str) -> Result<()> {
    std::fs::write(path, content).map_err(|e| Error::io(path, e))
}

fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    let mut body = serde_json::to_string_pretty(value)
        .map_err(|e| Error::InvalidData(format!("cannot serialize {}: {e}", path.display())))?;
    body.push('\n');
    write_text(path, &body)
}

fn write_filter_csv(path: &Path, filter: &FilterCurve) -> Result<()> {
    let mut out = String::from("wavelength_nm,transmittance\n");
    for (w, v) in filter
        .grid()
        .wavelengths()
        .iter()
        .zip(filter.values().iter())
    {
        let _ = writeln!(out, "{w},{}", sig9(*v));
    }
    write_text(path, &out)
}

fn write_trace_csv(path: &Path, trace: &AlsTrace) -> Result<()> {
    let mut out = String::from("iteration,objective\n");
    for (i, obj) in trace.objectives.iter().enumerate() {
        let _ = writeln!(out, "{},{}", i + 1, sig9(*obj));
    }
    write_text(path, &out)
}

fn matrix_rows(m: &CorrectionMatrix) -> [[f64; 3]; 3] {
    let mat = m.matrix();
    [
        [mat[(0, 0)], mat[(0, 1)], mat[(0, 2)]],
        [mat[(1, 0)], mat[(1, 1)], mat[(1, 2)]],
        [mat[(2, 0)], mat[(2, 1)], mat[(2, 2)]],
    ]
}

fn write_stats_csv(path: &Path, report: &EvalReport) -> Result<()> {
    let mut out = String::from("illuminant,mean,median,p90,p95,p99,max\n");
    let mut row = |name: &str, s: &metrics::ErrorStats| {
        let _ = writeln!(
            out,
            "{name},{},{},{},{},{},{}",
            sig9(s.mean),
            sig9(s.median),
            sig9(s.p90),
            sig9(s.p95),
            sig9(s.p99),
            sig9(s.max)
        );
    };
    for (name, stats) in &report.per_illuminant {
        row(name, stats);
    }
    row("aggregate", &report.aggregate);
    write_text(path, &out)
}

/// Plot-ready before/after curves: the native channels next to the filtered
/// (and, when a single map applies, corrected) sensitivities.
fn write_sensitivities_csv(
    path: &Path,
    camera: &SensorSet,
    after: &DMatrix<f64>,
    after_names: [&str; 3],
) -> Result<()> {
    let mut out = String::from("wavelength_nm,native_r,native_g,native_b");
    for name in after_names {
        let _ = write!(out, ",{name}");
    }
    out.push('\n');
    for (i, w) in camera.grid().wavelengths().iter().enumerate() {
        let _ = write!(out, "{w}");
        for k in 0..3 {
            let _ = write!(out, ",{}", sig9(camera.channels()[(i, k)]));
        }
        for k in 0..3 {
            let _ = write!(out, ",{}", sig9(after[(i, k)]));
        }
        out.push('\n');
    }
    write_text(path, &out)
}

fn write_seeds_csv(path: &Path, seeds: &SeedSet) -> Result<()> {
    let mut out = String::from("wavelength_nm");
    for i in 0..seeds.filters.len() {
        let _ = write!(out, ",seed_{i:03}");
    }
    out.push('\n');
    let grid = seeds.basis.grid();
    for (row, w) in grid.wavelengths().iter().enumerate() {
        let _ = write!(out, "{w}");
        for f in &seeds.filters {
            let _ = write!(out, ",{}", sig9(f.values()[row]));
        }
        out.push('\n');
    }
    write_text(path, &out)
}

fn ensure_out_dir(out: &Path) -> Result<()> {
    std::fs::create_dir_all(out).map_err(|e| Error::io(out, e))
}

fn load_camera(path: &Path, grid: &SpectralGrid) -> Result<SensorSet> {
    let table = tables::load_table(path)?;
    tables::sensor_set_from_table(&table, grid)
}

fn load_cmfs(source: &CmfSource, grid: &SpectralGrid) -> Result<SensorSet> {
    match source {
        CmfSource::Builtin => Ok(tables::reference_cmfs()),
        CmfSource::File(path) => {
            let table = tables::load_table(path)?;
            tables::sensor_set_from_table(&table, grid)
        }
    }
}

fn load_filter(path: &Path, grid: &SpectralGrid) -> Result<FilterCurve> {
    let table = tables::load_table(path)?;
    if table.values().ncols() != 1 {
        return Err(Error::ShapeMismatch(format!(
            "{}: filter table needs exactly one value column, found {}",
            path.display(),
            table.values().ncols()
        )));
    }
    let values = tables::resample(&table, grid)?;
    FilterCurve::new(grid.clone(), values.column(0).as_slice().to_vec())
}

/// Resolves `--target`: either a column of the illuminant table or one of
/// the packaged lights via `builtin:D65` / `builtin:A`.
fn resolve_target_light(
    name: &str,
    table: &SpectralTable,
    grid: &SpectralGrid,
) -> Result<Spectrum> {
    if let Some(builtin) = name.strip_prefix("builtin:") {
        return Ok(tables::reference_illuminant(ReferenceIlluminant::parse(
            builtin,
        )?));
    }
    let idx = table.column_index(name).ok_or_else(|| {
        Error::InvalidArgument(format!(
            "target `{name}` is not a column of {} (columns: {})",
            table.source(),
            table.column_names().join(", ")
        ))
    })?;
    let values = tables::resample(table, grid)?;
    Spectrum::new(
        SpectrumKind::Illuminant,
        grid.clone(),
        values.column(idx).as_slice().to_vec(),
    )
    .map(|s| s.with_name(name))
}

// ---------------------------------------------------------------------------
// luther

#[derive(Debug, Clone)]
pub struct LutherRun {
    pub camera: PathBuf,
    pub cmf: CmfSource,
    pub eps: f64,
    pub max_iter: usize,
    pub out: PathBuf,
}

#[derive(Serialize)]
struct LutherReport {
    vora_before: f64,
    vora_after: f64,
    min_transmittance: f64,
    converged: bool,
    iterations: usize,
    final_objective: f64,
    regularized_steps: usize,
    zero_sensitivity_rows: Vec<usize>,
    positivity: crate::luther::PositivityReport,
    camera_validation: crate::spectral::SensorValidation,
}

impl LutherRun {
    pub fn execute(&self) -> Result<Vec<PathBuf>> {
        let grid = SpectralGrid::default_visible();
        let camera = load_camera(&self.camera, &grid)?;
        let cmfs = load_cmfs(&self.cmf, &grid)?;
        let result = optimize_luther(&camera, &cmfs, self.eps, self.max_iter)?;
        ensure_out_dir(&self.out)?;

        let filter_path = self.out.join("filter.csv");
        write_filter_csv(&filter_path, &result.filter)?;
        let matrix_path = self.out.join("matrix.json");
        write_json(
            &matrix_path,
            &serde_json::json!({ "matrix": matrix_rows(&result.map) }),
        )?;
        let trace_path = self.out.join("trace.csv");
        write_trace_csv(&trace_path, &result.trace)?;
        let sens_path = self.out.join("sensitivities.csv");
        let fitted = {
            let filtered = crate::spectral::apply_filter(&camera, &result.filter)?;
            filtered.channels() * crate::lls::dyn3(result.map.matrix())
        };
        write_sensitivities_csv(
            &sens_path,
            &camera,
            &fitted,
            ["fitted_x", "fitted_y", "fitted_z"],
        )?;
        let report_path = self.out.join("report.json");
        write_json(&report_path, &luther_report(&result, &camera))?;
        let manifest_path = self.out.join("manifest.json");
        let mut inputs: Vec<&Path> = vec![&self.camera];
        if let CmfSource::File(p) = &self.cmf {
            inputs.push(p);
        }
        write_json(
            &manifest_path,
            &RunManifest::new(
                "luther",
                &inputs,
                serde_json::json!({
                    "eps": self.eps,
                    "max_iter": self.max_iter,
                    "cmf": match &self.cmf {
                        CmfSource::Builtin => "builtin".to_string(),
                        CmfSource::File(p) => p.display().to_string(),
                    },
                }),
            )?,
        )?;
        Ok(vec![
            filter_path,
            matrix_path,
            trace_path,
            sens_path,
            report_path,
            manifest_path,
        ])
    }
}

fn luther_report(result: &LutherResult, camera: &SensorSet) -> LutherReport {
    LutherReport {
        vora_before: result.vora_before,
        vora_after: result.vora_after,
        min_transmittance: result.filter.min_value(),
        converged: result.trace.converged,
        iterations: result.trace.iterations,
        final_objective: result.trace.final_objective(),
        regularized_steps: result.trace.regularized_steps,
        zero_sensitivity_rows: result.zero_rows.clone(),
        positivity: result.positivity(),
        camera_validation: camera.validation(),
    }
}

// ---------------------------------------------------------------------------
// data

#[derive(Debug, Clone)]
pub struct DataRun {
    pub camera: PathBuf,
    pub cmf: CmfSource,
    pub illuminants: PathBuf,
    pub reflectances: PathBuf,
    pub mode: ScenarioMode,
    pub target: Option<String>,
    pub seed: SeedSource,
    pub constraints: ConstraintOptions,
    pub eps: f64,
    pub max_iter: usize,
    pub out: PathBuf,
}

#[derive(Serialize)]
struct DataReport {
    seed_id: String,
    seed_projected: bool,
    converged: bool,
    iterations: usize,
    final_objective: f64,
    regularized_steps: usize,
    min_transmittance: f64,
    max_transmittance: f64,
    positivity: crate::luther::PositivityReport,
    training_evaluation: EvalReport,
}

struct LoadedScenario {
    camera: SensorSet,
    cmfs: SensorSet,
    illuminants: Vec<Spectrum>,
    reflectances: DMatrix<f64>,
    scenario: Scenario,
}

fn load_scenario(
    camera_path: &Path,
    cmf: &CmfSource,
    illuminants_path: &Path,
    reflectances_path: &Path,
    mode: ScenarioMode,
    target: Option<&str>,
    grid: &SpectralGrid,
) -> Result<LoadedScenario> {
    let camera = load_camera(camera_path, grid)?;
    let cmfs = load_cmfs(cmf, grid)?;
    let light_table = tables::load_table(illuminants_path)?;
    let illuminants = tables::spectra_from_table(&light_table, grid, SpectrumKind::Illuminant)?;
    let refl_table = tables::load_table(reflectances_path)?;
    let reflectances = tables::matrix_from_table(&refl_table, grid)?;

    if mode == ScenarioMode::Single && illuminants.len() != 1 {
        return Err(Error::InvalidArgument(format!(
            "single mode expects exactly one illuminant column, found {}",
            illuminants.len()
        )));
    }
    if mode == ScenarioMode::FixedTarget && target.is_none() {
        return Err(Error::InvalidArgument(
            "fixed-target mode requires --target".into(),
        ));
    }

    let signal_sets: Vec<ColorSignalSet> = illuminants
        .iter()
        .map(|light| {
            color_signal(
                light,
                &reflectances,
                light.name().unwrap_or("light"),
            )
        })
        .collect::<Result<_>>()?;

    let target_mode = match mode {
        ScenarioMode::Single => TargetMode::SingleLight,
        ScenarioMode::PerLight => TargetMode::PerLight,
        ScenarioMode::FixedTarget => {
            let light = resolve_target_light(target.unwrap(), &light_table, grid)?;
            let label = light.name().unwrap_or("target").to_string();
            TargetMode::FixedTarget(color_signal(&light, &reflectances, label)?)
        }
    };
    let scenario = Scenario::new(signal_sets, target_mode, cmfs.clone())?;
    Ok(LoadedScenario {
        camera,
        cmfs,
        illuminants,
        reflectances,
        scenario,
    })
}

fn resolve_seed(
    source: &SeedSource,
    camera: &SensorSet,
    cmfs: &SensorSet,
    grid: &SpectralGrid,
    eps: f64,
    max_iter: usize,
) -> Result<(FilterCurve, String)> {
    match source {
        SeedSource::Ones => Ok((FilterCurve::ones(grid.clone()), "ones".to_string())),
        SeedSource::Luther => {
            let luther = optimize_luther(camera, cmfs, eps, max_iter)?;
            Ok((luther.filter, "luther".to_string()))
        }
        SeedSource::File(path) => Ok((
            load_filter(path, grid)?,
            path.display().to_string(),
        )),
    }
}

impl DataRun {
    pub fn execute(&self) -> Result<Vec<PathBuf>> {
        let grid = SpectralGrid::default_visible();
        let loaded = load_scenario(
            &self.camera,
            &self.cmf,
            &self.illuminants,
            &self.reflectances,
            self.mode,
            self.target.as_deref(),
            &grid,
        )?;
        let cons = self.constraints.build(&grid)?;
        let (seed, seed_id) = resolve_seed(
            &self.seed,
            &loaded.camera,
            &loaded.cmfs,
            &grid,
            self.eps,
            self.max_iter,
        )?;
        let result = optimize_data_labeled(
            &loaded.camera,
            &loaded.scenario,
            &seed,
            &seed_id,
            &cons,
            self.eps,
            self.max_iter,
        )?;
        ensure_out_dir(&self.out)?;
        let mut written = write_data_artifacts(&self.out, &loaded, &result)?;

        let manifest_path = self.out.join("manifest.json");
        write_json(
            &manifest_path,
            &RunManifest::new(
                "data",
                &[
                    &self.camera,
                    &self.illuminants,
                    &self.reflectances,
                ],
                serde_json::json!({
                    "mode": format!("{:?}", self.mode),
                    "target": self.target,
                    "seed": result.seed_id,
                    "basis_terms": self.constraints.basis_terms,
                    "f_min": self.constraints.f_min,
                    "f_max": self.constraints.f_max,
                    "positive": self.constraints.positive,
                    "eps": self.eps,
                    "max_iter": self.max_iter,
                }),
            )?,
        )?;
        written.push(manifest_path);
        Ok(written)
    }
}

fn write_data_artifacts(
    out: &Path,
    loaded: &LoadedScenario,
    result: &DataResult,
) -> Result<Vec<PathBuf>> {
    let filter_path = out.join("filter.csv");
    write_filter_csv(&filter_path, &result.filter)?;

    let matrices_path = out.join("matrices.json");
    let per_light: Vec<serde_json::Value> = loaded
        .scenario
        .signal_sets()
        .iter()
        .zip(&result.maps)
        .map(|(set, m)| {
            serde_json::json!({
                "label": set.label(),
                "matrix": matrix_rows(m),
            })
        })
        .collect();
    write_json(&matrices_path, &serde_json::json!({ "per_light": per_light }))?;

    let trace_path = out.join("trace.csv");
    write_trace_csv(&trace_path, &result.trace)?;

    let sens_path = out.join("sensitivities.csv");
    let filtered = crate::spectral::apply_filter(&loaded.camera, &result.filter)?;
    write_sensitivities_csv(
        &sens_path,
        &loaded.camera,
        filtered.channels(),
        ["filtered_r", "filtered_g", "filtered_b"],
    )?;

    let evaluation = metrics::evaluate(
        &loaded.camera,
        Some(&result.filter),
        &loaded.illuminants,
        &loaded.reflectances,
        &loaded.cmfs,
    )?;
    let report_path = out.join("report.json");
    write_json(
        &report_path,
        &DataReport {
            seed_id: result.seed_id.clone(),
            seed_projected: result.seed_projected,
            converged: result.trace.converged,
            iterations: result.trace.iterations,
            final_objective: result.trace.final_objective(),
            regularized_steps: result.trace.regularized_steps,
            min_transmittance: result.filter.min_value(),
            max_transmittance: result.filter.max_value(),
            positivity: check_positivity(&result.filter),
            training_evaluation: evaluation,
        },
    )?;
    Ok(vec![filter_path, matrices_path, trace_path, sens_path, report_path])
}

// ---------------------------------------------------------------------------
// seeds

#[derive(Debug, Clone)]
pub struct SeedsRun {
    pub basis_terms: usize,
    pub f_min: f64,
    pub f_max: f64,
    pub count: usize,
    pub theta_deg: f64,
    pub rng_seed: u64,
    pub out: PathBuf,
}

#[derive(Serialize)]
struct SeedsReport {
    count: usize,
    basis_terms: usize,
    f_min: f64,
    f_max: f64,
    theta_deg: f64,
    rng_seed: u64,
    coeff_min: Vec<f64>,
    coeff_max: Vec<f64>,
    nearest_neighbour_mean_deg: Option<f64>,
    nearest_neighbour_max_deg: Option<f64>,
}

fn seeds_report(seeds: &SeedSet) -> SeedsReport {
    let nn = seeds.nearest_neighbour_stats();
    SeedsReport {
        count: seeds.filters.len(),
        basis_terms: seeds.basis.term_count(),
        f_min: seeds.f_min,
        f_max: seeds.f_max,
        theta_deg: seeds.theta_deg,
        rng_seed: seeds.rng_seed,
        coeff_min: seeds.coeff_min.as_slice().to_vec(),
        coeff_max: seeds.coeff_max.as_slice().to_vec(),
        nearest_neighbour_mean_deg: nn.map(|(m, _)| m),
        nearest_neighbour_max_deg: nn.map(|(_, m)| m),
    }
}

impl SeedsRun {
    pub fn generate(&self) -> Result<(SeedSet, BasisMatrix)> {
        let grid = SpectralGrid::default_visible();
        let basis = cosine_basis(&grid, self.basis_terms)?;
        let seeds = seeding::generate_seed_set(
            &basis,
            self.f_min,
            self.f_max,
            self.count,
            self.theta_deg,
            self.rng_seed,
        )?;
        Ok((seeds, basis))
    }

    pub fn execute(&self) -> Result<Vec<PathBuf>> {
        let (seeds, _) = self.generate()?;
        ensure_out_dir(&self.out)?;
        let seeds_path = self.out.join("seeds.csv");
        write_seeds_csv(&seeds_path, &seeds)?;
        let report_path = self.out.join("report.json");
        write_json(&report_path, &seeds_report(&seeds))?;
        let manifest_path = self.out.join("manifest.json");
        write_json(
            &manifest_path,
            &RunManifest::new("seeds", &[], self.parameters())?,
        )?;
        Ok(vec![seeds_path, report_path, manifest_path])
    }

    fn parameters(&self) -> serde_json::Value {
        serde_json::json!({
            "basis_terms": self.basis_terms,
            "f_min": self.f_min,
            "f_max": self.f_max,
            "count": self.count,
            "theta_deg": self.theta_deg,
            "rng_seed": self.rng_seed,
        })
    }
}

// ---------------------------------------------------------------------------
// multistart

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum MetricChoice {
    Objective,
    MeanDeltaE,
}

impl MetricChoice {
    pub fn parse(value: &str) -> Result<Self> {
        match value.to_ascii_lowercase().as_str() {
            "objective" => Ok(MetricChoice::Objective),
            "mean-de" => Ok(MetricChoice::MeanDeltaE),
            other => Err(Error::InvalidArgument(format!(
                "unknown metric `{other}` (expected objective or mean-de)"
            ))),
        }
    }
}

#[derive(Debug, Clone)]
pub struct MultiStartRun {
    pub camera: PathBuf,
    pub cmf: CmfSource,
    pub illuminants: PathBuf,
    pub reflectances: PathBuf,
    pub mode: ScenarioMode,
    pub target: Option<String>,
    pub seeds: SeedsRun,
    pub metric: MetricChoice,
    pub eps: f64,
    pub max_iter: usize,
    pub out: PathBuf,
}

impl MultiStartRun {
    pub fn execute(&self) -> Result<Vec<PathBuf>> {
        let grid = SpectralGrid::default_visible();
        let loaded = load_scenario(
            &self.camera,
            &self.cmf,
            &self.illuminants,
            &self.reflectances,
            self.mode,
            self.target.as_deref(),
            &grid,
        )?;
        let (seeds, basis) = self.seeds.generate()?;
        let cons = ConstraintSpec::basis_bounded_with_max(
            basis,
            self.seeds.f_min,
            self.seeds.f_max,
        )?;
        let metric = match self.metric {
            MetricChoice::Objective => SelectionMetric::Objective,
            MetricChoice::MeanDeltaE => SelectionMetric::MeanDeltaE(MetricData {
                illuminants: loaded.illuminants.clone(),
                reflectances: loaded.reflectances.clone(),
            }),
        };
        let outcome = seeding::multi_start(
            &loaded.camera,
            &loaded.scenario,
            &cons,
            &seeds,
            &metric,
            self.eps,
            self.max_iter,
        )?;

        ensure_out_dir(&self.out)?;
        let mut written = Vec::new();
        let seeds_path = self.out.join("seeds.csv");
        write_seeds_csv(&seeds_path, &seeds)?;
        written.push(seeds_path);

        let ranking_path = self.out.join("ranking.csv");
        let mut out = String::from("rank,seed_id,objective,metric,iterations,converged,status\n");
        for (rank, &idx) in outcome.ranking.iter().enumerate() {
            let run = &outcome.runs[idx];
            let scored = run.outcome.as_ref().unwrap();
            let _ = writeln!(
                out,
                "{},seed_{:03},{},{},{},{},ok",
                rank + 1,
                run.seed_index,
                sig9(scored.result.trace.final_objective()),
                sig9(scored.metric),
                scored.result.trace.iterations,
                scored.result.trace.converged,
            );
        }
        for run in &outcome.runs {
            if let Err(message) = &run.outcome {
                let _ = writeln!(
                    out,
                    ",seed_{:03},,,,,failed: {}",
                    run.seed_index,
                    message.replace(',', ";"),
                );
            }
        }
        write_text(&ranking_path, &out)?;
        written.push(ranking_path);

        let best = outcome
            .best()
            .expect("multi_start returns an error when no seed succeeds");
        written.extend(write_data_artifacts(&self.out, &loaded, &best.result)?);

        let report_path = self.out.join("multistart.json");
        write_json(
            &report_path,
            &serde_json::json!({
                "seeds": seeds_report(&seeds),
                "metric": match self.metric {
                    MetricChoice::Objective => "objective",
                    MetricChoice::MeanDeltaE => "mean-de",
                },
                "best_seed": best.result.seed_id,
                "best_metric": best.metric,
                "succeeded": outcome.ranking.len(),
                "failed": outcome.runs.len() - outcome.ranking.len(),
            }),
        )?;
        written.push(report_path);

        let manifest_path = self.out.join("manifest.json");
        let mut parameters = self.seeds.parameters();
        parameters["mode"] = serde_json::json!(format!("{:?}", self.mode));
        parameters["metric"] = serde_json::json!(match self.metric {
            MetricChoice::Objective => "objective",
            MetricChoice::MeanDeltaE => "mean-de",
        });
        parameters["eps"] = serde_json::json!(self.eps);
        parameters["max_iter"] = serde_json::json!(self.max_iter);
        write_json(
            &manifest_path,
            &RunManifest::new(
                "multistart",
                &[&self.camera, &self.illuminants, &self.reflectances],
                parameters,
            )?,
        )?;
        written.push(manifest_path);
        Ok(written)
    }
}

// ---------------------------------------------------------------------------
// eval

#[derive(Debug, Clone)]
pub struct EvalRun {
    pub camera: PathBuf,
    /// `None` evaluates the bare camera.
    pub filter: Option<PathBuf>,
    pub illuminants: PathBuf,
    pub reflectances: PathBuf,
    pub cmf: CmfSource,
    pub out: PathBuf,
}

impl EvalRun {
    pub fn execute(&self) -> Result<Vec<PathBuf>> {
        let grid = SpectralGrid::default_visible();
        let camera = load_camera(&self.camera, &grid)?;
        let cmfs = load_cmfs(&self.cmf, &grid)?;
        let light_table = tables::load_table(&self.illuminants)?;
        let illuminants =
            tables::spectra_from_table(&light_table, &grid, SpectrumKind::Illuminant)?;
        let refl_table = tables::load_table(&self.reflectances)?;
        let reflectances = tables::matrix_from_table(&refl_table, &grid)?;
        let filter = self
            .filter
            .as_ref()
            .map(|p| load_filter(p, &grid))
            .transpose()?;

        let report = metrics::evaluate(
            &camera,
            filter.as_ref(),
            &illuminants,
            &reflectances,
            &cmfs,
        )?;
        ensure_out_dir(&self.out)?;
        let stats_path = self.out.join("stats.csv");
        write_stats_csv(&stats_path, &report)?;
        let manifest_path = self.out.join("manifest.json");
        let mut inputs: Vec<&Path> = vec![&self.camera, &self.illuminants, &self.reflectances];
        if let Some(f) = &self.filter {
            inputs.push(f);
        }
        write_json(
            &manifest_path,
            &RunManifest::new(
                "eval",
                &inputs,
                serde_json::json!({
                    "filter": self.filter.as_ref().map(|p| p.display().to_string()),
                }),
            )?,
        )?;
        Ok(vec![stats_path, manifest_path])
    }
}

/// Reads a `stats.csv` written by [`EvalRun`] back into memory (used by the
/// acceptance harness and tests).
pub fn read_stats_csv(path: &Path) -> Result<Vec<(String, metrics::ErrorStats)>> {
    let body = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    let mut rows = Vec::new();
    for (i, line) in body.lines().enumerate() {
        if i == 0 || line.is_empty() {
            continue;
        }
        let fields: Vec<&str> = line.split(',').collect();
        if fields.len() != 7 {
            return Err(Error::Parse {
                path: path.into(),
                row: i + 1,
                column: String::new(),
                message: format!("expected 7 fields, found {}", fields.len()),
            });
        }
        let num = |s: &str| -> Result<f64> {
            s.parse().map_err(|_| Error::Parse {
                path: path.into(),
                row: i + 1,
                column: String::new(),
                message: format!("bad number `{s}`"),
            })
        };
        rows.push((
            fields[0].to_string(),
            metrics::ErrorStats {
                mean: num(fields[1])?,
                median: num(fields[2])?,
                p90: num(fields[3])?,
                p95: num(fields[4])?,
                p99: num(fields[5])?,
                max: num(fields[6])?,
            },
        ));
    }
    Ok(rows)
}
