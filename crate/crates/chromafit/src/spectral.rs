//! Spectra, sensor sets, filters and color signals on a shared wavelength grid,
//! plus the discrete image-formation primitives that everything else builds on.
//!
//! All types are immutable after construction and may be shared freely across
//! threads. Objects participating in one computation must live on the same
//! [`SpectralGrid`]; a mismatch is a hard error, never a silent resample.

use nalgebra::{DMatrix, DVector, Matrix3};
use serde::Serialize;

use crate::error::{Error, Result};

/// Ordered wavelength sample points in nanometres.
///
/// The default working grid is 400-700 nm inclusive at 10 nm steps (31 points),
/// which matches the format of most published spectral datasets. Any strictly
/// increasing grid is accepted; the sampling interval is assumed to be folded
/// into sensitivity vectors, so no step factor appears anywhere in the math.
#[derive(Debug, Clone, PartialEq)]
pub struct SpectralGrid {
    wavelengths: Vec<f64>,
}

impl SpectralGrid {
    pub fn new(wavelengths: Vec<f64>) -> Result<Self> {
        if wavelengths.is_empty() {
            return Err(Error::InvalidData("empty wavelength grid".into()));
        }
        if wavelengths.iter().any(|w| !w.is_finite()) {
            return Err(Error::InvalidData("non-finite wavelength".into()));
        }
        if wavelengths.windows(2).any(|w| w[1] <= w[0]) {
            return Err(Error::InvalidData(
                "wavelengths must be strictly increasing".into(),
            ));
        }
        Ok(SpectralGrid { wavelengths })
    }

    /// 400..=700 nm at 10 nm steps: 31 samples.
    pub fn default_visible() -> Self {
        SpectralGrid {
            wavelengths: (0..31).map(|i| 400.0 + 10.0 * i as f64).collect(),
        }
    }

    pub fn len(&self) -> usize {
        self.wavelengths.len()
    }

    pub fn is_empty(&self) -> bool {
        self.wavelengths.is_empty()
    }

    pub fn wavelengths(&self) -> &[f64] {
        &self.wavelengths
    }

    pub fn min_nm(&self) -> f64 {
        self.wavelengths[0]
    }

    pub fn max_nm(&self) -> f64 {
        *self.wavelengths.last().unwrap()
    }
}

pub(crate) fn check_same_grid(a: &SpectralGrid, b: &SpectralGrid, what: &str) -> Result<()> {
    if a != b {
        return Err(Error::GridMismatch(format!(
            "{what}: {} samples on [{}, {}] vs {} samples on [{}, {}]",
            a.len(),
            a.min_nm(),
            a.max_nm(),
            b.len(),
            b.min_nm(),
            b.max_nm(),
        )));
    }
    Ok(())
}

/// What a spectrum physically is; drives per-kind validation on construction.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum SpectrumKind {
    /// Illuminant power distribution, nonnegative.
    Illuminant,
    /// Surface reflectance, nonnegative (typically within [0, 1]).
    Reflectance,
    /// Per-wavelength product of illuminant and reflectance.
    ColorSignal,
    /// One camera channel or one color-matching-function column. Negative
    /// entries are tolerated here (measurement noise in published cameras).
    Sensitivity,
}

/// A single sampled spectrum on a grid.
#[derive(Debug, Clone)]
pub struct Spectrum {
    grid: SpectralGrid,
    values: DVector<f64>,
    kind: SpectrumKind,
    name: Option<String>,
}

impl Spectrum {
    pub fn new(kind: SpectrumKind, grid: SpectralGrid, values: Vec<f64>) -> Result<Self> {
        if values.len() != grid.len() {
            return Err(Error::ShapeMismatch(format!(
                "spectrum has {} values on a {}-point grid",
                values.len(),
                grid.len()
            )));
        }
        if values.iter().any(|v| !v.is_finite()) {
            return Err(Error::InvalidData("non-finite spectrum value".into()));
        }
        let nonneg_required = matches!(kind, SpectrumKind::Illuminant | SpectrumKind::Reflectance);
        if nonneg_required {
            if let Some(v) = values.iter().find(|v| **v < 0.0) {
                return Err(Error::InvalidData(format!(
                    "{kind:?} spectrum has negative value {v}"
                )));
            }
        }
        Ok(Spectrum {
            grid,
            values: DVector::from_vec(values),
            kind,
            name: None,
        })
    }

    pub fn with_name(mut self, name: impl Into<String>) -> Self {
        self.name = Some(name.into());
        self
    }

    pub fn grid(&self) -> &SpectralGrid {
        &self.grid
    }

    pub fn values(&self) -> &DVector<f64> {
        &self.values
    }

    pub fn kind(&self) -> SpectrumKind {
        self.kind
    }

    pub fn name(&self) -> Option<&str> {
        self.name.as_deref()
    }
}

/// Notes gathered while validating an ingested sensor set. Loaded camera data
/// is accepted as-is: we do not rescale or normalize sensitivities, and we keep
/// negative entries (they occur in published measurements), only counting them
/// here so reports can surface them.
#[derive(Debug, Clone, Serialize)]
pub struct SensorValidation {
    pub negative_entries: usize,
    pub min_entry: f64,
    pub max_entry: f64,
    pub normalized: bool,
}

/// Three sensitivity curves forming an `n_wavelengths x 3` matrix: either a
/// camera's RGB channels or the XYZ color-matching functions.
#[derive(Debug, Clone)]
pub struct SensorSet {
    grid: SpectralGrid,
    channels: DMatrix<f64>,
}

impl SensorSet {
    /// Ingest constructor: checks finiteness and that the three channels are
    /// linearly independent (rank 3), which every optimisation here relies on.
    pub fn new(grid: SpectralGrid, channels: DMatrix<f64>) -> Result<Self> {
        let set = Self::from_matrix(grid, channels)?;
        let cond = set.condition_number();
        if !cond.is_finite() || cond > 1e12 {
            return Err(Error::RankDeficient {
                cond,
                context: "sensor set columns are linearly dependent".into(),
            });
        }
        Ok(set)
    }

    /// Shape/finiteness checks only; used for derived sets (e.g. filtered
    /// sensitivities) where rank is allowed to degrade.
    pub fn from_matrix(grid: SpectralGrid, channels: DMatrix<f64>) -> Result<Self> {
        if channels.nrows() != grid.len() || channels.ncols() != 3 {
            return Err(Error::ShapeMismatch(format!(
                "sensor matrix is {}x{}, expected {}x3",
                channels.nrows(),
                channels.ncols(),
                grid.len()
            )));
        }
        if channels.iter().any(|v| !v.is_finite()) {
            return Err(Error::InvalidData("non-finite sensitivity entry".into()));
        }
        Ok(SensorSet { grid, channels })
    }

    pub fn grid(&self) -> &SpectralGrid {
        &self.grid
    }

    /// The `n x 3` sensitivity matrix, one channel per column.
    pub fn channels(&self) -> &DMatrix<f64> {
        &self.channels
    }

    pub fn column(&self, k: usize) -> DVector<f64> {
        self.channels.column(k).into_owned()
    }

    /// Ratio of largest to smallest singular value.
    pub fn condition_number(&self) -> f64 {
        let sv = self.channels.clone().singular_values();
        let max = sv.max();
        let min = sv.min();
        if min <= 0.0 {
            f64::INFINITY
        } else {
            max / min
        }
    }

    pub fn validation(&self) -> SensorValidation {
        let negative_entries = self.channels.iter().filter(|v| **v < 0.0).count();
        SensorValidation {
            negative_entries,
            min_entry: self.channels.iter().cloned().fold(f64::INFINITY, f64::min),
            max_entry: self
                .channels
                .iter()
                .cloned()
                .fold(f64::NEG_INFINITY, f64::max),
            normalized: false,
        }
    }
}

/// A sampled transmittance curve: the design variable of every optimisation.
#[derive(Debug, Clone)]
pub struct FilterCurve {
    grid: SpectralGrid,
    values: DVector<f64>,
}

impl FilterCurve {
    pub fn new(grid: SpectralGrid, values: Vec<f64>) -> Result<Self> {
        if values.len() != grid.len() {
            return Err(Error::ShapeMismatch(format!(
                "filter has {} values on a {}-point grid",
                values.len(),
                grid.len()
            )));
        }
        if values.iter().any(|v| !v.is_finite()) {
            return Err(Error::InvalidData("non-finite filter value".into()));
        }
        Ok(FilterCurve {
            grid,
            values: DVector::from_vec(values),
        })
    }

    pub(crate) fn from_vector(grid: SpectralGrid, values: DVector<f64>) -> Result<Self> {
        Self::new(grid, values.as_slice().to_vec())
    }

    /// The fully transmissive filter.
    pub fn ones(grid: SpectralGrid) -> Self {
        let n = grid.len();
        FilterCurve {
            grid,
            values: DVector::from_element(n, 1.0),
        }
    }

    pub fn grid(&self) -> &SpectralGrid {
        &self.grid
    }

    pub fn values(&self) -> &DVector<f64> {
        &self.values
    }

    pub fn min_value(&self) -> f64 {
        self.values.min()
    }

    pub fn max_value(&self) -> f64 {
        self.values.max()
    }
}

/// A batch of color-signal spectra (illuminant times reflectance), one signal
/// per column of a `n_wavelengths x n_signals` matrix.
#[derive(Debug, Clone)]
pub struct ColorSignalSet {
    grid: SpectralGrid,
    signals: DMatrix<f64>,
    label: String,
}

impl ColorSignalSet {
    pub fn new(grid: SpectralGrid, signals: DMatrix<f64>, label: impl Into<String>) -> Result<Self> {
        if signals.nrows() != grid.len() {
            return Err(Error::ShapeMismatch(format!(
                "signal matrix has {} rows on a {}-point grid",
                signals.nrows(),
                grid.len()
            )));
        }
        if signals.ncols() == 0 {
            return Err(Error::InvalidData("signal set with no columns".into()));
        }
        if signals.iter().any(|v| !v.is_finite()) {
            return Err(Error::InvalidData("non-finite color-signal entry".into()));
        }
        if signals.iter().any(|v| *v < 0.0) {
            return Err(Error::InvalidData("negative color-signal entry".into()));
        }
        Ok(ColorSignalSet {
            grid,
            signals,
            label: label.into(),
        })
    }

    /// The 31x31 identity signal matrix: every spectral impulse weighted
    /// equally, i.e. no assumption at all about which spectra occur.
    pub fn maximum_ignorance(grid: SpectralGrid) -> Self {
        let n = grid.len();
        ColorSignalSet {
            grid,
            signals: DMatrix::identity(n, n),
            label: "maximum-ignorance".into(),
        }
    }

    pub fn grid(&self) -> &SpectralGrid {
        &self.grid
    }

    pub fn signals(&self) -> &DMatrix<f64> {
        &self.signals
    }

    pub fn label(&self) -> &str {
        &self.label
    }

    pub fn signal_count(&self) -> usize {
        self.signals.ncols()
    }
}

/// A 3x3 linear map from (filtered) camera responses to XYZ tristimuli.
#[derive(Debug, Clone, PartialEq)]
pub struct CorrectionMatrix(Matrix3<f64>);

impl CorrectionMatrix {
    pub fn new(m: Matrix3<f64>) -> Result<Self> {
        if m.iter().any(|v| !v.is_finite()) {
            return Err(Error::InvalidData("non-finite correction matrix".into()));
        }
        Ok(CorrectionMatrix(m))
    }

    pub fn identity() -> Self {
        CorrectionMatrix(Matrix3::identity())
    }

    pub fn matrix(&self) -> &Matrix3<f64> {
        &self.0
    }

    pub fn is_full_rank(&self) -> bool {
        let sv = self.0.singular_values();
        sv.min() > sv.max() * 1e-12
    }
}

/// Camera (or observer) responses to a batch of color signals: `C^T Q`, one
/// response row per signal column.
pub fn responses(signals: &ColorSignalSet, sensors: &SensorSet) -> Result<DMatrix<f64>> {
    check_same_grid(signals.grid(), sensors.grid(), "responses")?;
    Ok(signals.signals().transpose() * sensors.channels())
}

/// The effective sensitivities of a camera behind a transmittance filter:
/// each sensitivity row is scaled by the filter value at that wavelength.
pub fn apply_filter(sensors: &SensorSet, filter: &FilterCurve) -> Result<SensorSet> {
    check_same_grid(sensors.grid(), filter.grid(), "apply_filter")?;
    let mut out = sensors.channels().clone();
    for (i, f) in filter.values().iter().enumerate() {
        for k in 0..out.ncols() {
            out[(i, k)] *= f;
        }
    }
    SensorSet::from_matrix(sensors.grid().clone(), out)
}

/// Builds the color-signal matrix for one light over a reflectance set:
/// column `s` is the per-wavelength product of the illuminant and reflectance
/// column `s`.
pub fn color_signal(
    illuminant: &Spectrum,
    reflectances: &DMatrix<f64>,
    label: impl Into<String>,
) -> Result<ColorSignalSet> {
    if reflectances.nrows() != illuminant.grid().len() {
        return Err(Error::GridMismatch(format!(
            "reflectance matrix has {} rows, illuminant grid has {} samples",
            reflectances.nrows(),
            illuminant.grid().len()
        )));
    }
    if reflectances.iter().any(|v| !v.is_finite() || *v < 0.0) {
        return Err(Error::InvalidData(
            "reflectances must be finite and nonnegative".into(),
        ));
    }
    let mut signals = reflectances.clone();
    for (i, e) in illuminant.values().iter().enumerate() {
        for s in 0..signals.ncols() {
            signals[(i, s)] *= e;
        }
    }
    ColorSignalSet::new(illuminant.grid().clone(), signals, label)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    fn toy_grid(n: usize) -> SpectralGrid {
        SpectralGrid::new((0..n).map(|i| 400.0 + 10.0 * i as f64).collect()).unwrap()
    }

    /// Columns 1, sqrt, reciprocal of the row index: always rank 3.
    fn full_rank_channels(n: usize) -> DMatrix<f64> {
        DMatrix::from_fn(n, 3, |i, k| match k {
            0 => 1.0 + i as f64,
            1 => ((i + 1) as f64).sqrt(),
            _ => 1.0 / (1.0 + i as f64),
        })
    }

    #[test]
    fn default_grid_is_31_points() {
        let g = SpectralGrid::default_visible();
        assert_eq!(g.len(), 31);
        assert_eq!(g.min_nm(), 400.0);
        assert_eq!(g.max_nm(), 700.0);
    }

    #[test]
    fn grid_rejects_non_monotone() {
        assert!(SpectralGrid::new(vec![400.0, 400.0, 410.0]).is_err());
        assert!(SpectralGrid::new(vec![410.0, 400.0]).is_err());
        assert!(SpectralGrid::new(vec![]).is_err());
    }

    #[test]
    fn reflectance_rejects_negative() {
        let g = toy_grid(3);
        assert!(Spectrum::new(SpectrumKind::Reflectance, g.clone(), vec![0.1, -0.2, 0.3]).is_err());
        assert!(Spectrum::new(SpectrumKind::Sensitivity, g, vec![0.1, -0.2, 0.3]).is_ok());
    }

    #[test]
    fn identity_signal_matrix_reproduces_sensitivities() {
        let g = toy_grid(5);
        let q = full_rank_channels(5);
        let sensors = SensorSet::new(g.clone(), q.clone()).unwrap();
        let signals = ColorSignalSet::maximum_ignorance(g);
        let p = responses(&signals, &sensors).unwrap();
        assert_eq!(p, q);
    }

    #[test]
    fn zero_stimulus_gives_zero_response() {
        let g = toy_grid(4);
        let q = full_rank_channels(4);
        let sensors = SensorSet::new(g.clone(), q).unwrap();
        let signals = ColorSignalSet::new(g, DMatrix::zeros(4, 2), "dark").unwrap();
        let p = responses(&signals, &sensors).unwrap();
        assert!(p.iter().all(|v| *v == 0.0));
    }

    #[test]
    fn toy_dot_product_response() {
        // Hand oracle: (1,2,3) . (0.5,0.5,0.5) = 3.0
        let g = toy_grid(3);
        let mut q = DMatrix::zeros(3, 3);
        for i in 0..3 {
            q[(i, 0)] = 0.5;
            q[(i, 1)] = if i == 1 { 1.0 } else { 0.0 };
            q[(i, 2)] = if i == 2 { 1.0 } else { 0.0 };
        }
        let sensors = SensorSet::new(g.clone(), q).unwrap();
        let c = DMatrix::from_column_slice(3, 1, &[1.0, 2.0, 3.0]);
        let signals = ColorSignalSet::new(g, c, "toy").unwrap();
        let p = responses(&signals, &sensors).unwrap();
        assert_relative_eq!(p[(0, 0)], 3.0, epsilon = 1e-15);
    }

    #[test]
    fn all_ones_filter_is_identity() {
        let g = toy_grid(6);
        let q = DMatrix::from_fn(6, 3, |i, k| ((i * 3 + k) as f64).sin() + 2.0);
        let sensors = SensorSet::new(g.clone(), q.clone()).unwrap();
        let filtered = apply_filter(&sensors, &FilterCurve::ones(g)).unwrap();
        assert_eq!(filtered.channels(), &q);
    }

    #[test]
    fn uniform_half_filter_halves_everything() {
        let g = toy_grid(4);
        let q = full_rank_channels(4);
        let sensors = SensorSet::new(g.clone(), q.clone()).unwrap();
        let f = FilterCurve::new(g, vec![0.5; 4]).unwrap();
        let filtered = apply_filter(&sensors, &f).unwrap();
        for (a, b) in filtered.channels().iter().zip(q.iter()) {
            assert_relative_eq!(*a, 0.5 * b, epsilon = 1e-15);
        }
    }

    #[test]
    fn opaque_wavelength_zeroes_its_row() {
        let g = SpectralGrid::default_visible();
        let q = DMatrix::from_fn(31, 3, |i, k| 1.0 + ((i * 3 + k) as f64).cos().abs());
        let sensors = SensorSet::new(g.clone(), q).unwrap();
        let mut fv = vec![1.0; 31];
        fv[10] = 0.0;
        let f = FilterCurve::new(g, fv).unwrap();
        let filtered = apply_filter(&sensors, &f).unwrap();
        for k in 0..3 {
            assert_eq!(filtered.channels()[(10, k)], 0.0);
        }
    }

    #[test]
    fn equal_energy_light_reproduces_reflectances() {
        let g = toy_grid(4);
        let e = Spectrum::new(SpectrumKind::Illuminant, g.clone(), vec![1.0; 4]).unwrap();
        let s = DMatrix::from_fn(4, 3, |i, j| 0.1 * (1 + i + j) as f64);
        let c = color_signal(&e, &s, "E").unwrap();
        assert_eq!(c.signals(), &s);
    }

    #[test]
    fn perfect_reflector_reproduces_the_light() {
        let g = toy_grid(4);
        let e = Spectrum::new(SpectrumKind::Illuminant, g.clone(), vec![0.3, 0.7, 1.1, 0.2]).unwrap();
        let s = DMatrix::from_element(4, 1, 1.0);
        let c = color_signal(&e, &s, "white").unwrap();
        assert_eq!(c.signals().column(0).as_slice(), e.values().as_slice());
    }

    #[test]
    fn two_point_product_oracle() {
        let g = SpectralGrid::new(vec![400.0, 500.0]).unwrap();
        let e = Spectrum::new(SpectrumKind::Illuminant, g.clone(), vec![1.0, 2.0]).unwrap();
        let s = DMatrix::from_column_slice(2, 1, &[0.5, 0.5]);
        let c = color_signal(&e, &s, "toy").unwrap();
        assert_eq!(c.signals().column(0).as_slice(), &[0.5, 1.0]);
    }

    #[test]
    fn negative_reflectance_rejected() {
        let g = toy_grid(2);
        let e = Spectrum::new(SpectrumKind::Illuminant, g, vec![1.0, 1.0]).unwrap();
        let s = DMatrix::from_column_slice(2, 1, &[0.5, -0.1]);
        assert!(color_signal(&e, &s, "bad").is_err());
    }

    #[test]
    fn grid_mismatch_is_an_error() {
        let q = full_rank_channels(4);
        let sensors = SensorSet::new(toy_grid(4), q).unwrap();
        let other = SpectralGrid::new(vec![1.0, 2.0, 3.0, 4.0]).unwrap();
        let f = FilterCurve::ones(other.clone());
        assert!(apply_filter(&sensors, &f).is_err());
        let signals = ColorSignalSet::maximum_ignorance(other);
        assert!(responses(&signals, &sensors).is_err());
    }

    #[test]
    fn rank_deficient_sensor_set_rejected() {
        let g = toy_grid(5);
        // Third column is the sum of the first two.
        let m = DMatrix::from_fn(5, 3, |i, k| match k {
            0 => 1.0 + i as f64,
            1 => 2.0 - i as f64,
            _ => 3.0,
        });
        assert!(SensorSet::new(g, m).is_err());
    }

    #[test]
    fn filtered_responses_match_folded_form() {
        let g = toy_grid(6);
        let q = DMatrix::from_fn(6, 3, |i, k| ((1 + i + k * k) as f64).ln());
        let sensors = SensorSet::new(g.clone(), q.clone()).unwrap();
        let f = FilterCurve::new(g.clone(), (0..6).map(|i| 0.2 + 0.1 * i as f64).collect()).unwrap();
        let c = DMatrix::from_fn(6, 4, |i, j| 0.05 * (1 + i * j) as f64);
        let signals = ColorSignalSet::new(g, c.clone(), "toy").unwrap();

        let via_op = responses(&signals, &apply_filter(&sensors, &f).unwrap()).unwrap();
        let mut folded = q;
        for (i, fi) in f.values().iter().enumerate() {
            for k in 0..3 {
                folded[(i, k)] *= fi;
            }
        }
        let direct = c.transpose() * folded;
        assert_relative_eq!(via_op, direct, epsilon = 1e-14);
    }

    proptest::proptest! {
        #[test]
        fn filter_application_is_linear(
            a in -2.0f64..2.0,
            b in -2.0f64..2.0,
            f1 in proptest::collection::vec(0.0f64..1.0, 5),
            f2 in proptest::collection::vec(0.0f64..1.0, 5),
        ) {
            let g = toy_grid(5);
            let sensors = SensorSet::new(g.clone(), full_rank_channels(5)).unwrap();
            let combo: Vec<f64> = f1.iter().zip(&f2).map(|(x, y)| a * x + b * y).collect();
            let lhs = apply_filter(
                &sensors,
                &FilterCurve::new(g.clone(), combo).unwrap(),
            )
            .unwrap();
            let via1 = apply_filter(&sensors, &FilterCurve::new(g.clone(), f1).unwrap()).unwrap();
            let via2 = apply_filter(&sensors, &FilterCurve::new(g, f2).unwrap()).unwrap();
            let rhs = via1.channels() * a + via2.channels() * b;
            for (l, r) in lhs.channels().iter().zip(rhs.iter()) {
                proptest::prop_assert!((l - r).abs() <= 1e-12 * (1.0 + r.abs()));
            }
        }

        #[test]
        fn responses_superpose_over_signals(
            c1 in proptest::collection::vec(0.0f64..1.0, 5),
            c2 in proptest::collection::vec(0.0f64..1.0, 5),
        ) {
            let g = toy_grid(5);
            let sensors = SensorSet::new(g.clone(), full_rank_channels(5)).unwrap();
            let m1 = DMatrix::from_column_slice(5, 1, &c1);
            let m2 = DMatrix::from_column_slice(5, 1, &c2);
            let separate = responses(&ColorSignalSet::new(g.clone(), m1.clone(), "a").unwrap(), &sensors).unwrap()
                + responses(&ColorSignalSet::new(g.clone(), m2.clone(), "b").unwrap(), &sensors).unwrap();
            let summed = responses(
                &ColorSignalSet::new(g, m1 + m2, "a+b").unwrap(),
                &sensors,
            )
            .unwrap();
            for (l, r) in summed.iter().zip(separate.iter()) {
                proptest::prop_assert!((l - r).abs() <= 1e-12 * (1.0 + r.abs()));
            }
        }
    }

    #[test]
    fn validation_counts_negative_entries() {
        let g = toy_grid(4);
        let mut m = DMatrix::from_fn(4, 3, |i, k| 1.0 + (i * 3 + k) as f64 * 0.3);
        m[(2, 1)] = -0.01;
        let sensors = SensorSet::new(g, m).unwrap();
        let v = sensors.validation();
        assert_eq!(v.negative_entries, 1);
        assert!(!v.normalized);
        assert_eq!(v.min_entry, -0.01);
    }
}
