//! Loading, validating and resampling spectral tables, plus the packaged
//! CIE 1931 2-degree observer and CIE D65 / A illuminant reference data.
//!
//! The single ingest format is CSV: UTF-8, a required header row whose first
//! column is `wavelength_nm` followed by named value columns, `.` as the
//! decimal separator, and `#` starting a comment line. Resampling is
//! piecewise-linear and never extrapolates.

use std::path::Path;

use nalgebra::DMatrix;

use crate::error::{Error, Result};
use crate::spectral::{SensorSet, SpectralGrid, Spectrum, SpectrumKind};

/// A parsed spectral CSV: one wavelength column plus named value columns.
#[derive(Debug, Clone)]
pub struct SpectralTable {
    source: String,
    wavelengths: Vec<f64>,
    columns: Vec<String>,
    /// rows x columns, aligned with `wavelengths` and `columns`.
    values: DMatrix<f64>,
}

impl SpectralTable {
    pub fn new(
        source: impl Into<String>,
        wavelengths: Vec<f64>,
        columns: Vec<String>,
        values: DMatrix<f64>,
    ) -> Result<Self> {
        if wavelengths.len() < 2 {
            return Err(Error::InvalidData(
                "spectral table needs at least 2 rows".into(),
            ));
        }
        if wavelengths.windows(2).any(|w| w[1] <= w[0]) {
            return Err(Error::InvalidData(
                "table wavelengths must be strictly increasing".into(),
            ));
        }
        if values.nrows() != wavelengths.len() || values.ncols() != columns.len() {
            return Err(Error::ShapeMismatch(format!(
                "table is {}x{}, expected {}x{}",
                values.nrows(),
                values.ncols(),
                wavelengths.len(),
                columns.len()
            )));
        }
        if values.iter().any(|v| !v.is_finite()) {
            return Err(Error::InvalidData("non-finite table value".into()));
        }
        Ok(SpectralTable {
            source: source.into(),
            wavelengths,
            columns,
            values,
        })
    }

    pub fn source(&self) -> &str {
        &self.source
    }

    pub fn wavelengths(&self) -> &[f64] {
        &self.wavelengths
    }

    pub fn column_names(&self) -> &[String] {
        &self.columns
    }

    pub fn values(&self) -> &DMatrix<f64> {
        &self.values
    }

    pub fn column_index(&self, name: &str) -> Option<usize> {
        self.columns.iter().position(|c| c == name)
    }
}

const WAVELENGTH_HEADER: &str = "wavelength_nm";

/// Parses a spectral CSV file. Errors name the offending row and column.
pub fn load_table(path: impl AsRef<Path>) -> Result<SpectralTable> {
    let path = path.as_ref();
    let mut reader = csv::ReaderBuilder::new()
        .comment(Some(b'#'))
        .trim(csv::Trim::All)
        .flexible(false)
        .from_path(path)
        .map_err(|e| match e.kind() {
            csv::ErrorKind::Io(_) => {
                Error::io(path, std::io::Error::other(e.to_string()))
            }
            _ => Error::Parse {
                path: path.into(),
                row: 0,
                column: String::new(),
                message: e.to_string(),
            },
        })?;

    let headers: Vec<String> = reader
        .headers()
        .map_err(|e| Error::Parse {
            path: path.into(),
            row: 1,
            column: String::new(),
            message: e.to_string(),
        })?
        .iter()
        .map(|h| h.to_string())
        .collect();
    if headers.first().map(String::as_str) != Some(WAVELENGTH_HEADER) {
        return Err(Error::Parse {
            path: path.into(),
            row: 1,
            column: headers.first().cloned().unwrap_or_default(),
            message: format!("first column must be `{WAVELENGTH_HEADER}`"),
        });
    }
    if headers.len() < 2 {
        return Err(Error::Parse {
            path: path.into(),
            row: 1,
            column: String::new(),
            message: "table needs at least one value column".into(),
        });
    }
    let columns: Vec<String> = headers[1..].to_vec();

    let mut wavelengths = Vec::new();
    let mut rows: Vec<Vec<f64>> = Vec::new();
    for (idx, record) in reader.records().enumerate() {
        let record = record.map_err(|e| Error::Parse {
            path: path.into(),
            row: idx + 2,
            column: String::new(),
            message: e.to_string(),
        })?;
        let line = record.position().map(|p| p.line() as usize).unwrap_or(idx + 2);
        let parse_cell = |field: &str, column: &str| -> Result<f64> {
            let v: f64 = field.parse().map_err(|_| Error::Parse {
                path: path.into(),
                row: line,
                column: column.to_string(),
                message: format!("cannot parse `{field}` as a number"),
            })?;
            if !v.is_finite() {
                return Err(Error::Parse {
                    path: path.into(),
                    row: line,
                    column: column.to_string(),
                    message: format!("non-finite value `{field}`"),
                });
            }
            Ok(v)
        };
        let w = parse_cell(&record[0], WAVELENGTH_HEADER)?;
        if let Some(prev) = wavelengths.last() {
            if w <= *prev {
                return Err(Error::Parse {
                    path: path.into(),
                    row: line,
                    column: WAVELENGTH_HEADER.into(),
                    message: format!("wavelength {w} not greater than previous {prev}"),
                });
            }
        }
        wavelengths.push(w);
        let mut row = Vec::with_capacity(columns.len());
        for (c, name) in columns.iter().enumerate() {
            row.push(parse_cell(&record[c + 1], name)?);
        }
        rows.push(row);
    }
    if rows.len() < 2 {
        return Err(Error::Parse {
            path: path.into(),
            row: rows.len() + 1,
            column: String::new(),
            message: "table needs at least 2 data rows".into(),
        });
    }
    let values = DMatrix::from_fn(rows.len(), columns.len(), |i, j| rows[i][j]);
    SpectralTable::new(path.display().to_string(), wavelengths, columns, values)
}

/// Writes a table back to CSV. Values use the shortest representation that
/// round-trips exactly, so load -> save -> load is value-identical.
pub fn save_table(path: impl AsRef<Path>, table: &SpectralTable) -> Result<()> {
    let path = path.as_ref();
    let mut out = String::new();
    out.push_str(WAVELENGTH_HEADER);
    for c in table.column_names() {
        out.push(',');
        out.push_str(c);
    }
    out.push('\n');
    for (i, w) in table.wavelengths().iter().enumerate() {
        out.push_str(&w.to_string());
        for j in 0..table.values().ncols() {
            out.push(',');
            out.push_str(&table.values()[(i, j)].to_string());
        }
        out.push('\n');
    }
    std::fs::write(path, out).map_err(|e| Error::io(path, e))
}

/// Resamples every column of a table onto the target grid by piecewise-linear
/// interpolation. Values at grid points that coincide with table rows pass
/// through bit-identically, and the table range must cover the whole grid
/// (no extrapolation, ever).
pub fn resample(table: &SpectralTable, grid: &SpectralGrid) -> Result<DMatrix<f64>> {
    let tw = table.wavelengths();
    if grid.min_nm() < tw[0] || grid.max_nm() > *tw.last().unwrap() {
        return Err(Error::InvalidData(format!(
            "grid [{}, {}] nm extends beyond table range [{}, {}] nm; refusing to extrapolate",
            grid.min_nm(),
            grid.max_nm(),
            tw[0],
            tw.last().unwrap()
        )));
    }
    if tw == grid.wavelengths() {
        return Ok(table.values().clone());
    }
    let ncols = table.values().ncols();
    let mut out = DMatrix::zeros(grid.len(), ncols);
    let mut seg = 0usize;
    for (gi, &w) in grid.wavelengths().iter().enumerate() {
        while seg + 2 < tw.len() && tw[seg + 1] <= w {
            seg += 1;
        }
        // Exact knot hit: copy the sample rather than interpolating.
        let row = if w == tw[seg] {
            Some(seg)
        } else if w == tw[seg + 1] {
            Some(seg + 1)
        } else {
            None
        };
        for c in 0..ncols {
            out[(gi, c)] = match row {
                Some(r) => table.values()[(r, c)],
                None => {
                    let t = (w - tw[seg]) / (tw[seg + 1] - tw[seg]);
                    table.values()[(seg, c)] * (1.0 - t) + table.values()[(seg + 1, c)] * t
                }
            };
        }
    }
    Ok(out)
}

/// Interprets a 3-column table as a sensor set on the given grid.
pub fn sensor_set_from_table(table: &SpectralTable, grid: &SpectralGrid) -> Result<SensorSet> {
    if table.values().ncols() != 3 {
        return Err(Error::ShapeMismatch(format!(
            "{}: sensor table needs exactly 3 value columns, found {}",
            table.source(),
            table.values().ncols()
        )));
    }
    SensorSet::new(grid.clone(), resample(table, grid)?)
}

/// One named spectrum per table column, resampled to the grid.
pub fn spectra_from_table(
    table: &SpectralTable,
    grid: &SpectralGrid,
    kind: SpectrumKind,
) -> Result<Vec<Spectrum>> {
    let values = resample(table, grid)?;
    table
        .column_names()
        .iter()
        .enumerate()
        .map(|(c, name)| {
            Spectrum::new(kind, grid.clone(), values.column(c).as_slice().to_vec())
                .map(|s| s.with_name(name.clone()))
        })
        .collect()
}

/// The whole table as a matrix on the grid (used for reflectance sets).
pub fn matrix_from_table(table: &SpectralTable, grid: &SpectralGrid) -> Result<DMatrix<f64>> {
    resample(table, grid)
}

/// CIE 1931 2-degree standard observer color matching functions, 400-700 nm
/// at 10 nm: wavelength, x-bar, y-bar, z-bar.
const CIE_1931_CMF: [[f64; 4]; 31] = [
    [400.0, 0.0143, 0.0004, 0.0679],
    [410.0, 0.0435, 0.0012, 0.2074],
    [420.0, 0.1344, 0.0040, 0.6456],
    [430.0, 0.2839, 0.0116, 1.3856],
    [440.0, 0.3483, 0.0230, 1.7471],
    [450.0, 0.3362, 0.0380, 1.7721],
    [460.0, 0.2908, 0.0600, 1.6692],
    [470.0, 0.1954, 0.0910, 1.2876],
    [480.0, 0.0956, 0.1390, 0.8130],
    [490.0, 0.0320, 0.2080, 0.4652],
    [500.0, 0.0049, 0.3230, 0.2720],
    [510.0, 0.0093, 0.5030, 0.1582],
    [520.0, 0.0633, 0.7100, 0.0782],
    [530.0, 0.1655, 0.8620, 0.0422],
    [540.0, 0.2904, 0.9540, 0.0203],
    [550.0, 0.4334, 0.9950, 0.0087],
    [560.0, 0.5945, 0.9950, 0.0039],
    [570.0, 0.7621, 0.9520, 0.0021],
    [580.0, 0.9163, 0.8700, 0.0017],
    [590.0, 1.0263, 0.7570, 0.0011],
    [600.0, 1.0622, 0.6310, 0.0008],
    [610.0, 1.0026, 0.5030, 0.0003],
    [620.0, 0.8544, 0.3810, 0.0002],
    [630.0, 0.6424, 0.2650, 0.0000],
    [640.0, 0.4479, 0.1750, 0.0000],
    [650.0, 0.2835, 0.1070, 0.0000],
    [660.0, 0.1649, 0.0610, 0.0000],
    [670.0, 0.0874, 0.0320, 0.0000],
    [680.0, 0.0468, 0.0170, 0.0000],
    [690.0, 0.0227, 0.0082, 0.0000],
    [700.0, 0.0114, 0.0041, 0.0000],
];

/// CIE standard illuminant D65 relative spectral power, 400-700 nm at 10 nm,
/// normalized to 100 at 560 nm.
const CIE_D65: [f64; 31] = [
    82.7549, 91.4860, 93.4318, 86.6823, 104.8650, 117.0080, 117.8120, 114.8610, 115.9230,
    108.8110, 109.3540, 107.8020, 104.7900, 107.6890, 104.4050, 104.0460, 100.0000, 96.3342,
    95.7880, 88.6856, 90.0062, 89.5991, 87.6987, 83.2886, 83.6992, 80.0268, 80.2146, 82.2778,
    78.2842, 69.7213, 71.6091,
];

/// CIE standard illuminant A relative spectral power, 400-700 nm at 10 nm,
/// normalized to 100 at 560 nm.
const CIE_A: [f64; 31] = [
    14.7080, 17.6753, 20.9950, 24.6709, 28.7027, 33.0859, 37.8121, 42.8693, 48.2423, 53.9132,
    59.8611, 66.0635, 72.4959, 79.1326, 85.9470, 92.9120, 100.0000, 107.1840, 114.4360, 121.7310,
    129.0430, 136.3460, 143.6180, 150.8360, 157.9790, 165.0280, 171.9630, 178.7690, 185.4290,
    191.9310, 198.2610,
];

/// Directory override for the packaged reference tables.
pub const DATA_DIR_ENV: &str = "CHROMAFIT_DATA_DIR";

fn override_table(file: &str) -> Option<SpectralTable> {
    let dir = std::env::var_os(DATA_DIR_ENV)?;
    let path = Path::new(&dir).join(file);
    if path.is_file() {
        load_table(&path).ok()
    } else {
        None
    }
}

fn builtin_cmf_table() -> SpectralTable {
    let wavelengths = CIE_1931_CMF.iter().map(|r| r[0]).collect();
    let values = DMatrix::from_fn(31, 3, |i, j| CIE_1931_CMF[i][j + 1]);
    SpectralTable::new(
        "builtin:cie_1931_cmfs",
        wavelengths,
        vec!["x_bar".into(), "y_bar".into(), "z_bar".into()],
        values,
    )
    .expect("builtin CMF table is well formed")
}

/// The CIE 1931 2-degree observer on the default grid. Set
/// `CHROMAFIT_DATA_DIR` with a `cie_1931_cmfs.csv` inside to override the
/// packaged values.
pub fn reference_cmfs() -> SensorSet {
    let grid = SpectralGrid::default_visible();
    let table = override_table("cie_1931_cmfs.csv").unwrap_or_else(builtin_cmf_table);
    sensor_set_from_table(&table, &grid).expect("reference CMFs are rank 3 on the default grid")
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ReferenceIlluminant {
    D65,
    A,
}

impl ReferenceIlluminant {
    pub fn parse(name: &str) -> Result<Self> {
        match name.trim().to_ascii_uppercase().as_str() {
            "D65" => Ok(ReferenceIlluminant::D65),
            "A" => Ok(ReferenceIlluminant::A),
            other => Err(Error::InvalidArgument(format!(
                "unknown reference illuminant `{other}` (expected D65 or A)"
            ))),
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            ReferenceIlluminant::D65 => "D65",
            ReferenceIlluminant::A => "A",
        }
    }
}

/// A packaged CIE illuminant on the default grid, overridable via
/// `CHROMAFIT_DATA_DIR` (files `illuminant_d65.csv` / `illuminant_a.csv`).
pub fn reference_illuminant(which: ReferenceIlluminant) -> Spectrum {
    let grid = SpectralGrid::default_visible();
    let (file, data) = match which {
        ReferenceIlluminant::D65 => ("illuminant_d65.csv", &CIE_D65),
        ReferenceIlluminant::A => ("illuminant_a.csv", &CIE_A),
    };
    if let Some(table) = override_table(file) {
        if let Ok(values) = resample(&table, &grid) {
            if let Ok(s) = Spectrum::new(
                SpectrumKind::Illuminant,
                grid.clone(),
                values.column(0).as_slice().to_vec(),
            ) {
                return s.with_name(which.name());
            }
        }
    }
    Spectrum::new(SpectrumKind::Illuminant, grid, data.to_vec())
        .expect("builtin illuminant table is well formed")
        .with_name(which.name())
}
