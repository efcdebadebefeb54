//! The smoothness basis: truncated discrete cosine expansion. Restricting a
//! filter to the span of the first `m` cosine terms bounds how wiggly it can
//! be, which is what makes a designed filter manufacturable.

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};
use crate::lls;
use crate::spectral::SpectralGrid;

/// `n x m` matrix whose column `k` samples the k-th cosine term on the grid.
/// Column 0 is constant, so any constant filter is representable at every
/// truncation order.
#[derive(Debug, Clone)]
pub struct BasisMatrix {
    grid: SpectralGrid,
    matrix: DMatrix<f64>,
}

impl BasisMatrix {
    pub fn grid(&self) -> &SpectralGrid {
        &self.grid
    }

    pub fn matrix(&self) -> &DMatrix<f64> {
        &self.matrix
    }

    pub fn term_count(&self) -> usize {
        self.matrix.ncols()
    }

    /// Least-squares coefficients of a filter in this basis.
    pub fn coefficients_for(&self, values: &DVector<f64>) -> DVector<f64> {
        let rhs = DMatrix::from_column_slice(values.len(), 1, values.as_slice());
        let (c, _) = lls::lstsq_ridged(&self.matrix, &rhs);
        DVector::from_column_slice(c.as_slice())
    }

    /// Reconstructs the filter values `B c`.
    pub fn synthesize(&self, coefficients: &DVector<f64>) -> Result<DVector<f64>> {
        if coefficients.len() != self.term_count() {
            return Err(Error::ShapeMismatch(format!(
                "{} coefficients for a {}-term basis",
                coefficients.len(),
                self.term_count()
            )));
        }
        Ok(&self.matrix * coefficients)
    }
}

/// First `m` terms of the DCT-II family, unnormalized: entry `(i, k)` is
/// `cos(pi k (i + 1/2) / n)`. Column scaling is irrelevant to the
/// optimisation (coefficients rescale), but this convention is pinned so
/// results reproduce bit-for-bit.
pub fn cosine_basis(grid: &SpectralGrid, m: usize) -> Result<BasisMatrix> {
    let n = grid.len();
    if m == 0 || m > n {
        return Err(Error::InvalidArgument(format!(
            "basis size {m} out of range 1..={n}"
        )));
    }
    let matrix = DMatrix::from_fn(n, m, |i, k| {
        (std::f64::consts::PI * k as f64 * (i as f64 + 0.5) / n as f64).cos()
    });
    Ok(BasisMatrix {
        grid: grid.clone(),
        matrix,
    })
}
