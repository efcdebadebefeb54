//! Closed-form least-squares building blocks: the Moore-Penrose pseudoinverse
//! via normal equations, linear-map fitting, per-row scalar fitting, and the
//! vectorization that turns the filter subproblem into an ordinary
//! least-squares system `min ||V f - w||^2`.
//!
//! Everything here is dense: with at most 31 unknowns and a few thousand
//! signals, 31x31 normal equations are exact and fast.

use nalgebra::{DMatrix, DVector, Matrix3};

use crate::error::{Error, Result};

/// Relative singular-value cutoff below which a design matrix is treated as
/// rank deficient (measured on the matrix itself, not its gram matrix).
const RANK_TOL: f64 = 1e-10;

fn gram_condition(gram: &DMatrix<f64>) -> f64 {
    let sv = gram.clone().singular_values();
    let max = sv.max();
    let min = sv.min().max(0.0);
    if min <= 0.0 {
        f64::INFINITY
    } else {
        // cond(A) = sqrt(cond(A^T A))
        (max / min).sqrt()
    }
}

fn ridge_lambda(gram: &DMatrix<f64>) -> f64 {
    let n = gram.nrows() as f64;
    let lambda = 1e-10 * gram.trace() / n;
    if lambda > 0.0 {
        lambda
    } else {
        1e-30
    }
}

fn solve_gram(gram: DMatrix<f64>, rhs: DMatrix<f64>) -> Option<DMatrix<f64>> {
    gram.cholesky().map(|chol| chol.solve(&rhs))
}

/// `A+ = (A^T A)^-1 A^T` for a full-column-rank `m x n` matrix with `m >= n`.
pub fn pseudoinverse(a: &DMatrix<f64>) -> Result<DMatrix<f64>> {
    if a.nrows() < a.ncols() {
        return Err(Error::ShapeMismatch(format!(
            "pseudoinverse expects m >= n, got {}x{}",
            a.nrows(),
            a.ncols()
        )));
    }
    let gram = a.transpose() * a;
    let cond = gram_condition(&gram);
    if !cond.is_finite() || cond > 1.0 / RANK_TOL {
        return Err(Error::RankDeficient {
            cond,
            context: format!("{}x{} design matrix", a.nrows(), a.ncols()),
        });
    }
    solve_gram(gram, a.transpose()).ok_or(Error::RankDeficient {
        cond,
        context: "normal equations are not positive definite".into(),
    })
}

/// Pseudoinverse with a ridge fallback for rank-deficient inputs. The boolean
/// reports whether regularization kicked in.
pub fn pseudoinverse_ridged(a: &DMatrix<f64>) -> (DMatrix<f64>, bool) {
    match pseudoinverse(a) {
        Ok(p) => (p, false),
        Err(_) => {
            let mut gram = a.transpose() * a;
            let lambda = ridge_lambda(&gram);
            for i in 0..gram.nrows() {
                gram[(i, i)] += lambda;
            }
            let p = solve_gram(gram, a.transpose())
                .expect("ridged normal equations are positive definite");
            (p, true)
        }
    }
}

/// Least-squares solve of `A X ~ B` for all columns of `B` at once, with the
/// same ridge fallback as [`pseudoinverse_ridged`].
pub fn lstsq_ridged(a: &DMatrix<f64>, b: &DMatrix<f64>) -> (DMatrix<f64>, bool) {
    let gram = a.transpose() * a;
    let rhs = a.transpose() * b;
    let cond = gram_condition(&gram);
    if cond.is_finite() && cond <= 1.0 / RANK_TOL {
        if let Some(x) = solve_gram(gram.clone(), rhs.clone()) {
            return (x, false);
        }
    }
    let mut gram = gram;
    let lambda = ridge_lambda(&gram);
    for i in 0..gram.nrows() {
        gram[(i, i)] += lambda;
    }
    let x = solve_gram(gram, rhs).expect("ridged normal equations are positive definite");
    (x, true)
}

/// The 3x3 map `M` minimizing `||A M - B||_F^2` for `m x 3` inputs.
pub fn fit_linear_map(a: &DMatrix<f64>, b: &DMatrix<f64>) -> Result<Matrix3<f64>> {
    check_map_shapes(a, b)?;
    let p = pseudoinverse(a)?;
    let m = p * b;
    Ok(Matrix3::from_iterator(m.iter().cloned()))
}

/// Like [`fit_linear_map`] but regularizes instead of failing on
/// rank-deficient data; the flag reports when that happened.
pub fn fit_linear_map_ridged(a: &DMatrix<f64>, b: &DMatrix<f64>) -> Result<(Matrix3<f64>, bool)> {
    check_map_shapes(a, b)?;
    let (x, ridged) = lstsq_ridged(a, b);
    Ok((Matrix3::from_iterator(x.iter().cloned()), ridged))
}

fn check_map_shapes(a: &DMatrix<f64>, b: &DMatrix<f64>) -> Result<()> {
    if a.ncols() != 3 || b.ncols() != 3 || a.nrows() != b.nrows() {
        return Err(Error::ShapeMismatch(format!(
            "fit_linear_map expects m x 3 inputs of equal height, got {}x{} and {}x{}",
            a.nrows(),
            a.ncols(),
            b.nrows(),
            b.ncols()
        )));
    }
    Ok(())
}

/// Per-row least-squares scalars: for each row `j`, the `alpha_j` minimizing
/// `||alpha * q_j - x_j||^2`, i.e. `(q_j . x_j) / (q_j . q_j)`. An all-zero
/// row gets `alpha = 0` (the limit of the normal equation) and its index is
/// reported back.
pub fn fit_row_scalars(q: &DMatrix<f64>, x: &DMatrix<f64>) -> Result<(DVector<f64>, Vec<usize>)> {
    if q.shape() != x.shape() {
        return Err(Error::ShapeMismatch(format!(
            "fit_row_scalars expects equal shapes, got {}x{} and {}x{}",
            q.nrows(),
            q.ncols(),
            x.nrows(),
            x.ncols()
        )));
    }
    let mut alphas = DVector::zeros(q.nrows());
    let mut zero_rows = Vec::new();
    for j in 0..q.nrows() {
        let mut vv = 0.0;
        let mut vw = 0.0;
        for k in 0..q.ncols() {
            vv += q[(j, k)] * q[(j, k)];
            vw += q[(j, k)] * x[(j, k)];
        }
        if vv == 0.0 {
            zero_rows.push(j);
        } else {
            alphas[j] = vw / vv;
        }
    }
    Ok((alphas, zero_rows))
}

/// The stacked least-squares system whose unknown is the per-wavelength
/// filter: `V f` reproduces the stacked `vec(C_j^T diag(f) Q_j M_j)` blocks
/// and `w` stacks the corresponding targets.
#[derive(Debug, Clone)]
pub struct FilterSystem {
    v: DMatrix<f64>,
    w: DVector<f64>,
}

impl FilterSystem {
    pub fn design(&self) -> &DMatrix<f64> {
        &self.v
    }

    pub fn target(&self) -> &DVector<f64> {
        &self.w
    }

    pub fn apply(&self, f: &DVector<f64>) -> DVector<f64> {
        &self.v * f
    }

    pub fn residual_sq(&self, f: &DVector<f64>) -> f64 {
        (self.apply(f) - &self.w).norm_squared()
    }

    /// `f = V+ w`, falling back to a ridged solve (flagged) when `V` loses
    /// column rank.
    pub fn solve_unconstrained(&self) -> (DVector<f64>, bool) {
        let (x, ridged) = lstsq_ridged(&self.v, &DMatrix::from_column_slice(self.w.len(), 1, self.w.as_slice()));
        (DVector::from_column_slice(x.as_slice()), ridged)
    }
}

/// Builds the stacked system for signal sets `C_j`, sensitivities `Q_j`,
/// correction maps `M_j` and per-condition targets (each `n_j x 3`).
///
/// Column `i` of each block is `vec(C_j^T D_i Q_j M_j)` where `D_i` picks out
/// wavelength `i`; equivalently the outer product of signal row `i` with row
/// `i` of `Q_j M_j`, stacked column-major.
pub fn build_filter_system(
    signals: &[&DMatrix<f64>],
    sensors: &[&DMatrix<f64>],
    maps: &[Matrix3<f64>],
    targets: &[&DMatrix<f64>],
) -> Result<FilterSystem> {
    let cnt = signals.len();
    if cnt == 0 {
        return Err(Error::ShapeMismatch("no lighting conditions".into()));
    }
    if sensors.len() != cnt || maps.len() != cnt || targets.len() != cnt {
        return Err(Error::ShapeMismatch(format!(
            "inconsistent condition counts: {} signal sets, {} sensor sets, {} maps, {} targets",
            cnt,
            sensors.len(),
            maps.len(),
            targets.len()
        )));
    }
    let nwl = signals[0].nrows();
    let mut total_rows = 0usize;
    for j in 0..cnt {
        if signals[j].nrows() != nwl || sensors[j].nrows() != nwl || sensors[j].ncols() != 3 {
            return Err(Error::ShapeMismatch(format!(
                "condition {j}: signals are {}x{}, sensors are {}x{}",
                signals[j].nrows(),
                signals[j].ncols(),
                sensors[j].nrows(),
                sensors[j].ncols()
            )));
        }
        if targets[j].nrows() != signals[j].ncols() || targets[j].ncols() != 3 {
            return Err(Error::ShapeMismatch(format!(
                "condition {j}: target is {}x{}, expected {}x3",
                targets[j].nrows(),
                targets[j].ncols(),
                signals[j].ncols()
            )));
        }
        total_rows += 3 * signals[j].ncols();
    }

    let mut v = DMatrix::zeros(total_rows, nwl);
    let mut w = DVector::zeros(total_rows);
    let mut offset = 0usize;
    for j in 0..cnt {
        let n = signals[j].ncols();
        let effective = sensors[j] * dyn3(&maps[j]);
        for i in 0..nwl {
            for k in 0..3 {
                let scale = effective[(i, k)];
                if scale == 0.0 {
                    continue;
                }
                for s in 0..n {
                    v[(offset + k * n + s, i)] = signals[j][(i, s)] * scale;
                }
            }
        }
        for k in 0..3 {
            for s in 0..n {
                w[offset + k * n + s] = targets[j][(s, k)];
            }
        }
        offset += 3 * n;
    }
    Ok(FilterSystem { v, w })
}

/// A 3x3 static matrix widened to a dynamic one (nalgebra cannot multiply
/// the two shapes directly).
pub fn dyn3(m: &Matrix3<f64>) -> DMatrix<f64> {
    DMatrix::from_column_slice(3, 3, m.as_slice())
}
