//! Small dense linear algebra and a damped Gauss-Newton driver.
//!
//! Everything here is sized for calibration problems: a few hundred rows and
//! at most a few dozen columns. Storage and decompositions come from
//! `nalgebra`; this module adds the rank guards, sign conventions and step
//! control the geometry code relies on.

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};

/// Singular values below this fraction of the largest are treated as zero.
pub const RANK_TOLERANCE: f64 = 1e-12;

const SVD_MAX_ITERATIONS: usize = 10_000;
const MAX_HALVINGS: usize = 20;

/// Dense real matrix with finite entries.
#[derive(Debug, Clone, PartialEq)]
pub struct MatrixMN(DMatrix<f64>);

impl MatrixMN {
    /// Builds a matrix from row-major entries.
    pub fn from_row_slice(rows: usize, cols: usize, entries: &[f64]) -> Result<Self> {
        if rows * cols != entries.len() {
            return Err(Error::ShapeMismatch(format!(
                "{rows}x{cols} matrix needs {} entries, got {}",
                rows * cols,
                entries.len()
            )));
        }
        Self::from_dmatrix(DMatrix::from_row_slice(rows, cols, entries))
    }

    pub fn from_dmatrix(m: DMatrix<f64>) -> Result<Self> {
        if m.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFinite("matrix entries"));
        }
        Ok(Self(m))
    }

    pub fn identity(n: usize) -> Self {
        Self(DMatrix::identity(n, n))
    }

    pub fn rows(&self) -> usize {
        self.0.nrows()
    }

    pub fn cols(&self) -> usize {
        self.0.ncols()
    }

    pub fn get(&self, row: usize, col: usize) -> f64 {
        self.0[(row, col)]
    }

    pub fn as_dmatrix(&self) -> &DMatrix<f64> {
        &self.0
    }

    pub fn into_dmatrix(self) -> DMatrix<f64> {
        self.0
    }

    pub fn mul_vec(&self, x: &[f64]) -> Vec<f64> {
        (&self.0 * DVector::from_column_slice(x)).iter().copied().collect()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct LeastSquaresSolution {
    pub solution: Vec<f64>,
    /// `|A·x − b|`, recomputed from the inputs.
    pub residual_norm: f64,
}

/// Minimizes `|A·x − b|²` for a tall matrix of full column rank.
///
/// Uses a Householder QR factorization; the rank guard is taken from the
/// singular values of the triangular factor, which equal those of `A`.
pub fn solve_least_squares(a: &MatrixMN, b: &[f64]) -> Result<LeastSquaresSolution> {
    let (rows, cols) = (a.rows(), a.cols());
    if b.len() != rows {
        return Err(Error::ShapeMismatch(format!(
            "right-hand side has {} entries for {rows} rows",
            b.len()
        )));
    }
    if rows < cols || cols == 0 {
        return Err(Error::ShapeMismatch(format!(
            "least squares needs rows >= cols > 0, got {rows}x{cols}"
        )));
    }
    if b.iter().any(|v| !v.is_finite()) {
        return Err(Error::NonFinite("right-hand side"));
    }

    let qr = a.0.clone().qr();
    let r = qr.r();
    let sv = r.singular_values();
    let largest = sv.max();
    let smallest = sv.min();
    if largest <= 0.0 || smallest < RANK_TOLERANCE * largest {
        let ratio = if largest > 0.0 { smallest / largest } else { 0.0 };
        return Err(Error::RankDeficient { ratio });
    }

    let mut qtb = DVector::from_column_slice(b);
    qr.q_tr_mul(&mut qtb);
    let rhs = qtb.rows(0, cols).into_owned();
    let x = r
        .solve_upper_triangular(&rhs)
        .ok_or(Error::RankDeficient { ratio: 0.0 })?;

    let residual = &a.0 * &x - DVector::from_column_slice(b);
    Ok(LeastSquaresSolution {
        solution: x.iter().copied().collect(),
        residual_norm: residual.norm(),
    })
}

/// Right singular vector belonging to the smallest singular value, along
/// with the spectrum needed for degeneracy checks.
#[derive(Debug, Clone, PartialEq)]
pub struct NullVector {
    pub vector: Vec<f64>,
    /// Singular values in ascending order. Matrices with fewer rows than
    /// columns are padded with zero rows, so the spectrum always has `cols`
    /// entries.
    pub singular_values: Vec<f64>,
}

impl NullVector {
    pub fn smallest(&self) -> f64 {
        self.singular_values[0]
    }

    pub fn second_smallest(&self) -> f64 {
        self.singular_values.get(1).copied().unwrap_or(0.0)
    }

    pub fn largest(&self) -> f64 {
        *self.singular_values.last().unwrap_or(&0.0)
    }
}

pub fn null_vector(a: &MatrixMN) -> Result<NullVector> {
    let (rows, cols) = (a.rows(), a.cols());
    if cols == 0 || rows + 1 < cols {
        return Err(Error::ShapeMismatch(format!(
            "nullspace needs rows >= cols - 1, got {rows}x{cols}"
        )));
    }
    // A thin SVD only returns min(rows, cols) right vectors, so pad short
    // matrices with zero rows. This leaves A^T A unchanged.
    let m = if rows < cols {
        let mut padded = DMatrix::zeros(cols, cols);
        padded.rows_mut(0, rows).copy_from(&a.0);
        padded
    } else {
        a.0.clone()
    };
    let svd = m
        .try_svd(false, true, f64::EPSILON, SVD_MAX_ITERATIONS)
        .ok_or(Error::NoConvergence {
            iterations: SVD_MAX_ITERATIONS,
        })?;
    let v_t = svd.v_t.expect("requested right singular vectors");

    let mut order: Vec<usize> = (0..svd.singular_values.len()).collect();
    order.sort_by(|&i, &j| svd.singular_values[i].total_cmp(&svd.singular_values[j]));
    let idx = order[0];

    let mut vector: Vec<f64> = v_t.row(idx).iter().copied().collect();
    let norm = vector.iter().map(|v| v * v).sum::<f64>().sqrt();
    vector.iter_mut().for_each(|v| *v /= norm);
    canonical_sign(&mut vector);

    Ok(NullVector {
        vector,
        singular_values: order.iter().map(|&i| svd.singular_values[i]).collect(),
    })
}

/// Unit vector `v` minimizing `|A·v|`, signed so its first nonzero entry is
/// positive.
pub fn smallest_right_singular_vector(a: &MatrixMN) -> Result<Vec<f64>> {
    null_vector(a).map(|n| n.vector)
}

/// Flips `v` so the first entry that is not numerically zero is positive.
pub fn canonical_sign(v: &mut [f64]) {
    let scale = v.iter().fold(0.0_f64, |m, x| m.max(x.abs()));
    let first = v.iter().copied().find(|x| x.abs() > 1e-12 * scale);
    if matches!(first, Some(x) if x < 0.0) {
        v.iter_mut().for_each(|x| *x = -*x);
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GaussNewtonOptions {
    pub max_iter: usize,
    /// Stop once the Euclidean norm of the full step falls below this.
    pub tol: f64,
}

impl Default for GaussNewtonOptions {
    fn default() -> Self {
        Self {
            max_iter: 50,
            tol: 1e-12,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct GaussNewtonReport {
    pub x: Vec<f64>,
    /// Accepted steps.
    pub iterations: usize,
    /// Final `|residual|²`.
    pub cost: f64,
    /// False when `max_iter` ran out before the step tolerance was met.
    pub converged: bool,
}

/// Gauss-Newton with step halving.
///
/// Each full step solves the linearized problem with [`solve_least_squares`].
/// A step is accepted only if it does not increase `|residual|²`; otherwise
/// it is halved up to 20 times. If no halving helps and the linear model still
/// predicts a meaningful decrease, the run has diverged. If the model predicts
/// no decrease, the iterate is already stationary and is returned as converged.
pub fn gauss_newton<R, J>(
    residual: R,
    jacobian: J,
    x0: &[f64],
    options: GaussNewtonOptions,
) -> Result<GaussNewtonReport>
where
    R: Fn(&[f64]) -> Vec<f64>,
    J: Fn(&[f64]) -> Result<MatrixMN>,
{
    let mut x = x0.to_vec();
    let mut r = residual(&x);
    let mut cost = sum_squares(&r);
    if !cost.is_finite() {
        return Err(Error::NonFinite("initial residual"));
    }

    for iteration in 0..options.max_iter {
        let jac = jacobian(&x)?;
        let neg_r: Vec<f64> = r.iter().map(|v| -v).collect();
        let step = solve_least_squares(&jac, &neg_r)?;
        let step_norm = norm(&step.solution);
        let predicted = cost - step.residual_norm * step.residual_norm;

        let mut scale = 1.0;
        let mut accepted = None;
        for _ in 0..=MAX_HALVINGS {
            let trial: Vec<f64> = x
                .iter()
                .zip(&step.solution)
                .map(|(xi, si)| xi + scale * si)
                .collect();
            let r_trial = residual(&trial);
            let c_trial = sum_squares(&r_trial);
            if c_trial.is_finite() && c_trial <= cost {
                accepted = Some((trial, r_trial, c_trial));
                break;
            }
            scale *= 0.5;
        }

        match accepted {
            Some((trial, r_trial, c_trial)) => {
                x = trial;
                r = r_trial;
                cost = c_trial;
                if step_norm < options.tol {
                    return Ok(GaussNewtonReport {
                        x,
                        iterations: iteration + 1,
                        cost,
                        converged: true,
                    });
                }
            }
            None => {
                if step_norm < options.tol || predicted <= 1e-9 * cost.max(f64::MIN_POSITIVE) {
                    return Ok(GaussNewtonReport {
                        x,
                        iterations: iteration,
                        cost,
                        converged: true,
                    });
                }
                return Err(Error::Diverged(format!(
                    "step halving failed at iteration {iteration} (cost {cost:e}, predicted decrease {predicted:e})"
                )));
            }
        }
    }

    Ok(GaussNewtonReport {
        x,
        iterations: options.max_iter,
        cost,
        converged: false,
    })
}

/// Forward-difference Jacobian of `residual` at `x`.
pub fn forward_difference_jacobian<R>(residual: R, x: &[f64]) -> Result<MatrixMN>
where
    R: Fn(&[f64]) -> Vec<f64>,
{
    let r0 = residual(x);
    let mut jac = DMatrix::zeros(r0.len(), x.len());
    let mut probe = x.to_vec();
    for j in 0..x.len() {
        let h = f64::EPSILON.sqrt() * x[j].abs().max(1.0);
        probe[j] = x[j] + h;
        // Use the representable step actually taken.
        let h = probe[j] - x[j];
        let rj = residual(&probe);
        probe[j] = x[j];
        for (i, (a, b)) in rj.iter().zip(&r0).enumerate() {
            jac[(i, j)] = (a - b) / h;
        }
    }
    MatrixMN::from_dmatrix(jac)
}

fn sum_squares(v: &[f64]) -> f64 {
    v.iter().map(|x| x * x).sum()
}

fn norm(v: &[f64]) -> f64 {
    sum_squares(v).sqrt()
}
