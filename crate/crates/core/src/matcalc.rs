//! Dense matrix-calculus kernel: column-stacking `vec`, Kronecker products,
//! the commutation (transposition) matrix, symmetric square roots and the
//! Moore-Penrose pseudoinverse.
//!
//! Conventions: `vec` stacks columns, so entry `(i, j)` of an `m x n` matrix
//! lands at index `i + m * j` (zero-based). With that convention
//! `vec(B X A^T) = (A ⊗ B) vec(X)`, and every Jacobian in this crate is a
//! matrix mapping `vec(dX)` to `vec(dF)`.

use std::ops::Deref;

use nalgebra::{DMatrix, DVector, SymmetricEigen};

use crate::error::{Error, Result};
use crate::policy::NumericPolicy;

pub type Matrix = DMatrix<f64>;
pub type Vector = DVector<f64>;

/// A square matrix that is exactly symmetric.
///
/// Construction averages the input with its transpose, so `s[(i, j)] == s[(j, i)]`
/// holds bit for bit afterwards.
#[derive(Debug, Clone, PartialEq)]
pub struct SymmetricMatrix(Matrix);

impl SymmetricMatrix {
    pub fn new(m: Matrix) -> Result<Self> {
        if !m.is_square() {
            return Err(Error::dim(
                "SymmetricMatrix::new",
                "square matrix",
                format!("{}x{}", m.nrows(), m.ncols()),
            ));
        }
        if m.nrows() == 0 {
            return Err(Error::dim("SymmetricMatrix::new", "order >= 1", "0"));
        }
        if m.iter().any(|x| !x.is_finite()) {
            return Err(Error::Validation(vec!["matrix has non-finite entries".into()]));
        }
        Ok(Self::symmetrize(m))
    }

    /// Symmetrize without validation; used internally on results of exact algebra.
    pub(crate) fn symmetrize(m: Matrix) -> Self {
        let t = m.transpose();
        SymmetricMatrix((m + t) * 0.5)
    }

    pub fn identity(n: usize) -> Self {
        SymmetricMatrix(Matrix::identity(n, n))
    }

    pub fn from_diagonal(d: &[f64]) -> Self {
        SymmetricMatrix(Matrix::from_diagonal(&Vector::from_column_slice(d)))
    }

    pub fn order(&self) -> usize {
        self.0.nrows()
    }

    pub fn as_matrix(&self) -> &Matrix {
        &self.0
    }

    pub fn into_inner(self) -> Matrix {
        self.0
    }

    /// Eigenvalues in ascending order.
    pub fn eigenvalues(&self) -> Vec<f64> {
        let mut ev: Vec<f64> = SymmetricEigen::new(self.0.clone()).eigenvalues.iter().copied().collect();
        ev.sort_by(f64::total_cmp);
        ev
    }

    pub fn min_eigenvalue(&self) -> f64 {
        self.eigenvalues()[0]
    }

    /// Spectral norm (largest absolute eigenvalue).
    pub fn spectral_norm(&self) -> f64 {
        self.eigenvalues().iter().fold(0.0_f64, |a, &b| a.max(b.abs()))
    }

    pub fn is_positive_definite(&self, policy: &NumericPolicy) -> bool {
        let ev = self.eigenvalues();
        let scale = ev.iter().fold(0.0_f64, |a, &b| a.max(b.abs()));
        ev[0] > policy.psd_rtol * scale && ev[0] > 0.0
    }

    /// Inverse of a positive definite matrix.
    pub fn inverse(&self) -> Result<SymmetricMatrix> {
        let chol = self
            .0
            .clone()
            .cholesky()
            .ok_or_else(|| Error::singular("symmetric matrix (Cholesky failed)"))?;
        Ok(SymmetricMatrix::symmetrize(chol.inverse()))
    }

    /// `ln det` of a positive definite matrix.
    pub fn log_det(&self) -> Result<f64> {
        let chol = self
            .0
            .clone()
            .cholesky()
            .ok_or_else(|| Error::singular("symmetric matrix (Cholesky failed)"))?;
        Ok(2.0 * chol.l_dirty().diagonal().iter().map(|d| d.ln()).sum::<f64>())
    }

    /// Quadratic form `v^T S v`.
    pub fn quad_form(&self, v: &Vector) -> f64 {
        v.dot(&(&self.0 * v))
    }
}

impl Deref for SymmetricMatrix {
    type Target = Matrix;
    fn deref(&self) -> &Matrix {
        &self.0
    }
}

impl From<SymmetricMatrix> for Matrix {
    fn from(s: SymmetricMatrix) -> Matrix {
        s.0
    }
}

/// Stack the columns of `m` into a vector of length `rows * cols`.
pub fn vec(m: &Matrix) -> Vector {
    // nalgebra storage is column-major, so the raw slice is already vec(M).
    Vector::from_column_slice(m.as_slice())
}

/// Inverse of [`vec`].
pub fn unvec(v: &[f64], rows: usize, cols: usize) -> Result<Matrix> {
    if v.len() != rows * cols {
        return Err(Error::dim("unvec", rows * cols, v.len()));
    }
    Ok(Matrix::from_column_slice(rows, cols, v))
}

/// Kronecker product: `(A ⊗ B)[n*i + k, q*j + l] = A[i, j] * B[k, l]` for `B` of size `n x q`.
pub fn kron(a: &Matrix, b: &Matrix) -> Matrix {
    let (m, p) = a.shape();
    let (n, q) = b.shape();
    let mut out = Matrix::zeros(m * n, p * q);
    for j in 0..p {
        for i in 0..m {
            let aij = a[(i, j)];
            if aij == 0.0 {
                continue;
            }
            for l in 0..q {
                for k in 0..n {
                    out[(n * i + k, q * j + l)] = aij * b[(k, l)];
                }
            }
        }
    }
    out
}

/// The `mn x mn` permutation `T` with `T vec(M) = vec(M^T)` for every `m x n` matrix `M`.
pub fn commutation(m: usize, n: usize) -> Matrix {
    let mut t = Matrix::zeros(m * n, m * n);
    for i in 0..m {
        for j in 0..n {
            t[(j + n * i, i + m * j)] = 1.0;
        }
    }
    t
}

/// Projector `(I + T_{n,n}) / 2` onto vectorized symmetric `n x n` matrices.
pub fn symmetrizer(n: usize) -> Matrix {
    (Matrix::identity(n * n, n * n) + commutation(n, n)) * 0.5
}

fn eigen_checked(s: &SymmetricMatrix, policy: &NumericPolicy, what: &str) -> Result<(SymmetricEigen<f64, nalgebra::Dyn>, f64)> {
    let eig = SymmetricEigen::new(s.as_matrix().clone());
    let scale = eig.eigenvalues.iter().fold(0.0_f64, |a, &b| a.max(b.abs()));
    let tol = policy.psd_rtol * scale;
    if let Some(&worst) = eig.eigenvalues.iter().min_by(|a, b| a.total_cmp(b)) {
        if worst < -tol {
            return Err(Error::NotPsd {
                what: what.to_string(),
                eigenvalue: worst,
                tolerance: tol,
            });
        }
    }
    Ok((eig, tol))
}

fn rebuild(eig: &SymmetricEigen<f64, nalgebra::Dyn>, f: impl Fn(f64) -> f64) -> SymmetricMatrix {
    let q = &eig.eigenvectors;
    let d = Vector::from_iterator(eig.eigenvalues.len(), eig.eigenvalues.iter().map(|&l| f(l)));
    SymmetricMatrix::symmetrize(q * Matrix::from_diagonal(&d) * q.transpose())
}

/// The unique positive semidefinite square root.
///
/// Eigenvalues in `[-psd_rtol * |S|, 0]` are clamped to zero.
pub fn sym_sqrt(s: &SymmetricMatrix, policy: &NumericPolicy) -> Result<SymmetricMatrix> {
    let (eig, _) = eigen_checked(s, policy, "sym_sqrt argument")?;
    Ok(rebuild(&eig, |l| l.max(0.0).sqrt()))
}

/// Inverse of the positive definite square root.
pub fn sym_inv_sqrt(s: &SymmetricMatrix, policy: &NumericPolicy) -> Result<SymmetricMatrix> {
    let (eig, tol) = eigen_checked(s, policy, "sym_inv_sqrt argument")?;
    if eig.eigenvalues.iter().any(|&l| l <= tol || l <= 0.0) {
        return Err(Error::singular("sym_inv_sqrt argument"));
    }
    Ok(rebuild(&eig, |l| 1.0 / l.sqrt()))
}

/// Apply a scalar function to the spectrum of a PSD matrix.
pub(crate) fn sym_map(s: &SymmetricMatrix, policy: &NumericPolicy, what: &str, f: impl Fn(f64) -> f64) -> Result<SymmetricMatrix> {
    let (eig, _) = eigen_checked(s, policy, what)?;
    Ok(rebuild(&eig, |l| f(l.max(0.0))))
}

/// Moore-Penrose pseudoinverse through the SVD; singular values below
/// `pinv_rtol * s_max` are dropped.
pub fn pinv(m: &Matrix, policy: &NumericPolicy) -> Matrix {
    let (r, c) = m.shape();
    let svd = m.clone().svd(true, true);
    let u = svd.u.expect("u requested");
    let v_t = svd.v_t.expect("v_t requested");
    let smax = svd.singular_values.iter().fold(0.0_f64, |a, &b| a.max(b));
    let cut = policy.pinv_rtol * smax;
    let mut out = Matrix::zeros(c, r);
    for (k, &s) in svd.singular_values.iter().enumerate() {
        if s > cut && s > 0.0 {
            out += (v_t.row(k).transpose() / s) * u.column(k).transpose();
        }
    }
    out
}

/// Numerical rank with the `rank_rtol` threshold.
pub fn rank(m: &Matrix, policy: &NumericPolicy) -> usize {
    let sv = m.clone().singular_values();
    let smax = sv.iter().fold(0.0_f64, |a, &b| a.max(b));
    if smax == 0.0 {
        return 0;
    }
    sv.iter().filter(|&&s| s > policy.rank_rtol * smax).count()
}

/// 2-norm condition number (infinite for singular input).
pub fn condition_number(m: &Matrix) -> f64 {
    let sv = m.clone().singular_values();
    let smax = sv.iter().fold(0.0_f64, |a, &b| a.max(b));
    let smin = sv.iter().fold(f64::INFINITY, |a, &b| a.min(b));
    if smin == 0.0 {
        f64::INFINITY
    } else {
        smax / smin
    }
}

/// Solve `lhs * X = rhs` by LU, falling back to `pinv(lhs) * rhs` when
/// `lhs` is worse conditioned than `policy.cond_limit`.
pub fn solve_or_pinv(lhs: &Matrix, rhs: &Matrix, policy: &NumericPolicy) -> Matrix {
    if condition_number(lhs) <= policy.cond_limit {
        if let Some(x) = lhs.clone().lu().solve(rhs) {
            return x;
        }
    }
    pinv(lhs, policy) * rhs
}

/// Inverse of a general square matrix.
pub fn inverse(m: &Matrix, what: &str) -> Result<Matrix> {
    m.clone().try_inverse().ok_or_else(|| Error::singular(what.to_string()))
}

/// Frobenius distance normalized by `max(1, |reference|)`.
pub fn rel_frobenius(a: &Matrix, reference: &Matrix) -> f64 {
    (a - reference).norm() / reference.norm().max(1.0)
}

pub(crate) fn check_finite(m: &Matrix, what: &str) -> Result<()> {
    if m.iter().all(|x| x.is_finite()) {
        Ok(())
    } else {
        Err(Error::Validation(vec![format!("{what} has non-finite entries")]))
    }
}
