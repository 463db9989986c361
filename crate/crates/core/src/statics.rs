//! Comparative statics of the identification map `(Sigma_X, Sigma_XY, Sigma_Y) -> A`
//! and of the equilibrium map `(A, Sigma_X, Sigma_Y) -> Sigma_XY`, plus a
//! central finite-difference Jacobian engine used as the independent check.
//!
//! All Jacobians map `vec(d input)` to `vec(d output)` with column-stacking `vec`.
//!
//! The identification map is differentiated in its regression form
//! `A = sigma G`, `G = Sigma_X^{-1} Sigma_XY V^{-1}`, `V = Sigma_Y - Sigma_XY^T Sigma_X^{-1} Sigma_XY`:
//!
//! ```text
//! dA/dSigma_XY = sigma [ (V^{-T} ⊗ Q) + (G^T ⊗ G) T_{m,n} ]
//! dA/dSigma_X  = -sigma (G^T ⊗ Q)
//! dA/dSigma_Y  = -sigma (V^{-T} ⊗ G),         Q = Sigma_X^{-1} + G Sigma_XY^T Sigma_X^{-1}
//! ```
//!
//! For square `Sigma_XY` these coincide with the Kronecker/pseudoinverse
//! expressions in [`kronecker_identification_jacobians`]; unlike those they
//! remain valid for `m != n` and at `Sigma_XY = 0`. The equilibrium Jacobians
//! follow from the implicit function theorem applied to `identify(solve(A)) = A`.

use serde::Serialize;

use crate::error::{Error, Result};
use crate::matcalc::{commutation, kron, pinv, solve_or_pinv, symmetrizer, unvec, vec, Matrix, SymmetricMatrix};
use crate::model::{Equilibrium, MatchingModel, MomentSet};
use crate::policy::NumericPolicy;

/// Derivatives of the estimator `A(Sigma_X, Sigma_XY, Sigma_Y)`.
#[derive(Debug, Clone, PartialEq)]
pub struct IdentificationJacobians {
    /// `mn x mn`
    pub da_dsxy: Matrix,
    /// `mn x m^2`, with `Sigma_X` treated as an unconstrained matrix.
    pub da_dsx: Matrix,
    /// `mn x n^2`, with `Sigma_Y` treated as an unconstrained matrix.
    pub da_dsy: Matrix,
}

/// Derivatives of the equilibrium cross-covariance `Sigma_XY(A, Sigma_X, Sigma_Y)`.
#[derive(Debug, Clone, PartialEq)]
pub struct EquilibriumJacobians {
    pub dsxy_da: Matrix,
    /// `mn x m^2`, already restricted to symmetric directions.
    pub dsxy_dsx: Matrix,
    /// `mn x n^2`, already restricted to symmetric directions.
    pub dsxy_dsy: Matrix,
}

/// All six comparative-statics matrices at a common point.
#[derive(Debug, Clone, PartialEq)]
pub struct JacobianSet {
    pub da_dsxy: Matrix,
    pub da_dsx: Matrix,
    pub da_dsy: Matrix,
    pub dsxy_da: Matrix,
    pub dsxy_dsx: Matrix,
    pub dsxy_dsy: Matrix,
    pub base_point: MomentSet,
    pub sigma: f64,
}

impl JacobianSet {
    pub fn identification(&self) -> IdentificationJacobians {
        IdentificationJacobians {
            da_dsxy: self.da_dsxy.clone(),
            da_dsx: self.da_dsx.clone(),
            da_dsy: self.da_dsy.clone(),
        }
    }

    /// `|dA/dSigma_XY * dSigma_XY/dA - I|_F`.
    pub fn inverse_relation_residual(&self) -> f64 {
        let k = self.da_dsxy.nrows();
        (&self.da_dsxy * &self.dsxy_da - Matrix::identity(k, k)).norm()
    }
}

struct RegressionParts {
    g: Matrix,
    v_inv: Matrix,
    q: Matrix,
}

fn regression_parts(moments: &MomentSet, sigma: f64) -> Result<RegressionParts> {
    let sx_inv = moments.sigma_x.inverse()?;
    let s = &moments.cross;
    let p = sx_inv.as_matrix() * s;
    let v = SymmetricMatrix::symmetrize(moments.sigma_y.as_matrix() - s.transpose() * &p);
    let v_inv = v.inverse().map_err(|_| Error::DegenerateConditional)?;
    let _ = sigma;
    let g = &p * v_inv.as_matrix();
    let q = sx_inv.as_matrix() + &g * p.transpose();
    Ok(RegressionParts {
        g,
        v_inv: v_inv.into_inner(),
        q,
    })
}

/// Closed-form `dA/dSigma_XY`, `dA/dSigma_X`, `dA/dSigma_Y` at `moments`, for `A = identify(moments, sigma)`.
pub fn identification_jacobians(moments: &MomentSet, sigma: f64) -> Result<IdentificationJacobians> {
    let (m, n) = (moments.m(), moments.n());
    let RegressionParts { g, v_inv, q } = regression_parts(moments, sigma)?;
    let v_inv_t = v_inv.transpose();
    let da_dsxy = (kron(&v_inv_t, &q) + kron(&g.transpose(), &g) * commutation(m, n)) * sigma;
    let da_dsx = kron(&g.transpose(), &q) * (-sigma);
    let da_dsy = kron(&v_inv_t, &g) * (-sigma);
    Ok(IdentificationJacobians { da_dsxy, da_dsx, da_dsy })
}

/// The same three derivatives written with Kronecker products and pseudoinverses
/// of `Sigma_XY`:
///
/// ```text
/// dA/dSigma_XY = (A^T ⊗ A) [ (Sigma_X Sigma_XY^{+T} ⊗ Sigma_Y Sigma_XY^+) + T ] / sigma
/// dA/dSigma_X  = -(A^T ⊗ A) [ I ⊗ Sigma_Y Sigma_XY^+ ] / sigma
/// dA/dSigma_Y  = -(A^T ⊗ A) [ Sigma_X Sigma_XY^{+T} ⊗ I ] / sigma
/// ```
///
/// Exact only for square, invertible `Sigma_XY`; errors with `SingularCross` otherwise.
pub fn kronecker_identification_jacobians(moments: &MomentSet, sigma: f64, policy: &NumericPolicy) -> Result<IdentificationJacobians> {
    let (m, n) = (moments.m(), moments.n());
    let s = &moments.cross;
    if crate::matcalc::rank(s, policy) < m.min(n) {
        return Err(Error::SingularCross);
    }
    let a = crate::identification::identify(moments, sigma)?.affinity;
    let sp = pinv(s, policy);
    let left = moments.sigma_x.as_matrix() * sp.transpose();
    let right = moments.sigma_y.as_matrix() * &sp;
    let ata = kron(&a.transpose(), &a) / sigma;
    Ok(IdentificationJacobians {
        da_dsxy: &ata * (kron(&left, &right) + commutation(m, n)),
        da_dsx: -(&ata * kron(&Matrix::identity(n, n), &right)),
        da_dsy: -(&ata * kron(&left, &Matrix::identity(m, m))),
    })
}

/// Kronecker/pseudoinverse form of the equilibrium Jacobians (square case):
///
/// ```text
/// dSigma_XY/dA       = sigma K^{-1} (A^{+T} ⊗ A^+)
/// dSigma_XY/dSigma_X = K^{-1} (I ⊗ Sigma_Y Sigma_XY^+)
/// dSigma_XY/dSigma_Y = K^{-1} (Sigma_X Sigma_XY^{+T} ⊗ I),   K = (Sigma_X Sigma_XY^{+T} ⊗ Sigma_Y Sigma_XY^+) + T
/// ```
///
/// The `Sigma_X`, `Sigma_Y` blocks are returned unprojected (free-matrix directions).
pub fn kronecker_equilibrium_jacobians(model: &MatchingModel, eq: &Equilibrium, policy: &NumericPolicy) -> Result<EquilibriumJacobians> {
    let (m, n) = (model.m(), model.n());
    let s = &eq.cross_cov;
    if crate::matcalc::rank(s, policy) < m.min(n) {
        return Err(Error::SingularCross);
    }
    if crate::matcalc::rank(&model.affinity, policy) < m.min(n) {
        return Err(Error::RankDeficientAffinity {
            rank: crate::matcalc::rank(&model.affinity, policy),
            expected: m.min(n),
        });
    }
    let sp = pinv(s, policy);
    let ap = pinv(&model.affinity, policy);
    let left = model.sigma_x.as_matrix() * sp.transpose();
    let right = model.sigma_y.as_matrix() * &sp;
    let k = kron(&left, &right) + commutation(m, n);
    Ok(EquilibriumJacobians {
        dsxy_da: solve_or_pinv(&k, &kron(&ap.transpose(), &ap), policy) * model.sigma,
        dsxy_dsx: solve_or_pinv(&k, &kron(&Matrix::identity(n, n), &right), policy),
        dsxy_dsy: solve_or_pinv(&k, &kron(&left, &Matrix::identity(m, m)), policy),
    })
}

/// Closed-form derivatives of the equilibrium cross-covariance.
///
/// With `J_S`, `J_X`, `J_Y` the identification Jacobians at the equilibrium
/// moments, `dSigma_XY/dA = J_S^{-1}`, `dSigma_XY/dSigma_X = -J_S^{-1} J_X P_m`
/// and `dSigma_XY/dSigma_Y = -J_S^{-1} J_Y P_n`, where `P_k = (I + T_{k,k}) / 2`
/// restricts to symmetric perturbations.
pub fn equilibrium_jacobians(model: &MatchingModel, eq: &Equilibrium) -> Result<EquilibriumJacobians> {
    equilibrium_jacobians_with(model, eq, &NumericPolicy::default(), false)
}

/// As [`equilibrium_jacobians`]; with `check` set, also compares against
/// finite differences of `solve` and logs a warning on disagreement.
pub fn equilibrium_jacobians_with(
    model: &MatchingModel,
    eq: &Equilibrium,
    policy: &NumericPolicy,
    check: bool,
) -> Result<EquilibriumJacobians> {
    let (m, n) = (model.m(), model.n());
    let ident = identification_jacobians(&eq.moments(0), model.sigma)?;
    let js = &ident.da_dsxy;
    let id = Matrix::identity(m * n, m * n);
    let out = EquilibriumJacobians {
        dsxy_da: solve_or_pinv(js, &id, policy),
        dsxy_dsx: -solve_or_pinv(js, &(&ident.da_dsx * symmetrizer(m)), policy),
        dsxy_dsy: -solve_or_pinv(js, &(&ident.da_dsy * symmetrizer(n)), policy),
    };
    if check {
        let fd = fd_equilibrium_jacobians(model, policy)?;
        let worst = relative_discrepancy(&out, &fd);
        if worst > 1e-5 {
            log::warn!("equilibrium Jacobians disagree with finite differences (relative {worst:e})");
        } else {
            log::debug!("equilibrium Jacobians match finite differences (relative {worst:e})");
        }
    }
    Ok(out)
}

fn relative_discrepancy(a: &EquilibriumJacobians, b: &EquilibriumJacobians) -> f64 {
    [
        (&a.dsxy_da, &b.dsxy_da),
        (&a.dsxy_dsx, &b.dsxy_dsx),
        (&a.dsxy_dsy, &b.dsxy_dsy),
    ]
    .iter()
    .map(|(x, y)| (*x - *y).norm() / y.norm().max(1.0))
    .fold(0.0, f64::max)
}

/// All six matrices at the equilibrium of `model`.
pub fn jacobian_set(model: &MatchingModel, eq: &Equilibrium) -> Result<JacobianSet> {
    let moments = eq.moments(0);
    let ident = identification_jacobians(&moments, model.sigma)?;
    let equil = equilibrium_jacobians(model, eq)?;
    Ok(JacobianSet {
        da_dsxy: ident.da_dsxy,
        da_dsx: ident.da_dsx,
        da_dsy: ident.da_dsy,
        dsxy_da: equil.dsxy_da,
        dsxy_dsx: equil.dsxy_dsx,
        dsxy_dsy: equil.dsxy_dsy,
        base_point: moments,
        sigma: model.sigma,
    })
}

/// Direction family for [`fd_jacobian`].
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum FdMode {
    /// Perturb each entry independently.
    Full,
    /// Perturb along `(E_ij + E_ji) / 2`; column `(i, j)` of the result is the
    /// derivative in that direction, i.e. `J (I + T) / 2`.
    Symmetric,
}

/// Step `fd_step * (1 + |base|_F)`.
pub fn default_step(base: &Matrix, policy: &NumericPolicy) -> f64 {
    policy.fd_step * (1.0 + base.norm())
}

/// Central-difference Jacobian of a matrix-valued function of a matrix, in vec order.
pub fn fd_jacobian<F>(f: F, at: &Matrix, step: f64, mode: FdMode) -> Result<Matrix>
where
    F: Fn(&Matrix) -> Result<Matrix>,
{
    if !(step > 0.0) {
        return Err(Error::InvalidConfig(format!("finite-difference step must be positive, got {step}")));
    }
    let (r, c) = at.shape();
    if mode == FdMode::Symmetric && r != c {
        return Err(Error::dim("fd_jacobian (symmetric mode)", "square base point", format!("{r}x{c}")));
    }
    let base = f(at).map_err(|e| Error::EvaluationFailed {
        index: usize::MAX,
        source: Box::new(e),
    })?;
    let rows = base.len();
    let mut jac = Matrix::zeros(rows, r * c);
    for k in 0..r * c {
        let (i, j) = (k % r, k / r);
        let mut dir = Matrix::zeros(r, c);
        match mode {
            FdMode::Full => dir[(i, j)] = 1.0,
            FdMode::Symmetric => {
                dir[(i, j)] += 0.5;
                dir[(j, i)] += 0.5;
            }
        }
        let eval = |sign: f64| {
            f(&(at + &dir * (sign * step))).map_err(|e| Error::EvaluationFailed {
                index: k,
                source: Box::new(e),
            })
        };
        let plus = eval(1.0)?;
        let minus = eval(-1.0)?;
        if plus.len() != rows || minus.len() != rows {
            return Err(Error::dim("fd_jacobian output", rows, plus.len()));
        }
        let col = (vec(&plus) - vec(&minus)) / (2.0 * step);
        jac.set_column(k, &col);
    }
    Ok(jac)
}

/// Finite-difference Jacobians of `identify` (symmetric directions for `Sigma_X`, `Sigma_Y`).
pub fn fd_identification_jacobians(moments: &MomentSet, sigma: f64, policy: &NumericPolicy) -> Result<IdentificationJacobians> {
    use crate::identification::identify;
    let with = |sx: &Matrix, sxy: &Matrix, sy: &Matrix| -> Result<Matrix> {
        let mm = MomentSet {
            sigma_x: SymmetricMatrix::symmetrize(sx.clone()),
            sigma_y: SymmetricMatrix::symmetrize(sy.clone()),
            cross: sxy.clone(),
            n_obs: moments.n_obs,
        };
        Ok(identify(&mm, sigma)?.affinity)
    };
    let sx = moments.sigma_x.as_matrix();
    let sy = moments.sigma_y.as_matrix();
    let s = &moments.cross;
    Ok(IdentificationJacobians {
        da_dsxy: fd_jacobian(|d| with(sx, d, sy), s, default_step(s, policy), FdMode::Full)?,
        da_dsx: fd_jacobian(|d| with(d, s, sy), sx, default_step(sx, policy), FdMode::Symmetric)?,
        da_dsy: fd_jacobian(|d| with(sx, s, d), sy, default_step(sy, policy), FdMode::Symmetric)?,
    })
}

/// Finite-difference Jacobians of `solve` (symmetric directions for `Sigma_X`, `Sigma_Y`).
pub fn fd_equilibrium_jacobians(model: &MatchingModel, policy: &NumericPolicy) -> Result<EquilibriumJacobians> {
    use crate::equilibrium::solve_with;
    let with = |a: &Matrix, sx: &Matrix, sy: &Matrix| -> Result<Matrix> {
        let mm = MatchingModel {
            affinity: a.clone(),
            sigma: model.sigma,
            sigma_x: SymmetricMatrix::symmetrize(sx.clone()),
            sigma_y: SymmetricMatrix::symmetrize(sy.clone()),
            split: None,
        };
        Ok(solve_with(&mm, policy)?.cross_cov)
    };
    let a = &model.affinity;
    let sx = model.sigma_x.as_matrix();
    let sy = model.sigma_y.as_matrix();
    Ok(EquilibriumJacobians {
        dsxy_da: fd_jacobian(|d| with(d, sx, sy), a, default_step(a, policy), FdMode::Full)?,
        dsxy_dsx: fd_jacobian(|d| with(a, d, sy), sx, default_step(sx, policy), FdMode::Symmetric)?,
        dsxy_dsy: fd_jacobian(|d| with(a, sx, d), sy, default_step(sy, policy), FdMode::Symmetric)?,
    })
}

/// Reshape a Jacobian column (a vectorized perturbation response) back to a matrix.
pub fn response(jac: &Matrix, column: usize, rows: usize, cols: usize) -> Result<Matrix> {
    let col: Vec<f64> = jac.column(column).iter().copied().collect();
    unvec(&col, rows, cols)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::equilibrium::solve;
    use approx::assert_relative_eq;

    fn golden_moments() -> MomentSet {
        let rho = (5f64.sqrt() - 1.0) / 2.0;
        MomentSet::new(
            SymmetricMatrix::identity(1),
            SymmetricMatrix::identity(1),
            Matrix::from_element(1, 1, rho),
            0,
        )
        .unwrap()
    }

    #[test]
    fn golden_identification_jacobians() {
        let rho = (5f64.sqrt() - 1.0) / 2.0;
        let j = identification_jacobians(&golden_moments(), 1.0).unwrap();
        // scalar oracle: A = rho / (1 - rho^2) with unit variances
        let oracle = (1.0 + rho * rho) / (1.0 - rho * rho).powi(2);
        assert_relative_eq!(j.da_dsxy[(0, 0)], oracle, epsilon = 1e-12);
        assert_relative_eq!(j.da_dsxy[(0, 0)], 1.0 / (rho * rho) + 1.0, epsilon = 1e-12);
        assert_relative_eq!(j.da_dsxy[(0, 0)], 3.6180340, epsilon = 1e-7);
        assert_relative_eq!(j.da_dsx[(0, 0)], -rho / (1.0 - rho * rho).powi(2), epsilon = 1e-12);
        assert_relative_eq!(j.da_dsx[(0, 0)], -1.6180340, epsilon = 1e-7);
        assert_relative_eq!(j.da_dsy[(0, 0)], -1.6180340, epsilon = 1e-7);
    }

    #[test]
    fn golden_equilibrium_jacobians() {
        let model = MatchingModel::standard(Matrix::from_element(1, 1, 1.0), 1.0).unwrap();
        let eq = solve(&model).unwrap();
        let j = equilibrium_jacobians(&model, &eq).unwrap();
        assert_relative_eq!(j.dsxy_da[(0, 0)], 1.0 / (2.5 + 1.25f64.sqrt()), epsilon = 1e-12);
        assert_relative_eq!(j.dsxy_da[(0, 0)], 0.2763932, epsilon = 1e-7);
        assert_relative_eq!(j.dsxy_dsx[(0, 0)], 0.4472136, epsilon = 1e-7);
        let fd = fd_equilibrium_jacobians(&model, &NumericPolicy::default()).unwrap();
        assert_relative_eq!(fd.dsxy_da[(0, 0)], j.dsxy_da[(0, 0)], epsilon = 1e-9);
        assert_relative_eq!(fd.dsxy_dsx[(0, 0)], j.dsxy_dsx[(0, 0)], epsilon = 1e-9);
        assert_relative_eq!(fd.dsxy_dsy[(0, 0)], j.dsxy_dsy[(0, 0)], epsilon = 1e-9);
    }

    #[test]
    fn diagonal_model_decouples() {
        let a = Matrix::from_diagonal(&crate::matcalc::Vector::from_column_slice(&[1.0, 2.0]));
        let model = MatchingModel::standard(a, 1.0).unwrap();
        let eq = solve(&model).unwrap();
        let j = equilibrium_jacobians(&model, &eq).unwrap();
        // vec indices of the diagonal entries (0,0) and (1,1) are 0 and 3
        for r in 0..4 {
            for c in 0..4 {
                let coupled = (r == c) || (r == 1 && c == 2) || (r == 2 && c == 1);
                if !coupled {
                    assert!(j.dsxy_da[(r, c)].abs() < 1e-10, "({r},{c}) = {}", j.dsxy_da[(r, c)]);
                }
            }
        }
    }

    #[test]
    fn zero_cross_covariance_is_handled() {
        let moments = MomentSet::new(SymmetricMatrix::identity(1), SymmetricMatrix::identity(1), Matrix::zeros(1, 1), 0).unwrap();
        let j = identification_jacobians(&moments, 1.0).unwrap();
        assert_relative_eq!(j.da_dsxy[(0, 0)], 1.0, epsilon = 1e-15);
        assert!(matches!(
            kronecker_identification_jacobians(&moments, 1.0, &NumericPolicy::default()),
            Err(Error::SingularCross)
        ));
        let fd = fd_identification_jacobians(&moments, 1.0, &NumericPolicy::default()).unwrap();
        assert_relative_eq!(fd.da_dsxy[(0, 0)], 1.0, epsilon = 1e-9);
    }

    #[test]
    fn fd_rejects_bad_step() {
        let err = fd_jacobian(|m| Ok(m.clone()), &Matrix::identity(2, 2), 0.0, FdMode::Full).unwrap_err();
        assert_eq!(err.code(), "INVALID_CONFIG");
    }

    #[test]
    fn fd_propagates_evaluation_failure() {
        let err = fd_jacobian(
            |m| {
                if m[(0, 0)] > 1.0 {
                    Err(Error::singular("probe"))
                } else {
                    Ok(m.clone())
                }
            },
            &Matrix::identity(1, 1),
            1e-3,
            FdMode::Full,
        )
        .unwrap_err();
        assert!(matches!(err, Error::EvaluationFailed { index: 0, .. }));
    }
}
