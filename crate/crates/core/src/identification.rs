//! Recovering the affinity matrix from second moments of matched pairs, its
//! sampling uncertainty, and the split of observed transfers.

use serde::Serialize;

use crate::error::{Error, Result};
use crate::matcalc::{commutation, kron, pinv, rel_frobenius, symmetrizer, unvec, Matrix, SymmetricMatrix, Vector};
use crate::model::{Equilibrium, MatchedSample, MatchingModel, MomentSet};
use crate::policy::NumericPolicy;
use crate::statics::{identification_jacobians, IdentificationJacobians};

/// Estimated affinity together with the regression quantities it is built from.
#[derive(Debug, Clone, PartialEq)]
pub struct AffinityEstimate {
    pub affinity: Matrix,
    /// `Sigma_XY^T Sigma_X^{-1}`, `n x m`.
    pub regression: Matrix,
    pub cond_var_y: SymmetricMatrix,
    /// Asymptotic covariance of `vec(affinity)`, `mn x mn`, when computed from a sample.
    pub avar: Option<SymmetricMatrix>,
    pub n_obs: usize,
    pub sigma: f64,
    /// Relative gap between the regression form and the pseudoinverse form
    /// `sigma (Sigma_Y Sigma_XY^+ Sigma_X - Sigma_XY^T)^+`, for square invertible `Sigma_XY`.
    pub pinv_form_gap: Option<f64>,
}

impl AffinityEstimate {
    /// Standard errors of the affinity entries, `m x n`.
    pub fn standard_errors(&self) -> Option<Matrix> {
        let avar = self.avar.as_ref()?;
        let (m, n) = self.affinity.shape();
        let d: Vec<f64> = avar.diagonal().iter().map(|v| v.max(0.0).sqrt()).collect();
        unvec(&d, m, n).ok()
    }
}

/// `A = sigma Sigma_X^{-1} Sigma_XY (Sigma_Y - Sigma_XY^T Sigma_X^{-1} Sigma_XY)^{-1}`.
pub fn identify(moments: &MomentSet, sigma: f64) -> Result<AffinityEstimate> {
    identify_with(moments, sigma, &NumericPolicy::default())
}

pub fn identify_with(moments: &MomentSet, sigma: f64, policy: &NumericPolicy) -> Result<AffinityEstimate> {
    if !(sigma.is_finite() && sigma > 0.0) {
        return Err(Error::InvalidConfig(format!("sigma must be positive and finite, got {sigma}")));
    }
    let s = &moments.cross;
    let regression = lu_solve(moments.sigma_x.as_matrix(), s, "Sigma_X")?.transpose();
    let cond = SymmetricMatrix::symmetrize(moments.sigma_y.as_matrix() - &regression * s);
    if !cond.is_positive_definite(policy) {
        return Err(Error::DegenerateConditional);
    }
    let affinity = lu_solve(cond.as_matrix(), &regression, "Sigma_{Y|X}")
        .map_err(|_| Error::DegenerateConditional)?
        .transpose()
        * sigma;

    let pinv_form_gap = (moments.m() == moments.n() && crate::matcalc::rank(s, policy) == moments.m()).then(|| {
        let sp = pinv(s, policy);
        let inner = moments.sigma_y.as_matrix() * &sp * moments.sigma_x.as_matrix() - s.transpose();
        let alt = pinv(&inner, policy) * sigma;
        rel_frobenius(&alt, &affinity)
    });

    Ok(AffinityEstimate {
        affinity,
        regression,
        cond_var_y: cond,
        avar: None,
        n_obs: moments.n_obs,
        sigma,
        pinv_form_gap,
    })
}

fn lu_solve(lhs: &Matrix, rhs: &Matrix, what: &str) -> Result<Matrix> {
    lhs.clone().lu().solve(rhs).ok_or_else(|| Error::singular(what))
}

/// Centered second moments with divisor `N`.
pub fn empirical_moments(sample: &MatchedSample) -> Result<MomentSet> {
    let (n_obs, m, n) = (sample.n_obs(), sample.m(), sample.n());
    if n_obs < m + n || n_obs == 0 {
        return Err(Error::TooFewObservations { n_obs, required: m + n });
    }
    let mut z = Matrix::zeros(n_obs, m + n);
    z.view_mut((0, 0), (n_obs, m)).copy_from(&sample.x);
    z.view_mut((0, m), (n_obs, n)).copy_from(&sample.y);
    for mut col in z.column_iter_mut() {
        let mean = col.mean();
        col.add_scalar_mut(-mean);
    }
    let joint = z.tr_mul(&z) / n_obs as f64;
    MomentSet::new(
        SymmetricMatrix::symmetrize(joint.view((0, 0), (m, m)).into_owned()),
        SymmetricMatrix::symmetrize(joint.view((m, m), (n, n)).into_owned()),
        joint.view((0, m), (m, n)).into_owned(),
        n_obs,
    )
}

/// Estimate with the scale normalized to `sigma = 1`, including delta-method standard errors.
pub fn estimate(sample: &MatchedSample) -> Result<AffinityEstimate> {
    let moments = empirical_moments(sample)?;
    estimate_from_moments(&moments)
}

pub fn estimate_from_moments(moments: &MomentSet) -> Result<AffinityEstimate> {
    let mut est = identify(moments, 1.0)?;
    if moments.n_obs > 0 {
        let jac = identification_jacobians(moments, 1.0)?;
        est.avar = Some(delta_method(moments, &jac)?);
    }
    Ok(est)
}

/// Asymptotic covariance of `vec(Sigma_X, Sigma_XY, Sigma_Y)` (stacked), scaled by `sqrt(N)`:
/// the rows and columns of `(I + T_{k,k}) (Sigma ⊗ Sigma)` belonging to the three blocks of
/// the joint `k x k` covariance `Sigma`, `k = m + n`.
pub fn moment_covariance(moments: &MomentSet) -> Matrix {
    let (m, n) = (moments.m(), moments.n());
    let k = m + n;
    let joint = moments.joint().into_inner();
    let full = (Matrix::identity(k * k, k * k) + commutation(k, k)) * kron(&joint, &joint);
    let idx = moment_indices(m, n);
    Matrix::from_fn(idx.len(), idx.len(), |r, c| full[(idx[r], idx[c])])
}

/// Positions in `vec(joint)` of `vec(Sigma_X)`, `vec(Sigma_XY)`, `vec(Sigma_Y)`.
fn moment_indices(m: usize, n: usize) -> Vec<usize> {
    let k = m + n;
    let at = |i: usize, j: usize| i + k * j;
    let mut idx = Vec::with_capacity(m * m + m * n + n * n);
    for j in 0..m {
        for i in 0..m {
            idx.push(at(i, j));
        }
    }
    for j in 0..n {
        for i in 0..m {
            idx.push(at(i, m + j));
        }
    }
    for j in 0..n {
        for i in 0..n {
            idx.push(at(m + i, m + j));
        }
    }
    idx
}

/// `J V J^T / N` with `J = [dA/dSigma_X P_m | dA/dSigma_XY | dA/dSigma_Y P_n]`.
pub fn delta_method(moments: &MomentSet, jac: &IdentificationJacobians) -> Result<SymmetricMatrix> {
    let (m, n) = (moments.m(), moments.n());
    if moments.n_obs == 0 {
        return Err(Error::InvalidConfig("delta method needs n_obs > 0".into()));
    }
    let expect = [(m * n, m * m), (m * n, m * n), (m * n, n * n)];
    for (mat, shape) in [&jac.da_dsx, &jac.da_dsxy, &jac.da_dsy].into_iter().zip(expect) {
        if mat.shape() != shape {
            return Err(Error::dim("delta_method Jacobian", format!("{}x{}", shape.0, shape.1), format!("{}x{}", mat.nrows(), mat.ncols())));
        }
    }
    let jx = &jac.da_dsx * symmetrizer(m);
    let jy = &jac.da_dsy * symmetrizer(n);
    let mut j = Matrix::zeros(m * n, m * m + m * n + n * n);
    j.view_mut((0, 0), (m * n, m * m)).copy_from(&jx);
    j.view_mut((0, m * m), (m * n, m * n)).copy_from(&jac.da_dsxy);
    j.view_mut((0, m * m + m * n), (m * n, n * n)).copy_from(&jy);
    let v = moment_covariance(moments);
    Ok(SymmetricMatrix::symmetrize(&j * v * j.transpose() / moments.n_obs as f64))
}

/// Decomposition of observed transfers into the worker-amenity and
/// firm-productivity parts of the affinity.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TransferDecomposition {
    #[serde(serialize_with = "crate::model::rows::serialize_matrix")]
    pub worker_amenity: Matrix,
    #[serde(serialize_with = "crate::model::rows::serialize_matrix")]
    pub firm_productivity: Matrix,
    pub sigma1: f64,
    pub sigma2: f64,
    /// `sigma1 + sigma2 - sigma` of the model the affinity was estimated under.
    pub scale_gap: f64,
    pub residual_rms: f64,
    /// One of the heterogeneity shares is at (or numerically indistinguishable from) zero.
    pub boundary: bool,
}

/// Regress transfers on `x_i y_j`, `-y^T Sigma_{Y|X}^{-1} y / 2` and `x^T Sigma_{X|Y}^{-1} x / 2`
/// (no intercept). The interaction coefficients are `M = Gamma - (sigma2 / sigma) A`, the quadratic ones
/// `sigma1` and `sigma2`; then `Gamma = M + (sigma2 / sigma) A` and `B = A - Gamma`.
///
/// `eq` is the equilibrium supplying the conditional covariances, `affinity` the matching
/// estimate of `A`.
pub fn decompose_transfers(sample: &MatchedSample, eq: &Equilibrium, affinity: &Matrix) -> Result<TransferDecomposition> {
    let tau = sample.transfers.as_ref().ok_or(Error::NoTransfers)?;
    let (n_obs, m, n) = (sample.n_obs(), sample.m(), sample.n());
    if affinity.shape() != (m, n) || eq.m() != m || eq.n() != n {
        return Err(Error::dim("decompose_transfers", format!("{m}x{n}"), format!("{}x{}", affinity.nrows(), affinity.ncols())));
    }
    let p = m * n + 2;
    if n_obs < p {
        return Err(Error::TooFewObservations { n_obs, required: p });
    }
    let vy_inv = eq.cond_var_y.inverse()?;
    let vx_inv = eq.cond_var_x.inverse()?;
    let mut design = Matrix::zeros(n_obs, p);
    for k in 0..n_obs {
        let x = sample.x_row(k);
        let y = sample.y_row(k);
        for j in 0..n {
            for i in 0..m {
                design[(k, i + m * j)] = x[i] * y[j];
            }
        }
        design[(k, m * n)] = -0.5 * vy_inv.quad_form(&y);
        design[(k, m * n + 1)] = 0.5 * vx_inv.quad_form(&x);
    }
    // column scaling keeps the collinearity check meaningful
    let scales: Vec<f64> = design.column_iter().map(|c| c.norm().max(f64::MIN_POSITIVE)).collect();
    for (mut col, s) in design.column_iter_mut().zip(&scales) {
        col /= *s;
    }
    let svd = design.clone().svd(true, true);
    let smax = svd.singular_values.max();
    let smin = svd.singular_values.min();
    if !(smin > 1e-10 * smax) {
        return Err(Error::CollinearFeatures { smallest: smin / smax });
    }
    let beta_scaled = svd.solve(tau, 0.0).map_err(Error::singular)?;
    let beta = Vector::from_iterator(p, beta_scaled.iter().zip(&scales).map(|(b, s)| b / s));
    let fitted = &design * &beta_scaled;
    let residual_rms = ((tau - fitted).norm_squared() / n_obs as f64).sqrt();

    let interaction = unvec(&beta.as_slice()[..m * n], m, n)?;
    let (sigma1, sigma2) = (beta[m * n], beta[m * n + 1]);
    let firm_productivity = interaction + affinity * (sigma2 / eq.sigma);
    let worker_amenity = affinity - &firm_productivity;
    let total = sigma1 + sigma2;
    let tol = 1e-6 * total.abs().max(1.0);
    Ok(TransferDecomposition {
        worker_amenity,
        firm_productivity,
        sigma1,
        sigma2,
        scale_gap: total - eq.sigma,
        residual_rms,
        boundary: sigma1 <= tol || sigma2 <= tol,
    })
}

/// The model implied by an estimate: `(A_hat, sigma, Sigma_X_hat, Sigma_Y_hat)`.
pub fn fitted_model(est: &AffinityEstimate, moments: &MomentSet) -> Result<MatchingModel> {
    MatchingModel::new(est.affinity.clone(), est.sigma, moments.sigma_x.clone(), moments.sigma_y.clone())
}
