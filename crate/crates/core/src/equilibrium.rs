//! Closed-form equilibrium of the Gaussian-quadratic market with logit
//! heterogeneity, its limits in `sigma`, welfare, shadow prices, transfers
//! and payoffs.
//!
//! The equilibrium coupling is `N(0, Sigma)` with `Y = T X + eps`,
//! `eps ~ N(0, Sigma_{Y|X})` independent of `X`, characterized by
//!
//! ```text
//! T^T Sigma_{Y|X}^{-1} = A / sigma,    T Sigma_X T^T + Sigma_{Y|X} = Sigma_Y.
//! ```
//!
//! Writing `Sigma_{Y|X} = sigma W` and `M = A^T Sigma_X A`, the first condition
//! gives `T = W A^T` and the second becomes the symmetric quadratic equation
//! `W M W + sigma W = Sigma_Y`. With `c = sigma / 2` and the congruence
//! `N = M^{1/2} Sigma_Y M^{1/2}` its positive solution is
//!
//! ```text
//! W = M^{-1/2} g(N) M^{-1/2},    g(l) = sqrt(l + c^2) - c = l / (sqrt(l + c^2) + c),
//! ```
//!
//! which never subtracts large numbers, so it stays accurate as `sigma -> 0`
//! and `sigma -> inf`. For square `A` this is algebraically the same matrix as
//! `Delta (Delta A^T Sigma_X A Delta)^{-1/2} Delta - (sigma/2) A^+ Sigma_X^{-1} A^{+T}`
//! (see [`delta_form`]); for `m > n` only the congruence form satisfies the
//! first-order conditions. `m < n` is solved on the swapped problem.

use serde::Serialize;

use crate::error::{Error, Result};
use crate::matcalc::{self, pinv, sym_inv_sqrt, sym_map, sym_sqrt, Matrix, SymmetricMatrix, Vector};
use crate::model::{joint_covariance, validate, Equilibrium, MatchingModel, SolveMeta, Violation};
use crate::policy::NumericPolicy;

/// Solve with the default numeric policy.
pub fn solve(model: &MatchingModel) -> Result<Equilibrium> {
    solve_with(model, &NumericPolicy::default())
}

pub fn solve_with(model: &MatchingModel, policy: &NumericPolicy) -> Result<Equilibrium> {
    check_model(model, policy)?;
    let (m, n) = (model.m(), model.n());

    if model.is_zero_affinity() {
        let cross = Matrix::zeros(m, n);
        return assemble(
            model,
            cross,
            Matrix::zeros(n, m),
            model.sigma_y.clone(),
            SolveMeta {
                independent: true,
                ..Default::default()
            },
            policy,
        );
    }

    if m < n {
        let swapped = solve_with(&model.swapped(), policy)?;
        let cross = swapped.cross_cov.transpose();
        let sx_inv = model.sigma_x.inverse()?;
        let regression = cross.transpose() * sx_inv.as_matrix();
        let cond_var_y = SymmetricMatrix::symmetrize(model.sigma_y.as_matrix() - &regression * &cross);
        let meta = SolveMeta {
            transposed: true,
            ..swapped.meta
        };
        return assemble(model, cross, regression, cond_var_y, meta, policy);
    }

    let a = &model.affinity;
    let sx = model.sigma_x.as_matrix();
    let sigma = model.sigma;
    let gram = SymmetricMatrix::symmetrize(a.transpose() * sx * a);
    let gram_half = sym_sqrt(&gram, policy)?;
    let gram_inv_half = sym_inv_sqrt(&gram, policy)?;
    let congruent = SymmetricMatrix::symmetrize(gram_half.as_matrix() * model.sigma_y.as_matrix() * gram_half.as_matrix());

    let scale = a.norm() * (model.sigma_x.spectral_norm() * model.sigma_y.spectral_norm()).sqrt();
    let limit = sigma < policy.small_sigma * scale;
    let c = 0.5 * sigma;
    // g(l) -> sqrt(l) as sigma -> 0, which is the zero-heterogeneity limit; the
    // expression itself needs no switch, so `limit` is only reported. The
    // difference form cancels badly only for l < c^2.
    let g = sym_map(&congruent, policy, "M^{1/2} Sigma_Y M^{1/2}", |l| {
        let root = (l + c * c).sqrt();
        if l >= c * c {
            root - c
        } else {
            l / (root + c)
        }
    })?;
    let w = SymmetricMatrix::symmetrize(gram_inv_half.as_matrix() * g.as_matrix() * gram_inv_half.as_matrix());
    if limit {
        log::warn!("sigma = {sigma:e} is below the conditioning threshold; result is the sigma -> 0 limit to working precision");
    }

    let cross = sx * a * w.as_matrix();
    let regression = w.as_matrix() * a.transpose();
    let cond_var_y = SymmetricMatrix::symmetrize(w.as_matrix() * sigma);
    let meta = SolveMeta {
        zero_sigma_limit: limit,
        ..Default::default()
    };
    assemble(model, cross, regression, cond_var_y, meta, policy)
}

fn check_model(model: &MatchingModel, policy: &NumericPolicy) -> Result<()> {
    let v = validate(model, policy);
    if v.is_empty() {
        return Ok(());
    }
    if let [Violation::RankDeficientAffinity { rank, expected }] = v.as_slice() {
        return Err(Error::RankDeficientAffinity {
            rank: *rank,
            expected: *expected,
        });
    }
    Err(Error::InvalidModel(v))
}

fn assemble(
    model: &MatchingModel,
    cross: Matrix,
    regression: Matrix,
    cond_var_y: SymmetricMatrix,
    meta: SolveMeta,
    policy: &NumericPolicy,
) -> Result<Equilibrium> {
    let sy_inv = model.sigma_y.inverse()?;
    let cond_var_x = SymmetricMatrix::symmetrize(model.sigma_x.as_matrix() - &cross * sy_inv.as_matrix() * cross.transpose());
    let joint_cov = joint_covariance(&model.sigma_x, &cross, &model.sigma_y);
    let ev = joint_cov.eigenvalues();
    let tol = policy.psd_rtol * joint_cov.spectral_norm();
    if ev[0] < -tol {
        return Err(Error::NotPsd {
            what: format!(
                "joint covariance (cond(Sigma_X) = {:.3e}, cond(Sigma_Y) = {:.3e})",
                matcalc::condition_number(&model.sigma_x),
                matcalc::condition_number(&model.sigma_y)
            ),
            eigenvalue: ev[0],
            tolerance: tol,
        });
    }
    let delta = paper_delta(model, policy)?;
    let welfare = welfare_at(model, &cross)?;
    Ok(Equilibrium {
        cross_cov: cross,
        regression,
        cond_var_y,
        cond_var_x,
        delta,
        joint_cov,
        welfare,
        sigma: model.sigma,
        meta,
    })
}

/// `Delta = ((sigma^2 / 4) A^+ Sigma_X^{-1} A^{+T} + Sigma_Y)^{1/2}`.
fn paper_delta(model: &MatchingModel, policy: &NumericPolicy) -> Result<SymmetricMatrix> {
    let ap = pinv(&model.affinity, policy);
    let sx_inv = model.sigma_x.inverse()?;
    let c = 0.5 * model.sigma;
    let inner = SymmetricMatrix::symmetrize(&ap * sx_inv.as_matrix() * ap.transpose() * (c * c) + model.sigma_y.as_matrix());
    sym_sqrt(&inner, policy)
}

/// The equilibrium written in terms of `Delta`, exactly as in the classical
/// closed form. Exact for square invertible `A`; kept as an independent route
/// for cross-checking [`solve`].
#[derive(Debug, Clone)]
pub struct DeltaForm {
    pub delta: SymmetricMatrix,
    pub cross_cov: Matrix,
    pub regression: Matrix,
    pub cond_var_y: Matrix,
}

pub fn delta_form(model: &MatchingModel, policy: &NumericPolicy) -> Result<DeltaForm> {
    let a = &model.affinity;
    let sx = model.sigma_x.as_matrix();
    let sx_inv = model.sigma_x.inverse()?;
    let ap = pinv(a, policy);
    let sigma = model.sigma;
    let delta = paper_delta(model, policy)?;
    let d = delta.as_matrix();
    let inner = SymmetricMatrix::symmetrize(d * a.transpose() * sx * a * d);
    let inner_inv_half = sym_inv_sqrt(&inner, policy)?;
    let core = d * inner_inv_half.as_matrix() * d;
    Ok(DeltaForm {
        cross_cov: sx * a * &core - ap.transpose() * (0.5 * sigma),
        regression: &core * a.transpose() - &ap * sx_inv.as_matrix() * (0.5 * sigma),
        cond_var_y: &core * sigma - &ap * sx_inv.as_matrix() * ap.transpose() * (0.5 * sigma * sigma),
        delta,
    })
}

/// First-order-condition residuals of an equilibrium candidate.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct FocReport {
    /// `|T^T Sigma_{Y|X}^{-1} - A / sigma|_F`, with `T`, `Sigma_{Y|X}` recomputed from `cross_cov`.
    pub r1: f64,
    /// `|T Sigma_X T^T + Sigma_{Y|X} - Sigma_Y|_F` with the stored `T`, `Sigma_{Y|X}`.
    pub r2: f64,
    /// Distance between the stored `T`, `Sigma_{Y|X}` and those implied by `cross_cov`.
    pub r3: f64,
    /// `1 + |A| / sigma`, the natural size of `r1`.
    pub scale1: f64,
    /// `1 + |Sigma_Y|`, the natural size of `r2`.
    pub scale2: f64,
}

impl FocReport {
    pub fn max_relative(&self) -> f64 {
        (self.r1 / self.scale1).max(self.r2 / self.scale2).max(self.r3 / self.scale2)
    }

    pub fn passes(&self, rtol: f64) -> bool {
        self.max_relative() < rtol
    }
}

pub fn verify_foc(model: &MatchingModel, eq: &Equilibrium) -> FocReport {
    let sx = model.sigma_x.as_matrix();
    let sy = model.sigma_y.as_matrix();
    let a_over = &model.affinity / model.sigma;
    let scale1 = 1.0 + a_over.norm();
    let scale2 = 1.0 + sy.norm();

    let implied = model.sigma_x.inverse().map(|sx_inv| {
        let t = eq.cross_cov.transpose() * sx_inv.as_matrix();
        let v = sy - &t * &eq.cross_cov;
        (t, v)
    });
    let (r1, r3) = match &implied {
        Ok((t, v)) => {
            let r1 = match v.clone().cholesky() {
                Some(ch) => (t.transpose() * ch.inverse() - &a_over).norm(),
                None => f64::INFINITY,
            };
            let r3 = (t - &eq.regression).norm() + (v - eq.cond_var_y.as_matrix()).norm();
            (r1, r3)
        }
        Err(_) => (f64::INFINITY, f64::INFINITY),
    };
    let t = &eq.regression;
    let r2 = (t * sx * t.transpose() + eq.cond_var_y.as_matrix() - sy).norm();
    FocReport {
        r1,
        r2,
        r3,
        scale1,
        scale2,
    }
}

/// `lim_{sigma -> 0} Sigma_XY = Sigma_X A Sigma_Y^{1/2} (Sigma_Y^{1/2} A^T Sigma_X A Sigma_Y^{1/2})^{-1/2} Sigma_Y^{1/2}`.
pub fn limit_sigma_zero(model: &MatchingModel) -> Result<Matrix> {
    let policy = NumericPolicy::default();
    limit_check(model, &policy)?;
    if model.is_zero_affinity() {
        return Ok(Matrix::zeros(model.m(), model.n()));
    }
    if model.m() < model.n() {
        return Ok(limit_sigma_zero(&model.swapped())?.transpose());
    }
    let core = zero_limit_core(model, &policy)?;
    Ok(model.sigma_x.as_matrix() * &model.affinity * core)
}

/// Limit of the regression matrix, `T_0 = Sigma_Y^{1/2} (...)^{-1/2} Sigma_Y^{1/2} A^T`.
/// `A T_0` is symmetric positive semidefinite.
pub fn limit_t0(model: &MatchingModel) -> Result<Matrix> {
    let policy = NumericPolicy::default();
    limit_check(model, &policy)?;
    if model.is_zero_affinity() {
        return Ok(Matrix::zeros(model.n(), model.m()));
    }
    if model.m() < model.n() {
        let cross = limit_sigma_zero(model)?;
        return Ok(cross.transpose() * model.sigma_x.inverse()?.as_matrix());
    }
    let core = zero_limit_core(model, &policy)?;
    Ok(core * model.affinity.transpose())
}

fn limit_check(model: &MatchingModel, policy: &NumericPolicy) -> Result<()> {
    let mut probe = model.clone();
    probe.sigma = 1.0;
    probe.split = None;
    check_model(&probe, policy)
}

/// `Sigma_Y^{1/2} (Sigma_Y^{1/2} A^T Sigma_X A Sigma_Y^{1/2})^{-1/2} Sigma_Y^{1/2}`, for `m >= n`.
fn zero_limit_core(model: &MatchingModel, policy: &NumericPolicy) -> Result<Matrix> {
    let a = &model.affinity;
    let sy_half = sym_sqrt(&model.sigma_y, policy)?;
    let inner = SymmetricMatrix::symmetrize(sy_half.as_matrix() * a.transpose() * model.sigma_x.as_matrix() * a * sy_half.as_matrix());
    let inner_inv_half = sym_inv_sqrt(&inner, policy)?;
    Ok(sy_half.as_matrix() * inner_inv_half.as_matrix() * sy_half.as_matrix())
}

/// `lim_{sigma -> inf} Sigma_XY = 0`.
pub fn limit_sigma_infinity(model: &MatchingModel) -> Matrix {
    Matrix::zeros(model.m(), model.n())
}

/// Social welfare, up to an additive constant that does not depend on `A`:
/// `Tr(A^T Sigma_XY) - (sigma / 2) ln(det Sigma_X det(Sigma_Y - Sigma_XY^T Sigma_X^{-1} Sigma_XY))`.
///
/// Only differences across `A` are meaningful.
pub fn welfare(model: &MatchingModel, eq: &Equilibrium) -> Result<f64> {
    welfare_at(model, &eq.cross_cov)
}

fn welfare_at(model: &MatchingModel, cross: &Matrix) -> Result<f64> {
    let sx_inv = model.sigma_x.inverse()?;
    let cond = SymmetricMatrix::symmetrize(model.sigma_y.as_matrix() - cross.transpose() * sx_inv.as_matrix() * cross);
    let ld_cond = cond
        .log_det()
        .map_err(|_| Error::singular("conditional covariance Sigma_{Y|X}"))?;
    let surplus = (model.affinity.transpose() * cross).trace();
    Ok(surplus - 0.5 * model.sigma * (model.sigma_x.log_det()? + ld_cond))
}

/// Entropic objective `Tr(A^T Sigma_XY) + (sigma / 2) ln det Sigma` over Gaussian
/// couplings with the model's marginals. The equilibrium cross-covariance is its
/// unique maximizer.
pub fn entropic_objective(model: &MatchingModel, cross: &Matrix) -> Result<f64> {
    let joint = joint_covariance(&model.sigma_x, cross, &model.sigma_y);
    let ld = joint.log_det().map_err(|_| Error::singular("joint covariance"))?;
    Ok((model.affinity.transpose() * cross).trace() + 0.5 * model.sigma * ld)
}

/// Lagrange multipliers of the scarcity constraints,
/// `a(x) = (sigma/2) x^T Sigma_{X|Y}^{-1} x` and `b(y) = (sigma/2) y^T Sigma_{Y|X}^{-1} y`.
pub fn shadow_prices(model: &MatchingModel, eq: &Equilibrium, x: &Vector, y: &Vector) -> Result<(f64, f64)> {
    check_point(model, x, y)?;
    let cx_inv = eq.cond_var_x.inverse().map_err(|_| Error::singular("Sigma_{X|Y}"))?;
    let cy_inv = eq.cond_var_y.inverse().map_err(|_| Error::singular("Sigma_{Y|X}"))?;
    let half = 0.5 * model.sigma;
    Ok((half * cx_inv.quad_form(x), half * cy_inv.quad_form(y)))
}

fn check_point(model: &MatchingModel, x: &Vector, y: &Vector) -> Result<()> {
    if x.len() != model.m() {
        return Err(Error::dim("worker characteristics x", model.m(), x.len()));
    }
    if y.len() != model.n() {
        return Err(Error::dim("firm characteristics y", model.n(), y.len()));
    }
    Ok(())
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct PayoffBreakdown {
    pub transfer: f64,
    pub worker_utility: f64,
    pub firm_profit: f64,
    pub worker_multiplier: f64,
    pub firm_multiplier: f64,
}

/// Equilibrium transfer, expected worker utility and firm profit for a match `(x, y)`.
///
/// ```text
/// tau  = (sigma1 (x'Gamma y - b(y)) - sigma2 (x'B y - a(x))) / sigma
/// U    = (sigma1 x'A y - sigma1 b(y) + sigma2 a(x)) / sigma
/// Pi   = (sigma2 x'A y - sigma2 a(x) + sigma1 b(y)) / sigma
/// ```
///
/// so `U + Pi = x'A y` and `U = x'B y + tau`.
pub fn payoffs(model: &MatchingModel, eq: &Equilibrium, x: &Vector, y: &Vector) -> Result<PayoffBreakdown> {
    let split = model.split.as_ref().ok_or(Error::MissingSplit)?;
    let (a, b) = shadow_prices(model, eq, x, y)?;
    let sigma = model.sigma;
    let xay = x.dot(&(&model.affinity * y));
    let xby = x.dot(&(&split.worker_amenity * y));
    let xgy = x.dot(&(&split.firm_productivity * y));
    let (s1, s2) = (split.sigma1, split.sigma2);
    Ok(PayoffBreakdown {
        transfer: (s1 * (xgy - b) - s2 * (xby - a)) / sigma,
        worker_utility: (s1 * xay - s1 * b + s2 * a) / sigma,
        firm_profit: (s2 * xay - s2 * a + s1 * b) / sigma,
        worker_multiplier: a,
        firm_multiplier: b,
    })
}

/// Log of the `N(0, Sigma)` equilibrium density at `(x, y)`.
pub fn log_density(eq: &Equilibrium, x: &Vector, y: &Vector) -> Result<f64> {
    let (m, n) = (eq.m(), eq.n());
    if x.len() != m || y.len() != n {
        return Err(Error::dim("log_density point", format!("({m}, {n})"), format!("({}, {})", x.len(), y.len())));
    }
    let z = Vector::from_iterator(m + n, x.iter().chain(y.iter()).copied());
    let chol = eq
        .joint_cov
        .as_matrix()
        .clone()
        .cholesky()
        .ok_or_else(|| Error::singular("joint covariance"))?;
    let ld = 2.0 * chol.l_dirty().diagonal().iter().map(|d| d.ln()).sum::<f64>();
    let q = z.dot(&chol.solve(&z));
    Ok(-0.5 * (m + n) as f64 * (2.0 * std::f64::consts::PI).ln() - 0.5 * ld - 0.5 * q)
}

/// `Y | X = x ~ N(T x, Sigma_{Y|X})`.
pub fn conditional_density_params(eq: &Equilibrium, x: &Vector) -> Result<(Vector, SymmetricMatrix)> {
    if x.len() != eq.m() {
        return Err(Error::dim("conditional_density_params x", eq.m(), x.len()));
    }
    Ok((&eq.regression * x, eq.cond_var_y.clone()))
}

/// `ln pi_{Y|X}(y | x)`.
pub fn conditional_log_density(eq: &Equilibrium, x: &Vector, y: &Vector) -> Result<f64> {
    let (mean, cov) = conditional_density_params(eq, x)?;
    if y.len() != eq.n() {
        return Err(Error::dim("conditional_log_density y", eq.n(), y.len()));
    }
    let inv = cov.inverse().map_err(|_| Error::singular("Sigma_{Y|X}"))?;
    let r = y - mean;
    Ok(-0.5 * eq.n() as f64 * (2.0 * std::f64::consts::PI).ln() - 0.5 * cov.log_det()? - 0.5 * inv.quad_form(&r))
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    fn golden() -> MatchingModel {
        MatchingModel::standard(Matrix::from_element(1, 1, 1.0), 1.0).unwrap()
    }

    /// Positive root of rho^2 + (sigma / a) rho - 1 = 0, for unit variances.
    fn scalar_rho(a: f64, sigma: f64) -> f64 {
        let b = sigma / a;
        (-b + (b * b + 4.0).sqrt()) / 2.0
    }

    #[test]
    fn golden_scalar() {
        let eq = solve(&golden()).unwrap();
        let rho = (5f64.sqrt() - 1.0) / 2.0;
        assert_relative_eq!(rho, scalar_rho(1.0, 1.0), epsilon = 1e-15);
        assert_relative_eq!(eq.cross_cov[(0, 0)], 0.6180340, epsilon = 1e-7);
        assert_relative_eq!(eq.cross_cov[(0, 0)], rho, epsilon = 1e-15);
        assert_relative_eq!(eq.regression[(0, 0)], rho, epsilon = 1e-15);
        assert_relative_eq!(eq.cond_var_y[(0, 0)], 1.0 - rho * rho, epsilon = 1e-15);
        assert_relative_eq!(eq.cond_var_y[(0, 0)], rho, epsilon = 1e-15);
        assert_relative_eq!(eq.delta[(0, 0)], 1.25f64.sqrt(), epsilon = 1e-15);
        assert_relative_eq!(eq.delta[(0, 0)], 1.1180340, epsilon = 1e-7);
    }

    #[test]
    fn scalar_other_sigma_and_diagonal() {
        let m = MatchingModel::standard(Matrix::from_element(1, 1, 1.0), 2.0).unwrap();
        assert_relative_eq!(solve(&m).unwrap().cross_cov[(0, 0)], 2f64.sqrt() - 1.0, epsilon = 1e-15);

        let a = Matrix::from_diagonal(&Vector::from_column_slice(&[1.0, 2.0]));
        let eq = solve(&MatchingModel::standard(a, 1.0).unwrap()).unwrap();
        assert_relative_eq!(eq.cross_cov[(0, 0)], scalar_rho(1.0, 1.0), epsilon = 1e-14);
        assert_relative_eq!(eq.cross_cov[(1, 1)], scalar_rho(2.0, 1.0), epsilon = 1e-14);
        assert_relative_eq!(eq.cross_cov[(1, 1)], 0.7807764, epsilon = 1e-7);
        assert!(eq.cross_cov[(0, 1)].abs() < 1e-15 && eq.cross_cov[(1, 0)].abs() < 1e-15);
    }

    #[test]
    fn zero_affinity_is_independent() {
        let m = MatchingModel::standard(Matrix::zeros(2, 3), 1.0).unwrap();
        let eq = solve(&m).unwrap();
        assert_eq!(eq.cross_cov, Matrix::zeros(2, 3));
        assert_eq!(eq.regression, Matrix::zeros(3, 2));
        assert_eq!(eq.cond_var_y, m.sigma_y);
        assert!(eq.meta.independent);
    }

    #[test]
    fn foc_residuals() {
        let m = golden();
        let eq = solve(&m).unwrap();
        let r = verify_foc(&m, &eq);
        assert!(r.r1 < 1e-12 && r.r2 < 1e-12 && r.r3 < 1e-12, "{r:?}");

        let mut bad = eq.clone();
        bad.cross_cov[(0, 0)] += 0.1;
        assert!(verify_foc(&m, &bad).r1 > 0.01);
    }

    #[test]
    fn rank_deficient_is_rejected() {
        let m = MatchingModel {
            affinity: Matrix::from_row_slice(2, 2, &[1.0, 2.0, 2.0, 4.0]),
            sigma: 1.0,
            sigma_x: SymmetricMatrix::identity(2),
            sigma_y: SymmetricMatrix::identity(2),
            split: None,
        };
        assert!(matches!(solve(&m), Err(Error::RankDeficientAffinity { rank: 1, expected: 2 })));
        assert!(matches!(limit_sigma_zero(&m), Err(Error::RankDeficientAffinity { .. })));
    }

    #[test]
    fn zero_sigma_limit_scalar() {
        assert_relative_eq!(limit_sigma_zero(&golden()).unwrap()[(0, 0)], 1.0, epsilon = 1e-15);
        let neg = MatchingModel::standard(Matrix::from_element(1, 1, -1.0), 1.0).unwrap();
        assert_relative_eq!(limit_sigma_zero(&neg).unwrap()[(0, 0)], -1.0, epsilon = 1e-15);
        let tiny = golden().with_sigma(1e-6);
        let eq = solve(&tiny).unwrap();
        assert!(!eq.meta.zero_sigma_limit);
        assert!((eq.cross_cov[(0, 0)] - 1.0).abs() < 1e-4);
        let t0 = limit_t0(&golden()).unwrap();
        assert_relative_eq!(t0[(0, 0)], 1.0, epsilon = 1e-15);
    }

    #[test]
    fn below_threshold_switches_to_limit() {
        let eq = solve(&golden().with_sigma(1e-12)).unwrap();
        assert!(eq.meta.zero_sigma_limit);
        assert_relative_eq!(eq.cross_cov[(0, 0)], 1.0, epsilon = 1e-12);
    }

    #[test]
    fn infinite_sigma_limit() {
        assert_eq!(limit_sigma_infinity(&golden()), Matrix::zeros(1, 1));
        let eq = solve(&golden().with_sigma(1e6)).unwrap();
        assert!(eq.cross_cov.norm() < 2e-6);
        // rho ~ a / sigma for large sigma
        assert_relative_eq!(eq.cross_cov[(0, 0)], 1e-6, max_relative = 1e-9);
    }

    #[test]
    fn welfare_values() {
        let m = golden();
        let eq = solve(&m).unwrap();
        let rho = scalar_rho(1.0, 1.0);
        assert_relative_eq!(eq.welfare, rho - 0.5 * rho.ln(), epsilon = 1e-15);
        assert_relative_eq!(welfare(&m, &eq).unwrap(), 0.8586399, epsilon = 1e-7);
        let zero = MatchingModel::standard(Matrix::zeros(1, 1), 1.0).unwrap();
        assert_eq!(solve(&zero).unwrap().welfare, 0.0);
    }

    #[test]
    fn shadow_price_values() {
        let m = golden();
        let eq = solve(&m).unwrap();
        let x = Vector::from_element(1, 1.0);
        let y = Vector::from_element(1, 1.0);
        let (a, b) = shadow_prices(&m, &eq, &x, &y).unwrap();
        assert_relative_eq!(a, 0.5 / scalar_rho(1.0, 1.0), epsilon = 1e-15);
        assert_relative_eq!(a, 0.8090170, epsilon = 1e-7);
        let (a0, _) = shadow_prices(&m, &eq, &Vector::zeros(1), &y).unwrap();
        assert_eq!(a0, 0.0);
        let (_, b2) = shadow_prices(&m, &eq, &x, &(y * 2.0)).unwrap();
        assert_relative_eq!(b2, 4.0 * b, epsilon = 1e-15);
    }

    fn golden_split() -> MatchingModel {
        golden()
            .with_split(crate::model::SurplusSplit {
                worker_amenity: Matrix::from_element(1, 1, 0.5),
                firm_productivity: Matrix::from_element(1, 1, 0.5),
                sigma1: 0.5,
                sigma2: 0.5,
            })
            .unwrap()
    }

    #[test]
    fn payoff_values() {
        let m = golden_split();
        let eq = solve(&m).unwrap();
        let one = Vector::from_element(1, 1.0);
        let zero = Vector::zeros(1);
        let p = payoffs(&m, &eq, &one, &one).unwrap();
        assert!(p.transfer.abs() < 1e-15);
        assert_relative_eq!(p.worker_utility, 0.5, epsilon = 1e-15);
        assert_relative_eq!(p.firm_profit, 0.5, epsilon = 1e-15);
        let p = payoffs(&m, &eq, &one, &zero).unwrap();
        assert_relative_eq!(p.transfer, 0.25 / scalar_rho(1.0, 1.0), epsilon = 1e-15);
        assert_relative_eq!(p.transfer, 0.4045085, epsilon = 1e-7);
        let p = payoffs(&m, &eq, &zero, &zero).unwrap();
        assert_eq!((p.transfer, p.worker_utility, p.firm_profit), (0.0, 0.0, 0.0));
        assert!(matches!(payoffs(&golden(), &eq, &one, &one), Err(Error::MissingSplit)));
    }

    #[test]
    fn density_values() {
        let eq = solve(&golden()).unwrap();
        let rho = scalar_rho(1.0, 1.0);
        let det = 1.0 - rho * rho;
        let expected = -(2.0 * std::f64::consts::PI).ln() - 0.5 * det.ln();
        let got = log_density(&eq, &Vector::zeros(1), &Vector::zeros(1)).unwrap();
        assert_relative_eq!(got, expected, epsilon = 1e-14);
        assert_relative_eq!(got, -1.5972712, epsilon = 1e-7);
        let (mean, cov) = conditional_density_params(&eq, &Vector::from_element(1, 1.0)).unwrap();
        assert_relative_eq!(mean[0], 0.6180340, epsilon = 1e-7);
        assert_relative_eq!(cov[(0, 0)], det, epsilon = 1e-15);
    }

    #[test]
    fn transposed_solve_matches() {
        let a = Matrix::from_row_slice(1, 2, &[0.7, -0.4]);
        let m = MatchingModel::new(
            a,
            0.8,
            SymmetricMatrix::from_diagonal(&[1.3]),
            SymmetricMatrix::new(Matrix::from_row_slice(2, 2, &[1.0, 0.2, 0.2, 0.5])).unwrap(),
        )
        .unwrap();
        let eq = solve(&m).unwrap();
        assert!(eq.meta.transposed);
        let sw = solve(&m.swapped()).unwrap();
        assert_relative_eq!(eq.cross_cov, sw.cross_cov.transpose(), epsilon = 1e-14);
        assert!(verify_foc(&m, &eq).passes(1e-12));
    }
}
