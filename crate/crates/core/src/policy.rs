use serde::{Deserialize, Serialize};

/// Numerical tolerances shared by every module.
///
/// All tolerances are relative to a norm of the matrix being tested.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct NumericPolicy {
    /// Eigenvalues in `[-psd_rtol * |S|, 0]` are clamped to zero; anything lower is an error.
    pub psd_rtol: f64,
    /// Singular values below `pinv_rtol * s_max` are treated as zero by `pinv`.
    pub pinv_rtol: f64,
    /// Singular values below `rank_rtol * s_max` do not count towards the rank of `A`.
    pub rank_rtol: f64,
    /// Condition number above which linear solves fall back to the pseudoinverse.
    pub cond_limit: f64,
    /// Below `small_sigma * |A| * sqrt(|Sigma_X| |Sigma_Y|)` a solve is flagged as being in the zero-heterogeneity regime.
    pub small_sigma: f64,
    /// Base step for central finite differences, scaled by `1 + |base|`.
    pub fd_step: f64,
}

impl Default for NumericPolicy {
    fn default() -> Self {
        Self {
            psd_rtol: 1e-10,
            pinv_rtol: 1e-12,
            rank_rtol: 1e-10,
            cond_limit: 1e12,
            small_sigma: 1e-8,
            fd_step: 1e-5,
        }
    }
}
