//! Model primitives, solved equilibria and data containers.
//!
//! All distributions are centered at zero; sample data is demeaned when
//! moments are computed.

use std::fmt;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::matcalc::{self, Matrix, SymmetricMatrix, Vector};
use crate::policy::NumericPolicy;

/// Split of the affinity matrix into worker amenity `B` and firm productivity
/// `Gamma`, with the worker and firm taste-shock scales.
#[derive(Debug, Clone, PartialEq)]
pub struct SurplusSplit {
    pub worker_amenity: Matrix,
    pub firm_productivity: Matrix,
    pub sigma1: f64,
    pub sigma2: f64,
}

/// Primitives of a Gaussian-quadratic matching market.
///
/// The joint surplus of a match `(x, y)` is `x^T A y` plus logit taste shocks
/// with total scale `sigma`; `X ~ N(0, sigma_x)` and `Y ~ N(0, sigma_y)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "rows::ModelDoc", into = "rows::ModelDoc")]
pub struct MatchingModel {
    pub affinity: Matrix,
    pub sigma: f64,
    pub sigma_x: SymmetricMatrix,
    pub sigma_y: SymmetricMatrix,
    pub split: Option<SurplusSplit>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum CovarianceField {
    #[serde(rename = "Sigma_X")]
    SigmaX,
    #[serde(rename = "Sigma_Y")]
    SigmaY,
}

impl fmt::Display for CovarianceField {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            CovarianceField::SigmaX => f.write_str("Sigma_X"),
            CovarianceField::SigmaY => f.write_str("Sigma_Y"),
        }
    }
}

/// A violated model invariant.
#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(tag = "code")]
pub enum Violation {
    NonFinite { field: String },
    NonPositiveSigma { sigma: f64 },
    DimensionMismatch { field: String, expected: String, got: String },
    NotPositiveDefinite { field: CovarianceField, min_eigenvalue: f64 },
    RankDeficientAffinity { rank: usize, expected: usize },
    SplitSumMismatch { max_abs_diff: f64 },
    SplitScaleMismatch { sigma1: f64, sigma2: f64, sigma: f64 },
    NonPositiveSplitScale { field: String, value: f64 },
}

impl Violation {
    pub fn code(&self) -> &'static str {
        match self {
            Violation::NonFinite { .. } => "NonFinite",
            Violation::NonPositiveSigma { .. } => "NonPositiveSigma",
            Violation::DimensionMismatch { .. } => "DimensionMismatch",
            Violation::NotPositiveDefinite { .. } => "NotPositiveDefinite",
            Violation::RankDeficientAffinity { .. } => "RankDeficientAffinity",
            Violation::SplitSumMismatch { .. } => "SplitSumMismatch",
            Violation::SplitScaleMismatch { .. } => "SplitScaleMismatch",
            Violation::NonPositiveSplitScale { .. } => "NonPositiveSplitScale",
        }
    }
}

impl fmt::Display for Violation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Violation::NonFinite { field } => write!(f, "{field} has non-finite entries"),
            Violation::NonPositiveSigma { sigma } => write!(f, "sigma must be positive, got {sigma}"),
            Violation::DimensionMismatch { field, expected, got } => {
                write!(f, "{field} has shape {got}, expected {expected}")
            }
            Violation::NotPositiveDefinite { field, min_eigenvalue } => {
                write!(f, "{field} is not positive definite (min eigenvalue {min_eigenvalue:e})")
            }
            Violation::RankDeficientAffinity { rank, expected } => {
                write!(f, "A has rank {rank}, expected {expected} (or A = 0)")
            }
            Violation::SplitSumMismatch { max_abs_diff } => {
                write!(f, "B + Gamma differs from A by {max_abs_diff:e}")
            }
            Violation::SplitScaleMismatch { sigma1, sigma2, sigma } => {
                write!(f, "sigma1 + sigma2 = {} but sigma = {sigma}", sigma1 + sigma2)
            }
            Violation::NonPositiveSplitScale { field, value } => write!(f, "{field} must be positive, got {value}"),
        }
    }
}

impl MatchingModel {
    /// Build and validate a model without a surplus split.
    pub fn new(affinity: Matrix, sigma: f64, sigma_x: SymmetricMatrix, sigma_y: SymmetricMatrix) -> Result<Self> {
        let model = MatchingModel {
            affinity,
            sigma,
            sigma_x,
            sigma_y,
            split: None,
        };
        model.validated(&NumericPolicy::default())
    }

    /// Attach a surplus split and re-validate.
    pub fn with_split(mut self, split: SurplusSplit) -> Result<Self> {
        self.split = Some(split);
        self.validated(&NumericPolicy::default())
    }

    /// Model with unit-variance marginals `I_m`, `I_n`.
    pub fn standard(affinity: Matrix, sigma: f64) -> Result<Self> {
        let (m, n) = affinity.shape();
        Self::new(affinity, sigma, SymmetricMatrix::identity(m), SymmetricMatrix::identity(n))
    }

    pub fn validated(self, policy: &NumericPolicy) -> Result<Self> {
        let v = validate(&self, policy);
        if v.is_empty() {
            Ok(self)
        } else {
            Err(Error::InvalidModel(v))
        }
    }

    pub fn m(&self) -> usize {
        self.affinity.nrows()
    }

    pub fn n(&self) -> usize {
        self.affinity.ncols()
    }

    /// Same market with the roles of X and Y exchanged (`A -> A^T`).
    pub fn swapped(&self) -> MatchingModel {
        MatchingModel {
            affinity: self.affinity.transpose(),
            sigma: self.sigma,
            sigma_x: self.sigma_y.clone(),
            sigma_y: self.sigma_x.clone(),
            split: self.split.as_ref().map(|s| SurplusSplit {
                worker_amenity: s.firm_productivity.transpose(),
                firm_productivity: s.worker_amenity.transpose(),
                sigma1: s.sigma2,
                sigma2: s.sigma1,
            }),
        }
    }

    pub fn with_sigma(&self, sigma: f64) -> MatchingModel {
        MatchingModel {
            sigma,
            split: None,
            ..self.clone()
        }
    }

    pub fn with_affinity(&self, affinity: Matrix) -> MatchingModel {
        MatchingModel {
            affinity,
            split: None,
            ..self.clone()
        }
    }

    pub fn is_zero_affinity(&self) -> bool {
        self.affinity.iter().all(|&a| a == 0.0)
    }
}

/// Every violated invariant of `model`; empty means `equilibrium::solve` accepts it.
pub fn validate(model: &MatchingModel, policy: &NumericPolicy) -> Vec<Violation> {
    let mut out = Vec::new();
    let (m, n) = model.affinity.shape();
    if m == 0 || n == 0 {
        out.push(Violation::DimensionMismatch {
            field: "A".into(),
            expected: "at least 1x1".into(),
            got: format!("{m}x{n}"),
        });
        return out;
    }
    let finite = |mat: &Matrix| mat.iter().all(|x| x.is_finite());
    if !finite(&model.affinity) {
        out.push(Violation::NonFinite { field: "A".into() });
    }
    if !(model.sigma.is_finite() && model.sigma > 0.0) {
        out.push(Violation::NonPositiveSigma { sigma: model.sigma });
    }
    for (field, cov, k) in [
        (CovarianceField::SigmaX, &model.sigma_x, m),
        (CovarianceField::SigmaY, &model.sigma_y, n),
    ] {
        if cov.order() != k {
            out.push(Violation::DimensionMismatch {
                field: field.to_string(),
                expected: format!("{k}x{k}"),
                got: format!("{0}x{0}", cov.order()),
            });
        } else if !finite(cov.as_matrix()) {
            out.push(Violation::NonFinite { field: field.to_string() });
        } else if !cov.is_positive_definite(policy) {
            out.push(Violation::NotPositiveDefinite {
                field,
                min_eigenvalue: cov.min_eigenvalue(),
            });
        }
    }
    if finite(&model.affinity) && !model.is_zero_affinity() {
        let r = matcalc::rank(&model.affinity, policy);
        let expected = m.min(n);
        if r != expected {
            out.push(Violation::RankDeficientAffinity { rank: r, expected });
        }
    }
    if let Some(split) = &model.split {
        for (field, mat) in [("B", &split.worker_amenity), ("Gamma", &split.firm_productivity)] {
            if mat.shape() != (m, n) {
                out.push(Violation::DimensionMismatch {
                    field: field.into(),
                    expected: format!("{m}x{n}"),
                    got: format!("{}x{}", mat.nrows(), mat.ncols()),
                });
            }
        }
        if split.worker_amenity.shape() == (m, n) && split.firm_productivity.shape() == (m, n) {
            let diff = (&split.worker_amenity + &split.firm_productivity - &model.affinity).amax();
            let scale = model.affinity.amax().max(1.0);
            if !(diff <= 1e-12 * scale) {
                out.push(Violation::SplitSumMismatch { max_abs_diff: diff });
            }
        }
        for (field, value) in [("sigma1", split.sigma1), ("sigma2", split.sigma2)] {
            if !(value.is_finite() && value > 0.0) {
                out.push(Violation::NonPositiveSplitScale { field: field.into(), value });
            }
        }
        let total = split.sigma1 + split.sigma2;
        if !((total - model.sigma).abs() <= 1e-12 * model.sigma.abs().max(1.0)) {
            out.push(Violation::SplitScaleMismatch {
                sigma1: split.sigma1,
                sigma2: split.sigma2,
                sigma: model.sigma,
            });
        }
    }
    out
}

/// Bookkeeping about how an equilibrium was computed.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize)]
pub struct SolveMeta {
    /// Solved on the swapped `(Y, X)` problem because `m < n`.
    pub transposed: bool,
    /// `sigma` was below the conditioning threshold: the result is numerically the zero-heterogeneity limit.
    pub zero_sigma_limit: bool,
    /// `A = 0`: independent coupling.
    pub independent: bool,
}

/// The Gaussian equilibrium matching `N(0, joint_cov)` and derived quantities.
#[derive(Debug, Clone, PartialEq)]
pub struct Equilibrium {
    /// `E[X Y^T]`, `m x n`.
    pub cross_cov: Matrix,
    /// Regression of `Y` on `X`, `n x m`.
    pub regression: Matrix,
    pub cond_var_y: SymmetricMatrix,
    pub cond_var_x: SymmetricMatrix,
    pub delta: SymmetricMatrix,
    pub joint_cov: SymmetricMatrix,
    pub welfare: f64,
    pub sigma: f64,
    pub meta: SolveMeta,
}

impl Equilibrium {
    pub fn m(&self) -> usize {
        self.cross_cov.nrows()
    }

    pub fn n(&self) -> usize {
        self.cross_cov.ncols()
    }

    pub fn sigma_x(&self) -> SymmetricMatrix {
        let m = self.m();
        SymmetricMatrix::symmetrize(self.joint_cov.view((0, 0), (m, m)).into_owned())
    }

    pub fn sigma_y(&self) -> SymmetricMatrix {
        let (m, n) = (self.m(), self.n());
        SymmetricMatrix::symmetrize(self.joint_cov.view((m, m), (n, n)).into_owned())
    }

    /// Population moments of the equilibrium, tagged with a nominal sample size.
    pub fn moments(&self, n_obs: usize) -> MomentSet {
        MomentSet {
            sigma_x: self.sigma_x(),
            sigma_y: self.sigma_y(),
            cross: self.cross_cov.clone(),
            n_obs,
        }
    }
}

/// Assemble `[[Sx, Sxy], [Sxy^T, Sy]]`.
pub fn joint_covariance(sigma_x: &Matrix, cross: &Matrix, sigma_y: &Matrix) -> SymmetricMatrix {
    let (m, n) = cross.shape();
    let mut j = Matrix::zeros(m + n, m + n);
    j.view_mut((0, 0), (m, m)).copy_from(sigma_x);
    j.view_mut((0, m), (m, n)).copy_from(cross);
    j.view_mut((m, 0), (n, m)).copy_from(&cross.transpose());
    j.view_mut((m, m), (n, n)).copy_from(sigma_y);
    SymmetricMatrix::symmetrize(j)
}

/// Observed matches: row `k` of `x` is matched with row `k` of `y`.
#[derive(Debug, Clone, PartialEq)]
pub struct MatchedSample {
    pub x: Matrix,
    pub y: Matrix,
    pub transfers: Option<Vector>,
}

impl MatchedSample {
    pub fn new(x: Matrix, y: Matrix, transfers: Option<Vector>) -> Result<Self> {
        if x.nrows() != y.nrows() {
            return Err(Error::dim("MatchedSample", format!("{} rows in y", x.nrows()), y.nrows()));
        }
        if let Some(t) = &transfers {
            if t.len() != x.nrows() {
                return Err(Error::dim("MatchedSample transfers", x.nrows(), t.len()));
            }
            if t.iter().any(|v| !v.is_finite()) {
                return Err(Error::Validation(vec!["transfers contain non-finite values".into()]));
            }
        }
        matcalc::check_finite(&x, "sample x")?;
        matcalc::check_finite(&y, "sample y")?;
        Ok(Self { x, y, transfers })
    }

    pub fn n_obs(&self) -> usize {
        self.x.nrows()
    }

    pub fn m(&self) -> usize {
        self.x.ncols()
    }

    pub fn n(&self) -> usize {
        self.y.ncols()
    }

    pub fn x_row(&self, k: usize) -> Vector {
        self.x.row(k).transpose()
    }

    pub fn y_row(&self, k: usize) -> Vector {
        self.y.row(k).transpose()
    }
}

/// Second moments `(Sigma_X, Sigma_Y, Sigma_XY)` with the sample size they came from.
#[derive(Debug, Clone, PartialEq)]
pub struct MomentSet {
    pub sigma_x: SymmetricMatrix,
    pub sigma_y: SymmetricMatrix,
    pub cross: Matrix,
    pub n_obs: usize,
}

impl MomentSet {
    pub fn new(sigma_x: SymmetricMatrix, sigma_y: SymmetricMatrix, cross: Matrix, n_obs: usize) -> Result<Self> {
        Self::with_policy(sigma_x, sigma_y, cross, n_obs, &NumericPolicy::default())
    }

    pub fn with_policy(
        sigma_x: SymmetricMatrix,
        sigma_y: SymmetricMatrix,
        cross: Matrix,
        n_obs: usize,
        policy: &NumericPolicy,
    ) -> Result<Self> {
        if cross.shape() != (sigma_x.order(), sigma_y.order()) {
            return Err(Error::dim(
                "MomentSet",
                format!("{}x{}", sigma_x.order(), sigma_y.order()),
                format!("{}x{}", cross.nrows(), cross.ncols()),
            ));
        }
        matcalc::check_finite(&cross, "Sigma_XY")?;
        for (what, s) in [("Sigma_X", &sigma_x), ("Sigma_Y", &sigma_y)] {
            if !s.is_positive_definite(policy) {
                return Err(Error::NotPsd {
                    what: what.into(),
                    eigenvalue: s.min_eigenvalue(),
                    tolerance: policy.psd_rtol * s.spectral_norm(),
                });
            }
        }
        let joint = joint_covariance(&sigma_x, &cross, &sigma_y);
        let ev = joint.eigenvalues();
        let tol = policy.psd_rtol * joint.spectral_norm();
        if ev[0] < -tol {
            return Err(Error::NotPsd {
                what: "joint moment matrix".into(),
                eigenvalue: ev[0],
                tolerance: tol,
            });
        }
        Ok(Self {
            sigma_x,
            sigma_y,
            cross,
            n_obs,
        })
    }

    pub fn m(&self) -> usize {
        self.sigma_x.order()
    }

    pub fn n(&self) -> usize {
        self.sigma_y.order()
    }

    pub fn joint(&self) -> SymmetricMatrix {
        joint_covariance(&self.sigma_x, &self.cross, &self.sigma_y)
    }
}

/// Row-major nested-array serialization of matrices, and the JSON shapes built on it.
pub mod rows {
    use super::*;

    pub fn to_rows(m: &Matrix) -> Vec<Vec<f64>> {
        m.row_iter().map(|r| r.iter().copied().collect()).collect()
    }

    pub fn from_rows(rows: &[Vec<f64>], what: &str) -> std::result::Result<Matrix, String> {
        let r = rows.len();
        if r == 0 {
            return Err(format!("{what} must have at least one row"));
        }
        let c = rows[0].len();
        if c == 0 {
            return Err(format!("{what} must have at least one column"));
        }
        if let Some(bad) = rows.iter().position(|row| row.len() != c) {
            return Err(format!("{what} row {bad} has {} entries, expected {c}", rows[bad].len()));
        }
        let flat: Vec<f64> = rows.iter().flatten().copied().collect();
        if flat.iter().any(|v| !v.is_finite()) {
            return Err(format!("{what} has non-finite entries"));
        }
        Ok(Matrix::from_row_slice(r, c, &flat))
    }

    /// `serialize_with` adapter writing a matrix as row-major nested arrays.
    pub fn serialize_matrix<S: serde::Serializer>(m: &Matrix, s: S) -> std::result::Result<S::Ok, S::Error> {
        to_rows(m).serialize(s)
    }

    /// As [`serialize_matrix`] for symmetric matrices.
    pub fn serialize_symmetric<S: serde::Serializer>(m: &SymmetricMatrix, s: S) -> std::result::Result<S::Ok, S::Error> {
        to_rows(m).serialize(s)
    }

    pub fn sym_from_rows(rows: &[Vec<f64>], what: &str) -> std::result::Result<SymmetricMatrix, String> {
        let m = from_rows(rows, what)?;
        if !m.is_square() {
            return Err(format!("{what} must be square, got {}x{}", m.nrows(), m.ncols()));
        }
        Ok(SymmetricMatrix::symmetrize(m))
    }

    #[derive(Debug, Clone, Serialize, Deserialize)]
    #[serde(deny_unknown_fields)]
    pub struct SplitDoc {
        #[serde(rename = "B")]
        pub b: Vec<Vec<f64>>,
        #[serde(rename = "Gamma")]
        pub gamma: Vec<Vec<f64>>,
        pub sigma1: f64,
        pub sigma2: f64,
    }

    /// JSON form of [`MatchingModel`].
    #[derive(Debug, Clone, Serialize, Deserialize)]
    #[serde(deny_unknown_fields)]
    pub struct ModelDoc {
        #[serde(default = "one")]
        pub sigma: f64,
        #[serde(rename = "A")]
        pub a: Vec<Vec<f64>>,
        #[serde(rename = "Sigma_X")]
        pub sigma_x: Vec<Vec<f64>>,
        #[serde(rename = "Sigma_Y")]
        pub sigma_y: Vec<Vec<f64>>,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        pub split: Option<SplitDoc>,
    }

    fn one() -> f64 {
        1.0
    }

    impl TryFrom<ModelDoc> for MatchingModel {
        type Error = String;
        fn try_from(d: ModelDoc) -> std::result::Result<Self, String> {
            let split = match d.split {
                None => None,
                Some(s) => Some(SurplusSplit {
                    worker_amenity: from_rows(&s.b, "B")?,
                    firm_productivity: from_rows(&s.gamma, "Gamma")?,
                    sigma1: s.sigma1,
                    sigma2: s.sigma2,
                }),
            };
            Ok(MatchingModel {
                affinity: from_rows(&d.a, "A")?,
                sigma: d.sigma,
                sigma_x: sym_from_rows(&d.sigma_x, "Sigma_X")?,
                sigma_y: sym_from_rows(&d.sigma_y, "Sigma_Y")?,
                split,
            })
        }
    }

    impl From<MatchingModel> for ModelDoc {
        fn from(m: MatchingModel) -> Self {
            ModelDoc {
                sigma: m.sigma,
                a: to_rows(&m.affinity),
                sigma_x: to_rows(&m.sigma_x),
                sigma_y: to_rows(&m.sigma_y),
                split: m.split.map(|s| SplitDoc {
                    b: to_rows(&s.worker_amenity),
                    gamma: to_rows(&s.firm_productivity),
                    sigma1: s.sigma1,
                    sigma2: s.sigma2,
                }),
            }
        }
    }

    /// JSON form of [`MomentSet`].
    #[derive(Debug, Clone, Serialize, Deserialize)]
    #[serde(deny_unknown_fields)]
    pub struct MomentDoc {
        #[serde(rename = "Sigma_X")]
        pub sigma_x: Vec<Vec<f64>>,
        #[serde(rename = "Sigma_Y")]
        pub sigma_y: Vec<Vec<f64>>,
        #[serde(rename = "Sigma_XY")]
        pub sigma_xy: Vec<Vec<f64>>,
        #[serde(default)]
        pub n_obs: usize,
    }

    impl MomentDoc {
        pub fn into_moments(self, policy: &NumericPolicy) -> Result<MomentSet> {
            let conv = |e: String| Error::Validation(vec![e]);
            MomentSet::with_policy(
                sym_from_rows(&self.sigma_x, "Sigma_X").map_err(conv)?,
                sym_from_rows(&self.sigma_y, "Sigma_Y").map_err(conv)?,
                from_rows(&self.sigma_xy, "Sigma_XY").map_err(conv)?,
                self.n_obs,
                policy,
            )
        }

        pub fn from_moments(m: &MomentSet) -> Self {
            MomentDoc {
                sigma_x: to_rows(&m.sigma_x),
                sigma_y: to_rows(&m.sigma_y),
                sigma_xy: to_rows(&m.cross),
                n_obs: m.n_obs,
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn scalar(a: f64, sx: f64) -> MatchingModel {
        MatchingModel {
            affinity: Matrix::from_element(1, 1, a),
            sigma: 1.0,
            sigma_x: SymmetricMatrix::from_diagonal(&[sx]),
            sigma_y: SymmetricMatrix::from_diagonal(&[1.0]),
            split: None,
        }
    }

    #[test]
    fn scalar_model_is_valid() {
        assert!(validate(&scalar(1.0, 1.0), &NumericPolicy::default()).is_empty());
    }

    #[test]
    fn negative_variance_flagged() {
        let v = validate(&scalar(1.0, -1.0), &NumericPolicy::default());
        assert_eq!(v.len(), 1);
        assert!(matches!(
            v[0],
            Violation::NotPositiveDefinite {
                field: CovarianceField::SigmaX,
                ..
            }
        ));
    }

    #[test]
    fn rank_deficient_affinity_flagged() {
        let model = MatchingModel {
            affinity: Matrix::from_row_slice(2, 2, &[1.0, 2.0, 2.0, 4.0]),
            sigma: 1.0,
            sigma_x: SymmetricMatrix::identity(2),
            sigma_y: SymmetricMatrix::identity(2),
            split: None,
        };
        let v = validate(&model, &NumericPolicy::default());
        assert_eq!(v, vec![Violation::RankDeficientAffinity { rank: 1, expected: 2 }]);
        assert_eq!(v[0].code(), "RankDeficientAffinity");
    }

    #[test]
    fn zero_affinity_is_accepted() {
        let mut model = scalar(0.0, 1.0);
        model.affinity = Matrix::zeros(2, 3);
        model.sigma_x = SymmetricMatrix::identity(2);
        model.sigma_y = SymmetricMatrix::identity(3);
        assert!(validate(&model, &NumericPolicy::default()).is_empty());
    }

    #[test]
    fn split_checks() {
        let base = scalar(1.0, 1.0);
        let good = base.clone().with_split(SurplusSplit {
            worker_amenity: Matrix::from_element(1, 1, 0.25),
            firm_productivity: Matrix::from_element(1, 1, 0.75),
            sigma1: 0.4,
            sigma2: 0.6,
        });
        assert!(good.is_ok());
        let bad = base.with_split(SurplusSplit {
            worker_amenity: Matrix::from_element(1, 1, 0.5),
            firm_productivity: Matrix::from_element(1, 1, 0.75),
            sigma1: 0.4,
            sigma2: 0.4,
        });
        match bad.unwrap_err() {
            Error::InvalidModel(v) => {
                let codes: Vec<_> = v.iter().map(|x| x.code()).collect();
                assert_eq!(codes, vec!["SplitSumMismatch", "SplitScaleMismatch"]);
            }
            e => panic!("unexpected {e}"),
        }
    }

    #[test]
    fn json_round_trip_is_bit_identical() {
        let model = MatchingModel::new(
            Matrix::from_row_slice(2, 1, &[0.1 + 0.2, -1.0 / 3.0]),
            std::f64::consts::PI,
            SymmetricMatrix::new(Matrix::from_row_slice(2, 2, &[2.0, 0.1, 0.1, 1e-3 + 1.0])).unwrap(),
            SymmetricMatrix::from_diagonal(&[7.0 / 9.0]),
        )
        .unwrap();
        let s = serde_json::to_string(&model).unwrap();
        let back: MatchingModel = serde_json::from_str(&s).unwrap();
        assert_eq!(back, model);
        for (a, b) in back.affinity.iter().zip(model.affinity.iter()) {
            assert_eq!(a.to_bits(), b.to_bits());
        }
    }

    #[test]
    fn json_rejects_unknown_and_ragged() {
        let bad = r#"{"sigma":1,"A":[[1]],"Sigma_X":[[1]],"Sigma_Y":[[1]],"extra":1}"#;
        assert!(serde_json::from_str::<MatchingModel>(bad).is_err());
        let ragged = r#"{"A":[[1,2],[3]],"Sigma_X":[[1,0],[0,1]],"Sigma_Y":[[1,0],[0,1]]}"#;
        assert!(serde_json::from_str::<MatchingModel>(ragged).is_err());
    }

    #[test]
    fn moment_set_rejects_indefinite_joint() {
        let err = MomentSet::new(
            SymmetricMatrix::identity(1),
            SymmetricMatrix::identity(1),
            Matrix::from_element(1, 1, 1.5),
            10,
        )
        .unwrap_err();
        assert_eq!(err.code(), "NOT_PSD");
    }
}
