//! Equilibrium, identification and comparative statics for one-to-one matching
//! markets with transferable utility, Gaussian type distributions, a bilinear
//! surplus `x^T A y` and logit heterogeneity of scale `sigma`.
//!
//! ```
//! use gauss_match::{equilibrium, identification, MatchingModel, Matrix};
//!
//! let model = MatchingModel::standard(Matrix::from_element(1, 1, 1.0), 1.0).unwrap();
//! let eq = equilibrium::solve(&model).unwrap();
//! assert!((eq.cross_cov[(0, 0)] - 0.6180339887).abs() < 1e-9);
//!
//! let est = identification::identify(&eq.moments(0), 1.0).unwrap();
//! assert!((est.affinity[(0, 0)] - 1.0).abs() < 1e-12);
//! ```

// `!(x > 0.0)` is used on purpose: it also rejects NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod cli;
pub mod equilibrium;
pub mod error;
pub mod identification;
pub mod matcalc;
pub mod model;
pub mod policy;
pub mod simulate;
pub mod statics;

pub use error::{Error, Result};
pub use matcalc::{Matrix, SymmetricMatrix, Vector};
pub use model::{Equilibrium, MatchedSample, MatchingModel, MomentSet, SurplusSplit};
pub use policy::NumericPolicy;
