#![allow(dead_code)]

use gauss_match::{MatchingModel, Matrix, SymmetricMatrix, SurplusSplit};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha20Rng;

pub fn rng(seed: u64) -> ChaCha20Rng {
    ChaCha20Rng::seed_from_u64(seed)
}

pub fn random_matrix(rng: &mut impl Rng, rows: usize, cols: usize) -> Matrix {
    Matrix::from_fn(rows, cols, |_, _| rng.gen_range(-1.0..1.0))
}

/// `B B^T / k + I / 2`, well conditioned.
pub fn random_spd(rng: &mut impl Rng, k: usize) -> SymmetricMatrix {
    let b = random_matrix(rng, k, k);
    SymmetricMatrix::new(&b * b.transpose() / k as f64 + Matrix::identity(k, k) * 0.5).unwrap()
}

/// Full-rank matrix with singular values spread by at most a factor of 10.
pub fn random_full_rank(rng: &mut impl Rng, rows: usize, cols: usize) -> Matrix {
    loop {
        let a = random_matrix(rng, rows, cols) * 1.5;
        let sv = a.clone().svd(false, false).singular_values;
        if sv.min() > 0.1 * sv.max() {
            return a;
        }
    }
}

pub fn random_model(rng: &mut impl Rng, m: usize, n: usize, sigma: f64) -> MatchingModel {
    let a = random_full_rank(rng, m, n);
    let sx = random_spd(rng, m);
    let sy = random_spd(rng, n);
    MatchingModel::new(a, sigma, sx, sy).unwrap()
}

/// Random model with a surplus split whose scales add up to `sigma`.
pub fn random_split_model(rng: &mut impl Rng, m: usize, n: usize, sigma: f64) -> MatchingModel {
    let model = random_model(rng, m, n, sigma);
    let share: f64 = rng.gen_range(0.1..0.9);
    let b = random_matrix(rng, m, n);
    let gamma = &model.affinity - &b;
    model
        .with_split(SurplusSplit {
            worker_amenity: b,
            firm_productivity: gamma,
            sigma1: share * sigma,
            sigma2: sigma - share * sigma,
        })
        .unwrap()
}

pub fn rel(a: &Matrix, b: &Matrix) -> f64 {
    (a - b).norm() / b.norm().max(1e-300)
}
