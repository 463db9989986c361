//! Solve a two-by-two market in closed form and inspect the equilibrium.
//!
//! ```sh
//! cargo run --example solve_equilibrium
//! ```

use gauss_match::equilibrium::{limit_sigma_infinity, limit_sigma_zero, solve, verify_foc};
use gauss_match::{MatchingModel, Matrix, SymmetricMatrix};

fn main() -> gauss_match::Result<()> {
    let model = MatchingModel::new(
        Matrix::from_row_slice(2, 2, &[1.0, 0.3, -0.2, 0.8]),
        0.5,
        SymmetricMatrix::new(Matrix::from_row_slice(2, 2, &[1.0, 0.3, 0.3, 1.0]))?,
        SymmetricMatrix::from_diagonal(&[1.0, 0.7]),
    )?;
    let eq = solve(&model)?;
    println!("cross-covariance {}", eq.cross_cov);
    println!("E[Y | X] = T X with T = {}", eq.regression);
    println!("welfare {:.6}", eq.welfare);

    let foc = verify_foc(&model, &eq);
    println!("first-order residuals {:.1e} {:.1e}", foc.r1 / foc.scale1, foc.r2 / foc.scale2);

    // Heterogeneity interpolates between the optimal deterministic plan and independence.
    println!("sigma -> 0 limit {}", limit_sigma_zero(&model)?);
    for sigma in [1e-3, 0.1, 1.0, 10.0] {
        let c = solve(&model.with_sigma(sigma))?.cross_cov;
        println!("sigma = {sigma:<6} |cross-cov| = {:.4}", c.norm());
    }
    println!("sigma -> infinity limit {}", limit_sigma_infinity(&model));

    // The scalar benchmark: correlation solves r^2 + r - 1 = 0.
    let golden = solve(&MatchingModel::standard(Matrix::from_element(1, 1, 1.0), 1.0)?)?;
    println!("golden-ratio market: corr = {}", golden.cross_cov[(0, 0)]);
    Ok(())
}
