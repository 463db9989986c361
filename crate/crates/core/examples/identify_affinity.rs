//! Recover the affinity matrix from observed moments, then from a sample with standard errors.

use gauss_match::equilibrium::solve;
use gauss_match::identification::{estimate, identify};
use gauss_match::simulate::sample_joint;
use gauss_match::{MatchingModel, Matrix, MomentSet, SymmetricMatrix};

fn main() -> gauss_match::Result<()> {
    // Unit variances and correlation one half.
    let moments = MomentSet::new(
        SymmetricMatrix::identity(1),
        SymmetricMatrix::identity(1),
        Matrix::from_element(1, 1, 0.5),
        0,
    )?;
    println!("A from rho = 0.5: {}", identify(&moments, 1.0)?.affinity[(0, 0)]);

    let truth = Matrix::from_row_slice(2, 3, &[0.8, -0.4, 0.2, 0.1, 0.6, -0.5]);
    let model = MatchingModel::standard(truth.clone(), 1.0)?;
    let eq = solve(&model)?;
    println!("population round trip error {:.1e}", (identify(&eq.moments(0), 1.0)?.affinity - &truth).amax());

    let sample = sample_joint(&eq, 20_000, 7)?;
    let est = estimate(&sample)?;
    let se = est.standard_errors().expect("variance is available for a sample");
    println!("estimate (standard error) vs truth:");
    for i in 0..truth.nrows() {
        for j in 0..truth.ncols() {
            println!(
                "  A[{i},{j}] = {:+.4} ({:.4})   truth {:+.2}",
                est.affinity[(i, j)],
                se[(i, j)],
                truth[(i, j)]
            );
        }
    }
    Ok(())
}
