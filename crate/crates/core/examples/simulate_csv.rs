//! Draw a matched sample, write it as CSV, read it back and estimate.

use gauss_match::cli::{read_sample, write_sample};
use gauss_match::equilibrium::solve;
use gauss_match::identification::estimate;
use gauss_match::simulate::sample_joint;
use gauss_match::{MatchingModel, Matrix};

fn main() -> gauss_match::Result<()> {
    let model = MatchingModel::standard(Matrix::from_row_slice(1, 2, &[1.0, -0.5]), 1.0)?;
    let sample = sample_joint(&solve(&model)?, 10_000, 11)?;

    let path = std::env::temp_dir().join("gauss_match_draws.csv");
    write_sample(&path, &sample)?;
    let back = read_sample(&path)?;
    println!("wrote and read {} rows to {}", back.n_obs(), path.display());
    assert_eq!(back.x, sample.x);

    println!("estimated A = {}", estimate(&back)?.affinity);
    Ok(())
}
