//! Split the surplus between workers and firms, compute equilibrium payoffs,
//! then recover the split from observed transfers.

use gauss_match::equilibrium::{payoffs, solve};
use gauss_match::identification::decompose_transfers;
use gauss_match::simulate::sample_joint;
use gauss_match::{MatchingModel, Matrix, SurplusSplit, Vector};

fn main() -> gauss_match::Result<()> {
    let model = MatchingModel::standard(Matrix::from_element(1, 1, 1.0), 1.0)?.with_split(SurplusSplit {
        worker_amenity: Matrix::from_element(1, 1, 0.3),
        firm_productivity: Matrix::from_element(1, 1, 0.7),
        sigma1: 0.4,
        sigma2: 0.6,
    })?;
    let eq = solve(&model)?;
    let (x, y) = (Vector::from_element(1, 1.0), Vector::from_element(1, 0.5));
    let p = payoffs(&model, &eq, &x, &y)?;
    println!(
        "match (1, 0.5): transfer {:.4}, worker {:.4}, firm {:.4}, sum {:.4}",
        p.transfer,
        p.worker_utility,
        p.firm_profit,
        p.worker_utility + p.firm_profit
    );

    let mut sample = sample_joint(&eq, 5000, 4)?;
    let tau = Vector::from_fn(sample.n_obs(), |k, _| payoffs(&model, &eq, &sample.x_row(k), &sample.y_row(k)).unwrap().transfer);
    sample.transfers = Some(tau);
    let d = decompose_transfers(&sample, &eq, &model.affinity)?;
    println!(
        "recovered amenity {:.4}, productivity {:.4}, sigma1 {:.4}, sigma2 {:.4}",
        d.worker_amenity[(0, 0)],
        d.firm_productivity[(0, 0)],
        d.sigma1,
        d.sigma2
    );
    Ok(())
}
