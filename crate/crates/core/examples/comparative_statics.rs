//! Closed-form Jacobians of the identification map and of the equilibrium,
//! checked against finite differences.

use gauss_match::equilibrium::solve;
use gauss_match::statics::{fd_equilibrium_jacobians, jacobian_set};
use gauss_match::{MatchingModel, Matrix, NumericPolicy, SymmetricMatrix};

fn main() -> gauss_match::Result<()> {
    let golden = MatchingModel::standard(Matrix::from_element(1, 1, 1.0), 1.0)?;
    let set = jacobian_set(&golden, &solve(&golden)?)?;
    println!("dA/dSigma_XY = {:.6}", set.da_dsxy[(0, 0)]);
    println!("dA/dSigma_X  = {:.6}", set.da_dsx[(0, 0)]);
    println!("dSigma_XY/dA = {:.6}", set.dsxy_da[(0, 0)]);

    let model = MatchingModel::new(
        Matrix::from_row_slice(2, 2, &[0.9, 0.2, -0.3, 0.5]),
        0.8,
        SymmetricMatrix::new(Matrix::from_row_slice(2, 2, &[1.2, 0.4, 0.4, 0.9]))?,
        SymmetricMatrix::identity(2),
    )?;
    let eq = solve(&model)?;
    let set = jacobian_set(&model, &eq)?;
    println!("dvec(Sigma_XY)/dvec(A) = {:.4}", set.dsxy_da);
    println!("inverse-function residual {:.1e}", set.inverse_relation_residual());

    let fd = fd_equilibrium_jacobians(&model, &NumericPolicy::default())?;
    println!("finite-difference gap {:.1e}", (&fd.dsxy_da - &set.dsxy_da).amax());
    Ok(())
}
