//! The vec/Kronecker toolkit the derivatives are built from.

use gauss_match::matcalc::{commutation, kron, sym_sqrt, unvec, vec};
use gauss_match::{Matrix, NumericPolicy, SymmetricMatrix};

fn main() -> gauss_match::Result<()> {
    let a = Matrix::from_row_slice(2, 2, &[1.0, 2.0, 3.0, 4.0]);
    let b = Matrix::from_row_slice(3, 2, &[0.0, 1.0, 1.0, 0.0, 2.0, -1.0]);
    let x = Matrix::from_row_slice(2, 2, &[1.0, -1.0, 0.5, 2.0]);

    // vec(B X A^T) = (A kron B) vec(X)
    let lhs = vec(&(&b * &x * a.transpose()));
    let rhs = kron(&a, &b) * vec(&x);
    println!("vec identity gap {:.1e}", (lhs - rhs).amax());

    let t = commutation(3, 2);
    let m = Matrix::from_row_slice(3, 2, &[1.0, 2.0, 3.0, 4.0, 5.0, 6.0]);
    println!("T vec(M) reshaped = {}", unvec((&t * vec(&m)).as_slice(), 2, 3)?);

    let s = SymmetricMatrix::new(Matrix::from_row_slice(2, 2, &[4.0, 1.0, 1.0, 3.0]))?;
    let root = sym_sqrt(&s, &NumericPolicy::default())?;
    println!("square root {}", root.as_matrix());
    Ok(())
}
