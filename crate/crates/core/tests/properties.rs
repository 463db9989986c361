mod common;

use common::*;
use gauss_match::equilibrium::{entropic_objective, payoffs, solve, verify_foc};
use gauss_match::identification::identify;
use gauss_match::matcalc::{commutation, kron, pinv, rank, sym_sqrt, symmetrizer, unvec, vec};
use gauss_match::statics::{
    default_step, equilibrium_jacobians, fd_equilibrium_jacobians, fd_identification_jacobians, fd_jacobian,
    identification_jacobians, jacobian_set, FdMode,
};
use gauss_match::{MatchingModel, Matrix, NumericPolicy, SymmetricMatrix, Vector};
use proptest::prelude::*;
use rand::Rng;

fn dims() -> impl Strategy<Value = (usize, usize)> {
    (1usize..=3, 1usize..=3)
}

fn config(cases: u32) -> ProptestConfig {
    ProptestConfig {
        cases,
        ..ProptestConfig::default()
    }
}

proptest! {
    #![proptest_config(config(50))]

    #[test]
    fn vec_of_product(seed in any::<u64>(), (m, p) in dims(), (n, q) in dims()) {
        let mut r = rng(seed);
        let a = random_matrix(&mut r, m, p);
        let b = random_matrix(&mut r, n, q);
        let x = random_matrix(&mut r, q, p);
        let lhs = vec(&(&b * &x * a.transpose()));
        let rhs = kron(&a, &b) * vec(&x);
        prop_assert!((lhs - rhs).amax() < 1e-12);
    }

    #[test]
    fn kronecker_algebra(seed in any::<u64>(), (m, p) in dims(), (n, q) in dims()) {
        let mut r = rng(seed);
        let a = random_matrix(&mut r, m, p);
        let b = random_matrix(&mut r, n, q);
        let b2 = random_matrix(&mut r, n, q);
        let c = random_matrix(&mut r, 2, 3);
        // associativity, distributivity, multilinearity
        prop_assert!((kron(&kron(&a, &b), &c) - kron(&a, &kron(&b, &c))).amax() < 1e-12);
        prop_assert!((kron(&a, &(&b + &b2)) - kron(&a, &b) - kron(&a, &b2)).amax() < 1e-12);
        prop_assert!((kron(&(&a * 2.5), &(&b * -0.5)) - kron(&a, &b) * -1.25).amax() < 1e-12);
        // mixed product
        let cc = random_matrix(&mut r, p, 2);
        let dd = random_matrix(&mut r, q, 3);
        prop_assert!((kron(&a, &b) * kron(&cc, &dd) - kron(&(&a * &cc), &(&b * &dd))).amax() < 1e-12);
        // transpose
        prop_assert!((kron(&a, &b).transpose() - kron(&a.transpose(), &b.transpose())).amax() < 1e-15);
        // trace and singular values on square factors
        let sa = random_matrix(&mut r, m, m);
        let sb = random_matrix(&mut r, n, n);
        prop_assert!((kron(&sa, &sb).trace() - sa.trace() * sb.trace()).abs() < 1e-12);
        let mut sv: Vec<f64> = kron(&a, &b).svd(false, false).singular_values.iter().copied().collect();
        let sva = a.clone().svd(false, false).singular_values;
        let svb = b.clone().svd(false, false).singular_values;
        let mut prod: Vec<f64> = sva.iter().flat_map(|x| svb.iter().map(move |y| x * y)).collect();
        sv.sort_by(|x, y| y.total_cmp(x));
        prod.sort_by(|x, y| y.total_cmp(x));
        // any singular values beyond the products are zero
        for (k, s) in sv.iter().enumerate() {
            let t = prod.get(k).copied().unwrap_or(0.0);
            prop_assert!((s - t).abs() < 1e-10);
        }
    }

    #[test]
    fn kronecker_inverse_and_rank(seed in any::<u64>(), (m, n) in dims()) {
        let mut r = rng(seed);
        let a = random_full_rank(&mut r, m, m);
        let b = random_full_rank(&mut r, n, n);
        let inv = kron(&a, &b).try_inverse().unwrap();
        let b_copy = b.clone();
        let want = kron(&a.try_inverse().unwrap(), &b_copy.try_inverse().unwrap());
        prop_assert!(rel(&inv, &want) < 1e-10);
        let low = random_matrix(&mut r, m + 1, 1) * random_matrix(&mut r, 1, n + 1);
        let p = NumericPolicy::default();
        prop_assert_eq!(rank(&kron(&low, &b), &p), rank(&low, &p) * rank(&b, &p));
    }

    /// For `A` of order `m` and `B` of order `n`, `det(A ⊗ B) = det(A)^n det(B)^m`.
    #[test]
    fn kronecker_determinant(seed in any::<u64>(), (m, n) in dims()) {
        let mut r = rng(seed);
        let a = random_matrix(&mut r, m, m) + Matrix::identity(m, m);
        let b = random_matrix(&mut r, n, n) + Matrix::identity(n, n);
        let direct = kron(&a, &b).determinant();
        let want = a.determinant().powi(n as i32) * b.determinant().powi(m as i32);
        prop_assert!((direct - want).abs() < 1e-10 * want.abs().max(1.0));
    }

    #[test]
    fn commutation_is_a_transposing_permutation(seed in any::<u64>(), (m, n) in dims()) {
        let t = commutation(m, n);
        for k in 0..m * n {
            prop_assert_eq!(t.row(k).iter().filter(|v| **v == 1.0).count(), 1);
            prop_assert_eq!(t.column(k).iter().filter(|v| **v == 1.0).count(), 1);
        }
        prop_assert_eq!(t.iter().filter(|v| **v != 0.0 && **v != 1.0).count(), 0);
        let x = random_matrix(&mut rng(seed), m, n);
        prop_assert_eq!(&t * vec(&x), vec(&x.transpose()));
        prop_assert_eq!(&t * commutation(n, m), Matrix::identity(m * n, m * n));
        prop_assert_eq!(t.transpose(), commutation(n, m));
    }

    #[test]
    fn root_and_pseudoinverse(seed in any::<u64>(), (m, n) in dims()) {
        let mut r = rng(seed);
        let p = NumericPolicy::default();
        let s = random_spd(&mut r, m);
        let root = sym_sqrt(&s, &p).unwrap();
        prop_assert!(rel(&(root.as_matrix() * root.as_matrix()), &s) < 1e-10);
        let mm = random_matrix(&mut r, m, n);
        prop_assert!(rel(&pinv(&pinv(&mm, &p), &p), &mm) < 1e-10);
        prop_assert!(rel(&pinv(&mm, &p).transpose(), &pinv(&mm.transpose(), &p)) < 1e-10);
    }

    #[test]
    fn derivative_of_linear_map(seed in any::<u64>(), (m, p) in dims(), (n, q) in dims()) {
        let mut r = rng(seed);
        let a = random_matrix(&mut r, m, p);
        let b = random_matrix(&mut r, q, n);
        let x = random_matrix(&mut r, p, q);
        let fd = fd_jacobian(|x| Ok(&a * x * &b), &x, 1e-5, FdMode::Full).unwrap();
        prop_assert!((fd - kron(&b.transpose(), &a)).amax() < 1e-6);
        let fd_t = fd_jacobian(|x| Ok(x.transpose()), &x, 1e-5, FdMode::Full).unwrap();
        prop_assert!((fd_t - commutation(p, q)).amax() < 1e-6);
    }

    #[test]
    fn derivative_of_inverse_and_square(seed in any::<u64>(), k in 1usize..=3) {
        let mut r = rng(seed);
        let a = random_full_rank(&mut r, k, k) + Matrix::identity(k, k) * 2.0;
        let inv = a.clone().try_inverse().unwrap();
        let fd = fd_jacobian(|x| x.clone().try_inverse().ok_or(gauss_match::Error::InvalidConfig("singular".into())), &a, 1e-5, FdMode::Full).unwrap();
        let want = -kron(&inv.transpose(), &inv);
        prop_assert!((&fd - &want).amax() < 1e-6 * want.amax().max(1.0));
        let fd2 = fd_jacobian(|x| Ok(x * x), &a, 1e-5, FdMode::Full).unwrap();
        let id = Matrix::identity(k, k);
        prop_assert!((fd2 - (kron(&id, &a) + kron(&a.transpose(), &id))).amax() < 1e-6);
    }

    /// On symmetric directions the derivative of the square root is
    /// `(I ⊗ S^{1/2} + S^{1/2} ⊗ I)^{-1} (I + T) / 2`.
    #[test]
    fn derivative_of_square_root(seed in any::<u64>(), k in 1usize..=3) {
        let mut r = rng(seed);
        let s = random_spd(&mut r, k);
        let p = NumericPolicy::default();
        let root = sym_sqrt(&s, &p).unwrap();
        let id = Matrix::identity(k, k);
        let sylvester = (kron(&id, &root) + kron(&root, &id)).try_inverse().unwrap();
        let fd = fd_jacobian(
            |x| Ok(sym_sqrt(&SymmetricMatrix::new(x.clone())?, &p)?.into_inner()),
            &s,
            1e-5,
            FdMode::Symmetric,
        )
        .unwrap();
        prop_assert!((fd - sylvester * symmetrizer(k)).amax() < 1e-6);
    }

    #[test]
    fn product_rule(seed in any::<u64>(), (m, p) in dims(), q in 1usize..=3) {
        let mut r = rng(seed);
        let x = random_matrix(&mut r, m, p);
        let c = random_matrix(&mut r, p, q);
        // f(X) = X X^T X (m x p), g(X) = X^T C' with C' m x q
        let cq = random_matrix(&mut r, m, q);
        let f = |x: &Matrix| x * x.transpose() * x;
        let g = |x: &Matrix| x.transpose() * &cq + &c;
        let df = fd_jacobian(|x| Ok(f(x)), &x, 1e-5, FdMode::Full).unwrap();
        let dg = fd_jacobian(|x| Ok(g(x)), &x, 1e-5, FdMode::Full).unwrap();
        let dfg = fd_jacobian(|x| Ok(f(x) * g(x)), &x, 1e-5, FdMode::Full).unwrap();
        let want = kron(&g(&x).transpose(), &Matrix::identity(m, m)) * df + kron(&Matrix::identity(q, q), &f(&x)) * dg;
        prop_assert!((dfg - want).amax() < 1e-6);
    }
}

proptest! {
    #![proptest_config(config(40))]

    #[test]
    fn model_json_round_trip(seed in any::<u64>(), (m, n) in dims()) {
        let model = random_split_model(&mut rng(seed), m, n, 0.7);
        let text = serde_json::to_string(&model).unwrap();
        let back: MatchingModel = serde_json::from_str(&text).unwrap();
        prop_assert_eq!(back, model);
    }

    #[test]
    fn solve_satisfies_first_order_conditions(seed in any::<u64>(), m in 1usize..=6, n in 1usize..=6, ls in -1.0f64..1.0) {
        let model = random_model(&mut rng(seed), m, n, 10f64.powf(ls));
        let eq = solve(&model).unwrap();
        let foc = verify_foc(&model, &eq);
        prop_assert!(foc.passes(1e-10), "{:?}", foc);
        let back = identify(&eq.moments(0), model.sigma).unwrap();
        prop_assert!(rel(&back.affinity, &model.affinity) < 1e-8);
    }

    #[test]
    fn identification_is_scale_equivariant(seed in any::<u64>(), (m, n) in dims(), s in 0.1f64..10.0) {
        let model = random_model(&mut rng(seed), m, n, 1.0);
        let mo = solve(&model).unwrap().moments(0);
        let one = identify(&mo, 1.0).unwrap().affinity;
        let scaled = identify(&mo, s).unwrap().affinity;
        prop_assert!(rel(&scaled, &(one * s)) < 1e-12);
    }

    #[test]
    fn square_identification_forms_agree(seed in any::<u64>(), k in 1usize..=4) {
        let model = random_model(&mut rng(seed), k, k, 1.0);
        let est = identify(&solve(&model).unwrap().moments(0), 1.0).unwrap();
        prop_assert!(est.pinv_form_gap.unwrap() < 1e-8);
    }

    #[test]
    fn negating_affinity_negates_cross_covariance(seed in any::<u64>(), (m, n) in dims()) {
        let model = random_model(&mut rng(seed), m, n, 1.0);
        let neg = model.clone().with_affinity(-&model.affinity);
        let (e1, e2) = (solve(&model).unwrap(), solve(&neg).unwrap());
        prop_assert!((&e1.cross_cov + &e2.cross_cov).amax() < 1e-10);
        prop_assert!((e1.cond_var_y.as_matrix() - e2.cond_var_y.as_matrix()).amax() < 1e-10);
    }

    #[test]
    fn swapping_sides_transposes(seed in any::<u64>(), (m, n) in dims()) {
        let model = random_model(&mut rng(seed), m, n, 0.8);
        let e1 = solve(&model).unwrap();
        let e2 = solve(&model.swapped()).unwrap();
        prop_assert!((e1.cross_cov.transpose() - &e2.cross_cov).amax() < 1e-10);
    }

    #[test]
    fn block_diagonal_models_decouple(seed in any::<u64>(), (m1, n1) in dims(), (m2, n2) in dims()) {
        let mut r = rng(seed);
        let b1 = random_model(&mut r, m1, n1, 1.0);
        let b2 = random_model(&mut r, m2, n2, 1.0);
        let blk = |a: &Matrix, b: &Matrix| {
            let mut out = Matrix::zeros(a.nrows() + b.nrows(), a.ncols() + b.ncols());
            out.view_mut((0, 0), a.shape()).copy_from(a);
            out.view_mut((a.nrows(), a.ncols()), b.shape()).copy_from(b);
            out
        };
        let joined = MatchingModel::new(
            blk(&b1.affinity, &b2.affinity),
            1.0,
            SymmetricMatrix::new(blk(&b1.sigma_x, &b2.sigma_x)).unwrap(),
            SymmetricMatrix::new(blk(&b1.sigma_y, &b2.sigma_y)).unwrap(),
        );
        // the joined affinity is rank deficient when the blocks' shapes disagree
        prop_assume!(joined.is_ok());
        let eq = solve(&joined.unwrap()).unwrap();
        let want = blk(&solve(&b1).unwrap().cross_cov, &solve(&b2).unwrap().cross_cov);
        prop_assert!((eq.cross_cov - want).amax() < 1e-10);
    }

    #[test]
    fn equilibrium_maximizes_entropic_objective(seed in any::<u64>(), (m, n) in dims()) {
        let mut r = rng(seed);
        let model = random_model(&mut r, m, n, 1.0);
        let eq = solve(&model).unwrap();
        let best = entropic_objective(&model, &eq.cross_cov).unwrap();
        let mut tried = 0;
        while tried < 20 {
            let dir = random_matrix(&mut r, m, n);
            let eps: f64 = r.gen_range(1e-3..1e-1);
            let Ok(value) = entropic_objective(&model, &(&eq.cross_cov + dir * eps)) else { continue };
            tried += 1;
            prop_assert!(value < best);
        }
    }

    #[test]
    fn payoffs_add_up(seed in any::<u64>(), (m, n) in dims()) {
        let mut r = rng(seed);
        let model = random_split_model(&mut r, m, n, 1.3);
        let eq = solve(&model).unwrap();
        for _ in 0..20 {
            let x = Vector::from_fn(m, |_, _| r.gen_range(-3.0..3.0));
            let y = Vector::from_fn(n, |_, _| r.gen_range(-3.0..3.0));
            let p = payoffs(&model, &eq, &x, &y).unwrap();
            let xay = x.dot(&(&model.affinity * &y));
            let xby = x.dot(&(&model.split.as_ref().unwrap().worker_amenity * &y));
            prop_assert!((p.worker_utility + p.firm_profit - xay).abs() < 1e-12 * (1.0 + xay.abs() + p.worker_utility.abs()));
            prop_assert!((p.worker_utility - xby - p.transfer).abs() < 1e-12 * (1.0 + p.worker_utility.abs() + xby.abs()));
        }
    }
}

proptest! {
    #![proptest_config(config(20))]

    #[test]
    fn closed_form_jacobians_match_finite_differences(seed in any::<u64>(), (m, n) in dims()) {
        let p = NumericPolicy::default();
        let model = random_model(&mut rng(seed), m, n, 1.0);
        let eq = solve(&model).unwrap();
        let mo = eq.moments(0);
        let ident = identification_jacobians(&mo, model.sigma).unwrap();
        let fd = fd_identification_jacobians(&mo, model.sigma, &p).unwrap();
        prop_assert!(rel(&ident.da_dsxy, &fd.da_dsxy) < 1e-6);
        prop_assert!(rel(&(&ident.da_dsx * symmetrizer(m)), &fd.da_dsx) < 1e-6);
        prop_assert!(rel(&(&ident.da_dsy * symmetrizer(n)), &fd.da_dsy) < 1e-6);
        let equil = equilibrium_jacobians(&model, &eq).unwrap();
        let fd = fd_equilibrium_jacobians(&model, &p).unwrap();
        prop_assert!(rel(&equil.dsxy_da, &fd.dsxy_da) < 1e-6);
        prop_assert!(rel(&equil.dsxy_dsx, &fd.dsxy_dsx) < 1e-6);
        prop_assert!(rel(&equil.dsxy_dsy, &fd.dsxy_dsy) < 1e-6);
    }

    #[test]
    fn statics_are_mutually_inverse(seed in any::<u64>(), (m, n) in dims(), ls in -1.0f64..1.0) {
        let model = random_model(&mut rng(seed), m, n, 10f64.powf(ls));
        let set = jacobian_set(&model, &solve(&model).unwrap()).unwrap();
        prop_assert!(set.inverse_relation_residual() < 1e-8);
    }

    #[test]
    fn statics_commute_with_swapping_sides(seed in any::<u64>(), (m, n) in dims()) {
        let model = random_model(&mut rng(seed), m, n, 1.0);
        let direct = equilibrium_jacobians(&model, &solve(&model).unwrap()).unwrap();
        let sw = model.swapped();
        let swapped = equilibrium_jacobians(&sw, &solve(&sw).unwrap()).unwrap();
        let (tmn, tnm) = (commutation(m, n), commutation(n, m));
        prop_assert!((&direct.dsxy_da - &tnm * &swapped.dsxy_da * &tmn).amax() < 1e-10);
        prop_assert!((&direct.dsxy_dsx - &tnm * &swapped.dsxy_dsy).amax() < 1e-10);
        prop_assert!((&direct.dsxy_dsy - &tnm * &swapped.dsxy_dsx).amax() < 1e-10);
    }
}

#[test]
fn cross_covariance_shrinks_with_heterogeneity() {
    let model = MatchingModel::standard(Matrix::from_element(1, 1, 1.0), 1.0).unwrap();
    let grid: Vec<f64> = (0..=40).map(|k| 10f64.powf(-2.0 + k as f64 * 0.1)).collect();
    let norms: Vec<f64> = grid
        .iter()
        .map(|s| solve(&model.clone().with_sigma(*s)).unwrap().cross_cov.norm())
        .collect();
    assert!(norms.windows(2).all(|w| w[1] < w[0]));
}

#[test]
fn finite_difference_examples() {
    let id = Matrix::identity(2, 2);
    let fd = fd_jacobian(|x| Ok(x.clone().try_inverse().unwrap()), &id, 1e-5, FdMode::Full).unwrap();
    assert!((fd + Matrix::identity(4, 4)).amax() < 1e-8);
    let s = SymmetricMatrix::from_diagonal(&[4.0, 9.0]);
    let p = NumericPolicy::default();
    let fd = fd_jacobian(|x| Ok(sym_sqrt(&SymmetricMatrix::new(x.clone())?, &p)?.into_inner()), &s, 1e-5, FdMode::Symmetric).unwrap();
    let root = Matrix::from_diagonal(&Vector::from_column_slice(&[2.0, 3.0]));
    let want = (kron(&id, &root) + kron(&root, &id)).try_inverse().unwrap() * symmetrizer(2);
    assert!((fd - want).amax() < 1e-6);
    assert!(default_step(&id, &p) > 1e-5);
    assert_eq!(unvec(vec(&id).as_slice(), 2, 2).unwrap(), id);
}
