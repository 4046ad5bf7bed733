use nalgebra::DVector;
use proptest::prelude::*;

use ecr_core::ecr::{
    apply_paired_steps, apply_rational_chain, apply_scaled_inverse_chain, solve, EcrSolver,
    SeparableSystem, SolveOptions,
};
use ecr_core::matrices::{build_m1, build_m2, build_poisson, scale_into_conditions};
use ecr_core::tridiag::{
    detgtri, eigenvalues_bisect, mob_error_bound, solve_shifted, sturm_count, symmetrize_similarity,
    EigenRequest, TridiagonalMatrix, UNIT_ROUNDOFF,
};
use ecr_core::verify::oracle::{dense_kron_solve, dense_polynomial};
use ecr_core::verify::{check_det_lemma, dense_eigen};
use ecr_core::zeros::{build_zero_table, PairedChain};

fn tridiag(q: usize) -> impl Strategy<Value = TridiagonalMatrix> {
    (
        prop::collection::vec(1.0f64..3.0, q),
        prop::collection::vec(-0.9f64..0.9, q - 1),
        prop::collection::vec(-0.9f64..0.9, q - 1),
    )
        .prop_map(|(d, l, u)| TridiagonalMatrix::new(d, l, u).unwrap())
}

fn symmetric(max: usize) -> impl Strategy<Value = TridiagonalMatrix> {
    (1..=max).prop_flat_map(|q| {
        (
            prop::collection::vec(-2.0f64..2.0, q),
            prop::collection::vec(-1.0f64..1.0, q - 1),
        )
            .prop_map(|(d, o)| TridiagonalMatrix::symmetric(d, o).unwrap())
    })
}

/// SPD with spectrum inside (0, 1): diagonal in [0.4, 0.6], couplings below 0.2.
fn conditioned_spd(q: usize) -> impl Strategy<Value = TridiagonalMatrix> {
    (
        prop::collection::vec(0.4f64..0.6, q),
        prop::collection::vec(0.02f64..0.19, q - 1),
        prop::collection::vec(prop::bool::ANY, q - 1),
    )
        .prop_map(|(d, o, s)| {
            let off = o.iter().zip(s).map(|(v, neg)| if neg { -v } else { *v }).collect();
            TridiagonalMatrix::symmetric(d, off).unwrap()
        })
}

fn rel(a: &[f64], b: &[f64]) -> f64 {
    let num: f64 = a.iter().zip(b).map(|(x, y)| (x - y).powi(2)).sum();
    let den: f64 = b.iter().map(|y| y * y).sum();
    (num / den).sqrt()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn detgtri_matches_dense_lu(t in (1usize..=64).prop_flat_map(tridiag)) {
        // strict diagonal dominance keeps every pivot away from zero
        let want = t.to_dense().determinant();
        let got = detgtri(&t).unwrap();
        prop_assert!((got - want).abs() <= 1e-10 * want.abs());
    }

    #[test]
    fn sturm_count_is_monotone(t in symmetric(24), xs in prop::collection::vec(-5.0f64..5.0, 8)) {
        let mut xs = xs;
        xs.sort_by(f64::total_cmp);
        let counts: Vec<usize> = xs.iter().map(|&x| sturm_count(&t, x)).collect();
        prop_assert!(counts.windows(2).all(|w| w[0] <= w[1]));
    }

    #[test]
    fn bisection_brackets_by_sturm(t in symmetric(40)) {
        let eps = mob_error_bound(&t, UNIT_ROUNDOFF).max(1e-12);
        let ev = eigenvalues_bisect(&t, &EigenRequest::default());
        for (j, &l) in ev.iter().enumerate() {
            prop_assert!(sturm_count(&t, l - 2.0 * eps) <= j);
            prop_assert!(sturm_count(&t, l + 2.0 * eps) > j);
        }
    }

    #[test]
    fn bisection_agrees_with_jacobi(t in symmetric(64)) {
        let got = eigenvalues_bisect(&t, &EigenRequest::default());
        let want = dense_eigen(&t).unwrap();
        let tol = mob_error_bound(&t, UNIT_ROUNDOFF) + 1e-12 * t.norm_inf().max(1.0);
        for (g, w) in got.iter().zip(&want) {
            prop_assert!((g - w).abs() <= tol);
        }
    }

    #[test]
    fn det_lemma_on_random_matrices(t in (3usize..=12).prop_flat_map(tridiag)) {
        prop_assert!(check_det_lemma(&t).unwrap() <= 1e-9);
    }

    #[test]
    fn symmetrization_preserves_determinant(
        d in prop::collection::vec(1.0f64..3.0, 6),
        l in prop::collection::vec(0.05f64..0.9, 5),
        u in prop::collection::vec(0.05f64..0.9, 5),
    ) {
        let t = TridiagonalMatrix::new(d, l, u).unwrap();
        let (_, s) = symmetrize_similarity(&t).unwrap();
        prop_assert!(s.is_symmetric());
        let (a, b) = (detgtri(&t).unwrap(), detgtri(&s).unwrap());
        prop_assert!((a - b).abs() <= 1e-12 * a.abs());
    }

    #[test]
    fn ecr_matches_dense_oracle(
        k in 1u32..=4,
        m in 1usize..=16,
        seed in 0u64..1000,
    ) {
        let n = (1usize << k) - 1;
        let rn = scale_into_conditions(&build_m2(n).unwrap());
        let b = scale_into_conditions(&build_poisson(m).unwrap());
        let y = ecr_core::cli::random_rhs(n, m, seed);
        let sys = SeparableSystem::new(b, rn, y).unwrap();
        let (x, _) = solve(&sys, &SolveOptions::default()).unwrap();
        let xd = dense_kron_solve(&sys).unwrap();
        prop_assert!(rel(&x.flatten(), &xd.flatten()) <= 1e-8);
    }

    #[test]
    fn ecr_random_conditioned_rn(rn in conditioned_spd(15), b in conditioned_spd(6), seed in 0u64..100) {
        let sys = SeparableSystem::new(b, rn, ecr_core::cli::random_rhs(15, 6, seed)).unwrap();
        let (x, _) = solve(&sys, &SolveOptions::default()).unwrap();
        let xd = dense_kron_solve(&sys).unwrap();
        prop_assert!(rel(&x.flatten(), &xd.flatten()) <= 1e-8);
    }

    #[test]
    fn paired_chain_matches_dense_polynomials(b in conditioned_spd(8), rhs in prop::collection::vec(-1.0f64..1.0, 8)) {
        let rn = build_m1(7).unwrap();
        let table = build_zero_table(&rn, 3, UNIT_ROUNDOFF).unwrap();
        for (r, i) in [(1u32, 2usize), (1, 6), (2, 4)] {
            let chain = table.chain(r, i).unwrap();
            let got = apply_rational_chain(&b, &chain, &rhs).unwrap();
            let num = dense_polynomial(&b, &table.product_zeros(r, i).unwrap()) * DVector::from_column_slice(&rhs);
            let want = dense_polynomial(&b, table.get(r, i).unwrap()).lu().solve(&num).unwrap();
            prop_assert!(rel(&got, want.as_slice()) <= 1e-9);
        }
    }

    #[test]
    fn equal_shift_pairs_are_bitwise_no_ops(b in conditioned_spd(5), rhs in prop::collection::vec(-1.0f64..1.0, 5), s in -1.0f64..-0.01) {
        let z = apply_paired_steps(&b, &[(s, s), (s * 2.0, s * 2.0)], &rhs).unwrap();
        prop_assert_eq!(z, rhs);
    }
}

#[test]
fn chain_example_on_m1_window() {
    let b = build_poisson(2).unwrap();
    let rn = build_m1(3).unwrap();
    let table = build_zero_table(&rn, 2, UNIT_ROUNDOFF).unwrap();
    let chain = table.chain(1, 2).unwrap();
    let got = apply_rational_chain(&b, &chain, &[1.0, 1.0]).unwrap();
    let num = dense_polynomial(&b, &table.product_zeros(1, 2).unwrap()) * DVector::from_column_slice(&[1.0, 1.0]);
    let want = dense_polynomial(&b, table.get(1, 2).unwrap()).lu().solve(&num).unwrap();
    assert!(rel(&got, want.as_slice()) < 1e-13);
}

#[test]
fn scaled_inverse_matches_dense_on_m1() {
    // α_4^(1) (B_2^(0))⁻¹ b on M1 of order 7: one factor a_3 against the zero -b_2
    let rn = build_m1(7).unwrap();
    let b = scale_into_conditions(&build_poisson(5).unwrap());
    let rhs = [0.3, -1.0, 0.2, 0.8, -0.4];
    let xi = [-rn.b(2)];
    let got = apply_scaled_inverse_chain(&b, &xi, &[rn.a(3)], &rhs).unwrap();
    let want = solve_shifted(&b, -rn.b(2), &rhs).unwrap();
    let want: Vec<f64> = want.iter().map(|v| v * rn.a(3)).collect();
    assert!(rel(&got, &want) < 1e-10);
}

#[test]
fn reduction_matches_dense_schur_complement() {
    // k = 3: after two levels only x_4 remains; the final p times the
    // normalizing polynomials reproduces the dense Schur complement system.
    let b = scale_into_conditions(&build_poisson(4).unwrap());
    let rn = build_m2(7).unwrap();
    let y = ecr_core::cli::random_rhs(7, 4, 11);
    let sys = SeparableSystem::new(b.clone(), rn, y).unwrap();
    let table = build_zero_table(sys.rn(), 3, UNIT_ROUNDOFF).unwrap();
    let solver = EcrSolver::new(&sys, &table).unwrap();
    let red = solver.reduce().unwrap();
    let x4 = &dense_kron_solve(&sys).unwrap().x[3];
    // B_4^(2) D⁻¹ x_4 = p_4^(2), with D = B_2^(1) B_6^(1); the chain applies
    // (B_4^(2))⁻¹ D, so chain(p) = x_4 up to the sign (-1)^2
    let chain: PairedChain = table.chain(2, 4).unwrap();
    let got = apply_rational_chain(&b, &chain, red.final_p()).unwrap();
    assert!(rel(&got, x4) < 1e-10);
}

#[test]
fn solve_is_schedule_independent() {
    let b = scale_into_conditions(&build_poisson(16).unwrap());
    let rn = scale_into_conditions(&build_m1(15).unwrap());
    let sys = SeparableSystem::new(b, rn, ecr_core::cli::random_rhs(15, 16, 5)).unwrap();
    let one = rayon::ThreadPoolBuilder::new().num_threads(1).build().unwrap();
    let four = rayon::ThreadPoolBuilder::new().num_threads(4).build().unwrap();
    let a = one.install(|| solve(&sys, &SolveOptions::default()).unwrap().0);
    let c = four.install(|| solve(&sys, &SolveOptions::default()).unwrap().0);
    assert_eq!(a, c);
}

#[test]
fn certify_rejects_unconditioned_systems() {
    let b = TridiagonalMatrix::constant(4, -1.0, 2.0, -1.0).unwrap();
    let rn = build_m1(7).unwrap();
    let sys = SeparableSystem::new(b, rn, ecr_core::cli::random_rhs(7, 4, 0)).unwrap();
    let err = solve(
        &sys,
        &SolveOptions {
            certify: true,
            ..SolveOptions::default()
        },
    )
    .unwrap_err();
    assert!(matches!(err, ecr_core::Error::ConditionViolation(_)));
}
