use nalgebra::DMatrix;
use proptest::prelude::*;
use rand::rngs::StdRng;
use rand::{Rng, SeedableRng};
use tbc_core::kron::*;
use tbc_core::rational::alpha;
use tbc_core::spectral::{assemble_ops, to_complex, CMat, C64};

fn random_matrix(rng: &mut StdRng, r: usize, c: usize) -> CMat {
    DMatrix::from_fn(r, c, |_, _| C64::new(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0)))
}

fn random_terms(rng: &mut StdRng, n1: usize, n2: usize, count: usize) -> Vec<KronTerm> {
    (0..count)
        .map(|i| {
            // the first term is shifted to keep the operator well conditioned
            let shift = if i == 0 { 4.0 } else { 0.0 };
            let a = random_matrix(rng, n1, n1) + identity(n1) * C64::new(shift, 0.0);
            let b = random_matrix(rng, n2, n2) + identity(n2) * C64::new(shift, 0.0);
            KronTerm::new(C64::new(rng.gen_range(0.5..1.5), rng.gen_range(-0.5..0.5)), a, b)
        })
        .collect()
}

/// `sum_i c_i (B_i^T (x) A_i)` built entry by entry.
fn dense_oracle(terms: &[KronTerm]) -> CMat {
    let (n1, n2) = (terms[0].a.nrows(), terms[0].b.nrows());
    let mut l = CMat::zeros(n1 * n2, n1 * n2);
    for t in terms {
        for q in 0..n2 {
            for s in 0..n2 {
                for p in 0..n1 {
                    for r in 0..n1 {
                        l[(q * n1 + p, s * n1 + r)] += t.coef * t.b[(s, q)] * t.a[(p, r)];
                    }
                }
            }
        }
    }
    l
}

fn vec_of(x: &CMat) -> nalgebra::DVector<C64> {
    nalgebra::DVector::from_column_slice(x.as_slice())
}

fn rel(a: &CMat, b: &CMat) -> f64 {
    (a - b).norm() / b.norm()
}

#[test]
fn identity_operator_returns_the_right_hand_side() {
    let mut rng = StdRng::seed_from_u64(1);
    let f = random_matrix(&mut rng, 5, 4);
    let op = assemble(vec![KronTerm::new(C64::new(1.0, 0.0), identity(5), identity(4))]).unwrap();
    let x = solve(&factor(&op).unwrap(), &f).unwrap();
    assert!(rel(&x, &f) < 1e-15);
}

#[test]
fn diagonal_sylvester_divides_entrywise() {
    let a = to_complex(&DMatrix::from_diagonal(&nalgebra::dvector![2.0, 3.0]));
    let d = to_complex(&DMatrix::from_diagonal(&nalgebra::dvector![1.0, 4.0]));
    let one = C64::new(1.0, 0.0);
    let op = assemble(vec![KronTerm::new(one, a.clone(), identity(2)), KronTerm::new(one, identity(2), d.transpose())]).unwrap();
    let f = CMat::from_row_slice(2, 2, &[C64::new(1.0, 1.0), C64::new(2.0, 0.0), C64::new(-3.0, 0.5), C64::new(0.0, 7.0)]);
    let x = solve(&factor(&op).unwrap(), &f).unwrap();
    for p in 0..2 {
        for q in 0..2 {
            let expect = f[(p, q)] / (a[(p, p)] + d[(q, q)]);
            assert!((x[(p, q)] - expect).norm() < 1e-15);
        }
    }
}

#[test]
fn random_problem_matches_dense_kronecker_solve() {
    let mut rng = StdRng::seed_from_u64(7);
    let terms = random_terms(&mut rng, 6, 5, 4);
    let f = random_matrix(&mut rng, 6, 5);
    let oracle = dense_oracle(&terms).lu().solve(&vec_of(&f)).unwrap();
    let op = assemble(terms).unwrap();
    let x = solve(&factor(&op).unwrap(), &f).unwrap();
    let err = (vec_of(&x) - &oracle).norm() / oracle.norm();
    assert!(err <= 1e-11, "{err:e}");
    assert!(rel(&op.solve_dense(&f).unwrap(), &x) <= 1e-11);
}

#[test]
fn assembled_matrix_matches_the_oracle() {
    let mut rng = StdRng::seed_from_u64(11);
    let terms = random_terms(&mut rng, 4, 3, 3);
    let oracle = dense_oracle(&terms);
    let op = assemble(terms).unwrap();
    assert!(rel(&op.dense(), &oracle) < 1e-13);
    for ((r, c), v) in op.entries() {
        assert!((oracle[(r, c)] - v).norm() < 1e-13);
    }
}

#[test]
fn lobatto_operator_solves_to_small_residual() {
    let ops = assemble_ops(24).unwrap();
    let (m, s, l) = (to_complex(&ops.mass), to_complex(&ops.stiff), to_complex(&ops.lambda));
    let c = |re: f64, im: f64| C64::new(re, im);
    let terms = vec![
        KronTerm::new(c(0.0, 1.0), m.clone(), m.clone()),
        KronTerm::new(c(0.05, 0.0), s.clone(), m.clone()),
        KronTerm::new(c(0.05, 0.0), m.clone(), s.clone()),
        KronTerm::new(c(0.3, -0.3), l.clone(), m.clone()),
        KronTerm::new(c(0.3, -0.3), m.clone(), l.clone()),
        KronTerm::new(c(0.1, 0.2), l.clone(), s.clone()),
        KronTerm::new(c(0.1, 0.2), s.clone(), l.clone()),
        KronTerm::new(c(0.0, 0.4), l.clone(), l),
    ];
    let op = assemble(terms).unwrap();
    let fac = factor(&op).unwrap();
    assert_eq!(fac.bandwidth(), 2 * 25 + 2);
    let mut rng = StdRng::seed_from_u64(3);
    let f = random_matrix(&mut rng, 25, 25);
    let x = fac.solve(&f).unwrap();
    let residual = rel(&op.apply(&x).unwrap(), &f);
    assert!(residual <= 1e-10, "{residual:e}");
    let x0 = random_matrix(&mut rng, 25, 25);
    assert!(rel(&fac.solve(&op.apply(&x0).unwrap()).unwrap(), &x0) <= 1e-10);
}

#[test]
fn factorization_is_counted_once_for_many_solves() {
    let mut rng = StdRng::seed_from_u64(5);
    let op = assemble(random_terms(&mut rng, 5, 5, 2)).unwrap();
    let fac = op.factor().unwrap();
    for _ in 0..100 {
        fac.solve(&random_matrix(&mut rng, 5, 5)).unwrap();
    }
    assert_eq!(op.factor_count(), 1);
    assert_eq!(fac.solve_count(), 100);
}

#[test]
fn mismatched_and_singular_inputs_are_errors() {
    let one = C64::new(1.0, 0.0);
    let bad = vec![KronTerm::new(one, identity(3), identity(2)), KronTerm::new(one, identity(4), identity(2))];
    assert!(matches!(assemble(bad), Err(tbc_core::Error::Dimension(_))));
    assert!(matches!(assemble(Vec::new()), Err(tbc_core::Error::Dimension(_))));
    let op = assemble(vec![KronTerm::new(one, identity(3), identity(2))]).unwrap();
    assert!(op.apply(&CMat::zeros(2, 2)).is_err());
    let singular = assemble(vec![KronTerm::new(one, CMat::zeros(3, 3), identity(2))]).unwrap();
    assert!(matches!(factor(&singular), Err(tbc_core::Error::Singular { .. })));
    assert!(solve_1d_left(&CMat::zeros(2, 2), &identity(2)).is_err());
    assert!(solve_1d_left(&identity(3), &identity(2)).is_err());
}

#[test]
fn one_dimensional_identity_solve() {
    let mut rng = StdRng::seed_from_u64(9);
    let f = random_matrix(&mut rng, 4, 3);
    assert!(rel(&solve_1d_left(&identity(4), &f).unwrap(), &f) < 1e-15);
}

#[test]
fn one_dimensional_step_matrix_residual() {
    let ops = assemble_ops(4).unwrap();
    let a2 = alpha(1.0 / 0.1, 1.0).powi(2);
    let a = to_complex(&ops.mass) + to_complex(&ops.stiff) / a2;
    let mut rng = StdRng::seed_from_u64(2);
    let f = random_matrix(&mut rng, 5, 3);
    let x = solve_1d_left(&a, &f).unwrap();
    assert!(rel(&(&a * &x), &f) <= 1e-12);
}

#[test]
fn right_solve_is_transposed_left_solve() {
    let mut rng = StdRng::seed_from_u64(4);
    let b = random_matrix(&mut rng, 4, 4) + identity(4) * C64::new(3.0, 0.0);
    let f = random_matrix(&mut rng, 6, 4);
    let right = solve_1d_right(&b, &f).unwrap();
    let left = solve_1d_left(&b.transpose(), &f.transpose()).unwrap().transpose();
    assert!(rel(&right, &left) < 1e-14);
    assert!(rel(&(&right * &b), &f) < 1e-13);
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(10))]

    #[test]
    fn action_matches_vectorized_kronecker(seed in any::<u64>(), n1 in 1usize..=8, n2 in 1usize..=8, count in 1usize..=4) {
        let mut rng = StdRng::seed_from_u64(seed);
        let terms = random_terms(&mut rng, n1, n2, count);
        let x = random_matrix(&mut rng, n1, n2);
        let oracle = dense_oracle(&terms) * vec_of(&x);
        let op = assemble(terms).unwrap();
        let y = op.apply(&x).unwrap();
        prop_assert!((vec_of(&y) - &oracle).norm() <= 1e-12 * oracle.norm().max(1.0));
    }
}
