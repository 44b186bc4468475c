use nalgebra::DVector;
use rand::rngs::StdRng;
use rand::{Rng, SeedableRng};
use tbc_core::hf::*;
use tbc_core::kron::assemble;
use tbc_core::rational::{alpha, Stepper};
use tbc_core::spectral::{boundary_rows, CMat, ComplexOperators, Discretization, DomainMap, C64};
use tbc_core::Evolution;

const STEPPERS: [Stepper; 3] = [Stepper::Bdf1, Stepper::Bdf2, Stepper::Tr];

fn cfg(family: HfFamily, stepper: Stepper, k: usize, dt: f64) -> HfConfig {
    HfConfig { family, stepper, k, dt }
}

fn all_variants(dt: f64) -> Vec<HfConfig> {
    STEPPERS
        .iter()
        .flat_map(|&s| [cfg(HfFamily::Cq, s, 0, dt), cfg(HfFamily::Cp, s, 8, dt)])
        .collect()
}

fn disc(n: usize, h: f64) -> Discretization {
    Discretization::new(DomainMap::square(h).unwrap(), n, n).unwrap()
}

/// Gaussian of width `w` centred at the origin.
fn gaussian(d: &Discretization, w: f64) -> CMat {
    d.interpolate(&d.sample(|x, y| C64::new((-(x * x + y * y) / w).exp(), 0.0))).unwrap()
}

fn vec_of(x: &CMat) -> DVector<C64> {
    DVector::from_column_slice(x.as_slice())
}

fn rel(a: &CMat, b: &CMat) -> f64 {
    (a - b).norm() / b.norm()
}

/// Dense matrix of the eight-term operator written out from its definition.
fn dense_lhs(d: &Discretization, stepper: Stepper, dt: f64, w_plus: f64, w_minus: f64) -> nalgebra::DMatrix<C64> {
    let ops = ComplexOperators::new(d);
    let rho = stepper.rho(dt);
    let (ia1, ia2) = (alpha(rho, d.dom.beta1).inv(), alpha(rho, d.dom.beta2).inv());
    let k = |b: &CMat, a: &CMat| b.transpose().kronecker(a);
    k(&ops.m2, &ops.m1)
        + k(&ops.m2, &ops.s1) * (ia1 * ia1)
        + k(&ops.s2, &ops.m1) * (ia2 * ia2)
        + (k(&ops.m2, &ops.l1) * ia1 + k(&ops.l2, &ops.m1) * ia2) * C64::new(w_plus, 0.0)
        + (k(&ops.s2, &ops.l1) * (ia1 * ia2 * ia2) + k(&ops.l2, &ops.s1) * (ia1 * ia1 * ia2)) * C64::new(0.5 * w_minus, 0.0)
        + k(&ops.l2, &ops.l1) * (0.75 * ia1 * ia2)
}

#[test]
fn zero_field_stays_zero_in_every_variant() {
    let d = disc(8, 4.0);
    for c in all_variants(1e-2) {
        let mut s = HfSolver::new(c, &d, CMat::zeros(9, 9)).unwrap();
        for _ in 0..5 {
            s.step().unwrap();
            assert_eq!(s.field().norm(), 0.0, "{c:?}");
        }
        if let Some((a1, a2)) = s.auxiliary() {
            assert!(a1.iter().chain(a2).all(|m| m.norm() == 0.0));
        }
    }
}

#[test]
fn first_step_matches_dense_oracle() {
    let d = disc(8, 3.0);
    let u0 = gaussian(&d, 1.0);
    let ops = ComplexOperators::new(&d);
    let m_u0 = vec_of(&(&ops.m1 * &u0 * &ops.m2));
    let dt = 1e-2;
    for config in [cfg(HfFamily::Cq, Stepper::Bdf1, 0, dt), cfg(HfFamily::Cp, Stepper::Bdf1, 6, dt), cfg(HfFamily::Cq, Stepper::Tr, 0, dt)] {
        let mut s = HfSolver::new(config, &d, u0.clone()).unwrap();
        let (wp, wm) = s.pade().map_or((1.0, 1.0), |p| (p.varpi_plus, p.varpi_minus));
        let x = dense_lhs(&d, config.stepper, dt, wp, wm).lu().solve(&m_u0).unwrap();
        let expect = match config.stepper {
            Stepper::Tr => x * C64::new(2.0, 0.0) - vec_of(&u0),
            _ => x,
        };
        s.step().unwrap();
        let err = (vec_of(s.field()) - &expect).norm() / expect.norm();
        assert!(err <= 1e-11, "{config:?}: {err:e}");
    }
}

#[test]
fn operator_action_is_the_sum_of_eight_terms() {
    let d = disc(6, 2.0);
    let ops = ComplexOperators::new(&d);
    let mut rng = StdRng::seed_from_u64(8);
    let mut r = || C64::new(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0));
    let c = HfLhsCoeffs { inv_alpha1: r(), inv_alpha2: r(), w_plus: 0.7, w_minus: 1.3 };
    let x = CMat::from_fn(7, 7, |_, _| r());
    let (a1, a2) = (c.inv_alpha1, c.inv_alpha2);
    let expect = &ops.m1 * &x * &ops.m2
        + &ops.s1 * &x * &ops.m2 * (a1 * a1)
        + &ops.m1 * &x * &ops.s2 * (a2 * a2)
        + (&ops.l1 * &x * &ops.m2 * a1 + &ops.m1 * &x * &ops.l2 * a2) * C64::new(0.7, 0.0)
        + (&ops.l1 * &x * &ops.s2 * (a1 * a2 * a2) + &ops.s1 * &x * &ops.l2 * (a1 * a1 * a2)) * C64::new(0.65, 0.0)
        + &ops.l1 * &x * &ops.l2 * (0.75 * a1 * a2);
    let op = assemble(hf_lhs_terms(&ops, &c)).unwrap();
    assert!(rel(&op.apply(&x).unwrap(), &expect) < 1e-14);
}

#[test]
fn corner_coefficient_is_three_quarters_over_alpha_product() {
    let d = Discretization::new(DomainMap::new(-3.0, 3.0, -5.0, 5.0).unwrap(), 6, 7).unwrap();
    let ops = ComplexOperators::new(&d);
    let dt = 2e-3;
    for c in all_variants(dt) {
        let s = HfSolver::new(c, &d, CMat::zeros(7, 8)).unwrap();
        let rho = c.stepper.rho(dt);
        let expect = C64::new(0.75, 0.0) / (alpha(rho, d.dom.beta1) * alpha(rho, d.dom.beta2));
        let term = s.operator().terms().iter().find(|t| t.a == ops.l1 && t.b == ops.l2).unwrap();
        assert!((term.coef - expect).norm() < 1e-15 * expect.norm(), "{c:?}");
    }
}

#[test]
fn quadrature_and_pade_weights_differ_by_pade_error() {
    let d = disc(8, 3.0);
    // inside the accuracy range of the approximant the weights are close to one
    for (stepper, dt) in [(Stepper::Bdf1, 0.1), (Stepper::Tr, 0.1)] {
        let cq = HfSolver::new(cfg(HfFamily::Cq, stepper, 0, dt), &d, CMat::zeros(9, 9)).unwrap();
        let cp = HfSolver::new(cfg(HfFamily::Cp, stepper, 30, dt), &d, CMat::zeros(9, 9)).unwrap();
        let p = cp.pade().unwrap();
        assert!((p.varpi_plus - 1.0).abs() < 1e-10 && (p.varpi_minus - 1.0).abs() < 1e-10);
        let cq_w = cq.operator().terms()[3].coef / cq.operator().terms()[0].coef;
        let cp_w = cp.operator().terms()[3].coef;
        assert!((cq_w * p.varpi_plus - cp_w).norm() < 1e-14);
    }
}

#[test]
fn pade_realization_approaches_quadrature_with_order() {
    let d = disc(32, 3.0);
    let u0 = gaussian(&d, 1.0);
    let run = |c: HfConfig| {
        let mut s = HfSolver::new(c, &d, u0.clone()).unwrap();
        for _ in 0..10 {
            s.step().unwrap();
        }
        s.field().clone()
    };
    let reference = run(cfg(HfFamily::Cq, Stepper::Bdf1, 0, 1e-2));
    let diffs: Vec<f64> = [5, 10, 30]
        .iter()
        .map(|&k| rel(&run(cfg(HfFamily::Cp, Stepper::Bdf1, k, 1e-2)), &reference))
        .collect();
    assert!(diffs[0] > diffs[1] && diffs[1] > diffs[2], "{diffs:?}");
    assert!(diffs[2] < 1e-6, "{diffs:?}");
}

#[test]
fn second_order_start_is_first_order_step() {
    let d = disc(10, 3.0);
    let u0 = gaussian(&d, 1.0);
    for family in [HfFamily::Cq, HfFamily::Cp] {
        let mut a = HfSolver::new(cfg(family, Stepper::Bdf2, 6, 1e-2), &d, u0.clone()).unwrap();
        let mut b = HfSolver::new(cfg(family, Stepper::Bdf1, 6, 1e-2), &d, u0.clone()).unwrap();
        assert_eq!(a.next_stepper(), Stepper::Bdf1);
        a.step().unwrap();
        b.step().unwrap();
        assert_eq!(a.next_stepper(), Stepper::Bdf2);
        assert!(rel(a.field(), b.field()) < 1e-15, "{family:?}");
    }
}

#[test]
fn trapezoidal_step_reconstructs_from_midpoint() {
    let d = disc(8, 3.0);
    let u0 = gaussian(&d, 1.0);
    let ops = ComplexOperators::new(&d);
    let mut s = HfSolver::new(cfg(HfFamily::Cq, Stepper::Tr, 0, 1e-2), &d, u0.clone()).unwrap();
    s.step().unwrap();
    let v = (s.field() + &u0) * C64::new(0.5, 0.0);
    let lhs = s.operator().apply(&v).unwrap();
    assert!(rel(&lhs, &(&ops.m1 * &u0 * &ops.m2)) < 1e-12);
}

#[test]
fn auxiliary_fields_after_one_impulse() {
    let d = disc(8, 3.0);
    let u0 = gaussian(&d, 1.0);
    let mut s = HfSolver::new(cfg(HfFamily::Cp, Stepper::Bdf1, 5, 1e-2), &d, u0).unwrap();
    s.step().unwrap();
    let v = boundary_rows(s.field());
    let p = s.pade().unwrap().clone();
    let (a1, _) = s.auxiliary().unwrap();
    assert!(rel(&a1[0], &(&v / C64::new(p.rho, 0.0))) < 1e-14);
    for k in 1..=5 {
        let expect = &v / C64::new(p.rho * (1.0 + p.eta_bar[k - 1].powi(2)), 0.0);
        assert!(rel(&a1[k], &expect) < 1e-14, "k={k}");
    }
}

#[test]
fn factorization_happens_once_per_stepper() {
    let d = disc(8, 3.0);
    for c in all_variants(1e-2) {
        let mut s = HfSolver::new(c, &d, gaussian(&d, 1.0)).unwrap();
        for _ in 0..100 {
            s.step().unwrap();
        }
        let levels = if c.stepper == Stepper::Bdf2 { 2 } else { 1 };
        assert_eq!(s.factor_count(), levels, "{c:?}");
        assert_eq!(s.solve_count(), 100);
    }
}

#[test]
fn memory_growth_depends_on_the_family() {
    let d = disc(8, 3.0);
    let mut cq = HfSolver::new(cfg(HfFamily::Cq, Stepper::Bdf1, 0, 1e-2), &d, CMat::zeros(9, 9)).unwrap();
    let mut cp = HfSolver::new(cfg(HfFamily::Cp, Stepper::Bdf1, 4, 1e-2), &d, CMat::zeros(9, 9)).unwrap();
    let cp0 = cp.state_size();
    for j in 1..=6 {
        cq.step().unwrap();
        cp.step().unwrap();
        assert_eq!(cq.state_size(), j * 4 * 9);
        assert_eq!(cp.state_size(), cp0);
    }
}

#[test]
fn interior_packet_keeps_its_norm_for_short_times() {
    let d = disc(40, 8.0);
    let ops = ComplexOperators::new(&d);
    let mass_norm = |u: &CMat| (u.adjoint() * &ops.m1 * u * &ops.m2).trace().re.sqrt();
    let u0 = gaussian(&d, 2.0);
    let n0 = mass_norm(&u0);
    for c in all_variants(1e-3) {
        let mut s = HfSolver::new(c, &d, u0.clone()).unwrap();
        assert!(s.warnings().is_empty());
        for _ in 0..10 {
            s.step().unwrap();
        }
        let change = (mass_norm(s.field()) - n0).abs() / n0;
        let tol = if c.stepper == Stepper::Tr { 1e-12 } else { 1e-3 };
        assert!(change < tol, "{c:?}: {change:e}");
    }
}

#[test]
fn boundary_trace_triggers_a_warning() {
    let d = disc(8, 1.0);
    let s = HfSolver::new(cfg(HfFamily::Cq, Stepper::Tr, 0, 1e-2), &d, gaussian(&d, 1.0)).unwrap();
    assert_eq!(s.warnings().len(), 1);
}

#[test]
fn invalid_configurations_are_rejected() {
    let d = disc(4, 1.0);
    let z = CMat::zeros(5, 5);
    assert!(HfSolver::new(cfg(HfFamily::Cq, Stepper::Bdf1, 0, 0.0), &d, z.clone()).is_err());
    assert!(HfSolver::new(cfg(HfFamily::Cp, Stepper::Bdf1, 0, 1e-2), &d, z).is_err());
    assert!(matches!(
        HfSolver::new(cfg(HfFamily::Cq, Stepper::Bdf1, 0, 1e-2), &d, CMat::zeros(4, 5)),
        Err(tbc_core::Error::Dimension(_))
    ));
}
