use std::f64::consts::PI;

use nalgebra::DVector;
use proptest::prelude::*;
use tbc_core::rational::*;
use tbc_core::spectral::C64;

const SCHEMES: [Stepper; 3] = [Stepper::Bdf1, Stepper::Bdf2, Stepper::Tr];

/// Normalized generating function `(delta(zeta) / delta(0))^nu`.
fn generating(scheme: Stepper, nu: f64, z: C64) -> C64 {
    let one = C64::new(1.0, 0.0);
    let base = match scheme {
        Stepper::Bdf1 => one - z,
        Stepper::Bdf2 => (one - z) * (one - z / 3.0),
        Stepper::Tr => (one - z) / (one + z),
    };
    base.powf(nu)
}

/// First `n` Taylor coefficients by the trapezoidal rule on the circle
/// `|zeta| = r` (Cauchy integral formula).
fn taylor_oracle(scheme: Stepper, nu: f64, n: usize) -> Vec<f64> {
    let (m, r) = (4096usize, 0.9f64);
    let samples: Vec<C64> = (0..m)
        .map(|q| generating(scheme, nu, C64::from_polar(r, 2.0 * PI * q as f64 / m as f64)))
        .collect();
    (0..n)
        .map(|k| {
            let s: C64 = samples
                .iter()
                .enumerate()
                .map(|(q, f)| f * C64::from_polar(1.0, -2.0 * PI * (k * q) as f64 / m as f64))
                .sum();
            s.re / m as f64 / r.powi(k as i32)
        })
        .collect()
}

fn weights(scheme: Stepper, nu: f64, n: usize) -> Vec<f64> {
    cq_weights(scheme, nu, n, 1e-2).unwrap().omega
}

fn assert_prefix(w: &[f64], expect: &[f64]) {
    for (a, b) in w.iter().zip(expect) {
        assert!((a - b).abs() < 1e-15, "{w:?} vs {expect:?}");
    }
}

#[test]
fn listed_weight_prefixes() {
    assert_prefix(&weights(Stepper::Bdf1, 0.5, 4), &[1.0, -0.5, -0.125, -0.0625]);
    assert_prefix(&weights(Stepper::Bdf1, -0.5, 4), &[1.0, 0.5, 0.375, 0.3125]);
    assert_prefix(&weights(Stepper::Tr, -0.5, 5), &[1.0, 1.0, 0.5, 0.5, 0.375]);
    assert_prefix(&weights(Stepper::Bdf2, 0.5, 3), &[1.0, -2.0 / 3.0, -1.0 / 18.0]);
}

#[test]
fn trapezoidal_weights_follow_double_factorial_pattern() {
    // omega_{2n} = omega_{2n+1} = C_n for nu = -1/2 and the signs alternate for nu = 1/2
    let minus = weights(Stepper::Tr, -0.5, 40);
    let plus = weights(Stepper::Tr, 0.5, 40);
    let mut c = 1.0;
    for n in 0..20 {
        if n > 0 {
            c *= (2 * n - 1) as f64 / (2 * n) as f64;
        }
        assert!((minus[2 * n] - c).abs() < 1e-15 && (minus[2 * n + 1] - c).abs() < 1e-15);
    }
    for k in 0..40 {
        let sign = if k % 2 == 0 { 1.0 } else { -1.0 };
        assert!((plus[k] - sign * minus[k]).abs() < 1e-15, "k={k}");
    }
}

#[test]
fn method_scales() {
    for (s, r) in [(Stepper::Bdf1, 10.0), (Stepper::Bdf2, 15.0), (Stepper::Tr, 20.0)] {
        let w = cq_weights(s, 0.5, 3, 0.1).unwrap();
        assert!((w.rho - r).abs() < 1e-12);
        assert_eq!(w.omega[0], 1.0);
    }
    assert!(cq_weights(Stepper::Bdf1, 0.25, 3, 0.1).is_err());
    assert!(cq_weights(Stepper::Bdf1, 0.5, 0, 0.1).is_err());
}

#[test]
fn weights_match_generating_function_oracle() {
    for scheme in SCHEMES {
        for nu in [0.5, -0.5] {
            let w = weights(scheme, nu, 64);
            let o = taylor_oracle(scheme, nu, 64);
            let err = w.iter().zip(&o).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
            assert!(err <= 1e-12, "{scheme:?} nu={nu}: {err:e}");
        }
    }
}

fn scalar_trace(f: impl Fn(f64) -> f64, dt: f64, n: usize) -> Vec<DVector<C64>> {
    (1..=n).map(|k| DVector::from_element(1, C64::new(f(k as f64 * dt), 0.0))).collect()
}

#[test]
fn quadrature_applies_to_impulses_and_empty_history() {
    let w = cq_weights(Stepper::Bdf2, 0.5, 8, 0.25).unwrap();
    let v = DVector::from_vec(vec![C64::new(1.0, 2.0), C64::new(-0.5, 0.0)]);
    let first = cq_apply(&w, std::slice::from_ref(&v), 0).unwrap();
    assert!((first - &v * C64::new(w.rho.sqrt(), 0.0)).camax() < 1e-15);
    let mut trace = vec![v.clone()];
    trace.extend((0..5).map(|_| DVector::zeros(2)));
    for j in 1..=5 {
        let h = cq_history(&w, &trace, j).unwrap();
        assert!((h - &v * C64::new(w.omega[j], 0.0)).camax() < 1e-15);
    }
    assert!(cq_apply(&w, &trace[..2], 4).is_err());
}

fn half_derivative_at(scheme: Stepper, p: i32, dt: f64, n: usize, j: usize) -> f64 {
    let w = cq_weights(scheme, 0.5, n, dt).unwrap();
    cq_apply(&w, &scalar_trace(|t| t.powi(p), dt, n), j).unwrap()[0].re
}

#[test]
fn half_derivative_of_linear_function() {
    let exact = 2.0 / PI.sqrt();
    let d = half_derivative_at(Stepper::Bdf2, 1, 1e-3, 1000, 999);
    assert!((d - exact).abs() < 1e-5, "{d}");
}

#[test]
fn trapezoidal_error_on_linear_function_alternates_with_parity() {
    // the generating function is singular at zeta = -1, so a nonzero slope at t = 0
    // leaves an O(dt) term whose sign flips from one step to the next
    let dt = 1.0 / 1024.0;
    let at = |j: usize| {
        let t = (j + 1) as f64 * dt;
        half_derivative_at(Stepper::Tr, 1, dt, 1024, j) - 2.0 * (t / PI).sqrt()
    };
    let (e0, e1) = (at(1023), at(1022));
    assert!(e0 * e1 < 0.0);
    assert!((e0.abs() / e1.abs() - 1.0).abs() < 1e-2);
    assert!(e0.abs() > 10.0 * dt * dt && e0.abs() < dt);
}

fn gamma_ratio(p: u32) -> f64 {
    // Gamma(p+1) / Gamma(p+1/2) for p = 1, 2
    match p {
        1 => 2.0 / PI.sqrt(),
        2 => 8.0 / (3.0 * PI.sqrt()),
        _ => unreachable!(),
    }
}

fn half_derivative_slope(scheme: Stepper, p: u32) -> f64 {
    let (xs, ys): (Vec<f64>, Vec<f64>) = (6..=12)
        .map(|m| {
            let n = 1usize << m;
            let dt = 1.0 / n as f64;
            let w = cq_weights(scheme, 0.5, n, dt).unwrap();
            let d = cq_apply(&w, &scalar_trace(|t| t.powi(p as i32), dt, n), n - 1).unwrap();
            (dt.ln(), (d[0].re - gamma_ratio(p)).abs().ln())
        })
        .unzip();
    let mx = xs.iter().sum::<f64>() / xs.len() as f64;
    let my = ys.iter().sum::<f64>() / ys.len() as f64;
    let sxy: f64 = xs.iter().zip(&ys).map(|(x, y)| (x - mx) * (y - my)).sum();
    let sxx: f64 = xs.iter().map(|x| (x - mx).powi(2)).sum();
    sxy / sxx
}

#[test]
fn half_derivative_convergence_orders() {
    let cases = [
        (Stepper::Bdf1, 1, 1.0),
        (Stepper::Bdf2, 1, 2.0),
        (Stepper::Tr, 1, 1.0),
        (Stepper::Bdf1, 2, 1.0),
        (Stepper::Bdf2, 2, 2.0),
        (Stepper::Tr, 2, 2.0),
    ];
    for (scheme, p, order) in cases {
        let s = half_derivative_slope(scheme, p);
        assert!((s - order).abs() <= 0.25, "{scheme:?} t^{p}: slope {s}");
    }
}

#[test]
fn pade_low_orders() {
    let p1 = pade_sqrt(1).unwrap();
    assert_eq!(p1.b0, 3.0);
    assert!((p1.eta[0] - 3f64.sqrt()).abs() < 1e-15);
    assert!((p1.b[0] - 8.0).abs() < 1e-13);
    assert!((p1.d0 - 1.0 / 3.0).abs() < 1e-14);
    assert!((p1.d[0] + 8.0 / 3.0).abs() < 1e-14);
    let one = C64::new(1.0, 0.0);
    assert!((eval_rational(&p1, Power::MinusHalf, one).unwrap() - one).norm() < 1e-14);
    let p2 = pade_sqrt(2).unwrap();
    assert_eq!(p2.b0, 5.0);
    assert!((p2.eta[0] - (PI / 5.0).tan()).abs() < 1e-15);
    assert!((p2.eta[1] - (2.0 * PI / 5.0).tan()).abs() < 1e-15);
    assert!((eval_rational(&p2, Power::Half, one).unwrap() - one).norm() < 1e-12);
    assert!(pade_sqrt(0).is_err());
}

#[test]
fn pade_fixes_one_for_all_orders() {
    let one = C64::new(1.0, 0.0);
    for k in 1..=30 {
        let p = pade_sqrt(k).unwrap();
        assert!((eval_rational(&p, Power::Half, one).unwrap() - one).norm() < 1e-12, "K={k}");
        assert!((eval_rational(&p, Power::MinusHalf, one).unwrap() - one).norm() < 1e-12, "K={k}");
        assert!(p.eta.windows(2).all(|w| w[0] < w[1]) && p.eta[0] > 0.0);
    }
}

#[test]
fn pade_accuracy_improves_with_order() {
    let p30 = pade_sqrt(30).unwrap();
    let four = eval_rational(&p30, Power::Half, C64::new(4.0, 0.0)).unwrap();
    assert!((four - C64::new(2.0, 0.0)).norm() < 1e-8);
    let nine = C64::new(9.0, 0.0);
    let e5 = (eval_rational(&pade_sqrt(5).unwrap(), Power::Half, nine).unwrap() - 3.0).norm();
    let e30 = (eval_rational(&p30, Power::Half, nine).unwrap() - 3.0).norm();
    assert!(e5 > e30);
}

#[test]
fn pade_poles_are_reported() {
    let p = pade_sqrt(3).unwrap();
    let z = C64::new(-p.eta[1] * p.eta[1], 0.0);
    assert!(matches!(eval_rational(&p, Power::Half, z), Err(tbc_core::Error::Pole { k: 2 })));
    assert!(matches!(
        eval_rational(&p, Power::MinusHalf, C64::new(0.0, 0.0)),
        Err(tbc_core::Error::Pole { k: 0 })
    ));
}

#[test]
fn discrete_constants_for_unit_step() {
    let c = discrete_pade(Stepper::Bdf1, 1.0, 1.0, 1.0, 1).unwrap();
    assert!((c.eta_bar[0] - 3f64.sqrt()).abs() < 1e-15);
    assert!((c.g[0] - 0.25).abs() < 1e-15);
    assert!((c.gamma_plus[0] - 2.0).abs() < 1e-13);
    assert!((c.varpi_plus - 1.0).abs() < 1e-13);
    let t = discrete_pade(Stepper::Tr, 1.0, 1.0, 1.0, 1).unwrap();
    assert!((t.rho - 2.0).abs() < 1e-15);
    assert!((t.h[0] + 0.2).abs() < 1e-15);
}

#[test]
fn discrete_weights_reproduce_the_approximant() {
    // varpi_+ = R^{1/2}(rho) / sqrt(rho) and varpi_- = sqrt(rho) R^{-1/2}(rho)
    for scheme in SCHEMES {
        for dt in [1.0, 1e-2, 1e-4] {
            let c = discrete_pade(scheme, dt, 0.01, 0.04, 7).unwrap();
            let z = C64::new(c.rho, 0.0);
            let rp = eval_rational(&c.pade, Power::Half, z).unwrap().re / c.rho.sqrt();
            let rm = eval_rational(&c.pade, Power::MinusHalf, z).unwrap().re * c.rho.sqrt();
            assert!((c.varpi_plus - rp).abs() < 1e-12 * rp.abs().max(1.0));
            assert!((c.varpi_minus - rm).abs() < 1e-12 * rm.abs().max(1.0));
        }
    }
}

#[test]
fn alpha_has_fixed_argument() {
    for (rho, beta) in [(1.0, 1.0), (2000.0, 0.01), (1.5, 4.0)] {
        let a = alpha(rho, beta);
        assert!((a.arg() + PI / 4.0).abs() < 1e-15);
        assert!((a.norm_sqr() - rho / beta).abs() < 1e-12 * rho / beta);
    }
}

proptest! {
    #[test]
    fn inverse_square_root_is_square_root_over_z(k in 1usize..=30, re in 1e-3f64..50.0, im in -50.0f64..50.0) {
        let p = pade_sqrt(k).unwrap();
        let z = C64::new(re, im);
        let lhs = eval_rational(&p, Power::MinusHalf, z).unwrap();
        let rhs = eval_rational(&p, Power::Half, z).unwrap() / z;
        prop_assert!((lhs - rhs).norm() <= 1e-12 * rhs.norm().max(1.0));
    }

    #[test]
    fn scheme_constants_are_bounded(k in 1usize..=30, dt in 1e-5f64..1.0, s in 0usize..3) {
        let c = discrete_pade(SCHEMES[s], dt, 0.01, 0.01, k).unwrap();
        prop_assert!(c.g.iter().chain(&c.h).all(|&v| v > -1.0 && v <= 1.0));
        prop_assert!(c.eta_bar.windows(2).all(|w| w[0] < w[1]));
    }

    #[test]
    fn recurrences_match_oracle_prefixes(s in 0usize..3, positive in any::<bool>(), n in 1usize..=64) {
        let nu = if positive { 0.5 } else { -0.5 };
        let w = weights(SCHEMES[s], nu, n);
        let o = taylor_oracle(SCHEMES[s], nu, n);
        prop_assert_eq!(w.len(), n);
        for (a, b) in w.iter().zip(&o) {
            prop_assert!((a - b).abs() <= 1e-12);
        }
    }
}
