//! Convolution-quadrature weights and Padé data for the half-order time
//! operators `d_t^{1/2}` and `d_t^{-1/2}`.
//!
//! Convolution quadrature replaces `d_t^nu F` at step `j+1` by
//! `rho^nu (F^{j+1} + sum_{k=1}^{j} w_{j+1-k} F^k)`, where the weights are
//! the Taylor coefficients of `(delta(z)/(rho dt))^nu` for the characteristic
//! function `delta` of the underlying one-step or two-step method.
//!
//! The diagonal Padé approximant of `sqrt(z)` is used in partial-fraction form
//! `R(z) = b_0 - sum_k b_k / (z + eta_k^2)`, and `1/sqrt(z)` is approximated by
//! `R(z)/z = d_0/z - sum_k d_k / (z + eta_k^2)`.

use nalgebra::DVector;
use std::f64::consts::PI;

use crate::error::{Error, Result};
use crate::spectral::C64;

/// Time-stepping method underlying a scheme.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum Stepper {
    /// Backward Euler.
    Bdf1,
    /// Second-order backward differentiation.
    Bdf2,
    /// Trapezoidal rule.
    Tr,
}

impl Stepper {
    /// Scale `rho` attached to the method for step size `dt`.
    pub fn rho(self, dt: f64) -> f64 {
        match self {
            Stepper::Bdf1 => 1.0 / dt,
            Stepper::Bdf2 => 1.5 / dt,
            Stepper::Tr => 2.0 / dt,
        }
    }

    /// Lower-case name used in configuration files and output.
    pub fn name(self) -> &'static str {
        match self {
            Stepper::Bdf1 => "bdf1",
            Stepper::Bdf2 => "bdf2",
            Stepper::Tr => "tr",
        }
    }

    /// Parses `bdf1`, `bdf2` or `tr` (case-insensitive).
    pub fn parse(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "bdf1" => Ok(Stepper::Bdf1),
            "bdf2" => Ok(Stepper::Bdf2),
            "tr" => Ok(Stepper::Tr),
            other => Err(Error::Config(format!("unknown stepper '{other}'"))),
        }
    }
}

fn check_nu(nu: f64) -> Result<()> {
    if (nu.abs() - 0.5).abs() > 1e-15 {
        return Err(Error::Config(format!("fractional order must be +-1/2, got {nu}")));
    }
    Ok(())
}

/// Convolution-quadrature weights for one method and one fractional order.
#[derive(Clone, Debug, PartialEq)]
pub struct CqWeights {
    pub scheme: Stepper,
    /// Fractional order, `+1/2` or `-1/2`.
    pub nu: f64,
    /// Method scale `rho`.
    pub rho: f64,
    /// `omega_0 .. omega_{n-1}` with `omega_0 = 1`.
    pub omega: Vec<f64>,
}

/// First `n` weights of the method, computed by their recurrences.
pub fn cq_weights(scheme: Stepper, nu: f64, n: usize, dt: f64) -> Result<CqWeights> {
    check_nu(nu)?;
    if n == 0 {
        return Err(Error::Config("at least one weight is required".into()));
    }
    if !(dt > 0.0) {
        return Err(Error::Config(format!("time step must be positive, got {dt}")));
    }
    let mut w = vec![0.0; n];
    w[0] = 1.0;
    match scheme {
        Stepper::Bdf1 => {
            for k in 1..n {
                let kf = k as f64;
                w[k] = (kf - 1.0 - nu) / kf * w[k - 1];
            }
        }
        Stepper::Bdf2 => {
            if n > 1 {
                w[1] = -4.0 * nu / 3.0;
            }
            for k in 2..n {
                let kf = k as f64;
                w[k] = 4.0 * (kf - 1.0 - nu) / (3.0 * kf) * w[k - 1]
                    - (kf - 2.0 - 2.0 * nu) / (3.0 * kf) * w[k - 2];
            }
        }
        Stepper::Tr => {
            if n > 1 {
                w[1] = -2.0 * nu;
            }
            for k in 1..n - 1 {
                let kf = k as f64;
                w[k + 1] = ((kf - 1.0) * w[k - 1] - 2.0 * nu * w[k]) / (kf + 1.0);
            }
        }
    }
    Ok(CqWeights {
        scheme,
        nu,
        rho: scheme.rho(dt),
        omega: w,
    })
}

/// History part `sum_{k=1}^{j} omega_{j+1-k} F^k` of the quadrature at step
/// `j + 1`, where `trace[k-1] = F^k`.
pub fn cq_history(w: &CqWeights, trace: &[DVector<C64>], j: usize) -> Result<DVector<C64>> {
    if trace.len() < j || j + 1 > w.omega.len() || trace.is_empty() {
        return Err(Error::History {
            step: j,
            needed: j.max(1),
            available: trace.len().min(w.omega.len()),
        });
    }
    let mut acc = DVector::zeros(trace[0].len());
    for k in 1..=j {
        acc.axpy(C64::new(w.omega[j + 1 - k], 0.0), &trace[k - 1], C64::new(1.0, 0.0));
    }
    Ok(acc)
}

/// Full quadrature `rho^nu (F^{j+1} + sum_{k=1}^{j} omega_{j+1-k} F^k)`,
/// where `trace[k-1] = F^k` for `k = 1 .. j+1`.
pub fn cq_apply(w: &CqWeights, trace: &[DVector<C64>], j: usize) -> Result<DVector<C64>> {
    if trace.len() < j + 1 || j + 1 > w.omega.len() {
        return Err(Error::History {
            step: j,
            needed: j + 1,
            available: trace.len(),
        });
    }
    let mut acc = if j == 0 {
        DVector::zeros(trace[0].len())
    } else {
        cq_history(w, trace, j)?
    };
    acc += &trace[j];
    Ok(acc * C64::new(w.rho.powf(w.nu), 0.0))
}

/// Partial-fraction data of the order-`K` diagonal Padé approximant of `sqrt(z)`.
#[derive(Clone, Debug, PartialEq)]
pub struct PadeSqrt {
    pub k: usize,
    pub b0: f64,
    pub b: Vec<f64>,
    pub eta: Vec<f64>,
    pub d0: f64,
    pub d: Vec<f64>,
}

/// Exponent of the approximated power of `z`.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Power {
    /// `z^{1/2}`.
    Half,
    /// `z^{-1/2}`.
    MinusHalf,
}

/// Padé coefficients of order `k`.
pub fn pade_sqrt(k: usize) -> Result<PadeSqrt> {
    if k == 0 {
        return Err(Error::Config("Pade order K must be at least 1".into()));
    }
    let m = (2 * k + 1) as f64;
    let eta: Vec<f64> = (1..=k).map(|i| (i as f64 * PI / m).tan()).collect();
    let b: Vec<f64> = eta
        .iter()
        .map(|&e| 2.0 * e * e * (1.0 + e * e) / m)
        .collect();
    let d: Vec<f64> = b.iter().zip(&eta).map(|(&bk, &e)| -bk / (e * e)).collect();
    let d0 = m + d.iter().sum::<f64>();
    Ok(PadeSqrt {
        k,
        b0: m,
        b,
        eta,
        d0,
        d,
    })
}

/// Evaluates `R^{1/2}(z)` or `R^{-1/2}(z)` in partial-fraction form.
pub fn eval_rational(p: &PadeSqrt, power: Power, z: C64) -> Result<C64> {
    let mut acc = match power {
        Power::Half => C64::new(p.b0, 0.0),
        Power::MinusHalf => {
            if z == C64::new(0.0, 0.0) {
                return Err(Error::Pole { k: 0 });
            }
            p.d0 / z
        }
    };
    for (i, &e) in p.eta.iter().enumerate() {
        let den = z + e * e;
        if den == C64::new(0.0, 0.0) {
            return Err(Error::Pole { k: i + 1 });
        }
        let coef = match power {
            Power::Half => p.b[i],
            Power::MinusHalf => p.d[i],
        };
        acc -= coef / den;
    }
    Ok(acc)
}

/// `alpha_p = sqrt(rho / beta_p) e^{-i pi/4}`.
pub fn alpha(rho: f64, beta: f64) -> C64 {
    C64::from_polar((rho / beta).sqrt(), -PI / 4.0)
}

/// Scheme-dependent constants of the discrete Padé realizations.
///
/// The overlined coefficients follow from the one-step discretization of the
/// auxiliary ODEs with the boundary terms written against `alpha_p^{-1}`:
/// `b_bar = b / sqrt(rho)`, `d_bar = d sqrt(rho)`. With this scaling
/// `varpi_plus = R^{1/2}(rho)/sqrt(rho)` and `varpi_minus = sqrt(rho) R^{-1/2}(rho)`,
/// both of which tend to one wherever the approximant is accurate.
#[derive(Clone, Debug, PartialEq)]
pub struct DiscretePadeCoeffs {
    pub scheme: Stepper,
    pub rho: f64,
    pub alpha1: C64,
    pub alpha2: C64,
    pub eta_bar: Vec<f64>,
    /// Diagonal of `G_K`, `1 / (1 + eta_bar^2)`.
    pub g: Vec<f64>,
    /// Diagonal of `H_K`, `(1 - eta_bar^2) / (1 + eta_bar^2)`.
    pub h: Vec<f64>,
    pub b_bar0: f64,
    pub b_bar: Vec<f64>,
    pub d_bar0: f64,
    pub d_bar: Vec<f64>,
    /// `b_bar_k g_k`.
    pub gamma_plus: Vec<f64>,
    /// `d_bar_k g_k`.
    pub gamma_minus: Vec<f64>,
    /// `b_bar_0 - sum(gamma_plus) / rho`.
    pub varpi_plus: f64,
    /// `d_bar_0 / rho - sum(gamma_minus) / rho`.
    pub varpi_minus: f64,
    pub pade: PadeSqrt,
}

/// Discrete constants for method `scheme`, step `dt`, scales `beta1, beta2`
/// and Padé order `k`.
pub fn discrete_pade(
    scheme: Stepper,
    dt: f64,
    beta1: f64,
    beta2: f64,
    k: usize,
) -> Result<DiscretePadeCoeffs> {
    if !(dt > 0.0) {
        return Err(Error::Config(format!("time step must be positive, got {dt}")));
    }
    let pade = pade_sqrt(k)?;
    let rho = scheme.rho(dt);
    let sr = rho.sqrt();
    let eta_bar: Vec<f64> = pade.eta.iter().map(|e| e / sr).collect();
    let g: Vec<f64> = eta_bar.iter().map(|e| 1.0 / (1.0 + e * e)).collect();
    let h: Vec<f64> = eta_bar
        .iter()
        .map(|e| (1.0 - e * e) / (1.0 + e * e))
        .collect();
    let b_bar: Vec<f64> = pade.b.iter().map(|b| b / sr).collect();
    let d_bar: Vec<f64> = pade.d.iter().map(|d| d * sr).collect();
    let b_bar0 = pade.b0 / sr;
    let d_bar0 = pade.d0 * sr;
    let gamma_plus: Vec<f64> = b_bar.iter().zip(&g).map(|(b, g)| b * g).collect();
    let gamma_minus: Vec<f64> = d_bar.iter().zip(&g).map(|(d, g)| d * g).collect();
    let varpi_plus = b_bar0 - gamma_plus.iter().sum::<f64>() / rho;
    let varpi_minus = d_bar0 / rho - gamma_minus.iter().sum::<f64>() / rho;
    Ok(DiscretePadeCoeffs {
        scheme,
        rho,
        alpha1: alpha(rho, beta1),
        alpha2: alpha(rho, beta2),
        eta_bar,
        g,
        h,
        b_bar0,
        b_bar,
        d_bar0,
        d_bar,
        gamma_plus,
        gamma_minus,
        varpi_plus,
        varpi_minus,
        pade,
    })
}
