//! Closed-form solutions of `i u_t + Δu = 0` on the plane.
//!
//! Two families of moving wave packets are available: sums of chirped
//! Gaussians and sums of dispersing Hermite-Gaussian modes. A single packet is
//! a product of one-dimensional solutions translated with velocity `c` and
//! multiplied by the Galilean carrier `exp(i c.x/2 - i |c|^2 t/4)`.

use std::f64::consts::PI;

use crate::error::{Error, Result};
use crate::spectral::{lgl_grid, DomainMap, C64};

/// Family of a tabulated profile.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Family {
    /// Chirped Gaussian.
    Cg,
    /// Hermite-Gaussian.
    Hg,
}

impl Family {
    /// Parses `cg` or `hg`.
    pub fn parse(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "cg" => Ok(Family::Cg),
            "hg" => Ok(Family::Hg),
            other => Err(Error::Config(format!("unknown profile family '{other}'"))),
        }
    }
}

/// Direction pattern of a tabulated profile: `IIA` moves towards the edges
/// of a centered square, `IIB` towards its corners.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum ProfileType {
    IIA,
    IIB,
}

impl ProfileType {
    /// Parses `iia` or `iib`.
    pub fn parse(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "iia" => Ok(ProfileType::IIA),
            "iib" => Ok(ProfileType::IIB),
            other => Err(Error::Config(format!("unknown profile type '{other}'"))),
        }
    }
}

/// One travelling packet.
#[derive(Clone, Debug, PartialEq)]
pub struct Component {
    /// Inverse squared widths, componentwise positive.
    pub a: [f64; 2],
    /// Chirp parameters (chirped Gaussian only).
    pub b: [f64; 2],
    /// Hermite orders (Hermite-Gaussian only).
    pub m: [usize; 2],
    /// Direction angle.
    pub theta: f64,
    /// Velocity `c0 (cos theta, sin theta)`.
    pub c: [f64; 2],
}

/// Superposition `A0 sum_j G_j` of travelling packets of one family.
#[derive(Clone, Debug, PartialEq)]
pub struct ProfileSpec {
    pub family: Family,
    pub a0: f64,
    pub c0: f64,
    pub components: Vec<Component>,
}

/// `(1 + 4i(a+ib)t)^{-1/2} exp(-(a+ib) x^2 / (1 + 4i(a+ib)t))`.
pub fn chirped_gaussian_1d(x: f64, t: f64, a: f64, b: f64) -> C64 {
    let s = C64::new(a, b);
    let den = C64::new(1.0, 0.0) + C64::new(0.0, 4.0 * t) * s;
    (-(s * x * x) / den).exp() / den.sqrt()
}

/// Physicists' Hermite polynomial `H_n(x)`.
pub fn hermite(n: usize, x: f64) -> f64 {
    let (mut prev, mut cur) = (1.0, 2.0 * x);
    if n == 0 {
        return prev;
    }
    for k in 1..n {
        let next = 2.0 * x * cur - 2.0 * k as f64 * prev;
        prev = cur;
        cur = next;
    }
    cur
}

/// Normalization `gamma_m = sqrt(2^m m! sqrt(pi) (2a)^{-1/2})`.
pub fn hermite_norm(m: usize, a: f64) -> f64 {
    let fact: f64 = (1..=m).map(|k| k as f64).product();
    (2f64.powi(m as i32) * fact * PI.sqrt() / (2.0 * a).sqrt()).sqrt()
}

/// Normalized dispersing Hermite-Gaussian mode of order `m`.
pub fn hermite_gaussian_1d(m: usize, x: f64, t: f64, a: f64) -> C64 {
    let w = (1.0 + (4.0 * a * t).powi(2)).sqrt();
    let theta = (4.0 * a * t).atan();
    let mu = C64::new(a, 0.0) / C64::new(1.0, 4.0 * a * t);
    let herm = hermite(m, (2.0 * a).sqrt() * x / w);
    let phase = C64::new(0.0, -(m as f64) * theta);
    (mu / a).sqrt() * herm * (-mu * x * x + phase).exp() / hermite_norm(m, a)
}

fn carrier(c: [f64; 2], x1: f64, x2: f64, t: f64) -> C64 {
    let arg = 0.5 * (c[0] * x1 + c[1] * x2) - 0.25 * (c[0] * c[0] + c[1] * c[1]) * t;
    C64::from_polar(1.0, arg)
}

/// Chirped-Gaussian superposition at `(x1, x2, t)`.
pub fn eval_cg(spec: &ProfileSpec, x1: f64, x2: f64, t: f64) -> C64 {
    spec.components
        .iter()
        .map(|q| {
            chirped_gaussian_1d(x1 - q.c[0] * t, t, q.a[0], q.b[0])
                * chirped_gaussian_1d(x2 - q.c[1] * t, t, q.a[1], q.b[1])
                * carrier(q.c, x1, x2, t)
        })
        .sum::<C64>()
        * spec.a0
}

/// Hermite-Gaussian superposition at `(x1, x2, t)`.
pub fn eval_hg(spec: &ProfileSpec, x1: f64, x2: f64, t: f64) -> C64 {
    spec.components
        .iter()
        .map(|q| {
            hermite_gaussian_1d(q.m[0], x1 - q.c[0] * t, t, q.a[0])
                * hermite_gaussian_1d(q.m[1], x2 - q.c[1] * t, t, q.a[1])
                * carrier(q.c, x1, x2, t)
        })
        .sum::<C64>()
        * spec.a0
}

impl ProfileSpec {
    /// Value of the solution at `(x1, x2, t)`.
    pub fn eval(&self, x1: f64, x2: f64, t: f64) -> C64 {
        match self.family {
            Family::Cg => eval_cg(self, x1, x2, t),
            Family::Hg => eval_hg(self, x1, x2, t),
        }
    }
}

const TABLE_A: [[f64; 2]; 4] = [
    [1.0 / 2.5, 1.0 / 2.4],
    [1.0 / 2.3, 1.0 / 2.2],
    [1.0 / 2.7, 1.0 / 2.6],
    [1.0 / 2.2, 1.0 / 2.5],
];
const TABLE_M: [[usize; 2]; 4] = [[1, 2], [2, 1], [2, 1], [1, 2]];

/// Tabulated four-packet profile with amplitude 2 and speed `c0`.
pub fn profile_from_table(family: Family, kind: ProfileType, c0: f64) -> ProfileSpec {
    let shift = match kind {
        ProfileType::IIA => 0.0,
        ProfileType::IIB => PI / 4.0,
    };
    let components = (0..4)
        .map(|j| {
            let theta = j as f64 * PI / 2.0 + shift;
            Component {
                a: TABLE_A[j],
                b: match family {
                    Family::Cg => [0.5, 0.5],
                    Family::Hg => [0.0, 0.0],
                },
                m: match family {
                    Family::Cg => [0, 0],
                    Family::Hg => TABLE_M[j],
                },
                theta,
                c: [c0 * theta.cos(), c0 * theta.sin()],
            }
        })
        .collect();
    ProfileSpec {
        family,
        a0: 2.0,
        c0,
        components,
    }
}

/// Degree of the reference LGL rule used by [`energy_content`].
pub const ENERGY_RULE_DEGREE: usize = 200;

/// `int |u(x,t)|^2 dx` over the rectangle by the reference LGL rule.
pub fn domain_energy(spec: &ProfileSpec, dom: &DomainMap, t: f64) -> Result<f64> {
    let rule = lgl_grid(ENERGY_RULE_DEGREE)?;
    let mut acc = 0.0;
    for (y2, w2) in rule.nodes.iter().zip(&rule.weights) {
        for (y1, w1) in rule.nodes.iter().zip(&rule.weights) {
            let (x1, x2) = dom.to_physical(*y1, *y2);
            acc += w1 * w2 * spec.eval(x1, x2, t).norm_sqr();
        }
    }
    Ok(acc * dom.j1 * dom.j2)
}

/// Fraction of the initial energy still inside the rectangle at time `t`.
pub fn energy_content(spec: &ProfileSpec, dom: &DomainMap, t: f64) -> Result<f64> {
    let e0 = domain_energy(spec, dom, 0.0)?;
    if !(e0 > 0.0) {
        return Err(Error::Numerical("profile has zero energy in the domain at t = 0".into()));
    }
    if t == 0.0 {
        return Ok(1.0);
    }
    Ok(domain_energy(spec, dom, t)? / e0)
}
