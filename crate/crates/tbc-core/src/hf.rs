//! High-frequency approximate boundary conditions with corner conditions.
//!
//! The Galerkin system reads
//!
//! ```text
//! i M1 U' M2 = b1 S1 U M2 + b2 M1 U S2 + 3/4 sqrt(b1 b2) L1 U L2
//!            + d_t^{1/2} F+ + d_t^{-1/2} F-,
//! F+ = e^{-i pi/4} (sqrt(b1) L1 U M2 + sqrt(b2) M1 U L2),
//! F- = e^{i pi/4} / 2 (sqrt(b1) b2 L1 U S2 + b1 sqrt(b2) S1 U L2).
//! ```
//!
//! The half-order operators are discretized either by convolution quadrature
//! ([`HfFamily::Cq`], memory grows with the step count) or by Padé auxiliary
//! equations ([`HfFamily::Cp`], memory fixed by the Padé order). Either way
//! every step solves one linear system with the same eight-term Kronecker
//! operator
//!
//! ```text
//! M1 X M2 + a1^-2 S1 X M2 + a2^-2 M1 X S2 + w+ (a1^-1 L1 X M2 + a2^-1 M1 X L2)
//!   + w-/2 (a1^-1 a2^-2 L1 X S2 + a1^-2 a2^-1 S1 X L2) + 3/(4 a1 a2) L1 X L2,
//! ```
//!
//! with `w+ = w- = 1` for convolution quadrature and `w+- = varpi^{+-1/2}` for
//! the Padé realization.

use crate::error::{Error, Result};
use crate::kron::{FactoredOperator, KronOperator, KronTerm};
use crate::rational::{alpha, cq_weights, discrete_pade, DiscretePadeCoeffs, Stepper};
use crate::spectral::{boundary_cols, boundary_rows, embed_cols, embed_rows, CMat, ComplexOperators, Discretization, C64};
use crate::Evolution;

/// Realization of the half-order time operators.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum HfFamily {
    /// Convolution quadrature.
    Cq,
    /// Padé auxiliary equations.
    Cp,
}

/// Configuration of a high-frequency solver.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct HfConfig {
    pub family: HfFamily,
    pub stepper: Stepper,
    /// Padé order, used by [`HfFamily::Cp`] only.
    pub k: usize,
    pub dt: f64,
}

impl HfConfig {
    fn validate(&self) -> Result<()> {
        if !(self.dt > 0.0) || !self.dt.is_finite() {
            return Err(Error::Config(format!("time step must be positive, got {}", self.dt)));
        }
        if self.family == HfFamily::Cp && self.k == 0 {
            return Err(Error::Config("Pade order K must be at least 1".into()));
        }
        Ok(())
    }
}

/// Relative size of the initial boundary trace above which a warning is issued.
pub const SUPPORT_TOLERANCE: f64 = 1e-8;

/// Coefficients `(a1^-1, a2^-1)` and the weights `(w+, w-)` of the
/// eight-term operator.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct HfLhsCoeffs {
    pub inv_alpha1: C64,
    pub inv_alpha2: C64,
    pub w_plus: f64,
    pub w_minus: f64,
}

/// The eight Kronecker terms of the left-hand side.
pub fn hf_lhs_terms(ops: &ComplexOperators, c: &HfLhsCoeffs) -> Vec<KronTerm> {
    let (ia1, ia2) = (c.inv_alpha1, c.inv_alpha2);
    let one = C64::new(1.0, 0.0);
    vec![
        KronTerm::new(one, ops.m1.clone(), ops.m2.clone()),
        KronTerm::new(ia1 * ia1, ops.s1.clone(), ops.m2.clone()),
        KronTerm::new(ia2 * ia2, ops.m1.clone(), ops.s2.clone()),
        KronTerm::new(c.w_plus * ia1, ops.l1.clone(), ops.m2.clone()),
        KronTerm::new(c.w_plus * ia2, ops.m1.clone(), ops.l2.clone()),
        KronTerm::new(0.5 * c.w_minus * ia1 * ia2 * ia2, ops.l1.clone(), ops.s2.clone()),
        KronTerm::new(0.5 * c.w_minus * ia1 * ia1 * ia2, ops.s1.clone(), ops.l2.clone()),
        KronTerm::new(0.75 * ia1 * ia2, ops.l1.clone(), ops.l2.clone()),
    ]
}

/// Boundary data entering the right-hand side as
/// `a1^-1 [h1p] M2 + a2^-1 M1 [h2p] + 1/2 a1^-1 a2^-2 [h1m] S2 + 1/2 a1^-2 a2^-1 S1 [h2m]`,
/// where `[h1]` embeds two rows and `[h2]` two columns.
struct BoundaryTerms {
    h1p: CMat,
    h2p: CMat,
    h1m: CMat,
    h2m: CMat,
}

impl BoundaryTerms {
    fn zeros(n1: usize, n2: usize) -> Self {
        Self {
            h1p: CMat::zeros(2, n2),
            h2p: CMat::zeros(n1, 2),
            h1m: CMat::zeros(2, n2),
            h2m: CMat::zeros(n1, 2),
        }
    }

    fn assemble(&self, ops: &ComplexOperators, ia1: C64, ia2: C64) -> CMat {
        let n1 = ops.m1.nrows();
        let n2 = ops.m2.nrows();
        let top = &self.h1p * &ops.m2 * ia1 + &self.h1m * &ops.s2 * (0.5 * ia1 * ia2 * ia2);
        let side = &ops.m1 * &self.h2p * ia2 + &ops.s1 * &self.h2m * (0.5 * ia1 * ia1 * ia2);
        embed_rows(&top, n1) + embed_cols(&side, n2)
    }
}

/// One assembled and factored left-hand side.
#[derive(Debug)]
struct Level {
    stepper: Stepper,
    rho: f64,
    ia1: C64,
    ia2: C64,
    pade: Option<DiscretePadeCoeffs>,
    op: KronOperator,
    fac: FactoredOperator,
}

impl Level {
    fn new(cfg: &HfConfig, stepper: Stepper, disc: &Discretization, ops: &ComplexOperators) -> Result<Self> {
        let (b1, b2) = (disc.dom.beta1, disc.dom.beta2);
        let rho = stepper.rho(cfg.dt);
        let (pade, w_plus, w_minus) = match cfg.family {
            HfFamily::Cq => (None, 1.0, 1.0),
            HfFamily::Cp => {
                let p = discrete_pade(stepper, cfg.dt, b1, b2, cfg.k)?;
                let (wp, wm) = (p.varpi_plus, p.varpi_minus);
                (Some(p), wp, wm)
            }
        };
        let coeffs = HfLhsCoeffs {
            inv_alpha1: alpha(rho, b1).inv(),
            inv_alpha2: alpha(rho, b2).inv(),
            w_plus,
            w_minus,
        };
        let op = KronOperator::assemble(hf_lhs_terms(ops, &coeffs))?;
        let fac = op.factor()?;
        Ok(Self {
            stepper,
            rho,
            ia1: coeffs.inv_alpha1,
            ia2: coeffs.inv_alpha2,
            pade,
            op,
            fac,
        })
    }
}

/// Convolution-quadrature memory: boundary rows and columns of every past step.
#[derive(Debug, Default)]
struct CqMemory {
    rows: Vec<CMat>,
    cols: Vec<CMat>,
    omega_plus: Vec<f64>,
    omega_minus: Vec<f64>,
    /// History term of the previous step, needed by the trapezoidal rule.
    previous: Option<CMat>,
}

/// Padé auxiliary fields: index 0 is the integral field, `1..=K` the
/// partial-fraction fields.
#[derive(Debug)]
struct CpMemory {
    a1: Vec<CMat>,
    a2: Vec<CMat>,
    a1_prev: Vec<CMat>,
    a2_prev: Vec<CMat>,
}

#[derive(Debug)]
enum Memory {
    Cq(CqMemory),
    Cp(CpMemory),
}

/// Time stepper for the high-frequency boundary value problem.
#[derive(Debug)]
pub struct HfSolver {
    cfg: HfConfig,
    ops: ComplexOperators,
    main: Level,
    start: Option<Level>,
    u: CMat,
    u_prev: CMat,
    steps: usize,
    memory: Memory,
    warnings: Vec<String>,
}

impl HfSolver {
    /// Assembles and factors the left-hand side and zeroes the boundary memory.
    pub fn new(cfg: HfConfig, disc: &Discretization, u0: CMat) -> Result<Self> {
        cfg.validate()?;
        let (n1, n2) = (disc.n1() + 1, disc.n2() + 1);
        if u0.nrows() != n1 || u0.ncols() != n2 {
            return Err(Error::Dimension(format!(
                "initial coefficients are {}x{}, expected {n1}x{n2}",
                u0.nrows(),
                u0.ncols()
            )));
        }
        let ops = ComplexOperators::new(disc);
        let main = Level::new(&cfg, cfg.stepper, disc, &ops)?;
        let start = if cfg.stepper == Stepper::Bdf2 {
            Some(Level::new(&cfg, Stepper::Bdf1, disc, &ops)?)
        } else {
            None
        };
        let memory = match cfg.family {
            HfFamily::Cq => Memory::Cq(CqMemory::default()),
            HfFamily::Cp => {
                let z1 = vec![CMat::zeros(2, n2); cfg.k + 1];
                let z2 = vec![CMat::zeros(n1, 2); cfg.k + 1];
                Memory::Cp(CpMemory {
                    a1: z1.clone(),
                    a2: z2.clone(),
                    a1_prev: z1,
                    a2_prev: z2,
                })
            }
        };
        let mut warnings = Vec::new();
        let trace = boundary_rows(&u0).norm().max(boundary_cols(&u0).norm());
        if trace > SUPPORT_TOLERANCE * u0.norm() {
            warnings.push(format!(
                "initial boundary trace {trace:e} exceeds {SUPPORT_TOLERANCE:e} of the field norm"
            ));
        }
        Ok(Self {
            cfg,
            ops,
            main,
            start,
            u_prev: u0.clone(),
            u: u0,
            steps: 0,
            memory,
            warnings,
        })
    }

    /// Configuration of the solver.
    pub fn config(&self) -> &HfConfig {
        &self.cfg
    }

    /// Left-hand side used after the start-up phase.
    pub fn operator(&self) -> &KronOperator {
        &self.main.op
    }

    /// Discrete Padé constants of the main stepper, if any.
    pub fn pade(&self) -> Option<&DiscretePadeCoeffs> {
        self.main.pade.as_ref()
    }

    /// Number of linear solves with the main factorization.
    pub fn solve_count(&self) -> usize {
        self.main.fac.solve_count() + self.start.as_ref().map_or(0, |s| s.fac.solve_count())
    }

    /// Auxiliary fields `(A_{k,1} rows, A_{k,2} columns)` for `k = 0..=K`.
    pub fn auxiliary(&self) -> Option<(&[CMat], &[CMat])> {
        match &self.memory {
            Memory::Cp(m) => Some((&m.a1, &m.a2)),
            Memory::Cq(_) => None,
        }
    }

    fn level(&self) -> &Level {
        match &self.start {
            Some(s) if self.steps == 0 => s,
            _ => &self.main,
        }
    }

    fn step_cq(&mut self) -> Result<CMat> {
        let j = self.steps;
        let lvl = match &self.start {
            Some(s) if j == 0 => s,
            _ => &self.main,
        };
        let (n1, n2) = (self.u.nrows(), self.u.ncols());
        let Memory::Cq(mem) = &mut self.memory else {
            unreachable!("convolution memory")
        };
        if mem.omega_plus.len() < j + 1 {
            let len = (2 * (j + 1)).max(64);
            mem.omega_plus = cq_weights(self.main.stepper, 0.5, len, self.cfg.dt)?.omega;
            mem.omega_minus = cq_weights(self.main.stepper, -0.5, len, self.cfg.dt)?.omega;
        }
        let mut h = BoundaryTerms::zeros(n1, n2);
        for k in 1..=j {
            let wp = C64::new(mem.omega_plus[j + 1 - k], 0.0);
            let wm = C64::new(mem.omega_minus[j + 1 - k], 0.0);
            h.h1p += &mem.rows[k - 1] * wp;
            h.h2p += &mem.cols[k - 1] * wp;
            h.h1m += &mem.rows[k - 1] * wm;
            h.h2m += &mem.cols[k - 1] * wm;
        }
        let history = h.assemble(&self.ops, lvl.ia1, lvl.ia2);
        let m_u = &self.ops.m1 * &self.u * &self.ops.m2;
        let u_new = match lvl.stepper {
            Stepper::Bdf1 => lvl.fac.solve(&(m_u - &history))?,
            Stepper::Bdf2 => {
                let m_prev = &self.ops.m1 * &self.u_prev * &self.ops.m2;
                let rhs = m_u * C64::new(4.0 / 3.0, 0.0) - m_prev * C64::new(1.0 / 3.0, 0.0) - &history;
                lvl.fac.solve(&rhs)?
            }
            Stepper::Tr => {
                let prev = mem.previous.take().unwrap_or_else(|| CMat::zeros(n1, n2));
                let rhs = m_u - (&history + prev) * C64::new(0.5, 0.0);
                mem.previous = Some(history);
                let v = lvl.fac.solve(&rhs)?;
                v * C64::new(2.0, 0.0) - &self.u
            }
        };
        mem.rows.push(boundary_rows(&u_new));
        mem.cols.push(boundary_cols(&u_new));
        Ok(u_new)
    }

    fn step_cp(&mut self) -> Result<CMat> {
        let j = self.steps;
        let lvl = match &self.start {
            Some(s) if j == 0 => s,
            _ => &self.main,
        };
        let p = lvl.pade.as_ref().expect("Pade constants of a CP level");
        let (n1, n2) = (self.u.nrows(), self.u.ncols());
        let Memory::Cp(mem) = &mut self.memory else {
            unreachable!("Pade memory")
        };
        let bdf2 = lvl.stepper == Stepper::Bdf2;
        let combine = |cur: &CMat, prev: &CMat| -> CMat {
            if bdf2 {
                cur * C64::new(4.0 / 3.0, 0.0) - prev * C64::new(1.0 / 3.0, 0.0)
            } else {
                cur.clone()
            }
        };
        let a1: Vec<CMat> = mem.a1.iter().zip(&mem.a1_prev).map(|(c, q)| combine(c, q)).collect();
        let a2: Vec<CMat> = mem.a2.iter().zip(&mem.a2_prev).map(|(c, q)| combine(c, q)).collect();
        let mut h = BoundaryTerms::zeros(n1, n2);
        h.h1m = &a1[0] * C64::new(-p.d_bar0, 0.0);
        h.h2m = &a2[0] * C64::new(-p.d_bar0, 0.0);
        for k in 1..a1.len() {
            let gp = C64::new(p.gamma_plus[k - 1], 0.0);
            let gm = C64::new(p.gamma_minus[k - 1], 0.0);
            h.h1p += &a1[k] * gp;
            h.h2p += &a2[k] * gp;
            h.h1m += &a1[k] * gm;
            h.h2m += &a2[k] * gm;
        }
        let history = h.assemble(&self.ops, lvl.ia1, lvl.ia2);
        let m_u = &self.ops.m1 * combine(&self.u, &self.u_prev) * &self.ops.m2;
        let x = lvl.fac.solve(&(m_u + history))?;
        let rho = lvl.rho;
        let f1 = boundary_rows(&x);
        let f2 = boundary_cols(&x);
        let (new1, new2, u_new) = if lvl.stepper == Stepper::Tr {
            let s = C64::new(2.0 / rho, 0.0);
            let mut n1v = Vec::with_capacity(a1.len());
            let mut n2v = Vec::with_capacity(a2.len());
            n1v.push(&a1[0] + &f1 * s);
            n2v.push(&a2[0] + &f2 * s);
            for k in 1..a1.len() {
                let hk = C64::new(p.h[k - 1], 0.0);
                let gk = C64::new(p.g[k - 1], 0.0);
                n1v.push(&a1[k] * hk + &f1 * (s * gk));
                n2v.push(&a2[k] * hk + &f2 * (s * gk));
            }
            let u_new = x * C64::new(2.0, 0.0) - &self.u;
            (n1v, n2v, u_new)
        } else {
            let s = C64::new(1.0 / rho, 0.0);
            let mut n1v = Vec::with_capacity(a1.len());
            let mut n2v = Vec::with_capacity(a2.len());
            n1v.push(&a1[0] + &f1 * s);
            n2v.push(&a2[0] + &f2 * s);
            for k in 1..a1.len() {
                let gk = C64::new(p.g[k - 1], 0.0);
                n1v.push((&f1 * s + &a1[k]) * gk);
                n2v.push((&f2 * s + &a2[k]) * gk);
            }
            (n1v, n2v, x)
        };
        mem.a1_prev = std::mem::replace(&mut mem.a1, new1);
        mem.a2_prev = std::mem::replace(&mut mem.a2, new2);
        Ok(u_new)
    }
}

impl Evolution for HfSolver {
    fn step(&mut self) -> Result<()> {
        let u_new = match self.cfg.family {
            HfFamily::Cq => self.step_cq()?,
            HfFamily::Cp => self.step_cp()?,
        };
        if u_new.iter().any(|v| !v.re.is_finite() || !v.im.is_finite()) {
            return Err(Error::Numerical(format!(
                "non-finite coefficients after step {}",
                self.steps + 1
            )));
        }
        self.u_prev = std::mem::replace(&mut self.u, u_new);
        self.steps += 1;
        Ok(())
    }

    fn field(&self) -> &CMat {
        &self.u
    }

    fn steps(&self) -> usize {
        self.steps
    }

    fn dt(&self) -> f64 {
        self.cfg.dt
    }

    fn state_size(&self) -> usize {
        match &self.memory {
            Memory::Cq(m) => {
                m.rows.iter().chain(&m.cols).map(|x| x.len()).sum::<usize>()
                    + m.previous.as_ref().map_or(0, |x| x.len())
            }
            Memory::Cp(m) => m
                .a1
                .iter()
                .chain(&m.a2)
                .chain(&m.a1_prev)
                .chain(&m.a2_prev)
                .map(|x| x.len())
                .sum(),
        }
    }

    fn warnings(&self) -> &[String] {
        &self.warnings
    }

    fn factor_count(&self) -> usize {
        self.main.op.factor_count() + self.start.as_ref().map_or(0, |s| s.op.factor_count())
    }
}

impl HfSolver {
    /// Stepper that will be used for the next step.
    pub fn next_stepper(&self) -> Stepper {
        self.level().stepper
    }
}
