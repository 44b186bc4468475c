//! Exact transparent boundary conditions on a rectangle.
//!
//! The boundary operator couples the two boundary directions through two
//! time variables `(tau1, tau2)`. A field trace is needed on every boundary
//! segment at every pair of time levels, which is computed by sweeping
//! one-dimensional problems off the diagonal `tau1 = tau2`:
//!
//! * rows `0, 1` of the coefficient matrix (segments `x1 = x_l, x_r`) are
//!   advanced in `tau2` by right solves with `M2 + a2^-2 S2 + w a2^-1 L2`;
//! * columns `0, 1` (segments `x2 = x_b, x_t`) are advanced in `tau1` by
//!   left solves with `M1 + a1^-2 S1 + w a1^-1 L1`.
//!
//! The half-order operator is realized either by convolution quadrature
//! ([`TbcFamily::Cq`], every off-diagonal line is kept) or by a Padé
//! expansion with auxiliary fields ([`TbcFamily::Np`], storage fixed by the
//! Padé order). The field itself solves the five-term Kronecker system
//!
//! ```text
//! M1 X M2 + a1^-2 S1 X M2 + a2^-2 M1 X S2 + w (a1^-1 L1 X M2 + a2^-1 M1 X L2)
//! ```
//!
//! with `w = 1` for quadrature and `w = varpi^{1/2}` for the Padé form.

use nalgebra::{DMatrixView, Matrix2};

use crate::error::{Error, Result};
use crate::kron::{Factored1d, FactoredOperator, KronOperator, KronTerm};
use crate::rational::{alpha, cq_weights, discrete_pade, DiscretePadeCoeffs, Stepper};
use crate::spectral::{boundary_cols, boundary_rows, embed_cols, embed_rows, CMat, ComplexOperators, Discretization, RMat, C64};
use crate::Evolution;

/// Realization of the half-order boundary operator.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum TbcFamily {
    /// Convolution quadrature in both time variables.
    Cq,
    /// Padé auxiliary fields with corner fields.
    Np,
}

/// Configuration of a transparent-boundary solver.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct TbcConfig {
    pub family: TbcFamily,
    /// [`Stepper::Bdf1`] or [`Stepper::Tr`].
    pub stepper: Stepper,
    /// Padé order, used by [`TbcFamily::Np`] only.
    pub k: usize,
    pub dt: f64,
}

impl TbcConfig {
    fn validate(&self) -> Result<()> {
        if !(self.dt > 0.0) || !self.dt.is_finite() {
            return Err(Error::Config(format!("time step must be positive, got {}", self.dt)));
        }
        if self.stepper == Stepper::Bdf2 {
            return Err(Error::Config(
                "transparent boundary solvers support bdf1 and tr only".into(),
            ));
        }
        if self.family == TbcFamily::Np && self.k == 0 {
            return Err(Error::Config("Pade order K must be at least 1".into()));
        }
        Ok(())
    }
}

/// The five Kronecker terms of the field system with boundary weight `w`.
pub fn tbc_lhs_terms(ops: &ComplexOperators, inv_alpha1: C64, inv_alpha2: C64, w: f64) -> Vec<KronTerm> {
    let one = C64::new(1.0, 0.0);
    vec![
        KronTerm::new(one, ops.m1.clone(), ops.m2.clone()),
        KronTerm::new(inv_alpha1 * inv_alpha1, ops.s1.clone(), ops.m2.clone()),
        KronTerm::new(inv_alpha2 * inv_alpha2, ops.m1.clone(), ops.s2.clone()),
        KronTerm::new(w * inv_alpha1, ops.l1.clone(), ops.m2.clone()),
        KronTerm::new(w * inv_alpha2, ops.m1.clone(), ops.l2.clone()),
    ]
}

/// Storage held by a solver, in complex numbers.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct StateSize {
    /// Segment traces and segment auxiliary fields.
    pub segments: usize,
    /// Corner values.
    pub corners: usize,
}

impl StateSize {
    /// Sum of both parts.
    pub fn total(&self) -> usize {
        self.segments + self.corners
    }
}

/// Top-left `2 x 2` block, i.e. the four corner values of a segment trace.
pub fn corner(x: &CMat) -> Matrix2<C64> {
    Matrix2::new(x[(0, 0)], x[(0, 1)], x[(1, 0)], x[(1, 1)])
}

/// `2 x n2` trace whose columns 0 and 1 hold `c`.
fn corner_as_rows(c: &Matrix2<C64>, n2: usize) -> CMat {
    let mut out = CMat::zeros(2, n2);
    out.view_mut((0, 0), (2, 2)).copy_from(c);
    out
}

/// `n1 x 2` trace whose rows 0 and 1 hold `c`.
fn corner_as_cols(c: &Matrix2<C64>, n1: usize) -> CMat {
    let mut out = CMat::zeros(n1, 2);
    out.view_mut((0, 0), (2, 2)).copy_from(c);
    out
}

fn re(v: f64) -> C64 {
    C64::new(v, 0.0)
}

/// Factored one-dimensional segment operators of both directions.
#[derive(Debug)]
struct SegmentSolvers {
    /// Left solves with `M1 + a1^-2 S1 + w a1^-1 L1` (segments `x2 = const`).
    dir1: Factored1d,
    /// Right solves with `M2 + a2^-2 S2 + w a2^-1 L2` (segments `x1 = const`).
    dir2: Factored1d,
    count: usize,
}

impl SegmentSolvers {
    fn new(ops: &ComplexOperators, ia1: C64, ia2: C64, w: f64) -> Result<Self> {
        let a1 = &ops.m1 + &ops.s1 * (ia1 * ia1) + &ops.l1 * (ia1 * w);
        let a2 = &ops.m2 + &ops.s2 * (ia2 * ia2) + &ops.l2 * (ia2 * w);
        Ok(Self {
            dir1: Factored1d::left(&a1)?,
            dir2: Factored1d::right(&a2)?,
            count: 0,
        })
    }

    fn cols(&mut self, f: &CMat) -> Result<CMat> {
        self.count += 1;
        self.dir1.solve(f)
    }

    fn rows(&mut self, f: &CMat) -> Result<CMat> {
        self.count += 1;
        self.dir2.solve(f)
    }
}

/// Traces of every past time level on one pair of opposite segments,
/// stored side by side: line `q` occupies columns `2q, 2q + 1` of an
/// `n x 2L` column-major block.
#[derive(Debug)]
struct LineStack {
    n: usize,
    data: Vec<C64>,
}

impl LineStack {
    fn new(n: usize) -> Self {
        Self { n, data: Vec::new() }
    }

    fn len(&self) -> usize {
        self.data.len() / (2 * self.n)
    }

    fn block(&self) -> DMatrixView<'_, C64> {
        DMatrixView::from_slice(&self.data, self.n, 2 * self.len())
    }

    fn line(&self, q: usize) -> DMatrixView<'_, C64> {
        let w = 2 * self.n;
        DMatrixView::from_slice(&self.data[q * w..(q + 1) * w], self.n, 2)
    }

    fn push(&mut self, x: &CMat) {
        self.data.extend_from_slice(x.as_slice());
    }

    /// `sum_{k=1}^{m} w_{m+1-k} line(k)`.
    fn weighted_sum(&self, omega: &[f64], m: usize) -> CMat {
        let mut acc = CMat::zeros(self.n, 2);
        for k in 1..=m {
            acc += self.line(k) * re(omega[m + 1 - k]);
        }
        acc
    }
}

/// Explicit one-step map of a segment line, `X -> P X + Q C` with the corner
/// history `C`. Row traces are propagated transposed.
#[derive(Debug)]
struct LinePropagator {
    /// Real and imaginary parts of `P`, kept apart so that the product with
    /// the whole line stack runs as real matrix products.
    advance_re: RMat,
    advance_im: RMat,
    inject: CMat,
}

impl LinePropagator {
    fn new(inverse: CMat, mass: &CMat, ia: C64) -> Self {
        let inject = inverse.columns(0, 2) * (-ia);
        let advance = inverse * mass;
        Self {
            advance_re: advance.map(|v| v.re),
            advance_im: advance.map(|v| v.im),
            inject,
        }
    }

    /// `P X` for a block of lines.
    fn apply(&self, x: DMatrixView<'_, C64>) -> CMat {
        let (xr, xi) = (x.map(|v| v.re), x.map(|v| v.im));
        let re = &self.advance_re * &xr - &self.advance_im * &xi;
        let im = &self.advance_re * &xi + &self.advance_im * &xr;
        re.zip_map(&im, C64::new)
    }
}

/// Quadrature memory: one off-diagonal line per past time level and the
/// corner values of every pair of levels.
#[derive(Debug)]
struct CqMemory {
    /// Line `q` is the transposed row trace at `(tau1, tau2) = (q, j)`.
    lines1: LineStack,
    /// Line `p` is the column trace at `(j, p)`.
    lines2: LineStack,
    prop1: LinePropagator,
    prop2: LinePropagator,
    /// `by_row[a][b]` is the corner block at `(a, b)`.
    by_row: Vec<Vec<Matrix2<C64>>>,
    /// `by_col[b][a]` is the same block, so that sums over either time
    /// variable run over contiguous memory.
    by_col: Vec<Vec<Matrix2<C64>>>,
    /// Corner sums of the previous level for every line (trapezoidal rule).
    prev1: Vec<Matrix2<C64>>,
    prev2: Vec<Matrix2<C64>>,
    /// Line history of the previous level (trapezoidal rule).
    prev_history: Option<(CMat, CMat)>,
    omega: Vec<f64>,
}

impl CqMemory {
    fn psi(&self, a: usize, b: usize) -> &Matrix2<C64> {
        &self.by_row[a][b]
    }

    /// `sum_{k=1}^{m} omega_{m+1-k} psi(q, k)`.
    fn sum_along_tau2(&self, q: usize, m: usize) -> Matrix2<C64> {
        weighted_corners(&self.by_row[q], &self.omega, m)
    }

    /// `sum_{k=1}^{m} omega_{m+1-k} psi(k, p)`.
    fn sum_along_tau1(&self, p: usize, m: usize) -> Matrix2<C64> {
        weighted_corners(&self.by_col[p], &self.omega, m)
    }

    /// Appends the diagonal level taken from the field `u`. The row and the
    /// column of the new level must already hold every off-diagonal entry.
    fn push_level(&mut self, u: &CMat) {
        let c = corner(u);
        self.lines1.push(&boundary_rows(u).transpose());
        self.lines2.push(&boundary_cols(u));
        let q = self.by_row.len() - 1;
        self.by_row[q].push(c);
        self.by_col[q].push(c);
        let m = q.saturating_sub(1);
        let (s1, s2) = (self.sum_along_tau2(q, m), self.sum_along_tau1(q, m));
        self.prev1.push(s1);
        self.prev2.push(s2);
    }
}

/// `sum_{k=1}^{m} omega_{m+1-k} v[k]`.
fn weighted_corners(v: &[Matrix2<C64>], omega: &[f64], m: usize) -> Matrix2<C64> {
    let mut acc = [C64::new(0.0, 0.0); 4];
    if m == 0 {
        return Matrix2::zeros();
    }
    for (x, w) in v[1..=m].iter().zip(omega[1..=m].iter().rev()) {
        for (a, b) in acc.iter_mut().zip(x.as_slice()) {
            *a += b * w;
        }
    }
    Matrix2::from_column_slice(&acc)
}

/// Padé memory on the diagonal `tau1 = tau2 = j`.
#[derive(Debug)]
struct NpMemory {
    /// Row auxiliary fields, `2 x (N2+1)` each.
    a1: Vec<CMat>,
    /// Column auxiliary fields, `(N1+1) x 2` each.
    a2: Vec<CMat>,
    /// Corner fields, `c[k * K + k']`: the first index is attached to `tau1`.
    c: Vec<Matrix2<C64>>,
}

#[derive(Debug)]
enum Memory {
    Cq(CqMemory),
    Np(NpMemory),
}

/// Time stepper for the transparent-boundary value problem.
#[derive(Debug)]
pub struct TbcSolver {
    cfg: TbcConfig,
    ops: ComplexOperators,
    rho: f64,
    ia1: C64,
    ia2: C64,
    pade: Option<DiscretePadeCoeffs>,
    op: KronOperator,
    fac: FactoredOperator,
    seg: SegmentSolvers,
    u: CMat,
    steps: usize,
    memory: Memory,
    warnings: Vec<String>,
}

impl TbcSolver {
    /// Assembles and factors the field and segment operators.
    pub fn new(cfg: TbcConfig, disc: &Discretization, u0: CMat) -> Result<Self> {
        cfg.validate()?;
        let (n1, n2) = (disc.n1() + 1, disc.n2() + 1);
        if u0.nrows() != n1 || u0.ncols() != n2 {
            return Err(Error::Dimension(format!(
                "initial coefficients are {}x{}, expected {n1}x{n2}",
                u0.nrows(),
                u0.ncols()
            )));
        }
        let (b1, b2) = (disc.dom.beta1, disc.dom.beta2);
        let rho = cfg.stepper.rho(cfg.dt);
        let ia1 = alpha(rho, b1).inv();
        let ia2 = alpha(rho, b2).inv();
        let ops = ComplexOperators::new(disc);
        let (pade, w) = match cfg.family {
            TbcFamily::Cq => (None, 1.0),
            TbcFamily::Np => {
                let p = discrete_pade(cfg.stepper, cfg.dt, b1, b2, cfg.k)?;
                let w = p.varpi_plus;
                (Some(p), w)
            }
        };
        let op = KronOperator::assemble(tbc_lhs_terms(&ops, ia1, ia2, w))?;
        let fac = op.factor()?;
        let seg = SegmentSolvers::new(&ops, ia1, ia2, w)?;
        let memory = match cfg.family {
            TbcFamily::Cq => {
                let inv1 = seg.dir1.solve(&CMat::identity(n1, n1))?;
                let inv2 = seg.dir2.solve(&CMat::identity(n2, n2))?;
                let mut mem = CqMemory {
                    lines1: LineStack::new(n2),
                    lines2: LineStack::new(n1),
                    prop1: LinePropagator::new(inv2.transpose(), &ops.m2, ia2),
                    prop2: LinePropagator::new(inv1, &ops.m1, ia1),
                    by_row: vec![Vec::new()],
                    by_col: vec![Vec::new()],
                    prev1: Vec::new(),
                    prev2: Vec::new(),
                    prev_history: None,
                    omega: Vec::new(),
                };
                mem.push_level(&u0);
                Memory::Cq(mem)
            }
            TbcFamily::Np => Memory::Np(NpMemory {
                a1: vec![CMat::zeros(2, n2); cfg.k],
                a2: vec![CMat::zeros(n1, 2); cfg.k],
                c: vec![Matrix2::zeros(); cfg.k * cfg.k],
            }),
        };
        let mut warnings = Vec::new();
        let trace = boundary_rows(&u0).norm().max(boundary_cols(&u0).norm());
        if trace > crate::hf::SUPPORT_TOLERANCE * u0.norm() {
            warnings.push(format!(
                "initial boundary trace {trace:e} exceeds {:e} of the field norm",
                crate::hf::SUPPORT_TOLERANCE
            ));
        }
        Ok(Self {
            cfg,
            ops,
            rho,
            ia1,
            ia2,
            pade,
            op,
            fac,
            seg,
            u: u0,
            steps: 0,
            memory,
            warnings,
        })
    }

    /// Configuration of the solver.
    pub fn config(&self) -> &TbcConfig {
        &self.cfg
    }

    /// Field operator.
    pub fn operator(&self) -> &KronOperator {
        &self.op
    }

    /// Discrete Padé constants, if any.
    pub fn pade(&self) -> Option<&DiscretePadeCoeffs> {
        self.pade.as_ref()
    }

    /// Number of field solves.
    pub fn solve_count(&self) -> usize {
        self.fac.solve_count()
    }

    /// Number of one-dimensional segment solves.
    pub fn segment_solves(&self) -> usize {
        self.seg.count
    }

    /// Storage split into segment and corner parts.
    pub fn state_breakdown(&self) -> StateSize {
        match &self.memory {
            Memory::Cq(m) => StateSize {
                segments: m.lines1.data.len() + m.lines2.data.len(),
                corners: 4 * m.by_row.iter().chain(&m.by_col).map(|v| v.len()).sum::<usize>(),
            },
            Memory::Np(m) => StateSize {
                segments: m.a1.iter().chain(&m.a2).map(|x| x.len()).sum(),
                corners: 4 * m.c.len(),
            },
        }
    }

    /// Padé segment fields `(rows, columns)` on the diagonal.
    pub fn segment_fields(&self) -> Option<(&[CMat], &[CMat])> {
        match &self.memory {
            Memory::Np(m) => Some((&m.a1, &m.a2)),
            Memory::Cq(_) => None,
        }
    }

    /// Padé corner field `(k, k')`, both zero-based, as `[[lb, lt], [rb, rt]]`.
    pub fn corner_field(&self, k: usize, kp: usize) -> Option<Matrix2<C64>> {
        match &self.memory {
            Memory::Np(m) if k < self.cfg.k && kp < self.cfg.k => Some(m.c[k * self.cfg.k + kp]),
            _ => None,
        }
    }

    /// Quadrature corner value at time levels `(a, b)`, both at most the
    /// current step.
    pub fn corner_history(&self, a: usize, b: usize) -> Option<Matrix2<C64>> {
        match &self.memory {
            Memory::Cq(m) if a <= self.steps && b <= self.steps => Some(*m.psi(a, b)),
            _ => None,
        }
    }

    fn step_cq(&mut self) -> Result<CMat> {
        let j = self.steps;
        let tr = self.cfg.stepper == Stepper::Tr;
        let (n1, n2) = (self.u.nrows(), self.u.ncols());
        let Memory::Cq(mem) = &mut self.memory else {
            unreachable!("quadrature memory")
        };
        if mem.omega.len() < j + 2 {
            let len = (2 * (j + 2)).max(64);
            mem.omega = cq_weights(self.cfg.stepper, 0.5, len, self.cfg.dt)?.omega;
        }
        let (ia1, ia2) = (self.ia1, self.ia2);
        let half = re(0.5);

        // advance every off-diagonal line from level j to j + 1
        let mut new1 = mem.prop1.apply(mem.lines1.block());
        let mut new2 = mem.prop2.apply(mem.lines2.block());
        for q in 0..=j {
            let mut c1 = mem.sum_along_tau2(q, j);
            let mut c2 = mem.sum_along_tau1(q, j);
            if tr {
                let (p1, p2) = (mem.prev1[q], mem.prev2[q]);
                mem.prev1[q] = c1;
                mem.prev2[q] = c2;
                c1 = (c1 + p1) * half;
                c2 = (c2 + p2) * half;
            }
            let mut x1 = new1.columns_mut(2 * q, 2);
            x1 += &mem.prop1.inject * c1.transpose();
            let mut x2 = new2.columns_mut(2 * q, 2);
            x2 += &mem.prop2.inject * c2;
        }
        if tr {
            new1 = new1 * re(2.0) - mem.lines1.block();
            new2 = new2 * re(2.0) - mem.lines2.block();
        }
        self.seg.count += 2 * (j + 1);
        mem.lines1.data.copy_from_slice(new1.as_slice());
        mem.lines2.data.copy_from_slice(new2.as_slice());
        // level j + 1 gets a new row and a new column in the corner tables
        let mut row = Vec::with_capacity(j + 2);
        let mut col = Vec::with_capacity(j + 2);
        for q in 0..=j {
            let c1 = corner(&mem.lines1.line(q).into_owned()).transpose();
            let c2 = corner(&mem.lines2.line(q).into_owned());
            mem.by_row[q].push(c1);
            col.push(c1);
            mem.by_col[q].push(c2);
            row.push(c2);
        }
        mem.by_row.push(row);
        mem.by_col.push(col);

        let mut h1 = mem.lines1.weighted_sum(&mem.omega, j).transpose();
        let mut h2 = mem.lines2.weighted_sum(&mem.omega, j);
        if tr {
            let current = (h1.clone(), h2.clone());
            if let Some((o1, o2)) = mem.prev_history.replace(current) {
                h1 = (h1 + o1) * half;
                h2 = (h2 + o2) * half;
            } else {
                h1 *= half;
                h2 *= half;
            }
        }
        let history = embed_rows(&(h1 * &self.ops.m2 * ia1), n1) + embed_cols(&(&self.ops.m1 * h2 * ia2), n2);
        let rhs = &self.ops.m1 * &self.u * &self.ops.m2 - history;
        let x = self.fac.solve(&rhs)?;
        let u_new = if tr { x * re(2.0) - &self.u } else { x };
        mem.push_level(&u_new);
        Ok(u_new)
    }

    fn step_np_bdf1(&mut self) -> Result<CMat> {
        let p = self.pade.as_ref().expect("Pade constants of an NP solver");
        let kk = self.cfg.k;
        let (n1, n2) = (self.u.nrows(), self.u.ncols());
        let Memory::Np(mem) = &mut self.memory else {
            unreachable!("Pade memory")
        };
        let (ia1, ia2, rho) = (self.ia1, self.ia2, self.rho);
        let gam = &p.gamma_plus;

        // segment solves from the corner fields on the diagonal
        let mut a1_off = Vec::with_capacity(kk);
        let mut a2_off = Vec::with_capacity(kk);
        for k in 0..kk {
            let s1 = (0..kk).fold(Matrix2::zeros(), |acc, kp| acc + mem.c[k * kk + kp] * re(gam[kp]));
            let rhs1 = &mem.a1[k] * &self.ops.m2 + corner_as_rows(&s1, n2) * ia2;
            a1_off.push(self.seg.rows(&rhs1)?);
            let s2 = (0..kk).fold(Matrix2::zeros(), |acc, q| acc + mem.c[q * kk + k] * re(gam[q]));
            let rhs2 = &self.ops.m1 * &mem.a2[k] + corner_as_cols(&s2, n1) * ia1;
            a2_off.push(self.seg.cols(&rhs2)?);
        }

        let mut h1 = CMat::zeros(2, n2);
        let mut h2 = CMat::zeros(n1, 2);
        for k in 0..kk {
            h1 += &a1_off[k] * re(gam[k]);
            h2 += &a2_off[k] * re(gam[k]);
        }
        let history = embed_rows(&(h1 * &self.ops.m2 * ia1), n1) + embed_cols(&(&self.ops.m1 * h2 * ia2), n2);
        let u_new = self.fac.solve(&(&self.ops.m1 * &self.u * &self.ops.m2 + history))?;

        let inv_rho = re(1.0 / rho);
        let rows = boundary_rows(&u_new) * inv_rho;
        let cols = boundary_cols(&u_new) * inv_rho;
        for k in 0..kk {
            let gk = re(p.g[k]);
            mem.a1[k] = (&rows + &a1_off[k]) * gk;
            mem.a2[k] = (&cols + &a2_off[k]) * gk;
        }
        for k in 0..kk {
            let c1 = corner(&a1_off[k]) * inv_rho;
            for kp in 0..kk {
                let idx = k * kk + kp;
                let mid = (c1 + mem.c[idx]) * re(p.g[kp]);
                mem.c[idx] = (corner(&mem.a2[kp]) * inv_rho + mid) * re(p.g[k]);
            }
        }
        Ok(u_new)
    }

    fn step_np_tr(&mut self) -> Result<CMat> {
        let p = self.pade.as_ref().expect("Pade constants of an NP solver");
        let kk = self.cfg.k;
        let (n1, n2) = (self.u.nrows(), self.u.ncols());
        let Memory::Np(mem) = &mut self.memory else {
            unreachable!("Pade memory")
        };
        let (ia1, ia2, rho) = (self.ia1, self.ia2, self.rho);
        let gam = &p.gamma_plus;
        let two = re(2.0);

        // half-step segment solves for the auxiliary fields
        let mut w1 = Vec::with_capacity(kk);
        let mut w2 = Vec::with_capacity(kk);
        for k in 0..kk {
            let s1 = (0..kk).fold(Matrix2::zeros(), |acc, kp| acc + mem.c[k * kk + kp] * re(gam[kp]));
            let rhs1 = &mem.a1[k] * &self.ops.m2 + corner_as_rows(&s1, n2) * ia2;
            w1.push(self.seg.rows(&rhs1)?);
            let s2 = (0..kk).fold(Matrix2::zeros(), |acc, q| acc + mem.c[q * kk + k] * re(gam[q]));
            let rhs2 = &self.ops.m1 * &mem.a2[k] + corner_as_cols(&s2, n1) * ia1;
            w2.push(self.seg.cols(&rhs2)?);
        }
        let a1_off: Vec<CMat> = w1.iter().zip(&mem.a1).map(|(w, a)| w * two - a).collect();
        let a2_off: Vec<CMat> = w2.iter().zip(&mem.a2).map(|(w, a)| w * two - a).collect();

        // half-step segment solves for the field traces
        let phi1_diag = boundary_rows(&self.u);
        let phi2_diag = boundary_cols(&self.u);
        let s1 = (0..kk).fold(Matrix2::zeros(), |acc, k| acc + corner(&mem.a2[k]) * re(gam[k]));
        let s2 = (0..kk).fold(Matrix2::zeros(), |acc, k| acc + corner(&mem.a1[k]) * re(gam[k]));
        let wphi1 = self.seg.rows(&(&phi1_diag * &self.ops.m2 + corner_as_rows(&s1, n2) * ia2))?;
        let wphi2 = self.seg.cols(&(&self.ops.m1 * &phi2_diag + corner_as_cols(&s2, n1) * ia1))?;
        // (Phi_off - Phi_diag) / 2 = W - Phi_diag
        let d1 = &wphi1 - &phi1_diag;
        let d2 = &wphi2 - &phi2_diag;

        let sum_gamma: f64 = gam.iter().sum();
        let mut h1 = &d1 * re(sum_gamma / rho);
        let mut h2 = &d2 * re(sum_gamma / rho);
        for k in 0..kk {
            let bk = re(0.5 * p.b_bar[k]);
            let hk = re(p.h[k]);
            h1 += (&a1_off[k] * hk + &mem.a1[k]) * bk;
            h2 += (&a2_off[k] * hk + &mem.a2[k]) * bk;
        }
        let history = embed_rows(&(h1 * &self.ops.m2 * ia1), n1) + embed_cols(&(&self.ops.m1 * h2 * ia2), n2);
        let v = self.fac.solve(&(&self.ops.m1 * &self.u * &self.ops.m2 + history))?;
        let u_new = &v * two - &self.u;

        let s = 2.0 / rho;
        let drive1 = boundary_rows(&v) + &d1;
        let drive2 = boundary_cols(&v) + &d2;
        let corner_a2_off: Vec<Matrix2<C64>> = (0..kk)
            .map(|k| corner(&mem.a2[k]) * re(p.h[k]) + corner(&wphi1) * re(s * p.g[k]))
            .collect();
        for k in 0..kk {
            mem.a1[k] = &a1_off[k] * re(p.h[k]) + &drive1 * re(s * p.g[k]);
            mem.a2[k] = &a2_off[k] * re(p.h[k]) + &drive2 * re(s * p.g[k]);
        }
        for k in 0..kk {
            let cw1 = corner(&w1[k]);
            for kp in 0..kk {
                let idx = k * kk + kp;
                let mid = mem.c[idx] * re(p.h[kp]) + cw1 * re(s * p.g[kp]);
                let drive = corner(&mem.a2[kp]) + corner_a2_off[kp];
                mem.c[idx] = mid * re(p.h[k]) + drive * re(p.g[k] / rho);
            }
        }
        Ok(u_new)
    }
}

impl Evolution for TbcSolver {
    fn step(&mut self) -> Result<()> {
        let u_new = match (self.cfg.family, self.cfg.stepper) {
            (TbcFamily::Cq, _) => self.step_cq()?,
            (TbcFamily::Np, Stepper::Tr) => self.step_np_tr()?,
            (TbcFamily::Np, _) => self.step_np_bdf1()?,
        };
        if u_new.iter().any(|v| !v.re.is_finite() || !v.im.is_finite()) {
            return Err(Error::Numerical(format!(
                "non-finite coefficients after step {}",
                self.steps + 1
            )));
        }
        self.u = u_new;
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
        self.state_breakdown().total()
    }

    fn warnings(&self) -> &[String] {
        &self.warnings
    }

    fn factor_count(&self) -> usize {
        self.op.factor_count()
    }
}
