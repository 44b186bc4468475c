//! The Padé-realized high-frequency system as one autonomous linear ODE.
//!
//! With the state `V = (vec U, vec A_{0,1}, .., vec A_{K,1}, vec A_{0,2}, ..,
//! vec A_{K,2})` the semi-discrete system becomes `V' = M V`. Besides the
//! diagonal, `M` is nonzero only in its first block row (the boundary terms of
//! the field equation) and its first block column (the boundary traces that
//! drive the auxiliary equations). The matrix serves as an independent oracle
//! for the fully discrete Padé steppers of [`crate::hf`] and for measuring
//! the spectral abscissa of small systems.

use std::f64::consts::PI;

use nalgebra::DVector;

use crate::error::{Error, Result};
use crate::rational::{pade_sqrt, PadeSqrt, Stepper};
use crate::spectral::{assemble_ops, to_complex, CMat, DomainMap, C64};

/// Largest per-direction degree accepted by the dense assembly.
pub const MAX_DEGREE: usize = 16;

/// Dense autonomous system `V' = M V`.
#[derive(Clone, Debug)]
pub struct AutonomousSystem {
    /// The block matrix.
    pub matrix: CMat,
    /// Padé data used for the assembly.
    pub pade: PadeSqrt,
    /// Size `(N1+1)(N2+1)` of one block.
    pub block: usize,
    pub n1: usize,
    pub n2: usize,
}

fn kron(b: &CMat, a: &CMat) -> CMat {
    b.kronecker(a)
}

impl AutonomousSystem {
    /// Number of blocks, `2K + 3`.
    pub fn blocks(&self) -> usize {
        2 * self.pade.k + 3
    }

    /// Block index of `A_{k,p}` for `k = 0..=K`, `p = 1, 2`.
    pub fn aux_block(&self, k: usize, p: usize) -> usize {
        1 + (p - 1) * (self.pade.k + 1) + k
    }

    /// Block `(row, col)` of the matrix.
    pub fn block_at(&self, row: usize, col: usize) -> CMat {
        let n = self.block;
        self.matrix.view((row * n, col * n), (n, n)).into_owned()
    }

    /// State vector holding `u` and zero auxiliary fields.
    pub fn initial_state(&self, u: &CMat) -> DVector<C64> {
        let mut v = DVector::zeros(self.matrix.nrows());
        v.rows_mut(0, self.block).copy_from_slice(u.as_slice());
        v
    }

    /// Field block of a state vector as a coefficient matrix.
    pub fn field_of(&self, v: &DVector<C64>) -> CMat {
        CMat::from_column_slice(self.n1 + 1, self.n2 + 1, &v.as_slice()[..self.block])
    }

    /// Auxiliary block `A_{k,p}` of a state vector.
    pub fn aux_of(&self, v: &DVector<C64>, k: usize, p: usize) -> CMat {
        let start = self.aux_block(k, p) * self.block;
        CMat::from_column_slice(self.n1 + 1, self.n2 + 1, &v.as_slice()[start..start + self.block])
    }
}

/// Assembles `M` for domain `dom`, degrees `n1, n2` and Padé order `k`.
pub fn assemble_autonomous(dom: &DomainMap, n1: usize, n2: usize, k: usize) -> Result<AutonomousSystem> {
    if n1 > MAX_DEGREE || n2 > MAX_DEGREE {
        return Err(Error::SizeGuard(format!(
            "dense autonomous assembly limited to N <= {MAX_DEGREE}, got {n1} x {n2}"
        )));
    }
    let pade = pade_sqrt(k)?;
    let o1 = assemble_ops(n1)?;
    let o2 = assemble_ops(n2)?;
    let (m1, s1, l1) = (to_complex(&o1.mass), to_complex(&o1.stiff), to_complex(&o1.lambda));
    let (m2, s2, l2) = (to_complex(&o2.mass), to_complex(&o2.stiff), to_complex(&o2.lambda));
    let i1 = CMat::identity(n1 + 1, n1 + 1);
    let i2 = CMat::identity(n2 + 1, n2 + 1);
    let singular = || Error::Singular {
        condition: f64::INFINITY,
    };
    let m1_inv = m1.clone().try_inverse().ok_or_else(singular)?;
    let m2_inv = m2.clone().try_inverse().ok_or_else(singular)?;
    // -i (M2 (x) M1)^{-1}
    let pinv = kron(&m2_inv, &m1_inv) * C64::new(0.0, -1.0);

    let (b1, b2) = (dom.beta1, dom.beta2);
    let (r1, r2) = (b1.sqrt(), b2.sqrt());
    let em = C64::from_polar(1.0, -PI / 4.0);
    let ep = C64::from_polar(1.0, PI / 4.0);
    let c = |v: f64| C64::new(v, 0.0);

    let field = kron(&m2, &s1) * c(b1)
        + kron(&s2, &m1) * c(b2)
        + (kron(&m2, &l1) * c(r1) + kron(&l2, &m1) * c(r2)) * (em * pade.b0)
        + kron(&l2, &l1) * c(0.75 * r1 * r2);

    let n = (n1 + 1) * (n2 + 1);
    let nb = 2 * k + 3;
    let mut matrix = CMat::zeros(n * nb, n * nb);
    let mut put = |row: usize, col: usize, blk: &CMat| {
        matrix.view_mut((row * n, col * n), (n, n)).copy_from(blk);
    };
    put(0, 0, &(&pinv * field));

    let m2_i1 = kron(&m2, &i1);
    let s2_i1 = kron(&s2, &i1);
    let i2_m1 = kron(&i2, &m1);
    let i2_s1 = kron(&i2, &s1);
    let drive1 = kron(&i2, &l1);
    let drive2 = kron(&l2, &i1);
    let ident = CMat::identity(n, n);

    for p in 1..=2usize {
        let base = 1 + (p - 1) * (k + 1);
        let (mass_like, stiff_like, scale_b, scale_d, drive) = if p == 1 {
            (&m2_i1, &s2_i1, r1, r1 * b2, &drive1)
        } else {
            (&i2_m1, &i2_s1, r2, b1 * r2, &drive2)
        };
        // A_{0,p}: + d0 e^{i pi/4} / 2 * scale_d * stiff_like
        put(0, base, &(&pinv * stiff_like * (ep * (0.5 * pade.d0 * scale_d))));
        put(base, 0, drive);
        for kk in 1..=k {
            let blk = mass_like * (-em * (pade.b[kk - 1] * scale_b))
                + stiff_like * (-ep * (0.5 * pade.d[kk - 1] * scale_d));
            put(0, base + kk, &(&pinv * blk));
            put(base + kk, 0, drive);
            let eta2 = pade.eta[kk - 1] * pade.eta[kk - 1];
            put(base + kk, base + kk, &(&ident * c(-eta2)));
        }
    }
    Ok(AutonomousSystem {
        matrix,
        pade,
        block: n,
        n1,
        n2,
    })
}

/// Factored one-step map of a linear autonomous ODE.
#[derive(Clone, Debug)]
pub struct ReferenceIntegrator {
    lu: nalgebra::LU<C64, nalgebra::Dyn, nalgebra::Dyn>,
    explicit: Option<CMat>,
}

impl ReferenceIntegrator {
    /// Backward Euler `(I - dt M) V' = V` or the trapezoidal rule
    /// `(I - dt M/2) V' = (I + dt M/2) V`.
    pub fn new(matrix: &CMat, dt: f64, scheme: Stepper) -> Result<Self> {
        let n = matrix.nrows();
        let id = CMat::identity(n, n);
        let (lhs, explicit) = match scheme {
            Stepper::Bdf1 => (&id - matrix * C64::new(dt, 0.0), None),
            Stepper::Tr => {
                let half = matrix * C64::new(0.5 * dt, 0.0);
                (&id - &half, Some(&id + &half))
            }
            Stepper::Bdf2 => {
                return Err(Error::Config("reference integrator supports bdf1 and tr".into()))
            }
        };
        let lu = lhs.lu();
        if !lu.is_invertible() {
            return Err(Error::Singular {
                condition: f64::INFINITY,
            });
        }
        Ok(Self { lu, explicit })
    }

    /// One step from `v`.
    pub fn step(&self, v: &DVector<C64>) -> Result<DVector<C64>> {
        let rhs = match &self.explicit {
            Some(e) => e * v,
            None => v.clone(),
        };
        self.lu.solve(&rhs).ok_or(Error::Singular {
            condition: f64::INFINITY,
        })
    }
}

/// One step of `scheme` for `V' = M V`.
pub fn reference_step(matrix: &CMat, v: &DVector<C64>, dt: f64, scheme: Stepper) -> Result<DVector<C64>> {
    if v.len() != matrix.nrows() {
        return Err(Error::Dimension(format!(
            "state has length {}, system has size {}",
            v.len(),
            matrix.nrows()
        )));
    }
    ReferenceIntegrator::new(matrix, dt, scheme)?.step(v)
}

/// Largest real part of the eigenvalues of `matrix`.
pub fn spectral_abscissa(matrix: &CMat) -> Result<f64> {
    let n = matrix.nrows();
    if n != matrix.ncols() {
        return Err(Error::Dimension("spectral abscissa needs a square matrix".into()));
    }
    if n > (2 * 30 + 3) * (MAX_DEGREE + 1) * (MAX_DEGREE + 1) {
        return Err(Error::SizeGuard(format!("matrix of size {n} is too large for dense eigenvalues")));
    }
    let schur = nalgebra::linalg::Schur::try_new(matrix.clone(), 1e-14, 10_000)
        .ok_or_else(|| Error::Eigen("Schur iteration did not converge".into()))?;
    let eig = schur
        .eigenvalues()
        .ok_or_else(|| Error::Eigen("eigenvalues unavailable".into()))?;
    Ok(eig.iter().map(|z| z.re).fold(f64::NEG_INFINITY, f64::max))
}
