//! Spectral solvers for the free Schrödinger equation `i u_t + Δu = 0` on a
//! rectangle with transparent boundary conditions.
//!
//! Two boundary treatments are provided:
//!
//! * [`hf`]: high-frequency approximate boundary conditions with corner
//!   conditions, realized by convolution quadrature or by Padé auxiliary
//!   equations;
//! * [`tbc`]: exact transparent boundary conditions, realized by two-time
//!   convolution quadrature or by the two-time Padé scheme with corner fields.
//!
//! Space is discretized by a Lobatto-Legendre Galerkin method ([`spectral`]);
//! every time step reduces to a Kronecker-structured linear system
//! ([`kron`]).

pub mod autonomous;
pub mod error;
pub mod exact;
pub mod harness;
pub mod hf;
pub mod kron;
pub mod rational;
pub mod spectral;
pub mod tbc;

pub use error::{Error, Result};

use spectral::CMat;

/// Common interface of the time-stepping engines.
pub trait Evolution {
    /// Advances the solution by one time step.
    fn step(&mut self) -> Result<()>;
    /// Current coefficient matrix.
    fn field(&self) -> &CMat;
    /// Number of completed steps.
    fn steps(&self) -> usize;
    /// Time step.
    fn dt(&self) -> f64;
    /// Number of complex scalars held as time-dependent boundary state.
    fn state_size(&self) -> usize;
    /// Number of global factorizations computed so far.
    fn factor_count(&self) -> usize;
    /// Diagnostics collected while setting up or running the engine.
    fn warnings(&self) -> &[String];

    /// Current time.
    fn time(&self) -> f64 {
        self.steps() as f64 * self.dt()
    }

    /// Advances `n` steps, calling `observe(step, field)` after each one.
    fn run(&mut self, n: usize, mut observe: impl FnMut(usize, &CMat) -> Result<()>) -> Result<()>
    where
        Self: Sized,
    {
        for _ in 0..n {
            self.step()?;
            observe(self.steps(), self.field())?;
        }
        Ok(())
    }
}
