//! Metropolis chains on lattice boxes: spectral gaps, weighted-path
//! certificates, test-function upper bounds and mixing times.
//!
//! The crate is organised bottom-up:
//!
//! * [`chain`] builds the nearest-neighbour Metropolis kernel for a positive
//!   target on a box and exposes its Dirichlet form.
//! * [`families`] discretizes the parametrized density families and supplies
//!   the matching test functions.
//! * [`spectral`] computes the gap exactly (tridiagonal, dense or Lanczos).
//! * [`pathbound`] turns a path system plus edge weights into a lower bound.
//! * [`mixing`] computes total-variation and uniform mixing times.
//! * [`bench`] runs parameter sweeps, writes CSV and fits scaling exponents.

pub mod bench;
pub mod chain;
mod error;
pub mod families;
pub mod mixing;
pub mod numeric;
pub mod pathbound;
pub mod spectral;

pub use error::{Error, Result};
