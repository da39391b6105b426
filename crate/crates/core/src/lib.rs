//! Period functions of planar polynomial Hamiltonian centers and the
//! detection of their critical periods.
//!
//! A system is `x' = f(y, eps)`, `y' = -g(x, eps)` with Hamiltonian
//! `H = F(y) + G(x)`. The crate builds the polynomials exactly, finds the
//! critical energies of the unperturbed skeleton, evaluates the period
//! function by integration and by quadrature, and locates its extrema.

pub mod critical;
pub mod energy;
pub mod error;
pub mod export;
pub mod orbit;
pub mod poly;
pub mod system;

pub use error::{Error, Result};
pub const VERSION: &str = env!("CARGO_PKG_VERSION");
