//! Recovery of the initial state of a 2-D incompressible flow from lateral
//! boundary measurements.
//!
//! The unknown time-independent body force is eliminated by differentiating
//! the momentum balance in time; the resulting system is projected onto a
//! Legendre polynomial-exponential basis in time, which turns the space-time
//! problem into a coupled elliptic system for the expansion coefficients.
//! That system, posed with Cauchy data on the boundary, is solved by a
//! Picard iteration of Carleman-weighted linear least-squares problems.
//!
//! The crate is organised around the pipeline stages:
//!
//! - [`timebasis`]: the basis `Ψ_n(t) = e^t Q_n(t)`, its reduction matrices
//!   and the projection of sampled time signals onto it,
//! - [`grid`]: the uniform Cartesian grid on `(-1,1)²` with second-order
//!   finite-difference operators and boundary traces,
//! - [`forward`]: the semi-implicit flow solver used to synthesise boundary
//!   data, plus the multiplicative noise model,
//! - [`reduction`]: projected boundary data and the nonlinear couplings of
//!   the reduced system,
//! - [`carleman`]: the weighted least-squares stages and the Picard loop,
//! - [`reconstruct`]: evaluation of the recovered fields at `t = 0` and the
//!   error metrics,
//! - [`pipeline`] / [`config`] / [`testcase`]: run orchestration, file
//!   artifacts and the bundled analytic test cases.
//!
//! See the `examples/` directory for one runnable program per capability;
//! the `hindcast` binary exposes the same flows as subcommands.

pub mod carleman;
pub mod config;
pub mod error;
pub mod forward;
pub mod grid;
pub mod lsq;
pub mod pipeline;
pub mod reconstruct;
pub mod reduction;
pub mod testcase;
pub mod timebasis;

pub use error::Error;

/// Crate-wide result alias.
pub type Result<T> = std::result::Result<T, Error>;
