//! Single-qubit measurement-based feedback: unconditional and conditioned
//! dynamics under homodyne monitoring, Fisher-information machinery for qubit
//! states, and precision bounds for estimating detector efficiency and qubit
//! frequency.
//!
//! Module map:
//!
//! - [`qubit`]: exact 2×2 complex algebra, density matrices, Bloch vectors, POVMs.
//! - [`dynamics`]: master-equation generators with Markovian feedback, closed-form
//!   and RK4 evolution.
//! - [`trajectories`]: Euler–Maruyama stochastic master equation, photocurrent
//!   records and seeded ensembles.
//! - [`fisher`]: classical Fisher information, QFI (pure, spectral, 2×2 and Bloch
//!   matrix forms), SLD, Cramér–Rao bounds.
//! - [`estimation`]: efficiency and frequency precision bounds, their optima over
//!   interrogation time and feedback gain.
//! - [`optimize`]: grid-seeded Nelder–Mead minimizer used by [`estimation`].

pub mod dynamics;
pub mod error;
pub mod estimation;
pub mod fisher;
pub mod optimize;
pub mod qubit;
pub mod trajectories;

pub use error::{Error, Result};
pub use num_complex::Complex64 as C64;
