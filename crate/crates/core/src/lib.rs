//! Desk-scale numerical laboratory for boundary layers in singularly
//! perturbed elliptic problems whose diffusion coefficient depends on a
//! domain average of the solution, under Robin boundary conditions.
//!
//! The crate builds the boundary-layer profiles and expansion coefficients,
//! solves the full problem on radially symmetric domains through the
//! consistency-map fixed point, and verifies the predicted convergence
//! orders empirically.
//!
//! Module map:
//! * [`nonlinearity`] — the `(f, q, A)` family registry, validation, and the
//!   scalar transforms `F`, `Q_F`, `Q~_F`, `G`.
//! * [`profiles`] — layer profiles `W`, `Phi`, `Psi`, decay envelopes,
//!   moments, and the expansion functionals.
//! * [`geometry`] — radial domains: measures, curvatures, tube volumes,
//!   coarea integration.
//! * [`asymptotics`] — expansion coefficients `B1`, `B2`, interior and
//!   boundary predictions.
//! * [`solver`] — the reference finite-difference solver and the
//!   consistency-map root finding.
//! * [`verification`] — convergence-order sweeps and pass/fail reports.
//! * [`problem_file`] — the flat key-value problem format used by the CLI.

pub mod asymptotics;
pub mod error;
pub mod fixtures;
pub mod geometry;
pub mod grid;
pub mod nonlinearity;
pub mod ode;
pub mod problem_file;
pub mod profiles;
pub mod quad;
pub mod rootfind;
pub mod solver;
pub mod verification;

pub use error::{Error, Result};
