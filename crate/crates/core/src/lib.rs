//! Partially observed optimal stopping by simulation.
//!
//! The library combines a minimal-variance branching particle filter with
//! regression Monte Carlo backward induction to price Bermudan stopping
//! problems when the payoff-relevant state is seen only through a noisy
//! observation process. Closed-form Kalman–Bucy filtering and explicit
//! finite-difference free-boundary solvers provide benchmarks on two worked
//! examples: a linear diffusion with mean-reverting Gaussian drift, and the
//! Stein–Stein stochastic-volatility model under discrete observations.
//!
//! Modules:
//! * [`model`] — state/observation diffusions and Euler path simulation;
//! * [`pfilter`] — the branching particle filter;
//! * [`kalman`] — Riccati equation, conditional-mean recursion, closed-form
//!   conditional payoff;
//! * [`rmc`] — basis evaluation, least squares, backward induction;
//! * [`pde`] — explicit finite-difference Bermudan solvers;
//! * [`bench`] — experiment configuration, benchmark tables, CLI.

pub mod bench;
pub mod error;
pub mod kalman;
pub mod model;
pub mod num;
pub mod pde;
pub mod pfilter;
pub mod quad;
pub mod rmc;
pub mod rng;

pub use error::{Error, Result};
