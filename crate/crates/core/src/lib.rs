//! Laboratory for Markovian random evolutions in `R^n`.
//!
//! A particle moves with speed `v(θ) = c(θ)/ε + c1(θ)` along the unit
//! direction `s(θ)`; the direction is redrawn from the uniform law on the
//! sphere at the epochs of a Poisson process of intensity `ε^{-2}`. As
//! `ε → 0` the position converges weakly to a diffusion with drift
//! `E[c1 s]` and generator `Σ A_ij ∂_ij`, `A = E[c² s s^T]`.
//!
//! - [`sphere`]: chart, surface measure, quadrature, uniform sampling
//! - [`profiles`]: velocity profiles and balance checks
//! - [`operator_lab`]: the generator algebra on a quadrature grid
//! - [`limits`]: drift and diffusion coefficients of the limit
//! - [`simulator`]: exact event-driven path simulation
//! - [`stats`]: moment summaries, KS tests, convergence sweeps

#![allow(clippy::needless_range_loop, clippy::neg_cmp_op_on_partial_ord)]

pub mod error;
pub mod limits;
pub mod operator_lab;
pub mod profiles;
pub mod simulator;
pub mod sphere;
pub mod stats;

pub use error::{Result, RevolveError};
