//! # driftlab
//!
//! Simulation and analysis toolkit for online stochastic learners that track
//! drifting optima.
//!
//! The library covers three layers:
//!
//! * **Models** ([`drift`], [`mod@env`]): random-walk drift of the optimal
//!   parameter, plus linear-regression and logistic data-generating processes
//!   built on top of it.
//! * **Algorithms** ([`learners`], [`graphs`]): one-step update rules for LMS,
//!   stochastic gradient descent, diffusion adapt-then-combine over a network,
//!   and multitask diffusion with Laplacian regularization, together with the
//!   graph machinery (combination matrices, Perron vectors, mixing rates,
//!   Laplacians, smooth signal synthesis).
//! * **Analysis** ([`bounds`], [`harness`]): mean-square contraction
//!   certificates (gamma, delta) per algorithm, steady-state and transient
//!   tracking bounds driven by those certificates, and a deterministic
//!   Monte Carlo harness that measures mean-square deviation trajectories,
//!   sweeps step-sizes, and fits dB-per-decade slopes.
//!
//! All randomness flows through seeded ChaCha streams; replica seeds are
//! derived from a master seed so results are independent of thread count and
//! scheduling order.

pub mod bounds;
pub mod drift;
pub mod env;
pub mod error;
pub mod graphs;
pub mod harness;
pub mod learners;
pub mod rng;

pub use error::{Error, Result};
