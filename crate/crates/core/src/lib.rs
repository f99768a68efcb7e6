//! Count-matrix factorization with negative-binomial factor priors.
//!
//! The crate models a term-by-document count matrix as Poisson with rate
//! `Phi * Theta` and puts a beta-negative-binomial hierarchy on the factor
//! scores, so the number of factors a corpus actually uses is inferred
//! rather than fixed. It provides:
//!
//! * the underlying random-measure machinery (`bnb`): finite approximations
//!   of the beta-process Levy measure, atom draws, and a buffet-style
//!   customer simulator;
//! * the factorization state and latent count allocation (`model`);
//! * Gibbs and EM inference for five model variants (`samplers`);
//! * held-out splitting and per-word perplexity (`eval`);
//! * deterministic labeled RNG streams (`rng`), validated sampling
//!   primitives (`dist`), and the special functions the conditionals need
//!   (`special`).
//!
//! Everything stochastic draws from an explicit [`rng::RngStream`]; a fixed
//! seed replays a run exactly.

pub mod bnb;
pub mod dist;
pub mod error;
pub mod eval;
pub mod model;
pub mod quadrature;
pub mod rng;
pub mod samplers;
pub mod special;
pub mod synthetic;

pub use error::{Error, Result};
