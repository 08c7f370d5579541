//! Estimation of unnormalized statistical models through Bregman divergences.
//!
//! A single cost family, built from a strictly convex generator Ψ or
//! equivalently from a loss pair (S₀, S₁), covers several estimators for
//! models that do not integrate (or sum) to one:
//!
//! | Estimator | Entry point |
//! |-----------|-------------|
//! | importance-weighted direct matching | [`estimators::direct_matching_objective`] |
//! | noise-contrastive family | [`estimators::nce_family_objective`] |
//! | data-dependent noise | [`estimators::data_dependent_noise_objective`] |
//! | ratio matching | [`estimators::ratio_matching_objective`] |
//! | score matching | [`estimators::score_matching_objective`] |
//! | general score-function matching | [`estimators::general_score_function_objective`] |
//! | stagewise (boosted) product of experts | [`estimators::boosting_fit`] |
//!
//! Every objective is a deterministic function of the parameter vector that
//! returns its value and gradient; [`optimize::minimize`] turns it into an
//! estimate. The [`experiments`] module reproduces the Boltzmann machine and
//! boosted ICA studies as CSV tables.
//!
//! ```
//! use bregest::bregman::{bregman_divergence, ConvexGenerator};
//!
//! let d = bregman_divergence(&ConvexGenerator::square(), 2.0, 1.0).unwrap();
//! assert!((d - 1.0).abs() < 1e-12);
//! ```

#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod bregman;
pub mod error;
pub mod estimators;
pub mod experiments;
pub mod models;
pub mod numeric;
pub mod optimize;
pub mod sample;
pub mod sampling;
pub mod validation;

pub use error::{Error, Result};
pub use sample::Sample;
