//! Counterfactual regression with balanced representations.
//!
//! The crate estimates individual treatment effects from observational data
//! by learning representations under which the treated and control groups
//! look alike. Two learners are provided: a simplex-constrained feature
//! reweighting trained by alternating subgradient descent ([`blr`]) and a
//! small feedforward network trained with RMSProp ([`bnn`]), both penalized
//! by a closed-form linear discrepancy between the factual and counterfactual
//! empirical distributions ([`disc`]).
//!
//! Supporting machinery: dense linear solvers ([`linear`]), reference
//! estimators ([`baselines`]), evaluation metrics and an empirical
//! generalization-bound diagnostic ([`metrics`], [`bound`]), and
//! semi-synthetic benchmark generators ([`simulate`]).

pub mod baselines;
pub mod blr;
pub mod bnn;
pub mod bound;
pub mod data;
pub mod disc;
pub mod error;
pub mod linear;
pub mod metrics;
pub mod seeds;
pub mod simulate;

pub use data::{Dataset, NearestNeighborMap};
pub use error::{Error, Result};
