//! Exact shadowing analysis for compact dynamical systems.
//!
//! The crate constructs shadowing points with explicit Lipschitz constants on
//! shift systems, runs the iterative refinement schemes behind h-shadowing,
//! periodic-point extraction, and preimage extraction, and computes the
//! chain-recurrence spectral decomposition of finite systems. Every distance
//! and every bound is an exact rational (or symbolic radical) comparison;
//! there is no floating point anywhere in a decision.

pub mod constructors;
pub mod decompose;
pub mod error;
pub mod lab;
pub mod metric;
pub mod orbits;
pub mod point;
pub mod rational;
pub mod refine;
pub mod systems;

pub use error::{Error, Result};
pub use rational::ExactReal;
