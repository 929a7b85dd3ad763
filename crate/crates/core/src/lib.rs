//! Simulation and analysis of Ordered-Response protocols when every message
//! delay is an independent exponential random variable.
//!
//! - [`kernel`]: deterministic discrete-event core and seeded random streams.
//! - [`protocols`]: message chain, CORE, PA-CORE and their hybrids.
//! - [`analytics`]: closed-form correctness probabilities and response-time bounds.
//! - [`experiments`]: Monte Carlo estimators and bound comparisons.
//! - [`report`]: CSV / JSON output.

pub mod analytics;
pub mod experiments;
pub mod kernel;
pub mod protocols;
pub mod report;
