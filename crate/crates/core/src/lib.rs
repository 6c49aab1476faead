//! Simulation and analysis of downlink massive-MIMO cellular networks with
//! randomly deployed base stations.
//!
//! The crate has two halves that cross-validate each other:
//!
//! * a Monte Carlo simulator ([`geometry`], [`channel`], [`precoding`],
//!   [`sir`], [`montecarlo`]) that samples Poisson network realizations and
//!   measures the SIR of a typical user under cell-edge-unaware (CEU-ZF) and
//!   cell-edge-aware (CEA-ZF) zero-forcing precoding, and
//! * closed-form machinery ([`large_system`], [`analysis`]) that evaluates
//!   the corresponding large-system deterministic equivalents and
//!   stochastic-geometry coverage integrals.
//!
//! Every analytical expression is exercised against an independent simulated
//! or brute-force oracle in the test suites; `tests/acceptance.rs` runs the
//! end-to-end agreement checks.

pub mod analysis;
pub mod channel;
pub mod error;
pub mod geometry;
pub mod large_system;
pub mod montecarlo;
pub mod precoding;
pub mod sir;
pub mod validation;

pub use error::Error;

/// Crate-wide result alias.
pub type Result<T> = std::result::Result<T, Error>;
