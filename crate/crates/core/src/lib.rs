//! Overlap times and overlap counts in infinite-server queues.
//!
//! The crate has two halves that check each other:
//!
//! * [`analytic`] evaluates the closed-form laws: steady-state overlap-time
//!   tails between customers `k` apart, the distribution of the number of
//!   customers a tagged arrival overlaps with, and residual overlap counts
//!   restricted to overlaps of at least `δ` time units.
//! * [`sim`] runs seeded GI/G/∞ simulations and extracts the same quantities
//!   empirically; [`verify`] compares the two and produces pass/fail reports.
//!
//! [`dists`] is the numerical substrate shared by both: distribution
//! descriptions, incomplete gamma functions, quadrature-backed expectations
//! and sampling.

pub mod analytic;
pub mod dists;
mod error;
pub mod quad;
pub mod rng;
pub mod sim;
pub mod special;
pub mod verify;

pub use error::{Error, Result};
