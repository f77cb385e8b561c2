//! Estimating a location parameter from one bit per sample.
//!
//! The crate covers three encoding regimes for a symmetric log-concave
//! location family `f(x - theta)`:
//!
//! * distributed: each bit compares its sample against a fixed or randomly
//!   drawn threshold ([`encoding::encode_fixed_threshold`],
//!   [`encoding::sample_thresholds`]);
//! * one-round adaptive: a first batch of bits sets a single new threshold
//!   for the rest ([`encoding::run_one_round`]);
//! * fully adaptive: sign stochastic gradient descent on `E|X - theta|`
//!   ([`encoding::run_adaptive_sgd`]).
//!
//! [`estimation`] turns bit streams back into estimates, [`bounds`] evaluates
//! the matching lower bounds and precision functionals, [`density_opt`]
//! designs threshold densities, [`verify`] holds brute-force numeric checks
//! of the underlying inequalities, and [`harness`] runs seeded Monte Carlo
//! risk experiments.

pub mod bounds;
pub mod density_opt;
pub mod distributions;
pub mod encoding;
pub mod error;
pub mod estimation;
pub mod harness;
pub mod quadrature;
pub mod seed;
pub mod verify;

pub use distributions::{FamilyKind, LocationFamily};
pub use error::{Error, Result};
