//! Exact solvers for optimal linear contracts when an agent picks a set of
//! costly hidden actions and the principal only observes success or failure.
//!
//! All arithmetic is exact ([`Rational`]); every fast path has an exhaustive
//! counterpart that tests use as an oracle.

pub mod approx;
pub mod contract;
pub mod demand;
pub mod error;
pub mod functions;
pub mod generators;
pub mod numeric;
pub mod robust;

pub use error::{Error, Result};
pub use functions::{ActionSet, FunctionClass, Instance, Matroid, SuccessFunction};
pub use numeric::{BitPrecision, Rational};
