// Negated float comparisons are used on purpose so that NaN is rejected.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod approx;
pub mod detection;
pub mod error;
pub mod intervals;
pub mod negbin;
pub mod probability;
mod roots;
pub mod simulate;
pub mod specfun;

pub use error::{Error, Result};
pub use probability::Probability;
