//! Discrete Stieltjes classes for log-lattice distributions.
//!
//! For a distribution `p` on the nonnegative integers and a base `a > 1`,
//! the law of `Y = a^X` may share its full moment sequence with a whole
//! family of other laws `g = p (1 + eps h)`. This crate builds the sequence
//! `h`, certifies that the moment sums vanish, and decides for which bases
//! such families exist.
//!
//! All verification runs on [`numeric::Scalar`], which is either an exact
//! rational or a ball with a certified error radius.

pub mod classifier;
pub mod distributions;
mod error;
pub mod numeric;
pub mod qseries;
pub mod stieltjes;

pub use error::{Error, Result};
pub use numeric::Scalar;
