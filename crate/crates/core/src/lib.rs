//! Nonlocal games played with almost-commuting quantum strategies.
//!
//! * [`operator`]: Hermitian matrix calculus (spectra, square roots, norms, states).
//! * [`game`]: the `(π, D)` data model and its file format.
//! * [`strategy`]: POVMs, strategies, the bullet product, values and defects.
//! * [`optimize`]: classical values and lower-bound searches over strategies.
//! * [`semidecide`]: enumeration of rational measurement pairs and certified
//!   acceptance with replayable witnesses.

pub mod error;
pub mod game;
pub mod operator;
pub mod optimize;
pub mod sample;
pub mod semidecide;
pub mod strategy;
pub mod textfmt;

pub use error::{Error, Result};
