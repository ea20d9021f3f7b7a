//! Entanglement broadcasting with universal quantum cloners.
//!
//! Local cloners copy each half of `alpha|00> + beta|11>`; the crate builds
//! the cloner isometries, runs the broadcast on the full post-cloning state
//! and decides separability of every output pair with the partial-transpose
//! test, next to the closed-form output states and alpha² ranges.

pub mod error;
pub mod linalg;
pub mod cloners;
pub mod states;
pub mod separability;
pub mod broadcast;
pub mod cli;

pub use error::{Error, Result};
