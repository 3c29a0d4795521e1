#![no_std]
extern crate alloc;
#[cfg(test)]
extern crate std;

pub mod error;
pub mod experiment;
pub mod baselines;
pub mod datasets;
pub mod dbacs;
pub mod linalg;
pub mod matching;
pub mod metrics;
pub mod nn;

pub use error::{Error, Result};
