pub mod cli;
pub mod conditions;
pub mod coupling;
pub mod error;
pub mod exponent;
pub mod gallery;
pub mod generator;
pub mod law;
pub mod levy;
pub mod model;
pub mod quad;
pub mod rates;
pub mod rng;
pub mod sde;
pub mod stats;

pub use error::{Error, Result};
