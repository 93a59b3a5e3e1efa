pub mod cwsvm;
pub mod data;
pub mod ensemble;
pub mod error;
pub mod evaluation;
pub mod fmt;
pub mod harness;
pub mod kernel;
pub mod methods;
pub mod rng;
pub mod tuning;

pub use error::{Error, Result};
