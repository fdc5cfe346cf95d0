pub mod abc;
pub mod bench;
pub mod error;
pub mod mlmc;
pub mod models;
pub mod rng;
pub mod samplers;

pub use error::{Error, Result};
