pub mod cli;
pub mod error;
pub mod grading;
pub mod involutions;
pub mod kak;
pub mod matcore;
pub mod pauli;
pub mod schemes;
pub mod synth;
pub mod torus;

pub use error::{Error, Result};
