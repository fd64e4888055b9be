pub mod backbone;
pub mod cli;
pub mod error;
pub mod eval;
pub mod manifest;
pub mod optim;
pub mod pairgen;
pub mod patches;
pub mod serialize;
pub mod siamese;
pub mod synth;
pub mod tensor;
pub mod trainer;

pub use error::{Error, Result};
