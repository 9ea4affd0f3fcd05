pub mod cli;
pub mod data;
pub mod error;
pub mod eval;
pub mod geweke;
pub mod kernels;
pub mod model;
pub mod pipeline;
pub mod ranking;
pub mod synth;
pub mod trace_io;

pub use error::{Error, Result};
