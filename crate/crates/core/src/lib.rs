pub mod cli;
pub mod cx;
pub mod error;
pub mod io;
pub mod kernels;
pub mod linalg;
pub mod nmf;
pub mod pca;
pub mod report;
pub mod rng;
pub mod runtime;

pub use error::{Error, Result};
