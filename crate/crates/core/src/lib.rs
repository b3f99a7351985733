pub mod error;
pub mod eval;
pub mod geom;
pub mod logs;
pub mod magmodel;
pub mod pipeline;
pub mod seeds;
pub mod simgait;

pub use error::{Error, Result};
