pub mod analysis;
pub mod error;
pub mod model;
pub mod qdyn;
pub mod sim;

pub use error::{Error, Result};
