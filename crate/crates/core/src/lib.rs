pub mod env;
pub mod error;
pub mod eval;
pub mod gaussian;
pub mod learners;
pub mod policy;
pub mod trajopt;

pub use error::{Error, Result};
