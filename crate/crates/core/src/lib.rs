pub mod curve;
pub mod error;
pub mod f2;
pub mod local_descent;
pub mod padic;
pub mod selmer;
pub mod suites;
pub mod twist_lab;
pub mod zarith;

pub use error::{Error, Result};
