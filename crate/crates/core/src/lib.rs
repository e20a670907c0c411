pub mod birkhoff;
pub mod demo;
pub mod error;
pub mod integrable;
pub mod io;
pub mod involutions;
pub mod iwasawa;
pub mod linalg;
pub mod loops;
pub mod verify;

pub use error::{Error, Result};
