//! Certification, optimization and approximation of polynomial norms with
//! sum-of-squares programming.

pub mod approx;
pub mod certify;
pub mod cli;
pub mod conic;
pub mod error;
pub mod forms;
pub mod jsr;
pub mod sampling;
pub mod sos;
pub mod tolerances;

pub use error::{Error, Result};
pub use forms::{Biform, Form, MultiIndex, PolyMatrix};
