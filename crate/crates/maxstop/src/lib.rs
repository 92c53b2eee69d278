//! Optimal stopping of the running maximum of a one-dimensional diffusion.

pub mod diffusion;
pub mod error;
pub mod expr;
pub mod func;
pub mod ode;
pub mod problem;
pub mod quad;
pub mod real;
pub mod roots;
pub mod special;

pub use error::{Error, Result};
pub use real::Real;
