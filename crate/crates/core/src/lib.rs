//! Synthesis of piecewise-constant neural-ODE controls that steer particle
//! ensembles along a prescribed transport, with exact W2 certification.

pub mod error;
pub mod exec;
pub mod fields;
pub mod flow;
pub mod harness;
pub mod io;
pub mod linalg;
pub mod measures;
pub mod synthesis;
pub mod transport;

pub use error::{Error, Result};
