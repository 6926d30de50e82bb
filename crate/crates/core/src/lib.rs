pub mod bec;
pub mod error;
pub mod fock;
pub mod harness;
pub mod optical;
pub mod phase_dist;
pub mod rng;
pub mod scattering;
pub mod special;

pub use error::{Error, Result};
