pub mod beamhop;
pub mod error;
pub mod geometry;
pub mod handover;
pub mod linkbudget;
pub mod oracles;
pub mod rng;
pub mod sim;
pub mod spectrum;
pub mod traffic;

pub use error::{Error, Result};
