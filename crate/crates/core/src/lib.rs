pub mod config;
pub mod error;
pub mod hydraulics;
pub mod lagoon;
pub mod optimizers;
pub mod rl;
pub mod schemes;
pub mod tides;

pub use error::{Error, Result};
