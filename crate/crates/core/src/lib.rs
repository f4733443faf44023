//! Simulation, data generation and surrogate training for a hydraulically
//! actuated flexible boom.

pub mod acquisition;
pub mod config;
pub mod dynamics;
pub mod error;
pub mod fem;
pub mod hydraulics;
pub mod pipeline;
pub mod seeds;
pub mod slide;
pub mod surrogate;

pub use config::Config;
pub use error::{Error, Result};
