//! Receding-horizon ergodic exploration: coverage, multi-agent coordination
//! and bearing-only target localization.

pub mod error;
pub mod cli;
pub mod controller;
pub mod dynamics;
pub mod fourier;
pub mod information_density;
pub mod multi_agent;
pub mod scenario;
pub mod target_estimation;

pub use error::{Error, Result};
