pub mod config;
pub mod controller;
pub mod distance;
pub mod dynamics;
pub mod error;
pub mod geometry;
pub mod planner;
pub mod sim;
pub mod solver;

pub use error::{Error, Result};
