//! Planar in-hand manipulation with fingertip range sensing.
//!
//! A two-fingered hand with lockable joints pushes a cylinder across its
//! workspace. Eight fingertip range sensors feed a particle filter that
//! tracks the cylinder; a sampling-based predictive controller picks motor
//! commands and brake configurations; an experiment harness compares
//! full-range sensing against contact-range sensing and an external
//! ground-truth reference.

pub mod config;
pub mod controller;
pub mod error;
pub mod filter;
pub mod geom;
pub mod hand;
pub mod harness;
pub mod sensor;
pub mod stats;
pub mod world;

pub use config::Config;
pub use error::{Error, Result};
