//! Core of an on-demand satellite operations platform: orbit and access
//! geometry, pass and imaging-opportunity search, the session database,
//! the command-template compiler, and simulated ground-station automation.

pub mod agent;
pub mod astro;
pub mod config;
pub mod error;
pub mod forecast;
pub mod geometry;
pub mod jobs;
pub mod model;
pub mod passes;
pub mod planner;
pub mod scenario;
pub mod store;
pub mod template;
pub mod time;
pub mod vec3;

pub use time::Epoch;
pub use vec3::Vec3;
