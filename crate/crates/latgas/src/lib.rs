//! Two-dimensional velocity lattice gas.
//!
//! Particles on an L x L torus carry a velocity from a finite set; at most one
//! particle occupies each (site, velocity) slot. Particles perform asymmetric
//! exclusion jumps and collide on-site conserving mass and momentum.

pub mod dual;
pub mod equilibrium;
pub mod error;
pub mod greenkubo;
pub mod kmc;
pub mod linalg;
pub mod local;
pub mod model;
pub mod quad;
pub mod scalar;
pub mod spectral;

pub use error::{Error, Result};
pub use model::{Configuration, Event, Preset, Torus, VelocityModel};
