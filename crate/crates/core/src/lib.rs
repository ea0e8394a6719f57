//! Simulation and sensing toolkit for beam-swept THz radio maps.
//!
//! The crate generates random obstacle layouts, traces per-beam received
//! power, subsamples it with sparse sensors, reconstructs the map and infers
//! obstacle occupancy by voting across beam directions.

pub mod config;
pub mod dataset;
pub mod error;
pub mod geometry;
pub mod grid;
pub mod metrics;
pub mod pipeline;
pub mod propagation;
pub mod reconstruct;
pub mod sampling;
pub mod scenario;
pub mod sensing;

pub use config::Config;
pub use error::{Error, Result};
pub use geometry::Point;
pub use grid::{BinaryMap, ConfidenceMap, Grid, OccupancyGrid, Tensor3};
pub use propagation::{BeamSet, RadioConfig, RadioMap, ScaledRadioMap, ScalingSpec};
pub use scenario::{GridSpec, ObstacleLayout, ScenarioClass};
