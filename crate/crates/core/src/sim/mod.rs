//! Discrete-time (1 s) microsimulation.
//!
//! Vehicles travel at `max_speed` until blocked, stack in a vertical queue
//! at `spacing` meters, and discharge across an intersection at one vehicle
//! per `headway` seconds per lane while their movement is served. Crossing
//! an intersection takes no time. Vehicles exit when they reach the end of
//! a boundary exit road.

mod episode;
mod log;
mod world;

use thiserror::Error;

pub use episode::{run_episode, Controller, Decision, EpisodeOptions};
pub use log::{DecisionRecord, EpisodeLog, VehicleRecord};
pub use world::{
    LaneObservation, SignalDisplay, VehicleCounts, VehicleMode, VehicleState, World, SEGMENTS, SEGMENT_LENGTH,
};

#[derive(Debug, Error, PartialEq)]
pub enum SimError {
    #[error("invalid phase {phase} for intersection `{intersection}` ({phases} phases)")]
    InvalidPhase { intersection: String, phase: usize, phases: usize },
    #[error("invalid intersection index {0}")]
    InvalidIntersection(usize),
    #[error("invalid duration {0}: durations must be positive")]
    InvalidDuration(u32),
    #[error("{stranded} vehicles still in the network at the drain cap t={cap}")]
    DrainTimeout { stranded: usize, cap: u32 },
    #[error("invalid simulation config: {0}")]
    Config(String),
    #[error("flow does not match network: {0}")]
    Flow(String),
}

#[derive(Debug, Clone, Copy, PartialEq, serde::Serialize, serde::Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SimConfig {
    /// m/s
    pub max_speed: f64,
    /// Seconds between discharges from one lane.
    pub headway: f64,
    /// Seconds of yellow on every phase change.
    pub yellow: u32,
    /// Meters between stacked vehicles.
    pub spacing: f64,
    /// Limit each lane to `length / spacing` vehicles and block upstream
    /// discharge when full.
    pub lane_capacity: bool,
}

impl Default for SimConfig {
    fn default() -> Self {
        SimConfig { max_speed: 10.0, headway: 2.0, yellow: 5, spacing: 7.5, lane_capacity: false }
    }
}

impl SimConfig {
    pub fn validate(&self) -> Result<(), SimError> {
        if !(self.max_speed > 0.0 && self.max_speed.is_finite()) {
            return Err(SimError::Config("max_speed must be positive".into()));
        }
        if !(self.headway >= 0.0 && self.headway.is_finite()) {
            return Err(SimError::Config("headway must be non-negative".into()));
        }
        if !(self.spacing > 0.0 && self.spacing.is_finite()) {
            return Err(SimError::Config("spacing must be positive".into()));
        }
        Ok(())
    }
}
