//! Grid traffic microsimulation and two-stage (phase, then duration) signal
//! control.

pub mod agent;
pub mod experiment;
pub mod flow;
pub mod metrics;
pub mod nn;
pub mod policy;
pub mod roadnet;
pub mod sim;
