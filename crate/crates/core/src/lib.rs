//! Perception-based longitudinal control for a follower vehicle that
//! witnesses a cut-in lane change.
//!
//! The crate is organized as a pipeline: [`ingest`] turns raw trajectory
//! tables into per-vehicle tracks and cut-in scenarios, [`phase`] annotates
//! each scenario with behavioral phase boundaries, [`anfis`] trains a
//! Takagi–Sugeno controller ([`fuzzy`]) on the annotated data, [`plant`]
//! simulates the follower against a leader ([`control`]), and [`metrics`]
//! compares the simulated controller with the recorded human driver.

pub mod anfis;
pub mod control;
pub mod fuzzy;
pub mod ingest;
pub mod metrics;
pub mod phase;
pub mod pipeline;
pub mod plant;
pub mod synth;
