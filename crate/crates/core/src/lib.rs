//! Station-keeping for latex high-altitude balloons actuated by helium
//! venting and sand ballasting.
//!
//! The crate is organised bottom-up:
//!
//! - [`atmosphere`]: US Standard Atmosphere 1976 up to 47 km.
//! - [`dynamics`]: point-mass equations of motion and their integrator.
//! - [`resource_solver`]: steady-state inversions for vent, ballast and float.
//! - [`controller`]: maps agent commands to physical actions.
//! - [`wind_field`]: gridded winds, interpolation, noise and synthetic fields.
//! - [`environment`]: the episodic decision process.
//! - [`sac`]: Soft Actor-Critic with in-crate networks and optimiser.
//! - [`cli`]: command implementations behind the `stationkeep` binary.

// Validation compares with `!(x > 0.0)` so that NaN is rejected too.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod atmosphere;
pub mod cli;
pub mod config;
pub mod controller;
pub mod dynamics;
pub mod environment;
pub mod resource_solver;
pub mod sac;
pub mod seed;
pub mod wind_field;
