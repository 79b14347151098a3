//! Quadrotor hover simulation and estimation: rigid-body plant, hover
//! linearization, steady-state LQG, zero-velocity pseudo-measurements,
//! rotor actuation chain and equivalent-circuit battery.
#![no_std]

extern crate alloc;
#[cfg(feature = "std")]
extern crate std;

pub mod actuation;
pub mod battery;
pub mod error;
pub mod kalman;
pub mod linmodel;
pub mod math;
pub mod metrics;
pub mod riccati;
pub mod sim;
pub mod vehicle;
pub mod zupt;

pub use error::{Error, Result};
