//! Attack-resilient vehicle platooning.
//!
//! A platoon of `N` double-integrator vehicles shares GPS and relative
//! position/velocity readings. Each vehicle runs a saturated-innovation
//! observer, two attack detectors and a consensus controller. The
//! [`harness`] module drives the whole loop and reports Monte Carlo metrics.

pub mod analysis;
pub mod controller;
pub mod detectors;
pub mod error;
pub mod harness;
pub mod observer;
pub mod platoon;
pub mod sensing;

pub use error::{Error, Result};
pub use platoon::{PlatoonParams, Vec2, VehicleId, VehicleState};
