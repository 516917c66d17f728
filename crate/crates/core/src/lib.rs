//! Horizontal traffic queues (HTQ): vehicles on a ring road whose speed is a
//! power of the distance to the vehicle in front.
//!
//! The crate is split along the lines of the analysis:
//!
//! * [`dist`]: spatial laws for arrival locations and travel distances, and
//!   their lattice discretization and convolution powers.
//! * [`model`]: the ring state, its continuous car-following dynamics and the
//!   arrival/departure jumps.
//! * [`sim`]: event-driven Monte Carlo of the full queue and its estimators.
//! * [`busyperiod`]: the joint law of busy-period duration and arrival count
//!   at a constant service rate.
//! * [`bounds`]: throughput bounds built on top of the busy-period engine and
//!   the batch release policy.
//! * [`control`]: the batch release policy run on a two-stage tandem.

pub mod bounds;
pub mod busyperiod;
pub mod control;
pub mod dist;
mod error;
pub mod model;
pub mod rng;
pub mod sim;
pub mod stats;

pub use error::{Error, Result};
