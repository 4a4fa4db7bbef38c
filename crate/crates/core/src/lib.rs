//! Self-stabilizing Byzantine pulse resynchronization driven by irregularly
//! generated common pulses.
//!
//! The crate is organised bottom-up:
//!
//! * [`geometry`]: exact arithmetic on the unit circle and the 1-norm diamond
//!   used to embed phases into the plane.
//! * [`fta`]: the fault-tolerant approximate averaging function.
//! * [`decision`]: coins, random-walk tallies, significance thresholds and the
//!   ideal probabilistic-agreement primitive.
//! * [`resync`]: the per-node resynchronization state machine.
//! * [`clock`]: drifting local clocks, pulsing phase and phase adjustment.
//! * [`sim`]: the deterministic discrete-event simulator.
//! * [`params`]: derivation, validation and solving of protocol parameters.
//! * [`metrics`]: offline trace analysis and Monte Carlo statistics.
//! * [`campaign`]: running many independent trials on a worker pool.

pub mod campaign;
pub mod clock;
pub mod decision;
pub mod error;
pub mod fta;
pub mod geometry;
pub mod metrics;
pub mod params;
pub mod rational;
pub mod resync;
pub mod sim;

pub use error::{Error, Result};
pub use rational::Rational;
