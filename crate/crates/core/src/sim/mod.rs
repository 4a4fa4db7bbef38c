//! Deterministic discrete-event simulation.
//!
//! Global time advances in integer quanta. Every nonfaulty node owns a
//! drifting clock and runs one resync round per igc pulse; faulty nodes are
//! adversary callbacks. Identical scenarios produce identical traces.

pub mod adversary;
pub mod engine;
pub mod scenario;
pub mod setup;
pub mod trace;

pub use engine::{run, simulate, RunOptions};
pub use scenario::Scenario;
pub use trace::{Diagnostics, Trace, TraceRecord};
