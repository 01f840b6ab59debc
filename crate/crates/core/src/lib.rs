//! Estimation of an unknown output and its Lie derivatives along a
//! trajectory: a high-gain observer differentiates the measured output and
//! sliding-window Gaussian processes regress the observer states on the
//! system state, with computable error envelopes.

// `!(x > 0.0)` is how NaN gets rejected alongside non-positive values
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod bounds;
pub mod config;
pub mod error;
pub mod gp;
pub mod observer;
pub mod scenario;
pub mod window;

pub use config::{ConfigError, ScenarioConfig};
pub use error::{Error, Result};
pub use gp::{fit, Dataset, GpPosterior, KernelParams};
pub use observer::{HighGainObserver, ObserverConfig, ObserverState};
pub use scenario::{run_scenario, ScenarioRun, SimulationTrace, TraceRow};
pub use window::SlidingWindow;
