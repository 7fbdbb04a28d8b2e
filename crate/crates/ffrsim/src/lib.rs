//! Deterministic post-disturbance frequency simulator for low-inertia grids
//! with service-layer coordination of fast flexible resources.
//!
//! The crate couples three pieces:
//!
//! - a uniform-frequency swing model of a ten-machine system with droop
//!   governors ([`grid`]),
//! - delayed, lag-filtered, energy-limited droop responders for battery
//!   storage, data centers and EV fleets ([`resource`]),
//! - a coordinator that maps resources to time-windowed service layers and
//!   issues participation weights with anti-saturation tapering
//!   ([`coordinator`]).
//!
//! A fixed-step engine ([`engine`]) produces sampled trajectories, the
//! [`metrics`] module derives stability figures, and [`scenario`] /
//! [`harness`] provide configuration, the four-case comparison and
//! availability sweeps behind the `ffrsim` binary.

pub mod coordinator;
pub mod engine;
pub mod grid;
pub mod harness;
pub mod metrics;
pub mod resource;
pub mod scenario;

pub use engine::{run_simulation, Trajectory};
pub use harness::{compare_cases, run_compare, sweep_availability};
pub use metrics::{metrics_report, MetricsReport};
pub use scenario::{build_case, load_config, ScenarioConfig, SweepSpec};
