//! Simulation and stability analysis of linear time-invariant dynamics with
//! rate-independent clockwise hysteresis in negative feedback.
//!
//! The crate is organized around five subsystems:
//! - [`lti`]: state-space models, transfer-function evaluation, pole analysis
//!   and frequency-response sampling;
//! - [`hysteresis`]: the rate-independent feedback operators (boundary sign
//!   map, single stop element, memoryless static map);
//! - [`energy`]: supply rate, path energy, loop area and dissipation audits;
//! - [`simulate`]: fixed-step closed-loop integration with trajectory and
//!   limit-cycle diagnostics;
//! - [`stability`]: equilibrium sets and the two-loop circle-criterion test.
//!
//! [`scenarios`] provides the built-in example systems as ready-to-run
//! presets, and the `hystab` binary exposes everything on the command line.

pub mod config;
pub mod energy;
pub mod error;
pub mod hysteresis;
pub mod lti;
pub mod scenarios;
pub mod simulate;
pub mod stability;
pub mod svg;

pub use error::{Error, Result};
