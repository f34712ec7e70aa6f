//! Experiment harness around the solver library: TOML-driven runs, trace
//! averaging, complexity predictions, and SVG convergence panels.

pub mod config;
pub mod experiment;
pub mod plot;
pub mod predict;
