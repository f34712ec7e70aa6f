//! Solvers for stochastic Nash equilibrium problems with composite player
//! objectives, built around variance reduction through growing sample batches.
//!
//! Four schemes are provided in [`solvers`]: centralized and graph-distributed
//! proximal gradient-response (`vs_pgr`, `d_vs_pgr`) and proximal best-response
//! (`vs_pbr`, `d_vs_pbr`). Supporting pieces: game and oracle definitions
//! ([`game`]), proximal operators ([`prox`]), batch/communication schedules and
//! closed-form complexity predictors ([`schedules`]), consensus graphs
//! ([`graph`]), problem-constant extraction plus ground-truth equilibrium
//! oracles ([`analysis`]), and the networked Cournot benchmark family
//! ([`cournot`]).

pub mod analysis;
pub mod cournot;
pub mod error;
pub mod game;
pub mod graph;
pub mod profile;
pub mod prox;
pub mod schedules;
pub mod solvers;

pub use error::{Error, Result};
pub use profile::StrategyProfile;
