//! Anytime multi-agent path finding on 4-connected grids by large
//! neighborhood search.
//!
//! A run starts from a collision-free [`model::Solution`], repeatedly removes
//! the paths of a small set of agents chosen by a destroy strategy
//! ([`strategies`]), replans them around everyone else ([`replan`]) and keeps
//! the result when the sum of delays drops. [`engine::lns_run`] drives the
//! loop; [`bench`] measures and batches runs.

pub mod bench;
pub mod engine;
pub mod init;
pub mod model;
pub mod movingai;
pub mod output;
pub mod replan;
pub mod sssp;
pub mod strategies;

pub use engine::{lns_run, lns_run_with, Budget, LnsConfig, RunRecord};
pub use model::{Coord, GridMap, MapfInstance, Path, Solution};
