//! Experiment plumbing: configuration, single runs, the one-at-a-time grid,
//! the Δ search and reporting.

pub mod config;
pub mod experiment;
pub mod grid;
pub mod report;
pub mod search;

pub use config::ExperimentConfig;
pub use experiment::{render_csv, run_to_file, run_training, run_training_with_threads, summarize, RunSummary};
pub use grid::{oat_grid, run_grid, GridEntry, DEFAULT_DELTAS};
pub use search::{delta_search, recommend, DeltaScore};
