//! Driver for the benchmark interface problems: configuration, multi-trial
//! runs and file output.

pub mod config;
pub mod output;
pub mod run;

pub use config::{ResolvedRun, RunConfig};
pub use run::{run, run_resolved, RunManifest, TrialResult};
