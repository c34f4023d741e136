//! Named numerical experiments on nonlocal diffusion, each writing CSV/JSON
//! outputs and a run manifest into an output directory.

pub mod config;
pub mod data;
pub mod error;
mod experiments;
pub mod manifest;
pub mod plot;

pub use config::{DataKind, Experiment, ExperimentConfig, SourceKind};
pub use error::{CliError, Result};
pub use experiments::run;
pub use manifest::{Check, RunManifest, MANIFEST_FILE, VERSION};
pub use plot::emit_plot_script;

/// Environment variable capping the worker threads.
pub const THREADS_ENV: &str = "FRACSYM_THREADS";

/// Sizes the global thread pool from `FRACSYM_THREADS` when set.
pub fn configure_threads() -> Result<()> {
    let Ok(value) = std::env::var(THREADS_ENV) else {
        return Ok(());
    };
    let threads: usize = value.trim().parse().ok().filter(|n| *n > 0).ok_or_else(|| CliError::InvalidValue {
        key: THREADS_ENV.into(),
        value: value.clone(),
        reason: "expected a positive integer".into(),
    })?;
    // a pool built earlier in the process keeps its size
    let _ = rayon::ThreadPoolBuilder::new().num_threads(threads).build_global();
    Ok(())
}
