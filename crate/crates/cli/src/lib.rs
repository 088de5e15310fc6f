//! Command-line front end: argument parsing, file formats and the verbs
//! `gen`, `fit`, `predict`, `mode` and `benchmark`.

pub mod args;
pub mod commands;
pub mod error;
pub mod formats;

pub use error::{CliError, CliResult};

/// Environment variable that sizes the worker pool; `0` or unset means one
/// worker per core.
pub const THREADS_ENV: &str = "CONDMODE_THREADS";

/// Installs the global worker pool according to [`THREADS_ENV`].
pub fn configure_threads() -> CliResult<()> {
    let Ok(raw) = std::env::var(THREADS_ENV) else {
        return Ok(());
    };
    let threads: usize = raw.trim().parse().map_err(|_| {
        CliError::Usage(format!(
            "{THREADS_ENV} must be a non-negative integer, got {raw:?}"
        ))
    })?;
    if threads > 0 {
        rayon::ThreadPoolBuilder::new()
            .num_threads(threads)
            .build_global()
            .map_err(|e| CliError::Usage(format!("cannot size worker pool: {e}")))?;
    }
    Ok(())
}
