//! End-to-end driver: desk fixtures, day-ahead risk assessment, surrogate
//! training and real-time assessment with oracle/surrogate comparison.
//!
//! Every command reads the previous commands' files from the run's output
//! directory; the file formats are described in `docs/formats.md`.

pub mod commands;
pub mod config;
pub mod error;
pub mod layout;

pub use commands::{cmd_da_assess, cmd_gen_fixtures, cmd_report, cmd_rt_assess, cmd_train, Case};
pub use config::RunConfig;
pub use error::{CliError, CliResult};
pub use layout::Layout;

/// Runs the whole pipeline in order.
pub fn run_pipeline(config: &RunConfig) -> CliResult<()> {
    cmd_gen_fixtures(config)?;
    cmd_da_assess(config)?;
    cmd_train(config)?;
    cmd_rt_assess(config, None)?;
    cmd_report(config)?;
    Ok(())
}
