use gridrisk_core::fixtures::desk_fixture;
use gridrisk_core::grid_model::save_system;
use gridrisk_core::io::{write_json, write_timeseries};

use super::FixtureManifest;
use crate::config::RunConfig;
use crate::error::CliResult;
use crate::layout::Layout;

/// Writes the desk system, its base days and the commitment schedule.
pub fn cmd_gen_fixtures(config: &RunConfig) -> CliResult<()> {
    let layout = Layout::new(&config.output_dir);
    let fx = desk_fixture(&config.fixture, config.fixture_seed)?;
    let system_path = config.system_path();
    if let Some(parent) = system_path.parent() {
        std::fs::create_dir_all(parent).map_err(|e| gridrisk_core::Error::io(parent, e))?;
    }
    save_system(&fx.system, &system_path)?;
    for (k, day) in fx.base_days.scenarios.iter().enumerate() {
        write_timeseries(layout.base_day(k), fx.system.zones(), day)?;
    }
    fx.schedule.save(layout.schedule())?;
    write_json(
        layout.fixture_manifest(),
        &FixtureManifest {
            fixture_seed: config.fixture_seed,
            options: config.fixture,
            zones: fx.system.zones().to_vec(),
            n_base_days: fx.base_days.len(),
        },
    )?;
    Ok(())
}
