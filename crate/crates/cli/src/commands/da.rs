use gridrisk_core::io::{write_json, write_qoi_records, write_risk_profile, write_scenario_set};
use gridrisk_core::risk::{propagate, risk_profile, OracleEvaluator};
use gridrisk_core::scenarios::dirichlet_mix;
use gridrisk_core::sced::initial_dispatch;

use super::load_fixtures;
use crate::config::RunConfig;
use crate::error::CliResult;
use crate::layout::Layout;

/// Day-ahead assessment: Dirichlet-mixed scenarios through the chained
/// dispatch LPs, then the risk profile of every step.
pub fn cmd_da_assess(config: &RunConfig) -> CliResult<()> {
    let layout = Layout::new(&config.output_dir);
    let fx = load_fixtures(config, &layout)?;
    let zones = fx.system.zones();
    let set = dirichlet_mix(zones, &fx.base_days.scenarios, config.da_n, config.dirichlet_alpha, config.seed)?;
    // every scenario starts from the dispatch of the expected midnight state
    let y0 = initial_dispatch(&fx.system, fx.schedule.hour(0), &set.mean_at(0))?;
    let oracle = OracleEvaluator {
        system: &fx.system,
        schedule: &fx.schedule,
    };
    let qoi = propagate(&oracle, &set, 0, &y0, config.parallelism)?;
    let profile = risk_profile(&qoi, &fx.system, config.alpha)?;
    write_scenario_set(layout.da_scenarios(), &set)?;
    write_qoi_records(layout.da_corpus(), &qoi, 0)?;
    write_risk_profile(layout.da_risk(), &profile)?;
    write_json(layout.initial_dispatch(), &y0)?;
    Ok(())
}
