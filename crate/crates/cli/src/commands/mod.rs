//! The pipeline commands. Each reads its inputs from the output directory,
//! so they can run in separate processes.

pub mod da;
pub mod fixtures;
pub mod report;
pub mod rt;
pub mod train;

use std::fs::File;
use std::path::Path;

use gridrisk_core::grid_model::load_system;
use gridrisk_core::io::{read_json, read_qoi_records, read_scenario_set, read_timeseries};
use gridrisk_core::{CommitmentSchedule, DispatchState, QoiMatrix, ScenarioSet, SystemModel};
use gridrisk_core::scenarios::Provenance;
use serde::{Deserialize, Serialize};

use crate::config::RunConfig;
use crate::error::{CliError, CliResult};
use crate::layout::{require, Layout};

pub use da::cmd_da_assess;
pub use fixtures::cmd_gen_fixtures;
pub use report::cmd_report;
pub use rt::{cmd_rt_assess, Case};
pub use train::cmd_train;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FixtureManifest {
    pub fixture_seed: u64,
    pub options: gridrisk_core::fixtures::DeskOptions,
    pub zones: Vec<String>,
    pub n_base_days: usize,
}

pub struct Fixtures {
    pub system: SystemModel,
    pub schedule: CommitmentSchedule,
    pub base_days: ScenarioSet,
}

pub fn load_fixtures(config: &RunConfig, layout: &Layout) -> CliResult<Fixtures> {
    let manifest_path = layout.fixture_manifest();
    require(&manifest_path, "gen-fixtures")?;
    let system_path = config.system_path();
    require(&system_path, "gen-fixtures")?;
    let manifest: FixtureManifest = read_json(&manifest_path)?;
    let system = load_system(&system_path)?;
    let schedule = CommitmentSchedule::load(layout.schedule(), &system)?;
    let days = (0..manifest.n_base_days)
        .map(|k| read_timeseries(layout.base_day(k), system.zones()))
        .collect::<Result<Vec<_>, _>>()?;
    let base_days = ScenarioSet::uniform(
        system.zones().to_vec(),
        days,
        Provenance::DayAhead,
        manifest.fixture_seed,
    )?;
    Ok(Fixtures {
        system,
        schedule,
        base_days,
    })
}

/// Day-ahead scenarios, their simulated QoIs and the starting dispatch.
pub struct DayAhead {
    pub scenarios: ScenarioSet,
    pub qoi: QoiMatrix,
    pub initial: DispatchState,
}

pub fn load_day_ahead(layout: &Layout) -> CliResult<DayAhead> {
    for path in [layout.da_scenarios(), layout.da_corpus(), layout.initial_dispatch()] {
        require(&path, "da-assess")?;
    }
    let scenarios = read_scenario_set(layout.da_scenarios())?;
    let records = read_qoi_records(layout.da_corpus())?;
    // records carry no weights; take them from the scenario set
    let rows = (0..records.n_scenarios()).map(|i| records.row(i).to_vec()).collect();
    let qoi = QoiMatrix::from_rows(rows, scenarios.weights.clone())?;
    let initial = read_json(layout.initial_dispatch())?;
    Ok(DayAhead {
        scenarios,
        qoi,
        initial,
    })
}

pub(crate) fn csv_writer(path: &Path) -> CliResult<csv::Writer<File>> {
    if let Some(parent) = path.parent() {
        std::fs::create_dir_all(parent).map_err(|e| gridrisk_core::Error::io(parent, e))?;
    }
    Ok(csv::Writer::from_path(path)?)
}

pub(crate) fn finish(mut w: csv::Writer<File>, path: &Path) -> CliResult<()> {
    w.flush()
        .map_err(|e| CliError::from(gridrisk_core::Error::io(path, e)))
}

pub(crate) fn cell(v: Option<f64>) -> String {
    v.map(|x| x.to_string()).unwrap_or_default()
}

/// Shed plus operating-reserve shortfall over a trajectory, in MW steps.
pub(crate) fn shortage_mw(row: &[gridrisk_core::QoiSample], mrr_op: f64) -> f64 {
    row.iter()
        .map(|s| s.load_shed + (mrr_op - s.op_reserve).max(0.0))
        .sum()
}
