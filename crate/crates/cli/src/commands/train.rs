use gridrisk_core::io::{write_json, write_qoi_records, write_scenario_set};
use gridrisk_core::risk::{evaluate_all, OracleEvaluator, QoiThresholds};
use gridrisk_core::scenarios::{augment_unsafe, Provenance};
use gridrisk_core::surrogate::{
    build_datasets, select_model, split_scenarios, train_bank, DatasetOptions, JitOptions,
    ModelKind, SimulationCorpus, ValidationReport,
};
use gridrisk_core::{QoiKind, ScenarioSet};
use serde::{Deserialize, Serialize};

use super::{cell, csv_writer, finish, load_day_ahead, load_fixtures, shortage_mw};
use crate::config::RunConfig;
use crate::error::CliResult;
use crate::layout::Layout;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelEntry {
    pub kind: ModelKind,
    pub report: Option<ValidationReport>,
    /// Training failure, if any; the other model families still train.
    pub error: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainManifest {
    pub seed: u64,
    pub n_scenarios: usize,
    pub n_train_scenarios: usize,
    pub n_augmented: usize,
    pub options: JitOptions,
    pub models: Vec<ModelEntry>,
    pub selected: Option<ModelKind>,
}

/// Trains the random-forest, MAE-network and HAL-network banks on the
/// day-ahead corpus plus stressed copies of its worst training scenarios,
/// then validates them on the held-out scenarios.
pub fn cmd_train(config: &RunConfig) -> CliResult<TrainManifest> {
    let layout = Layout::new(&config.output_dir);
    let fx = load_fixtures(config, &layout)?;
    let da = load_day_ahead(&layout)?;
    let t = &config.training;
    let n = da.scenarios.len();
    let (train_ids, _) = split_scenarios(n, t.train_fraction, config.seed);

    let augmented = {
        let mut ranked: Vec<(f64, usize)> = train_ids
            .iter()
            .map(|&i| (shortage_mw(da.qoi.row(i), fx.system.mrr_op), i))
            .collect();
        // worst first; the id breaks ties so the order is reproducible
        ranked.sort_by(|a, b| b.0.total_cmp(&a.0).then(a.1.cmp(&b.1)));
        let take = (t.augment.top_fraction * ranked.len() as f64).round() as usize;
        if take == 0 || t.augment.stress_factors.is_empty() {
            None
        } else {
            let picks = ranked[..take]
                .iter()
                .map(|&(_, i)| da.scenarios.scenarios[i].clone())
                .collect();
            let base = ScenarioSet::uniform(da.scenarios.zones.clone(), picks, Provenance::DayAhead, config.seed)?;
            let aug = augment_unsafe(&base, &t.augment.stress_factors, config.seed)?;
            let oracle = OracleEvaluator {
                system: &fx.system,
                schedule: &fx.schedule,
            };
            let qoi = evaluate_all(&oracle, &aug, 0, &da.initial, config.parallelism)?;
            write_scenario_set(layout.augmented_scenarios(), &aug)?;
            write_qoi_records(layout.augmented_corpus(), &qoi, 0)?;
            Some(SimulationCorpus::new(aug, qoi)?)
        }
    };
    let n_augmented = augmented.as_ref().map_or(0, |c| c.scenarios.len());

    let corpus = SimulationCorpus::new(da.scenarios, da.qoi)?;
    let datasets = build_datasets(
        &corpus,
        augmented.as_ref(),
        &DatasetOptions {
            train_fraction: t.train_fraction,
            seed: config.seed,
            min_scenarios: t.min_scenarios,
        },
    )?;
    let options = JitOptions {
        seed: config.seed,
        rf: t.rf,
        nn: t.nn,
        hal_weights: t.hal_weights,
        thresholds: QoiThresholds::from_system(&fx.system),
    };

    let mut models = Vec::new();
    for kind in ModelKind::ALL {
        let entry = match train_bank(&datasets, fx.system.zones(), kind, &options) {
            Ok(bank) => {
                bank.save(&layout.bank(kind))?;
                ModelEntry {
                    kind,
                    report: bank.manifest.report.clone(),
                    error: None,
                }
            }
            Err(e) => ModelEntry {
                kind,
                report: None,
                error: Some(e.to_string()),
            },
        };
        models.push(entry);
    }

    let candidates: Vec<(ModelKind, ValidationReport)> = models
        .iter()
        .filter_map(|m| m.report.clone().map(|r| (m.kind, r)))
        .collect();
    let reports: Vec<ValidationReport> = candidates.iter().map(|(_, r)| r.clone()).collect();
    let selected = select_model(&reports).ok().map(|i| candidates[i].0);

    write_table2(&layout, &models)?;
    let manifest = TrainManifest {
        seed: config.seed,
        n_scenarios: n,
        n_train_scenarios: train_ids.len(),
        n_augmented,
        options,
        models,
        selected,
    };
    write_json(layout.train_manifest(), &manifest)?;
    Ok(manifest)
}

/// Safe and unsafe NMAE per QoI and model; cells without rows stay empty.
fn write_table2(layout: &Layout, models: &[ModelEntry]) -> CliResult<()> {
    let path = layout.table2();
    let mut w = csv_writer(&path)?;
    w.write_record(["qoi", "model", "safe_nmae", "unsafe_nmae", "n_safe", "n_unsafe"])?;
    for kind in QoiKind::ALL {
        for m in models {
            let v = m.report.as_ref().map(|r| *r.get(kind));
            w.write_record([
                kind.name().to_string(),
                m.kind.id().to_string(),
                cell(v.and_then(|v| v.safe_nmae)),
                cell(v.and_then(|v| v.unsafe_nmae)),
                v.map(|v| v.n_safe.to_string()).unwrap_or_default(),
                v.map(|v| v.n_unsafe.to_string()).unwrap_or_default(),
            ])?;
        }
    }
    finish(w, &path)
}
