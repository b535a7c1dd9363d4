use std::time::Instant;

use gridrisk_core::io::{read_json, write_json};
use gridrisk_core::risk::{propagate, risk_profile_at, Direction, Evaluator, OracleEvaluator};
use gridrisk_core::scenarios::gbm_short_term;
use gridrisk_core::sced::simulate_from;
use gridrisk_core::surrogate::{
    hal_loss, split_scenarios, HalParams, ModelKind, SurrogateBank, SurrogateEvaluator,
};
use gridrisk_core::{QoiKind, QoiSample, RiskProfile, SystemModel};
use serde::{Deserialize, Serialize};

use super::train::TrainManifest;
use super::{cell, csv_writer, finish, load_day_ahead, load_fixtures, DayAhead};
use crate::config::RunConfig;
use crate::error::{CliError, CliResult};
use crate::layout::{require, Layout};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "snake_case")]
pub enum Case {
    High,
    Medium,
    Low,
}

impl Case {
    pub const ALL: [Case; 3] = [Case::High, Case::Medium, Case::Low];

    pub fn name(self) -> &'static str {
        match self {
            Case::High => "high",
            Case::Medium => "medium",
            Case::Low => "low",
        }
    }
}

/// QoIs with a threshold, in the order of the error tables.
pub const RISK_QOIS: [QoiKind; 3] = [QoiKind::LoadShed, QoiKind::RegReserve, QoiKind::OpReserve];

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CaseChoice {
    pub case: Case,
    /// Index into the day-ahead scenario set.
    pub scenario: usize,
    /// Day total of shed and reserve-shortfall consequence, in $.
    pub consequence: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Timing {
    pub window_start: usize,
    pub model: ModelKind,
    pub n_scenarios: usize,
    pub repeats: usize,
    pub parallelism: usize,
    pub oracle_seconds: Vec<f64>,
    pub surrogate_seconds: Vec<f64>,
    /// Medians divided by the scenario count.
    pub oracle_us_per_scenario: f64,
    pub surrogate_us_per_scenario: f64,
    pub speedup: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RtManifest {
    pub choice: CaseChoice,
    pub window_starts: Vec<usize>,
    pub st_n: usize,
    pub selected: ModelKind,
    pub models: Vec<ModelKind>,
    pub timing: Timing,
}

/// Total consequence of one day: shed and both reserve shortfalls priced
/// at the value of lost load.
fn day_consequence(row: &[QoiSample], system: &SystemModel) -> f64 {
    row.iter()
        .map(|s| {
            system.voll
                * (s.load_shed
                    + (system.mrr_reg - s.reg_reserve).max(0.0)
                    + (system.mrr_op - s.op_reserve).max(0.0))
        })
        .sum::<f64>()
        * gridrisk_core::grid_model::STEP_HOURS
}

/// Picks the median scenario of the low, middle and high consequence groups
/// among the held-out day-ahead scenarios.
pub fn select_cases(config: &RunConfig, da: &DayAhead, system: &SystemModel) -> CliResult<Vec<CaseChoice>> {
    let (_, held_out) = split_scenarios(da.scenarios.len(), config.training.train_fraction, config.seed);
    if held_out.len() < 3 {
        return Err(CliError::Config(format!(
            "only {} held-out scenarios; need at least 3 to form risk cases",
            held_out.len()
        )));
    }
    let mut ranked: Vec<(f64, usize)> = held_out
        .iter()
        .map(|&i| (day_consequence(da.qoi.row(i), system), i))
        .collect();
    ranked.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)));
    let n = ranked.len();
    let [a, b] = config.rt.case_cuts;
    let cut = |f: f64| ((f * n as f64).round() as usize).clamp(1, n - 1);
    let (lo, hi) = (cut(a), cut(b).max(cut(a) + 1).min(n - 1));
    let groups = [(Case::Low, 0, lo), (Case::Medium, lo, hi), (Case::High, hi, n)];
    let mut out: Vec<CaseChoice> = groups
        .iter()
        .map(|&(case, start, end)| {
            let (consequence, scenario) = ranked[start + (end - start - 1) / 2];
            CaseChoice {
                case,
                scenario,
                consequence,
            }
        })
        .collect();
    out.reverse();
    Ok(out)
}

fn st_seed(master: u64, case: Case, window_start: usize) -> u64 {
    let tag = (case as u64) << 32 | window_start as u64;
    master.wrapping_mul(0x9E37_79B9_7F4A_7C15) ^ tag.wrapping_mul(0xD6E8_FEB8_6659_FD93)
}

fn median(values: &[f64]) -> f64 {
    let mut v = values.to_vec();
    v.sort_by(f64::total_cmp);
    let n = v.len();
    if n % 2 == 1 {
        v[n / 2]
    } else {
        0.5 * (v[n / 2 - 1] + v[n / 2])
    }
}

/// HAL parameters for scoring risk estimates: any nonzero risk is adverse.
pub fn risk_hal_params(weights: gridrisk_core::surrogate::HalWeights) -> HalParams {
    HalParams {
        weights,
        threshold: Some((0.0, Direction::Above)),
    }
}

/// Short-term assessment of the requested cases (all three when `case` is
/// `None`). Returns the case manifests.
pub fn cmd_rt_assess(config: &RunConfig, case: Option<Case>) -> CliResult<Vec<RtManifest>> {
    let layout = Layout::new(&config.output_dir);
    let fx = load_fixtures(config, &layout)?;
    let da = load_day_ahead(&layout)?;
    require(&layout.train_manifest(), "train")?;
    let train: TrainManifest = read_json(layout.train_manifest())?;
    let selected = train
        .selected
        .ok_or_else(|| CliError::Config("training selected no model; every family failed".into()))?;
    let mut banks = Vec::new();
    for entry in train.models.iter().filter(|m| m.error.is_none()) {
        let dir = layout.bank(entry.kind);
        require(&dir.join("manifest.json"), "train")?;
        banks.push((entry.kind, SurrogateBank::load(&dir)?));
    }

    let choices = select_cases(config, &da, &fx.system)?;
    write_json(layout.cases(), &choices)?;
    let wanted: Vec<Case> = case.map_or(Case::ALL.to_vec(), |c| vec![c]);
    let mut manifests = Vec::new();
    for choice in choices.into_iter().filter(|c| wanted.contains(&c.case)) {
        let name = choice.case.name();
        let m = assess_case(config, &layout, &fx, &da, &banks, selected, choice)
            .map_err(|e| e.context(format!("{name} case")))?;
        write_json(layout.rt_manifest(name), &m)?;
        manifests.push(m);
    }
    Ok(manifests)
}

fn assess_case(
    config: &RunConfig,
    layout: &Layout,
    fx: &super::Fixtures,
    da: &DayAhead,
    banks: &[(ModelKind, SurrogateBank)],
    selected: ModelKind,
    choice: CaseChoice,
) -> CliResult<RtManifest> {
    let name = choice.case.name();
    let actual = &da.scenarios.scenarios[choice.scenario];
    let zones = fx.system.zones();
    let oracle = OracleEvaluator {
        system: &fx.system,
        schedule: &fx.schedule,
    };
    // the realized day supplies each window's starting dispatch
    let realized = simulate_from(&fx.system, &fx.schedule, 0, &da.initial, actual, true)?;
    write_trace(layout, name, &realized.qoi, banks, actual)?;

    let starts = config.window_starts();
    let h = config.horizon;
    let risk_path = layout.rt_risk(name);
    let mut risk = csv_writer(&risk_path)?;
    risk.write_record(["window_start", "step", "evaluator", "qoi", "level1", "level2", "level3"])?;
    // level-3 pairs per model and risk QoI: (oracle, surrogate)
    let mut pairs = vec![[Vec::new(), Vec::new(), Vec::new()]; banks.len()];
    for &t0 in &starts {
        let mut run = || -> CliResult<()> {
            let st = gbm_short_term(zones, &actual[t0..t0 + h], config.st_n, config.rt.rel_sigma_1h, st_seed(config.seed, choice.case, t0))?;
            let init = &realized.dispatch[t0 - 1];
            let oq = propagate(&oracle, &st, t0, init, config.parallelism)?;
            let op = risk_profile_at(&oq, &fx.system, config.alpha, t0)?;
            write_profile(&mut risk, t0, "oracle", &op)?;
            for (b, (kind, bank)) in banks.iter().enumerate() {
                let sq = propagate(&SurrogateEvaluator { bank }, &st, t0, init, config.parallelism)?;
                let sp = risk_profile_at(&sq, &fx.system, config.alpha, t0)?;
                write_profile(&mut risk, t0, kind.id(), &sp)?;
                for (j, qoi) in RISK_QOIS.into_iter().enumerate() {
                    for k in 0..h {
                        let o = op.get(k, qoi).level3.unwrap_or(0.0);
                        let s = sp.get(k, qoi).level3.unwrap_or(0.0);
                        pairs[b][j].push((o, s));
                    }
                }
            }
            Ok(())
        };
        run().map_err(|e| e.context(format!("window starting at step {t0}")))?;
    }
    finish(risk, &risk_path)?;

    let hal = risk_hal_params(config.training.hal_weights);
    let err_path = layout.rt_errors(name);
    let mut w = csv_writer(&err_path)?;
    w.write_record(["model", "qoi", "mae", "hal", "mean_oracle_risk", "n"])?;
    for (b, (kind, _)) in banks.iter().enumerate() {
        for (j, qoi) in RISK_QOIS.into_iter().enumerate() {
            let p = &pairs[b][j];
            let n = p.len() as f64;
            let mae = p.iter().map(|(o, s)| (s - o).abs()).sum::<f64>() / n;
            let hal_mean = p.iter().map(|&(o, s)| hal_loss(o, s, &hal)).sum::<f64>() / n;
            let mean = p.iter().map(|(o, _)| o).sum::<f64>() / n;
            w.write_record([
                kind.id().to_string(),
                qoi.name().to_string(),
                mae.to_string(),
                hal_mean.to_string(),
                mean.to_string(),
                p.len().to_string(),
            ])?;
        }
    }
    finish(w, &err_path)?;

    let (_, bank) = banks
        .iter()
        .find(|(k, _)| *k == selected)
        .ok_or_else(|| CliError::Config(format!("selected model {} has no bank", selected.id())))?;
    let timing = time_evaluators(config, fx, actual, &realized.dispatch, bank, choice.case, starts[0])?;
    Ok(RtManifest {
        choice,
        window_starts: starts,
        st_n: config.st_n,
        selected,
        models: banks.iter().map(|(k, _)| *k).collect(),
        timing,
    })
}

fn write_profile(
    w: &mut csv::Writer<std::fs::File>,
    t0: usize,
    evaluator: &str,
    profile: &RiskProfile,
) -> CliResult<()> {
    for (k, row) in profile.steps.iter().enumerate() {
        for qoi in QoiKind::ALL {
            let r = row[qoi.index()];
            w.write_record([
                t0.to_string(),
                (t0 + k).to_string(),
                evaluator.to_string(),
                qoi.name().to_string(),
                r.level1.to_string(),
                cell(r.level2),
                cell(r.level3),
            ])?;
        }
    }
    Ok(())
}

/// QoIs of the realized day: simulated, and predicted by each bank.
fn write_trace(
    layout: &Layout,
    case: &str,
    simulated: &[QoiSample],
    banks: &[(ModelKind, SurrogateBank)],
    actual: &[gridrisk_core::Realization],
) -> CliResult<()> {
    let path = layout.rt_trace(case);
    let mut w = csv_writer(&path)?;
    w.write_record(["step", "evaluator", "cost", "load_shed", "reg_reserve", "op_reserve"])?;
    let mut series: Vec<(&str, Vec<QoiSample>)> = vec![("oracle", simulated.to_vec())];
    for (kind, bank) in banks {
        let start = gridrisk_core::DispatchState::zeros(0);
        series.push((kind.id(), SurrogateEvaluator { bank }.evaluate(actual, 0, &start)?));
    }
    for (name, qoi) in &series {
        for (t, q) in qoi.iter().enumerate() {
            let mut rec = vec![t.to_string(), name.to_string()];
            rec.extend(q.to_array().iter().map(|v| v.to_string()));
            w.write_record(&rec)?;
        }
    }
    finish(w, &path)
}

/// Wall-clock time of the oracle and the selected bank on the same
/// short-term set, each the median of the configured repeats.
#[allow(clippy::too_many_arguments)]
fn time_evaluators(
    config: &RunConfig,
    fx: &super::Fixtures,
    actual: &[gridrisk_core::Realization],
    dispatch: &[gridrisk_core::DispatchState],
    bank: &SurrogateBank,
    case: Case,
    t0: usize,
) -> CliResult<Timing> {
    let st = gbm_short_term(
        fx.system.zones(),
        &actual[t0..t0 + config.horizon],
        config.st_n,
        config.rt.rel_sigma_1h,
        st_seed(config.seed, case, t0),
    )?;
    let init = &dispatch[t0 - 1];
    let oracle = OracleEvaluator {
        system: &fx.system,
        schedule: &fx.schedule,
    };
    let surrogate = SurrogateEvaluator { bank };
    let time = |ev: &dyn Evaluator| -> CliResult<Vec<f64>> {
        // one untimed pass warms caches and the thread pool
        propagate(ev, &st, t0, init, config.parallelism)?;
        (0..config.rt.timing_repeats)
            .map(|_| {
                let start = Instant::now();
                propagate(ev, &st, t0, init, config.parallelism)?;
                Ok(start.elapsed().as_secs_f64())
            })
            .collect()
    };
    let oracle_seconds = time(&oracle)?;
    let surrogate_seconds = time(&surrogate)?;
    let n = config.st_n as f64;
    let o = median(&oracle_seconds) / n * 1e6;
    let s = median(&surrogate_seconds) / n * 1e6;
    Ok(Timing {
        window_start: t0,
        model: bank.kind(),
        n_scenarios: config.st_n,
        repeats: config.rt.timing_repeats,
        parallelism: config.parallelism,
        oracle_seconds,
        surrogate_seconds,
        oracle_us_per_scenario: o,
        surrogate_us_per_scenario: s,
        speedup: o / s,
    })
}
