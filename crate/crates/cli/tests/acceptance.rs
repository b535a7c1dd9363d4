//! Acceptance suite. Each test prints one `criterion N [PASS|FAIL]` line to
//! stderr (bypassing libtest capture) and then asserts its verdict.
//!
//! Criteria 5 to 8 share pipeline runs of the checked-in desk configuration
//! under cargo's per-target temporary directory.

use std::io::Write;
use std::path::{Path, PathBuf};
use std::sync::OnceLock;
use std::time::{Duration, Instant};

use gridrisk_cli::commands::rt::RtManifest;
use gridrisk_cli::commands::train::TrainManifest;
use gridrisk_cli::{cmd_da_assess, cmd_gen_fixtures, cmd_report, cmd_rt_assess, cmd_train, Case, Layout, RunConfig};
use gridrisk_core::fixtures::{desk_fixture, DeskOptions};
use gridrisk_core::grid_model::STEP_HOURS;
use gridrisk_core::io::read_json;
use gridrisk_core::lpsolve::{solve, LpProblem, LpStatus, Sense};
use gridrisk_core::risk::{
    level1, level2, level3, load_shed_consequence, reserve_shortfall_consequence, Direction, Tail,
};
use gridrisk_core::scenarios::{dirichlet_mix, gbm_short_term};
use gridrisk_core::sced::{build_sced, initial_dispatch, simulate_from, ScedLayout, SimulationTrace};
use gridrisk_core::surrogate::nn::Scaling;
use gridrisk_core::surrogate::{
    hal_loss, hal_subgradient, HalParams, HalWeights, LossKind, ModelKind, NeuralNetwork,
};
use gridrisk_core::{DispatchState, QoiKind, QoiSample, Realization, SystemModel};
use proptest::test_runner::{Config as ProptestConfig, TestRunner};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

fn verdict(n: u32, title: &str, pass: bool, detail: &str, elapsed: Duration, budget: Duration) {
    let in_time = elapsed <= budget;
    let ok = pass && in_time;
    let line = format!(
        "criterion {n} [{}] {title}: {detail} ({:.1} s of {} s budget{})\n",
        if ok { "PASS" } else { "FAIL" },
        elapsed.as_secs_f64(),
        budget.as_secs(),
        if in_time { "" } else { ", over budget" }
    );
    let _ = std::io::stderr().lock().write_all(line.as_bytes());
    assert!(ok, "{}", line.trim_end());
}

// ---------------------------------------------------------------- criterion 1

fn random_lp(rng: &mut ChaCha8Rng) -> LpProblem {
    let n = rng.random_range(2..=6);
    let m = rng.random_range(1..=4);
    let mut lp = LpProblem::new();
    for _ in 0..n {
        let lo = rng.random_range(-5..=0) as f64;
        let hi = lo + rng.random_range(1..=8) as f64;
        lp.add_var(rng.random_range(-5..=5) as f64, lo, hi);
    }
    for _ in 0..m {
        let mut coeffs = Vec::new();
        for j in 0..n {
            if rng.random_bool(0.8) {
                coeffs.push((j, rng.random_range(-4..=4) as f64));
            }
        }
        let sense = match rng.random_range(0..6) {
            0 => Sense::Eq,
            1 | 2 => Sense::Ge,
            _ => Sense::Le,
        };
        lp.add_row(coeffs, sense, rng.random_range(-10..=10) as f64);
    }
    lp
}

fn dense(lp: &LpProblem, i: usize) -> Vec<f64> {
    let mut a = vec![0.0; lp.n_vars()];
    for &(j, v) in &lp.rows[i].coeffs {
        a[j] += v;
    }
    a
}

fn gauss(mut a: Vec<Vec<f64>>, mut b: Vec<f64>) -> Option<Vec<f64>> {
    let n = b.len();
    for c in 0..n {
        let p = (c..n).max_by(|&r, &s| a[r][c].abs().total_cmp(&a[s][c].abs()))?;
        if a[p][c].abs() < 1e-9 {
            return None;
        }
        a.swap(c, p);
        b.swap(c, p);
        for r in 0..n {
            if r != c {
                let f = a[r][c] / a[c][c];
                for k in c..n {
                    a[r][k] -= f * a[c][k];
                }
                b[r] -= f * b[c];
            }
        }
    }
    Some((0..n).map(|i| b[i] / a[i][i]).collect())
}

fn lp_feasible(lp: &LpProblem, x: &[f64], tol: f64) -> bool {
    let boxed = (0..lp.n_vars()).all(|j| x[j] >= lp.lower[j] - tol && x[j] <= lp.upper[j] + tol);
    boxed
        && (0..lp.n_rows()).all(|i| {
            let lhs: f64 = dense(lp, i).iter().zip(x).map(|(a, v)| a * v).sum();
            let rhs = lp.rows[i].rhs;
            match lp.rows[i].sense {
                Sense::Le => lhs <= rhs + tol,
                Sense::Ge => lhs >= rhs - tol,
                Sense::Eq => (lhs - rhs).abs() <= tol,
            }
        })
}

/// Minimum over all basic solutions of the box-bounded LP; `None` when no
/// vertex is feasible (a bounded polytope is empty or has an optimal vertex).
fn brute_force(lp: &LpProblem) -> Option<f64> {
    let n = lp.n_vars();
    let mut planes: Vec<(Vec<f64>, f64)> = (0..lp.n_rows()).map(|i| (dense(lp, i), lp.rows[i].rhs)).collect();
    for j in 0..n {
        let mut e = vec![0.0; n];
        e[j] = 1.0;
        planes.push((e.clone(), lp.lower[j]));
        planes.push((e, lp.upper[j]));
    }
    let k = planes.len();
    let mut pick: Vec<usize> = (0..n).collect();
    let mut best: Option<f64> = None;
    loop {
        let a = pick.iter().map(|&i| planes[i].0.clone()).collect();
        let b = pick.iter().map(|&i| planes[i].1).collect();
        if let Some(x) = gauss(a, b) {
            if lp_feasible(lp, &x, 1e-9) {
                let obj: f64 = lp.objective.iter().zip(&x).map(|(c, v)| c * v).sum();
                best = Some(best.map_or(obj, |b: f64| b.min(obj)));
            }
        }
        // next n-combination of k planes
        let Some(i) = (0..n).rev().find(|&i| pick[i] < k - n + i) else {
            return best;
        };
        pick[i] += 1;
        for j in i + 1..n {
            pick[j] = pick[j - 1] + 1;
        }
    }
}

#[test]
fn criterion_1_lp_matches_vertex_enumeration() {
    let start = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(2024);
    let (mut failures, mut optimal, mut infeasible, mut worst) = (Vec::new(), 0, 0, 0.0f64);
    for case in 0..100 {
        let lp = random_lp(&mut rng);
        let sol = solve(&lp).expect("solver error");
        match brute_force(&lp) {
            Some(best) => {
                optimal += 1;
                let gap = (sol.objective_value - best).abs();
                worst = worst.max(gap);
                if sol.status != LpStatus::Optimal || gap > 1e-8 {
                    failures.push(case);
                }
            }
            None => {
                infeasible += 1;
                if sol.status != LpStatus::Infeasible {
                    failures.push(case);
                }
            }
        }
    }
    let detail = format!(
        "{optimal} optimal and {infeasible} infeasible LPs, largest objective gap {worst:.1e}, failures {failures:?}"
    );
    verdict(1, "LP oracle equivalence", failures.is_empty(), &detail, start.elapsed(), Duration::from_secs(10));
}

// ---------------------------------------------------------------- criterion 2

#[test]
fn criterion_2_metric_exactness() {
    let start = Instant::now();
    let u = |n: usize| vec![1.0 / n as f64; n];
    let s = [1.0, 2.0, 3.0, 4.0];
    let mut checks: Vec<(&str, f64, f64)> = vec![
        ("level1 {1,2,3,4} alpha 50", level1(&s, &u(4), 50.0, Tail::Lower).unwrap(), 1.5),
        ("level1 alpha 100 is the mean", level1(&s, &u(4), 100.0, Tail::Lower).unwrap(), 2.5),
        ("level2 below 2.5", level2(&s, &u(4), 2.5, Direction::Below).unwrap(), 0.5),
        ("level2 at threshold", level2(&[2.0, 2.0], &u(2), 2.0, Direction::Below).unwrap(), 0.0),
        (
            "level2 shed above 0",
            level2(&[0.0, 0.0, 5.0], &u(3), 0.0, Direction::Above).unwrap(),
            1.0 / 3.0,
        ),
        (
            "level3 reserve shortfall",
            level3(&[2000.0, 2500.0], &u(2), reserve_shortfall_consequence(3500.0, 2250.0)).unwrap(),
            437_500.0,
        ),
        (
            "level3 all safe",
            level3(&[2300.0, 2500.0], &u(2), reserve_shortfall_consequence(3500.0, 2250.0)).unwrap(),
            0.0,
        ),
        (
            "level3 load shed",
            level3(&[0.0, 10.0], &u(2), load_shed_consequence(3500.0)).unwrap(),
            17_500.0,
        ),
    ];
    // ties at the percentile boundary against a sort-and-average reference
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    for _ in 0..200 {
        let n = rng.random_range(1..40);
        let v: Vec<f64> = (0..n).map(|_| rng.random_range(0..6) as f64).collect();
        let alpha = [5.0, 10.0, 25.0, 50.0, 100.0][rng.random_range(0..5)];
        let mut sorted = v.clone();
        sorted.sort_by(f64::total_cmp);
        let k = ((alpha * n as f64 / 100.0) - 1e-9).ceil().max(1.0) as usize;
        let reference = sorted[..k].iter().sum::<f64>() / k as f64;
        let got = level1(&v, &u(n), alpha, Tail::Lower).unwrap();
        if (got - reference).abs() > 1e-12 * reference.abs().max(1.0) {
            checks.push(("level1 tie convention", got, reference));
        }
    }
    let wrong: Vec<String> = checks
        .iter()
        .filter(|(_, got, want)| got != want)
        .map(|(name, got, want)| format!("{name}: {got} != {want}"))
        .collect();
    let detail = if wrong.is_empty() {
        format!("{} exact cases and 200 tie cases agree", checks.len())
    } else {
        wrong.join("; ")
    };
    verdict(2, "metric exactness", wrong.is_empty(), &detail, start.elapsed(), Duration::from_secs(1));
}

// ---------------------------------------------------------------- criterion 3

/// Zonal and system balance from the primal, independent of the LP rows.
fn balance_residual(sys: &SystemModel, layout: &ScedLayout, x: &[f64], r: &Realization) -> f64 {
    let mut worst: f64 = 0.0;
    let mut total = 0.0;
    for z in 0..sys.n_zones() {
        let mut supply = r.wind[z] + r.solar[z] + x[layout.shed[z]] - x[layout.spill[z]];
        for g in (0..sys.n_generators()).filter(|&g| sys.generator_zone(g) == z) {
            supply += layout.p[g].map_or(0.0, |j| x[j]);
        }
        total += supply - r.load[z];
        worst = worst.max((supply - x[layout.net_export[z]] - r.load[z]).abs());
    }
    worst.max(total.abs())
}

fn recompute(sys: &SystemModel, layout: &ScedLayout, x: &[f64]) -> QoiSample {
    let value = |j: &Option<usize>| j.map_or(0.0, |j| x[j]);
    let reg: f64 = layout.r_reg.iter().rev().map(value).sum();
    let spin: f64 = layout.r_spin.iter().rev().map(value).sum();
    let shed: f64 = layout.shed.iter().rev().map(|&j| x[j]).sum();
    let energy: f64 = sys
        .generators()
        .iter()
        .zip(&layout.p)
        .rev()
        .map(|(g, j)| g.energy_cost * STEP_HOURS * value(j))
        .sum();
    let penalty = sys.reserve_penalty * STEP_HOURS * (x[layout.reg_short] + x[layout.op_short]);
    QoiSample {
        cost: energy + sys.voll * STEP_HOURS * shed + penalty,
        load_shed: shed,
        reg_reserve: reg,
        op_reserve: reg + spin,
    }
}

#[test]
fn criterion_3_sced_physics_on_desk_simulation() {
    let start = Instant::now();
    let fx = desk_fixture(&DeskOptions::default(), 7).unwrap();
    let set = dirichlet_mix(fx.system.zones(), &fx.base_days.scenarios, 50, 0.01, 3).unwrap();
    let y0 = initial_dispatch(&fx.system, fx.schedule.hour(0), &set.mean_at(0)).unwrap();
    let pool = rayon::ThreadPoolBuilder::new().num_threads(8).build().unwrap();
    let traces: Vec<SimulationTrace> = pool.install(|| {
        set.scenarios
            .par_iter()
            .map(|s| simulate_from(&fx.system, &fx.schedule, 0, &y0, s, true).unwrap())
            .collect()
    });
    let (mut worst_balance, mut worst_qoi, mut steps) = (0.0f64, 0.0f64, 0);
    for (scenario, trace) in set.scenarios.iter().zip(&traces) {
        for (t, x) in trace.primal.iter().enumerate() {
            let on = fx.schedule.at_step(t);
            // the layout does not depend on the ramp origin
            let anchor = DispatchState {
                p: fx.system.generators().iter().zip(on).map(|(g, &on)| if on { g.p_min } else { 0.0 }).collect(),
            };
            let layout = build_sced(&fx.system, on, &anchor, &scenario[t]).unwrap().layout;
            worst_balance = worst_balance.max(balance_residual(&fx.system, &layout, x, &scenario[t]));
            let q = recompute(&fx.system, &layout, x);
            for (a, b) in q.to_array().iter().zip(trace.qoi[t].to_array()) {
                worst_qoi = worst_qoi.max((a - b).abs());
            }
            steps += 1;
        }
    }
    let pass = worst_balance <= 1e-6 && worst_qoi <= 1e-6 && steps == 50 * 288;
    let detail = format!("{steps} steps, worst balance residual {worst_balance:.1e} MW, worst QoI mismatch {worst_qoi:.1e}");
    verdict(3, "SCED physics", pass, &detail, start.elapsed(), Duration::from_secs(300));
}

// ---------------------------------------------------------------- criterion 4

fn nn_gradient_check(loss: LossKind) -> (usize, f64) {
    let features = 6;
    let mut rng = ChaCha8Rng::seed_from_u64(8);
    let xs: Vec<Vec<f64>> = (0..16).map(|_| (0..features).map(|_| rng.random_range(0.0..1.0)).collect()).collect();
    let ys: Vec<[f64; 4]> = xs
        .iter()
        .map(|x| std::array::from_fn(|k| x.iter().enumerate().map(|(j, v)| v * (1.0 + ((j + k) % 3) as f64)).sum()))
        .collect();
    let scaling = Scaling {
        x_mean: vec![0.5; features],
        x_std: vec![0.3; features],
        y_mean: [6.0; 4],
        y_std: [1.5; 4],
    };
    let mut net = NeuralNetwork::initialize(features, scaling, loss, 4);
    let theta = net.parameters();
    let (_, grad) = net.loss_and_gradient(&xs, &ys);
    let mut fd = |i: usize, h: f64| {
        let mut t = theta.clone();
        t[i] = theta[i] + h;
        net.set_parameters(&t).unwrap();
        let up = net.loss_on(&xs, &ys);
        t[i] = theta[i] - h;
        net.set_parameters(&t).unwrap();
        let down = net.loss_on(&xs, &ys);
        (up - down) / (2.0 * h)
    };
    let (mut checked, mut worst) = (0, 0.0f64);
    for _ in 0..300 {
        let i = rng.random_range(0..theta.len());
        let (coarse, fine) = (fd(i, 1e-5), fd(i, 1e-6));
        let scale = coarse.abs().max(fine.abs()).max(1e-6);
        // a kink of the piecewise-linear loss lies within the step
        if (coarse - fine).abs() > 1e-5 * scale {
            continue;
        }
        checked += 1;
        worst = worst.max((grad[i] - coarse).abs() / grad[i].abs().max(coarse.abs()).max(1e-8));
    }
    (checked, worst)
}

#[test]
fn criterion_4_hal_correctness() {
    let start = Instant::now();
    let mut runner = TestRunner::new(ProptestConfig::with_cases(10_000));
    let unit = runner.run(&(-1e4f64..1e4, -1e4f64..1e4, -1e4f64..1e4, proptest::bool::ANY), |(q, qhat, qbar, below)| {
        let dir = if below { Direction::Below } else { Direction::Above };
        let p = HalParams { weights: HalWeights::UNIT, threshold: Some((qbar, dir)) };
        let err = (hal_loss(q, qhat, &p) - (q - qhat).abs()).abs();
        proptest::prop_assert!(err <= 1e-9 * (1.0 + q.abs() + qhat.abs()));
        Ok(())
    });

    let mut rng = ChaCha8Rng::seed_from_u64(12);
    let w = HalWeights::default();
    let params = [
        HalParams { weights: w, threshold: Some((0.0, Direction::Above)) },
        HalParams { weights: w, threshold: Some((500.0, Direction::Below)) },
        HalParams { weights: w, threshold: Some((2250.0, Direction::Below)) },
        HalParams { weights: w, threshold: None },
    ];
    let mut sub_worst = 0.0f64;
    for _ in 0..10_000 {
        let p = &params[rng.random_range(0..4)];
        let q = rng.random_range(0.0..3000.0);
        let off = rng.random_range(0.01..500.0) * if rng.random_bool(0.5) { 1.0 } else { -1.0 };
        let h = 1e-4;
        let fd = (hal_loss(q, q + off + h, p) - hal_loss(q, q + off - h, p)) / (2.0 * h);
        sub_worst = sub_worst.max((fd - hal_subgradient(q, q + off, p)).abs());
    }

    let hal = LossKind::Hal(params.map(|p| HalParams { threshold: p.threshold.map(|(_, d)| (6.0, d)), ..p }));
    let (mae_checked, mae_worst) = nn_gradient_check(LossKind::Mae);
    let (hal_checked, hal_worst) = nn_gradient_check(hal);
    let pass = unit.is_ok()
        && sub_worst <= 1e-6
        && mae_worst <= 1e-4
        && hal_worst <= 1e-4
        && mae_checked > 100
        && hal_checked > 100;
    let detail = format!(
        "unit weights {} over 10000 cases; subgradient gap {sub_worst:.1e}; backprop relative error {mae_worst:.1e} (MAE, {mae_checked} coords), {hal_worst:.1e} (HAL, {hal_checked} coords)",
        if unit.is_ok() { "match" } else { "differ" }
    );
    verdict(4, "HAL correctness", pass, &detail, start.elapsed(), Duration::from_secs(30));
}

// ---------------------------------------------------------------- criterion 9

#[test]
fn criterion_9_gbm_calibration() {
    let start = Instant::now();
    let zones = vec!["z".to_string()];
    let hour = vec![Realization { load: vec![100.0], wind: vec![100.0], solar: vec![100.0] }; 12];
    let set = gbm_short_term(&zones, &hour, 10_000, 0.025, 42).unwrap();
    let mut rel = Vec::new();
    for channel in 0..3 {
        let v: Vec<f64> = set
            .scenarios
            .iter()
            .map(|s| [&s[11].load, &s[11].wind, &s[11].solar][channel][0] / 100.0)
            .collect();
        let mean = v.iter().sum::<f64>() / v.len() as f64;
        let var = v.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (v.len() - 1) as f64;
        rel.push(var.sqrt() / mean);
    }
    let pass = rel.iter().all(|r| (0.023..=0.027).contains(r));
    let detail = format!("terminal relative std (load, wind, solar) {:.4} {:.4} {:.4}", rel[0], rel[1], rel[2]);
    verdict(9, "GBM calibration", pass, &detail, start.elapsed(), Duration::from_secs(10));
}

// ---------------------------------------------------------- pipeline criteria

const SEEDS: [u64; 3] = [1, 2, 3];

fn desk_config(seed: u64, dir: &Path) -> RunConfig {
    let path = Path::new(env!("CARGO_MANIFEST_DIR")).join("../../configs/desk.json");
    let mut c = RunConfig::load(&path).expect("configs/desk.json");
    c.seed = seed;
    c.output_dir = dir.to_path_buf();
    c
}

fn scratch(name: &str) -> PathBuf {
    let dir = Path::new(env!("CARGO_TARGET_TMPDIR")).join("acceptance").join(name);
    let _ = std::fs::remove_dir_all(&dir);
    dir
}

struct TrainedRun {
    config: RunConfig,
    manifest: TrainManifest,
}

struct PipelineRuns {
    trained: Vec<TrainedRun>,
    train_seconds: f64,
    rt: Vec<RtManifest>,
    rt_seconds: f64,
}

fn pipeline_runs() -> &'static Result<PipelineRuns, String> {
    static RUNS: OnceLock<Result<PipelineRuns, String>> = OnceLock::new();
    RUNS.get_or_init(|| {
        let start = Instant::now();
        let mut trained = Vec::new();
        for seed in SEEDS {
            let config = desk_config(seed, &scratch(&format!("seed{seed}")));
            cmd_gen_fixtures(&config).map_err(|e| e.to_string())?;
            cmd_da_assess(&config).map_err(|e| e.to_string())?;
            let manifest = cmd_train(&config).map_err(|e| e.to_string())?;
            trained.push(TrainedRun { config, manifest });
        }
        let train_seconds = start.elapsed().as_secs_f64();
        let start = Instant::now();
        let rt = cmd_rt_assess(&trained[0].config, None).map_err(|e| e.to_string())?;
        cmd_report(&trained[0].config).map_err(|e| e.to_string())?;
        Ok(PipelineRuns {
            trained,
            train_seconds,
            rt,
            rt_seconds: start.elapsed().as_secs_f64(),
        })
    })
}

fn runs_or_fail(n: u32, title: &str) -> &'static PipelineRuns {
    match pipeline_runs() {
        Ok(r) => r,
        Err(e) => {
            verdict(n, title, false, &format!("pipeline failed: {e}"), Duration::ZERO, Duration::from_secs(1));
            unreachable!()
        }
    }
}

fn median(mut v: Vec<f64>) -> f64 {
    v.sort_by(f64::total_cmp);
    v[v.len() / 2]
}

#[test]
fn criterion_5_table2_ordering() {
    let title = "unsafe-region error ordering";
    let runs = runs_or_fail(5, title);
    let unsafe_nmae = |kind: ModelKind, qoi: QoiKind| -> Option<f64> {
        let v: Option<Vec<f64>> = runs
            .trained
            .iter()
            .map(|r| {
                r.manifest
                    .models
                    .iter()
                    .find(|m| m.kind == kind)
                    .and_then(|m| m.report.as_ref())
                    .and_then(|rep| rep.get(qoi).unsafe_nmae)
            })
            .collect();
        v.map(median)
    };
    let mut pass = true;
    let mut parts = Vec::new();
    for qoi in [QoiKind::OpReserve, QoiKind::LoadShed] {
        let [rf, mae, hal] = ModelKind::ALL.map(|k| unsafe_nmae(k, qoi));
        match (rf, mae, hal) {
            (Some(rf), Some(mae), Some(hal)) => {
                let a = rf < mae;
                let b = hal <= mae;
                pass &= a && b;
                parts.push(format!(
                    "{}: rf {rf:.4} {} nn_mae {mae:.4} (a {}), nn_hal {hal:.4} {} nn_mae (b {})",
                    qoi.name(),
                    if a { "<" } else { ">=" },
                    if a { "ok" } else { "fails" },
                    if b { "<=" } else { ">" },
                    if b { "ok" } else { "fails" },
                ));
            }
            _ => {
                pass = false;
                parts.push(format!("{}: missing unsafe rows or a failed model", qoi.name()));
            }
        }
    }
    let detail = format!("medians over seeds {SEEDS:?}; {}", parts.join("; "));
    verdict(5, title, pass, &detail, Duration::from_secs_f64(runs.train_seconds), Duration::from_secs(1200));
}

/// `(window_start, step, evaluator, qoi) -> level3` rows of a case.
fn level3_rows(layout: &Layout, case: Case) -> Vec<(usize, usize, String, String, f64)> {
    let mut r = csv::Reader::from_path(layout.rt_risk(case.name())).expect("rt risk csv");
    r.records()
        .map(|rec| {
            let rec = rec.unwrap();
            (
                rec[0].parse().unwrap(),
                rec[1].parse().unwrap(),
                rec[2].to_string(),
                rec[3].to_string(),
                rec[6].parse().unwrap_or(0.0),
            )
        })
        .collect()
}

fn paired(rows: &[(usize, usize, String, String, f64)], model: &str, qoi: &str) -> Vec<(f64, f64)> {
    let pick = |ev: &str| -> Vec<((usize, usize), f64)> {
        rows.iter()
            .filter(|r| r.2 == ev && r.3 == qoi)
            .map(|r| ((r.0, r.1), r.4))
            .collect()
    };
    let oracle = pick("oracle");
    let surrogate = pick(model);
    assert_eq!(oracle.len(), surrogate.len());
    oracle
        .iter()
        .zip(&surrogate)
        .map(|((ka, o), (kb, s))| {
            assert_eq!(ka, kb);
            (*o, *s)
        })
        .collect()
}

#[test]
fn criterion_6_surrogate_risk_fidelity() {
    let title = "real-time risk fidelity";
    let runs = runs_or_fail(6, title);
    let run = &runs.trained[0];
    let layout = Layout::new(&run.config.output_dir);
    let Some(selected) = run.manifest.selected else {
        verdict(6, title, false, "no model selected", Duration::ZERO, Duration::from_secs(1));
        return;
    };
    let model = selected.id();
    let (mut abs_err, mut oracle_sum, mut n_nonzero) = (0.0, 0.0, 0);
    let shed_mean = |case: Case, who: &str| -> f64 {
        let rows = level3_rows(&layout, case);
        let p = paired(&rows, model, "load_shed");
        let v: Vec<f64> = p.iter().map(|(o, s)| if who == "oracle" { *o } else { *s }).collect();
        v.iter().sum::<f64>() / v.len() as f64
    };
    let high_oracle_shed = shed_mean(Case::High, "oracle");
    let low_surrogate_shed = shed_mean(Case::Low, model);
    for case in Case::ALL {
        let rows = level3_rows(&layout, case);
        for (o, s) in paired(&rows, model, "op_reserve") {
            if o > 0.0 {
                abs_err += (s - o).abs();
                oracle_sum += o;
                n_nonzero += 1;
            }
        }
    }
    let rel = if oracle_sum > 0.0 { abs_err / oracle_sum } else { f64::INFINITY };
    let shed_ratio = if high_oracle_shed > 0.0 { low_surrogate_shed / high_oracle_shed } else { f64::INFINITY };
    let pass = n_nonzero > 0 && rel <= 0.25 && shed_ratio <= 0.05;
    let detail = format!(
        "{model}: pooled op-reserve level-3 relative error {rel:.3} over {n_nonzero} nonzero window steps; low-case shed risk {low_surrogate_shed:.1} is {:.2}% of high-case mean {high_oracle_shed:.1}",
        100.0 * shed_ratio
    );
    verdict(6, title, pass, &detail, Duration::from_secs_f64(runs.rt_seconds), Duration::from_secs(1800));
}

#[test]
fn criterion_7_speedup() {
    let title = "surrogate speedup";
    let runs = runs_or_fail(7, title);
    let high = runs.rt.iter().find(|m| m.choice.case == Case::High).expect("high case manifest");
    // the figure must be the one recorded on disk
    let layout = Layout::new(&runs.trained[0].config.output_dir);
    let recorded: RtManifest = read_json(layout.rt_manifest("high")).unwrap();
    let t = &recorded.timing;
    let detail = format!(
        "{} scenarios, median of {} runs: oracle {:.1} us, {} {:.2} us per scenario, speedup {:.1}x (other cases {})",
        t.n_scenarios,
        t.repeats,
        t.oracle_us_per_scenario,
        t.model.id(),
        t.surrogate_us_per_scenario,
        t.speedup,
        runs.rt
            .iter()
            .filter(|m| m.choice.case != Case::High)
            .map(|m| format!("{} {:.1}x", m.choice.case.name(), m.timing.speedup))
            .collect::<Vec<_>>()
            .join(", ")
    );
    let pass = t.n_scenarios >= 1000 && t.speedup >= 50.0 && recorded.timing.speedup == high.timing.speedup;
    let elapsed = Duration::from_secs_f64(t.oracle_seconds.iter().chain(&t.surrogate_seconds).sum());
    verdict(7, title, pass, &detail, elapsed, Duration::from_secs(600));
}

fn deterministic_outputs(layout: &Layout) -> Vec<PathBuf> {
    let mut files = vec![layout.da_risk(), layout.table2()];
    for case in Case::ALL {
        files.push(layout.rt_risk(case.name()));
        files.push(layout.rt_errors(case.name()));
    }
    for f in gridrisk_cli::commands::report::REPORT_FILES {
        files.push(layout.report().join(f));
    }
    files
}

#[test]
fn criterion_8_determinism() {
    let title = "determinism";
    let runs = runs_or_fail(8, title);
    let start = Instant::now();
    let first = &runs.trained[0].config;
    let again = desk_config(first.seed, &scratch("seed1_rerun"));
    let rerun = gridrisk_cli::run_pipeline(&again);
    let (a, b) = (Layout::new(&first.output_dir), Layout::new(&again.output_dir));
    let files = deterministic_outputs(&a);
    let differing: Vec<String> = files
        .iter()
        .zip(deterministic_outputs(&b))
        .filter(|(x, y)| std::fs::read(x).ok() != std::fs::read(y).ok() || !x.exists())
        .map(|(x, _)| x.file_name().unwrap().to_string_lossy().into_owned())
        .collect();
    let pass = rerun.is_ok() && differing.is_empty();
    let detail = match &rerun {
        Err(e) => format!("rerun failed: {e}"),
        Ok(()) if differing.is_empty() => format!("{} risk-profile and report CSVs byte-identical across reruns", files.len()),
        Ok(()) => format!("differing files: {differing:?}"),
    };
    verdict(8, title, pass, &detail, start.elapsed(), Duration::from_secs(1200));
}
