//! Single-period real-time economic dispatch and its quantities of interest.
//!
//! Each 5-minute step solves one LP over the committed units:
//!
//! * energy `p[g]` within `[p_min, p_max]` and one ramp step of the previous
//!   output,
//! * regulating reserve `r_reg[g] <= ramp_rate[g]` on regulation-capable units
//!   and spinning reserve `r_spin[g]`, sharing headroom `p + r_reg + r_spin <= p_max`,
//! * zonal balance with load shed, renewable spill and capped net exports that
//!   sum to zero,
//! * system reserve requirements softened by shortfall variables.
//!
//! Reserves carry a tiny availability credit in the objective so the LP
//! reports all deliverable headroom instead of an arbitrary vertex of an
//! otherwise flat face; regulating reserve is credited slightly more than
//! spinning reserve so the split between the two is unique as well. The cost
//! QoI excludes these credits.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::grid_model::{
    CommitmentSchedule, Realization, SystemModel, STEPS_PER_HOUR, STEP_HOURS,
};
use crate::lpsolve::{self, Basis, LpProblem, LpStatus, Sense};

/// $ per MW per step credited to procured regulating reserve.
pub const REG_CREDIT: f64 = 2e-4;
/// $ per MW per step credited to procured spinning reserve.
pub const SPIN_CREDIT: f64 = 1e-4;

/// Per-generator MW output. Zero for uncommitted units.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DispatchState {
    pub p: Vec<f64>,
}

impl DispatchState {
    pub fn zeros(n_generators: usize) -> Self {
        DispatchState {
            p: vec![0.0; n_generators],
        }
    }

    pub fn total(&self) -> f64 {
        self.p.iter().sum()
    }

    /// Applies an hour-boundary commitment change: newly committed units
    /// enter at `p_min`, de-committed units drop to zero.
    pub fn transition(&mut self, system: &SystemModel, from: &[bool], to: &[bool]) {
        for (g, gen) in system.generators().iter().enumerate() {
            if to[g] && !from[g] {
                self.p[g] = gen.p_min;
            } else if !to[g] {
                self.p[g] = 0.0;
            }
        }
    }

    pub fn validate(&self, system: &SystemModel, commitment: &[bool]) -> Result<()> {
        if self.p.len() != system.n_generators() {
            return Err(Error::Dimension {
                what: "dispatch state generators",
                expected: system.n_generators(),
                found: self.p.len(),
            });
        }
        for (g, gen) in system.generators().iter().enumerate() {
            let p = self.p[g];
            let ok = if commitment[g] {
                p >= gen.p_min - 1e-6 && p <= gen.p_max + 1e-6
            } else {
                p.abs() <= 1e-6
            };
            if !ok {
                return Err(Error::Validation(format!(
                    "generator {}: previous output {p} inconsistent with commitment {}",
                    gen.id, commitment[g]
                )));
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum QoiKind {
    Cost,
    LoadShed,
    RegReserve,
    OpReserve,
}

impl QoiKind {
    pub const ALL: [QoiKind; 4] = [
        QoiKind::Cost,
        QoiKind::LoadShed,
        QoiKind::RegReserve,
        QoiKind::OpReserve,
    ];

    pub fn index(self) -> usize {
        self as usize
    }

    pub fn name(self) -> &'static str {
        match self {
            QoiKind::Cost => "cost",
            QoiKind::LoadShed => "load_shed",
            QoiKind::RegReserve => "reg_reserve",
            QoiKind::OpReserve => "op_reserve",
        }
    }

    pub fn from_name(name: &str) -> Option<Self> {
        Self::ALL.into_iter().find(|k| k.name() == name)
    }
}

/// The four quantities of interest of one dispatch step.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct QoiSample {
    /// $ for the 5-minute step: energy, load shed and reserve shortfall.
    pub cost: f64,
    pub load_shed: f64,
    pub reg_reserve: f64,
    pub op_reserve: f64,
}

impl QoiSample {
    pub fn to_array(self) -> [f64; 4] {
        [self.cost, self.load_shed, self.reg_reserve, self.op_reserve]
    }

    pub fn from_array(a: [f64; 4]) -> Self {
        QoiSample {
            cost: a[0],
            load_shed: a[1],
            reg_reserve: a[2],
            op_reserve: a[3],
        }
    }

    pub fn get(&self, kind: QoiKind) -> f64 {
        self.to_array()[kind.index()]
    }
}

/// Column indices of a built dispatch LP.
#[derive(Debug, Clone, PartialEq)]
pub struct ScedLayout {
    /// Per generator; `None` when uncommitted.
    pub p: Vec<Option<usize>>,
    pub r_reg: Vec<Option<usize>>,
    pub r_spin: Vec<Option<usize>>,
    pub shed: Vec<usize>,
    pub spill: Vec<usize>,
    pub net_export: Vec<usize>,
    pub reg_short: usize,
    pub op_short: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ScedProblem {
    pub lp: LpProblem,
    pub layout: ScedLayout,
}

/// Builds the dispatch LP for one step. `prev` supplies the ramp window.
pub fn build_sced(
    system: &SystemModel,
    commitment: &[bool],
    prev: &DispatchState,
    realization: &Realization,
) -> Result<ScedProblem> {
    build(system, commitment, Some(prev), realization)
}

fn build(
    system: &SystemModel,
    commitment: &[bool],
    prev: Option<&DispatchState>,
    r: &Realization,
) -> Result<ScedProblem> {
    let ng = system.n_generators();
    let nz = system.n_zones();
    if commitment.len() != ng {
        return Err(Error::Dimension {
            what: "commitment row",
            expected: ng,
            found: commitment.len(),
        });
    }
    r.validate(nz)?;
    if let Some(prev) = prev {
        prev.validate(system, commitment)?;
    }
    let inf = f64::INFINITY;
    let mut lp = LpProblem::new();
    let mut p = vec![None; ng];
    let mut r_reg = vec![None; ng];
    let mut r_spin = vec![None; ng];
    for (g, gen) in system.generators().iter().enumerate() {
        if !commitment[g] {
            continue;
        }
        let (mut lo, mut hi) = (gen.p_min, gen.p_max);
        if let Some(prev) = prev {
            let pg = prev.p[g].clamp(gen.p_min, gen.p_max);
            lo = lo.max(pg - gen.ramp_rate);
            hi = hi.min(pg + gen.ramp_rate);
        }
        p[g] = Some(lp.add_var(gen.energy_cost * STEP_HOURS, lo, hi));
        if gen.reg_capable {
            r_reg[g] = Some(lp.add_var(-REG_CREDIT, 0.0, gen.ramp_rate));
        }
        r_spin[g] = Some(lp.add_var(-SPIN_CREDIT, 0.0, inf));
    }
    let shed: Vec<usize> = (0..nz)
        .map(|z| lp.add_var(system.voll * STEP_HOURS, 0.0, r.load[z]))
        .collect();
    let spill: Vec<usize> = (0..nz).map(|_| lp.add_var(0.0, 0.0, inf)).collect();
    let net_export: Vec<usize> = (0..nz)
        .map(|z| {
            let lim = system.export_limit(z);
            lp.add_var(0.0, -lim, lim)
        })
        .collect();
    let penalty = system.reserve_penalty * STEP_HOURS;
    let reg_short = lp.add_var(penalty, 0.0, system.mrr_reg);
    let op_short = lp.add_var(penalty, 0.0, system.mrr_op);

    // zonal balance
    for z in 0..nz {
        let mut coeffs: Vec<(usize, f64)> = (0..ng)
            .filter(|&g| system.generator_zone(g) == z)
            .filter_map(|g| p[g].map(|j| (j, 1.0)))
            .collect();
        coeffs.push((shed[z], 1.0));
        coeffs.push((spill[z], -1.0));
        coeffs.push((net_export[z], -1.0));
        lp.add_row(coeffs, Sense::Eq, r.load[z] - r.wind[z] - r.solar[z]);
    }
    // exports net to zero
    if nz > 1 {
        lp.add_row(net_export.iter().map(|&j| (j, 1.0)).collect(), Sense::Eq, 0.0);
    }
    // headroom
    for (g, gen) in system.generators().iter().enumerate() {
        let Some(pj) = p[g] else { continue };
        let mut coeffs = vec![(pj, 1.0)];
        if let Some(j) = r_reg[g] {
            coeffs.push((j, 1.0));
        }
        coeffs.push((r_spin[g].expect("spin column for committed unit"), 1.0));
        lp.add_row(coeffs, Sense::Le, gen.p_max);
    }
    // reserve adequacy
    let mut reg_row: Vec<(usize, f64)> = r_reg.iter().flatten().map(|&j| (j, 1.0)).collect();
    reg_row.push((reg_short, 1.0));
    lp.add_row(reg_row, Sense::Ge, system.mrr_reg);
    let mut op_row: Vec<(usize, f64)> = r_reg
        .iter()
        .chain(r_spin.iter())
        .flatten()
        .map(|&j| (j, 1.0))
        .collect();
    op_row.push((op_short, 1.0));
    lp.add_row(op_row, Sense::Ge, system.mrr_op);

    Ok(ScedProblem {
        lp,
        layout: ScedLayout {
            p,
            r_reg,
            r_spin,
            shed,
            spill,
            net_export,
            reg_short,
            op_short,
        },
    })
}

/// Result of one dispatch step.
#[derive(Debug, Clone, PartialEq)]
pub struct ScedOutcome {
    pub dispatch: DispatchState,
    pub qoi: QoiSample,
    pub primal: Vec<f64>,
    pub basis: Option<Basis>,
}

/// Extracts the dispatch and QoIs from an LP primal vector.
pub fn qoi_from_primal(
    system: &SystemModel,
    layout: &ScedLayout,
    x: &[f64],
) -> (DispatchState, QoiSample) {
    let mut dispatch = DispatchState::zeros(system.n_generators());
    let mut energy = 0.0;
    let mut reg = 0.0;
    let mut op = 0.0;
    for (g, gen) in system.generators().iter().enumerate() {
        if let Some(j) = layout.p[g] {
            dispatch.p[g] = x[j];
            energy += gen.energy_cost * x[j];
        }
        if let Some(j) = layout.r_reg[g] {
            reg += x[j];
        }
        if let Some(j) = layout.r_spin[g] {
            op += x[j];
        }
    }
    op += reg;
    let shed: f64 = layout.shed.iter().map(|&j| x[j]).sum();
    let shortfall = x[layout.reg_short] + x[layout.op_short];
    let cost = (energy + system.voll * shed + system.reserve_penalty * shortfall) * STEP_HOURS;
    let qoi = QoiSample {
        cost: cost.max(0.0),
        load_shed: shed.max(0.0),
        reg_reserve: reg.max(0.0),
        op_reserve: op.max(reg.max(0.0)),
    };
    (dispatch, qoi)
}

/// Solves one step, optionally warm-started from the previous step's basis.
pub fn solve_sced_warm(
    system: &SystemModel,
    commitment: &[bool],
    prev: Option<&DispatchState>,
    realization: &Realization,
    basis: Option<&Basis>,
) -> Result<ScedOutcome> {
    let problem = build(system, commitment, prev, realization)?;
    let sol = match basis {
        Some(b) => lpsolve::warm_hint(&problem.lp, b)?,
        None => lpsolve::solve(&problem.lp)?,
    };
    if sol.status != LpStatus::Optimal {
        return Err(Error::Internal(format!(
            "dispatch LP reported {:?}; shed and shortfall slacks should make it feasible \
             and bounded",
            sol.status
        )));
    }
    let (dispatch, qoi) = qoi_from_primal(system, &problem.layout, &sol.primal);
    Ok(ScedOutcome {
        dispatch,
        qoi,
        primal: sol.primal,
        basis: sol.basis,
    })
}

pub fn solve_sced(
    system: &SystemModel,
    commitment: &[bool],
    prev: &DispatchState,
    realization: &Realization,
) -> Result<(DispatchState, QoiSample)> {
    let out = solve_sced_warm(system, commitment, Some(prev), realization, None)?;
    Ok((out.dispatch, out.qoi))
}

/// Dispatch that ignores ramp limits, used to seed a simulation so that its
/// first step is already ramp-feasible.
pub fn initial_dispatch(
    system: &SystemModel,
    commitment: &[bool],
    realization: &Realization,
) -> Result<DispatchState> {
    Ok(solve_sced_warm(system, commitment, None, realization, None)?.dispatch)
}

/// Dispatch trace of a chained simulation.
#[derive(Debug, Clone, PartialEq)]
pub struct SimulationTrace {
    pub qoi: Vec<QoiSample>,
    /// Per-step dispatch and LP primal; empty unless requested.
    pub dispatch: Vec<DispatchState>,
    pub primal: Vec<Vec<f64>>,
}

/// Chains dispatch LPs over `trajectory`, whose first element is step
/// `start_step` of the day. Each step uses the previous step's dispatch as
/// its ramp origin, and commitment switches at hour boundaries.
pub fn simulate_from(
    system: &SystemModel,
    schedule: &CommitmentSchedule,
    start_step: usize,
    initial: &DispatchState,
    trajectory: &[Realization],
    keep_detail: bool,
) -> Result<SimulationTrace> {
    if initial.p.len() != system.n_generators() {
        return Err(Error::Dimension {
            what: "initial dispatch generators",
            expected: system.n_generators(),
            found: initial.p.len(),
        });
    }
    let mut prev = initial.clone();
    // Units on in the initial state count as committed before the first step.
    let mut committed: Vec<bool> = initial.p.iter().map(|p| *p > 0.0).collect();
    let mut basis: Option<Basis> = None;
    let mut trace = SimulationTrace {
        qoi: Vec::with_capacity(trajectory.len()),
        dispatch: Vec::new(),
        primal: Vec::new(),
    };
    for (k, r) in trajectory.iter().enumerate() {
        let step = start_step + k;
        let row = schedule.at_step(step);
        if row != committed.as_slice() || k == 0 {
            prev.transition(system, &committed, row);
            if row != committed.as_slice() {
                basis = None;
            }
            committed.clear();
            committed.extend_from_slice(row);
        }
        let out = solve_sced_warm(system, row, Some(&prev), r, basis.as_ref())
            .map_err(|e| e.at_step(step))?;
        basis = out.basis;
        trace.qoi.push(out.qoi);
        if keep_detail {
            trace.dispatch.push(out.dispatch.clone());
            trace.primal.push(out.primal);
        }
        prev = out.dispatch;
    }
    Ok(trace)
}

/// Full-day simulation (288 chained steps from midnight).
pub fn simulate_day(
    system: &SystemModel,
    schedule: &CommitmentSchedule,
    y0: &DispatchState,
    scenario: &[Realization],
) -> Result<Vec<QoiSample>> {
    if scenario.len() != crate::grid_model::STEPS_PER_DAY {
        return Err(Error::Dimension {
            what: "day trajectory steps",
            expected: crate::grid_model::STEPS_PER_DAY,
            found: scenario.len(),
        });
    }
    Ok(simulate_from(system, schedule, 0, y0, scenario, false)?.qoi)
}

/// Hour of the day of a step index.
pub fn hour_of(step: usize) -> usize {
    step / STEPS_PER_HOUR
}
