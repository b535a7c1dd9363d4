//! Zonal system model, hourly commitment schedules and load/renewable
//! realizations.
//!
//! The network is a zonal copper plate: every zone balances its own load
//! against local generation, renewables, load shed and a net export that is
//! capped per zone and sums to zero across the system.

use std::collections::BTreeMap;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub const STEPS_PER_HOUR: usize = 12;
pub const HOURS_PER_DAY: usize = 24;
pub const STEPS_PER_DAY: usize = STEPS_PER_HOUR * HOURS_PER_DAY;

/// Hours per 5-minute step, used to turn $/MWh into $ per step.
pub const STEP_HOURS: f64 = 1.0 / STEPS_PER_HOUR as f64;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Generator {
    pub id: String,
    pub zone: String,
    pub p_min: f64,
    pub p_max: f64,
    /// MW per 5-minute step.
    pub ramp_rate: f64,
    /// $/MWh, constant marginal cost.
    pub energy_cost: f64,
    #[serde(default)]
    pub reg_capable: bool,
}

fn default_mrr_reg() -> f64 {
    500.0
}
fn default_mrr_op() -> f64 {
    2250.0
}
fn default_voll() -> f64 {
    3500.0
}
fn default_reserve_penalty() -> f64 {
    1000.0
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
struct SystemFile {
    zones: Vec<String>,
    generators: Vec<Generator>,
    export_limits: BTreeMap<String, f64>,
    #[serde(default = "default_mrr_reg")]
    mrr_reg: f64,
    #[serde(default = "default_mrr_op")]
    mrr_op: f64,
    #[serde(default = "default_voll")]
    voll: f64,
    #[serde(default = "default_reserve_penalty")]
    reserve_penalty: f64,
}

/// Validated zonal system. Construct with [`SystemModel::new`] or
/// [`load_system`]; fields are read-only afterwards.
#[derive(Debug, Clone, PartialEq)]
pub struct SystemModel {
    zones: Vec<String>,
    generators: Vec<Generator>,
    export_limits: Vec<f64>,
    gen_zone: Vec<usize>,
    pub mrr_reg: f64,
    pub mrr_op: f64,
    pub voll: f64,
    pub reserve_penalty: f64,
}

impl SystemModel {
    /// Builds a system with the default reserve requirements and prices
    /// (500 MW regulating, 2250 MW operating, 3500 $/MW VOLL, 1000 $/MW
    /// reserve shortfall penalty).
    pub fn new(
        zones: Vec<String>,
        generators: Vec<Generator>,
        export_limits: BTreeMap<String, f64>,
    ) -> Result<Self> {
        Self::from_file(SystemFile {
            zones,
            generators,
            export_limits,
            mrr_reg: default_mrr_reg(),
            mrr_op: default_mrr_op(),
            voll: default_voll(),
            reserve_penalty: default_reserve_penalty(),
        })
    }

    pub fn with_requirements(mut self, mrr_reg: f64, mrr_op: f64) -> Result<Self> {
        self.mrr_reg = mrr_reg;
        self.mrr_op = mrr_op;
        self.validate_scalars()?;
        Ok(self)
    }

    pub fn with_prices(mut self, voll: f64, reserve_penalty: f64) -> Result<Self> {
        self.voll = voll;
        self.reserve_penalty = reserve_penalty;
        self.validate_scalars()?;
        Ok(self)
    }

    fn from_file(file: SystemFile) -> Result<Self> {
        if file.zones.is_empty() {
            return Err(Error::Validation("system has no zones".into()));
        }
        if file.generators.is_empty() {
            return Err(Error::Validation("system has no generators".into()));
        }
        for (i, z) in file.zones.iter().enumerate() {
            if file.zones[..i].contains(z) {
                return Err(Error::Validation(format!("duplicate zone {z}")));
            }
        }
        let mut gen_zone = Vec::with_capacity(file.generators.len());
        for (i, g) in file.generators.iter().enumerate() {
            if file.generators[..i].iter().any(|h| h.id == g.id) {
                return Err(Error::Validation(format!("duplicate generator id {}", g.id)));
            }
            let zi = file.zones.iter().position(|z| *z == g.zone).ok_or_else(|| {
                Error::Validation(format!("generator {}: unknown zone {}", g.id, g.zone))
            })?;
            let finite = [g.p_min, g.p_max, g.ramp_rate, g.energy_cost]
                .iter()
                .all(|v| v.is_finite());
            if !finite {
                return Err(Error::Validation(format!(
                    "generator {}: non-finite parameter",
                    g.id
                )));
            }
            if g.p_min < 0.0 {
                return Err(Error::Validation(format!(
                    "generator {}: p_min {} < 0",
                    g.id, g.p_min
                )));
            }
            if g.p_min > g.p_max {
                return Err(Error::Validation(format!(
                    "generator {}: p_min {} > p_max {}",
                    g.id, g.p_min, g.p_max
                )));
            }
            if g.ramp_rate <= 0.0 {
                return Err(Error::Validation(format!(
                    "generator {}: ramp_rate {} must be > 0",
                    g.id, g.ramp_rate
                )));
            }
            gen_zone.push(zi);
        }
        let mut export_limits = Vec::with_capacity(file.zones.len());
        for z in &file.zones {
            let lim = *file.export_limits.get(z).ok_or_else(|| {
                Error::Validation(format!("zone {z}: missing export limit"))
            })?;
            if !(lim >= 0.0) {
                return Err(Error::Validation(format!(
                    "zone {z}: export limit {lim} must be >= 0"
                )));
            }
            export_limits.push(lim);
        }
        if let Some(extra) = file.export_limits.keys().find(|k| !file.zones.contains(k)) {
            return Err(Error::Validation(format!(
                "export limit given for unknown zone {extra}"
            )));
        }
        let sys = SystemModel {
            zones: file.zones,
            generators: file.generators,
            export_limits,
            gen_zone,
            mrr_reg: file.mrr_reg,
            mrr_op: file.mrr_op,
            voll: file.voll,
            reserve_penalty: file.reserve_penalty,
        };
        sys.validate_scalars()?;
        Ok(sys)
    }

    fn validate_scalars(&self) -> Result<()> {
        if !(self.mrr_reg >= 0.0 && self.mrr_reg <= self.mrr_op) {
            return Err(Error::Validation(format!(
                "need 0 <= mrr_reg ({}) <= mrr_op ({})",
                self.mrr_reg, self.mrr_op
            )));
        }
        if !(self.voll > 0.0) {
            return Err(Error::Validation(format!("voll {} must be > 0", self.voll)));
        }
        if !(self.reserve_penalty > 0.0) {
            return Err(Error::Validation(format!(
                "reserve_penalty {} must be > 0",
                self.reserve_penalty
            )));
        }
        Ok(())
    }

    fn to_file(&self) -> SystemFile {
        SystemFile {
            zones: self.zones.clone(),
            generators: self.generators.clone(),
            export_limits: self
                .zones
                .iter()
                .cloned()
                .zip(self.export_limits.iter().copied())
                .collect(),
            mrr_reg: self.mrr_reg,
            mrr_op: self.mrr_op,
            voll: self.voll,
            reserve_penalty: self.reserve_penalty,
        }
    }

    pub fn zones(&self) -> &[String] {
        &self.zones
    }

    pub fn n_zones(&self) -> usize {
        self.zones.len()
    }

    pub fn generators(&self) -> &[Generator] {
        &self.generators
    }

    pub fn n_generators(&self) -> usize {
        self.generators.len()
    }

    /// Zone index (into [`zones`](Self::zones)) of generator `g`.
    pub fn generator_zone(&self, g: usize) -> usize {
        self.gen_zone[g]
    }

    /// Net-export cap of zone `z`, MW.
    pub fn export_limit(&self, z: usize) -> f64 {
        self.export_limits[z]
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(&self.to_file())?)
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let file: SystemFile = serde_json::from_str(text)?;
        Self::from_file(file)
    }
}

pub fn load_system(path: impl AsRef<Path>) -> Result<SystemModel> {
    let path = path.as_ref();
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    SystemModel::from_json(&text)
}

pub fn save_system(system: &SystemModel, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    std::fs::write(path, system.to_json()? + "\n").map_err(|e| Error::io(path, e))
}

/// Hourly on/off status, 24 rows by generator.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CommitmentSchedule {
    /// Generator ids in system order, so a schedule file is self-describing.
    pub generators: Vec<String>,
    pub on_status: Vec<Vec<bool>>,
}

impl CommitmentSchedule {
    pub fn new(system: &SystemModel, on_status: Vec<Vec<bool>>) -> Result<Self> {
        let s = CommitmentSchedule {
            generators: system.generators().iter().map(|g| g.id.clone()).collect(),
            on_status,
        };
        s.validate(system)?;
        Ok(s)
    }

    /// Every generator on in every hour.
    pub fn all_on(system: &SystemModel) -> Self {
        CommitmentSchedule {
            generators: system.generators().iter().map(|g| g.id.clone()).collect(),
            on_status: vec![vec![true; system.n_generators()]; HOURS_PER_DAY],
        }
    }

    pub fn validate(&self, system: &SystemModel) -> Result<()> {
        if self.on_status.len() != HOURS_PER_DAY {
            return Err(Error::Dimension {
                what: "commitment schedule hours",
                expected: HOURS_PER_DAY,
                found: self.on_status.len(),
            });
        }
        for row in &self.on_status {
            if row.len() != system.n_generators() {
                return Err(Error::Dimension {
                    what: "commitment schedule generators",
                    expected: system.n_generators(),
                    found: row.len(),
                });
            }
        }
        let ids_match = self.generators.len() == system.n_generators()
            && self
                .generators
                .iter()
                .zip(system.generators())
                .all(|(a, g)| *a == g.id);
        if !ids_match {
            return Err(Error::Validation(
                "commitment schedule generator ids do not match the system".into(),
            ));
        }
        Ok(())
    }

    pub fn hour(&self, hour: usize) -> &[bool] {
        &self.on_status[hour % HOURS_PER_DAY]
    }

    /// Commitment row governing 5-minute step `step`.
    pub fn at_step(&self, step: usize) -> &[bool] {
        self.hour(step / STEPS_PER_HOUR)
    }

    pub fn committed_capacity(&self, system: &SystemModel, hour: usize) -> f64 {
        self.hour(hour)
            .iter()
            .zip(system.generators())
            .filter(|(on, _)| **on)
            .map(|(_, g)| g.p_max)
            .sum()
    }

    pub fn load(path: impl AsRef<Path>, system: &SystemModel) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let s: CommitmentSchedule = serde_json::from_str(&text)?;
        s.validate(system)?;
        Ok(s)
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        let text = serde_json::to_string(self)? + "\n";
        std::fs::write(path, text).map_err(|e| Error::io(path, e))
    }
}

/// Greedy merit-order commitment: per hour, commit in ascending energy cost
/// until committed capacity covers `(1 + margin) * peak`, or every unit is on.
pub fn priority_list_commitment(
    system: &SystemModel,
    hourly_peak_load: &[f64],
    margin: f64,
) -> Result<CommitmentSchedule> {
    priority_list_commitment_with_margins(system, hourly_peak_load, &[margin; HOURS_PER_DAY])
}

/// [`priority_list_commitment`] with a separate margin for each hour.
pub fn priority_list_commitment_with_margins(
    system: &SystemModel,
    hourly_peak_load: &[f64],
    margins: &[f64],
) -> Result<CommitmentSchedule> {
    if hourly_peak_load.len() != HOURS_PER_DAY {
        return Err(Error::Dimension {
            what: "hourly peak load",
            expected: HOURS_PER_DAY,
            found: hourly_peak_load.len(),
        });
    }
    if margins.len() != HOURS_PER_DAY {
        return Err(Error::Dimension {
            what: "hourly margins",
            expected: HOURS_PER_DAY,
            found: margins.len(),
        });
    }
    if let Some(m) = margins.iter().find(|m| !(**m >= 0.0)) {
        return Err(Error::Precondition(format!("margin {m} must be >= 0")));
    }
    if let Some(p) = hourly_peak_load.iter().find(|p| !(**p >= 0.0)) {
        return Err(Error::Precondition(format!("peak load {p} must be >= 0")));
    }
    let mut order: Vec<usize> = (0..system.n_generators()).collect();
    // Stable sort keeps file order among equal costs.
    order.sort_by(|&a, &b| {
        system.generators()[a]
            .energy_cost
            .total_cmp(&system.generators()[b].energy_cost)
    });
    let on_status = hourly_peak_load
        .iter()
        .zip(margins)
        .map(|(&peak, &margin)| {
            let target = (1.0 + margin) * peak;
            let mut row = vec![false; system.n_generators()];
            let mut cap = 0.0;
            for &g in &order {
                if cap >= target {
                    break;
                }
                row[g] = true;
                cap += system.generators()[g].p_max;
            }
            row
        })
        .collect();
    CommitmentSchedule::new(system, on_status)
}

/// One 5-minute sample of zonal load, wind and solar (MW), indexed by the
/// system's zone order.
#[derive(Debug, Clone, PartialEq)]
pub struct Realization {
    pub load: Vec<f64>,
    pub wind: Vec<f64>,
    pub solar: Vec<f64>,
}

pub type Trajectory = Vec<Realization>;

impl Realization {
    pub fn zeros(n_zones: usize) -> Self {
        Realization {
            load: vec![0.0; n_zones],
            wind: vec![0.0; n_zones],
            solar: vec![0.0; n_zones],
        }
    }

    pub fn n_zones(&self) -> usize {
        self.load.len()
    }

    pub fn validate(&self, n_zones: usize) -> Result<()> {
        for (what, v) in [("load", &self.load), ("wind", &self.wind), ("solar", &self.solar)] {
            if v.len() != n_zones {
                return Err(Error::Dimension {
                    what: "realization zones",
                    expected: n_zones,
                    found: v.len(),
                });
            }
            if let Some(x) = v.iter().find(|x| !(**x >= 0.0) || !x.is_finite()) {
                return Err(Error::Validation(format!(
                    "realization {what} value {x} must be finite and >= 0"
                )));
            }
        }
        Ok(())
    }

    pub fn total_load(&self) -> f64 {
        self.load.iter().sum()
    }

    pub fn total_wind(&self) -> f64 {
        self.wind.iter().sum()
    }

    pub fn total_solar(&self) -> f64 {
        self.solar.iter().sum()
    }

    /// Load minus wind and solar, system-wide.
    pub fn net_load(&self) -> f64 {
        self.total_load() - self.total_wind() - self.total_solar()
    }
}

/// Number of surrogate input features for a system with `n_zones` zones.
pub fn feature_len(n_zones: usize) -> usize {
    3 + 3 * n_zones
}

/// Surrogate input vector: system totals of load, wind and solar, then
/// load, wind and solar per zone, each block in zone order.
pub fn features_of(realization: &Realization) -> Vec<f64> {
    let mut f = Vec::with_capacity(feature_len(realization.n_zones()));
    features_into(realization, &mut f);
    f
}

pub fn features_into(r: &Realization, out: &mut Vec<f64>) {
    out.clear();
    out.push(r.total_load());
    out.push(r.total_wind());
    out.push(r.total_solar());
    out.extend_from_slice(&r.load);
    out.extend_from_slice(&r.wind);
    out.extend_from_slice(&r.solar);
}

/// Names matching [`features_of`] order.
pub fn feature_names(zones: &[String]) -> Vec<String> {
    let mut names = vec![
        "total_load".to_string(),
        "total_wind".to_string(),
        "total_solar".to_string(),
    ];
    for kind in ["load", "wind", "solar"] {
        names.extend(zones.iter().map(|z| format!("{kind}_{z}")));
    }
    names
}
