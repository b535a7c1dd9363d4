//! A synthetic three-zone desk system with twenty generators, a set of
//! base days and a commitment schedule whose margins can be tightened in the
//! morning and evening ramps.

use std::collections::BTreeMap;

use rand::Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::error::Result;
use crate::grid_model::{
    priority_list_commitment_with_margins, CommitmentSchedule, Generator, Realization,
    SystemModel, HOURS_PER_DAY, STEPS_PER_DAY, STEPS_PER_HOUR,
};
use crate::scenarios::{rng_from_seed, Provenance, ScenarioSet};

pub const DESK_ZONES: [&str; 3] = ["north", "central", "south"];

/// Hours whose commitment margin is tightened when stress is enabled.
pub const STRESS_HOURS: [usize; 8] = [6, 7, 8, 9, 10, 17, 18, 19];

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct DeskOptions {
    pub n_base_days: usize,
    pub peak_load: f64,
    pub wind_capacity: f64,
    pub solar_capacity: f64,
    /// Commitment margin over peak net load in stress hours.
    pub stressed_margin: f64,
    /// Margin outside stress hours.
    pub normal_margin: f64,
    /// Margin in every hour when stress is off.
    pub calm_margin: f64,
    pub stressed: bool,
}

impl Default for DeskOptions {
    fn default() -> Self {
        DeskOptions {
            n_base_days: 20,
            peak_load: 20_000.0,
            wind_capacity: 4_000.0,
            solar_capacity: 5_000.0,
            stressed_margin: 0.06,
            normal_margin: 0.3,
            calm_margin: 0.35,
            stressed: true,
        }
    }
}

fn zones() -> Vec<String> {
    DESK_ZONES.iter().map(|z| z.to_string()).collect()
}

/// (prefix, count, p_min, p_max, ramp per step, cost, regulating)
const FLEET: [(&str, usize, f64, f64, f64, f64, bool); 4] = [
    ("nuc", 3, 1500.0, 2500.0, 60.0, 8.0, false),
    ("coal", 5, 600.0, 1600.0, 240.0, 24.0, true),
    ("ccgt", 7, 350.0, 1200.0, 180.0, 38.0, true),
    ("gt", 5, 100.0, 800.0, 160.0, 85.0, true),
];

pub fn desk_system() -> Result<SystemModel> {
    let zones = zones();
    let mut generators = Vec::new();
    for (prefix, count, p_min, p_max, ramp, cost, reg) in FLEET {
        for i in 0..count {
            let zone = zones[(generators.len()) % zones.len()].clone();
            generators.push(Generator {
                id: format!("{prefix}{}", i + 1),
                zone,
                p_min,
                p_max,
                ramp_rate: ramp,
                // Slight spread keeps the merit order strict.
                energy_cost: cost + 0.25 * i as f64,
                reg_capable: reg,
            });
        }
    }
    let limits: BTreeMap<String, f64> = zones.iter().map(|z| (z.clone(), 3000.0)).collect();
    SystemModel::new(zones, generators, limits)
}

/// Normalised system load shape with morning and evening peaks.
fn load_shape(hour: f64) -> f64 {
    let bump = |centre: f64, width: f64| (-((hour - centre) / width).powi(2)).exp();
    0.62 + 0.30 * bump(8.5, 2.2) + 0.38 * bump(18.5, 2.0) + 0.12 * bump(13.0, 3.0)
}

/// Normalised clear-sky solar output.
fn solar_shape(hour: f64) -> f64 {
    let x = (hour - 6.5) / 12.0;
    if (0.0..=1.0).contains(&x) {
        (std::f64::consts::PI * x).sin().powi(2)
    } else {
        0.0
    }
}

const MIDNIGHT_WIND: f64 = 0.3;
const LOAD_SHARE: [f64; 3] = [0.30, 0.45, 0.25];
const WIND_SHARE: [f64; 3] = [0.55, 0.30, 0.15];
const SOLAR_SHARE: [f64; 3] = [0.15, 0.30, 0.55];

/// `n_base_days` seeded base days, each a 288-step trajectory.
pub fn desk_base_days(options: &DeskOptions, seed: u64) -> Result<ScenarioSet> {
    let mut rng = rng_from_seed(seed);
    let noise = Normal::new(0.0, 1.0).expect("unit normal");
    let mut days = Vec::with_capacity(options.n_base_days);
    for _ in 0..options.n_base_days {
        let scale = rng.random_range(0.88..1.08);
        let wind_level = rng.random_range(0.10..0.55);
        let wind_trend = rng.random_range(-0.25..0.25);
        let cloud = rng.random_range(0.45..1.0);
        let mut wind_ar = 0.0;
        let mut load_ar = 0.0;
        let mut day = Vec::with_capacity(STEPS_PER_DAY);
        for t in 0..STEPS_PER_DAY {
            let hour = t as f64 / STEPS_PER_HOUR as f64;
            wind_ar = 0.98 * wind_ar + 0.02 * noise.sample(&mut rng);
            load_ar = 0.95 * load_ar + 0.004 * noise.sample(&mut rng);
            // days share the observed midnight state and drift apart over a few hours
            let spread = (hour / 3.0).min(1.0);
            let wind_cf = (MIDNIGHT_WIND
                + spread * (wind_level - MIDNIGHT_WIND + wind_trend * (hour / 24.0 - 0.5))
                + wind_ar)
                .clamp(0.0, 1.0);
            let day_scale = 1.0 + spread * (scale - 1.0);
            let load = options.peak_load * day_scale * load_shape(hour) * (1.0 + load_ar);
            let solar = options.solar_capacity * cloud * solar_shape(hour);
            let wind = options.wind_capacity * wind_cf;
            day.push(Realization {
                load: LOAD_SHARE.iter().map(|s| s * load).collect(),
                wind: WIND_SHARE.iter().map(|s| s * wind).collect(),
                solar: SOLAR_SHARE.iter().map(|s| s * solar).collect(),
            });
        }
        days.push(day);
    }
    ScenarioSet::uniform(zones(), days, Provenance::DayAhead, seed)
}

/// Hourly peak net load of the mean base day.
pub fn mean_hourly_peaks(base_days: &ScenarioSet) -> Vec<f64> {
    let n = base_days.len() as f64;
    (0..HOURS_PER_DAY)
        .map(|h| {
            (h * STEPS_PER_HOUR..(h + 1) * STEPS_PER_HOUR)
                .map(|t| base_days.scenarios.iter().map(|d| d[t].net_load()).sum::<f64>() / n)
                .fold(f64::NEG_INFINITY, f64::max)
        })
        .collect()
}

pub fn desk_margins(options: &DeskOptions) -> Vec<f64> {
    (0..HOURS_PER_DAY)
        .map(|h| {
            if !options.stressed {
                options.calm_margin
            } else if STRESS_HOURS.contains(&h) {
                options.stressed_margin
            } else {
                options.normal_margin
            }
        })
        .collect()
}

pub fn desk_schedule(
    system: &SystemModel,
    base_days: &ScenarioSet,
    options: &DeskOptions,
) -> Result<CommitmentSchedule> {
    // Size each hour for the previous hour's peak too: units then only leave
    // once load has already fallen, instead of dropping out of a loaded fleet
    // at the boundary.
    let peaks = mean_hourly_peaks(base_days);
    let held: Vec<f64> = (0..HOURS_PER_DAY)
        .map(|h| peaks[h].max(peaks[(h + HOURS_PER_DAY - 1) % HOURS_PER_DAY]))
        .collect();
    priority_list_commitment_with_margins(system, &held, &desk_margins(options))
}

/// Everything the pipeline needs to start.
#[derive(Debug, Clone)]
pub struct DeskFixture {
    pub system: SystemModel,
    pub base_days: ScenarioSet,
    pub schedule: CommitmentSchedule,
}

pub fn desk_fixture(options: &DeskOptions, seed: u64) -> Result<DeskFixture> {
    let system = desk_system()?;
    let base_days = desk_base_days(options, seed)?;
    let schedule = desk_schedule(&system, &base_days, options)?;
    Ok(DeskFixture {
        system,
        base_days,
        schedule,
    })
}
