//! Run configuration, read from JSON.

use std::path::{Path, PathBuf};

use gridrisk_core::fixtures::DeskOptions;
use gridrisk_core::surrogate::{HalWeights, NnOptions, RfParams};
use gridrisk_core::{STEPS_PER_DAY, STEPS_PER_HOUR};
use serde::{Deserialize, Serialize};

use crate::error::{CliError, CliResult};

/// Inclusive range of window start steps.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct StressWindow {
    pub first_step: usize,
    pub last_step: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct AugmentConfig {
    /// Share of train-split scenarios, ranked by shed plus operating-reserve
    /// shortfall, that get stressed copies.
    pub top_fraction: f64,
    pub stress_factors: Vec<f64>,
}

impl Default for AugmentConfig {
    fn default() -> Self {
        AugmentConfig {
            top_fraction: 0.3,
            stress_factors: vec![0.03, 0.06],
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct TrainingConfig {
    pub train_fraction: f64,
    pub min_scenarios: usize,
    pub rf: RfParams,
    pub nn: NnOptions,
    pub hal_weights: HalWeights,
    pub augment: AugmentConfig,
}

impl Default for TrainingConfig {
    fn default() -> Self {
        TrainingConfig {
            train_fraction: 0.7,
            min_scenarios: 100,
            rf: RfParams {
                min_leaf: 1,
                ..RfParams::default()
            },
            nn: NnOptions {
                max_epochs: 100,
                ..NnOptions::default()
            },
            hal_weights: HalWeights::default(),
            augment: AugmentConfig::default(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct RtConfig {
    /// Window start steps assessed every `stride` steps.
    pub windows: Vec<StressWindow>,
    pub stride: usize,
    /// Rank cut points splitting held-out scenarios into low, medium and
    /// high consequence groups.
    pub case_cuts: [f64; 2],
    pub rel_sigma_1h: f64,
    pub timing_repeats: usize,
}

impl Default for RtConfig {
    fn default() -> Self {
        RtConfig {
            // 05:00 to 10:45 and 16:00 to 19:45 window starts, so every
            // window ends by 11:45 and 20:45
            windows: vec![
                StressWindow {
                    first_step: 60,
                    last_step: 129,
                },
                StressWindow {
                    first_step: 192,
                    last_step: 237,
                },
            ],
            stride: 3,
            case_cuts: [1.0 / 3.0, 2.0 / 3.0],
            rel_sigma_1h: 0.025,
            timing_repeats: 5,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct RunConfig {
    /// System JSON; defaults to the generated desk system under `output_dir`.
    pub system: Option<PathBuf>,
    pub output_dir: PathBuf,
    /// Master seed for scenarios, splits and training.
    pub seed: u64,
    pub fixture_seed: u64,
    pub da_n: usize,
    pub st_n: usize,
    /// Level-1 tail size in percent.
    pub alpha: f64,
    /// Steps per short-term scenario.
    pub horizon: usize,
    pub dirichlet_alpha: f64,
    pub parallelism: usize,
    pub fixture: DeskOptions,
    pub training: TrainingConfig,
    pub rt: RtConfig,
}

impl Default for RunConfig {
    fn default() -> Self {
        RunConfig {
            system: None,
            output_dir: PathBuf::from("out"),
            seed: 1,
            fixture_seed: 7,
            da_n: 2500,
            st_n: 1000,
            alpha: 5.0,
            horizon: STEPS_PER_HOUR,
            dirichlet_alpha: 0.01,
            parallelism: 1,
            fixture: DeskOptions::default(),
            training: TrainingConfig::default(),
            rt: RtConfig::default(),
        }
    }
}

fn invalid(msg: impl Into<String>) -> CliError {
    CliError::Config(msg.into())
}

impl RunConfig {
    pub fn load(path: &Path) -> CliResult<Self> {
        let config: RunConfig = gridrisk_core::io::read_json(path)?;
        config.validate()?;
        Ok(config)
    }

    pub fn validate(&self) -> CliResult<()> {
        if self.da_n == 0 || self.st_n == 0 {
            return Err(invalid("scenario counts must be >= 1"));
        }
        if !(self.alpha > 0.0 && self.alpha <= 100.0) {
            return Err(invalid(format!("alpha {} must lie in (0, 100]", self.alpha)));
        }
        if self.horizon != STEPS_PER_HOUR {
            return Err(invalid(format!(
                "horizon must be {STEPS_PER_HOUR} steps, the span of one short-term scenario"
            )));
        }
        if !(self.dirichlet_alpha > 0.0) {
            return Err(invalid("dirichlet_alpha must be > 0"));
        }
        let t = &self.training;
        if !(t.train_fraction > 0.0 && t.train_fraction < 1.0) {
            return Err(invalid("train_fraction must lie in (0, 1)"));
        }
        if !(0.0..=1.0).contains(&t.augment.top_fraction) {
            return Err(invalid("augment.top_fraction must lie in [0, 1]"));
        }
        if t.rf.n_trees == 0 || t.rf.min_leaf == 0 {
            return Err(invalid("rf needs at least one tree and min_leaf >= 1"));
        }
        let rt = &self.rt;
        if rt.stride == 0 || rt.timing_repeats == 0 {
            return Err(invalid("rt stride and timing_repeats must be >= 1"));
        }
        let [a, b] = rt.case_cuts;
        if !(0.0 < a && a < b && b < 1.0) {
            return Err(invalid("case_cuts must satisfy 0 < low < high < 1"));
        }
        if rt.windows.is_empty() {
            return Err(invalid("at least one stress window is required"));
        }
        for w in &rt.windows {
            // the step before the window supplies the ramp origin
            if w.first_step == 0 || w.first_step > w.last_step || w.last_step + self.horizon > STEPS_PER_DAY {
                return Err(invalid(format!(
                    "window {}..={} must start after step 0 and end within the day",
                    w.first_step, w.last_step
                )));
            }
        }
        Ok(())
    }

    /// Window start steps in ascending order, without repeats.
    pub fn window_starts(&self) -> Vec<usize> {
        let mut starts: Vec<usize> = self
            .rt
            .windows
            .iter()
            .flat_map(|w| (w.first_step..=w.last_step).step_by(self.rt.stride))
            .collect();
        starts.sort_unstable();
        starts.dedup();
        starts
    }

    pub fn system_path(&self) -> PathBuf {
        self.system
            .clone()
            .unwrap_or_else(|| self.output_dir.join("fixtures").join("desk3z.json"))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn defaults_validate_and_round_trip() {
        let c = RunConfig::default();
        c.validate().unwrap();
        let text = serde_json::to_string(&c).unwrap();
        assert_eq!(serde_json::from_str::<RunConfig>(&text).unwrap(), c);
        // partial files fall back to defaults
        let partial: RunConfig = serde_json::from_str(r#"{"da_n": 10}"#).unwrap();
        assert_eq!(partial.da_n, 10);
        assert_eq!(partial.st_n, 1000);
    }

    #[test]
    fn default_windows_cover_morning_and_evening() {
        let starts = RunConfig::default().window_starts();
        assert_eq!(starts.len(), 24 + 16);
        assert_eq!(starts[0], 60);
        assert_eq!(*starts.last().unwrap(), 237);
    }

    #[test]
    fn rejects_bad_values() {
        let bad = [
            RunConfig { da_n: 0, ..RunConfig::default() },
            RunConfig { alpha: 0.0, ..RunConfig::default() },
            RunConfig { alpha: 100.5, ..RunConfig::default() },
            RunConfig { horizon: 6, ..RunConfig::default() },
        ];
        for c in bad {
            assert!(c.validate().is_err());
        }
        let mut c = RunConfig::default();
        c.rt.windows[0].last_step = 280;
        assert!(c.validate().is_err());
        c = RunConfig::default();
        c.rt.case_cuts = [0.5, 0.4];
        assert!(c.validate().is_err());
    }
}
