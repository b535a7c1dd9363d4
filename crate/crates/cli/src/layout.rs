//! Where each command reads and writes under the output directory.

use std::path::{Path, PathBuf};

use gridrisk_core::surrogate::ModelKind;

use crate::error::{CliError, CliResult};

#[derive(Debug, Clone)]
pub struct Layout {
    root: PathBuf,
}

impl Layout {
    pub fn new(root: impl Into<PathBuf>) -> Self {
        Layout { root: root.into() }
    }

    pub fn root(&self) -> &Path {
        &self.root
    }

    pub fn fixtures(&self) -> PathBuf {
        self.root.join("fixtures")
    }
    pub fn fixture_manifest(&self) -> PathBuf {
        self.fixtures().join("manifest.json")
    }
    pub fn schedule(&self) -> PathBuf {
        self.fixtures().join("schedule.json")
    }
    pub fn base_day(&self, k: usize) -> PathBuf {
        self.fixtures().join(format!("base_day_{k:02}.csv"))
    }

    pub fn da(&self) -> PathBuf {
        self.root.join("da")
    }
    pub fn da_scenarios(&self) -> PathBuf {
        self.da().join("scenarios.csv")
    }
    pub fn da_corpus(&self) -> PathBuf {
        self.da().join("corpus.csv")
    }
    pub fn da_risk(&self) -> PathBuf {
        self.da().join("risk_profile.csv")
    }
    pub fn initial_dispatch(&self) -> PathBuf {
        self.da().join("initial_dispatch.json")
    }

    pub fn train(&self) -> PathBuf {
        self.root.join("train")
    }
    pub fn augmented_scenarios(&self) -> PathBuf {
        self.train().join("augmented.csv")
    }
    pub fn augmented_corpus(&self) -> PathBuf {
        self.train().join("augmented_corpus.csv")
    }
    pub fn bank(&self, kind: ModelKind) -> PathBuf {
        self.train().join(kind.id())
    }
    pub fn table2(&self) -> PathBuf {
        self.train().join("table2.csv")
    }
    pub fn train_manifest(&self) -> PathBuf {
        self.train().join("manifest.json")
    }

    pub fn rt(&self) -> PathBuf {
        self.root.join("rt")
    }
    pub fn cases(&self) -> PathBuf {
        self.rt().join("cases.json")
    }
    pub fn rt_case(&self, case: &str) -> PathBuf {
        self.rt().join(case)
    }
    pub fn rt_risk(&self, case: &str) -> PathBuf {
        self.rt_case(case).join("risk.csv")
    }
    pub fn rt_errors(&self, case: &str) -> PathBuf {
        self.rt_case(case).join("errors.csv")
    }
    pub fn rt_trace(&self, case: &str) -> PathBuf {
        self.rt_case(case).join("qoi_trace.csv")
    }
    pub fn rt_manifest(&self, case: &str) -> PathBuf {
        self.rt_case(case).join("manifest.json")
    }

    pub fn report(&self) -> PathBuf {
        self.root.join("report")
    }
}

/// Errors unless `path` exists, naming the command that produces it.
pub fn require(path: &Path, command: &'static str) -> CliResult<()> {
    if path.exists() {
        Ok(())
    } else {
        Err(CliError::Missing {
            path: path.to_path_buf(),
            command,
        })
    }
}
