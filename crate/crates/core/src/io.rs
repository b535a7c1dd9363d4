//! CSV/JSON persistence for time series, scenario sets, simulation records
//! and risk profiles.

use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::grid_model::{Realization, Trajectory};
use crate::risk::{QoiMatrix, RiskProfile};
use crate::scenarios::{Provenance, ScenarioSet};
use crate::sced::{QoiKind, QoiSample};

fn writer(path: &Path) -> Result<csv::Writer<fs::File>> {
    if let Some(parent) = path.parent().filter(|p| !p.as_os_str().is_empty()) {
        fs::create_dir_all(parent).map_err(|e| Error::io(parent, e))?;
    }
    csv::Writer::from_path(path).map_err(|e| Error::Parse(format!("{}: {e}", path.display())))
}

fn reader(path: &Path) -> Result<csv::Reader<fs::File>> {
    let file = fs::File::open(path).map_err(|e| Error::io(path, e))?;
    Ok(csv::Reader::from_reader(file))
}

fn flush(mut w: csv::Writer<fs::File>, path: &Path) -> Result<()> {
    w.flush().map_err(|e| Error::io(path, e))
}

fn parse_f64(field: &str, what: &str, line: usize) -> Result<f64> {
    field
        .trim()
        .parse()
        .map_err(|_| Error::Parse(format!("line {line}: bad {what} '{field}'")))
}

fn parse_usize(field: &str, what: &str, line: usize) -> Result<usize> {
    field
        .trim()
        .parse()
        .map_err(|_| Error::Parse(format!("line {line}: bad {what} '{field}'")))
}

fn expect_header(r: &mut csv::Reader<fs::File>, expected: &[&str], path: &Path) -> Result<()> {
    let header = r.headers()?;
    if header.iter().map(str::trim).ne(expected.iter().copied()) {
        return Err(Error::Parse(format!(
            "{}: expected header '{}'",
            path.display(),
            expected.join(",")
        )));
    }
    Ok(())
}

const SERIES_HEADER: [&str; 5] = ["step", "zone", "load", "wind", "solar"];

fn series_row(step: usize, zone: &str, r: &Realization, z: usize) -> [String; 5] {
    [
        step.to_string(),
        zone.to_string(),
        r.load[z].to_string(),
        r.wind[z].to_string(),
        r.solar[z].to_string(),
    ]
}

/// Writes `step,zone,load,wind,solar`, one row per step and zone.
pub fn write_timeseries(path: impl AsRef<Path>, zones: &[String], series: &[Realization]) -> Result<()> {
    let path = path.as_ref();
    let mut w = writer(path)?;
    w.write_record(SERIES_HEADER)?;
    for (t, r) in series.iter().enumerate() {
        r.validate(zones.len()).map_err(|e| e.at_step(t))?;
        for (z, name) in zones.iter().enumerate() {
            w.write_record(series_row(t, name, r, z))?;
        }
    }
    flush(w, path)
}

/// Collects (step, zone) cells into a dense trajectory, requiring every
/// zone at every step from 0 to the largest step seen.
struct SeriesBuilder<'a> {
    zones: &'a [String],
    cells: BTreeMap<(usize, usize), [f64; 3]>,
}

impl<'a> SeriesBuilder<'a> {
    fn new(zones: &'a [String]) -> Self {
        SeriesBuilder {
            zones,
            cells: BTreeMap::new(),
        }
    }

    fn push(&mut self, step: usize, zone: &str, values: [f64; 3], line: usize) -> Result<()> {
        let z = self
            .zones
            .iter()
            .position(|n| n == zone)
            .ok_or_else(|| Error::Validation(format!("line {line}: unknown zone '{zone}'")))?;
        if self.cells.insert((step, z), values).is_some() {
            return Err(Error::Validation(format!(
                "line {line}: duplicate row for step {step}, zone '{zone}'"
            )));
        }
        Ok(())
    }

    fn finish(self) -> Result<Trajectory> {
        let nz = self.zones.len();
        let n_steps = self.cells.keys().map(|(t, _)| t + 1).max().unwrap_or(0);
        let mut out = vec![Realization::zeros(nz); n_steps];
        for t in 0..n_steps {
            for z in 0..nz {
                let [l, w, s] = *self.cells.get(&(t, z)).ok_or_else(|| {
                    Error::Validation(format!("missing row for step {t}, zone '{}'", self.zones[z]))
                })?;
                out[t].load[z] = l;
                out[t].wind[z] = w;
                out[t].solar[z] = s;
            }
            out[t].validate(nz).map_err(|e| e.at_step(t))?;
        }
        Ok(out)
    }
}

pub fn read_timeseries(path: impl AsRef<Path>, zones: &[String]) -> Result<Trajectory> {
    let path = path.as_ref();
    let mut r = reader(path)?;
    expect_header(&mut r, &SERIES_HEADER, path)?;
    let mut b = SeriesBuilder::new(zones);
    for (i, rec) in r.records().enumerate() {
        let rec = rec?;
        let line = i + 2;
        if rec.len() != 5 {
            return Err(Error::Parse(format!("line {line}: expected 5 fields")));
        }
        let values = [
            parse_f64(&rec[2], "load", line)?,
            parse_f64(&rec[3], "wind", line)?,
            parse_f64(&rec[4], "solar", line)?,
        ];
        b.push(parse_usize(&rec[0], "step", line)?, rec[1].trim(), values, line)?;
    }
    b.finish()
}

/// JSON sidecar stored next to a scenario CSV.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScenarioSidecar {
    pub provenance: Provenance,
    pub seed: u64,
    pub zones: Vec<String>,
    pub weights: Vec<f64>,
}

pub fn sidecar_path(csv_path: &Path) -> PathBuf {
    csv_path.with_extension("json")
}

/// Writes `scenario,step,zone,load,wind,solar` plus the JSON sidecar.
pub fn write_scenario_set(path: impl AsRef<Path>, set: &ScenarioSet) -> Result<()> {
    let path = path.as_ref();
    set.validate()?;
    let mut w = writer(path)?;
    w.write_record(["scenario", "step", "zone", "load", "wind", "solar"])?;
    for (i, traj) in set.scenarios.iter().enumerate() {
        for (t, r) in traj.iter().enumerate() {
            for (z, name) in set.zones.iter().enumerate() {
                let row = series_row(t, name, r, z);
                w.write_record(std::iter::once(i.to_string()).chain(row))?;
            }
        }
    }
    flush(w, path)?;
    let sidecar = ScenarioSidecar {
        provenance: set.provenance,
        seed: set.seed,
        zones: set.zones.clone(),
        weights: set.weights.clone(),
    };
    write_json(sidecar_path(path), &sidecar)
}

pub fn read_scenario_set(path: impl AsRef<Path>) -> Result<ScenarioSet> {
    let path = path.as_ref();
    let sidecar: ScenarioSidecar = read_json(sidecar_path(path))?;
    let mut r = reader(path)?;
    expect_header(&mut r, &["scenario", "step", "zone", "load", "wind", "solar"], path)?;
    let mut builders: Vec<SeriesBuilder> = Vec::new();
    for (i, rec) in r.records().enumerate() {
        let rec = rec?;
        let line = i + 2;
        if rec.len() != 6 {
            return Err(Error::Parse(format!("line {line}: expected 6 fields")));
        }
        let s = parse_usize(&rec[0], "scenario", line)?;
        if s > builders.len() {
            return Err(Error::Validation(format!("line {line}: scenario ids must be contiguous")));
        }
        if s == builders.len() {
            builders.push(SeriesBuilder::new(&sidecar.zones));
        }
        let values = [
            parse_f64(&rec[3], "load", line)?,
            parse_f64(&rec[4], "wind", line)?,
            parse_f64(&rec[5], "solar", line)?,
        ];
        builders[s].push(parse_usize(&rec[1], "step", line)?, rec[2].trim(), values, line)?;
    }
    let scenarios = builders
        .into_iter()
        .enumerate()
        .map(|(i, b)| b.finish().map_err(|e| e.in_scenario(i)))
        .collect::<Result<Vec<_>>>()?;
    let set = ScenarioSet {
        zones: sidecar.zones,
        scenarios,
        weights: sidecar.weights,
        provenance: sidecar.provenance,
        seed: sidecar.seed,
    };
    set.validate()?;
    Ok(set)
}

const RECORD_HEADER: [&str; 6] = ["scenario_id", "step", "cost", "load_shed", "reg_reserve", "op_reserve"];

/// Writes `scenario_id,step,cost,load_shed,reg_reserve,op_reserve`; steps
/// are offset by `start_step`.
pub fn write_qoi_records(path: impl AsRef<Path>, qoi: &QoiMatrix, start_step: usize) -> Result<()> {
    let path = path.as_ref();
    let mut w = writer(path)?;
    w.write_record(RECORD_HEADER)?;
    for i in 0..qoi.n_scenarios() {
        for (t, q) in qoi.row(i).iter().enumerate() {
            w.write_record([
                i.to_string(),
                (start_step + t).to_string(),
                q.cost.to_string(),
                q.load_shed.to_string(),
                q.reg_reserve.to_string(),
                q.op_reserve.to_string(),
            ])?;
        }
    }
    flush(w, path)
}

/// Reads simulation records back into a uniformly weighted matrix. Rows may
/// come in any order but every scenario must cover the same steps.
pub fn read_qoi_records(path: impl AsRef<Path>) -> Result<QoiMatrix> {
    let path = path.as_ref();
    let mut r = reader(path)?;
    expect_header(&mut r, &RECORD_HEADER, path)?;
    let mut cells: BTreeMap<(usize, usize), QoiSample> = BTreeMap::new();
    for (i, rec) in r.records().enumerate() {
        let rec = rec?;
        let line = i + 2;
        if rec.len() != 6 {
            return Err(Error::Parse(format!("line {line}: expected 6 fields")));
        }
        let s = parse_usize(&rec[0], "scenario_id", line)?;
        let t = parse_usize(&rec[1], "step", line)?;
        let q = QoiSample {
            cost: parse_f64(&rec[2], "cost", line)?,
            load_shed: parse_f64(&rec[3], "load_shed", line)?,
            reg_reserve: parse_f64(&rec[4], "reg_reserve", line)?,
            op_reserve: parse_f64(&rec[5], "op_reserve", line)?,
        };
        if cells.insert((s, t), q).is_some() {
            return Err(Error::Validation(format!(
                "line {line}: duplicate record for scenario {s}, step {t}"
            )));
        }
    }
    let n = cells.keys().map(|(s, _)| s + 1).max().unwrap_or(0);
    let first = cells.keys().map(|(_, t)| *t).min().unwrap_or(0);
    let last = cells.keys().map(|(_, t)| *t).max().unwrap_or(0);
    let mut rows = Vec::with_capacity(n);
    for s in 0..n {
        let row = (first..=last)
            .map(|t| {
                cells
                    .get(&(s, t))
                    .copied()
                    .ok_or_else(|| Error::Validation(format!("missing record for scenario {s}, step {t}")))
            })
            .collect::<Result<Vec<_>>>()?;
        rows.push(row);
    }
    QoiMatrix::from_rows(rows, vec![1.0 / n.max(1) as f64; n])
}

/// One line of a risk profile CSV.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RiskRow {
    pub step: usize,
    pub qoi: QoiKind,
    pub level1: f64,
    pub level2: Option<f64>,
    pub level3: Option<f64>,
}

fn opt(v: Option<f64>) -> String {
    v.map(|x| x.to_string()).unwrap_or_default()
}

/// Writes `step,qoi,level1,level2,level3`; metrics that do not apply (cost
/// has no threshold) are left empty.
pub fn write_risk_profile(path: impl AsRef<Path>, profile: &RiskProfile) -> Result<()> {
    let path = path.as_ref();
    let mut w = writer(path)?;
    w.write_record(["step", "qoi", "level1", "level2", "level3"])?;
    for (t, row) in profile.steps.iter().enumerate() {
        for kind in QoiKind::ALL {
            let r = row[kind.index()];
            w.write_record([
                (profile.start_step + t).to_string(),
                kind.name().to_string(),
                r.level1.to_string(),
                opt(r.level2),
                opt(r.level3),
            ])?;
        }
    }
    flush(w, path)
}

pub fn read_risk_profile(path: impl AsRef<Path>) -> Result<Vec<RiskRow>> {
    let path = path.as_ref();
    let mut r = reader(path)?;
    expect_header(&mut r, &["step", "qoi", "level1", "level2", "level3"], path)?;
    let opt_field = |f: &str, what: &str, line: usize| -> Result<Option<f64>> {
        if f.trim().is_empty() {
            Ok(None)
        } else {
            parse_f64(f, what, line).map(Some)
        }
    };
    r.records()
        .enumerate()
        .map(|(i, rec)| {
            let rec = rec?;
            let line = i + 2;
            if rec.len() != 5 {
                return Err(Error::Parse(format!("line {line}: expected 5 fields")));
            }
            Ok(RiskRow {
                step: parse_usize(&rec[0], "step", line)?,
                qoi: QoiKind::from_name(rec[1].trim())
                    .ok_or_else(|| Error::Parse(format!("line {line}: unknown qoi '{}'", &rec[1])))?,
                level1: parse_f64(&rec[2], "level1", line)?,
                level2: opt_field(&rec[3], "level2", line)?,
                level3: opt_field(&rec[4], "level3", line)?,
            })
        })
        .collect()
}

pub fn write_json<T: Serialize>(path: impl AsRef<Path>, value: &T) -> Result<()> {
    let path = path.as_ref();
    if let Some(parent) = path.parent().filter(|p| !p.as_os_str().is_empty()) {
        fs::create_dir_all(parent).map_err(|e| Error::io(parent, e))?;
    }
    let mut text = serde_json::to_string_pretty(value)?;
    text.push('\n');
    fs::write(path, text).map_err(|e| Error::io(path, e))
}

pub fn read_json<T: for<'de> Deserialize<'de>>(path: impl AsRef<Path>) -> Result<T> {
    let path = path.as_ref();
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    serde_json::from_str(&text).map_err(|e| Error::Parse(format!("{}: {e}", path.display())))
}
