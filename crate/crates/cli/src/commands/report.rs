use std::path::{Path, PathBuf};

use gridrisk_core::io::read_risk_profile;
use gridrisk_core::sced::hour_of;

use super::rt::Case;
use super::{cell, csv_writer, finish};
use crate::config::RunConfig;
use crate::error::CliResult;
use crate::layout::{require, Layout};

pub const REPORT_FILES: [&str; 5] = [
    "da_curves.csv",
    "table2.csv",
    "table3.csv",
    "qoi_traces.csv",
    "rt_risk_traces.csv",
];

/// Gathers the plot data of a finished run into `report/`. Returns the
/// written paths.
pub fn cmd_report(config: &RunConfig) -> CliResult<Vec<PathBuf>> {
    let layout = Layout::new(&config.output_dir);
    require(&layout.da_risk(), "da-assess")?;
    require(&layout.table2(), "train")?;
    let cases: Vec<Case> = Case::ALL
        .into_iter()
        .filter(|c| layout.rt_errors(c.name()).exists())
        .collect();
    if cases.is_empty() {
        require(&layout.rt_errors(Case::High.name()), "rt-assess")?;
    }
    let out = layout.report();
    let paths: Vec<PathBuf> = REPORT_FILES.iter().map(|f| out.join(f)).collect();

    da_curves(&layout.da_risk(), &paths[0])?;
    copy_csv(&layout.table2(), &paths[1], None)?;
    table3(&layout, &cases, &paths[2])?;
    let traces: Vec<(String, PathBuf)> = cases
        .iter()
        .map(|c| (c.name().to_string(), layout.rt_trace(c.name())))
        .collect();
    concat_by_case(&traces, &paths[3])?;
    let risks: Vec<(String, PathBuf)> = cases
        .iter()
        .map(|c| (c.name().to_string(), layout.rt_risk(c.name())))
        .collect();
    concat_by_case(&risks, &paths[4])?;
    Ok(paths)
}

fn da_curves(source: &Path, path: &Path) -> CliResult<()> {
    let rows = read_risk_profile(source)?;
    let mut w = csv_writer(path)?;
    w.write_record(["step", "hour", "qoi", "level1", "level2", "level3"])?;
    for r in rows {
        w.write_record([
            r.step.to_string(),
            hour_of(r.step).to_string(),
            r.qoi.name().to_string(),
            r.level1.to_string(),
            cell(r.level2),
            cell(r.level3),
        ])?;
    }
    finish(w, path)
}

/// Copies a CSV, optionally prefixing every row with a `case` column.
fn copy_csv(source: &Path, path: &Path, case: Option<&str>) -> CliResult<()> {
    let mut w = csv_writer(path)?;
    append(&mut w, source, case, true)?;
    finish(w, path)
}

fn append(
    w: &mut csv::Writer<std::fs::File>,
    source: &Path,
    case: Option<&str>,
    header: bool,
) -> CliResult<()> {
    let mut r = csv::Reader::from_path(source)?;
    if header {
        let h = r.headers()?.clone();
        w.write_record(case.map(|_| "case").into_iter().chain(h.iter()))?;
    }
    for rec in r.records() {
        let rec = rec?;
        w.write_record(case.into_iter().chain(rec.iter()))?;
    }
    Ok(())
}

fn concat_by_case(sources: &[(String, PathBuf)], path: &Path) -> CliResult<()> {
    let mut w = csv_writer(path)?;
    for (i, (case, source)) in sources.iter().enumerate() {
        require(source, "rt-assess")?;
        append(&mut w, source, Some(case), i == 0)?;
    }
    finish(w, path)
}

/// Level-3 risk errors per case, QoI and model, followed by one
/// `mean_risk` row per case and QoI holding the mean oracle risk.
fn table3(layout: &Layout, cases: &[Case], path: &Path) -> CliResult<()> {
    let mut w = csv_writer(path)?;
    w.write_record(["case", "qoi", "model", "mae", "hal"])?;
    for case in cases {
        let mut r = csv::Reader::from_path(layout.rt_errors(case.name()))?;
        let mut means: Vec<(String, String)> = Vec::new();
        for rec in r.records() {
            let rec = rec?;
            let (model, qoi, mae, hal, mean) = (&rec[0], &rec[1], &rec[2], &rec[3], &rec[4]);
            w.write_record([case.name(), qoi, model, mae, hal])?;
            if !means.iter().any(|(q, _)| q == qoi) {
                means.push((qoi.to_string(), mean.to_string()));
            }
        }
        for (qoi, mean) in means {
            w.write_record([case.name(), &qoi, "mean_risk", &mean, ""])?;
        }
    }
    finish(w, path)
}
