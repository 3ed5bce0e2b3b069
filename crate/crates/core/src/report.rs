//! CSV report rows, sweep tables and line-delimited JSON traces.

use std::fs;
use std::io::{self, Write};
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::distributions::ParameterPoint;
use crate::simulation::{ExperimentReport, RunTrace, SweepPoint};

pub const REPORT_HEADER: &str = "algo,gamma,ess_threshold,n,t,r,seed,mean_regret,mae,mse,var,fci,prc";
pub const SWEEP_HEADER: &str = "grid_mean,estimate,true_value,abs_rel_error";

/// Wire form of a report row. Floats are written in shortest round-trip
/// form; an absent FCI is an empty cell.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
struct ReportRow {
    algo: String,
    gamma: f64,
    ess_threshold: f64,
    n: usize,
    t: usize,
    r: usize,
    seed: u64,
    mean_regret: f64,
    mae: f64,
    mse: f64,
    var: f64,
    fci: Option<f64>,
    prc: f64,
}

impl From<&ExperimentReport> for ReportRow {
    fn from(r: &ExperimentReport) -> Self {
        ReportRow {
            algo: r.algorithm.clone(),
            gamma: r.gamma,
            ess_threshold: r.ess_threshold,
            n: r.n,
            t: r.t,
            r: r.r,
            seed: r.seed,
            mean_regret: r.mean_regret,
            mae: r.mae,
            mse: r.mse,
            var: r.var,
            fci: r.fci,
            prc: r.prc,
        }
    }
}

impl From<ReportRow> for ExperimentReport {
    fn from(r: ReportRow) -> Self {
        ExperimentReport {
            algorithm: r.algo,
            gamma: r.gamma,
            ess_threshold: r.ess_threshold,
            n: r.n,
            t: r.t,
            r: r.r,
            seed: r.seed,
            mean_regret: r.mean_regret,
            mae: r.mae,
            mse: r.mse,
            var: r.var,
            fci: r.fci,
            prc: r.prc,
        }
    }
}

fn csv_err(e: csv::Error) -> io::Error {
    io::Error::other(e)
}

/// Header plus one row per report.
pub fn reports_to_csv(reports: &[ExperimentReport]) -> io::Result<String> {
    let mut w = csv::WriterBuilder::new().has_headers(false).from_writer(Vec::new());
    for r in reports {
        w.serialize(ReportRow::from(r)).map_err(csv_err)?;
    }
    let body = w.into_inner().map_err(|e| io::Error::other(e.to_string()))?;
    let mut out = String::with_capacity(REPORT_HEADER.len() + 1 + body.len());
    out.push_str(REPORT_HEADER);
    out.push('\n');
    out.push_str(std::str::from_utf8(&body).map_err(io::Error::other)?);
    Ok(out)
}

pub fn parse_reports_csv(text: &str) -> io::Result<Vec<ExperimentReport>> {
    let mut rdr = csv::ReaderBuilder::new().from_reader(text.as_bytes());
    let header: Vec<String> = rdr.headers().map_err(csv_err)?.iter().map(str::to_owned).collect();
    if header.join(",") != REPORT_HEADER {
        return Err(io::Error::new(io::ErrorKind::InvalidData, "unexpected report header"));
    }
    rdr.deserialize::<ReportRow>()
        .map(|row| row.map(ExperimentReport::from).map_err(csv_err))
        .collect()
}

pub fn sweep_to_csv(points: &[SweepPoint]) -> String {
    let mut out = String::from(SWEEP_HEADER);
    out.push('\n');
    for p in points {
        out.push_str(&format!(
            "{},{},{},{}\n",
            p.grid_mean,
            p.estimate,
            p.true_value,
            p.abs_rel_error()
        ));
    }
    out
}

/// One line of the per-iteration trace file.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TraceLine {
    pub run: usize,
    pub iter: usize,
    pub peaks: Vec<ParameterPoint>,
    pub mixing_rates: Vec<f64>,
    pub best_score: f64,
    pub major_peak: ParameterPoint,
    pub regret_term: Option<f64>,
}

pub fn traces_to_jsonl(traces: &[RunTrace]) -> io::Result<String> {
    let mut out = String::new();
    for tr in traces {
        for rec in &tr.records {
            let line = TraceLine {
                run: tr.run_index,
                iter: rec.iteration,
                peaks: rec.selected_peaks.clone(),
                mixing_rates: rec.mixing_rates.clone(),
                best_score: rec.best_score,
                major_peak: rec.major_peak.clone(),
                regret_term: rec.regret_term,
            };
            out.push_str(&serde_json::to_string(&line).map_err(io::Error::other)?);
            out.push('\n');
        }
    }
    Ok(out)
}

/// Writes `contents` to a sibling temp file and renames it into place, so a
/// failed write never leaves a partial file at `path`.
pub fn write_atomic(path: &Path, contents: &str) -> io::Result<()> {
    let dir = match path.parent() {
        Some(p) if !p.as_os_str().is_empty() => p.to_path_buf(),
        _ => PathBuf::from("."),
    };
    let name = path
        .file_name()
        .ok_or_else(|| io::Error::new(io::ErrorKind::InvalidInput, "output path has no file name"))?;
    let tmp = dir.join(format!(".{}.tmp{}", name.to_string_lossy(), std::process::id()));
    let result = (|| {
        let mut f = fs::File::create(&tmp)?;
        f.write_all(contents.as_bytes())?;
        f.sync_all()?;
        fs::rename(&tmp, path)
    })();
    if result.is_err() {
        let _ = fs::remove_file(&tmp);
    }
    result
}
