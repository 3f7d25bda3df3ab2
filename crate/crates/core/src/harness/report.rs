use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use serde::Serialize;

use super::run::METRICS_HEADER;
use crate::io;

/// One comparison row: a (run, variant, model) aggregate or an unreadable run.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct ReportRow {
    pub run: PathBuf,
    pub variant: String,
    pub model: String,
    pub fingerprint: String,
    /// acc, recall, precision, f1
    pub mean: [f64; 4],
    pub std: [f64; 4],
    pub error: Option<String>,
}

impl ReportRow {
    pub fn is_error(&self) -> bool {
        self.error.is_some()
    }

    fn error(run: &Path, msg: String) -> Self {
        ReportRow {
            run: run.to_path_buf(),
            variant: String::new(),
            model: String::new(),
            fingerprint: String::new(),
            mean: [f64::NAN; 4],
            std: [f64::NAN; 4],
            error: Some(msg),
        }
    }
}

fn read_run(run: &Path, include_baseline: bool) -> Result<Vec<ReportRow>, String> {
    let path = run.join("metrics.csv");
    if !run.is_dir() {
        return Err(format!("run directory {} not found", run.display()));
    }
    let text = io::read_text(&path).map_err(|e| e.to_string())?;
    let mut lines = text.lines();
    if lines.next() != Some(METRICS_HEADER) {
        return Err(format!("{} has an unexpected header", path.display()));
    }
    let mut rows = Vec::new();
    for (n, line) in lines.enumerate() {
        let f: Vec<&str> = line.split(',').collect();
        if f.len() != 14 {
            return Err(format!("{} line {}: expected 14 fields", path.display(), n + 2));
        }
        if f[1] != "hfgcn" && !include_baseline {
            continue;
        }
        let num = |i: usize| {
            f[i].parse::<f64>()
                .map_err(|_| format!("{} line {}: bad number {:?}", path.display(), n + 2, f[i]))
        };
        let mut mean = [0.0; 4];
        let mut std = [0.0; 4];
        for k in 0..4 {
            mean[k] = num(5 + 2 * k)?;
            std[k] = num(6 + 2 * k)?;
        }
        rows.push(ReportRow {
            run: run.to_path_buf(),
            variant: f[0].into(),
            model: f[1].into(),
            fingerprint: f[13].into(),
            mean,
            std,
            error: None,
        });
    }
    Ok(rows)
}

/// Collects the aggregate rows of several runs, sorted by mean accuracy
/// (descending); runs that cannot be read become error rows at the end.
pub fn report(runs: &[PathBuf], include_baseline: bool) -> Vec<ReportRow> {
    let mut rows: Vec<ReportRow> = runs
        .iter()
        .flat_map(|run| read_run(run, include_baseline).unwrap_or_else(|e| vec![ReportRow::error(run, e)]))
        .collect();
    rows.sort_by(|a, b| match (a.is_error(), b.is_error()) {
        (false, false) => b.mean[0].total_cmp(&a.mean[0]),
        (a_err, b_err) => a_err.cmp(&b_err),
    });
    rows
}

pub fn report_csv(rows: &[ReportRow]) -> String {
    let mut out = String::from(
        "run,variant,model,fingerprint,acc_mean,acc_std,recall_mean,recall_std,precision_mean,precision_std,f1_mean,f1_std,error\n",
    );
    for r in rows {
        let _ = write!(out, "{},{},{},{}", r.run.display(), r.variant, r.model, r.fingerprint);
        for k in 0..4 {
            if r.is_error() {
                out.push_str(",,");
            } else {
                let _ = write!(out, ",{},{}", r.mean[k], r.std[k]);
            }
        }
        let _ = writeln!(out, ",{}", r.error.as_deref().unwrap_or("").replace(',', ";"));
    }
    out
}
