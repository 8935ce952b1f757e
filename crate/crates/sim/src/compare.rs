//! Side-by-side summary of finished runs over the same dataset.

use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use flr_core::metrics::Fractions;

use crate::error::{Result, SimError};
use crate::formats::{self, MetricsRow};
use crate::runner::{dataset_hash, files};

/// Column names, global block then local block then accuracy.
pub const COLUMNS: [&str; 11] = [
    "global_clean_correct",
    "global_clean_wrong",
    "global_noisy_correct",
    "global_noisy_wrong",
    "global_noisy_memorized",
    "local_clean_correct",
    "local_clean_wrong",
    "local_noisy_correct",
    "local_noisy_wrong",
    "local_noisy_memorized",
    "best_test_acc",
];

/// Summary of one run.
#[derive(Debug, Clone, PartialEq)]
pub struct RunSummary {
    /// Run directory.
    pub dir: PathBuf,
    /// Method recorded in the resolved config, if readable.
    pub method: Option<String>,
    /// Last round present in the metrics stream.
    pub final_round: usize,
    /// Global breakdown at the final round.
    pub global: Fractions,
    /// Latest local breakdown, if any round had one.
    pub local: Option<Fractions>,
    /// Maximum test accuracy over rounds.
    pub best_test_acc: f64,
}

impl RunSummary {
    /// The eleven values in [`COLUMNS`] order; missing local values are NaN.
    pub fn values(&self) -> [f64; 11] {
        let f = |x: &Fractions| {
            [
                x.clean_correct,
                x.clean_wrong,
                x.noisy_correct,
                x.noisy_wrong,
                x.noisy_memorized,
            ]
        };
        let g = f(&self.global);
        let l = self.local.as_ref().map(f).unwrap_or([f64::NAN; 5]);
        let mut out = [0.0; 11];
        out[..5].copy_from_slice(&g);
        out[5..10].copy_from_slice(&l);
        out[10] = self.best_test_acc;
        out
    }
}

fn method_of(dir: &Path) -> Option<String> {
    let text = std::fs::read_to_string(dir.join(files::CONFIG)).ok()?;
    let table: toml::Table = text.parse().ok()?;
    table.get("method")?.as_str().map(str::to_string)
}

/// Summarizes one run directory.
pub fn summarize(dir: &Path) -> Result<RunSummary> {
    let path = dir.join(files::METRICS);
    if !path.is_file() {
        return Err(SimError::Compare(format!(
            "run directory {} has no {}",
            dir.display(),
            files::METRICS
        )));
    }
    let rows = formats::read_metrics(&path)?;
    let final_round = rows
        .iter()
        .map(|r| r.round)
        .max()
        .ok_or_else(|| SimError::Compare(format!("run directory {} has an empty metrics stream", dir.display())))?;
    let global = rows
        .iter()
        .find(|r| r.round == final_round && r.scope == "global")
        .ok_or_else(|| SimError::format(&path, "final round has no global row"))?
        .fractions;
    let local = rows
        .iter()
        .filter(|r| r.scope == "local")
        .max_by_key(|r| r.round)
        .map(|r: &MetricsRow| r.fractions);
    let best_test_acc = rows.iter().map(|r| r.test_acc).fold(0.0, f64::max);
    Ok(RunSummary {
        dir: dir.to_path_buf(),
        method: method_of(dir),
        final_round,
        global,
        local,
        best_test_acc,
    })
}

/// Summarizes every run after checking they share one dataset.
pub fn compare(dirs: &[PathBuf]) -> Result<Vec<RunSummary>> {
    if dirs.is_empty() {
        return Err(SimError::Compare("no run directories given".into()));
    }
    let mut summaries = Vec::with_capacity(dirs.len());
    let mut reference: Option<(String, &Path)> = None;
    for dir in dirs {
        let summary = summarize(dir)?;
        let hash = dataset_hash(dir)?;
        match &reference {
            None => reference = Some((hash, dir)),
            Some((h, first)) if *h != hash => {
                return Err(SimError::Compare(format!(
                    "{} and {} were trained on different datasets",
                    first.display(),
                    dir.display()
                )))
            }
            Some(_) => {}
        }
        summaries.push(summary);
    }
    Ok(summaries)
}

fn label(s: &RunSummary) -> String {
    let name = s
        .dir
        .file_name()
        .map(|n| n.to_string_lossy().into_owned())
        .unwrap_or_else(|| s.dir.display().to_string());
    match &s.method {
        Some(m) => format!("{name} ({m})"),
        None => name,
    }
}

/// Percent table in the usual two-block layout.
pub fn render_text(summaries: &[RunSummary]) -> String {
    let labels: Vec<String> = summaries.iter().map(label).collect();
    let width = labels.iter().map(String::len).max().unwrap_or(3).max(3);
    let mut out = String::new();
    let _ = writeln!(
        out,
        "{:width$} | {:^39} | {:^39} | {:>8}",
        "run", "global (server)", "local (client)", "test"
    );
    let _ = writeln!(
        out,
        "{:width$} | {:>7} {:>7} {:>7} {:>7} {:>7} | {:>7} {:>7} {:>7} {:>7} {:>7} | {:>8}",
        "", "c.ok", "c.bad", "n.ok", "n.bad", "n.mem", "c.ok", "c.bad", "n.ok", "n.bad", "n.mem", "best"
    );
    for (s, l) in summaries.iter().zip(&labels) {
        let v = s.values();
        let _ = write!(out, "{l:width$} |");
        for (i, x) in v.iter().enumerate() {
            if i == 5 || i == 10 {
                out.push_str(" |");
            }
            if x.is_nan() {
                let _ = write!(out, " {:>7}", "-");
            } else {
                let _ = write!(out, " {:>7.2}", 100.0 * x);
            }
        }
        out.push('\n');
    }
    out
}

/// CSV with a `run` column followed by [`COLUMNS`]; values are fractions.
pub fn render_csv(summaries: &[RunSummary]) -> String {
    let mut out = String::from("run,method");
    for c in COLUMNS {
        out.push(',');
        out.push_str(c);
    }
    out.push('\n');
    for s in summaries {
        let _ = write!(
            out,
            "{},{}",
            s.dir.display(),
            s.method.as_deref().unwrap_or("")
        );
        for x in s.values() {
            if x.is_nan() {
                out.push(',');
            } else {
                let _ = write!(out, ",{x:.6}");
            }
        }
        out.push('\n');
    }
    out
}
