//! Flat CSV rows and slice-averaged result tables.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt::Write as _;
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::{EvalSet, MetricReport};
use crate::{Error, Result};

/// One algorithm × slice × cutoff measurement.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ReportRow {
    pub algorithm: String,
    pub slice: usize,
    pub eval_set: EvalSet,
    pub cutoff: usize,
    pub hr: f64,
    pub mrr: f64,
    pub precision: f64,
    pub recall: f64,
    pub map: f64,
    pub coverage: f64,
    pub popularity: f64,
    pub training_time_s: f64,
    pub mean_prediction_time_ms: f64,
    pub prediction_events: usize,
    pub sessions: usize,
}

impl MetricReport {
    pub fn rows(&self) -> Vec<ReportRow> {
        self.metrics
            .iter()
            .map(|m| ReportRow {
                algorithm: self.algorithm.clone(),
                slice: self.slice,
                eval_set: self.eval_set,
                cutoff: m.cutoff,
                hr: m.hr,
                mrr: m.mrr,
                precision: m.precision,
                recall: m.recall,
                map: m.map,
                coverage: m.coverage,
                popularity: m.popularity,
                training_time_s: self.training_time_s,
                mean_prediction_time_ms: self.mean_prediction_time_ms,
                prediction_events: self.prediction_events,
                sessions: self.sessions,
            })
            .collect()
    }
}

pub fn write_rows(rows: &[ReportRow], path: &Path) -> Result<()> {
    let mut w = csv::Writer::from_path(path)?;
    for row in rows {
        w.serialize(row)?;
    }
    w.flush()?;
    Ok(())
}

pub fn read_rows(path: &Path) -> Result<Vec<ReportRow>> {
    if !path.exists() {
        return Err(Error::MissingFile(path.to_path_buf()));
    }
    let mut r = csv::Reader::from_path(path)?;
    r.deserialize().map(|row| row.map_err(Error::from)).collect()
}

/// Slice-averaged metrics of one algorithm at one cutoff.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct AggregateRow {
    pub algorithm: String,
    pub cutoff: usize,
    pub slices: usize,
    /// False when some expected slice has no result for this algorithm.
    pub complete: bool,
    pub map: f64,
    pub precision: f64,
    pub recall: f64,
    pub hr: f64,
    pub mrr: f64,
    pub coverage: f64,
    pub popularity: f64,
    pub training_time_s: f64,
    pub mean_prediction_time_ms: f64,
}

/// Averages `rows` of the given set and cutoff over slices, sorted by MAP
/// (descending, then by name).
///
/// The expected slices are all slices that appear anywhere in `rows`
/// unless given explicitly.
pub fn aggregate(
    rows: &[ReportRow],
    eval_set: EvalSet,
    cutoff: usize,
    expected_slices: Option<&BTreeSet<usize>>,
) -> Vec<AggregateRow> {
    let selected: Vec<&ReportRow> = rows.iter().filter(|r| r.eval_set == eval_set && r.cutoff == cutoff).collect();
    let all_slices: BTreeSet<usize> = match expected_slices {
        Some(s) => s.clone(),
        None => selected.iter().map(|r| r.slice).collect(),
    };
    let mut by_alg: BTreeMap<&str, BTreeMap<usize, &ReportRow>> = BTreeMap::new();
    for r in selected {
        by_alg.entry(&r.algorithm).or_default().insert(r.slice, r);
    }
    let mut out: Vec<AggregateRow> = by_alg
        .into_iter()
        .map(|(alg, slices)| {
            let n = slices.len() as f64;
            let mean = |f: fn(&ReportRow) -> f64| slices.values().map(|r| f(r)).sum::<f64>() / n;
            AggregateRow {
                algorithm: alg.to_string(),
                cutoff,
                slices: slices.len(),
                complete: all_slices.iter().all(|s| slices.contains_key(s)),
                map: mean(|r| r.map),
                precision: mean(|r| r.precision),
                recall: mean(|r| r.recall),
                hr: mean(|r| r.hr),
                mrr: mean(|r| r.mrr),
                coverage: mean(|r| r.coverage),
                popularity: mean(|r| r.popularity),
                training_time_s: mean(|r| r.training_time_s),
                mean_prediction_time_ms: mean(|r| r.mean_prediction_time_ms),
            }
        })
        .collect();
    out.sort_by(|a, b| b.map.total_cmp(&a.map).then_with(|| a.algorithm.cmp(&b.algorithm)));
    out
}

pub fn write_aggregate(rows: &[AggregateRow], path: &Path) -> Result<()> {
    let mut w = csv::Writer::from_path(path)?;
    for row in rows {
        w.serialize(row)?;
    }
    w.flush()?;
    Ok(())
}

/// Fixed-width text table in the column order of the result tables.
pub fn render_table(rows: &[AggregateRow]) -> String {
    let k = rows.first().map_or(0, |r| r.cutoff);
    let width = rows.iter().map(|r| r.algorithm.len() + 1).max().unwrap_or(0).max(10);
    let mut s = format!("{:<width$}", "Metrics");
    for m in ["MAP", "P", "R", "HR", "MRR", "COV", "POP"] {
        let _ = write!(s, " {:>8}", format!("{m}@{k}"));
    }
    s.push('\n');
    for r in rows {
        let name = if r.complete { r.algorithm.clone() } else { format!("{}*", r.algorithm) };
        let _ = write!(s, "{name:<width$}");
        for v in [r.map, r.precision, r.recall, r.hr, r.mrr, r.coverage, r.popularity] {
            let _ = write!(s, " {v:>8.4}");
        }
        s.push('\n');
    }
    if rows.iter().any(|r| !r.complete) {
        s.push_str("* incomplete: results missing for some slices\n");
    }
    s
}
