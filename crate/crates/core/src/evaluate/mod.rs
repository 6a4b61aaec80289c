//! Iterative-reveal evaluation.
//!
//! Every evaluation session of length `L` yields `L - 1` prediction events:
//! after revealing the first `t` items, the model ranks candidates given the
//! prefix and the user's training history; item `t + 1` is the next-item
//! target (HR, MRR) and items `t + 1..=L` are the remaining-items target
//! (precision, recall, MAP). Values are averaged over prediction events.
//!
//! Sums are taken over sorted per-event values, so the reported numbers do
//! not depend on session order or on how work was split across threads.

mod metrics;
pub mod report;

use std::collections::{BTreeSet, HashSet};
use std::time::{Duration, Instant};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::algorithms::{PredictionContext, Recommender};
use crate::preprocess::{Session, SliceSplit};
use crate::recommender::{AlgorithmSpec, Params};
use crate::{Error, ItemId, Result};

pub use metrics::{
    coverage_at_k, hr_at_k, mrr_at_k, popularity_at_k, precision_recall_ap_at_k, Popularity,
};

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct MetricConfig {
    pub cutoffs: Vec<usize>,
}

impl Default for MetricConfig {
    fn default() -> Self {
        MetricConfig {
            cutoffs: vec![5, 10, 20],
        }
    }
}

impl MetricConfig {
    pub fn validate(&self) -> Result<()> {
        if self.cutoffs.is_empty() || self.cutoffs.contains(&0) {
            return Err(Error::InvalidConfig("cutoffs must be a non-empty list of values >= 1".into()));
        }
        Ok(())
    }

    fn max_cutoff(&self) -> usize {
        self.cutoffs.iter().copied().max().unwrap_or(0)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum EvalSet {
    Validation,
    Test,
}

impl EvalSet {
    pub fn name(self) -> &'static str {
        match self {
            EvalSet::Validation => "validation",
            EvalSet::Test => "test",
        }
    }
}

/// How prediction events are scheduled.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Execution {
    /// Sessions are spread over the rayon pool.
    Parallel,
    /// One worker, so per-event latencies are comparable across runs.
    Timing,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CutoffMetrics {
    pub cutoff: usize,
    pub hr: f64,
    pub mrr: f64,
    pub precision: f64,
    pub recall: f64,
    pub map: f64,
    pub coverage: f64,
    pub popularity: f64,
}

/// Quality metrics of one protocol run.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ProtocolOutcome {
    pub metrics: Vec<CutoffMetrics>,
    pub prediction_events: usize,
    pub sessions: usize,
    pub prediction_time: Duration,
}

/// Per-event values at one cutoff.
#[derive(Clone, Copy, Default)]
struct EventValues {
    hr: f64,
    mrr: f64,
    precision: f64,
    recall: f64,
    ap: f64,
    popularity_sum: f64,
    slots: usize,
}

struct SessionOutcome {
    /// events × cutoffs
    values: Vec<Vec<EventValues>>,
    /// top items (up to the largest cutoff) for each event
    tops: Vec<Vec<ItemId>>,
    latency: Duration,
}

fn replay_session(
    rec: &dyn Recommender,
    split: &SliceSplit,
    session: &Session,
    cfg: &MetricConfig,
    popularity: &Popularity,
) -> SessionOutcome {
    let history = split.train.user_sessions(session.user);
    let max_k = cfg.max_cutoff();
    let mut out = SessionOutcome {
        values: Vec::with_capacity(session.len() - 1),
        tops: Vec::with_capacity(session.len() - 1),
        latency: Duration::ZERO,
    };
    for t in 1..session.len() {
        let ctx = PredictionContext::prefix(session, t, history);
        let started = Instant::now();
        let ranked = rec.predict(&ctx);
        out.latency += started.elapsed();

        let next = session.items[t];
        let remaining: HashSet<ItemId> = session.items[t..].iter().copied().collect();
        let values = cfg
            .cutoffs
            .iter()
            .map(|&k| {
                let (precision, recall, ap) = precision_recall_ap_at_k(&ranked, &remaining, k);
                let top = ranked.top(k);
                EventValues {
                    hr: hr_at_k(&ranked, next, k),
                    mrr: mrr_at_k(&ranked, next, k),
                    precision,
                    recall,
                    ap,
                    popularity_sum: top.iter().map(|e| popularity.of(e.0)).sum(),
                    slots: top.len(),
                }
            })
            .collect();
        out.values.push(values);
        out.tops.push(ranked.top(max_k).iter().map(|e| e.0).collect());
    }
    out
}

fn sorted_sum(mut values: Vec<f64>) -> f64 {
    values.sort_unstable_by(f64::total_cmp);
    values.into_iter().sum()
}

/// Replays `sessions` (in any order) against `rec`, using `split.train` for
/// user histories, popularity and the coverage catalog.
pub fn replay_sessions(
    rec: &dyn Recommender,
    split: &SliceSplit,
    sessions: &[Session],
    cfg: &MetricConfig,
    execution: Execution,
) -> Result<ProtocolOutcome> {
    cfg.validate()?;
    if sessions.is_empty() {
        return Err(Error::EmptyResult("evaluation set has no sessions".into()));
    }
    if let Some(s) = sessions.iter().find(|s| s.len() < 2) {
        return Err(Error::InvalidInput(format!(
            "evaluation session {} has {} events; at least 2 are required",
            s.id,
            s.len()
        )));
    }
    let popularity = Popularity::from_counts(&split.train.item_counts());
    let outcomes: Vec<SessionOutcome> = match execution {
        Execution::Parallel => sessions
            .par_iter()
            .map(|s| replay_session(rec, split, s, cfg, &popularity))
            .collect(),
        Execution::Timing => sessions
            .iter()
            .map(|s| replay_session(rec, split, s, cfg, &popularity))
            .collect(),
    };

    let events: usize = outcomes.iter().map(|o| o.values.len()).sum();
    let catalog: &BTreeSet<ItemId> = &split.item_vocabulary;
    let metrics = cfg
        .cutoffs
        .iter()
        .enumerate()
        .map(|(c, &k)| {
            let column = |f: fn(&EventValues) -> f64| {
                sorted_sum(outcomes.iter().flat_map(|o| o.values.iter().map(|v| f(&v[c]))).collect())
            };
            let mean = |sum: f64| sum / events as f64;
            let covered: HashSet<ItemId> = outcomes
                .iter()
                .flat_map(|o| o.tops.iter().flat_map(|t| t.iter().take(k)))
                .copied()
                .filter(|i| catalog.contains(i))
                .collect();
            let slots: usize = outcomes.iter().flat_map(|o| o.values.iter().map(|v| v[c].slots)).sum();
            let popularity_sum = column(|v| v.popularity_sum);
            CutoffMetrics {
                cutoff: k,
                hr: mean(column(|v| v.hr)),
                mrr: mean(column(|v| v.mrr)),
                precision: mean(column(|v| v.precision)),
                recall: mean(column(|v| v.recall)),
                map: mean(column(|v| v.ap)),
                coverage: if catalog.is_empty() { 0.0 } else { covered.len() as f64 / catalog.len() as f64 },
                popularity: if slots == 0 { 0.0 } else { popularity_sum / slots as f64 },
            }
        })
        .collect();
    Ok(ProtocolOutcome {
        metrics,
        prediction_events: events,
        sessions: sessions.len(),
        prediction_time: outcomes.iter().map(|o| o.latency).sum(),
    })
}

/// Runs the protocol over the validation or test sessions of `split`.
pub fn run_protocol(
    rec: &dyn Recommender,
    split: &SliceSplit,
    set: EvalSet,
    cfg: &MetricConfig,
    execution: Execution,
) -> Result<ProtocolOutcome> {
    let log = match set {
        EvalSet::Validation => &split.validation,
        EvalSet::Test => &split.test,
    };
    replay_sessions(rec, split, log.sessions(), cfg, execution)
}

/// All measurements for one algorithm on one slice.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MetricReport {
    pub algorithm: String,
    pub params: Params,
    pub slice: usize,
    pub eval_set: EvalSet,
    pub metrics: Vec<CutoffMetrics>,
    pub training_time_s: f64,
    pub mean_prediction_time_ms: f64,
    pub prediction_events: usize,
    pub sessions: usize,
}

impl MetricReport {
    pub fn at(&self, cutoff: usize) -> Option<&CutoffMetrics> {
        self.metrics.iter().find(|m| m.cutoff == cutoff)
    }
}

/// Fits `spec` on the training sessions and evaluates it, recording the
/// wall-clock training time and the mean latency per prediction event.
pub fn evaluate(
    spec: &AlgorithmSpec,
    split: &SliceSplit,
    set: EvalSet,
    cfg: &MetricConfig,
    execution: Execution,
) -> Result<MetricReport> {
    let started = Instant::now();
    let model = spec.fit(&split.train)?;
    let training = started.elapsed();
    let outcome = run_protocol(&model, split, set, cfg, execution)?;
    Ok(MetricReport {
        algorithm: spec.name(),
        params: spec.to_params(),
        slice: split.slice_index,
        eval_set: set,
        metrics: outcome.metrics,
        training_time_s: training.as_secs_f64(),
        mean_prediction_time_ms: outcome.prediction_time.as_secs_f64() * 1000.0 / outcome.prediction_events as f64,
        prediction_events: outcome.prediction_events,
        sessions: outcome.sessions,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::algorithms::ScoredList;
    use crate::preprocess::SessionLog;

    /// Always recommends the fixed list.
    struct Fixed(Vec<ItemId>);

    impl Recommender for Fixed {
        fn predict(&self, _ctx: &PredictionContext<'_>) -> ScoredList {
            let n = self.0.len() as f64;
            ScoredList::new(self.0.iter().enumerate().map(|(i, &it)| (it, n - i as f64)).collect())
        }
    }

    fn split_with_test(test: Vec<Session>) -> SliceSplit {
        let train = SessionLog::new(vec![Session::new(100, 0, vec![1, 2, 3], vec![0, 1, 2])]);
        SliceSplit {
            slice_index: 0,
            item_vocabulary: train.items(),
            train,
            validation: SessionLog::default(),
            test: SessionLog::new(test),
        }
    }

    #[test]
    fn events_per_session() {
        let split = split_with_test(vec![Session::new(1, 0, vec![1, 2, 3], vec![10, 11, 12])]);
        let out = run_protocol(&Fixed(vec![2]), &split, EvalSet::Test, &MetricConfig::default(), Execution::Timing).unwrap();
        assert_eq!(out.prediction_events, 2);
        let m20 = &out.metrics[2];
        // event 1: next 2 hit at rank 1; event 2: next 3 missed
        assert_eq!(m20.hr, 0.5);
        assert_eq!(m20.mrr, 0.5);
    }

    #[test]
    fn perfect_single_item_recommender() {
        let split = split_with_test(vec![Session::new(1, 0, vec![1, 2], vec![10, 11])]);
        let out = run_protocol(&Fixed(vec![2]), &split, EvalSet::Test, &MetricConfig::default(), Execution::Parallel).unwrap();
        assert_eq!(out.metrics[2].hr, 1.0);
        assert_eq!(out.metrics[2].mrr, 1.0);
    }

    #[test]
    fn empty_and_short_sessions_are_errors() {
        let split = split_with_test(vec![]);
        assert!(run_protocol(&Fixed(vec![2]), &split, EvalSet::Test, &MetricConfig::default(), Execution::Timing).is_err());
        let short = vec![Session::new(1, 0, vec![1], vec![10])];
        assert!(replay_sessions(&Fixed(vec![2]), &split, &short, &MetricConfig::default(), Execution::Timing).is_err());
    }
}
