//! Random hyperparameter search.
//!
//! The joint phase tunes the base algorithm together with Extend and Boost;
//! Remind weights are then tuned with the joint winner frozen. The post-hoc
//! phase always starts with the neutral reminder setting (one session, only
//! the base relevance weighted), which reproduces the joint winner's ranking,
//! so the final configuration never scores below the frozen one.

mod presets;
mod space;

use std::collections::HashMap;
use std::path::Path;

use rand::{RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::recommender::{AlgorithmSpec, Method, ParamValue, Params, Variant};
use crate::{Error, Result};

pub use presets::{optimum, preset, Dataset};
pub use space::{sample_config, Phase, SearchSpace};

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SearchConfig {
    pub trials: usize,
    pub posthoc_trials: usize,
    pub seed: u64,
}

impl Default for SearchConfig {
    fn default() -> Self {
        SearchConfig {
            trials: 100,
            posthoc_trials: 100,
            seed: 42,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Trial {
    pub index: usize,
    pub phase: Phase,
    /// Seed the parameters were drawn with; `None` for the neutral anchor.
    pub seed: Option<u64>,
    pub variant: Variant,
    pub params: Params,
    /// `None` when the objective failed.
    pub score: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub error: Option<String>,
    /// Score re-used from an identical earlier configuration.
    pub cached: bool,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SearchResult {
    pub variant: Variant,
    pub seed: u64,
    pub best_params: Params,
    pub best_score: f64,
    pub trials: Vec<Trial>,
}

impl SearchResult {
    pub fn best_spec(&self) -> Result<AlgorithmSpec> {
        AlgorithmSpec::from_params(self.variant, &self.best_params)
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        let mut text = serde_json::to_string_pretty(self)?;
        text.push('\n');
        std::fs::write(path, text)?;
        Ok(())
    }

    pub fn load(path: &Path) -> Result<Self> {
        if !path.exists() {
            return Err(Error::MissingFile(path.to_path_buf()));
        }
        Ok(serde_json::from_str(&std::fs::read_to_string(path)?)?)
    }
}

type Outcome = std::result::Result<f64, String>;

fn cache_key(variant: Variant, params: &Params) -> String {
    format!("{variant}:{}", serde_json::to_string(params).expect("params serialize"))
}

/// Scores of previously evaluated configurations, keyed by variant and
/// parameters.
#[derive(Clone, Debug, Default)]
pub struct TrialCache {
    scores: HashMap<String, Outcome>,
}

impl TrialCache {
    /// Collects the successful trials of an earlier run.
    pub fn from_result(previous: &SearchResult) -> Self {
        let scores = previous
            .trials
            .iter()
            .filter_map(|t| t.score.map(|s| (cache_key(t.variant, &t.params), Ok(s))))
            .collect();
        TrialCache { scores }
    }

    pub fn len(&self) -> usize {
        self.scores.len()
    }

    pub fn is_empty(&self) -> bool {
        self.scores.is_empty()
    }
}

struct Planned {
    seed: Option<u64>,
    params: Params,
}

fn run_phase<F>(
    phase: Phase,
    variant: Variant,
    planned: Vec<Planned>,
    first_index: usize,
    objective: &F,
    cache: &mut TrialCache,
) -> Vec<Trial>
where
    F: Fn(&AlgorithmSpec) -> Result<f64> + Sync,
{
    let keys: Vec<String> = planned.iter().map(|p| cache_key(variant, &p.params)).collect();
    // distinct configurations not seen before, in first-occurrence order
    let mut fresh: Vec<usize> = Vec::new();
    let mut seen = std::collections::HashSet::new();
    for (i, key) in keys.iter().enumerate() {
        if !cache.scores.contains_key(key) && seen.insert(key.as_str()) {
            fresh.push(i);
        }
    }
    let evaluated: Vec<(usize, Outcome)> = fresh
        .par_iter()
        .map(|&i| {
            let outcome = AlgorithmSpec::from_params(variant, &planned[i].params)
                .and_then(|spec| objective(&spec))
                .map_err(|e| e.to_string())
                .and_then(|s| if s.is_nan() { Err("objective returned NaN".to_string()) } else { Ok(s) });
            (i, outcome)
        })
        .collect();
    let first_eval: HashMap<usize, Outcome> = evaluated.into_iter().collect();
    for (&i, outcome) in &first_eval {
        if let Err(msg) = outcome {
            log::warn!("{variant} trial {}: {msg}", first_index + i);
        }
        cache.scores.insert(keys[i].clone(), outcome.clone());
    }

    planned
        .into_iter()
        .enumerate()
        .map(|(i, p)| {
            let outcome = &cache.scores[&keys[i]];
            Trial {
                index: first_index + i,
                phase,
                seed: p.seed,
                variant,
                params: p.params,
                score: outcome.as_ref().ok().copied(),
                error: outcome.as_ref().err().cloned(),
                cached: !first_eval.contains_key(&i),
            }
        })
        .collect()
}

/// Index of the best trial; ties go to the earlier trial, failures lose.
fn argmax(trials: &[Trial]) -> Option<usize> {
    let mut best: Option<(usize, f64)> = None;
    for (i, t) in trials.iter().enumerate() {
        if let Some(s) = t.score {
            if best.is_none_or(|(_, b)| s > b) {
                best = Some((i, s));
            }
        }
    }
    best.map(|(i, _)| i)
}

fn neutral_reminder(method: Method) -> Params {
    let mut p = Params::new();
    p.insert("remind_sessions_num".into(), ParamValue::Int(1));
    p.insert("weight_rel".into(), ParamValue::Int(1));
    p.insert("weight_irec".into(), ParamValue::Int(0));
    if method != Method::Sr {
        p.insert("weight_ssim".into(), ParamValue::Int(0));
    }
    p
}

/// Random search over `space`, maximizing `objective`.
///
/// Draws are fixed by `cfg.seed` before anything is evaluated, so the trial
/// log does not depend on scheduling. Identical configurations are
/// evaluated once; `cache` carries scores across runs.
pub fn random_search<F>(
    space: &SearchSpace,
    cfg: &SearchConfig,
    objective: F,
    cache: Option<TrialCache>,
) -> Result<SearchResult>
where
    F: Fn(&AlgorithmSpec) -> Result<f64> + Sync,
{
    space.validate()?;
    if cfg.trials == 0 {
        return Err(Error::InvalidConfig("at least one trial is required".into()));
    }
    let mut cache = cache.unwrap_or_default();
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let variant = space.variant;
    let joint_variant = Variant {
        remind: false,
        ..variant
    };

    let joint_space = space.phase(Phase::Joint);
    let planned = (0..cfg.trials)
        .map(|_| {
            let seed = rng.next_u64();
            Planned {
                seed: Some(seed),
                params: sample_config(&joint_space, seed),
            }
        })
        .collect();
    let mut trials = run_phase(Phase::Joint, joint_variant, planned, 0, &objective, &mut cache);
    let best = argmax(&trials).ok_or_else(|| {
        Error::EmptyResult(format!(
            "all {} trials of {variant} failed: {}",
            trials.len(),
            trials[0].error.as_deref().unwrap_or("unknown error")
        ))
    })?;
    let frozen = trials[best].params.clone();

    if variant.remind {
        let post_space = space.phase(Phase::PostHoc);
        let with_frozen = |mut p: Params| {
            p.extend(frozen.iter().map(|(k, v)| (k.clone(), v.clone())));
            p
        };
        let mut planned = vec![Planned {
            seed: None,
            params: with_frozen(neutral_reminder(variant.method)),
        }];
        planned.extend((0..cfg.posthoc_trials).map(|_| {
            let seed = rng.next_u64();
            Planned {
                seed: Some(seed),
                params: with_frozen(sample_config(&post_space, seed)),
            }
        }));
        let post = run_phase(Phase::PostHoc, variant, planned, trials.len(), &objective, &mut cache);
        let best = argmax(&post).ok_or_else(|| Error::EmptyResult(format!("all reminder trials of {variant} failed")))?;
        let (params, score) = (post[best].params.clone(), post[best].score.unwrap_or(f64::NEG_INFINITY));
        trials.extend(post);
        return Ok(SearchResult {
            variant,
            seed: cfg.seed,
            best_params: params,
            best_score: score,
            trials,
        });
    }

    Ok(SearchResult {
        variant,
        seed: cfg.seed,
        best_score: trials[best].score.unwrap_or(f64::NEG_INFINITY),
        best_params: frozen,
        trials,
    })
}

#[cfg(test)]
mod tests {
    use std::collections::BTreeMap;
    use std::sync::atomic::{AtomicUsize, Ordering};

    use super::*;
    use crate::algorithms::AlgorithmConfig;

    fn sr_steps(spec: &AlgorithmSpec) -> usize {
        match &spec.base {
            AlgorithmConfig::Sr(c) => c.steps,
            _ => unreachable!(),
        }
    }

    fn cfg(trials: usize) -> SearchConfig {
        SearchConfig {
            trials,
            posthoc_trials: 10,
            seed: 7,
        }
    }

    #[test]
    fn single_trial_wins() {
        let space = SearchSpace::standard(Variant::base(Method::Sr));
        let r = random_search(&space, &cfg(1), |_| Ok(0.1), None).unwrap();
        assert_eq!(r.trials.len(), 1);
        assert_eq!(r.best_params, r.trials[0].params);
        assert_eq!(r.best_params, sample_config(&space, r.trials[0].seed.unwrap()));
    }

    #[test]
    fn argmax_picks_injected_winner() {
        let space = SearchSpace::standard(Variant::base(Method::Sr));
        let r = random_search(&space, &cfg(100), |s| Ok(if sr_steps(s) == 9 { 0.9 } else { 0.5 }), None).unwrap();
        assert!(r.trials.iter().any(|t| t.params["steps"] == ParamValue::Int(9)));
        assert_eq!(r.best_params["steps"], ParamValue::Int(9));
        assert_eq!(r.best_score, 0.9);
        // tie among 0.9s goes to the first
        let first = r.trials.iter().find(|t| t.score == Some(0.9)).unwrap();
        assert_eq!(first.params, r.best_params);
    }

    #[test]
    fn duplicates_evaluated_once_and_failures_logged() {
        let mut small = BTreeMap::new();
        small.insert("steps".to_string(), vec![ParamValue::Int(2), ParamValue::Int(3)]);
        small.insert("weighting".to_string(), vec![ParamValue::Str("div".into())]);
        let space = SearchSpace::with_overrides(Variant::base(Method::Sr), &small).unwrap();
        let calls = AtomicUsize::new(0);
        let r = random_search(
            &space,
            &cfg(20),
            |s| {
                calls.fetch_add(1, Ordering::SeqCst);
                if sr_steps(s) == 2 {
                    Err(Error::InvalidInput("boom".into()))
                } else {
                    Ok(0.2)
                }
            },
            None,
        )
        .unwrap();
        assert_eq!(calls.load(Ordering::SeqCst), 2);
        assert_eq!(r.trials.len(), 20);
        assert!(r.trials.iter().any(|t| t.score.is_none() && t.error.is_some()));
        assert_eq!(r.best_params["steps"], ParamValue::Int(3));

        // resuming re-uses all successful scores
        let calls = AtomicUsize::new(0);
        random_search(
            &space,
            &cfg(20),
            |_| {
                calls.fetch_add(1, Ordering::SeqCst);
                Ok(0.0)
            },
            Some(TrialCache::from_result(&r)),
        )
        .unwrap();
        assert_eq!(calls.load(Ordering::SeqCst), 1);
    }

    #[test]
    fn posthoc_keeps_frozen_base() {
        let space = SearchSpace::standard("sr_br".parse().unwrap());
        let r = random_search(&space, &cfg(15), |s| Ok(sr_steps(s) as f64 / 100.0), None).unwrap();
        let joint: Vec<&Trial> = r.trials.iter().filter(|t| t.phase == Phase::Joint).collect();
        let post: Vec<&Trial> = r.trials.iter().filter(|t| t.phase == Phase::PostHoc).collect();
        assert_eq!(joint.len(), 15);
        assert_eq!(post.len(), 11);
        let frozen = &joint.iter().max_by(|a, b| a.score.partial_cmp(&b.score).unwrap().then(b.index.cmp(&a.index))).unwrap().params;
        for t in &post {
            for (k, v) in frozen.iter() {
                assert_eq!(&t.params[k], v);
            }
        }
        assert!(r.trials.iter().all(|t| t.score.unwrap() <= r.best_score));
        assert!(r.best_spec().unwrap().remind.is_some());
    }

    #[test]
    fn deterministic_log() {
        let space = SearchSpace::standard("vstan_ebr".parse().unwrap());
        let run = || random_search(&space, &cfg(30), |s| Ok(s.name().len() as f64), None).unwrap();
        assert_eq!(run(), run());
    }
}
