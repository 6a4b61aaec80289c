//! Session-aware wrappers applicable to any [`Recommender`]:
//!
//! * **Extend** prepends the user's most recent past interactions to a short
//!   ongoing session.
//! * **Boost** raises the score of items the user interacted with before.
//! * **Remind** mixes the base relevance with interaction recency and past
//!   session similarity for items of the user's last sessions.

use std::borrow::Cow;
use std::collections::{BTreeMap, HashSet};

use serde::{Deserialize, Serialize};

use crate::algorithms::{PredictionContext, Recommender, ScoredList};
use crate::preprocess::Session;
use crate::{Error, ItemId, Result};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExtendConfig {
    pub desired_length: usize,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BoostConfig {
    /// Fractional increase: 0.2 raises a score by 20%.
    pub boost: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RemindConfig {
    /// Number of most recent past sessions that supply reminder items.
    pub sessions: usize,
    pub weight_rel: u32,
    pub weight_irec: u32,
    pub weight_ssim: u32,
}

impl ExtendConfig {
    pub fn validate(&self) -> Result<()> {
        if self.desired_length == 0 {
            return Err(Error::InvalidConfig("extend desired_length must be >= 1".into()));
        }
        Ok(())
    }
}

impl BoostConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.boost.is_finite() && self.boost >= 0.0) {
            return Err(Error::InvalidConfig(format!("boost must be >= 0, got {}", self.boost)));
        }
        Ok(())
    }
}

impl RemindConfig {
    pub fn validate(&self) -> Result<()> {
        if self.sessions == 0 {
            return Err(Error::InvalidConfig("remind sessions must be >= 1".into()));
        }
        if self.weight_rel == 0 {
            return Err(Error::InvalidConfig("remind weight_rel must be >= 1".into()));
        }
        Ok(())
    }
}

/// Prepends past interactions, most recent first, until the ongoing session
/// reaches the desired length or the history runs out.
pub fn extend_session<'a>(ctx: &PredictionContext<'a>, cfg: &ExtendConfig) -> PredictionContext<'a> {
    let have = ctx.items.len();
    if have >= cfg.desired_length || ctx.history.is_empty() {
        return ctx.clone();
    }
    let need = cfg.desired_length - have;
    let mut prepended: Vec<(ItemId, u64)> = ctx
        .history
        .iter()
        .rev()
        .flat_map(|s| s.items.iter().copied().zip(s.timestamps.iter().copied()).rev())
        .take(need)
        .collect();
    prepended.reverse();
    let mut items: Vec<ItemId> = prepended.iter().map(|e| e.0).collect();
    let mut timestamps: Vec<u64> = prepended.iter().map(|e| e.1).collect();
    items.extend_from_slice(&ctx.items);
    timestamps.extend_from_slice(&ctx.timestamps);
    PredictionContext {
        items: Cow::Owned(items),
        timestamps: Cow::Owned(timestamps),
        history: ctx.history,
        now: ctx.now,
    }
}

/// Multiplies by `1 + boost` the score of every item that occurs at least
/// once in the user's history.
pub fn boost_scores(scores: ScoredList, ctx: &PredictionContext<'_>, cfg: &BoostConfig) -> ScoredList {
    if cfg.boost == 0.0 || ctx.history.is_empty() {
        return scores;
    }
    let seen: HashSet<ItemId> = ctx.history.iter().flat_map(|s| s.items.iter().copied()).collect();
    let factor = 1.0 + cfg.boost;
    ScoredList::new(
        scores
            .into_entries()
            .into_iter()
            .map(|(item, score)| if seen.contains(&item) { (item, score * factor) } else { (item, score) })
            .collect(),
    )
}

/// The user's `p` most recent past sessions, oldest first.
pub fn last_sessions<'a>(ctx: &PredictionContext<'a>, p: usize) -> &'a [Session] {
    let h = ctx.history;
    &h[h.len().saturating_sub(p)..]
}

/// `T_c / (T_c - T_i)` where `T_i` is the user's latest interaction with
/// `item` in `sessions` and `T_c` the current session start. Zero when the
/// item does not occur.
pub fn irec_score(ctx: &PredictionContext<'_>, item: ItemId, sessions: &[Session]) -> Result<f64> {
    let latest = sessions
        .iter()
        .flat_map(|s| s.items.iter().zip(&s.timestamps))
        .filter(|(i, _)| **i == item)
        .map(|(_, t)| *t)
        .max();
    match latest {
        None => Ok(0.0),
        Some(t) if t >= ctx.now => Err(Error::NonPastInteraction {
            interaction: t,
            current: ctx.now,
        }),
        Some(t) => Ok(ctx.now as f64 / (ctx.now - t) as f64),
    }
}

/// Sum of the similarities of the past sessions that contain `item`;
/// `sims[i]` belongs to `sessions[i]`.
pub fn ssim_score(item: ItemId, sessions: &[Session], sims: &[f64]) -> f64 {
    sessions
        .iter()
        .zip(sims)
        .filter(|(s, _)| s.contains(item))
        .map(|(_, sim)| sim)
        .sum()
}

/// Similarity of the ongoing session to each of the user's last `p`
/// sessions, or `None` when the model has no session similarity.
pub fn past_session_similarities(model: &dyn Recommender, ctx: &PredictionContext<'_>, p: usize) -> Option<Vec<f64>> {
    last_sessions(ctx, p)
        .iter()
        .map(|s| model.session_similarity(ctx, s))
        .collect()
}

fn min_max(values: impl Iterator<Item = f64> + Clone) -> impl Fn(f64) -> f64 {
    let (lo, hi) = values.fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), v| (lo.min(v), hi.max(v)));
    move |v| if hi > lo { (v - lo) / (hi - lo) } else { 0.0 }
}

/// Hybrid reminder scoring: `W1·Rel + W2·IRec + W3·SSim` with every
/// component min-max normalized over the candidates (base items plus items
/// of the last sessions). Without `sims` the SSim term is dropped.
///
/// The output keeps every base item and any reminder item with a positive
/// combined score.
pub fn remind_combine(scores: ScoredList, ctx: &PredictionContext<'_>, cfg: &RemindConfig, sims: Option<&[f64]>) -> ScoredList {
    let recent = last_sessions(ctx, cfg.sessions);
    let weight_ssim = if sims.is_some() { cfg.weight_ssim } else { 0 };

    // raw (rel, irec, ssim, from_base)
    let mut candidates: BTreeMap<ItemId, (f64, f64, f64, bool)> = BTreeMap::new();
    for &(item, score) in scores.entries() {
        candidates.insert(item, (score, 0.0, 0.0, true));
    }
    for item in recent.iter().flat_map(|s| s.items.iter().copied()) {
        candidates.entry(item).or_insert((0.0, 0.0, 0.0, false));
    }
    for (&item, c) in candidates.iter_mut() {
        // past sessions end before the current one starts; anything else
        // contributes no recency
        c.1 = irec_score(ctx, item, recent).unwrap_or(0.0);
        if let Some(sims) = sims {
            c.2 = ssim_score(item, recent, sims);
        }
    }
    let rel = min_max(candidates.values().map(|c| c.0));
    let irec = min_max(candidates.values().map(|c| c.1));
    let ssim = min_max(candidates.values().map(|c| c.2));
    ScoredList::new(
        candidates
            .iter()
            .map(|(&item, c)| {
                let combined = cfg.weight_rel as f64 * rel(c.0)
                    + cfg.weight_irec as f64 * irec(c.1)
                    + weight_ssim as f64 * ssim(c.2);
                (item, combined, c.3)
            })
            .filter(|&(_, combined, from_base)| from_base || combined > 0.0)
            .map(|(item, combined, _)| (item, combined))
            .collect(),
    )
}
