use std::collections::{BTreeSet, HashMap, HashSet};

use crate::algorithms::ScoredList;
use crate::ItemId;

/// 1 if `next` is within the top `k`, else 0.
pub fn hr_at_k(ranked: &ScoredList, next: ItemId, k: usize) -> f64 {
    match ranked.top(k).iter().any(|e| e.0 == next) {
        true => 1.0,
        false => 0.0,
    }
}

/// Reciprocal rank of `next` if it is within the top `k`, else 0.
pub fn mrr_at_k(ranked: &ScoredList, next: ItemId, k: usize) -> f64 {
    ranked
        .top(k)
        .iter()
        .position(|e| e.0 == next)
        .map_or(0.0, |p| 1.0 / (p + 1) as f64)
}

/// Precision, recall and average precision of the top `k` against the set
/// of `remaining` items.
///
/// `AP@k = 1/min(|remaining|, k) · Σ_{i ≤ k} P@i · rel(i)`.
pub fn precision_recall_ap_at_k(ranked: &ScoredList, remaining: &HashSet<ItemId>, k: usize) -> (f64, f64, f64) {
    if remaining.is_empty() {
        return (0.0, 0.0, 0.0);
    }
    let mut hits = 0usize;
    let mut ap_sum = 0.0;
    for (i, &(item, _)) in ranked.top(k).iter().enumerate() {
        if remaining.contains(&item) {
            hits += 1;
            ap_sum += hits as f64 / (i + 1) as f64;
        }
    }
    let precision = hits as f64 / k as f64;
    let recall = hits as f64 / remaining.len() as f64;
    let ap = ap_sum / remaining.len().min(k) as f64;
    (precision, recall, ap)
}

/// Share of the catalog that appears in at least one top-`k` list.
pub fn coverage_at_k<'a, I>(lists: I, catalog: &BTreeSet<ItemId>, k: usize) -> f64
where
    I: IntoIterator<Item = &'a ScoredList>,
{
    if catalog.is_empty() {
        return 0.0;
    }
    let seen: HashSet<ItemId> = lists
        .into_iter()
        .flat_map(|l| l.top(k).iter().map(|e| e.0))
        .filter(|i| catalog.contains(i))
        .collect();
    seen.len() as f64 / catalog.len() as f64
}

/// Min-max normalized training popularity per item.
#[derive(Clone, Debug, Default)]
pub struct Popularity {
    normalized: HashMap<ItemId, f64>,
}

impl Popularity {
    /// Normalizes event counts to [0, 1]; all-equal counts map to 0.
    pub fn from_counts(counts: &HashMap<ItemId, usize>) -> Self {
        let min = counts.values().copied().min().unwrap_or(0);
        let max = counts.values().copied().max().unwrap_or(0);
        let normalized = counts
            .iter()
            .map(|(&item, &c)| {
                let v = if max > min { (c - min) as f64 / (max - min) as f64 } else { 0.0 };
                (item, v)
            })
            .collect();
        Popularity { normalized }
    }

    /// Normalized popularity; items outside the training vocabulary count as 0.
    pub fn of(&self, item: ItemId) -> f64 {
        self.normalized.get(&item).copied().unwrap_or(0.0)
    }
}

/// Mean normalized popularity over all filled top-`k` slots.
pub fn popularity_at_k<'a, I>(lists: I, popularity: &Popularity, k: usize) -> f64
where
    I: IntoIterator<Item = &'a ScoredList>,
{
    let (sum, slots) = lists
        .into_iter()
        .flat_map(|l| l.top(k).iter())
        .fold((0.0, 0usize), |(s, n), e| (s + popularity.of(e.0), n + 1));
    if slots == 0 {
        0.0
    } else {
        sum / slots as f64
    }
}
