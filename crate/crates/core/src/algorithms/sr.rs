use std::collections::HashMap;

use serde::{Deserialize, Serialize};

use super::{Decay, PredictionContext, ScoredList};
use crate::preprocess::SessionLog;
use crate::{Error, ItemId, Result};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SrConfig {
    /// Maximum forward distance between the two items of a rule.
    pub steps: usize,
    pub weighting: Decay,
}

impl Default for SrConfig {
    fn default() -> Self {
        SrConfig {
            steps: 10,
            weighting: Decay::Div,
        }
    }
}

impl SrConfig {
    pub fn validate(&self) -> Result<()> {
        if self.steps == 0 {
            return Err(Error::InvalidConfig("sr.steps must be >= 1".into()));
        }
        Ok(())
    }
}

/// Sequential rules: for every ordered pair `a` before `b` within `steps`
/// positions of one training session, rule `a -> b` accumulates the distance
/// weight. Rule weights are raw sums, not normalized per antecedent.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SrModel {
    pub config: SrConfig,
    /// Consequents of each antecedent, sorted by item id.
    rules: Vec<Vec<(ItemId, f64)>>,
}

impl SrModel {
    pub fn fit(train: &SessionLog, config: &SrConfig) -> Self {
        let mut table: Vec<HashMap<ItemId, f64>> = Vec::new();
        for session in train.sessions() {
            let items = &session.items;
            for j in 1..items.len() {
                for i in j.saturating_sub(config.steps)..j {
                    let a = items[i] as usize;
                    if a >= table.len() {
                        table.resize_with(a + 1, HashMap::new);
                    }
                    *table[a].entry(items[j]).or_insert(0.0) += config.weighting.distance_weight(j - i);
                }
            }
        }
        let rules = table
            .into_iter()
            .map(|m| {
                let mut v: Vec<(ItemId, f64)> = m.into_iter().collect();
                v.sort_unstable_by_key(|e| e.0);
                v
            })
            .collect();
        SrModel {
            config: config.clone(),
            rules,
        }
    }

    /// Weight of the rule `from -> to`, zero when absent.
    pub fn rule(&self, from: ItemId, to: ItemId) -> f64 {
        self.consequents(from)
            .binary_search_by_key(&to, |e| e.0)
            .map(|i| self.consequents(from)[i].1)
            .unwrap_or(0.0)
    }

    fn consequents(&self, from: ItemId) -> &[(ItemId, f64)] {
        self.rules.get(from as usize).map(Vec::as_slice).unwrap_or(&[])
    }

    pub fn predict(&self, ctx: &PredictionContext<'_>) -> ScoredList {
        match ctx.items.last() {
            Some(&last) => ScoredList::from_positive(self.consequents(last).iter().copied()),
            None => ScoredList::default(),
        }
    }
}
