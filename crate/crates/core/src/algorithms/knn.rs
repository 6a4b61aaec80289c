//! Session-based nearest neighbors: VSKNN, STAN and VSTAN over one shared
//! inverted index.
//!
//! Training sessions are stored most recent first (start time descending,
//! then id descending), so a session's position in the store is its recency
//! rank and every posting list is already recency ordered.
//!
//! The ongoing session becomes a weighted vector over its distinct items; a
//! repeated item takes the weight of its last position. Within a stored
//! session, a repeated item is located at its last position as well.

use std::collections::HashMap;

use serde::{Deserialize, Serialize};

use super::{AlgorithmConfig, Decay, PredictionContext, ScoredList};
use crate::preprocess::{Session, SessionLog, SECONDS_PER_DAY};
use crate::{Error, ItemId, Result, SessionId, Timestamp};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Similarity {
    /// Dot product normalized by both vector lengths.
    Cosine,
    /// Plain dot product.
    Vec,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct VsknnConfig {
    pub k: usize,
    pub sample_size: usize,
    /// Position decay of the ongoing session's items when matching sessions.
    pub weighting: Decay,
    /// Decay applied to a neighbor's item scores by how far back in the
    /// ongoing session its most recent shared item lies.
    pub weighting_score: Decay,
    /// IDF strength; `None` disables IDF weighting.
    pub idf_weighting: Option<u32>,
}

impl Default for VsknnConfig {
    fn default() -> Self {
        VsknnConfig {
            k: 100,
            sample_size: 1000,
            weighting: Decay::Div,
            weighting_score: Decay::Div,
            idf_weighting: None,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct StanConfig {
    pub k: usize,
    pub sample_size: usize,
    /// Decay of item weights by position in the ongoing session.
    pub lambda_spw: f64,
    /// Decay of neighbor weights by session age difference, in days.
    pub lambda_snh: f64,
    /// Decay of item scores by distance to the shared item inside a neighbor.
    pub lambda_inh: f64,
}

impl Default for StanConfig {
    fn default() -> Self {
        StanConfig {
            k: 500,
            sample_size: 2500,
            lambda_spw: 0.905,
            lambda_snh: 100.0,
            lambda_inh: 0.905,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct VstanConfig {
    pub k: usize,
    pub sample_size: usize,
    pub similarity: Similarity,
    pub lambda_spw: f64,
    pub lambda_snh: f64,
    pub lambda_inh: f64,
    /// Decay of item scores by their position inside the neighbor session.
    pub lambda_ipw: f64,
    /// Strength of the min-max scaled IDF bonus; `None` disables it.
    pub lambda_idf: Option<u32>,
}

impl Default for VstanConfig {
    fn default() -> Self {
        VstanConfig {
            k: 500,
            sample_size: 2500,
            similarity: Similarity::Cosine,
            lambda_spw: 0.905,
            lambda_snh: 100.0,
            lambda_inh: 0.905,
            lambda_ipw: 0.905,
            lambda_idf: None,
        }
    }
}

/// `k > sample_size` is accepted: the pool never holds more than
/// `sample_size` sessions, so it acts as `k = sample_size`. Published optima
/// use such settings.
fn check_neighbors(k: usize, sample_size: usize) -> Result<()> {
    if k == 0 || sample_size == 0 {
        return Err(Error::InvalidConfig("k and sample_size must be >= 1".into()));
    }
    Ok(())
}

fn check_lambdas(lambdas: &[(&str, f64)]) -> Result<()> {
    for (name, value) in lambdas {
        if value.is_nan() || *value <= 0.0 {
            return Err(Error::InvalidConfig(format!("{name} must be > 0, got {value}")));
        }
    }
    Ok(())
}

impl VsknnConfig {
    pub fn validate(&self) -> Result<()> {
        check_neighbors(self.k, self.sample_size)
    }
}

impl StanConfig {
    pub fn validate(&self) -> Result<()> {
        check_neighbors(self.k, self.sample_size)?;
        check_lambdas(&[
            ("lambda_spw", self.lambda_spw),
            ("lambda_snh", self.lambda_snh),
            ("lambda_inh", self.lambda_inh),
        ])
    }
}

impl VstanConfig {
    pub fn validate(&self) -> Result<()> {
        check_neighbors(self.k, self.sample_size)?;
        check_lambdas(&[
            ("lambda_spw", self.lambda_spw),
            ("lambda_snh", self.lambda_snh),
            ("lambda_inh", self.lambda_inh),
            ("lambda_ipw", self.lambda_ipw),
        ])
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum NeighborMethod {
    Vsknn(VsknnConfig),
    Stan(StanConfig),
    Vstan(VstanConfig),
}

impl NeighborMethod {
    pub fn to_config(&self) -> AlgorithmConfig {
        match self {
            NeighborMethod::Vsknn(c) => AlgorithmConfig::Vsknn(c.clone()),
            NeighborMethod::Stan(c) => AlgorithmConfig::Stan(c.clone()),
            NeighborMethod::Vstan(c) => AlgorithmConfig::Vstan(c.clone()),
        }
    }

    fn k_and_sample(&self) -> (usize, usize) {
        match self {
            NeighborMethod::Vsknn(c) => (c.k, c.sample_size),
            NeighborMethod::Stan(c) => (c.k, c.sample_size),
            NeighborMethod::Vstan(c) => (c.k, c.sample_size),
        }
    }
}

/// A training session as stored in the index.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct IndexedSession {
    pub id: SessionId,
    pub start: Timestamp,
    pub len: u32,
    /// Distinct items with their last 1-based position, sorted by item.
    pub distinct: Vec<(ItemId, u32)>,
}

impl IndexedSession {
    fn from_session(session: &Session) -> Self {
        let mut last: HashMap<ItemId, u32> = HashMap::with_capacity(session.len());
        for (pos, &item) in session.items.iter().enumerate() {
            last.insert(item, pos as u32 + 1);
        }
        let mut distinct: Vec<(ItemId, u32)> = last.into_iter().collect();
        distinct.sort_unstable_by_key(|e| e.0);
        IndexedSession {
            id: session.id,
            start: session.start_time(),
            len: session.len() as u32,
            distinct,
        }
    }

    fn last_position(&self, item: ItemId) -> Option<u32> {
        self.distinct
            .binary_search_by_key(&item, |e| e.0)
            .ok()
            .map(|i| self.distinct[i].1)
    }
}

/// Inverted item-to-session index with IDF statistics.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct KnnIndex {
    sessions: Vec<IndexedSession>,
    postings: Vec<Vec<u32>>,
    idf: Vec<f64>,
    idf_min: f64,
    idf_max: f64,
}

impl KnnIndex {
    pub fn build(train: &SessionLog) -> Self {
        let mut sessions: Vec<IndexedSession> = train.sessions().iter().map(IndexedSession::from_session).collect();
        sessions.sort_unstable_by(|a, b| b.start.cmp(&a.start).then(b.id.cmp(&a.id)));

        let num_items = sessions
            .iter()
            .flat_map(|s| s.distinct.iter().map(|e| e.0 as usize + 1))
            .max()
            .unwrap_or(0);
        let mut postings: Vec<Vec<u32>> = vec![Vec::new(); num_items];
        for (rank, s) in sessions.iter().enumerate() {
            for &(item, _) in &s.distinct {
                postings[item as usize].push(rank as u32);
            }
        }
        let n = sessions.len() as f64;
        let idf: Vec<f64> = postings
            .iter()
            .map(|p| if p.is_empty() { 0.0 } else { (n / p.len() as f64).ln() })
            .collect();
        let present = postings.iter().zip(&idf).filter(|(p, _)| !p.is_empty()).map(|(_, v)| *v);
        let (idf_min, idf_max) = present.fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), v| (lo.min(v), hi.max(v)));
        KnnIndex {
            sessions,
            postings,
            idf,
            idf_min,
            idf_max,
        }
    }

    pub fn num_sessions(&self) -> usize {
        self.sessions.len()
    }

    /// Stored session by recency rank (0 = most recent).
    pub fn session(&self, rank: usize) -> &IndexedSession {
        &self.sessions[rank]
    }

    /// Recency ranks of the sessions containing `item`.
    pub fn sessions_with(&self, item: ItemId) -> &[u32] {
        self.postings.get(item as usize).map(Vec::as_slice).unwrap_or(&[])
    }

    /// `ln(|sessions| / |sessions containing item|)`; zero for unseen items.
    pub fn idf(&self, item: ItemId) -> f64 {
        self.idf.get(item as usize).copied().unwrap_or(0.0)
    }

    /// IDF scaled to [0, 1] over the indexed items.
    fn idf_scaled(&self, item: ItemId) -> f64 {
        let range = self.idf_max - self.idf_min;
        if range > 0.0 {
            (self.idf(item) - self.idf_min) / range
        } else {
            0.0
        }
    }

    /// Sessions sharing at least one item with `items`, capped to the
    /// `sample_size` most recent. Returned as recency ranks, most recent first.
    pub fn pool(&self, items: &[ItemId], sample_size: usize) -> Vec<usize> {
        let mut distinct: Vec<ItemId> = items.to_vec();
        distinct.sort_unstable();
        distinct.dedup();
        let mut pool: Vec<u32> = Vec::new();
        for item in distinct {
            let posting = self.sessions_with(item);
            // postings are sorted, so only the first `sample_size` can survive
            pool.extend_from_slice(&posting[..posting.len().min(sample_size)]);
        }
        pool.sort_unstable();
        pool.dedup();
        pool.truncate(sample_size);
        pool.into_iter().map(|r| r as usize).collect()
    }
}

#[derive(Clone, Copy, Debug)]
struct QueryItem {
    item: ItemId,
    weight: f64,
    last_pos: usize,
}

/// Weighted vector of the ongoing session.
struct Query {
    items: Vec<QueryItem>,
    norm: f64,
    len: usize,
}

impl Query {
    fn new(session: &[ItemId], weight: impl Fn(usize, usize) -> f64) -> Self {
        let len = session.len();
        let mut last: HashMap<ItemId, usize> = HashMap::with_capacity(len);
        for (pos, &item) in session.iter().enumerate() {
            last.insert(item, pos + 1);
        }
        let mut items: Vec<QueryItem> = last
            .into_iter()
            .map(|(item, last_pos)| QueryItem {
                item,
                weight: weight(last_pos, len),
                last_pos,
            })
            .collect();
        items.sort_unstable_by_key(|q| q.item);
        let norm = items.iter().map(|q| q.weight * q.weight).sum::<f64>().sqrt();
        Query { items, norm, len }
    }

    /// Dot product with a stored session plus the latest query position and
    /// the latest neighbor position among the shared items.
    fn match_session(&self, other: &IndexedSession) -> Match {
        let mut m = Match::default();
        for q in &self.items {
            if let Some(pos) = other.last_position(q.item) {
                m.dot += q.weight;
                m.query_pos = m.query_pos.max(q.last_pos);
                m.anchor = m.anchor.max(pos as usize);
            }
        }
        m
    }

    fn similarity(&self, m: &Match, other: &IndexedSession, kind: Similarity) -> f64 {
        match kind {
            Similarity::Vec => m.dot,
            Similarity::Cosine => {
                if self.norm > 0.0 && m.dot > 0.0 {
                    m.dot / (self.norm * (other.distinct.len() as f64).sqrt())
                } else {
                    0.0
                }
            }
        }
    }
}

#[derive(Clone, Copy, Debug, Default)]
struct Match {
    dot: f64,
    query_pos: usize,
    anchor: usize,
}

fn recency_factor(now: Timestamp, start: Timestamp, lambda_days: f64) -> f64 {
    let days = now.abs_diff(start) as f64 / SECONDS_PER_DAY;
    (-days / lambda_days).exp()
}

fn exp_position(pos: usize, len: usize, lambda: f64) -> f64 {
    ((pos as f64 - len as f64) / lambda).exp()
}

/// A fitted neighbor-based model.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct KnnModel {
    pub method: NeighborMethod,
    pub index: KnnIndex,
}

impl KnnModel {
    pub fn fit(train: &SessionLog, method: NeighborMethod) -> Self {
        KnnModel {
            method,
            index: KnnIndex::build(train),
        }
    }

    fn query(&self, session: &[ItemId]) -> Query {
        match &self.method {
            NeighborMethod::Vsknn(c) => Query::new(session, |p, l| c.weighting.position_weight(p, l)),
            NeighborMethod::Stan(c) => Query::new(session, |p, l| exp_position(p, l, c.lambda_spw)),
            NeighborMethod::Vstan(c) => Query::new(session, |p, l| exp_position(p, l, c.lambda_spw)),
        }
    }

    /// Neighbor weight of a stored session for the ongoing one.
    fn neighbor_weight(&self, query: &Query, m: &Match, other: &IndexedSession, now: Timestamp) -> f64 {
        match &self.method {
            NeighborMethod::Vsknn(_) => query.similarity(m, other, Similarity::Cosine),
            NeighborMethod::Stan(c) => {
                query.similarity(m, other, Similarity::Cosine) * recency_factor(now, other.start, c.lambda_snh)
            }
            NeighborMethod::Vstan(c) => {
                query.similarity(m, other, c.similarity) * recency_factor(now, other.start, c.lambda_snh)
            }
        }
    }

    pub fn session_similarity(&self, ctx: &PredictionContext<'_>, other: &Session) -> f64 {
        if ctx.items.is_empty() || other.is_empty() {
            return 0.0;
        }
        let query = self.query(&ctx.items);
        let stored = IndexedSession::from_session(other);
        let m = query.match_session(&stored);
        self.neighbor_weight(&query, &m, &stored, ctx.now)
    }

    /// Top-k neighbors as (recency rank, weight, match), best first.
    fn neighbors(&self, query: &Query, items: &[ItemId], now: Timestamp) -> Vec<(usize, f64, Match)> {
        let (k, sample_size) = self.method.k_and_sample();
        let mut scored: Vec<(usize, f64, Match)> = self
            .index
            .pool(items, sample_size)
            .into_iter()
            .filter_map(|rank| {
                let other = self.index.session(rank);
                let m = query.match_session(other);
                let w = self.neighbor_weight(query, &m, other, now);
                (w > 0.0).then_some((rank, w, m))
            })
            .collect();
        let by_weight = |a: &(usize, f64, Match), b: &(usize, f64, Match)| b.1.total_cmp(&a.1).then(a.0.cmp(&b.0));
        if scored.len() > k {
            scored.select_nth_unstable_by(k - 1, by_weight);
            scored.truncate(k);
        }
        scored.sort_unstable_by(by_weight);
        scored
    }

    pub fn predict(&self, ctx: &PredictionContext<'_>) -> ScoredList {
        if ctx.items.is_empty() {
            return ScoredList::default();
        }
        let query = self.query(&ctx.items);
        let neighbors = self.neighbors(&query, &ctx.items, ctx.now);
        let mut scores: HashMap<ItemId, f64> = HashMap::new();
        for (rank, weight, m) in neighbors {
            let neighbor = self.index.session(rank);
            match &self.method {
                NeighborMethod::Vsknn(c) => {
                    let decay = c.weighting_score.position_weight(m.query_pos, query.len);
                    for &(item, _) in &neighbor.distinct {
                        let idf = match c.idf_weighting {
                            Some(w) => 1.0 + w as f64 * self.index.idf(item),
                            None => 1.0,
                        };
                        *scores.entry(item).or_insert(0.0) += weight * decay * idf;
                    }
                }
                NeighborMethod::Stan(c) => {
                    for &(item, pos) in &neighbor.distinct {
                        let inh = (-(pos as f64 - m.anchor as f64).abs() / c.lambda_inh).exp();
                        *scores.entry(item).or_insert(0.0) += weight * inh;
                    }
                }
                NeighborMethod::Vstan(c) => {
                    for &(item, pos) in &neighbor.distinct {
                        let inh = (-(pos as f64 - m.anchor as f64).abs() / c.lambda_inh).exp();
                        let ipw = exp_position(pos as usize, neighbor.len as usize, c.lambda_ipw);
                        let idf = match c.lambda_idf {
                            Some(l) => 1.0 + l as f64 * self.index.idf_scaled(item),
                            None => 1.0,
                        };
                        *scores.entry(item).or_insert(0.0) += weight * inh * ipw * idf;
                    }
                }
            }
        }
        ScoredList::from_positive(scores)
    }
}
