//! Naive full-scan reference implementations and random instances shared by
//! the integration and acceptance tests.
//!
//! The reference models scan every training session for every query and
//! keep no index. Floating-point terms are added in the same canonical order
//! as the library (query items by id, neighbors best first, neighbor items by
//! id) so results can be compared for exact equality.

#![allow(dead_code)]

use std::collections::{BTreeMap, BTreeSet, HashMap, HashSet};

use rand::seq::SliceRandom;
use rand::Rng;
use sessbench_core::algorithms::{Decay, Similarity};
use sessbench_core::preprocess::{Session, SessionLog};
use sessbench_core::{ItemId, Timestamp};

pub const DAY: f64 = 86_400.0;

/// A random training log plus one query session with history.
#[derive(Clone, Debug)]
pub struct Instance {
    pub train: SessionLog,
    pub query: Vec<ItemId>,
    pub query_times: Vec<Timestamp>,
    pub history: Vec<Session>,
    pub now: Timestamp,
}

pub fn random_session<R: Rng>(rng: &mut R, id: u32, user: u32, start: Timestamp, items: u32, max_len: usize) -> Session {
    let len = rng.gen_range(1..=max_len);
    let seq: Vec<ItemId> = (0..len).map(|_| rng.gen_range(0..items)).collect();
    let times = (0..len as u64).map(|d| start + 60 * d).collect();
    Session::new(id, user, seq, times)
}

/// Up to 50 sessions over up to 20 items, spread over about 30 days.
pub fn random_instance<R: Rng>(rng: &mut R) -> Instance {
    let items = rng.gen_range(2..=20);
    let n = rng.gen_range(1..=50);
    let users = rng.gen_range(1..=8);
    let horizon = 30 * 86_400u64;
    let sessions: Vec<Session> = (0..n)
        .map(|id| {
            // coarse start times so that ties in recency occur
            let start = rng.gen_range(0..60u64) * (horizon / 60);
            let user = rng.gen_range(0..users);
            random_session(rng, id, user, start, items, 8)
        })
        .collect();
    let train = SessionLog::new(sessions);
    let now = horizon + rng.gen_range(0..86_400u64);
    let q_len = rng.gen_range(1..=6);
    let query: Vec<ItemId> = (0..q_len).map(|_| rng.gen_range(0..items + 2)).collect();
    let query_times = (0..q_len as u64).map(|d| now + 30 * d).collect();
    let user = rng.gen_range(0..users);
    let history = train.user_sessions(user).to_vec();
    Instance {
        train,
        query,
        query_times,
        history,
        now,
    }
}

/// Items with score > 0, sorted by score desc then item asc.
pub fn rank(scores: BTreeMap<ItemId, f64>) -> Vec<(ItemId, f64)> {
    let mut v: Vec<(ItemId, f64)> = scores.into_iter().filter(|e| e.1 > 0.0).collect();
    v.sort_by(|a, b| b.1.total_cmp(&a.1).then(a.0.cmp(&b.0)));
    v
}

pub fn naive_sr(train: &SessionLog, steps: usize, weighting: Decay, query: &[ItemId]) -> Vec<(ItemId, f64)> {
    let Some(&last) = query.last() else { return Vec::new() };
    let mut scores: BTreeMap<ItemId, f64> = BTreeMap::new();
    for s in train.sessions() {
        for j in 0..s.items.len() {
            for i in 0..j {
                let d = j - i;
                if d <= steps && s.items[i] == last {
                    *scores.entry(s.items[j]).or_insert(0.0) += weighting.distance_weight(d);
                }
            }
        }
    }
    rank(scores)
}

#[derive(Clone, Copy, Debug)]
pub enum NaiveKnn {
    Vsknn {
        k: usize,
        sample_size: usize,
        weighting: Decay,
        weighting_score: Decay,
        idf_weighting: Option<u32>,
    },
    Stan {
        k: usize,
        sample_size: usize,
        spw: f64,
        snh: f64,
        inh: f64,
    },
    Vstan {
        k: usize,
        sample_size: usize,
        similarity: Similarity,
        spw: f64,
        snh: f64,
        inh: f64,
        ipw: f64,
        idf: Option<u32>,
    },
}

fn last_positions(items: &[ItemId]) -> BTreeMap<ItemId, usize> {
    let mut m = BTreeMap::new();
    for (i, &it) in items.iter().enumerate() {
        m.insert(it, i + 1);
    }
    m
}

fn recency(now: Timestamp, start: Timestamp, lambda: f64) -> f64 {
    let days = (now as f64 - start as f64).abs() / DAY;
    (-days / lambda).exp()
}

pub fn naive_knn(train: &SessionLog, method: NaiveKnn, query: &[ItemId], now: Timestamp) -> Vec<(ItemId, f64)> {
    if query.is_empty() {
        return Vec::new();
    }
    let (k, sample_size) = match method {
        NaiveKnn::Vsknn { k, sample_size, .. } | NaiveKnn::Stan { k, sample_size, .. } | NaiveKnn::Vstan { k, sample_size, .. } => {
            (k, sample_size)
        }
    };
    // sessions from most to least recent
    let mut by_recency: Vec<&Session> = train.sessions().iter().collect();
    by_recency.sort_by(|a, b| b.start_time().cmp(&a.start_time()).then(b.id.cmp(&a.id)));

    let n_sessions = by_recency.len() as f64;
    let df = |item: ItemId| by_recency.iter().filter(|s| s.contains(item)).count();
    let idf = |item: ItemId| {
        let d = df(item);
        if d == 0 {
            0.0
        } else {
            (n_sessions / d as f64).ln()
        }
    };
    let vocab: BTreeSet<ItemId> = train.items();
    let idf_lo = vocab.iter().map(|&i| idf(i)).fold(f64::INFINITY, f64::min);
    let idf_hi = vocab.iter().map(|&i| idf(i)).fold(f64::NEG_INFINITY, f64::max);

    let q_last = last_positions(query);
    let len = query.len();
    let q_weight = |p: usize| match method {
        NaiveKnn::Vsknn { weighting, .. } => weighting.position_weight(p, len),
        NaiveKnn::Stan { spw, .. } | NaiveKnn::Vstan { spw, .. } => ((p as f64 - len as f64) / spw).exp(),
    };
    let norm = q_last.values().map(|&p| q_weight(p) * q_weight(p)).sum::<f64>().sqrt();

    let q_set: HashSet<ItemId> = query.iter().copied().collect();
    let pool: Vec<(usize, &Session)> = by_recency
        .iter()
        .enumerate()
        .filter(|(_, s)| s.items.iter().any(|i| q_set.contains(i)))
        .take(sample_size)
        .map(|(r, s)| (r, *s))
        .collect();

    struct Neighbor<'a> {
        rank: usize,
        weight: f64,
        query_pos: usize,
        anchor: usize,
        session: &'a Session,
    }
    let mut neighbors: Vec<Neighbor> = Vec::new();
    for (rank, s) in pool {
        let s_last = last_positions(&s.items);
        let mut dot = 0.0;
        let mut query_pos = 0;
        let mut anchor = 0;
        for (&item, &p) in &q_last {
            if let Some(&sp) = s_last.get(&item) {
                dot += q_weight(p);
                query_pos = query_pos.max(p);
                anchor = anchor.max(sp);
            }
        }
        let cosine = if norm > 0.0 && dot > 0.0 { dot / (norm * (s_last.len() as f64).sqrt()) } else { 0.0 };
        let weight = match method {
            NaiveKnn::Vsknn { .. } => cosine,
            NaiveKnn::Stan { snh, .. } => cosine * recency(now, s.start_time(), snh),
            NaiveKnn::Vstan { similarity, snh, .. } => {
                let sim = match similarity {
                    Similarity::Cosine => cosine,
                    Similarity::Vec => dot,
                };
                sim * recency(now, s.start_time(), snh)
            }
        };
        if weight > 0.0 {
            neighbors.push(Neighbor {
                rank,
                weight,
                query_pos,
                anchor,
                session: s,
            });
        }
    }
    neighbors.sort_by(|a, b| b.weight.total_cmp(&a.weight).then(a.rank.cmp(&b.rank)));
    neighbors.truncate(k);

    let mut scores: BTreeMap<ItemId, f64> = BTreeMap::new();
    for nb in &neighbors {
        let n_last = last_positions(&nb.session.items);
        for (&item, &pos) in &n_last {
            let add = match method {
                NaiveKnn::Vsknn {
                    weighting_score,
                    idf_weighting,
                    ..
                } => {
                    let factor = idf_weighting.map_or(1.0, |w| 1.0 + w as f64 * idf(item));
                    nb.weight * weighting_score.position_weight(nb.query_pos, len) * factor
                }
                NaiveKnn::Stan { inh, .. } => {
                    nb.weight * (-(pos as f64 - nb.anchor as f64).abs() / inh).exp()
                }
                NaiveKnn::Vstan { inh, ipw, idf: strength, .. } => {
                    let inh = (-(pos as f64 - nb.anchor as f64).abs() / inh).exp();
                    let ipw = ((pos as f64 - nb.session.len() as f64) / ipw).exp();
                    let bonus = strength.map_or(1.0, |l| {
                        let scaled = if idf_hi > idf_lo { (idf(item) - idf_lo) / (idf_hi - idf_lo) } else { 0.0 };
                        1.0 + l as f64 * scaled
                    });
                    nb.weight * inh * ipw * bonus
                }
            };
            *scores.entry(item).or_insert(0.0) += add;
        }
    }
    rank(scores)
}

pub fn random_decay<R: Rng>(rng: &mut R) -> Decay {
    *Decay::ALL.choose(rng).unwrap()
}

pub fn random_lambda<R: Rng>(rng: &mut R) -> f64 {
    *[0.00001, 0.4525, 0.905, 1.81, 3.62, 7.24].choose(rng).unwrap()
}

// ---- metrics -------------------------------------------------------------

/// Independent per-event metric values at cutoff `k`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct NaiveEvent {
    pub hr: f64,
    pub mrr: f64,
    pub precision: f64,
    pub recall: f64,
    pub ap: f64,
}

pub fn naive_event(ranked: &[ItemId], next: ItemId, remaining: &[ItemId], k: usize) -> NaiveEvent {
    let top: Vec<ItemId> = ranked.iter().take(k).copied().collect();
    let mut rank = None;
    for (i, &it) in top.iter().enumerate() {
        if it == next {
            rank = Some(i + 1);
            break;
        }
    }
    let rem: BTreeSet<ItemId> = remaining.iter().copied().collect();
    let rel = |i: usize| rem.contains(&top[i]);
    let hits = (0..top.len()).filter(|&i| rel(i)).count();
    let mut ap = 0.0;
    for i in 0..top.len() {
        if rel(i) {
            let p_at_i = (0..=i).filter(|&j| rel(j)).count() as f64 / (i + 1) as f64;
            ap += p_at_i;
        }
    }
    NaiveEvent {
        hr: if rank.is_some() { 1.0 } else { 0.0 },
        mrr: rank.map_or(0.0, |r| 1.0 / r as f64),
        precision: hits as f64 / k as f64,
        recall: hits as f64 / rem.len() as f64,
        ap: ap / rem.len().min(k) as f64,
    }
}

pub fn naive_coverage(lists: &[Vec<ItemId>], catalog: &BTreeSet<ItemId>, k: usize) -> f64 {
    let mut seen = BTreeSet::new();
    for l in lists {
        for it in l.iter().take(k) {
            if catalog.contains(it) {
                seen.insert(*it);
            }
        }
    }
    seen.len() as f64 / catalog.len() as f64
}

pub fn naive_popularity(lists: &[Vec<ItemId>], counts: &HashMap<ItemId, usize>, k: usize) -> f64 {
    let lo = *counts.values().min().unwrap();
    let hi = *counts.values().max().unwrap();
    let mut total = 0.0;
    let mut slots = 0;
    for l in lists {
        for it in l.iter().take(k) {
            let c = counts.get(it).copied();
            total += match c {
                Some(c) if hi > lo => (c - lo) as f64 / (hi - lo) as f64,
                _ => 0.0,
            };
            slots += 1;
        }
    }
    if slots == 0 {
        0.0
    } else {
        total / slots as f64
    }
}
