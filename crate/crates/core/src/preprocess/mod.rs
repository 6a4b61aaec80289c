//! Sessionization, temporal slicing, filtering and per-user splitting.

mod persist;

use std::collections::{BTreeMap, BTreeSet, HashMap};
use std::ops::Range;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::eventlog::{Event, EventLog};
use crate::{Error, ItemId, Result, SessionId, Timestamp, UserId};

pub use persist::{
    load_manifest, read_split, save_manifest, write_id_maps, write_split, Manifest, SliceManifest,
    MANIFEST_FILE, MANIFEST_VERSION,
};

pub const SECONDS_PER_DAY: f64 = 86_400.0;

/// One user's contiguous run of interactions.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Session {
    pub id: SessionId,
    pub user: UserId,
    pub items: Vec<ItemId>,
    pub timestamps: Vec<Timestamp>,
}

impl Session {
    pub fn new(id: SessionId, user: UserId, items: Vec<ItemId>, timestamps: Vec<Timestamp>) -> Self {
        debug_assert_eq!(items.len(), timestamps.len());
        Session {
            id,
            user,
            items,
            timestamps,
        }
    }

    pub fn start_time(&self) -> Timestamp {
        self.timestamps[0]
    }

    pub fn len(&self) -> usize {
        self.items.len()
    }

    pub fn is_empty(&self) -> bool {
        self.items.is_empty()
    }

    pub fn contains(&self, item: ItemId) -> bool {
        self.items.contains(&item)
    }

    fn retain_items(&mut self, mut keep: impl FnMut(ItemId) -> bool) {
        let (items, timestamps) = self
            .items
            .iter()
            .zip(&self.timestamps)
            .filter(|(i, _)| keep(**i))
            .map(|(i, t)| (*i, *t))
            .unzip();
        self.items = items;
        self.timestamps = timestamps;
    }
}

/// Sessions ordered by (user, start time, id), with a per-user index.
#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct SessionLog {
    sessions: Vec<Session>,
    by_user: BTreeMap<UserId, Range<usize>>,
}

impl SessionLog {
    pub fn new(mut sessions: Vec<Session>) -> Self {
        sessions.sort_by_key(|s| (s.user, s.start_time(), s.id));
        let mut by_user = BTreeMap::new();
        let mut start = 0;
        for i in 1..=sessions.len() {
            if i == sessions.len() || sessions[i].user != sessions[start].user {
                by_user.insert(sessions[start].user, start..i);
                start = i;
            }
        }
        SessionLog { sessions, by_user }
    }

    pub fn sessions(&self) -> &[Session] {
        &self.sessions
    }

    pub fn into_sessions(self) -> Vec<Session> {
        self.sessions
    }

    /// The user's sessions in start-time order; empty for unknown users.
    pub fn user_sessions(&self, user: UserId) -> &[Session] {
        match self.by_user.get(&user) {
            Some(range) => &self.sessions[range.clone()],
            None => &[],
        }
    }

    pub fn users(&self) -> impl Iterator<Item = UserId> + '_ {
        self.by_user.keys().copied()
    }

    pub fn num_users(&self) -> usize {
        self.by_user.len()
    }

    pub fn len(&self) -> usize {
        self.sessions.len()
    }

    pub fn is_empty(&self) -> bool {
        self.sessions.is_empty()
    }

    pub fn num_events(&self) -> usize {
        self.sessions.iter().map(Session::len).sum()
    }

    pub fn items(&self) -> BTreeSet<ItemId> {
        self.sessions.iter().flat_map(|s| s.items.iter().copied()).collect()
    }

    /// Event counts per item.
    pub fn item_counts(&self) -> HashMap<ItemId, usize> {
        let mut counts = HashMap::new();
        for &item in self.sessions.iter().flat_map(|s| &s.items) {
            *counts.entry(item).or_insert(0) += 1;
        }
        counts
    }

    pub fn stats(&self) -> SliceStats {
        let events = self.num_events();
        let sessions = self.len();
        let users = self.num_users();
        SliceStats {
            events,
            users,
            sessions,
            items: self.items().len(),
            sessions_per_user: if users == 0 { 0.0 } else { sessions as f64 / users as f64 },
            actions_per_session: if sessions == 0 { 0.0 } else { events as f64 / sessions as f64 },
        }
    }
}

/// Dataset characteristics of one slice.
#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct SliceStats {
    pub events: usize,
    pub users: usize,
    pub sessions: usize,
    pub items: usize,
    pub sessions_per_user: f64,
    pub actions_per_session: f64,
}

/// One slice partitioned into train / validation / test per user.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct SliceSplit {
    pub slice_index: usize,
    pub train: SessionLog,
    pub validation: SessionLog,
    pub test: SessionLog,
    pub item_vocabulary: BTreeSet<ItemId>,
}

/// Seeded random subsample of users taken before sessionization.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct UserSample {
    pub fraction: f64,
    pub seed: u64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PreprocessConfig {
    /// Inactivity gap in seconds that separates two sessions.
    pub inactivity_gap: u64,
    pub min_item_support: usize,
    pub min_session_length: usize,
    /// Longer sessions are truncated to their first events.
    pub max_session_length: Option<usize>,
    pub min_user_sessions: usize,
    pub num_slices: usize,
    /// Sessions starting within this many days of the first event are dropped.
    pub skip_head_days: Option<f64>,
    pub user_sample: Option<UserSample>,
}

impl Default for PreprocessConfig {
    fn default() -> Self {
        PreprocessConfig {
            inactivity_gap: 1800,
            min_item_support: 5,
            min_session_length: 2,
            max_session_length: None,
            min_user_sessions: 3,
            num_slices: 5,
            skip_head_days: None,
            user_sample: None,
        }
    }
}

impl PreprocessConfig {
    pub fn validate(&self) -> Result<()> {
        let check = |ok: bool, msg: &str| {
            if ok {
                Ok(())
            } else {
                Err(Error::InvalidConfig(msg.to_string()))
            }
        };
        check(self.inactivity_gap > 0, "inactivity_gap must be > 0")?;
        check(self.min_item_support >= 1, "min_item_support must be >= 1")?;
        check(self.min_session_length >= 1, "min_session_length must be >= 1")?;
        check(self.max_session_length.is_none_or(|m| m >= 1), "max_session_length must be >= 1")?;
        check(self.min_user_sessions >= 1, "min_user_sessions must be >= 1")?;
        check(self.num_slices >= 1, "num_slices must be >= 1")?;
        check(
            self.skip_head_days.is_none_or(|d| d.is_finite() && d >= 0.0),
            "skip_head_days must be a non-negative number",
        )?;
        check(
            self.user_sample.is_none_or(|s| s.fraction > 0.0 && s.fraction <= 1.0),
            "user_sample.fraction must be in (0, 1]",
        )
    }

    /// LASTFM settings: sessions truncated to 20 events, first 500 days skipped.
    pub fn lastfm() -> Self {
        PreprocessConfig {
            max_session_length: Some(20),
            skip_head_days: Some(500.0),
            ..Default::default()
        }
    }
}

/// Splits each user's events into sessions wherever the gap to the previous
/// event exceeds `gap` seconds.
pub fn sessionize(log: &EventLog, gap: u64) -> Result<SessionLog> {
    sessionize_events(log.events(), gap)
}

pub(crate) fn sessionize_events(events: &[Event], gap: u64) -> Result<SessionLog> {
    if gap == 0 {
        return Err(Error::InvalidConfig("inactivity gap must be > 0".into()));
    }
    let mut sessions = Vec::new();
    let mut current: Option<Session> = None;
    for e in events {
        let continues = match &current {
            Some(s) => s.user == e.user && e.timestamp - s.timestamps.last().unwrap() <= gap,
            None => false,
        };
        if continues {
            let s = current.as_mut().unwrap();
            s.items.push(e.item);
            s.timestamps.push(e.timestamp);
        } else {
            if let Some(s) = current.take() {
                sessions.push(s);
            }
            current = Some(Session::new(sessions.len() as SessionId, e.user, vec![e.item], vec![e.timestamp]));
        }
    }
    sessions.extend(current);
    Ok(SessionLog::new(sessions))
}

/// Keeps a seeded random `fraction` of the users (at least one).
pub fn subsample_users(log: &EventLog, sample: UserSample) -> EventLog {
    let mut users: Vec<UserId> = (0..log.users().len() as UserId).collect();
    let keep = ((users.len() as f64 * sample.fraction).ceil() as usize).clamp(1, users.len().max(1));
    let mut rng = ChaCha8Rng::seed_from_u64(sample.seed);
    users.shuffle(&mut rng);
    let mut kept = vec![false; users.len()];
    for &u in &users[..keep.min(users.len())] {
        kept[u as usize] = true;
    }
    log.retain(|e| kept[e.user as usize])
}

/// Drops sessions that start less than `days` after the earliest session.
pub fn skip_head(log: &SessionLog, days: f64) -> SessionLog {
    let Some(first) = log.sessions().iter().map(Session::start_time).min() else {
        return log.clone();
    };
    let cutoff = first as f64 + days * SECONDS_PER_DAY;
    SessionLog::new(
        log.sessions()
            .iter()
            .filter(|s| s.start_time() as f64 >= cutoff)
            .cloned()
            .collect(),
    )
}

/// One equal-duration window of the session log.
#[derive(Clone, Debug, PartialEq)]
pub struct TimeSlice {
    pub index: usize,
    pub window_start: f64,
    pub window_end: f64,
    pub sessions: SessionLog,
}

/// Cuts `[first start, last start]` into `n` equal windows and assigns each
/// session by its start time. The last window is closed on the right.
pub fn slice_by_time(log: &SessionLog, n: usize) -> Result<Vec<TimeSlice>> {
    if n == 0 {
        return Err(Error::InvalidConfig("number of slices must be >= 1".into()));
    }
    if log.is_empty() {
        return Err(Error::EmptyResult("cannot slice an empty session log".into()));
    }
    let mut starts: Vec<Timestamp> = log.sessions().iter().map(Session::start_time).collect();
    starts.sort_unstable();
    starts.dedup();
    if n > starts.len() {
        return Err(Error::InvalidInput(format!(
            "{n} slices requested but only {} distinct session start times",
            starts.len()
        )));
    }
    let min = starts[0];
    let span = starts[starts.len() - 1] - min;
    let mut buckets: Vec<Vec<Session>> = vec![Vec::new(); n];
    for s in log.sessions() {
        buckets[slice_of(s.start_time() - min, span, n)].push(s.clone());
    }
    let width = span as f64 / n as f64;
    Ok(buckets
        .into_iter()
        .enumerate()
        .map(|(index, sessions)| TimeSlice {
            index,
            window_start: min as f64 + width * index as f64,
            window_end: if index + 1 == n { (min + span) as f64 } else { min as f64 + width * (index + 1) as f64 },
            sessions: SessionLog::new(sessions),
        })
        .collect())
}

fn slice_of(offset: u64, span: u64, n: usize) -> usize {
    if span == 0 {
        return 0;
    }
    // floor(offset / (span / n)) in exact integer arithmetic
    let idx = (offset as u128 * n as u128 / span as u128) as usize;
    idx.min(n - 1)
}

/// Applies truncation, item support, session length and user activity filters,
/// once each and in that order.
pub fn filter_slice(slice: &SessionLog, cfg: &PreprocessConfig) -> SessionLog {
    let mut sessions: Vec<Session> = slice.sessions().to_vec();

    if let Some(max_len) = cfg.max_session_length {
        for s in &mut sessions {
            s.items.truncate(max_len);
            s.timestamps.truncate(max_len);
        }
    }

    let mut support: HashMap<ItemId, usize> = HashMap::new();
    for &item in sessions.iter().flat_map(|s| &s.items) {
        *support.entry(item).or_insert(0) += 1;
    }
    for s in &mut sessions {
        s.retain_items(|i| support[&i] >= cfg.min_item_support);
    }

    sessions.retain(|s| s.len() >= cfg.min_session_length && !s.is_empty());

    let mut per_user: HashMap<UserId, usize> = HashMap::new();
    for s in &sessions {
        *per_user.entry(s.user).or_insert(0) += 1;
    }
    sessions.retain(|s| per_user[&s.user] >= cfg.min_user_sessions);

    SessionLog::new(sessions)
}

/// Last session per user to test, second-to-last to validation, rest to
/// train; then removes items unseen in train from validation and test.
pub fn split_user_wise(slice: &SessionLog, slice_index: usize) -> Result<SliceSplit> {
    let mut train = Vec::new();
    let mut validation = Vec::new();
    let mut test = Vec::new();
    for user in slice.users() {
        let sessions = slice.user_sessions(user);
        if sessions.len() < 3 {
            return Err(Error::InvalidInput(format!(
                "user {user} has {} sessions; at least 3 are required for a user-wise split",
                sessions.len()
            )));
        }
        let n = sessions.len();
        train.extend_from_slice(&sessions[..n - 2]);
        validation.push(sessions[n - 2].clone());
        test.push(sessions[n - 1].clone());
    }
    let vocabulary: BTreeSet<ItemId> = train.iter().flat_map(|s| s.items.iter().copied()).collect();
    let close = |sessions: Vec<Session>| {
        sessions
            .into_iter()
            .filter_map(|mut s| {
                s.retain_items(|i| vocabulary.contains(&i));
                (s.len() >= 2).then_some(s)
            })
            .collect::<Vec<_>>()
    };
    let validation = close(validation);
    let test = close(test);
    Ok(SliceSplit {
        slice_index,
        train: SessionLog::new(train),
        validation: SessionLog::new(validation),
        test: SessionLog::new(test),
        item_vocabulary: vocabulary,
    })
}

/// Output of the full preprocessing pipeline.
#[derive(Clone, Debug)]
pub struct Preprocessed {
    pub splits: Vec<SliceSplit>,
    pub slices: Vec<SliceManifest>,
}

/// Runs subsampling, sessionization, head skipping, slicing, filtering and
/// splitting. Slices are processed in parallel; results are index-ordered.
pub fn preprocess(log: &EventLog, cfg: &PreprocessConfig) -> Result<Preprocessed> {
    cfg.validate()?;
    let sampled;
    let log = match cfg.user_sample {
        Some(sample) => {
            sampled = subsample_users(log, sample);
            &sampled
        }
        None => log,
    };
    let mut sessions = sessionize(log, cfg.inactivity_gap)?;
    if let Some(days) = cfg.skip_head_days {
        sessions = skip_head(&sessions, days);
    }
    let slices = slice_by_time(&sessions, cfg.num_slices)?;
    let results: Vec<Result<(SliceSplit, SliceManifest)>> = slices
        .par_iter()
        .map(|slice| {
            let filtered = filter_slice(&slice.sessions, cfg);
            let split = split_user_wise(&filtered, slice.index)?;
            let manifest = SliceManifest {
                index: slice.index,
                window_start: slice.window_start,
                window_end: slice.window_end,
                raw_sessions: slice.sessions.len(),
                stats: filtered.stats(),
                train_sessions: split.train.len(),
                validation_sessions: split.validation.len(),
                test_sessions: split.test.len(),
                train_events: split.train.num_events(),
                vocabulary_size: split.item_vocabulary.len(),
            };
            Ok((split, manifest))
        })
        .collect();
    let mut splits = Vec::with_capacity(results.len());
    let mut manifests = Vec::with_capacity(results.len());
    for r in results {
        let (s, m) = r?;
        splits.push(s);
        manifests.push(m);
    }
    Ok(Preprocessed {
        splits,
        slices: manifests,
    })
}

/// Index of the slice with the most events after filtering; ties go to the
/// earliest slice.
pub fn largest_slice(slices: &[SliceManifest]) -> Option<usize> {
    slices
        .iter()
        .enumerate()
        .max_by(|(ia, a), (ib, b)| a.stats.events.cmp(&b.stats.events).then(ib.cmp(ia)))
        .map(|(_, m)| m.index)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn log_of(rows: &[(i64, i64, u64)]) -> EventLog {
        EventLog::from_raw(rows, "test")
    }

    fn sess(id: SessionId, user: UserId, items: &[ItemId], start: Timestamp) -> Session {
        let timestamps = (0..items.len() as u64).map(|k| start + k * 10).collect();
        Session::new(id, user, items.to_vec(), timestamps)
    }

    fn lengths(log: &SessionLog) -> Vec<Vec<u64>> {
        log.sessions().iter().map(|s| s.timestamps.clone()).collect()
    }

    #[test]
    fn sessionize_splits_on_gap() {
        let log = log_of(&[(1, 1, 0), (1, 2, 100), (1, 3, 2000)]);
        let s = sessionize(&log, 1800).unwrap();
        assert_eq!(lengths(&s), vec![vec![0, 100], vec![2000]]);
    }

    #[test]
    fn sessionize_single_event() {
        let s = sessionize(&log_of(&[(1, 1, 7)]), 1800).unwrap();
        assert_eq!(s.len(), 1);
        assert_eq!(s.sessions()[0].len(), 1);
    }

    #[test]
    fn sessionize_gap_equal_to_threshold_continues() {
        let s = sessionize(&log_of(&[(1, 1, 0), (1, 2, 1800)]), 1800).unwrap();
        assert_eq!(lengths(&s), vec![vec![0, 1800]]);
    }

    #[test]
    fn sessionize_rejects_zero_gap() {
        assert!(sessionize(&log_of(&[(1, 1, 0)]), 0).is_err());
    }

    #[test]
    fn sessionize_keeps_repeats_and_separates_users() {
        let s = sessionize(&log_of(&[(1, 5, 0), (1, 5, 10), (2, 5, 5)]), 1800).unwrap();
        assert_eq!(s.len(), 2);
        assert_eq!(s.user_sessions(0)[0].items, vec![0, 0]);
        assert_eq!(s.user_sessions(1).len(), 1);
    }

    #[test]
    fn slice_windows() {
        let day = SECONDS_PER_DAY as u64;
        let sessions: Vec<Session> = [0u64, 10, 20, 30, 40, 50, 60, 70, 80, 99]
            .iter()
            .enumerate()
            .map(|(i, d)| sess(i as u32, i as u32, &[1, 2], d * day))
            .collect();
        let slices = slice_by_time(&SessionLog::new(sessions), 5).unwrap();
        assert_eq!(slices.len(), 5);
        let width_days = (slices[0].window_end - slices[0].window_start) / SECONDS_PER_DAY;
        assert!((width_days - 19.8).abs() < 1e-9);
        let first: Vec<u64> = slices[0].sessions.sessions().iter().map(|s| s.start_time() / day).collect();
        assert_eq!(first, vec![0, 10]);
        // the last window is right-closed
        assert!(slices[4].sessions.sessions().iter().any(|s| s.start_time() == 99 * day));
    }

    #[test]
    fn single_slice_is_identity() {
        let log = SessionLog::new(vec![sess(0, 0, &[1], 5), sess(1, 0, &[2], 50)]);
        let slices = slice_by_time(&log, 1).unwrap();
        assert_eq!(slices[0].sessions, log);
    }

    #[test]
    fn too_many_slices() {
        let log = SessionLog::new(vec![sess(0, 0, &[1], 5), sess(1, 1, &[2], 5)]);
        assert!(slice_by_time(&log, 2).is_err());
    }

    #[test]
    fn skip_head_drops_early_sessions() {
        let day = SECONDS_PER_DAY as u64;
        let log = SessionLog::new(vec![sess(0, 0, &[1], 0), sess(1, 0, &[1], 499 * day), sess(2, 0, &[1], 500 * day)]);
        let kept = skip_head(&log, 500.0);
        assert_eq!(kept.len(), 1);
        assert_eq!(kept.sessions()[0].id, 2);
    }

    fn cfg(support: usize) -> PreprocessConfig {
        PreprocessConfig {
            min_item_support: support,
            ..Default::default()
        }
    }

    #[test]
    fn filter_removes_rare_items() {
        // item 9 occurs 4 times, others 5+
        let mut sessions = Vec::new();
        for k in 0..4 {
            sessions.push(sess(k, 0, &[1, 2, 9], k as u64 * 10_000));
        }
        sessions.push(sess(4, 0, &[1, 2], 50_000));
        let out = filter_slice(&SessionLog::new(sessions), &cfg(5));
        assert!(out.sessions().iter().all(|s| !s.contains(9)));
        assert_eq!(out.len(), 5);
    }

    #[test]
    fn filter_drops_sessions_shortened_below_min_length() {
        // [A, X] loses X and becomes too short
        let mut sessions = vec![sess(0, 0, &[1, 9], 0)];
        for k in 1..5 {
            sessions.push(sess(k, 0, &[1, 1], k as u64 * 10_000));
        }
        let out = filter_slice(&SessionLog::new(sessions), &cfg(5));
        assert!(out.sessions().iter().all(|s| s.id != 0));
        assert_eq!(out.len(), 4);
    }

    #[test]
    fn filter_drops_inactive_users() {
        let sessions = vec![sess(0, 0, &[1, 1], 0), sess(1, 0, &[1, 1], 10_000), sess(2, 1, &[1, 1], 0)];
        let out = filter_slice(&SessionLog::new(sessions), &cfg(1));
        assert!(out.is_empty());
    }

    #[test]
    fn filter_truncates_first() {
        let cfg = PreprocessConfig {
            min_item_support: 1,
            max_session_length: Some(2),
            min_user_sessions: 1,
            ..Default::default()
        };
        let out = filter_slice(&SessionLog::new(vec![sess(0, 0, &[1, 2, 3, 4], 0)]), &cfg);
        assert_eq!(out.sessions()[0].items, vec![1, 2]);
    }

    #[test]
    fn split_four_sessions() {
        let sessions = (0..4).map(|k| sess(k, 0, &[1, 2], k as u64 * 10_000)).collect();
        let split = split_user_wise(&SessionLog::new(sessions), 0).unwrap();
        let ids = |l: &SessionLog| l.sessions().iter().map(|s| s.id).collect::<Vec<_>>();
        assert_eq!(ids(&split.train), vec![0, 1]);
        assert_eq!(ids(&split.validation), vec![2]);
        assert_eq!(ids(&split.test), vec![3]);
    }

    #[test]
    fn split_three_sessions() {
        let sessions = (0..3).map(|k| sess(k, 0, &[1, 2], k as u64 * 10_000)).collect();
        let split = split_user_wise(&SessionLog::new(sessions), 0).unwrap();
        assert_eq!(split.train.len(), 1);
        assert_eq!(split.validation.len(), 1);
        assert_eq!(split.test.len(), 1);
    }

    #[test]
    fn split_drops_test_session_with_unseen_item() {
        let sessions = vec![
            sess(0, 0, &[1, 2], 0),
            sess(1, 0, &[1, 2], 10_000),
            sess(2, 0, &[1, 7], 20_000),
        ];
        let split = split_user_wise(&SessionLog::new(sessions), 0).unwrap();
        assert_eq!(split.validation.len(), 1);
        assert!(split.test.is_empty());
    }

    #[test]
    fn split_rejects_short_histories() {
        let sessions = vec![sess(0, 0, &[1, 2], 0), sess(1, 0, &[1, 2], 10_000)];
        assert!(split_user_wise(&SessionLog::new(sessions), 0).is_err());
    }

    #[test]
    fn largest_slice_prefers_earliest_on_tie() {
        let m = |index, events| SliceManifest {
            index,
            stats: SliceStats {
                events,
                ..Default::default()
            },
            ..Default::default()
        };
        assert_eq!(largest_slice(&[m(0, 5), m(1, 9), m(2, 9)]), Some(1));
        assert_eq!(largest_slice(&[]), None);
    }
}
