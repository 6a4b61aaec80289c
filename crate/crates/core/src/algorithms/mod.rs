//! Recommender contract and the non-neural methods.
//!
//! All methods return a [`ScoredList`] ordered by score descending with ties
//! broken by ascending item id. Floating-point accumulation follows a fixed
//! order (current-session items by ascending id, neighbors by rank) so that
//! identical inputs give bit-identical scores.

mod decay;
mod knn;
mod sr;

use std::borrow::Cow;
use std::cmp::Ordering;
use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::preprocess::{Session, SessionLog};
use crate::{Error, ItemId, Result, SessionId, Timestamp};

pub use decay::Decay;
pub use knn::{
    KnnIndex, KnnModel, NeighborMethod, Similarity, StanConfig, VsknnConfig, VstanConfig,
};
pub use sr::{SrConfig, SrModel};

/// Items ranked by score descending, ties by item id ascending.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct ScoredList {
    entries: Vec<(ItemId, f64)>,
}

fn rank_order(a: &(ItemId, f64), b: &(ItemId, f64)) -> Ordering {
    b.1.total_cmp(&a.1).then(a.0.cmp(&b.0))
}

impl ScoredList {
    /// Ranks the given entries, keeping zero scores. Item ids must be unique
    /// and scores finite.
    pub fn new(mut entries: Vec<(ItemId, f64)>) -> Self {
        debug_assert!(entries.iter().all(|e| e.1.is_finite()), "non-finite score");
        entries.sort_unstable_by(rank_order);
        debug_assert!(
            {
                let mut ids: Vec<ItemId> = entries.iter().map(|e| e.0).collect();
                ids.sort_unstable();
                ids.windows(2).all(|w| w[0] != w[1])
            },
            "duplicate item in ScoredList"
        );
        ScoredList { entries }
    }

    /// Ranks the strictly positive entries.
    pub fn from_positive<I: IntoIterator<Item = (ItemId, f64)>>(scores: I) -> Self {
        Self::new(scores.into_iter().filter(|e| e.1 > 0.0).collect())
    }

    pub fn entries(&self) -> &[(ItemId, f64)] {
        &self.entries
    }

    pub fn items(&self) -> impl Iterator<Item = ItemId> + '_ {
        self.entries.iter().map(|e| e.0)
    }

    /// The first `k` entries (fewer if the list is shorter).
    pub fn top(&self, k: usize) -> &[(ItemId, f64)] {
        &self.entries[..k.min(self.entries.len())]
    }

    /// 1-based rank of `item`.
    pub fn rank_of(&self, item: ItemId) -> Option<usize> {
        self.entries.iter().position(|e| e.0 == item).map(|p| p + 1)
    }

    pub fn score_of(&self, item: ItemId) -> Option<f64> {
        self.entries.iter().find(|e| e.0 == item).map(|e| e.1)
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn into_entries(self) -> Vec<(ItemId, f64)> {
        self.entries
    }
}

/// What a recommender sees at prediction time.
#[derive(Clone, Debug)]
pub struct PredictionContext<'a> {
    /// Revealed prefix of the ongoing session.
    pub items: Cow<'a, [ItemId]>,
    pub timestamps: Cow<'a, [Timestamp]>,
    /// The user's earlier sessions, oldest first.
    pub history: &'a [Session],
    /// Start time of the ongoing session.
    pub now: Timestamp,
}

impl<'a> PredictionContext<'a> {
    pub fn new(items: &'a [ItemId], timestamps: &'a [Timestamp], history: &'a [Session], now: Timestamp) -> Self {
        PredictionContext {
            items: Cow::Borrowed(items),
            timestamps: Cow::Borrowed(timestamps),
            history,
            now,
        }
    }

    /// Context for an anonymous session with no history.
    pub fn anonymous(items: &'a [ItemId], timestamps: &'a [Timestamp]) -> Self {
        let now = timestamps.first().copied().unwrap_or(0);
        Self::new(items, timestamps, &[], now)
    }

    /// The revealed prefix of length `len` of `session`.
    pub fn prefix(session: &'a Session, len: usize, history: &'a [Session]) -> Self {
        Self::new(&session.items[..len], &session.timestamps[..len], history, session.start_time())
    }
}

/// A fitted model that ranks items for a prediction context.
pub trait Recommender: Send + Sync {
    fn predict(&self, ctx: &PredictionContext<'_>) -> ScoredList;

    /// Similarity between the ongoing session and `other` as used to weigh
    /// neighbors; `None` for models without a session similarity.
    fn session_similarity(&self, _ctx: &PredictionContext<'_>, _other: &Session) -> Option<f64> {
        None
    }
}

/// Hyperparameters of one base method.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "method", rename_all = "lowercase")]
pub enum AlgorithmConfig {
    Sr(SrConfig),
    Vsknn(VsknnConfig),
    Stan(StanConfig),
    Vstan(VstanConfig),
}

impl AlgorithmConfig {
    pub fn method(&self) -> &'static str {
        match self {
            AlgorithmConfig::Sr(_) => "sr",
            AlgorithmConfig::Vsknn(_) => "vsknn",
            AlgorithmConfig::Stan(_) => "stan",
            AlgorithmConfig::Vstan(_) => "vstan",
        }
    }

    pub fn validate(&self) -> Result<()> {
        match self {
            AlgorithmConfig::Sr(c) => c.validate(),
            AlgorithmConfig::Vsknn(c) => c.validate(),
            AlgorithmConfig::Stan(c) => c.validate(),
            AlgorithmConfig::Vstan(c) => c.validate(),
        }
    }

    pub fn is_neighbor_based(&self) -> bool {
        !matches!(self, AlgorithmConfig::Sr(_))
    }
}

/// A fitted base model. Immutable after [`fit`].
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "model", rename_all = "lowercase")]
pub enum TrainedModel {
    Sr(SrModel),
    Knn(KnnModel),
}

impl TrainedModel {
    pub fn config(&self) -> AlgorithmConfig {
        match self {
            TrainedModel::Sr(m) => AlgorithmConfig::Sr(m.config.clone()),
            TrainedModel::Knn(m) => m.method.to_config(),
        }
    }

    pub fn knn_index(&self) -> Option<&KnnIndex> {
        match self {
            TrainedModel::Knn(m) => Some(&m.index),
            TrainedModel::Sr(_) => None,
        }
    }
}

impl Recommender for TrainedModel {
    fn predict(&self, ctx: &PredictionContext<'_>) -> ScoredList {
        match self {
            TrainedModel::Sr(m) => m.predict(ctx),
            TrainedModel::Knn(m) => m.predict(ctx),
        }
    }

    fn session_similarity(&self, ctx: &PredictionContext<'_>, other: &Session) -> Option<f64> {
        match self {
            TrainedModel::Sr(_) => None,
            TrainedModel::Knn(m) => Some(m.session_similarity(ctx, other)),
        }
    }
}

/// Fits the configured method on the training sessions.
pub fn fit(train: &SessionLog, config: &AlgorithmConfig) -> Result<TrainedModel> {
    config.validate()?;
    if train.is_empty() {
        return Err(Error::EmptyResult("training set has no sessions".into()));
    }
    Ok(match config {
        AlgorithmConfig::Sr(c) => TrainedModel::Sr(SrModel::fit(train, c)),
        AlgorithmConfig::Vsknn(c) => TrainedModel::Knn(KnnModel::fit(train, NeighborMethod::Vsknn(c.clone()))),
        AlgorithmConfig::Stan(c) => TrainedModel::Knn(KnnModel::fit(train, NeighborMethod::Stan(c.clone()))),
        AlgorithmConfig::Vstan(c) => TrainedModel::Knn(KnnModel::fit(train, NeighborMethod::Vstan(c.clone()))),
    })
}

/// Candidate neighbor sessions of the ongoing session, most recent first.
/// Empty for models without a neighbor index.
pub fn neighbor_pool(model: &TrainedModel, ctx: &PredictionContext<'_>, sample_size: usize) -> Vec<SessionId> {
    match model.knn_index() {
        Some(index) => index
            .pool(&ctx.items, sample_size)
            .into_iter()
            .map(|s| index.session(s).id)
            .collect(),
        None => Vec::new(),
    }
}

pub const MODEL_FORMAT_VERSION: u32 = 1;

#[derive(Serialize, Deserialize)]
struct ModelFile<'a> {
    format_version: u32,
    model: Cow<'a, TrainedModel>,
}

pub fn save_model(model: &TrainedModel, path: impl AsRef<Path>) -> Result<()> {
    let file = ModelFile {
        format_version: MODEL_FORMAT_VERSION,
        model: Cow::Borrowed(model),
    };
    fs::write(path, serde_json::to_vec(&file)?)?;
    Ok(())
}

pub fn load_model(path: impl AsRef<Path>) -> Result<TrainedModel> {
    let path = path.as_ref();
    if !path.is_file() {
        return Err(Error::MissingFile(path.to_path_buf()));
    }
    let file: ModelFile = serde_json::from_slice(&fs::read(path)?)?;
    if file.format_version != MODEL_FORMAT_VERSION {
        return Err(Error::ModelVersion {
            found: file.format_version,
            expected: MODEL_FORMAT_VERSION,
        });
    }
    Ok(file.model.into_owned())
}
