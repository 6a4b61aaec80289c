//! Benchmarking toolkit for session-aware next-item recommendation.
//!
//! The pipeline runs in five stages, each in its own module:
//!
//! * [`eventlog`] loads implicit-feedback logs and orders them canonically.
//! * [`preprocess`] sessionizes the log, cuts it into temporal slices, filters
//!   each slice and splits it per user into train / validation / test.
//! * [`algorithms`] holds the sequential-rules recommender and the
//!   nearest-neighbor family (VSKNN, STAN, VSTAN) built on a shared
//!   inverted index with recency-based neighbor sampling.
//! * [`extensions`] wraps any recommender with the Extend, Boost and Remind
//!   heuristics that inject the user's past sessions.
//! * [`evaluate`] replays evaluation sessions item by item and aggregates
//!   accuracy, coverage, popularity and timing.
//!
//! [`hyperopt`] drives random search over the shipped search spaces.

pub mod algorithms;
pub mod error;
pub mod evaluate;
pub mod eventlog;
pub mod extensions;
pub mod hyperopt;
pub mod preprocess;
pub mod recommender;

pub use error::{Error, Result};

/// Dense internal item identifier.
pub type ItemId = u32;
/// Dense internal user identifier.
pub type UserId = u32;
/// Session identifier, unique within one preprocessed dataset.
pub type SessionId = u32;
/// Seconds since the Unix epoch.
pub type Timestamp = u64;
