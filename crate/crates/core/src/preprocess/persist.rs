use std::collections::BTreeSet;
use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::{PreprocessConfig, Session, SessionLog, SliceSplit, SliceStats};
use crate::eventlog::{EventLog, LoadSummary};
use crate::{Error, ItemId, Result, SessionId, Timestamp, UserId};

pub const MANIFEST_FILE: &str = "manifest.json";
pub const MANIFEST_VERSION: u32 = 1;

const ROLES: [&str; 3] = ["train", "validation", "test"];

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct SliceManifest {
    pub index: usize,
    pub window_start: f64,
    pub window_end: f64,
    /// Sessions assigned to the window before filtering.
    pub raw_sessions: usize,
    /// Characteristics after filtering, before the split.
    pub stats: SliceStats,
    pub train_sessions: usize,
    pub validation_sessions: usize,
    pub test_sessions: usize,
    pub train_events: usize,
    pub vocabulary_size: usize,
}

/// Describes a preprocessed dataset directory.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Manifest {
    pub version: u32,
    pub dataset: String,
    pub source: String,
    pub load: LoadSummary,
    pub config: PreprocessConfig,
    pub notes: Vec<String>,
    pub slices: Vec<SliceManifest>,
}

impl Manifest {
    pub fn new(dataset: &str, log: &EventLog, config: &PreprocessConfig, slices: Vec<SliceManifest>) -> Self {
        let mut notes = vec![
            "exact duplicate rows (user, item, timestamp) are kept".to_string(),
            "validation sessions are not merged into train for the test run".to_string(),
        ];
        if log.summary.duplicates > 0 {
            notes.push(format!("{} duplicate rows present", log.summary.duplicates));
        }
        Manifest {
            version: MANIFEST_VERSION,
            dataset: dataset.to_string(),
            source: log.source_meta.clone(),
            load: log.summary.clone(),
            config: config.clone(),
            notes,
            slices,
        }
    }
}

pub fn save_manifest(manifest: &Manifest, dir: impl AsRef<Path>) -> Result<()> {
    let path = dir.as_ref().join(MANIFEST_FILE);
    let mut json = serde_json::to_string_pretty(manifest)?;
    json.push('\n');
    fs::write(path, json)?;
    Ok(())
}

pub fn load_manifest(dir: impl AsRef<Path>) -> Result<Manifest> {
    let path = dir.as_ref().join(MANIFEST_FILE);
    if !path.is_file() {
        return Err(Error::MissingFile(path));
    }
    let manifest: Manifest = serde_json::from_slice(&fs::read(&path)?)?;
    if manifest.version != MANIFEST_VERSION {
        return Err(Error::InvalidInput(format!(
            "manifest version {} is not supported",
            manifest.version
        )));
    }
    Ok(manifest)
}

/// Writes `users.csv` and `items.csv` mapping dense ids to raw ids.
pub fn write_id_maps(log: &EventLog, dir: impl AsRef<Path>) -> Result<()> {
    for (name, map) in [("users.csv", log.users()), ("items.csv", log.items())] {
        let mut wtr = csv::Writer::from_path(dir.as_ref().join(name))?;
        wtr.write_record(["dense_id", "raw_id"])?;
        for dense in 0..map.len() as u32 {
            wtr.write_record([dense.to_string(), map.raw(dense).to_string()])?;
        }
        wtr.flush()?;
    }
    Ok(())
}

/// Writes `train.csv`, `validation.csv` and `test.csv` into `dir`.
pub fn write_split(split: &SliceSplit, dir: impl AsRef<Path>) -> Result<()> {
    let dir = dir.as_ref();
    fs::create_dir_all(dir)?;
    for (role, log) in ROLES.iter().zip([&split.train, &split.validation, &split.test]) {
        let mut wtr = csv::Writer::from_path(dir.join(format!("{role}.csv")))?;
        wtr.write_record(["session_id", "user_id", "item_id", "timestamp"])?;
        for s in log.sessions() {
            for (item, ts) in s.items.iter().zip(&s.timestamps) {
                wtr.write_record([s.id.to_string(), s.user.to_string(), item.to_string(), ts.to_string()])?;
            }
        }
        wtr.flush()?;
    }
    Ok(())
}

fn read_sessions(path: &Path) -> Result<SessionLog> {
    if !path.is_file() {
        return Err(Error::MissingFile(path.to_path_buf()));
    }
    let mut rdr = csv::Reader::from_path(path)?;
    let mut sessions: Vec<Session> = Vec::new();
    for (row, record) in rdr.deserialize::<(SessionId, UserId, ItemId, Timestamp)>().enumerate() {
        let (sid, user, item, ts) = record.map_err(|e| Error::MalformedRow {
            line: row as u64 + 2,
            message: format!("{}: {e}", path.display()),
        })?;
        match sessions.last_mut() {
            Some(s) if s.id == sid => {
                s.items.push(item);
                s.timestamps.push(ts);
            }
            _ => sessions.push(Session::new(sid, user, vec![item], vec![ts])),
        }
    }
    Ok(SessionLog::new(sessions))
}

/// Reads a split previously written by [`write_split`].
pub fn read_split(dir: impl AsRef<Path>, slice_index: usize) -> Result<SliceSplit> {
    let dir = dir.as_ref();
    let train = read_sessions(&dir.join("train.csv"))?;
    let validation = read_sessions(&dir.join("validation.csv"))?;
    let test = read_sessions(&dir.join("test.csv"))?;
    let item_vocabulary: BTreeSet<ItemId> = train.items();
    Ok(SliceSplit {
        slice_index,
        train,
        validation,
        test,
        item_vocabulary,
    })
}
