//! Interaction-log ingestion.
//!
//! Logs are delimited text with a header row. Raw user and item identifiers
//! are opaque integers; they are re-mapped to dense ids in ascending raw-id
//! order, so sorting by dense id and by raw id agree.

use std::cmp::Ordering;
use std::fs::File;
use std::io::{Read, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::{Error, ItemId, Result, Timestamp, UserId};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Event {
    pub user: UserId,
    pub item: ItemId,
    pub timestamp: Timestamp,
}

impl Event {
    fn sort_key(&self) -> (UserId, Timestamp, ItemId) {
        (self.user, self.timestamp, self.item)
    }
}

impl Ord for Event {
    fn cmp(&self, other: &Self) -> Ordering {
        self.sort_key().cmp(&other.sort_key())
    }
}

impl PartialOrd for Event {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

/// Bidirectional mapping between raw identifiers and dense ids.
#[derive(Clone, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct IdMap {
    raw: Vec<i64>,
}

impl IdMap {
    /// Builds a map over the distinct values of `raw_ids`.
    pub fn from_raw<I: IntoIterator<Item = i64>>(raw_ids: I) -> Self {
        let mut raw: Vec<i64> = raw_ids.into_iter().collect();
        raw.sort_unstable();
        raw.dedup();
        IdMap { raw }
    }

    pub fn dense(&self, raw: i64) -> Option<u32> {
        self.raw.binary_search(&raw).ok().map(|i| i as u32)
    }

    pub fn raw(&self, dense: u32) -> i64 {
        self.raw[dense as usize]
    }

    pub fn len(&self) -> usize {
        self.raw.len()
    }

    pub fn is_empty(&self) -> bool {
        self.raw.is_empty()
    }
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum TimeUnit {
    #[default]
    Seconds,
    Milliseconds,
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Delimiter {
    #[default]
    Comma,
    Tab,
}

impl Delimiter {
    pub fn byte(self) -> u8 {
        match self {
            Delimiter::Comma => b',',
            Delimiter::Tab => b'\t',
        }
    }
}

/// Keeps only rows whose `column` equals `value` (e.g. `event = view`).
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct TypeFilter {
    pub column: String,
    pub value: String,
}

/// Column mapping and parsing policy for an input log.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default)]
pub struct LogFormat {
    pub user_column: String,
    pub item_column: String,
    pub timestamp_column: String,
    pub time_unit: TimeUnit,
    pub delimiter: Delimiter,
    /// Number of malformed rows tolerated before loading fails; 0 is strict.
    pub max_malformed: usize,
    pub keep_type: Option<TypeFilter>,
}

impl Default for LogFormat {
    fn default() -> Self {
        LogFormat {
            user_column: "user_id".into(),
            item_column: "item_id".into(),
            timestamp_column: "timestamp".into(),
            time_unit: TimeUnit::Seconds,
            delimiter: Delimiter::Comma,
            max_malformed: 0,
            keep_type: None,
        }
    }
}

/// Row accounting for one load.
#[derive(Clone, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct LoadSummary {
    pub rows: usize,
    pub malformed: usize,
    pub filtered_by_type: usize,
    /// Rows identical to another row in user, item and timestamp. They are kept.
    pub duplicates: usize,
}

/// An immutable, canonically ordered interaction log.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct EventLog {
    events: Vec<Event>,
    users: IdMap,
    items: IdMap,
    pub source_meta: String,
    pub summary: LoadSummary,
}

impl EventLog {
    /// Builds a log from raw `(user, item, timestamp)` triples.
    pub fn from_raw(rows: &[(i64, i64, Timestamp)], source_meta: impl Into<String>) -> Self {
        let users = IdMap::from_raw(rows.iter().map(|r| r.0));
        let items = IdMap::from_raw(rows.iter().map(|r| r.1));
        let mut events: Vec<Event> = rows
            .iter()
            .map(|&(u, i, t)| Event {
                user: users.dense(u).unwrap(),
                item: items.dense(i).unwrap(),
                timestamp: t,
            })
            .collect();
        events.sort_unstable();
        let duplicates = events.windows(2).filter(|w| w[0] == w[1]).count();
        EventLog {
            summary: LoadSummary {
                rows: events.len(),
                duplicates,
                ..Default::default()
            },
            events,
            users,
            items,
            source_meta: source_meta.into(),
        }
    }

    pub fn events(&self) -> &[Event] {
        &self.events
    }

    pub fn users(&self) -> &IdMap {
        &self.users
    }

    pub fn items(&self) -> &IdMap {
        &self.items
    }

    pub fn len(&self) -> usize {
        self.events.len()
    }

    pub fn is_empty(&self) -> bool {
        self.events.is_empty()
    }

    /// Returns a log restricted to events accepted by `keep`, sharing id maps.
    pub fn retain(&self, mut keep: impl FnMut(&Event) -> bool) -> EventLog {
        EventLog {
            events: self.events.iter().copied().filter(|e| keep(e)).collect(),
            users: self.users.clone(),
            items: self.items.clone(),
            source_meta: self.source_meta.clone(),
            summary: self.summary.clone(),
        }
    }
}

fn column_index(headers: &csv::StringRecord, name: &str, path: &Path) -> Result<usize> {
    headers
        .iter()
        .position(|h| h.trim() == name)
        .ok_or_else(|| Error::MissingColumn {
            column: name.to_string(),
            path: path.to_path_buf(),
        })
}

fn parse_id(field: Option<&str>, what: &str) -> std::result::Result<i64, String> {
    let raw = field.ok_or_else(|| format!("missing {what} field"))?.trim();
    raw.parse::<i64>()
        .map_err(|_| format!("non-numeric {what} '{raw}'"))
}

fn parse_timestamp(field: Option<&str>, unit: TimeUnit) -> std::result::Result<Timestamp, String> {
    let raw = field.ok_or_else(|| "missing timestamp field".to_string())?.trim();
    let value = match raw.parse::<u64>() {
        Ok(v) => v,
        Err(_) => match raw.parse::<f64>() {
            Ok(v) if v.is_finite() && v >= 0.0 => v.floor() as u64,
            Ok(_) => return Err(format!("negative or non-finite timestamp '{raw}'")),
            Err(_) => return Err(format!("non-numeric timestamp '{raw}'")),
        },
    };
    Ok(match unit {
        TimeUnit::Seconds => value,
        TimeUnit::Milliseconds => value / 1000,
    })
}

/// Loads a delimited log file.
pub fn load_events(path: impl AsRef<Path>, format: &LogFormat) -> Result<EventLog> {
    let path = path.as_ref();
    if !path.is_file() {
        return Err(Error::MissingFile(path.to_path_buf()));
    }
    let file = File::open(path)?;
    read_events(file, format, path)
}

/// Loads a log from any reader; `source` names it in errors and metadata.
pub fn read_events<R: Read>(reader: R, format: &LogFormat, source: &Path) -> Result<EventLog> {
    let mut rdr = csv::ReaderBuilder::new()
        .delimiter(format.delimiter.byte())
        .has_headers(true)
        .flexible(true)
        .from_reader(reader);
    let headers = rdr.headers()?.clone();
    let user_col = column_index(&headers, &format.user_column, source)?;
    let item_col = column_index(&headers, &format.item_column, source)?;
    let time_col = column_index(&headers, &format.timestamp_column, source)?;
    let type_col = match &format.keep_type {
        Some(filter) => Some((column_index(&headers, &filter.column, source)?, filter.value.as_str())),
        None => None,
    };

    let mut rows: Vec<(i64, i64, Timestamp)> = Vec::new();
    let mut malformed = 0usize;
    let mut first_bad: Option<(u64, String)> = None;
    let mut filtered = 0usize;
    let mut record = csv::StringRecord::new();
    loop {
        let line = rdr.position().line();
        match rdr.read_record(&mut record) {
            Ok(false) => break,
            Ok(true) => {}
            Err(e) => {
                let message = e.to_string();
                malformed += 1;
                first_bad.get_or_insert((line, message.clone()));
                if malformed > format.max_malformed {
                    return Err(malformed_error(malformed, format.max_malformed, first_bad.unwrap()));
                }
                continue;
            }
        }
        if let Some((col, keep)) = type_col {
            if record.get(col).map(str::trim) != Some(keep) {
                filtered += 1;
                continue;
            }
        }
        let parsed = parse_id(record.get(user_col), "user")
            .and_then(|u| parse_id(record.get(item_col), "item").map(|i| (u, i)))
            .and_then(|(u, i)| {
                parse_timestamp(record.get(time_col), format.time_unit).map(|t| (u, i, t))
            });
        match parsed {
            Ok(row) => rows.push(row),
            Err(message) => {
                malformed += 1;
                first_bad.get_or_insert((line, message));
                if malformed > format.max_malformed {
                    return Err(malformed_error(malformed, format.max_malformed, first_bad.unwrap()));
                }
            }
        }
    }
    if malformed > 0 {
        let (line, message) = first_bad.unwrap();
        log::warn!("{}: skipped {malformed} malformed rows (first at line {line}: {message})", source.display());
    }
    if rows.is_empty() {
        return Err(Error::EmptyResult(format!("no events loaded from {}", source.display())));
    }
    let mut log = EventLog::from_raw(&rows, source.display().to_string());
    log.summary.malformed = malformed;
    log.summary.filtered_by_type = filtered;
    log::info!(
        "{}: loaded {} events ({} duplicate rows kept)",
        source.display(),
        log.len(),
        log.summary.duplicates
    );
    Ok(log)
}

fn malformed_error(count: usize, limit: usize, first: (u64, String)) -> Error {
    if limit == 0 {
        Error::MalformedRow {
            line: first.0,
            message: first.1,
        }
    } else {
        Error::TooManyMalformed {
            count,
            limit,
            first_line: first.0,
            message: first.1,
        }
    }
}

/// Writes the log back in `format`, using raw identifiers.
pub fn write_events<W: Write>(log: &EventLog, writer: W, format: &LogFormat) -> Result<()> {
    let mut wtr = csv::WriterBuilder::new()
        .delimiter(format.delimiter.byte())
        .from_writer(writer);
    let mut header = vec![
        format.user_column.as_str(),
        format.item_column.as_str(),
        format.timestamp_column.as_str(),
    ];
    if let Some(filter) = &format.keep_type {
        header.push(filter.column.as_str());
    }
    wtr.write_record(&header)?;
    for e in log.events() {
        let ts = match format.time_unit {
            TimeUnit::Seconds => e.timestamp,
            TimeUnit::Milliseconds => e.timestamp * 1000,
        };
        let mut row = vec![
            log.users.raw(e.user).to_string(),
            log.items.raw(e.item).to_string(),
            ts.to_string(),
        ];
        if let Some(filter) = &format.keep_type {
            row.push(filter.value.clone());
        }
        wtr.write_record(&row)?;
    }
    wtr.flush()?;
    Ok(())
}

pub fn save_events(log: &EventLog, path: impl AsRef<Path>, format: &LogFormat) -> Result<()> {
    write_events(log, File::create(path)?, format)
}

/// Dataset counters: events, distinct users, distinct items, time span.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct LogStats {
    pub events: usize,
    pub users: usize,
    pub items: usize,
    pub time_span: u64,
}

pub fn log_stats(log: &EventLog) -> LogStats {
    event_stats(log.events())
}

pub(crate) fn event_stats(events: &[Event]) -> LogStats {
    if events.is_empty() {
        return LogStats::default();
    }
    let mut users: Vec<UserId> = events.iter().map(|e| e.user).collect();
    users.sort_unstable();
    users.dedup();
    let mut items: Vec<ItemId> = events.iter().map(|e| e.item).collect();
    items.sort_unstable();
    items.dedup();
    let min = events.iter().map(|e| e.timestamp).min().unwrap();
    let max = events.iter().map(|e| e.timestamp).max().unwrap();
    LogStats {
        events: events.len(),
        users: users.len(),
        items: items.len(),
        time_span: max - min,
    }
}
