//! Data-run ingestion and the lifetime store.
//!
//! A data run is one mission's worth of measure samples. Runs are appended to
//! an in-memory [`LifetimeStore`] in timestamp order; [`RunLog`] persists them
//! as an append-only line-delimited JSON log with a rebuildable snapshot.

use std::collections::{BTreeMap, BTreeSet};
use std::fs::{self, File, OpenOptions};
use std::io::{BufRead, BufReader, Write};
use std::path::{Path, PathBuf};

use chrono::{DateTime, Utc};
use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum IngestError {
    #[error("malformed record at line {line}, field `{field}`: {message}")]
    Malformed {
        line: usize,
        field: String,
        message: String,
    },
    #[error("unknown measure `{0}`")]
    UnknownMeasure(String),
    #[error("run `{run}` at {timestamp} precedes the latest stored run at {latest}")]
    TimestampRegression {
        run: String,
        timestamp: DateTime<Utc>,
        latest: DateTime<Utc>,
    },
    #[error("run `{0}` is already stored")]
    DuplicateRun(String),
    #[error("value for `{measure}` in run `{run}` is not finite")]
    NonFinite { run: String, measure: String },
    #[error("store I/O failed: {0}")]
    Io(#[from] std::io::Error),
    #[error("store log is corrupt at line {line}: {source}")]
    CorruptLog {
        line: usize,
        #[source]
        source: serde_json::Error,
    },
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Sample {
    pub timestamp: DateTime<Utc>,
    pub value: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct DataRun {
    pub id: String,
    pub timestamp: DateTime<Utc>,
    /// Operating context (bow-tie view id) the run was flown in.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub context: Option<String>,
    /// Per-run totals by measure.
    #[serde(default)]
    pub samples: BTreeMap<String, f64>,
    /// Timestamped samples, when the source provides them. Their values are
    /// already included in `samples`.
    #[serde(default, skip_serializing_if = "BTreeMap::is_empty")]
    pub sequences: BTreeMap<String, Vec<Sample>>,
}

impl DataRun {
    pub fn new(id: impl Into<String>, timestamp: DateTime<Utc>) -> Self {
        Self {
            id: id.into(),
            timestamp,
            context: None,
            samples: BTreeMap::new(),
            sequences: BTreeMap::new(),
        }
    }

    pub fn with_sample(mut self, measure: impl Into<String>, value: f64) -> Self {
        self.record(measure.into(), value, None);
        self
    }

    pub fn with_context(mut self, context: impl Into<String>) -> Self {
        self.context = Some(context.into());
        self
    }

    /// Adds a sample to the run total, keeping it in the sequence when
    /// timestamped.
    pub fn record(&mut self, measure: String, value: f64, at: Option<DateTime<Utc>>) {
        *self.samples.entry(measure.clone()).or_insert(0.0) += value;
        if let Some(timestamp) = at {
            self.sequences.entry(measure).or_default().push(Sample { timestamp, value });
        }
    }

    pub fn value(&self, measure: &str) -> f64 {
        self.samples.get(measure).copied().unwrap_or(0.0)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct MeasureAggregate {
    pub sum: f64,
    /// Number of runs that recorded the measure.
    pub runs: u64,
}

/// Trailing window over the stored runs.
#[derive(Debug, Clone, PartialEq)]
pub enum Window {
    All,
    LastRuns(usize),
    /// Shortest run suffix whose `measure` total reaches `amount`; each run
    /// counts as one occurrence when `measure` is `None`.
    LastExposure { measure: Option<String>, amount: f64 },
    /// Runs within `hours` of the latest run timestamp.
    LastHours(f64),
}

/// Runs selected by a window together with the exposure they cover.
#[derive(Debug, Clone, Copy)]
pub struct WindowSlice<'a> {
    pub runs: &'a [DataRun],
    pub observed: f64,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct LifetimeStore {
    measures: BTreeSet<String>,
    runs: Vec<DataRun>,
    aggregates: BTreeMap<String, MeasureAggregate>,
}

impl LifetimeStore {
    pub fn new<I, S>(measures: I) -> Self
    where
        I: IntoIterator<Item = S>,
        S: Into<String>,
    {
        Self {
            measures: measures.into_iter().map(Into::into).collect(),
            runs: Vec::new(),
            aggregates: BTreeMap::new(),
        }
    }

    pub fn measures(&self) -> &BTreeSet<String> {
        &self.measures
    }

    pub fn runs(&self) -> &[DataRun] {
        &self.runs
    }

    pub fn latest(&self) -> Option<&DataRun> {
        self.runs.last()
    }

    pub fn is_empty(&self) -> bool {
        self.runs.is_empty()
    }

    pub fn aggregates(&self) -> &BTreeMap<String, MeasureAggregate> {
        &self.aggregates
    }

    /// Checks a run against the store without modifying it.
    pub fn check(&self, run: &DataRun) -> Result<(), IngestError> {
        for (measure, value) in &run.samples {
            if !self.measures.contains(measure) {
                return Err(IngestError::UnknownMeasure(measure.clone()));
            }
            if !value.is_finite() {
                return Err(IngestError::NonFinite {
                    run: run.id.clone(),
                    measure: measure.clone(),
                });
            }
        }
        if let Some(measure) = run.sequences.keys().find(|m| !self.measures.contains(*m)) {
            return Err(IngestError::UnknownMeasure(measure.clone()));
        }
        if let Some(latest) = self.latest() {
            if run.timestamp < latest.timestamp {
                return Err(IngestError::TimestampRegression {
                    run: run.id.clone(),
                    timestamp: run.timestamp,
                    latest: latest.timestamp,
                });
            }
        }
        if self.runs.iter().any(|r| r.id == run.id) {
            return Err(IngestError::DuplicateRun(run.id.clone()));
        }
        Ok(())
    }

    /// Validates and appends a run; on error the store is untouched.
    pub fn ingest(&mut self, run: DataRun) -> Result<(), IngestError> {
        self.check(&run)?;
        for (measure, value) in &run.samples {
            let agg = self.aggregates.entry(measure.clone()).or_default();
            agg.sum += value;
            agg.runs += 1;
        }
        self.runs.push(run);
        Ok(())
    }

    /// Aggregates recomputed from the raw runs.
    pub fn recompute(&self) -> BTreeMap<String, MeasureAggregate> {
        let mut out: BTreeMap<String, MeasureAggregate> = BTreeMap::new();
        for run in &self.runs {
            for (measure, value) in &run.samples {
                let agg = out.entry(measure.clone()).or_default();
                agg.sum += value;
                agg.runs += 1;
            }
        }
        out
    }

    pub fn window(&self, window: &Window) -> WindowSlice<'_> {
        let n = self.runs.len();
        match window {
            Window::All => WindowSlice {
                runs: &self.runs,
                observed: n as f64,
            },
            Window::LastRuns(k) => {
                let k = (*k).min(n);
                WindowSlice {
                    runs: &self.runs[n - k..],
                    observed: k as f64,
                }
            }
            Window::LastExposure { measure, amount } => {
                let mut observed = 0.0;
                let mut start = n;
                while start > 0 && observed < *amount {
                    start -= 1;
                    observed += match measure {
                        Some(m) => self.runs[start].value(m),
                        None => 1.0,
                    };
                }
                WindowSlice {
                    runs: &self.runs[start..],
                    observed,
                }
            }
            Window::LastHours(hours) => {
                let (Some(first), Some(last)) = (self.runs.first(), self.runs.last()) else {
                    return WindowSlice {
                        runs: &self.runs,
                        observed: 0.0,
                    };
                };
                let span = hours_between(first.timestamp, last.timestamp);
                let start = self
                    .runs
                    .iter()
                    .position(|r| hours_between(r.timestamp, last.timestamp) <= *hours)
                    .unwrap_or(n);
                WindowSlice {
                    runs: &self.runs[start..],
                    observed: span,
                }
            }
        }
    }

    /// Sum of a measure over a trailing window.
    pub fn query(&self, measure: &str, window: &Window) -> Result<f64, IngestError> {
        if !self.measures.contains(measure) {
            return Err(IngestError::UnknownMeasure(measure.to_string()));
        }
        if *window == Window::All {
            return Ok(self.aggregates.get(measure).map(|a| a.sum).unwrap_or(0.0));
        }
        Ok(self.window(window).runs.iter().map(|r| r.value(measure)).sum())
    }
}

fn hours_between(from: DateTime<Utc>, to: DateTime<Utc>) -> f64 {
    (to - from).num_milliseconds() as f64 / 3_600_000.0
}

// ─── Record formats ────────────────────────────────────────────────────

fn parse_timestamp(text: &str, line: usize) -> Result<DateTime<Utc>, IngestError> {
    DateTime::parse_from_rfc3339(text.trim())
        .map(|t| t.with_timezone(&Utc))
        .map_err(|e| IngestError::Malformed {
            line,
            field: "timestamp".into(),
            message: e.to_string(),
        })
}

/// Parses a CSV run file with header `measure,value[,timestamp]`. The run
/// timestamp is the earliest sample timestamp, or `default_timestamp` when
/// the file has none.
pub fn parse_csv_run(text: &str, run_id: &str, default_timestamp: DateTime<Utc>) -> Result<DataRun, IngestError> {
    let mut reader = csv::ReaderBuilder::new()
        .trim(csv::Trim::All)
        .flexible(false)
        .from_reader(text.as_bytes());
    let header = reader
        .headers()
        .map_err(|e| IngestError::Malformed {
            line: 1,
            field: "header".into(),
            message: e.to_string(),
        })?
        .clone();
    let columns: Vec<&str> = header.iter().collect();
    if columns != ["measure", "value"] && columns != ["measure", "value", "timestamp"] {
        return Err(IngestError::Malformed {
            line: 1,
            field: "header".into(),
            message: format!("expected `measure,value[,timestamp]`, found `{}`", columns.join(",")),
        });
    }

    let mut run = DataRun::new(run_id, default_timestamp);
    let mut earliest: Option<DateTime<Utc>> = None;
    for (i, record) in reader.records().enumerate() {
        let line = i + 2;
        let record = record.map_err(|e| IngestError::Malformed {
            line,
            field: "record".into(),
            message: e.to_string(),
        })?;
        let measure = record.get(0).unwrap_or_default();
        if measure.is_empty() {
            return Err(IngestError::Malformed {
                line,
                field: "measure".into(),
                message: "empty measure id".into(),
            });
        }
        let value: f64 = record
            .get(1)
            .unwrap_or_default()
            .parse()
            .map_err(|e: std::num::ParseFloatError| IngestError::Malformed {
                line,
                field: "value".into(),
                message: e.to_string(),
            })?;
        let at = match record.get(2) {
            Some(t) if !t.is_empty() => Some(parse_timestamp(t, line)?),
            _ => None,
        };
        if let Some(t) = at {
            earliest = Some(earliest.map_or(t, |e| e.min(t)));
        }
        run.record(measure.to_string(), value, at);
    }
    if let Some(t) = earliest {
        run.timestamp = t;
    }
    Ok(run)
}

/// One line of a line-delimited JSON feed.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FeedRecord {
    pub run: String,
    pub timestamp: DateTime<Utc>,
    pub measure: String,
    pub value: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub context: Option<String>,
}

/// Assembles runs from line-delimited JSON records. A run is complete when a
/// record for a different run arrives or the feed ends.
#[derive(Debug, Default)]
pub struct FeedAssembler {
    current: Option<DataRun>,
    line: usize,
}

impl FeedAssembler {
    pub fn new() -> Self {
        Self::default()
    }

    /// Consumes one line; returns a run when the line closes the previous one.
    pub fn push_line(&mut self, text: &str) -> Result<Option<DataRun>, IngestError> {
        self.line += 1;
        if text.trim().is_empty() {
            return Ok(None);
        }
        let record: FeedRecord = serde_json::from_str(text).map_err(|e| IngestError::Malformed {
            line: self.line,
            field: field_of(&e),
            message: e.to_string(),
        })?;
        let finished = match &self.current {
            Some(run) if run.id != record.run => self.current.take(),
            _ => None,
        };
        let run = self
            .current
            .get_or_insert_with(|| DataRun::new(record.run.clone(), record.timestamp));
        run.timestamp = run.timestamp.min(record.timestamp);
        if run.context.is_none() {
            run.context = record.context.clone();
        }
        run.record(record.measure, record.value, Some(record.timestamp));
        Ok(finished)
    }

    pub fn finish(&mut self) -> Option<DataRun> {
        self.current.take()
    }
}

fn field_of(e: &serde_json::Error) -> String {
    let msg = e.to_string();
    ["run", "timestamp", "measure", "value", "context"]
        .into_iter()
        .find(|f| msg.contains(&format!("`{f}`")))
        .unwrap_or("record")
        .to_string()
}

/// Parses a whole line-delimited JSON document into runs, in order.
pub fn parse_ndjson_runs(text: &str) -> Result<Vec<DataRun>, IngestError> {
    let mut feed = FeedAssembler::new();
    let mut runs = Vec::new();
    for line in text.lines() {
        if let Some(run) = feed.push_line(line)? {
            runs.push(run);
        }
    }
    runs.extend(feed.finish());
    Ok(runs)
}

// ─── Persistence ───────────────────────────────────────────────────────

/// Append-only run log plus snapshot inside a directory.
#[derive(Debug, Clone)]
pub struct RunLog {
    dir: PathBuf,
}

impl RunLog {
    pub const LOG_FILE: &'static str = "runs.jsonl";
    pub const SNAPSHOT_FILE: &'static str = "snapshot.json";

    pub fn new(dir: impl Into<PathBuf>) -> Self {
        Self { dir: dir.into() }
    }

    pub fn dir(&self) -> &Path {
        &self.dir
    }

    pub fn log_path(&self) -> PathBuf {
        self.dir.join(Self::LOG_FILE)
    }

    pub fn snapshot_path(&self) -> PathBuf {
        self.dir.join(Self::SNAPSHOT_FILE)
    }

    /// Loads the store, preferring the snapshot when it agrees with the log.
    pub fn open<I, S>(&self, measures: I) -> Result<LifetimeStore, IngestError>
    where
        I: IntoIterator<Item = S>,
        S: Into<String>,
    {
        let empty = LifetimeStore::new(measures);
        let logged = self.read_log()?;
        if let Ok(text) = fs::read_to_string(self.snapshot_path()) {
            if let Ok(snapshot) = serde_json::from_str::<LifetimeStore>(&text) {
                if snapshot.runs == logged && snapshot.measures == empty.measures && snapshot.aggregates == snapshot.recompute() {
                    return Ok(snapshot);
                }
            }
        }
        let mut store = empty;
        for run in logged {
            store.ingest(run)?;
        }
        if self.log_path().exists() {
            self.write_snapshot(&store)?;
        }
        Ok(store)
    }

    fn read_log(&self) -> Result<Vec<DataRun>, IngestError> {
        let file = match File::open(self.log_path()) {
            Ok(f) => f,
            Err(e) if e.kind() == std::io::ErrorKind::NotFound => return Ok(Vec::new()),
            Err(e) => return Err(e.into()),
        };
        let mut runs = Vec::new();
        for (i, line) in BufReader::new(file).lines().enumerate() {
            let line = line?;
            if line.trim().is_empty() {
                continue;
            }
            runs.push(serde_json::from_str(&line).map_err(|source| IngestError::CorruptLog { line: i + 1, source })?);
        }
        Ok(runs)
    }

    /// Ingests into `store` and persists. The store is modified only after
    /// the log line is durably written.
    pub fn append(&self, store: &mut LifetimeStore, run: DataRun) -> Result<(), IngestError> {
        store.check(&run)?;
        fs::create_dir_all(&self.dir)?;
        let mut line = serde_json::to_string(&run).expect("runs serialize");
        line.push('\n');
        let mut log = OpenOptions::new().create(true).append(true).open(self.log_path())?;
        log.write_all(line.as_bytes())?;
        log.sync_data()?;
        store.ingest(run)?;
        self.write_snapshot(store)
    }

    fn write_snapshot(&self, store: &LifetimeStore) -> Result<(), IngestError> {
        fs::create_dir_all(&self.dir)?;
        let tmp = self.dir.join(format!("{}.tmp", Self::SNAPSHOT_FILE));
        fs::write(&tmp, serde_json::to_vec(store).expect("store serializes"))?;
        fs::rename(tmp, self.snapshot_path())?;
        Ok(())
    }
}
