//! Project configuration and the loaded, on-disk project state.
//!
//! A project file names the architecture, SMB, argument and optional
//! risk-matrix documents plus the run store and revision log. Relative paths
//! resolve against the directory holding the project file.

use std::fs::{self, OpenOptions};
use std::io::Write;
use std::path::{Path, PathBuf};

use chrono::{DateTime, Utc};
use dynassure_core::architecture::{PointValues, RiskMatrixConfig, SafetyArchitecture};
use dynassure_core::argument::Argument;
use dynassure_core::ingest::{DataRun, LifetimeStore, RunLog};
use dynassure_core::riskdyn::{replay_revision, revise_risk, DriftConfig, RevisionRecord, RrReference};
use dynassure_core::smb::Smb;
use serde::{Deserialize, Serialize};

use crate::error::ServiceError;

pub const DEFAULT_PORT: u16 = 8642;
pub const DEFAULT_WATCH_INTERVAL_MS: u64 = 1000;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase", deny_unknown_fields)]
pub struct ProjectConfig {
    pub architecture: PathBuf,
    pub smb: PathBuf,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub argument: Option<PathBuf>,
    /// Replaces the risk matrix embedded in the architecture.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub risk_matrix: Option<PathBuf>,
    /// Directory holding the run log and its snapshot.
    pub store: PathBuf,
    /// Line-delimited revision log.
    pub revisions: PathBuf,
    /// Measure whose lifetime total is the operational exposure.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub exposure_measure: Option<String>,
    /// Reference of the headline risk ratio in reports.
    #[serde(default)]
    pub rr_reference: RrReference,
    #[serde(default)]
    pub drift: DriftConfig,
    #[serde(default = "default_port")]
    pub port: u16,
    #[serde(default = "default_watch_interval")]
    pub watch_interval_ms: u64,
}

fn default_port() -> u16 {
    DEFAULT_PORT
}

fn default_watch_interval() -> u64 {
    DEFAULT_WATCH_INTERVAL_MS
}

impl ProjectConfig {
    /// Reads a project file and resolves its paths.
    pub fn load(path: impl AsRef<Path>) -> Result<Self, ServiceError> {
        let path = path.as_ref();
        let text = fs::read_to_string(path).map_err(|e| ServiceError::io(path, e))?;
        let mut config: ProjectConfig = serde_json::from_str(&text).map_err(|e| ServiceError::parse(path, e))?;
        let base = path.parent().unwrap_or(Path::new("."));
        config.resolve(base);
        Ok(config)
    }

    fn resolve(&mut self, base: &Path) {
        let join = |p: &mut PathBuf| {
            if p.is_relative() {
                *p = base.join(&*p);
            }
        };
        join(&mut self.architecture);
        join(&mut self.smb);
        join(&mut self.store);
        join(&mut self.revisions);
        if let Some(p) = self.argument.as_mut() {
            join(p);
        }
        if let Some(p) = self.risk_matrix.as_mut() {
            join(p);
        }
    }
}

/// Immutable view of the project handed to readers.
#[derive(Debug, Clone, PartialEq)]
pub struct Snapshot {
    pub architecture: SafetyArchitecture,
    pub smb: Smb,
    pub argument: Option<Argument>,
    pub store: LifetimeStore,
    pub history: Vec<RevisionRecord>,
    pub exposure_measure: Option<String>,
    pub rr_reference: RrReference,
    pub drift: DriftConfig,
}

impl Snapshot {
    /// Point values currently in force: the latest revision's, or the
    /// architecture's own before any revision.
    pub fn current_values(&self) -> Result<PointValues, ServiceError> {
        match self.history.last() {
            Some(r) => Ok(r.values.clone()),
            None => self
                .architecture
                .point_values()
                .map_err(|e| ServiceError::Computation(e.to_string())),
        }
    }
}

/// The project as loaded from disk, with its single writer handle.
#[derive(Debug)]
pub struct Project {
    pub config: ProjectConfig,
    log: RunLog,
    snapshot: Snapshot,
}

fn read(path: &Path) -> Result<String, ServiceError> {
    fs::read_to_string(path).map_err(|e| ServiceError::io(path, e))
}

impl Project {
    /// Loads and parses every referenced document, the run store and the
    /// revision log.
    pub fn open(config: ProjectConfig) -> Result<Self, ServiceError> {
        let (architecture, smb) = load_models(&config)?;
        let argument = match &config.argument {
            Some(path) => Some(Argument::from_json_str(&read(path)?).map_err(|e| ServiceError::parse(path, e))?),
            None => None,
        };
        let log = RunLog::new(&config.store);
        let store = log.open(smb.measure_ids())?;
        let history = load_revisions(&config.revisions)?;
        let snapshot = Snapshot {
            architecture,
            smb,
            argument,
            store,
            history,
            exposure_measure: config.exposure_measure.clone(),
            rr_reference: config.rr_reference,
            drift: config.drift.clone(),
        };
        Ok(Self { config, log, snapshot })
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self, ServiceError> {
        Self::open(ProjectConfig::load(path)?)
    }

    pub fn snapshot(&self) -> &Snapshot {
        &self.snapshot
    }

    /// Re-reads the run store from disk; returns whether it changed.
    pub fn reload_store(&mut self) -> Result<bool, ServiceError> {
        let store = self.log.open(self.snapshot.smb.measure_ids())?;
        let changed = store != self.snapshot.store;
        self.snapshot.store = store;
        Ok(changed)
    }

    /// Every validator over every artifact; empty means valid.
    pub fn diagnostics(&self) -> Vec<String> {
        let s = &self.snapshot;
        let mut out: Vec<String> = Vec::new();
        out.extend(s.architecture.validate().iter().map(|d| format!("architecture: {d}")));
        out.extend(s.smb.validate(Some(&s.architecture)).iter().map(|d| format!("smb: {d}")));
        if let Some(arg) = &s.argument {
            out.extend(arg.validate().iter().map(|i| format!("argument: {i}")));
        }
        if let Some(m) = &s.exposure_measure {
            if s.smb.measure(m).is_none() {
                out.push(format!("project: exposure measure `{m}` is not an SMB measure"));
            }
        }
        for (i, record) in s.history.iter().enumerate() {
            let previous = i.checked_sub(1).map(|j| &s.history[j]);
            match replay_revision(&s.architecture, record, previous) {
                Ok(replayed) if replayed == *record => {}
                Ok(_) => out.push(format!("revisions: record {} does not replay", record.sequence)),
                Err(e) => out.push(format!("revisions: record {}: {e}", record.sequence)),
            }
        }
        out
    }

    /// Validates, then appends a run to the persistent store.
    pub fn ingest(&mut self, run: DataRun) -> Result<(), ServiceError> {
        self.log.append(&mut self.snapshot.store, run)?;
        Ok(())
    }

    /// Revises the risk assessment and appends the record to the log.
    pub fn revise(&mut self, overrides: PointValues, timestamp: DateTime<Utc>) -> Result<&RevisionRecord, ServiceError> {
        let s = &self.snapshot;
        let record = revise_risk(
            &s.architecture,
            &s.smb,
            &s.store,
            &s.history,
            overrides,
            timestamp,
            s.exposure_measure.as_deref(),
        )?;
        append_revision(&self.config.revisions, &record)?;
        self.snapshot.history.push(record);
        Ok(self.snapshot.history.last().expect("just pushed"))
    }
}

/// Loads just the architecture (with any risk-matrix override) and the SMB.
pub fn load_models(config: &ProjectConfig) -> Result<(SafetyArchitecture, Smb), ServiceError> {
    let mut architecture = SafetyArchitecture::from_json_str(&read(&config.architecture)?)
        .map_err(|e| ServiceError::parse(&config.architecture, e))?;
    if let Some(path) = &config.risk_matrix {
        architecture.risk_matrix =
            serde_json::from_str::<RiskMatrixConfig>(&read(path)?).map_err(|e| ServiceError::parse(path, e))?;
    }
    let smb = Smb::from_json_str(&read(&config.smb)?).map_err(|e| ServiceError::parse(&config.smb, e))?;
    Ok((architecture, smb))
}

fn load_revisions(path: &Path) -> Result<Vec<RevisionRecord>, ServiceError> {
    let text = match fs::read_to_string(path) {
        Ok(t) => t,
        Err(e) if e.kind() == std::io::ErrorKind::NotFound => return Ok(Vec::new()),
        Err(e) => return Err(ServiceError::io(path, e)),
    };
    text.lines()
        .enumerate()
        .filter(|(_, l)| !l.trim().is_empty())
        .map(|(i, l)| serde_json::from_str(l).map_err(|e| ServiceError::parse(path, format!("line {}: {e}", i + 1))))
        .collect()
}

fn append_revision(path: &Path, record: &RevisionRecord) -> Result<(), ServiceError> {
    if let Some(dir) = path.parent() {
        fs::create_dir_all(dir).map_err(|e| ServiceError::io(dir, e))?;
    }
    let mut line = serde_json::to_string(record).expect("revision records serialize");
    line.push('\n');
    let mut file = OpenOptions::new()
        .create(true)
        .append(true)
        .open(path)
        .map_err(|e| ServiceError::io(path, e))?;
    file.write_all(line.as_bytes()).map_err(|e| ServiceError::io(path, e))?;
    file.sync_data().map_err(|e| ServiceError::io(path, e))
}
