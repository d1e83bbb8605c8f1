//! Run sources for ingestion: files, standard input and local socket feeds.
//!
//! Documents whose first non-blank line opens a JSON object are read as
//! line-delimited feed records; anything else is a CSV run file.

use std::io::{BufRead, BufReader, Read};
use std::net::TcpListener;
use std::path::Path;

use chrono::{DateTime, Utc};
use dynassure_core::ingest::{parse_csv_run, parse_ndjson_runs, DataRun, FeedAssembler};

use crate::error::ServiceError;

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Source {
    Stdin,
    Tcp(u16),
    File(std::path::PathBuf),
}

impl Source {
    pub fn parse(text: &str) -> Result<Self, ServiceError> {
        if text == "-" {
            return Ok(Source::Stdin);
        }
        if let Some(port) = text.strip_prefix("tcp:") {
            return port
                .parse()
                .map(Source::Tcp)
                .map_err(|_| ServiceError::BadRequest(format!("invalid port in `{text}`")));
        }
        Ok(Source::File(text.into()))
    }
}

/// Defaults for CSV files, which carry neither a run id nor a context.
#[derive(Debug, Clone)]
pub struct CsvDefaults {
    pub run_id: Option<String>,
    pub timestamp: DateTime<Utc>,
    pub context: Option<String>,
}

fn looks_like_feed(text: &str) -> bool {
    text.lines()
        .map(str::trim)
        .find(|l| !l.is_empty())
        .is_some_and(|l| l.starts_with('{'))
}

/// Parses a whole document into runs.
pub fn parse_document(text: &str, fallback_id: &str, defaults: &CsvDefaults, origin: &Path) -> Result<Vec<DataRun>, ServiceError> {
    if looks_like_feed(text) {
        return parse_ndjson_runs(text).map_err(|e| ServiceError::parse(origin, e));
    }
    let id = defaults.run_id.as_deref().unwrap_or(fallback_id);
    let mut run = parse_csv_run(text, id, defaults.timestamp).map_err(|e| ServiceError::parse(origin, e))?;
    if run.context.is_none() {
        run.context = defaults.context.clone();
    }
    Ok(vec![run])
}

/// Reads a file or standard input completely.
pub fn read_runs(source: &Source, defaults: &CsvDefaults) -> Result<Vec<DataRun>, ServiceError> {
    match source {
        Source::File(path) => {
            let text = std::fs::read_to_string(path).map_err(|e| ServiceError::io(path, e))?;
            let stem = path.file_stem().and_then(|s| s.to_str()).unwrap_or("run");
            parse_document(&text, stem, defaults, path)
        }
        Source::Stdin => {
            let mut text = String::new();
            std::io::stdin()
                .read_to_string(&mut text)
                .map_err(|e| ServiceError::io("<stdin>", e))?;
            parse_document(&text, "stdin", defaults, Path::new("<stdin>"))
        }
        Source::Tcp(_) => Err(ServiceError::BadRequest("socket feeds are streamed, not read".into())),
    }
}

/// Streams feed records from `reader`, handing each completed run to `sink`
/// as soon as the next run starts or the feed ends.
pub fn stream_feed<R: Read>(
    reader: R,
    origin: &str,
    mut sink: impl FnMut(DataRun) -> Result<(), ServiceError>,
) -> Result<usize, ServiceError> {
    let mut feed = FeedAssembler::new();
    let mut count = 0;
    for line in BufReader::new(reader).lines() {
        let line = line.map_err(|e| ServiceError::io(origin, e))?;
        if let Some(run) = feed.push_line(&line).map_err(|e| ServiceError::parse(origin, e))? {
            sink(run)?;
            count += 1;
        }
    }
    if let Some(run) = feed.finish() {
        sink(run)?;
        count += 1;
    }
    Ok(count)
}

/// Accepts one connection on a localhost port and streams its feed.
pub fn stream_tcp(port: u16, sink: impl FnMut(DataRun) -> Result<(), ServiceError>) -> Result<usize, ServiceError> {
    let origin = format!("tcp:{port}");
    let listener = TcpListener::bind(("127.0.0.1", port)).map_err(|e| ServiceError::io(&origin, e))?;
    let (conn, _) = listener.accept().map_err(|e| ServiceError::io(&origin, e))?;
    stream_feed(conn, &origin, sink)
}
