//! CSV / NDJSON session files and the NDJSON TCP listener.
//!
//! CSV files carry the header `timestamp_s,detector_id,rssi_dbm`; NDJSON files
//! hold one `{"timestamp_s":…, "detector_id":…, "rssi_dbm":…}` object per line.
//! Session label and duration live in an optional `<file>.meta.json` sidecar.

use std::collections::HashMap;
use std::fs::File;
use std::io::{BufRead, BufReader, Read, Write};
use std::net::{TcpListener, ToSocketAddrs};
use std::path::{Path, PathBuf};
use std::str::FromStr;

use log::info;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::session::{assemble_session, DetectorId, Label, RssiRecord, Session};

pub const CSV_HEADER: [&str; 3] = ["timestamp_s", "detector_id", "rssi_dbm"];

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Format {
    Csv,
    Ndjson,
}

impl FromStr for Format {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "csv" => Ok(Format::Csv),
            "ndjson" | "jsonl" => Ok(Format::Ndjson),
            _ => Err(Error::invalid(format!(
                "unknown format `{s}` (csv or ndjson)"
            ))),
        }
    }
}

impl Format {
    pub fn from_path(path: &Path) -> Option<Self> {
        match path.extension()?.to_str()?.to_ascii_lowercase().as_str() {
            "csv" => Some(Format::Csv),
            "ndjson" | "jsonl" | "json" => Some(Format::Ndjson),
            _ => None,
        }
    }
}

fn row_error(line: usize, reason: impl Into<String>) -> Error {
    Error::MalformedRecord {
        line: Some(line),
        reason: reason.into(),
    }
}

/// Tracks the last timestamp per detector; a decrease is an error.
#[derive(Default)]
struct OrderCheck(HashMap<DetectorId, f64>);

impl OrderCheck {
    fn check(&mut self, line: usize, r: &RssiRecord) -> Result<()> {
        r.validate().map_err(|e| match e {
            Error::MalformedRecord { reason, .. } => row_error(line, reason),
            other => other,
        })?;
        if let Some(&last) = self.0.get(&r.detector_id) {
            if r.timestamp < last {
                return Err(row_error(
                    line,
                    format!(
                        "timestamp {} precedes {} on detector {}",
                        r.timestamp, last, r.detector_id
                    ),
                ));
            }
        }
        self.0.insert(r.detector_id, r.timestamp);
        Ok(())
    }
}

pub fn read_csv<R: Read>(reader: R) -> Result<Vec<RssiRecord>> {
    let mut rdr = csv::ReaderBuilder::new()
        .trim(csv::Trim::All)
        .from_reader(reader);
    let header = rdr.headers().map_err(|e| row_error(1, e.to_string()))?;
    if header.iter().collect::<Vec<_>>() != CSV_HEADER {
        return Err(row_error(
            1,
            format!("expected header `{}`", CSV_HEADER.join(",")),
        ));
    }
    let mut order = OrderCheck::default();
    let mut out = Vec::new();
    for row in rdr.records() {
        let row = row.map_err(|e| {
            let line = e.position().map_or(0, |p| p.line() as usize);
            row_error(line, e.to_string())
        })?;
        let line = row.position().map_or(0, |p| p.line() as usize);
        if row.len() != 3 {
            return Err(row_error(
                line,
                format!("expected 3 fields, found {}", row.len()),
            ));
        }
        let timestamp: f64 = row[0]
            .parse()
            .map_err(|_| row_error(line, format!("timestamp `{}` is not a number", &row[0])))?;
        let detector_id: DetectorId = row[1]
            .parse()
            .map_err(|_| row_error(line, format!("detector id `{}` is not an integer", &row[1])))?;
        let rssi: f64 = row[2]
            .parse()
            .map_err(|_| row_error(line, format!("rssi `{}` is not a number", &row[2])))?;
        let r = RssiRecord::new(timestamp, detector_id, rssi);
        order.check(line, &r)?;
        out.push(r);
    }
    Ok(out)
}

/// Reads NDJSON until end of stream; blank lines are skipped.
pub fn read_ndjson<R: BufRead>(reader: R) -> Result<Vec<RssiRecord>> {
    let mut order = OrderCheck::default();
    let mut out = Vec::new();
    for (i, line) in reader.lines().enumerate() {
        let line_no = i + 1;
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        let r: RssiRecord =
            serde_json::from_str(&line).map_err(|e| row_error(line_no, e.to_string()))?;
        order.check(line_no, &r)?;
        out.push(r);
    }
    Ok(out)
}

pub fn write_csv<W: Write>(session: &Session, writer: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(writer);
    let io = |e: csv::Error| Error::Io(e.to_string());
    w.write_record(CSV_HEADER).map_err(io)?;
    for r in session.records() {
        w.write_record([
            r.timestamp.to_string(),
            r.detector_id.to_string(),
            r.rssi.to_string(),
        ])
        .map_err(io)?;
    }
    w.flush()?;
    Ok(())
}

pub fn write_ndjson<W: Write>(session: &Session, mut writer: W) -> Result<()> {
    for r in session.records() {
        serde_json::to_writer(&mut writer, &r).map_err(|e| Error::Io(e.to_string()))?;
        writer.write_all(b"\n")?;
    }
    writer.flush()?;
    Ok(())
}

/// Duration implied by the records: the latest series end plus one sample
/// period, rounded to the microsecond.
pub fn infer_duration(records: &[RssiRecord]) -> Result<f64> {
    let mut per: HashMap<DetectorId, (usize, f64, f64)> = HashMap::new();
    for r in records {
        let e = per
            .entry(r.detector_id)
            .or_insert((0, f64::INFINITY, f64::NEG_INFINITY));
        e.0 += 1;
        e.1 = e.1.min(r.timestamp);
        e.2 = e.2.max(r.timestamp);
    }
    let duration = per
        .values()
        .map(|&(n, first, last)| {
            let span = last - first;
            if n >= 2 && span > 0.0 {
                last + span / (n - 1) as f64
            } else {
                last
            }
        })
        .fold(0.0, f64::max);
    let duration = (duration * 1e6).round() / 1e6;
    if duration > 0.0 {
        Ok(duration)
    } else {
        Err(Error::malformed("cannot infer a positive session duration"))
    }
}

/// Sidecar metadata written next to session files.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SessionMeta {
    pub label: Label,
    pub duration: f64,
    #[serde(default)]
    pub metadata: String,
}

pub fn meta_path(path: &Path) -> PathBuf {
    let mut s = path.as_os_str().to_owned();
    s.push(".meta.json");
    PathBuf::from(s)
}

fn read_meta(path: &Path) -> Result<Option<SessionMeta>> {
    let p = meta_path(path);
    if !p.exists() {
        return Ok(None);
    }
    let text = std::fs::read_to_string(&p)?;
    serde_json::from_str(&text)
        .map(Some)
        .map_err(|e| Error::malformed(format!("{}: {e}", p.display())))
}

/// Where a session comes from, optionally with an explicit label.
#[derive(Debug, Clone, PartialEq)]
pub struct InputSpec {
    pub source: Source,
    pub label: Option<Label>,
}

#[derive(Debug, Clone, PartialEq)]
pub enum Source {
    File(PathBuf),
    /// Listen on this address and read one NDJSON stream.
    Tcp(String),
}

impl FromStr for InputSpec {
    type Err = Error;

    /// `PATH`, `PATH=LABEL`, `tcp://HOST:PORT` or `tcp://HOST:PORT=LABEL`.
    fn from_str(s: &str) -> Result<Self> {
        let (src, label) = match s.rsplit_once('=') {
            Some((src, label)) => (src, Some(label.parse::<Label>()?)),
            None => (s, None),
        };
        let source = match src.strip_prefix("tcp://") {
            Some(addr) => Source::Tcp(addr.to_string()),
            None => Source::File(PathBuf::from(src)),
        };
        Ok(InputSpec { source, label })
    }
}

impl InputSpec {
    /// True when the source is a file with a `.meta.json` sidecar.
    pub fn has_sidecar(&self) -> bool {
        match &self.source {
            Source::File(p) => meta_path(p).exists(),
            Source::Tcp(_) => false,
        }
    }
}

impl std::fmt::Display for InputSpec {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match &self.source {
            Source::File(p) => write!(f, "{}", p.display())?,
            Source::Tcp(a) => write!(f, "tcp://{a}")?,
        }
        if let Some(l) = self.label {
            write!(f, "={l}")?;
        }
        Ok(())
    }
}

pub fn ingest_file(path: &Path, format: Option<Format>, label: Option<Label>) -> Result<Session> {
    let format = format
        .or_else(|| Format::from_path(path))
        .ok_or_else(|| Error::invalid(format!("cannot tell the format of {}", path.display())))?;
    let file = File::open(path).map_err(|e| Error::Io(format!("{}: {e}", path.display())))?;
    let records = match format {
        Format::Csv => read_csv(file)?,
        Format::Ndjson => read_ndjson(BufReader::new(file))?,
    };
    if records.is_empty() {
        return Err(Error::EmptySession);
    }
    let meta = read_meta(path)?;
    let duration = match &meta {
        Some(m) => m.duration,
        None => infer_duration(&records)?,
    };
    let label = label
        .or(meta.as_ref().map(|m| m.label))
        .unwrap_or(Label::Noise);
    let mut session = assemble_session(&records, duration, label)?;
    session.metadata = meta
        .map(|m| m.metadata)
        .unwrap_or_else(|| path.display().to_string());
    Ok(session)
}

/// Accepts one connection on `addr` and reads NDJSON records until the peer
/// closes the stream.
pub fn listen<A: ToSocketAddrs>(addr: A, label: Label) -> Result<Session> {
    let listener = TcpListener::bind(addr)?;
    listen_on(&listener, label)
}

pub fn listen_on(listener: &TcpListener, label: Label) -> Result<Session> {
    info!(
        "waiting for an NDJSON stream on {:?}",
        listener.local_addr()
    );
    let (stream, peer) = listener.accept()?;
    info!("receiving from {peer}");
    let records = read_ndjson(BufReader::new(stream))?;
    if records.is_empty() {
        return Err(Error::EmptySession);
    }
    let duration = infer_duration(&records)?;
    let mut session = assemble_session(&records, duration, label)?;
    session.metadata = format!("tcp stream from {peer}");
    Ok(session)
}

pub fn ingest(spec: &InputSpec, format: Option<Format>) -> Result<Session> {
    match &spec.source {
        Source::File(p) => ingest_file(p, format, spec.label),
        Source::Tcp(addr) => listen(addr.as_str(), spec.label.unwrap_or(Label::Noise)),
    }
}

pub fn write_session(session: &Session, path: &Path, format: Format) -> Result<()> {
    let file = std::io::BufWriter::new(File::create(path)?);
    match format {
        Format::Csv => write_csv(session, file)?,
        Format::Ndjson => write_ndjson(session, file)?,
    }
    let meta = SessionMeta {
        label: session.label,
        duration: session.duration,
        metadata: session.metadata.clone(),
    };
    let text = serde_json::to_string_pretty(&meta).map_err(|e| Error::Io(e.to_string()))?;
    std::fs::write(meta_path(path), text + "\n")?;
    Ok(())
}
