use std::fs::File;
use std::io::{BufRead, BufReader, Read, Write};
use std::path::{Path, PathBuf};

use chrono::NaiveDateTime;
use flate2::read::MultiGzDecoder;

use super::Normalizer;
use crate::{Error, Result};

/// temperature, humidity, light, voltage
pub const N_FEATURES: usize = 4;

const TIME_FORMAT: &str = "%Y-%m-%d %H:%M:%S%.f";
const CACHE_MAGIC: &[u8; 4] = b"AFDS";
const CACHE_VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq)]
pub struct SensorRecord {
    /// Seconds since the Unix epoch.
    pub timestamp: f64,
    /// Per-mote sequence number from the trace.
    pub epoch: u64,
    pub mote_id: usize,
    pub features: [f64; N_FEATURES],
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct ParseOutcome {
    pub records: Vec<SensorRecord>,
    pub skipped: usize,
}

fn parse_line(line: &str) -> Option<SensorRecord> {
    let fields: Vec<&str> = line.split_whitespace().collect();
    if fields.len() != 8 {
        return None;
    }
    let stamp = NaiveDateTime::parse_from_str(&format!("{} {}", fields[0], fields[1]), TIME_FORMAT).ok()?;
    let timestamp = stamp.and_utc().timestamp_micros() as f64 * 1e-6;
    let epoch = fields[2].parse().ok()?;
    let mote_id: usize = fields[3].parse().ok()?;
    if mote_id == 0 {
        return None;
    }
    let mut features = [0.0; N_FEATURES];
    for (f, s) in features.iter_mut().zip(&fields[4..]) {
        let v: f64 = s.parse().ok()?;
        if !v.is_finite() {
            return None;
        }
        *f = v;
    }
    Some(SensorRecord { timestamp, epoch, mote_id, features })
}

/// Parses `date time epoch mote temperature humidity light voltage` lines.
/// Blank lines are ignored; anything else that does not parse is counted in
/// `skipped`.
pub fn parse_trace<R: BufRead>(reader: R) -> Result<ParseOutcome> {
    let mut out = ParseOutcome::default();
    for line in reader.lines() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        match parse_line(&line) {
            Some(r) => out.records.push(r),
            None => out.skipped += 1,
        }
    }
    Ok(out)
}

/// Inverse of the line parser, up to float formatting.
pub fn format_record(r: &SensorRecord) -> String {
    let micros = (r.timestamp * 1e6).round() as i64;
    let stamp = chrono::DateTime::from_timestamp_micros(micros).map(|t| t.naive_utc()).unwrap_or_default();
    let [t, h, l, v] = r.features;
    format!("{} {} {} {t} {h} {l} {v}", stamp.format(TIME_FORMAT), r.epoch, r.mote_id)
}

/// Reads a trace file, transparently decompressing gzip.
pub fn read_trace(path: impl AsRef<Path>) -> Result<ParseOutcome> {
    let path = path.as_ref();
    let mut file = File::open(path).map_err(|e| match e.kind() {
        std::io::ErrorKind::NotFound => Error::DatasetMissing(path.display().to_string()),
        _ => Error::Io(e),
    })?;
    let mut magic = [0u8; 2];
    let n = file.read(&mut magic)?;
    let file = File::open(path)?;
    if n == 2 && magic == [0x1f, 0x8b] {
        parse_trace(BufReader::new(MultiGzDecoder::new(file)))
    } else {
        parse_trace(BufReader::new(file))
    }
}

/// Normalized records plus the statistics needed to undo the normalization.
pub fn write_cache(path: impl AsRef<Path>, normalizer: &Normalizer, records: &[SensorRecord]) -> Result<()> {
    let mut buf = Vec::with_capacity(32 + records.len() * 8 * (N_FEATURES + 3));
    buf.extend_from_slice(CACHE_MAGIC);
    buf.extend_from_slice(&CACHE_VERSION.to_le_bytes());
    buf.extend_from_slice(&(records.len() as u64).to_le_bytes());
    for v in normalizer.mean.iter().chain(&normalizer.std) {
        buf.extend_from_slice(&v.to_le_bytes());
    }
    for r in records {
        let z = normalizer.normalize(&r.features);
        for v in [r.timestamp, r.epoch as f64, r.mote_id as f64].iter().chain(&z) {
            buf.extend_from_slice(&v.to_le_bytes());
        }
    }
    File::create(path)?.write_all(&buf)?;
    Ok(())
}

/// Returns the stored normalizer and the records in raw units.
pub fn read_cache(path: impl AsRef<Path>) -> Result<(Normalizer, Vec<SensorRecord>)> {
    let mut bytes = Vec::new();
    File::open(path)?.read_to_end(&mut bytes)?;
    let bad = |m: &str| Error::Checkpoint(format!("dataset cache: {m}"));
    if bytes.len() < 16 || &bytes[..4] != CACHE_MAGIC {
        return Err(bad("bad magic"));
    }
    if u32::from_le_bytes(bytes[4..8].try_into().unwrap()) != CACHE_VERSION {
        return Err(bad("unsupported version"));
    }
    let n = u64::from_le_bytes(bytes[8..16].try_into().unwrap()) as usize;
    let row = N_FEATURES + 3;
    let expected = 16 + 8 * (2 * N_FEATURES + n * row);
    if bytes.len() != expected {
        return Err(bad("truncated"));
    }
    let vals: Vec<f64> = bytes[16..].chunks_exact(8).map(|c| f64::from_le_bytes(c.try_into().unwrap())).collect();
    let normalizer = Normalizer { mean: vals[..N_FEATURES].to_vec(), std: vals[N_FEATURES..2 * N_FEATURES].to_vec() };
    let records = vals[2 * N_FEATURES..]
        .chunks_exact(row)
        .map(|c| {
            let raw = normalizer.denormalize(&c[3..]);
            SensorRecord {
                timestamp: c[0],
                epoch: c[1] as u64,
                mote_id: c[2] as usize,
                features: raw.try_into().unwrap(),
            }
        })
        .collect();
    Ok((normalizer, records))
}

fn cache_path(path: &Path) -> PathBuf {
    let mut name = path.file_name().unwrap_or_default().to_os_string();
    name.push(".afds");
    path.with_file_name(name)
}

/// Loads a trace, preferring a `<file>.afds` cache next to it when that cache
/// is at least as new as the trace. A fresh cache is written after parsing.
pub fn load_records(path: impl AsRef<Path>) -> Result<ParseOutcome> {
    let path = path.as_ref();
    if !path.exists() {
        return Err(Error::DatasetMissing(path.display().to_string()));
    }
    let cache = cache_path(path);
    let fresh = match (cache.metadata().and_then(|m| m.modified()), path.metadata().and_then(|m| m.modified())) {
        (Ok(c), Ok(t)) => c >= t,
        _ => false,
    };
    if fresh {
        if let Ok((_, records)) = read_cache(&cache) {
            return Ok(ParseOutcome { records, skipped: 0 });
        }
    }
    let outcome = read_trace(path)?;
    if !outcome.records.is_empty() {
        let rows: Vec<Vec<f64>> = outcome.records.iter().map(|r| r.features.to_vec()).collect();
        // a read-only dataset directory just means no cache
        let _ = write_cache(&cache, &Normalizer::fit(&rows)?, &outcome.records);
    }
    Ok(outcome)
}
