//! On-disk dataset layout:
//!
//! ```text
//! <dir>/manifest.json            domain, channels, normalization, log, sample index
//! <dir>/samples/sample_<id>.csv  header `t,<channel…>`, one row per time step
//! <dir>/labels.csv               header `id,label`, rows in manifest order
//! ```
//!
//! Floats are written in Rust's shortest round-trip form, so a save/load
//! cycle is lossless.

use std::fs;
use std::path::{Path, PathBuf};

use dbacs_core::datasets::{DomainDataset, DomainTag, Normalization, PreprocessRecord, SeriesSample};
use serde::{Deserialize, Serialize};

use crate::error::{ToolError, ToolResult};

pub const MANIFEST: &str = "manifest.json";
pub const LABELS: &str = "labels.csv";
pub const SAMPLES_DIR: &str = "samples";
pub const FORMAT_VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SampleEntry {
    pub id: u64,
    /// Relative to the dataset directory.
    pub file: String,
    /// Time steps stored in the file.
    pub len: usize,
    /// Length before resampling.
    pub raw_len: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Manifest {
    pub format_version: u32,
    pub domain: DomainTag,
    pub channel_names: Vec<String>,
    pub normalization: Option<Normalization>,
    pub preprocessing_log: Vec<PreprocessRecord>,
    pub samples: Vec<SampleEntry>,
}

pub fn sample_file(id: u64) -> String {
    format!("{SAMPLES_DIR}/sample_{id}.csv")
}

fn write_file(path: &Path, contents: &[u8]) -> ToolResult<()> {
    if let Some(parent) = path.parent() {
        fs::create_dir_all(parent).map_err(|e| ToolError::io(parent, e))?;
    }
    fs::write(path, contents).map_err(|e| ToolError::io(path, e))
}

pub fn to_json_pretty<T: Serialize>(value: &T) -> String {
    let mut s = serde_json::to_string_pretty(value).expect("in-memory serialization cannot fail");
    s.push('\n');
    s
}

pub fn write_json<T: Serialize>(path: &Path, value: &T) -> ToolResult<()> {
    write_file(path, to_json_pretty(value).as_bytes())
}

pub fn read_json<T: for<'de> Deserialize<'de>>(path: &Path) -> ToolResult<T> {
    let text = fs::read_to_string(path).map_err(|e| ToolError::io(path, e))?;
    serde_json::from_str(&text).map_err(|e| ToolError::data_in(path, e))
}

fn sample_csv(sample: &SeriesSample, names: &[String]) -> String {
    let c = names.len();
    let mut out = String::with_capacity(sample.values.len() * 20);
    out.push('t');
    for n in names {
        out.push(',');
        out.push_str(n);
    }
    out.push('\n');
    for (t, row) in sample.values.chunks(c).enumerate() {
        out.push_str(&t.to_string());
        for v in row {
            out.push(',');
            out.push_str(&v.to_string());
        }
        out.push('\n');
    }
    out
}

/// Writes `ds` under `dir`, replacing any dataset previously stored there.
pub fn save_dataset(ds: &DomainDataset, dir: &Path) -> ToolResult<()> {
    let c = ds.channels();
    let samples_dir = dir.join(SAMPLES_DIR);
    if samples_dir.exists() {
        fs::remove_dir_all(&samples_dir).map_err(|e| ToolError::io(&samples_dir, e))?;
    }
    fs::create_dir_all(&samples_dir).map_err(|e| ToolError::io(&samples_dir, e))?;
    let mut entries = Vec::with_capacity(ds.len());
    let mut labels = String::from("id,label\n");
    for s in &ds.samples {
        let file = sample_file(s.id);
        write_file(&dir.join(&file), sample_csv(s, &ds.channel_names).as_bytes())?;
        entries.push(SampleEntry { id: s.id, file, len: s.len(c), raw_len: s.raw_len });
        labels.push_str(&format!("{},{}\n", s.id, s.label));
    }
    write_file(&dir.join(LABELS), labels.as_bytes())?;
    let manifest = Manifest {
        format_version: FORMAT_VERSION,
        domain: ds.tag,
        channel_names: ds.channel_names.clone(),
        normalization: ds.normalization().cloned(),
        preprocessing_log: ds.log().to_vec(),
        samples: entries,
    };
    write_json(&dir.join(MANIFEST), &manifest)
}

fn parse_f64(path: &Path, line: usize, field: &str) -> ToolResult<f64> {
    field.trim().parse::<f64>().map_err(|_| ToolError::data_in(path, format!("line {line}: '{field}' is not a number")))
}

fn read_records(path: &Path) -> ToolResult<(csv::StringRecord, Vec<csv::StringRecord>)> {
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(true)
        .flexible(true)
        .from_path(path)
        .map_err(|e| match e.kind() {
            csv::ErrorKind::Io(io) => ToolError::io(path, std::io::Error::new(io.kind(), io.to_string())),
            _ => ToolError::data_in(path, e),
        })?;
    let header = reader.headers().map_err(|e| ToolError::data_in(path, e))?.clone();
    let rows = reader.records().collect::<Result<Vec<_>, _>>().map_err(|e| ToolError::data_in(path, e))?;
    Ok((header, rows))
}

fn load_sample(dir: &Path, entry: &SampleEntry, names: &[String]) -> ToolResult<Vec<f64>> {
    let path: PathBuf = dir.join(&entry.file);
    if !path.exists() {
        return Err(ToolError::missing(&path, format!("sample {} listed in {MANIFEST}", entry.id)));
    }
    let (header, rows) = read_records(&path)?;
    let want = names.len() + 1;
    if header.len() != want || header.get(0) != Some("t") || header.iter().skip(1).ne(names.iter().map(String::as_str)) {
        return Err(ToolError::data_in(&path, format!("header has {} columns, expected t plus the {} manifest channels", header.len(), names.len())));
    }
    if rows.len() != entry.len {
        return Err(ToolError::data_in(&path, format!("{} rows, manifest says {}", rows.len(), entry.len)));
    }
    let mut values = Vec::with_capacity(entry.len * names.len());
    for (t, row) in rows.iter().enumerate() {
        let line = t + 2;
        if row.len() != want {
            return Err(ToolError::data_in(&path, format!("line {line}: {} columns, expected {want}", row.len())));
        }
        for field in row.iter().skip(1) {
            values.push(parse_f64(&path, line, field)?);
        }
    }
    Ok(values)
}

pub fn load_manifest(dir: &Path) -> ToolResult<Manifest> {
    let path = dir.join(MANIFEST);
    if !path.exists() {
        return Err(ToolError::missing(&path, "dataset manifest"));
    }
    let manifest: Manifest = read_json(&path)?;
    if manifest.format_version != FORMAT_VERSION {
        return Err(ToolError::data_in(&path, format!("format version {} (supported: {FORMAT_VERSION})", manifest.format_version)));
    }
    Ok(manifest)
}

pub fn load_dataset(dir: &Path) -> ToolResult<DomainDataset> {
    let manifest = load_manifest(dir)?;
    let labels_path = dir.join(LABELS);
    if !labels_path.exists() {
        return Err(ToolError::missing(&labels_path, "dataset labels"));
    }
    let (header, rows) = read_records(&labels_path)?;
    if header.iter().ne(["id", "label"]) {
        return Err(ToolError::data_in(&labels_path, "header must be id,label"));
    }
    if rows.len() != manifest.samples.len() {
        return Err(ToolError::data_in(&labels_path, format!("{} labels for {} samples", rows.len(), manifest.samples.len())));
    }
    let mut samples = Vec::with_capacity(rows.len());
    for (i, (entry, row)) in manifest.samples.iter().zip(&rows).enumerate() {
        let line = i + 2;
        if row.len() != 2 {
            return Err(ToolError::data_in(&labels_path, format!("line {line}: expected 2 columns")));
        }
        let id: u64 = row[0].trim().parse().map_err(|_| ToolError::data_in(&labels_path, format!("line {line}: bad id '{}'", &row[0])))?;
        if id != entry.id {
            return Err(ToolError::data_in(&labels_path, format!("line {line}: id {id} where the manifest lists {}", entry.id)));
        }
        let label = parse_f64(&labels_path, line, &row[1])?;
        let values = load_sample(dir, entry, &manifest.channel_names)?;
        samples.push(SeriesSample { id, values, label, raw_len: entry.raw_len });
    }
    let ds = DomainDataset::new(manifest.domain, manifest.channel_names, samples)
        .map_err(|e| ToolError::data_in(&dir.join(MANIFEST), e))?
        .with_log(manifest.preprocessing_log);
    if ds.normalization() != manifest.normalization.as_ref() {
        return Err(ToolError::data_in(&dir.join(MANIFEST), "normalization does not match the last preprocessing record"));
    }
    Ok(ds)
}
