//! JSON, JSONL and CSV files shared by every subcommand.

use std::fs::{self, File};
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};

use nahas_core::search::{CostAxis, Trial};
use serde::de::DeserializeOwned;
use serde::Serialize;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum IoError {
    #[error("{path}: {source}")]
    Io { path: PathBuf, source: std::io::Error },
    /// Malformed content; `location` is a field path or line number.
    #[error("{path}: {location}: {message}")]
    Schema { path: PathBuf, location: String, message: String },
    #[error("{0} already exists (use --force to overwrite)")]
    Exists(PathBuf),
    #[error("{path}: {source}")]
    Csv { path: PathBuf, source: csv::Error },
}

fn io_err(path: &Path) -> impl FnOnce(std::io::Error) -> IoError + '_ {
    move |source| IoError::Io { path: path.to_path_buf(), source }
}

/// Deserializes a JSON document, reporting the path of the offending field.
pub fn parse_json<T: DeserializeOwned>(text: &str, path: &Path) -> Result<T, IoError> {
    let de = &mut serde_json::Deserializer::from_str(text);
    serde_path_to_error::deserialize(de).map_err(|e| {
        let location = e.path().to_string();
        IoError::Schema {
            path: path.to_path_buf(),
            location: if location == "." { "<root>".into() } else { location },
            message: e.into_inner().to_string(),
        }
    })
}

pub fn read_json<T: DeserializeOwned>(path: &Path) -> Result<T, IoError> {
    let text = fs::read_to_string(path).map_err(io_err(path))?;
    parse_json(&text, path)
}

/// Refuses to clobber `path` unless `force`.
pub fn check_writable(path: &Path, force: bool) -> Result<(), IoError> {
    if !force && path.exists() {
        return Err(IoError::Exists(path.to_path_buf()));
    }
    Ok(())
}

fn create(path: &Path, force: bool) -> Result<BufWriter<File>, IoError> {
    check_writable(path, force)?;
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        fs::create_dir_all(dir).map_err(io_err(dir))?;
    }
    Ok(BufWriter::new(File::create(path).map_err(io_err(path))?))
}

pub fn write_json<T: Serialize + ?Sized>(path: &Path, value: &T, force: bool) -> Result<(), IoError> {
    let mut w = create(path, force)?;
    serde_json::to_writer_pretty(&mut w, value).map_err(|e| io_err(path)(e.into()))?;
    w.write_all(b"\n").and_then(|_| w.flush()).map_err(io_err(path))
}

/// One value per line.
pub struct JsonlWriter {
    path: PathBuf,
    inner: BufWriter<File>,
}

impl JsonlWriter {
    pub fn create(path: &Path, force: bool) -> Result<Self, IoError> {
        Ok(JsonlWriter { path: path.to_path_buf(), inner: create(path, force)? })
    }

    pub fn write<T: Serialize>(&mut self, value: &T) -> Result<(), IoError> {
        let path = &self.path;
        serde_json::to_writer(&mut self.inner, value).map_err(|e| io_err(path)(e.into()))?;
        self.inner.write_all(b"\n").map_err(io_err(path))
    }

    pub fn finish(mut self) -> Result<(), IoError> {
        self.inner.flush().map_err(io_err(&self.path))
    }
}

pub fn write_jsonl<'a, T: Serialize + 'a>(
    path: &Path,
    items: impl IntoIterator<Item = &'a T>,
    force: bool,
) -> Result<(), IoError> {
    let mut w = JsonlWriter::create(path, force)?;
    for item in items {
        w.write(item)?;
    }
    w.finish()
}

/// Reads a JSONL file; blank lines are skipped, errors name the line.
pub fn read_jsonl<T: DeserializeOwned>(path: &Path) -> Result<Vec<T>, IoError> {
    let file = File::open(path).map_err(io_err(path))?;
    let mut out = Vec::new();
    for (i, line) in BufReader::new(file).lines().enumerate() {
        let line = line.map_err(io_err(path))?;
        if line.trim().is_empty() {
            continue;
        }
        let value = parse_json(&line, path).map_err(|e| match e {
            IoError::Schema { path, location, message } => {
                IoError::Schema { path, location: format!("line {}: {location}", i + 1), message }
            }
            other => other,
        })?;
        out.push(value);
    }
    Ok(out)
}

#[derive(Debug, Serialize)]
struct FrontierRow<'a> {
    trial_id: u64,
    phase: Option<u8>,
    accuracy: Option<f64>,
    latency_ms: Option<f64>,
    energy_mj: Option<f64>,
    area: f64,
    reward: f64,
    arch_decisions: String,
    pes_in_x_dimension: u32,
    pes_in_y_dimension: u32,
    simd_units: u32,
    compute_lanes: u32,
    local_memory_mb: f64,
    register_file_kb: u32,
    io_bandwidth_gbps: f64,
    evaluator_kind: &'a str,
}

/// Plot-ready frontier: one row per trial in frontier order.
pub fn write_frontier_csv(path: &Path, frontier: &[&Trial], force: bool) -> Result<(), IoError> {
    let csv_err = |source| IoError::Csv { path: path.to_path_buf(), source };
    let mut w = csv::Writer::from_writer(create(path, force)?);
    for t in frontier {
        let c = &t.config;
        w.serialize(FrontierRow {
            trial_id: t.trial_id,
            phase: t.phase,
            accuracy: t.eval.accuracy,
            latency_ms: t.eval.latency_ms,
            energy_mj: t.eval.energy_mj,
            area: t.eval.area,
            reward: t.reward,
            arch_decisions: t.decisions.arch.as_slice().iter().map(|d| d.to_string()).collect::<Vec<_>>().join(" "),
            pes_in_x_dimension: c.pe_x,
            pes_in_y_dimension: c.pe_y,
            simd_units: c.simd_units,
            compute_lanes: c.compute_lanes,
            local_memory_mb: c.local_memory_mb,
            register_file_kb: c.register_file_kb,
            io_bandwidth_gbps: c.io_bandwidth,
            evaluator_kind: match t.evaluator_kind {
                nahas_core::oracle::EvaluatorKind::Simulator => "simulator",
                nahas_core::oracle::EvaluatorKind::Surrogate => "surrogate",
            },
        })
        .map_err(csv_err)?;
    }
    w.flush().map_err(io_err(path))
}

pub fn axis_name(axis: CostAxis) -> &'static str {
    match axis {
        CostAxis::Latency => "latency",
        CostAxis::Energy => "energy",
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[derive(Debug, serde::Deserialize)]
    #[serde(deny_unknown_fields)]
    #[allow(dead_code)]
    struct Outer {
        inner: Inner,
    }

    #[derive(Debug, serde::Deserialize)]
    #[allow(dead_code)]
    struct Inner {
        count: u32,
    }

    #[test]
    fn schema_errors_carry_field_paths() {
        let err = parse_json::<Outer>(r#"{"inner": {"count": "x"}}"#, Path::new("c.json")).unwrap_err();
        assert!(err.to_string().contains("inner.count"), "{err}");
    }

    #[test]
    fn jsonl_round_trip_and_overwrite_guard() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("x.jsonl");
        write_jsonl(&p, &[1.5f64, 2.0, 1e-300], false).unwrap();
        assert_eq!(read_jsonl::<f64>(&p).unwrap(), vec![1.5, 2.0, 1e-300]);
        assert!(matches!(write_jsonl(&p, &[1.0f64], false), Err(IoError::Exists(_))));
        write_jsonl(&p, &[1.0f64], true).unwrap();
        std::fs::write(&p, "1.0\n\n{oops}\n").unwrap();
        let err = read_jsonl::<f64>(&p).unwrap_err();
        assert!(err.to_string().contains("line 3"), "{err}");
    }
}
