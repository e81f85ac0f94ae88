//! Output files: binary grids with JSON sidecars, CSV tables, reports,
//! the run manifest and the summary renderer.

use std::collections::BTreeMap;
use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use anisoheat::EstimateReport;
use serde::{Deserialize, Serialize};
use serde_json::Value;
use sha2::{Digest, Sha256};

use crate::CliError;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Axis {
    pub name: String,
    pub extent: (f64, f64),
    pub count: usize,
}

/// Describes a row-major array of little-endian `f64` values.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Sidecar {
    pub file: String,
    pub dtype: String,
    pub order: String,
    pub axes: Vec<Axis>,
    pub quantity: String,
}

pub struct OutDir {
    pub dir: PathBuf,
    pub files: Vec<String>,
}

fn io(path: &Path, e: std::io::Error) -> CliError {
    CliError::Runtime(format!("{}: {e}", path.display()))
}

impl OutDir {
    pub fn create(dir: &Path) -> Result<Self, CliError> {
        fs::create_dir_all(dir).map_err(|e| io(dir, e))?;
        Ok(Self { dir: dir.to_path_buf(), files: Vec::new() })
    }

    fn write(&mut self, name: &str, bytes: &[u8]) -> Result<(), CliError> {
        let path = self.dir.join(name);
        fs::write(&path, bytes).map_err(|e| io(&path, e))?;
        if !self.files.iter().any(|f| f == name) {
            self.files.push(name.to_string());
        }
        Ok(())
    }

    pub fn json<T: Serialize>(&mut self, name: &str, value: &T) -> Result<(), CliError> {
        let mut text = serde_json::to_string_pretty(value).map_err(|e| CliError::Runtime(e.to_string()))?;
        text.push('\n');
        self.write(name, text.as_bytes())
    }

    pub fn csv(&mut self, name: &str, header: &[&str], rows: &[Vec<String>]) -> Result<(), CliError> {
        let mut text = header.join(",");
        text.push('\n');
        for r in rows {
            text.push_str(&r.join(","));
            text.push('\n');
        }
        self.write(name, text.as_bytes())
    }

    pub fn grid(&mut self, name: &str, values: &[f64], axes: Vec<Axis>, quantity: &str) -> Result<(), CliError> {
        let expected: usize = axes.iter().map(|a| a.count).product();
        if expected != values.len() {
            return Err(CliError::Runtime(format!("{name}: {} values for a shape of {expected}", values.len())));
        }
        let mut bytes = Vec::with_capacity(8 * values.len());
        for v in values {
            bytes.write_all(&v.to_le_bytes()).expect("writing to a vector");
        }
        self.write(name, &bytes)?;
        let sidecar = Sidecar {
            file: name.to_string(),
            dtype: "f64le".into(),
            order: "row-major".into(),
            axes,
            quantity: quantity.to_string(),
        };
        self.json(&format!("{name}.json"), &sidecar)
    }
}

pub fn sha256_hex(bytes: &[u8]) -> String {
    hex::encode(Sha256::digest(bytes))
}

pub fn file_checksum(path: &Path) -> Result<String, CliError> {
    Ok(sha256_hex(&fs::read(path).map_err(|e| io(path, e))?))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FileEntry {
    pub name: String,
    pub sha256: String,
    pub bytes: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunManifest {
    pub task: String,
    pub config_sha256: String,
    pub toolkit_version: String,
    pub master_seed: u64,
    pub workers: usize,
    /// Wall-clock seconds per stage.
    pub timings: BTreeMap<String, f64>,
    pub files: Vec<FileEntry>,
    pub pass: bool,
}

impl RunManifest {
    pub fn inventory(out: &OutDir) -> Result<Vec<FileEntry>, CliError> {
        let mut names = out.files.clone();
        names.sort();
        names
            .into_iter()
            .map(|name| {
                let path = out.dir.join(&name);
                let bytes = fs::metadata(&path).map_err(|e| io(&path, e))?.len();
                Ok(FileEntry { sha256: file_checksum(&path)?, name, bytes })
            })
            .collect()
    }
}

/// Every estimate report found in a report file: the object itself, its
/// `report` field, or the entries of its `reports` field.
fn extract(value: &Value) -> Option<Vec<EstimateReport>> {
    let one = |v: &Value| serde_json::from_value::<EstimateReport>(v.clone()).ok();
    if let Some(r) = one(value) {
        return Some(vec![r]);
    }
    if let Some(r) = value.get("report").and_then(one) {
        return Some(vec![r]);
    }
    value.get("reports").and_then(|v| v.as_array()).and_then(|a| a.iter().map(one).collect())
}

#[derive(Debug, Clone, PartialEq)]
pub struct SummaryRow {
    pub suite: String,
    pub metric: String,
    pub value: f64,
    pub threshold: Option<f64>,
    pub pass: bool,
}

/// Merges every `*_report.json` of `dir` into `summary.csv` and a plain-text
/// digest `summary.txt`; returns the rows and whether all passed.
pub fn report_render(dir: &Path) -> Result<(Vec<SummaryRow>, bool), CliError> {
    let mut paths: Vec<PathBuf> = fs::read_dir(dir)
        .map_err(|e| io(dir, e))?
        .filter_map(|e| e.ok().map(|e| e.path()))
        .filter(|p| p.file_name().and_then(|n| n.to_str()).is_some_and(|n| n.ends_with("_report.json")))
        .collect();
    paths.sort();
    let mut rows = Vec::new();
    for path in &paths {
        let name = path.file_name().and_then(|n| n.to_str()).unwrap_or_default();
        let suite = name.trim_end_matches("_report.json").to_string();
        let text = fs::read_to_string(path).map_err(|e| io(path, e))?;
        let value: Value = serde_json::from_str(&text).map_err(|e| CliError::Runtime(format!("malformed report file {name}: {e}")))?;
        let reports = extract(&value).ok_or_else(|| CliError::Runtime(format!("malformed report file {name}: no estimate report inside")))?;
        for r in reports {
            rows.push(SummaryRow {
                suite: suite.clone(),
                metric: r.name,
                value: r.sup,
                threshold: r.threshold,
                pass: r.pass,
            });
        }
    }
    let all_pass = rows.iter().all(|r| r.pass);
    let mut csv = String::from("suite,metric,value,threshold,pass\n");
    let mut digest = String::new();
    for r in &rows {
        let th = r.threshold.map(|t| format!("{t:e}")).unwrap_or_default();
        csv.push_str(&format!("{},{},{:e},{},{}\n", r.suite, r.metric, r.value, th, r.pass));
        digest.push_str(&format!("{} {}/{}\n", if r.pass { "PASS" } else { "FAIL" }, r.suite, r.metric));
    }
    digest.push_str(&format!("{} of {} checks passed\n", rows.iter().filter(|r| r.pass).count(), rows.len()));
    fs::write(dir.join("summary.csv"), csv).map_err(|e| io(dir, e))?;
    fs::write(dir.join("summary.txt"), digest).map_err(|e| io(dir, e))?;
    Ok((rows, all_pass))
}
