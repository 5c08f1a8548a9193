//! File plumbing: JSON input with field locators, atomic output, run manifests.

use std::fs;
use std::path::{Path, PathBuf};
use std::time::Instant;

use anyhow::{anyhow, Context, Result};
use serde::de::DeserializeOwned;
use serde::Serialize;

/// Reads and deserializes a JSON file. Errors name the file, the field path
/// and the line/column of the problem.
pub fn read_json<T: DeserializeOwned>(path: &Path) -> Result<T> {
    let text = fs::read_to_string(path).with_context(|| format!("cannot read {}", path.display()))?;
    parse_json(&text).with_context(|| format!("malformed {}", path.display()))
}

pub fn parse_json<T: DeserializeOwned>(text: &str) -> Result<T> {
    let mut de = serde_json::Deserializer::from_str(text);
    serde_path_to_error::deserialize(&mut de).map_err(|e| {
        let path = e.path().to_string();
        // the inner message already ends with the line and column
        anyhow!("at `{path}`: {}", e.into_inner())
    })
}

/// Writes `bytes` to `path` through a sibling temporary file and a rename, so
/// readers never observe a half-written artifact.
pub fn write_atomic(path: &Path, bytes: &[u8]) -> Result<()> {
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        fs::create_dir_all(dir).with_context(|| format!("cannot create {}", dir.display()))?;
    }
    let mut tmp = path.as_os_str().to_owned();
    tmp.push(format!(".tmp{}", std::process::id()));
    let tmp = PathBuf::from(tmp);
    fs::write(&tmp, bytes).with_context(|| format!("cannot write {}", tmp.display()))?;
    fs::rename(&tmp, path).with_context(|| format!("cannot move {} into place", path.display()))
}

pub fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    let mut text = serde_json::to_string_pretty(value)?;
    text.push('\n');
    write_atomic(path, text.as_bytes())
}

/// Default location for an artifact: `$V2G_OUT_DIR/<name>`, else `./<name>`.
pub fn default_output(name: &str) -> PathBuf {
    std::env::var_os("V2G_OUT_DIR").map(PathBuf::from).unwrap_or_else(|| PathBuf::from(".")).join(name)
}

/// Provenance record written next to every artifact.
#[derive(Debug, Serialize)]
pub struct RunManifest {
    pub tool: &'static str,
    pub version: &'static str,
    /// Full argument vector of the run.
    pub command: Vec<String>,
    /// Resolved configuration, defaults included.
    pub config: serde_json::Value,
    pub seeds: Vec<u64>,
    pub artifacts: Vec<PathBuf>,
    pub wall_ms: u64,
}

impl RunManifest {
    pub fn new(config: impl Serialize, seeds: Vec<u64>, artifacts: Vec<PathBuf>, started: Instant) -> Result<Self> {
        Ok(RunManifest {
            tool: env!("CARGO_PKG_NAME"),
            version: env!("CARGO_PKG_VERSION"),
            command: std::env::args().collect(),
            config: serde_json::to_value(config)?,
            seeds,
            artifacts,
            wall_ms: started.elapsed().as_millis() as u64,
        })
    }

    /// Writes the manifest as `<artifact>.manifest.json`.
    pub fn write_beside(&self, artifact: &Path) -> Result<PathBuf> {
        let mut name = artifact.as_os_str().to_owned();
        name.push(".manifest.json");
        let path = PathBuf::from(name);
        write_json(&path, self)?;
        Ok(path)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[derive(Debug, serde::Deserialize)]
    struct Outer {
        #[allow(dead_code)]
        inner: Vec<Inner>,
    }

    #[derive(Debug, serde::Deserialize)]
    struct Inner {
        #[allow(dead_code)]
        value: f64,
    }

    #[test]
    fn parse_errors_carry_a_locator() {
        let err = parse_json::<Outer>(r#"{"inner": [{"value": 1}, {"value": "x"}]}"#).unwrap_err();
        let msg = err.to_string();
        assert!(msg.contains("inner[1].value"), "{msg}");
        assert!(msg.contains("line 1 column"), "{msg}");
    }
}
