use std::fs;
use std::path::{Path, PathBuf};
use std::time::Instant;

use anyhow::{Context, Result};
use serde::Serialize;
use sha2::{Digest, Sha256};

use crate::config::RunConfig;

/// Version of every CSV and JSON layout written by this tool.
pub const SCHEMA_VERSION: u32 = 1;

#[derive(Debug, Clone, Serialize)]
pub struct Artifact {
    pub file: String,
    pub sha256: String,
    pub bytes: usize,
}

#[derive(Debug, Clone, Serialize)]
pub struct StreamRecord {
    pub label: String,
    pub seed: u64,
    pub first_stream: u64,
    pub streams: u64,
}

#[derive(Debug, Serialize)]
struct Manifest<'a> {
    schema_version: u32,
    tool: &'static str,
    tool_version: &'static str,
    command: &'a str,
    config: &'a RunConfig,
    streams: &'a [StreamRecord],
    wall_clock_seconds: f64,
    artifacts: &'a [Artifact],
}

/// Collects output files for one command and writes the manifest last.
pub struct Outputs {
    dir: PathBuf,
    command: &'static str,
    started: Instant,
    artifacts: Vec<Artifact>,
    streams: Vec<StreamRecord>,
}

/// Shortest round-tripping decimal, locale-free; scientific notation
/// outside `[1e-4, 1e15)`.
pub fn num(x: f64) -> String {
    let a = x.abs();
    if a == 0.0 || !a.is_finite() || (1e-4..1e15).contains(&a) {
        x.to_string()
    } else {
        format!("{x:e}")
    }
}

pub fn opt(x: Option<f64>) -> String {
    x.map(num).unwrap_or_default()
}

impl Outputs {
    pub fn new(dir: &Path, command: &'static str) -> Result<Self> {
        fs::create_dir_all(dir).with_context(|| format!("creating {}", dir.display()))?;
        Ok(Outputs {
            dir: dir.to_path_buf(),
            command,
            started: Instant::now(),
            artifacts: Vec::new(),
            streams: Vec::new(),
        })
    }

    pub fn record_streams(&mut self, label: impl Into<String>, seed: u64, streams: u64) {
        self.streams.push(StreamRecord {
            label: label.into(),
            seed,
            first_stream: 0,
            streams,
        });
    }

    fn write(&mut self, name: &str, bytes: Vec<u8>) -> Result<PathBuf> {
        let path = self.dir.join(name);
        fs::write(&path, &bytes).with_context(|| format!("writing {}", path.display()))?;
        self.artifacts.push(Artifact {
            file: name.to_string(),
            sha256: hex::encode(Sha256::digest(&bytes)),
            bytes: bytes.len(),
        });
        Ok(path)
    }

    /// A CSV file whose first line is `# schema: evograph.<kind>/<version>`.
    pub fn csv<I>(&mut self, name: &str, kind: &str, header: &[&str], rows: I) -> Result<PathBuf>
    where
        I: IntoIterator<Item = Vec<String>>,
    {
        let mut buf = format!("# schema: evograph.{kind}/{SCHEMA_VERSION}\n").into_bytes();
        {
            let mut w = csv::WriterBuilder::new()
                .terminator(csv::Terminator::Any(b'\n'))
                .from_writer(&mut buf);
            w.write_record(header)?;
            for row in rows {
                w.write_record(&row)?;
            }
            w.flush()?;
        }
        self.write(name, buf)
    }

    pub fn json<T: Serialize>(&mut self, name: &str, kind: &str, value: &T) -> Result<PathBuf> {
        #[derive(Serialize)]
        struct Versioned<'a, T> {
            schema: String,
            #[serde(flatten)]
            body: &'a T,
        }
        let doc = Versioned {
            schema: format!("evograph.{kind}/{SCHEMA_VERSION}"),
            body: value,
        };
        let mut bytes = serde_json::to_vec_pretty(&doc)?;
        bytes.push(b'\n');
        self.write(name, bytes)
    }

    pub fn raw(&mut self, name: &str, bytes: Vec<u8>) -> Result<PathBuf> {
        self.write(name, bytes)
    }

    pub fn finish(self, config: &RunConfig) -> Result<PathBuf> {
        let manifest = Manifest {
            schema_version: SCHEMA_VERSION,
            tool: env!("CARGO_PKG_NAME"),
            tool_version: env!("CARGO_PKG_VERSION"),
            command: self.command,
            config,
            streams: &self.streams,
            wall_clock_seconds: self.started.elapsed().as_secs_f64(),
            artifacts: &self.artifacts,
        };
        let path = self.dir.join("manifest.json");
        let mut bytes = serde_json::to_vec_pretty(&manifest)?;
        bytes.push(b'\n');
        fs::write(&path, bytes).with_context(|| format!("writing {}", path.display()))?;
        Ok(path)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn csv_layout() {
        let dir = std::env::temp_dir().join(format!("evograph-out-test-{}", std::process::id()));
        let mut o = Outputs::new(&dir, "test").unwrap();
        let path = o
            .csv("x.csv", "demo", &["k", "v"], vec![vec!["1".into(), num(0.5)]])
            .unwrap();
        let text = fs::read_to_string(path).unwrap();
        assert_eq!(text, "# schema: evograph.demo/1\nk,v\n1,0.5\n");
        assert_eq!(o.artifacts[0].sha256.len(), 64);
        assert_eq!(num(1.5e-16), "1.5e-16");
        assert_eq!(num(-0.25), "-0.25");
        fs::remove_dir_all(dir).unwrap();
    }
}
