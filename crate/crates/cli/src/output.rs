use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use anyhow::{Context, Result};
use serde::Serialize;
use sha2::{Digest, Sha256};

use crate::config::Settings;

pub const SCHEMA_VERSION: &str = "1";

#[derive(Debug, Clone, Serialize)]
pub struct OutputFile {
    pub file: String,
    pub sha256: String,
}

/// Reproducibility record written next to the outputs.
#[derive(Debug, Clone, Serialize)]
pub struct RunManifest {
    pub schema_version: &'static str,
    pub command: String,
    pub campaign: Option<String>,
    pub config: Option<String>,
    pub out: String,
    pub seed: u64,
    pub jobs: Option<usize>,
    pub settings: Settings,
    pub outputs: Vec<OutputFile>,
}

/// Collects the files of one run; without a directory nothing is written.
pub struct Output {
    dir: Option<PathBuf>,
    files: Vec<OutputFile>,
}

pub fn sha256_hex(bytes: &[u8]) -> String {
    Sha256::digest(bytes).iter().fold(String::with_capacity(64), |mut s, b| {
        let _ = write!(s, "{b:02x}");
        s
    })
}

impl Output {
    pub fn new(dir: Option<&Path>) -> Result<Self> {
        if let Some(d) = dir {
            std::fs::create_dir_all(d).with_context(|| format!("creating {}", d.display()))?;
        }
        Ok(Output { dir: dir.map(Path::to_path_buf), files: Vec::new() })
    }

    pub fn dir(&self) -> Option<&Path> {
        self.dir.as_deref()
    }

    fn record(&mut self, name: &str, bytes: &[u8]) {
        self.files.push(OutputFile { file: name.into(), sha256: sha256_hex(bytes) });
    }

    pub fn write_bytes(&mut self, name: &str, bytes: &[u8]) -> Result<()> {
        if let Some(d) = &self.dir {
            let path = d.join(name);
            std::fs::write(&path, bytes).with_context(|| format!("writing {}", path.display()))?;
            self.record(name, bytes);
        }
        Ok(())
    }

    pub fn json<T: Serialize>(&mut self, name: &str, value: &T) -> Result<()> {
        let mut text = serde_json::to_string_pretty(value)?;
        text.push('\n');
        self.write_bytes(name, text.as_bytes())
    }

    pub fn csv(&mut self, name: &str, header: &[&str], rows: &[Vec<String>]) -> Result<()> {
        let mut text = header.join(",");
        text.push('\n');
        for row in rows {
            text.push_str(&row.join(","));
            text.push('\n');
        }
        self.write_bytes(name, text.as_bytes())
    }

    /// Registers a file produced by another writer.
    pub fn adopt(&mut self, name: &str) -> Result<()> {
        if let Some(d) = &self.dir {
            let bytes = std::fs::read(d.join(name))?;
            self.record(name, &bytes);
        }
        Ok(())
    }

    pub fn finish(self, command: &str, campaign: Option<&str>, config: Option<&Path>, jobs: Option<usize>, settings: &Settings) -> Result<()> {
        let Some(dir) = self.dir.clone() else {
            return Ok(());
        };
        let manifest = RunManifest {
            schema_version: SCHEMA_VERSION,
            command: command.into(),
            campaign: campaign.map(str::to_string),
            config: config.map(|p| p.display().to_string()),
            out: dir.display().to_string(),
            seed: settings.seed,
            jobs,
            settings: settings.clone(),
            outputs: self.files,
        };
        let mut text = serde_json::to_string_pretty(&manifest)?;
        text.push('\n');
        std::fs::write(dir.join("manifest.json"), text)?;
        Ok(())
    }
}

/// Shortest round-trip formatting for CSV cells.
pub fn cell(x: f64) -> String {
    if x.is_finite() {
        format!("{x:e}")
    } else if x.is_nan() {
        "nan".into()
    } else if x > 0.0 {
        "inf".into()
    } else {
        "-inf".into()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn digest_of_empty_input() {
        assert_eq!(sha256_hex(b""), "e3b0c44298fc1c149afbf4c8996fb92427ae41e4649b934ca495991b7852b855");
    }

    #[test]
    fn cells_round_trip() {
        for x in [0.1, 1.0 / 3.0, 2e-300, -7.5] {
            assert_eq!(cell(x).parse::<f64>().unwrap(), x);
        }
        assert_eq!(cell(f64::INFINITY), "inf");
    }
}
