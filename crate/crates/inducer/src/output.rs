//! Artifact files and the run manifest.

use std::io::Write;
use std::path::{Path, PathBuf};

use serde::Serialize;
use sha2::{Digest, Sha256};

/// Floats in CSV files: 17 significant digits, so values round-trip exactly.
pub fn fmt_f64(x: f64) -> String {
    if x.is_nan() {
        "NaN".into()
    } else if x.is_infinite() {
        if x > 0.0 {
            "inf".into()
        } else {
            "-inf".into()
        }
    } else {
        format!("{x:.16e}")
    }
}

pub fn fmt_opt(x: Option<f64>) -> String {
    x.map_or_else(String::new, fmt_f64)
}

pub fn sha256_hex(bytes: &[u8]) -> String {
    let d = Sha256::digest(bytes);
    d.iter().map(|b| format!("{b:02x}")).collect()
}

#[derive(Debug, Clone, Serialize)]
pub struct ArtifactRecord {
    pub name: String,
    pub sha256: String,
    pub bytes: usize,
}

/// Collects the files written by one run.
pub struct Artifacts {
    dir: PathBuf,
    written: Vec<ArtifactRecord>,
}

impl Artifacts {
    pub fn create(dir: &Path) -> std::io::Result<Self> {
        std::fs::create_dir_all(dir)?;
        Ok(Artifacts { dir: dir.to_path_buf(), written: Vec::new() })
    }

    pub fn dir(&self) -> &Path {
        &self.dir
    }

    pub fn records(&self) -> &[ArtifactRecord] {
        &self.written
    }

    pub fn write_bytes(&mut self, name: &str, bytes: &[u8]) -> std::io::Result<()> {
        std::fs::write(self.dir.join(name), bytes)?;
        self.written.push(ArtifactRecord { name: name.into(), sha256: sha256_hex(bytes), bytes: bytes.len() });
        Ok(())
    }

    pub fn write_csv<I>(&mut self, name: &str, header: &[&str], rows: I) -> std::io::Result<()>
    where
        I: IntoIterator<Item = Vec<String>>,
    {
        let mut w = csv::Writer::from_writer(Vec::new());
        w.write_record(header)?;
        for r in rows {
            w.write_record(&r)?;
        }
        let bytes = w.into_inner().map_err(|e| e.into_error())?;
        self.write_bytes(name, &bytes)
    }

    pub fn write_json<T: Serialize>(&mut self, name: &str, value: &T) -> std::io::Result<()> {
        let mut bytes = serde_json::to_vec_pretty(value)?;
        bytes.push(b'\n');
        self.write_bytes(name, &bytes)
    }

    /// One JSON document per line.
    pub fn write_jsonl<T: Serialize, I: IntoIterator<Item = T>>(
        &mut self,
        name: &str,
        items: I,
    ) -> std::io::Result<()> {
        let mut bytes = Vec::new();
        for it in items {
            serde_json::to_writer(&mut bytes, &it)?;
            bytes.push(b'\n');
        }
        self.write_bytes(name, &bytes)
    }

    pub fn write_text(&mut self, name: &str, text: &str) -> std::io::Result<()> {
        let mut bytes = Vec::new();
        writeln!(bytes, "{text}")?;
        self.write_bytes(name, &bytes)
    }
}

#[derive(Debug, Serialize)]
pub struct Manifest<'a> {
    pub subcommand: &'a str,
    pub config_sha256: String,
    pub config: &'a crate::config::RunConfig,
    pub seed: u64,
    pub workers: usize,
    pub versions: Versions,
    pub wall_time_s: f64,
    pub artifacts: &'a [ArtifactRecord],
}

#[derive(Debug, Serialize)]
pub struct Versions {
    pub inducer: &'static str,
    pub inducer_core: &'static str,
}

impl Versions {
    pub fn current() -> Self {
        Versions { inducer: env!("CARGO_PKG_VERSION"), inducer_core: inducer_core::VERSION }
    }
}
