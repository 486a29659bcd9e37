use std::fs;
use std::path::{Path, PathBuf};

use anyhow::{Context, Result};
use serde::Serialize;
use serde_json::{json, Value};
use sha2::{Digest, Sha256};

#[derive(Debug, Clone, Copy, PartialEq, Eq, clap::ValueEnum)]
pub enum Format {
    Csv,
    Json,
}

pub fn sha256_hex(bytes: &[u8]) -> String {
    hex::encode(Sha256::digest(bytes))
}

/// Provenance written into every artifact. Contains no timestamps, so
/// identical runs produce identical files.
#[derive(Debug, Clone, Serialize)]
pub struct Metadata {
    pub tool: String,
    pub version: String,
    pub command: String,
    pub seed: u64,
    pub config_sha256: String,
    pub inputs: Vec<(String, String)>,
}

impl Metadata {
    /// `config` is the effective configuration; `inputs` are
    /// `(role, content hash)` pairs that also feed the config hash.
    pub fn new(command: &str, seed: u64, config: &Value, inputs: Vec<(String, String)>) -> Self {
        let canonical = json!({ "command": command, "seed": seed, "config": config, "inputs": inputs });
        Self {
            tool: env!("CARGO_PKG_NAME").to_string(),
            version: env!("CARGO_PKG_VERSION").to_string(),
            command: command.to_string(),
            seed,
            config_sha256: sha256_hex(canonical.to_string().as_bytes()),
            inputs,
        }
    }

    fn comment_lines(&self) -> String {
        let mut s = format!(
            "# tool: {} {}\n# command: {}\n# seed: {}\n# config_sha256: {}\n",
            self.tool, self.version, self.command, self.seed, self.config_sha256
        );
        for (role, hash) in &self.inputs {
            s.push_str(&format!("# input {role}: sha256 {hash}\n"));
        }
        s
    }

    fn json(&self) -> Value {
        json!({
            "tool": self.tool,
            "version": self.version,
            "command": self.command,
            "seed": self.seed,
            "config_sha256": self.config_sha256,
            "inputs": self.inputs.iter().map(|(r, h)| json!({"role": r, "sha256": h})).collect::<Vec<_>>(),
        })
    }
}

pub struct OutDir {
    pub dir: PathBuf,
}

impl OutDir {
    pub fn new(dir: &Path) -> Result<Self> {
        fs::create_dir_all(dir).with_context(|| format!("creating output directory {}", dir.display()))?;
        Ok(Self { dir: dir.to_path_buf() })
    }

    fn write(&self, name: &str, bytes: &[u8]) -> Result<PathBuf> {
        let path = self.dir.join(name);
        fs::write(&path, bytes).with_context(|| format!("writing {}", path.display()))?;
        log::info!("wrote {}", path.display());
        Ok(path)
    }

    /// Writes CSV produced by `body` after the metadata comment block.
    pub fn csv<F>(&self, stem: &str, meta: &Metadata, body: F) -> Result<PathBuf>
    where
        F: FnOnce(&mut Vec<u8>) -> Result<()>,
    {
        let mut buf = meta.comment_lines().into_bytes();
        body(&mut buf)?;
        self.write(&format!("{stem}.csv"), &buf)
    }

    /// Writes `{"metadata": ..., <payload fields>}`.
    pub fn json<T: Serialize>(&self, stem: &str, meta: &Metadata, payload: &T) -> Result<PathBuf> {
        let mut obj = serde_json::Map::new();
        obj.insert("metadata".into(), meta.json());
        match serde_json::to_value(payload)? {
            Value::Object(fields) => obj.extend(fields),
            other => {
                obj.insert("data".into(), other);
            }
        }
        let mut text = serde_json::to_string_pretty(&Value::Object(obj))?;
        text.push('\n');
        self.write(&format!("{stem}.json"), text.as_bytes())
    }

    /// Writes one artifact in the requested format: CSV via `csv_body`, JSON
    /// by serialising `payload` under the key `stem`.
    pub fn artifact<T, F>(&self, stem: &str, format: Format, meta: &Metadata, payload: &T, csv_body: F) -> Result<PathBuf>
    where
        T: Serialize,
        F: FnOnce(&mut Vec<u8>) -> Result<()>,
    {
        match format {
            Format::Csv => self.csv(stem, meta, csv_body),
            Format::Json => self.json(stem, meta, &json!({ stem: payload })),
        }
    }
}

pub fn write_rows(buf: &mut Vec<u8>, header: &[&str], rows: impl IntoIterator<Item = Vec<String>>) -> Result<()> {
    let mut w = csv::Writer::from_writer(buf);
    w.write_record(header)?;
    for r in rows {
        w.write_record(&r)?;
    }
    w.flush()?;
    Ok(())
}

pub fn opt(v: Option<f64>) -> String {
    v.map(|x| x.to_string()).unwrap_or_default()
}
