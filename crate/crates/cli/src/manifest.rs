use std::collections::BTreeMap;
use std::fs::{self, File};
use std::io::{self, BufWriter, Write};
use std::path::{Path, PathBuf};
use std::time::Instant;

use gptunnel::SimConfig;
use serde::Serialize;
use sha2::{Digest, Sha256};

use crate::checks::DtHalving;

pub const MANIFEST_FILE: &str = "manifest.json";
pub const CONFIG_FILE: &str = "config.toml";

/// SHA-256 of the canonical TOML form of `config` followed by `extra`
/// (sweep parameters), as lowercase hex.
pub fn config_hash(config: &SimConfig, extra: &str) -> String {
    let mut h = Sha256::new();
    h.update(config.to_toml_string().as_bytes());
    h.update(extra.as_bytes());
    h.finalize().iter().map(|b| format!("{b:02x}")).collect()
}

#[derive(Debug, Clone, Serialize)]
pub struct SelfTestEntry {
    pub label: String,
    pub result: Option<DtHalving>,
}

#[derive(Debug, Clone, Serialize)]
pub struct RunManifest {
    pub command: String,
    pub config_hash: String,
    pub config: Option<SimConfig>,
    pub sweep: BTreeMap<String, Vec<f64>>,
    pub tool_version: String,
    pub duration_s: f64,
    pub files: Vec<String>,
    pub self_test: Vec<SelfTestEntry>,
    pub summary: BTreeMap<String, String>,
    pub exit_code: i32,
    pub error: Option<String>,
}

/// Collects what a command writes and emits the manifest at the end,
/// whatever the outcome.
pub struct Recorder {
    dir: PathBuf,
    started: Instant,
    pub manifest: RunManifest,
}

impl Recorder {
    pub fn new(dir: &Path, command: &str) -> io::Result<Self> {
        fs::create_dir_all(dir)?;
        Ok(Recorder {
            dir: dir.to_path_buf(),
            started: Instant::now(),
            manifest: RunManifest {
                command: command.to_string(),
                config_hash: String::new(),
                config: None,
                sweep: BTreeMap::new(),
                tool_version: env!("CARGO_PKG_VERSION").to_string(),
                duration_s: 0.0,
                files: Vec::new(),
                self_test: Vec::new(),
                summary: BTreeMap::new(),
                exit_code: 0,
                error: None,
            },
        })
    }

    pub fn hash(&self) -> &str {
        &self.manifest.config_hash
    }

    /// Records the resolved config and writes it next to the outputs.
    pub fn set_config(&mut self, config: &SimConfig, sweep: BTreeMap<String, Vec<f64>>) -> io::Result<()> {
        let extra = serde_json::to_string(&sweep).expect("sweep lists serialize");
        self.manifest.config_hash = config_hash(config, &extra);
        self.manifest.config = Some(*config);
        self.manifest.sweep = sweep;
        let mut out = self.create(CONFIG_FILE)?;
        out.write_all(config.to_toml_string().as_bytes())?;
        out.flush()
    }

    pub fn create(&mut self, name: &str) -> io::Result<BufWriter<File>> {
        let file = File::create(self.dir.join(name))?;
        if !self.manifest.files.iter().any(|f| f == name) {
            self.manifest.files.push(name.to_string());
        }
        Ok(BufWriter::new(file))
    }

    pub fn note(&mut self, key: &str, value: impl ToString) {
        self.manifest.summary.insert(key.to_string(), value.to_string());
    }

    /// Writes the manifest and returns `exit_code`.
    pub fn finish(mut self, exit_code: i32, error: Option<String>) -> i32 {
        self.manifest.duration_s = self.started.elapsed().as_secs_f64();
        self.manifest.exit_code = exit_code;
        self.manifest.error = error;
        self.manifest.files.push(MANIFEST_FILE.to_string());
        let written = File::create(self.dir.join(MANIFEST_FILE)).and_then(|f| {
            let mut w = BufWriter::new(f);
            serde_json::to_writer_pretty(&mut w, &self.manifest)?;
            writeln!(w)?;
            w.flush()
        });
        if let Err(e) = written {
            eprintln!("gp-tunnel: could not write manifest: {e}");
        }
        exit_code
    }
}
