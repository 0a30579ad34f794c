//! Output directory: manifest, summary record, data files and plot scripts.

use std::fs::{self, File};
use std::io::{self, BufWriter, Write};
use std::path::{Path, PathBuf};

use serde::Serialize;
use serde_json::{json, Value};
use sha2::{Digest, Sha256};

use super::CliError;

pub const TOOL: &str = env!("CARGO_PKG_NAME");
pub const VERSION: &str = env!("CARGO_PKG_VERSION");

pub fn sha256_hex(bytes: &[u8]) -> String {
    Sha256::digest(bytes).iter().map(|b| format!("{b:02x}")).collect()
}

/// Files are only ever written through here, so the manifest can list them in order.
pub struct Artifacts {
    dir: PathBuf,
    command: String,
    config: Value,
    config_sha256: String,
    files: Vec<String>,
}

impl Artifacts {
    /// Creates the directory and writes an initial manifest echoing the resolved config.
    pub fn create<C: Serialize>(dir: &Path, command: &str, config: &C) -> Result<Self, CliError> {
        fs::create_dir_all(dir).map_err(|e| CliError::io(dir, e))?;
        let config = serde_json::to_value(config).expect("config records serialize");
        let canonical = serde_json::to_vec(&config).expect("json values serialize");
        let mut a = Self {
            dir: dir.to_path_buf(),
            command: command.to_string(),
            config,
            config_sha256: sha256_hex(&canonical),
            files: Vec::new(),
        };
        a.write_manifest()?;
        Ok(a)
    }

    pub fn dir(&self) -> &Path {
        &self.dir
    }

    /// Lists a file written outside [`Artifacts::write_with`].
    pub fn record(&mut self, name: &str) {
        if !self.files.iter().any(|n| n == name) {
            self.files.push(name.to_string());
        }
    }

    pub fn config_sha256(&self) -> &str {
        &self.config_sha256
    }

    /// `# key: value` header lines for CSV files.
    pub fn meta(&self) -> Vec<(&'static str, String)> {
        vec![
            ("tool", TOOL.to_string()),
            ("version", VERSION.to_string()),
            ("command", self.command.clone()),
            ("config_sha256", self.config_sha256.clone()),
        ]
    }

    pub fn write_with<F>(&mut self, name: &str, f: F) -> Result<PathBuf, CliError>
    where
        F: FnOnce(&mut BufWriter<File>) -> io::Result<()>,
    {
        let path = self.dir.join(name);
        let file = File::create(&path).map_err(|e| CliError::io(&path, e))?;
        let mut w = BufWriter::new(file);
        f(&mut w).and_then(|_| w.flush()).map_err(|e| CliError::io(&path, e))?;
        self.record(name);
        Ok(path)
    }

    pub fn write_json<T: Serialize>(&mut self, name: &str, value: &T) -> Result<PathBuf, CliError> {
        self.write_with(name, |w| {
            serde_json::to_writer_pretty(&mut *w, value).map_err(io::Error::other)?;
            writeln!(w)
        })
    }

    pub fn write_summary<T: Serialize>(&mut self, summary: &T) -> Result<PathBuf, CliError> {
        self.write_json("summary.json", summary)
    }

    fn write_manifest(&mut self) -> Result<(), CliError> {
        let manifest = json!({
            "tool": TOOL,
            "version": VERSION,
            "command": self.command,
            "config": self.config,
            "config_sha256": self.config_sha256,
            "outputs": self.files,
        });
        let path = self.dir.join("manifest.json");
        let text = serde_json::to_string_pretty(&manifest).expect("json values serialize") + "\n";
        fs::write(&path, text).map_err(|e| CliError::io(&path, e))
    }

    /// Rewrites the manifest with the final list of outputs.
    pub fn finish(mut self) -> Result<PathBuf, CliError> {
        self.write_manifest()?;
        Ok(self.dir)
    }
}
