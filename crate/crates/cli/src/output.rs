use serde::Serialize;
use sha2::{Digest, Sha256};
use std::fs::File;
use std::io::{self, BufWriter, Write};
use std::path::{Path, PathBuf};

use crate::CliError;

/// Output directory plus the list of files written so far.
pub struct Outputs {
    dir: PathBuf,
    files: Vec<OutputFile>,
}

#[derive(Debug, Clone, Serialize)]
pub struct OutputFile {
    pub name: String,
    pub sha256: String,
}

pub fn hex_digest(bytes: &[u8]) -> String {
    Sha256::digest(bytes).iter().map(|b| format!("{b:02x}")).collect()
}

impl Outputs {
    pub fn new(dir: &Path) -> Result<Self, CliError> {
        std::fs::create_dir_all(dir).map_err(|e| CliError::Io(format!("{}: {e}", dir.display())))?;
        Ok(Self {
            dir: dir.to_path_buf(),
            files: Vec::new(),
        })
    }

    pub fn files(&self) -> &[OutputFile] {
        &self.files
    }

    fn record(&mut self, name: &str, bytes: &[u8]) -> Result<(), CliError> {
        let path = self.dir.join(name);
        let io_err = |e: io::Error| CliError::Io(format!("{}: {e}", path.display()));
        let mut f = BufWriter::new(File::create(&path).map_err(io_err)?);
        f.write_all(bytes).map_err(io_err)?;
        f.flush().map_err(io_err)?;
        self.files.push(OutputFile {
            name: name.to_string(),
            sha256: hex_digest(bytes),
        });
        Ok(())
    }

    /// Writes a file produced by `body`.
    pub fn write<F>(&mut self, name: &str, body: F) -> Result<(), CliError>
    where
        F: FnOnce(&mut Vec<u8>) -> io::Result<()>,
    {
        let mut buf = Vec::new();
        body(&mut buf).map_err(|e| CliError::Io(format!("{name}: {e}")))?;
        self.record(name, &buf)
    }

    pub fn json<T: Serialize>(&mut self, name: &str, value: &T) -> Result<(), CliError> {
        let mut text = serde_json::to_string_pretty(value).map_err(|e| CliError::Io(format!("{name}: {e}")))?;
        text.push('\n');
        self.record(name, text.as_bytes())
    }

    pub fn text(&mut self, name: &str, text: &str) -> Result<(), CliError> {
        self.record(name, text.as_bytes())
    }
}

/// Everything needed to regenerate the outputs of a run.
#[derive(Debug, Serialize)]
pub struct RunManifest {
    pub tool: &'static str,
    pub version: &'static str,
    pub preset: String,
    pub seed: u64,
    pub mode: soen_core::network::Mode,
    pub t_end: f64,
    /// SHA-256 of `config.toml`, the fully resolved configuration.
    pub config_sha256: String,
    pub wall_time_s: f64,
    pub outputs: Vec<OutputFile>,
}
