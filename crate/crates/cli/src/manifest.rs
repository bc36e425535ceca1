use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use serde::Serialize;
use sha2::{Digest, Sha256};

use crate::config::ExperimentConfig;
use crate::CliError;

#[derive(Debug, Serialize)]
struct Entry {
    path: String,
    sha256: String,
    bytes: u64,
    /// Key into `configs`: the config file that generated this file.
    config: String,
}

#[derive(Debug, Serialize)]
struct Document<'a> {
    command: &'a str,
    configs: &'a BTreeMap<String, serde_json::Value>,
    files: &'a [Entry],
}

/// Every file written under one output root, hashed after it is final.
#[derive(Debug)]
pub struct Manifest {
    root: PathBuf,
    command: String,
    configs: BTreeMap<String, serde_json::Value>,
    files: Vec<Entry>,
}

pub const MANIFEST_NAME: &str = "manifest.json";

pub fn sha256_hex(bytes: &[u8]) -> String {
    Sha256::digest(bytes).iter().map(|b| format!("{b:02x}")).collect()
}

impl Manifest {
    pub fn new(root: &Path, command: &str) -> Result<Self, CliError> {
        std::fs::create_dir_all(root).map_err(|e| CliError::io(root, e))?;
        Ok(Self {
            root: root.to_path_buf(),
            command: command.to_string(),
            configs: BTreeMap::new(),
            files: Vec::new(),
        })
    }

    /// Writes `<subdir>/config.toml` and registers it as a generating config;
    /// returns its key.
    pub fn add_config(&mut self, subdir: &str, config: &ExperimentConfig) -> Result<String, CliError> {
        let rel = if subdir.is_empty() { "config.toml".to_string() } else { format!("{subdir}/config.toml") };
        let path = self.root.join(&rel);
        if let Some(parent) = path.parent() {
            std::fs::create_dir_all(parent).map_err(|e| CliError::io(parent, e))?;
        }
        std::fs::write(&path, config.to_toml()).map_err(|e| CliError::io(&path, e))?;
        let value = serde_json::to_value(config).map_err(|e| CliError::Config(e.to_string()))?;
        self.configs.insert(rel.clone(), value);
        self.add_file(&path, &rel)?;
        Ok(rel)
    }

    pub fn add_file(&mut self, path: &Path, config: &str) -> Result<(), CliError> {
        let bytes = std::fs::read(path).map_err(|e| CliError::io(path, e))?;
        let rel = path.strip_prefix(&self.root).unwrap_or(path);
        let rel = rel.components().map(|c| c.as_os_str().to_string_lossy()).collect::<Vec<_>>().join("/");
        self.files.retain(|f| f.path != rel);
        self.files.push(Entry {
            path: rel,
            sha256: sha256_hex(&bytes),
            bytes: bytes.len() as u64,
            config: config.to_string(),
        });
        Ok(())
    }

    pub fn add_files(&mut self, paths: &[PathBuf], config: &str) -> Result<(), CliError> {
        paths.iter().try_for_each(|p| self.add_file(p, config))
    }

    /// Writes `manifest.json` (files sorted by path) and returns its path.
    pub fn finish(mut self) -> Result<PathBuf, CliError> {
        self.files.sort_by(|a, b| a.path.cmp(&b.path));
        let doc = Document {
            command: &self.command,
            configs: &self.configs,
            files: &self.files,
        };
        let path = self.root.join(MANIFEST_NAME);
        let text = serde_json::to_string_pretty(&doc).map_err(|e| CliError::Config(e.to_string()))?;
        std::fs::write(&path, text).map_err(|e| CliError::io(&path, e))?;
        Ok(path)
    }
}
