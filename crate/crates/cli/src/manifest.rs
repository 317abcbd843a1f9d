use std::path::{Path, PathBuf};

use serde::Deserialize;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum ManifestError {
    #[error("cannot read manifest {path}: {source}")]
    Io { path: PathBuf, source: std::io::Error },
    #[error("invalid manifest {path}: {source}")]
    Toml { path: PathBuf, source: toml::de::Error },
}

/// Expected verdict of a corpus entry at its domain size.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Expect {
    /// Some pre-interpretation of the given size makes the query fail.
    Proven,
    /// No pre-interpretation of the given size does.
    Exhausted,
}

/// One benchmark program.
#[derive(Debug, Clone, Deserialize)]
pub struct Entry {
    pub name: String,
    /// Relative to the manifest's directory.
    pub file: PathBuf,
    pub query: String,
    pub domain_size: usize,
    pub expect: Expect,
    /// Excluded from `bench` unless asked for.
    #[serde(default)]
    pub long_running: bool,
    /// Reference properties of the program, checked by the test suite when
    /// present.
    pub clauses: Option<usize>,
    pub predicates: Option<usize>,
    pub size_pre: Option<u64>,
    pub size_int: Option<u64>,
}

#[derive(Debug, Clone, Deserialize)]
pub struct Manifest {
    #[serde(rename = "program")]
    pub programs: Vec<Entry>,
    #[serde(skip)]
    pub root: PathBuf,
}

impl Manifest {
    pub fn load(path: &Path) -> Result<Self, ManifestError> {
        let text = std::fs::read_to_string(path).map_err(|source| ManifestError::Io { path: path.to_owned(), source })?;
        let mut m: Manifest = toml::from_str(&text).map_err(|source| ManifestError::Toml { path: path.to_owned(), source })?;
        m.root = path.parent().map(Path::to_owned).unwrap_or_default();
        Ok(m)
    }

    pub fn path_of(&self, e: &Entry) -> PathBuf {
        self.root.join(&e.file)
    }

    pub fn get(&self, name: &str) -> Option<&Entry> {
        self.programs.iter().find(|e| e.name == name)
    }
}
