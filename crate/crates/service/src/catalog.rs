use std::collections::BTreeMap;
use std::path::{Path, PathBuf};
use std::sync::Arc;

use knet_core::kbformat::{self, FILE_EXTENSION};
use knet_core::{Network, PreparedNetwork};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum CatalogError {
    #[error("cannot read knowledge-base directory {path}: {source}")]
    Directory { path: PathBuf, source: std::io::Error },
}

/// A file that was found but not loaded.
#[derive(Debug, Clone)]
pub struct Rejected {
    pub path: PathBuf,
    pub reason: String,
}

/// Knowledge bases by name, each validated and prepared for queries.
#[derive(Debug, Default)]
pub struct KbCatalog {
    entries: BTreeMap<String, Arc<PreparedNetwork>>,
    rejected: Vec<Rejected>,
}

impl KbCatalog {
    /// Loads every `*.knet.json` file in `dir` in strict mode. The name of
    /// a knowledge base is its file name without the extension. Files that
    /// fail to parse or validate are listed in [`rejected`](Self::rejected).
    pub fn load(dir: &Path) -> Result<Self, CatalogError> {
        let read = std::fs::read_dir(dir)
            .map_err(|source| CatalogError::Directory { path: dir.to_owned(), source })?;
        let mut paths: Vec<PathBuf> = read
            .filter_map(|e| e.ok().map(|e| e.path()))
            .filter(|p| p.file_name().and_then(|n| n.to_str()).is_some_and(|n| n.ends_with(FILE_EXTENSION)))
            .collect();
        paths.sort();

        let mut catalog = KbCatalog::default();
        for path in paths {
            let name = path
                .file_name()
                .and_then(|n| n.to_str())
                .and_then(|n| n.strip_suffix(FILE_EXTENSION))
                .unwrap_or_default()
                .to_owned();
            let loaded = std::fs::read_to_string(&path)
                .map_err(|e| e.to_string())
                .and_then(|text| kbformat::parse(&text).map_err(|e| e.to_string()))
                .and_then(|net| PreparedNetwork::new(net).map_err(|e| e.to_string()));
            match loaded {
                Ok(prepared) if !name.is_empty() => {
                    catalog.entries.insert(name, Arc::new(prepared));
                }
                Ok(_) => catalog.rejected.push(Rejected { path, reason: "empty name".into() }),
                Err(reason) => catalog.rejected.push(Rejected { path, reason }),
            }
        }
        Ok(catalog)
    }

    /// A catalog from networks already in memory.
    pub fn from_networks(
        networks: impl IntoIterator<Item = (String, Network)>,
    ) -> Result<Self, knet_core::DecisionError> {
        let mut catalog = KbCatalog::default();
        for (name, net) in networks {
            catalog.entries.insert(name, Arc::new(PreparedNetwork::new(net)?));
        }
        Ok(catalog)
    }

    pub fn get(&self, name: &str) -> Option<&Arc<PreparedNetwork>> {
        self.entries.get(name)
    }

    pub fn iter(&self) -> impl Iterator<Item = (&str, &Arc<PreparedNetwork>)> {
        self.entries.iter().map(|(k, v)| (k.as_str(), v))
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn rejected(&self) -> &[Rejected] {
        &self.rejected
    }
}
