//! Load and validate every configured corpus, then record counts and checksums.

use std::path::Path;

use serde::Serialize;
use sha2::{Digest, Sha256};
use vinject_core::corpus::{load_scenarios, Argument};
use vinject_core::{io, Error, Result};

use super::{arguments, pvq_items, questions, respondents};
use crate::config::RunConfig;

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct FileSummary {
    pub kind: String,
    pub path: String,
    pub sha256: String,
    /// Non-blank lines, excluding a CSV header.
    pub lines: usize,
    pub records: usize,
    pub dropped: usize,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct Manifest {
    pub seed: u64,
    pub files: Vec<FileSummary>,
}

fn summarize(
    kind: &str,
    path: &Path,
    records: usize,
    dropped: usize,
    header: bool,
) -> Result<FileSummary> {
    let bytes = std::fs::read(path).map_err(|e| Error::Io {
        path: path.to_path_buf(),
        source: e,
    })?;
    let text = String::from_utf8_lossy(&bytes);
    let lines = text
        .lines()
        .filter(|l| !l.trim().is_empty())
        .count()
        .saturating_sub(usize::from(header));
    Ok(FileSummary {
        kind: kind.into(),
        path: path.display().to_string(),
        sha256: format!("{:x}", Sha256::digest(&bytes)),
        lines,
        records,
        dropped,
    })
}

pub fn run(cfg: &RunConfig) -> Result<Manifest> {
    let p = &cfg.paths;
    let mut files = Vec::new();
    let items = pvq_items(cfg)?;
    if let Some(path) = &p.pvq_items {
        files.push(summarize("pvq_items", path, items.len(), 0, false)?);
    }
    if let Some(path) = &p.arguments {
        let args: Vec<Argument> = arguments(cfg)?;
        files.push(summarize("arguments", path, args.len(), 0, false)?);
    }
    if let Some(path) = &p.scenarios {
        let load = load_scenarios(path)?;
        files.push(summarize(
            "scenarios",
            path,
            load.scenarios.len(),
            load.dropped_unrelated,
            false,
        )?);
    }
    let qs = match &p.questions {
        Some(path) => {
            let qs = questions(cfg)?;
            files.push(summarize("questions", path, qs.len(), 0, false)?);
            qs
        }
        None => Vec::new(),
    };
    if let Some(path) = &p.respondents {
        let rs = respondents(cfg, &items, &qs)?;
        files.push(summarize("respondents", path, rs.len(), 0, true)?);
    }
    if files.is_empty() {
        log::warn!("no corpus paths configured; manifest is empty");
    }
    let manifest = Manifest {
        seed: cfg.seed,
        files,
    };
    io::write_atomic(&cfg.out.join("manifest.json"), &pretty(&manifest)?)?;
    for f in &manifest.files {
        log::info!(
            "{}: {} record(s), {} dropped, sha256 {}",
            f.kind,
            f.records,
            f.dropped,
            &f.sha256[..12]
        );
    }
    Ok(manifest)
}

pub(crate) fn pretty<T: Serialize>(value: &T) -> Result<Vec<u8>> {
    let mut bytes = serde_json::to_vec_pretty(value)?;
    bytes.push(b'\n');
    Ok(bytes)
}
