//! Subcommand implementations. Each reads a [`RunConfig`] and writes under `cfg.out`.

pub mod compare;
pub mod eval;
pub mod gendata;
pub mod ingest;
pub mod report;
pub mod targets;

use std::path::{Path, PathBuf};

use vinject_core::corpus::{self, Argument, EssQuestion, Respondent, RespondentOptions};
use vinject_core::prompts::TemplateRegistry;
use vinject_core::targets::{load_targets, Assignment, TargetProfile};
use vinject_core::values::{default_pvq_items, load_pvq_items};
use vinject_core::{io, PvqItem, Result};

use crate::config::RunConfig;

pub fn registry(cfg: &RunConfig) -> Result<TemplateRegistry> {
    match &cfg.paths.templates {
        Some(dir) => TemplateRegistry::with_overrides(dir),
        None => Ok(TemplateRegistry::embedded()),
    }
}

pub fn pvq_items(cfg: &RunConfig) -> Result<Vec<PvqItem>> {
    match &cfg.paths.pvq_items {
        Some(p) => load_pvq_items(p),
        None => Ok(default_pvq_items()),
    }
}

pub fn arguments(cfg: &RunConfig) -> Result<Vec<Argument>> {
    corpus::load_arguments(cfg.require("arguments", &cfg.paths.arguments)?)
}

pub fn questions(cfg: &RunConfig) -> Result<Vec<EssQuestion>> {
    corpus::load_questions(cfg.require("questions", &cfg.paths.questions)?)
}

pub fn respondent_options(cfg: &RunConfig) -> RespondentOptions {
    let mut opts = RespondentOptions {
        pvq_reverse_coded: cfg.pvq_reverse_coded,
        ..RespondentOptions::default()
    };
    if let Some(codes) = &cfg.missing_codes {
        opts.missing = codes.clone();
    }
    if !cfg.countries.is_empty() {
        opts.countries = Some(cfg.countries.iter().cloned().collect());
    }
    opts
}

pub fn respondents(
    cfg: &RunConfig,
    items: &[PvqItem],
    questions: &[EssQuestion],
) -> Result<Vec<Respondent>> {
    corpus::load_respondents(
        cfg.require("respondents", &cfg.paths.respondents)?,
        items,
        questions,
        &respondent_options(cfg),
    )
}

pub fn targets_path(out: &Path) -> PathBuf {
    out.join("targets.jsonl")
}

pub fn assignments_path(out: &Path) -> PathBuf {
    out.join("assignments.jsonl")
}

pub fn load_run_targets(cfg: &RunConfig) -> Result<Vec<TargetProfile>> {
    load_targets(&targets_path(&cfg.out))
}

pub fn load_assignments(cfg: &RunConfig) -> Result<Vec<Assignment>> {
    io::read_jsonl(&assignments_path(&cfg.out))
}

/// Format a float for a TSV cell; blank when undefined.
pub fn cell(x: Option<f64>) -> String {
    x.map(|v| format!("{v:.4}")).unwrap_or_default()
}
