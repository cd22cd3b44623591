//! Write AG and QA training files for each selected target from the training split.

use std::collections::BTreeSet;
use std::path::PathBuf;

use vinject_core::corpus::{split_arguments, Argument};
use vinject_core::datagen::{gen_ag_examples, gen_qa_examples, DatagenConfig};
use vinject_core::targets::select_targets;
use vinject_core::{io, Result};

use super::ingest::pretty;
use super::{arguments, load_run_targets, registry};
use crate::config::RunConfig;

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct GendataSummary {
    pub files: Vec<PathBuf>,
    pub ag_examples: usize,
    pub qa_examples: usize,
    pub skipped: usize,
}

pub fn run(cfg: &RunConfig, target_ids: &[String]) -> Result<GendataSummary> {
    let reg = registry(cfg)?;
    let args = arguments(cfg)?;
    let split = split_arguments(&args, cfg.seed)?;
    io::write_atomic(&cfg.out.join("split.json"), &pretty(&split)?)?;
    let train_ids: BTreeSet<&str> = split.train.iter().map(String::as_str).collect();
    let train: Vec<Argument> = args
        .into_iter()
        .filter(|a| train_ids.contains(a.id.as_str()))
        .collect();

    let targets = load_run_targets(cfg)?;
    let selected = select_targets(&targets, target_ids)?;
    let dcfg = DatagenConfig::new(cfg.gamma, cfg.seed, cfg.empty_label_policy)?;
    let dir = cfg.out.join("train");
    let mut summary = GendataSummary {
        files: Vec::new(),
        ag_examples: 0,
        qa_examples: 0,
        skipped: 0,
    };
    for target in selected {
        let ag = gen_ag_examples(&reg, &train, target, &dcfg)?;
        let qa = gen_qa_examples(&reg, &train, target, &dcfg)?;
        for (suffix, examples) in [("ag", &ag.examples), ("qa", &qa)] {
            if examples.is_empty() {
                log::warn!(
                    "{}: no {suffix} examples; writing an empty file",
                    target.target_id
                );
            }
            let path = dir.join(format!("{}.{suffix}.jsonl", target.target_id));
            io::write_jsonl(&path, examples)?;
            summary.files.push(path);
        }
        summary.ag_examples += ag.examples.len();
        summary.qa_examples += qa.len();
        summary.skipped += ag.skipped;
    }
    log::info!(
        "{} file(s): {} AG and {} QA example(s), {} argument(s) skipped",
        summary.files.len(),
        summary.ag_examples,
        summary.qa_examples,
        summary.skipped
    );
    Ok(summary)
}
