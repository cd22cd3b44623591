//! Summary tables over stored results, and annotation tallies.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use vinject_core::corpus::Chapter;
use vinject_core::eval::annotation::{attach_judgments, AnnotationPacket, Choice, Judgment};
use vinject_core::eval::{fleiss_kappa, tally_pairwise, EvalRecord, EvalTask, PairTally};
use vinject_core::{io, Error, Result, ValueId};

use super::cell;
use super::eval::{task_dir, EvalKind};
use crate::config::RunConfig;

pub fn packets_path(out: &Path) -> PathBuf {
    out.join("annotation").join("packets.jsonl")
}

fn mean(xs: impl IntoIterator<Item = Option<f64>>) -> Option<f64> {
    let defined: Vec<f64> = xs.into_iter().flatten().collect();
    (!defined.is_empty()).then(|| defined.iter().sum::<f64>() / defined.len() as f64)
}

/// Rows per target in first-seen order, then a `mean` row over targets.
fn rows(
    header: &[String],
    records: &[EvalRecord],
    row: impl Fn(&[&EvalRecord]) -> Vec<Option<f64>>,
) -> String {
    let mut order: Vec<&str> = Vec::new();
    let mut by_target: BTreeMap<&str, Vec<&EvalRecord>> = BTreeMap::new();
    for r in records {
        let entry = by_target.entry(r.target_id.as_str()).or_default();
        if entry.is_empty() {
            order.push(&r.target_id);
        }
        entry.push(r);
    }
    let mut out = format!("target\t{}\n", header.join("\t"));
    let mut table: Vec<Vec<Option<f64>>> = Vec::new();
    for t in order {
        let cells = row(&by_target[t]);
        let line: Vec<String> = cells.iter().map(|c| cell(*c)).collect();
        writeln!(out, "{t}\t{}", line.join("\t")).expect("write to string");
        table.push(cells);
    }
    let means: Vec<String> = (0..header.len())
        .map(|i| cell(mean(table.iter().map(|r| r[i]))))
        .collect();
    writeln!(out, "mean\t{}", means.join("\t")).expect("write to string");
    out
}

fn value_header(extra: &[&str]) -> Vec<String> {
    ValueId::ALL
        .iter()
        .map(|v| v.abbrev().to_string())
        .chain(extra.iter().map(|s| s.to_string()))
        .collect()
}

/// Delimited summary: per-value columns for pvq and behavior, per-chapter columns for opinion.
pub fn table(kind: EvalKind, records: &[EvalRecord]) -> String {
    match kind {
        EvalKind::Pvq => rows(&value_header(&["Ave."]), records, |rs| {
            let r = rs[0];
            let mut cells: Vec<Option<f64>> = if r.predicted.len() == ValueId::ALL.len() {
                r.predicted
                    .iter()
                    .zip(&r.gold)
                    .map(|(p, g)| Some((p - g).powi(2)))
                    .collect()
            } else {
                vec![None; ValueId::ALL.len()]
            };
            cells.push(r.nmse);
            cells
        }),
        EvalKind::Behavior => rows(&value_header(&["Ave."]), records, |rs| {
            let mut cells: Vec<Option<f64>> = ValueId::ALL
                .iter()
                .map(|v| {
                    rs.iter()
                        .find(|r| r.task == EvalTask::Behavior { value: *v })
                        .and_then(|r| r.nmse)
                })
                .collect();
            cells.push(mean(cells.clone()));
            cells
        }),
        EvalKind::Opinion => {
            let mut header: Vec<String> =
                Chapter::ALL.iter().map(|c| c.code().to_string()).collect();
            header.push("Ave.".into());
            header.extend(Chapter::ALL.iter().map(|c| format!("{} avoid%", c.code())));
            rows(&header, records, |rs| {
                let find = |c: Chapter| {
                    rs.iter()
                        .find(|r| r.task == EvalTask::Opinion { chapter: c })
                };
                let mut cells: Vec<Option<f64>> = Chapter::ALL
                    .iter()
                    .map(|c| find(*c).and_then(|r| r.nmse))
                    .collect();
                cells.push(mean(cells.clone()));
                cells.extend(
                    Chapter::ALL
                        .iter()
                        .map(|c| find(*c).and_then(|r| r.avoidance_pct())),
                );
                cells
            })
        }
        EvalKind::Argue => String::new(),
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct AnnotationReport {
    pub tallies: Vec<PairTally>,
    /// Absent when items received different numbers of judgments.
    pub kappa: Option<f64>,
}

pub fn annotation_report(
    packets: &[AnnotationPacket],
    judgments: &[Judgment],
) -> Result<AnnotationReport> {
    let items = attach_judgments(packets, judgments)?;
    let tallies = tally_pairwise(&items)?;
    let counts: Vec<Vec<u32>> = items
        .iter()
        .map(|i| {
            [Choice::A, Choice::B, Choice::DontKnow]
                .iter()
                .map(|c| i.judgments.iter().filter(|j| *j == c).count() as u32)
                .collect()
        })
        .collect();
    let kappa = match fleiss_kappa(&counts) {
        Ok(k) => Some(k),
        Err(e) => {
            log::warn!("fleiss' kappa not computed: {e}");
            None
        }
    };
    Ok(AnnotationReport { tallies, kappa })
}

/// Rebuild summary tables from stored results and, given judgments, tally the annotation packets.
pub fn run(cfg: &RunConfig, judgments: Option<&Path>) -> Result<Vec<PathBuf>> {
    let mut written = Vec::new();
    for kind in [EvalKind::Pvq, EvalKind::Behavior, EvalKind::Opinion] {
        let results = task_dir(&cfg.out, kind).join("results.jsonl");
        if !results.exists() {
            continue;
        }
        let records: Vec<EvalRecord> = io::read_jsonl(&results)?;
        let path = cfg.out.join("report").join(format!("{}.tsv", kind.name()));
        io::write_atomic(&path, table(kind, &records).as_bytes())?;
        written.push(path);
    }
    if let Some(jpath) = judgments {
        let packets: Vec<AnnotationPacket> = io::read_jsonl(&packets_path(&cfg.out))?;
        let judgments: Vec<Judgment> = io::read_jsonl(jpath)?;
        let report = annotation_report(&packets, &judgments)?;
        let mut tsv = String::from("primary\tsecondary\titems\twin%\tlose%\ttie%\tkappa\n");
        for t in &report.tallies {
            writeln!(
                tsv,
                "{}\t{}\t{}\t{:.1}\t{:.1}\t{:.1}\t{}",
                t.primary,
                t.secondary,
                t.items,
                t.win,
                t.lose,
                t.tie,
                cell(report.kappa)
            )
            .expect("write to string");
        }
        let path = cfg.out.join("report").join("annotation.tsv");
        io::write_atomic(&path, tsv.as_bytes())?;
        written.push(path);
    }
    if written.is_empty() {
        return Err(Error::Validation(format!(
            "no results found under {}",
            cfg.out.display()
        )));
    }
    Ok(written)
}
