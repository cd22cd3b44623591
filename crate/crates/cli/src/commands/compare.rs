//! Paired t-tests between two runs, and blinded annotation packets for generated arguments.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt::Write as _;
use std::path::Path;

use vinject_core::eval::annotation::{make_packets, Candidate};
use vinject_core::eval::{paired_t_test, EvalRecord, EvalTask, TTest};
use vinject_core::{io, Error, Result};

use super::cell;
use super::eval::{task_dir, EvalKind, Generation};
use super::report::packets_path;
use crate::config::RunConfig;

#[derive(Debug, Clone, PartialEq)]
pub struct Comparison {
    pub task: EvalTask,
    pub n: usize,
    pub mean_a: f64,
    pub mean_b: f64,
    /// Absent when fewer than two targets have a defined NMSE in both runs.
    pub test: Option<TTest>,
}

fn load_records(run: &Path) -> Result<Vec<EvalRecord>> {
    let mut all = Vec::new();
    for kind in [EvalKind::Pvq, EvalKind::Behavior, EvalKind::Opinion] {
        let path = task_dir(run, kind).join("results.jsonl");
        if path.exists() {
            all.extend(io::read_jsonl::<EvalRecord>(&path)?);
        }
    }
    Ok(all)
}

fn by_task(records: &[EvalRecord]) -> BTreeMap<EvalTask, BTreeMap<&str, Option<f64>>> {
    let mut out: BTreeMap<EvalTask, BTreeMap<&str, Option<f64>>> = BTreeMap::new();
    for r in records {
        out.entry(r.task).or_default().insert(&r.target_id, r.nmse);
    }
    out
}

/// Pair per-target NMSE of each task present in both runs.
pub fn compare_records(a: &[EvalRecord], b: &[EvalRecord]) -> Result<Vec<Comparison>> {
    let (ta, tb) = (by_task(a), by_task(b));
    let mut out = Vec::new();
    for (task, xa) in &ta {
        let Some(xb) = tb.get(task) else { continue };
        let ka: BTreeSet<&str> = xa.keys().copied().collect();
        let kb: BTreeSet<&str> = xb.keys().copied().collect();
        if ka != kb {
            let only_a: Vec<&str> = ka.difference(&kb).copied().collect();
            let only_b: Vec<&str> = kb.difference(&ka).copied().collect();
            return Err(Error::Validation(format!(
                "{task}: target sets differ; only in A: {only_a:?}; only in B: {only_b:?}"
            )));
        }
        let (va, vb): (Vec<f64>, Vec<f64>) =
            ka.iter().filter_map(|t| Some((xa[t]?, xb[t]?))).unzip();
        let n = va.len();
        let avg = |v: &[f64]| {
            if v.is_empty() {
                f64::NAN
            } else {
                v.iter().sum::<f64>() / v.len() as f64
            }
        };
        let test = if n >= 2 {
            Some(paired_t_test(&va, &vb)?)
        } else {
            None
        };
        out.push(Comparison {
            task: *task,
            n,
            mean_a: avg(&va),
            mean_b: avg(&vb),
            test,
        });
    }
    if out.is_empty() && !ta.is_empty() && !tb.is_empty() {
        return Err(Error::Validation(
            "the two runs share no evaluation task".into(),
        ));
    }
    Ok(out)
}

pub fn comparison_tsv(rows: &[Comparison]) -> String {
    let mut tsv = String::from("task\tn\tmean_a\tmean_b\tt\tp\tdf\n");
    for c in rows {
        let (t, p, df) = match &c.test {
            Some(r) => (
                format!("{:.6}", r.t),
                format!("{:.6}", r.p),
                r.df.to_string(),
            ),
            None => Default::default(),
        };
        let m = |x: f64| cell(x.is_finite().then_some(x));
        writeln!(
            tsv,
            "{}\t{}\t{}\t{}\t{t}\t{p}\t{df}",
            c.task,
            c.n,
            m(c.mean_a),
            m(c.mean_b)
        )
        .expect("write to string");
    }
    tsv
}

fn generations(run: &Path) -> Result<Option<Vec<Generation>>> {
    let path = task_dir(run, EvalKind::Argue).join("generations.jsonl");
    path.exists().then(|| io::read_jsonl(&path)).transpose()
}

fn run_name(run: &Path) -> String {
    run.file_name()
        .map(|n| n.to_string_lossy().into_owned())
        .unwrap_or_else(|| run.display().to_string())
}

/// Compare run `a` (primary) against run `b`; writes `compare.tsv` and, when both runs
/// have generated arguments, annotation packets.
pub fn run(cfg: &RunConfig, a: &Path, b: &Path) -> Result<Vec<Comparison>> {
    let rows = compare_records(&load_records(a)?, &load_records(b)?)?;
    let mut wrote = false;
    if !rows.is_empty() {
        io::write_atomic(
            &cfg.out.join("compare.tsv"),
            comparison_tsv(&rows).as_bytes(),
        )?;
        wrote = true;
    }
    if let (Some(ga), Some(gb)) = (generations(a)?, generations(b)?) {
        let other: BTreeMap<&str, &Generation> =
            gb.iter().map(|g| (g.item_id.as_str(), g)).collect();
        let mut candidates = Vec::new();
        for g in &ga {
            match other.get(g.item_id.as_str()) {
                Some(o) => candidates.push(Candidate {
                    item_id: g.item_id.clone(),
                    target_id: g.target_id.clone(),
                    conclusion: g.conclusion.clone(),
                    primary: g.premise.clone(),
                    secondary: o.premise.clone(),
                }),
                None => log::warn!(
                    "{}: no counterpart generation in {}",
                    g.item_id,
                    b.display()
                ),
            }
        }
        let packets = make_packets(&run_name(a), &run_name(b), &candidates, cfg.seed);
        io::write_jsonl(&packets_path(&cfg.out), &packets)?;
        log::info!("{} annotation packet(s)", packets.len());
        wrote = true;
    }
    if !wrote {
        return Err(Error::Validation(format!(
            "nothing to compare between {} and {}",
            a.display(),
            b.display()
        )));
    }
    Ok(rows)
}
