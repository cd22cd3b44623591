//! Derive target distributions from respondents: cluster centroids plus country means.

use std::fmt::Write as _;

use serde::Serialize;
use vinject_core::targets::{
    derive_targets, elbow_curve, ClusteringReport, KmeansConfig, TargetProfile,
};
use vinject_core::values::score_pvq;
use vinject_core::{io, Result};

use super::ingest::pretty;
use super::{assignments_path, pvq_items, questions, respondents, targets_path};
use crate::config::RunConfig;

#[derive(Debug, Clone, Serialize)]
pub struct TargetsSummary {
    pub clusters: usize,
    pub countries: usize,
    pub dropped: usize,
    pub report: ClusteringReport,
}

pub fn run(cfg: &RunConfig) -> Result<TargetsSummary> {
    let items = pvq_items(cfg)?;
    let qs = match &cfg.paths.questions {
        Some(_) => questions(cfg)?,
        None => Vec::new(),
    };
    let rs = respondents(cfg, &items, &qs)?;
    let kcfg = KmeansConfig {
        restarts: cfg.restarts,
        ..KmeansConfig::new(cfg.k, cfg.seed)
    };
    let set = derive_targets(&rs, &items, &kcfg, &cfg.countries)?;
    io::write_jsonl(&targets_path(&cfg.out), &set.profiles)?;
    io::write_jsonl(&assignments_path(&cfg.out), &set.assignments)?;

    if !cfg.elbow.is_empty() {
        let points: Vec<[f64; 10]> = rs
            .iter()
            .filter_map(|r| score_pvq(&r.pvq, &items).ok())
            .map(|d| *d.scores())
            .collect();
        let curve = elbow_curve(&points, &cfg.elbow, &kcfg)?;
        let mut tsv = String::from("k\tinertia\n");
        for (k, inertia) in curve {
            writeln!(tsv, "{k}\t{inertia:.6}").expect("write to string");
        }
        io::write_atomic(&cfg.out.join("elbow.tsv"), tsv.as_bytes())?;
    }

    let clusters = count(&set.profiles, true);
    let summary = TargetsSummary {
        clusters,
        countries: set.profiles.len() - clusters,
        dropped: set.dropped,
        report: set.report,
    };
    io::write_atomic(&cfg.out.join("clustering.json"), &pretty(&summary)?)?;
    log::info!(
        "{} target(s): {} cluster(s), {} countr(y/ies); inertia {:.3}",
        set.profiles.len(),
        summary.clusters,
        summary.countries,
        summary.report.inertia
    );
    Ok(summary)
}

fn count(profiles: &[TargetProfile], clusters: bool) -> usize {
    profiles
        .iter()
        .filter(|p| matches!(p.origin, vinject_core::targets::Origin::Cluster(_)) == clusters)
        .count()
}
