//! Target value distributions: cluster centroids over scored respondents plus
//! one mean profile per country.

pub mod kmeans;

use std::collections::{BTreeMap, BTreeSet};
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::corpus::Respondent;
use crate::error::{Error, Result};
use crate::io;
use crate::values::{score_pvq, PvqItem, ValueDistribution};

pub use kmeans::{
    elbow_curve, kmeans, kmeans_best, Clustering, ClusteringReport, KmeansConfig, Point,
};

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", content = "key", rename_all = "lowercase")]
pub enum Origin {
    Cluster(usize),
    Country(String),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TargetProfile {
    pub target_id: String,
    pub origin: Origin,
    pub member_count: usize,
    #[serde(rename = "scores")]
    pub distribution: ValueDistribution,
}

impl TargetProfile {
    pub fn cluster_id(index: usize) -> String {
        format!("cluster-{index:03}")
    }

    pub fn country_id(code: &str) -> String {
        format!("country-{code}")
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Assignment {
    pub respondent_id: String,
    pub country: String,
    pub cluster: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct TargetSet {
    pub profiles: Vec<TargetProfile>,
    pub assignments: Vec<Assignment>,
    pub report: ClusteringReport,
    /// Respondents whose PVQ answers could not be scored.
    pub dropped: usize,
}

fn mean_distribution<'a>(
    members: impl Iterator<Item = &'a ValueDistribution>,
) -> Result<Option<(ValueDistribution, usize)>> {
    let mut sums = [0.0; 10];
    let mut n = 0usize;
    for d in members {
        n += 1;
        for (s, x) in sums.iter_mut().zip(d.scores()) {
            *s += x;
        }
    }
    if n == 0 {
        return Ok(None);
    }
    Ok(Some((
        ValueDistribution::new(sums.map(|s| s / n as f64))?,
        n,
    )))
}

/// Cluster the scored respondents and add a mean profile per country.
///
/// `countries` lists the expected country codes; any with no scoreable
/// respondent is omitted with a warning. When empty, the observed countries are used.
pub fn derive_targets(
    respondents: &[Respondent],
    items: &[PvqItem],
    cfg: &KmeansConfig,
    countries: &[String],
) -> Result<TargetSet> {
    let mut scored: Vec<(&Respondent, ValueDistribution)> = Vec::new();
    let mut dropped = 0;
    for r in respondents {
        match score_pvq(&r.pvq, items) {
            Ok(d) => scored.push((r, d)),
            Err(e) => {
                log::debug!("respondent {}: {e}", r.respondent_id);
                dropped += 1;
            }
        }
    }
    if dropped > 0 {
        log::warn!("dropped {dropped} respondent(s) with unscoreable PVQ answers");
    }
    if scored.is_empty() {
        return Err(Error::validation(
            "no respondent has a scoreable PVQ survey",
        ));
    }
    scored.sort_by(|a, b| a.0.respondent_id.cmp(&b.0.respondent_id));

    let points: Vec<Point> = scored.iter().map(|(_, d)| *d.scores()).collect();
    let clustering = kmeans_best(&points, cfg)?;

    let mut profiles = Vec::new();
    for j in 0..cfg.k {
        let members = scored
            .iter()
            .zip(&clustering.assignments)
            .filter(|(_, &a)| a == j)
            .map(|((_, d), _)| d);
        let Some((distribution, n)) = mean_distribution(members)? else {
            log::warn!("cluster {j} is empty after the final assignment; omitted");
            continue;
        };
        profiles.push(TargetProfile {
            target_id: TargetProfile::cluster_id(j),
            origin: Origin::Cluster(j),
            member_count: n,
            distribution,
        });
    }

    let mut codes: BTreeSet<&str> = countries.iter().map(String::as_str).collect();
    if codes.is_empty() {
        codes = scored.iter().map(|(r, _)| r.country.as_str()).collect();
    }
    for code in codes {
        let members = scored
            .iter()
            .filter(|(r, _)| r.country == code)
            .map(|(_, d)| d);
        let Some((distribution, n)) = mean_distribution(members)? else {
            log::warn!("country {code} has no scoreable respondent; omitted");
            continue;
        };
        profiles.push(TargetProfile {
            target_id: TargetProfile::country_id(code),
            origin: Origin::Country(code.to_string()),
            member_count: n,
            distribution,
        });
    }

    let assignments = scored
        .iter()
        .zip(&clustering.assignments)
        .map(|((r, _), &cluster)| Assignment {
            respondent_id: r.respondent_id.clone(),
            country: r.country.clone(),
            cluster,
        })
        .collect();

    Ok(TargetSet {
        profiles,
        assignments,
        report: clustering.report,
        dropped,
    })
}

pub fn load_targets(path: &Path) -> Result<Vec<TargetProfile>> {
    let targets: Vec<TargetProfile> = io::read_jsonl(path)?;
    let mut ids = BTreeSet::new();
    for t in &targets {
        if t.member_count == 0 {
            return Err(Error::validation(format!(
                "{}: target `{}` has no members",
                path.display(),
                t.target_id
            )));
        }
        if !ids.insert(t.target_id.as_str()) {
            return Err(Error::validation(format!(
                "{}: duplicate target id `{}`",
                path.display(),
                t.target_id
            )));
        }
    }
    Ok(targets)
}

/// Select targets by id; `["all"]` (or an empty list) selects every target.
pub fn select_targets<'a>(
    targets: &'a [TargetProfile],
    ids: &[String],
) -> Result<Vec<&'a TargetProfile>> {
    if ids.is_empty() || ids.iter().any(|i| i == "all") {
        return Ok(targets.iter().collect());
    }
    let by_id: BTreeMap<&str, &TargetProfile> =
        targets.iter().map(|t| (t.target_id.as_str(), t)).collect();
    ids.iter()
        .map(|id| {
            by_id
                .get(id.as_str())
                .copied()
                .ok_or_else(|| Error::validation(format!("unknown target id `{id}`")))
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::values::{default_pvq_items, LikertLevel, ValueId};

    fn respondent(id: &str, country: &str, level: impl Fn(&PvqItem) -> u8) -> Respondent {
        Respondent {
            respondent_id: id.into(),
            country: country.into(),
            pvq: default_pvq_items()
                .iter()
                .map(|i| (i.item_id.clone(), LikertLevel::new(level(i)).unwrap()))
                .collect(),
            answers: BTreeMap::new(),
        }
    }

    #[test]
    fn single_respondent_gives_two_equal_profiles() {
        let items = default_pvq_items();
        let r = respondent("r1", "DE", |i| 1 + (i.value.index() % 6) as u8);
        let set = derive_targets(
            std::slice::from_ref(&r),
            &items,
            &KmeansConfig::new(1, 0),
            &[],
        )
        .unwrap();
        assert_eq!(set.profiles.len(), 2);
        let expected = score_pvq(&r.pvq, &items).unwrap();
        assert_eq!(set.profiles[0].distribution, expected);
        assert_eq!(set.profiles[1].distribution, expected);
        assert_eq!(set.profiles[1].target_id, "country-DE");
    }

    #[test]
    fn country_profile_is_member_mean() {
        let items = default_pvq_items();
        let tradition = |level: u8| {
            move |i: &PvqItem| {
                if i.value == ValueId::Tradition {
                    level
                } else {
                    3
                }
            }
        };
        let rs = [
            respondent("a", "FR", tradition(2)),
            respondent("b", "FR", tradition(4)),
        ];
        let set = derive_targets(
            &rs,
            &items,
            &KmeansConfig::new(1, 0),
            &["FR".into(), "IT".into()],
        )
        .unwrap();
        let fr = set
            .profiles
            .iter()
            .find(|p| p.target_id == "country-FR")
            .unwrap();
        assert_eq!(fr.distribution.get(ValueId::Tradition), 3.0);
        assert_eq!(fr.member_count, 2);
        assert!(set.profiles.iter().all(|p| p.target_id != "country-IT"));
    }

    #[test]
    fn unscoreable_respondents_are_dropped() {
        let items = default_pvq_items();
        let mut partial = respondent("x", "DE", |_| 3);
        partial
            .pvq
            .retain(|id, _| id != "ipcrtiv" && id != "impfree");
        let rs = [respondent("a", "DE", |_| 4), partial];
        let set = derive_targets(&rs, &items, &KmeansConfig::new(1, 0), &[]).unwrap();
        assert_eq!(set.dropped, 1);
        assert_eq!(set.assignments.len(), 1);
    }

    #[test]
    fn ordering_invariant() {
        let items = default_pvq_items();
        let rs: Vec<_> = (0..12)
            .map(|n| {
                respondent(&format!("r{n:02}"), ["DE", "FR"][n % 2], |i| {
                    1 + ((i.value.index() + n) % 6) as u8
                })
            })
            .collect();
        let mut rev = rs.clone();
        rev.reverse();
        let cfg = KmeansConfig::new(3, 11);
        assert_eq!(
            derive_targets(&rs, &items, &cfg, &[]).unwrap(),
            derive_targets(&rev, &items, &cfg, &[]).unwrap()
        );
    }

    #[test]
    fn targets_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("t.jsonl");
        let t = TargetProfile {
            target_id: "country-DE".into(),
            origin: Origin::Country("DE".into()),
            member_count: 3,
            distribution: ValueDistribution::uniform(4.2).unwrap(),
        };
        let c = TargetProfile {
            target_id: "cluster-007".into(),
            origin: Origin::Cluster(7),
            ..t.clone()
        };
        io::write_jsonl(&path, &[t.clone(), c.clone()]).unwrap();
        assert_eq!(load_targets(&path).unwrap(), vec![t, c]);
        let line = std::fs::read_to_string(&path).unwrap();
        assert!(
            line.contains(r#""origin":{"kind":"country","key":"DE"}"#),
            "{line}"
        );
    }
}
