//! Blinded pairwise comparison packets and win/lose/tie tallies.

use std::collections::BTreeMap;

use rand::Rng as _;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::rng;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Choice {
    A,
    B,
    #[serde(rename = "dont_know", alias = "DontKnow", alias = "I don't know")]
    DontKnow,
}

/// One comparison shown to annotators. `blinding_key` is `primary|secondary|ab` when
/// candidate A came from the primary system, `...|ba` otherwise.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct AnnotationPacket {
    pub item_id: String,
    pub target_id: String,
    pub conclusion: String,
    pub candidate_a: String,
    pub candidate_b: String,
    pub blinding_key: String,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Judgment {
    pub item_id: String,
    pub annotator_id: String,
    pub choice: Choice,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct AnnotationItem {
    pub packet: AnnotationPacket,
    pub judgments: Vec<Choice>,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Candidate {
    pub item_id: String,
    pub target_id: String,
    pub conclusion: String,
    pub primary: String,
    pub secondary: String,
}

/// Build packets with a seeded per-item coin deciding which system appears as A.
pub fn make_packets(
    primary: &str,
    secondary: &str,
    candidates: &[Candidate],
    seed: u64,
) -> Vec<AnnotationPacket> {
    candidates
        .iter()
        .map(|c| {
            let swap = rng::rng_for(seed, &["blind", &c.item_id]).random::<bool>();
            let (a, b, order) = if swap {
                (&c.secondary, &c.primary, "ba")
            } else {
                (&c.primary, &c.secondary, "ab")
            };
            AnnotationPacket {
                item_id: c.item_id.clone(),
                target_id: c.target_id.clone(),
                conclusion: c.conclusion.clone(),
                candidate_a: a.clone(),
                candidate_b: b.clone(),
                blinding_key: format!("{primary}|{secondary}|{order}"),
            }
        })
        .collect()
}

struct Blinding<'a> {
    primary: &'a str,
    secondary: &'a str,
    a_is_primary: bool,
}

fn parse_blinding(key: &str) -> Result<Blinding<'_>> {
    let parts: Vec<&str> = key.split('|').collect();
    match parts.as_slice() {
        [p, s, order @ ("ab" | "ba")] => Ok(Blinding {
            primary: p,
            secondary: s,
            a_is_primary: *order == "ab",
        }),
        _ => Err(Error::validation(format!("malformed blinding key `{key}`"))),
    }
}

pub fn attach_judgments(
    packets: &[AnnotationPacket],
    judgments: &[Judgment],
) -> Result<Vec<AnnotationItem>> {
    let mut by_id: BTreeMap<&str, Vec<Choice>> = packets
        .iter()
        .map(|p| (p.item_id.as_str(), Vec::new()))
        .collect();
    for j in judgments {
        by_id
            .get_mut(j.item_id.as_str())
            .ok_or_else(|| Error::validation(format!("judgment for unknown item `{}`", j.item_id)))?
            .push(j.choice);
    }
    Ok(packets
        .iter()
        .map(|p| AnnotationItem {
            packet: p.clone(),
            judgments: by_id.remove(p.item_id.as_str()).unwrap_or_default(),
        })
        .collect())
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PairTally {
    pub primary: String,
    pub secondary: String,
    pub items: usize,
    pub wins: usize,
    pub losses: usize,
    pub ties: usize,
    /// Percentages from the primary system's side, one decimal, summing to 100.
    pub win: f64,
    pub lose: f64,
    pub tie: f64,
}

fn round1(x: f64) -> f64 {
    (x * 10.0).round() / 10.0
}

/// Majority vote per item (don't-know votes ignored, equal support is a tie), tallied per system pair.
pub fn tally_pairwise(items: &[AnnotationItem]) -> Result<Vec<PairTally>> {
    if items.is_empty() {
        return Err(Error::validation("no annotation items to tally"));
    }
    let mut pairs: BTreeMap<(String, String), [usize; 3]> = BTreeMap::new();
    for item in items {
        if item.judgments.is_empty() {
            return Err(Error::validation(format!(
                "item `{}` has no judgments",
                item.packet.item_id
            )));
        }
        let blind = parse_blinding(&item.packet.blinding_key)?;
        let a = item.judgments.iter().filter(|c| **c == Choice::A).count();
        let b = item.judgments.iter().filter(|c| **c == Choice::B).count();
        let (primary_votes, secondary_votes) = if blind.a_is_primary { (a, b) } else { (b, a) };
        let slot = match primary_votes.cmp(&secondary_votes) {
            std::cmp::Ordering::Greater => 0,
            std::cmp::Ordering::Less => 1,
            std::cmp::Ordering::Equal => 2,
        };
        pairs
            .entry((blind.primary.to_string(), blind.secondary.to_string()))
            .or_default()[slot] += 1;
    }
    Ok(pairs
        .into_iter()
        .map(|((primary, secondary), [wins, losses, ties])| {
            let n = wins + losses + ties;
            let pct = |c: usize| round1(100.0 * c as f64 / n as f64);
            let (win, lose) = (pct(wins), pct(losses));
            PairTally {
                primary,
                secondary,
                items: n,
                wins,
                losses,
                ties,
                win,
                lose,
                tie: round1(100.0 - win - lose),
            }
        })
        .collect())
}
