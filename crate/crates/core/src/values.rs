//! Schwartz basic values, value distributions, and PVQ scoring.
//!
//! Scores live on the raw PVQ scale `[1, 6]`. Metrics work on the
//! normalized scale `[0, 1]` obtained through [`normalize_score`].

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;
use std::path::Path;
use std::str::FromStr;

use serde::{Deserialize, Deserializer, Serialize, Serializer};

use crate::error::{Error, Result};

pub const SCORE_MIN: f64 = 1.0;
pub const SCORE_MAX: f64 = 6.0;

/// One of the ten Schwartz basic values, in canonical order.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum ValueId {
    Achievement,
    Benevolence,
    Conformity,
    Hedonism,
    Power,
    Security,
    SelfDirection,
    Stimulation,
    Tradition,
    Universalism,
}

impl ValueId {
    pub const ALL: [ValueId; 10] = [
        ValueId::Achievement,
        ValueId::Benevolence,
        ValueId::Conformity,
        ValueId::Hedonism,
        ValueId::Power,
        ValueId::Security,
        ValueId::SelfDirection,
        ValueId::Stimulation,
        ValueId::Tradition,
        ValueId::Universalism,
    ];

    pub fn index(self) -> usize {
        self as usize
    }

    /// Canonical lowercase identifier, e.g. `self-direction`.
    pub fn name(self) -> &'static str {
        match self {
            ValueId::Achievement => "achievement",
            ValueId::Benevolence => "benevolence",
            ValueId::Conformity => "conformity",
            ValueId::Hedonism => "hedonism",
            ValueId::Power => "power",
            ValueId::Security => "security",
            ValueId::SelfDirection => "self-direction",
            ValueId::Stimulation => "stimulation",
            ValueId::Tradition => "tradition",
            ValueId::Universalism => "universalism",
        }
    }

    /// Title-cased label used in persona prompts, e.g. `Self-Direction`.
    pub fn title(self) -> &'static str {
        match self {
            ValueId::Achievement => "Achievement",
            ValueId::Benevolence => "Benevolence",
            ValueId::Conformity => "Conformity",
            ValueId::Hedonism => "Hedonism",
            ValueId::Power => "Power",
            ValueId::Security => "Security",
            ValueId::SelfDirection => "Self-Direction",
            ValueId::Stimulation => "Stimulation",
            ValueId::Tradition => "Tradition",
            ValueId::Universalism => "Universalism",
        }
    }

    /// Column abbreviation used in report tables.
    pub fn abbrev(self) -> &'static str {
        match self {
            ValueId::Achievement => "Ach",
            ValueId::Benevolence => "Ben",
            ValueId::Conformity => "Con",
            ValueId::Hedonism => "Hed",
            ValueId::Power => "Pow",
            ValueId::Security => "Sec",
            ValueId::SelfDirection => "SD",
            ValueId::Stimulation => "Sti",
            ValueId::Tradition => "Tra",
            ValueId::Universalism => "Uni",
        }
    }
}

impl fmt::Display for ValueId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for ValueId {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let key: String = s
            .trim()
            .chars()
            .filter(|c| !matches!(c, '-' | '_' | ' '))
            .flat_map(char::to_lowercase)
            .collect();
        let id = match key.as_str() {
            "achievement" => ValueId::Achievement,
            "benevolence" => ValueId::Benevolence,
            "conformity" => ValueId::Conformity,
            "hedonism" => ValueId::Hedonism,
            "power" => ValueId::Power,
            "security" => ValueId::Security,
            "selfdirection" => ValueId::SelfDirection,
            "stimulation" => ValueId::Stimulation,
            "tradition" => ValueId::Tradition,
            "universalism" => ValueId::Universalism,
            _ => return Err(Error::validation(format!("unknown value name `{s}`"))),
        };
        Ok(id)
    }
}

impl Serialize for ValueId {
    fn serialize<S: Serializer>(&self, serializer: S) -> std::result::Result<S::Ok, S::Error> {
        serializer.serialize_str(self.name())
    }
}

impl<'de> Deserialize<'de> for ValueId {
    fn deserialize<D: Deserializer<'de>>(deserializer: D) -> std::result::Result<Self, D::Error> {
        let s = String::deserialize(deserializer)?;
        s.parse().map_err(serde::de::Error::custom)
    }
}

/// A score for every value, each in `[1, 6]`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ValueDistribution([f64; 10]);

impl ValueDistribution {
    pub fn new(scores: [f64; 10]) -> Result<Self> {
        for (value, &s) in ValueId::ALL.iter().zip(scores.iter()) {
            if !(SCORE_MIN..=SCORE_MAX).contains(&s) {
                return Err(Error::validation(format!(
                    "score {s} for `{value}` outside [{SCORE_MIN}, {SCORE_MAX}]"
                )));
            }
        }
        Ok(Self(scores))
    }

    pub fn uniform(score: f64) -> Result<Self> {
        Self::new([score; 10])
    }

    pub fn from_map(map: &BTreeMap<ValueId, f64>) -> Result<Self> {
        let mut scores = [0.0; 10];
        for value in ValueId::ALL {
            scores[value.index()] = *map
                .get(&value)
                .ok_or_else(|| Error::validation(format!("missing score for `{value}`")))?;
        }
        Self::new(scores)
    }

    pub fn get(&self, value: ValueId) -> f64 {
        self.0[value.index()]
    }

    pub fn with(mut self, value: ValueId, score: f64) -> Result<Self> {
        self.0[value.index()] = score;
        Self::new(self.0)
    }

    pub fn scores(&self) -> &[f64; 10] {
        &self.0
    }

    pub fn iter(&self) -> impl Iterator<Item = (ValueId, f64)> + '_ {
        ValueId::ALL.iter().map(move |&v| (v, self.0[v.index()]))
    }

    /// Per-value normalized scores in `[0, 1]`, canonical order.
    pub fn normalized(&self) -> Vec<f64> {
        self.0
            .iter()
            .map(|&s| (s - SCORE_MIN) / (SCORE_MAX - SCORE_MIN))
            .collect()
    }

    pub fn to_map(&self) -> BTreeMap<ValueId, f64> {
        self.iter().collect()
    }
}

impl Serialize for ValueDistribution {
    fn serialize<S: Serializer>(&self, serializer: S) -> std::result::Result<S::Ok, S::Error> {
        self.to_map().serialize(serializer)
    }
}

impl<'de> Deserialize<'de> for ValueDistribution {
    fn deserialize<D: Deserializer<'de>>(deserializer: D) -> std::result::Result<Self, D::Error> {
        let map = BTreeMap::<ValueId, f64>::deserialize(deserializer)?;
        Self::from_map(&map).map_err(serde::de::Error::custom)
    }
}

/// Map a PVQ score from `[1, 6]` onto `[0, 1]`.
pub fn normalize_score(score: f64) -> Result<f64> {
    if !(SCORE_MIN..=SCORE_MAX).contains(&score) {
        return Err(Error::Range {
            what: "PVQ score",
            value: score,
            lo: SCORE_MIN,
            hi: SCORE_MAX,
        });
    }
    Ok((score - SCORE_MIN) / (SCORE_MAX - SCORE_MIN))
}

const LIKERT_TEXT: [&str; 6] = [
    "Not like me at all",
    "Not like me",
    "A little like me",
    "Somewhat like me",
    "Like me",
    "Very much like me",
];

/// A six-point PVQ answer. `1` is "Not like me at all", `6` is "Very much like me".
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(try_from = "u8", into = "u8")]
pub struct LikertLevel(u8);

impl LikertLevel {
    pub fn new(level: u8) -> Result<Self> {
        if (1..=6).contains(&level) {
            Ok(Self(level))
        } else {
            Err(Error::Range {
                what: "Likert level",
                value: f64::from(level),
                lo: 1.0,
                hi: 6.0,
            })
        }
    }

    pub fn get(self) -> u8 {
        self.0
    }

    pub fn text(self) -> &'static str {
        LIKERT_TEXT[usize::from(self.0 - 1)]
    }

    pub fn from_text(text: &str) -> Option<Self> {
        let text = text.trim();
        LIKERT_TEXT
            .iter()
            .position(|t| t.eq_ignore_ascii_case(text))
            .map(|i| Self(i as u8 + 1))
    }

    pub fn all() -> impl Iterator<Item = LikertLevel> {
        (1..=6).map(LikertLevel)
    }
}

impl TryFrom<u8> for LikertLevel {
    type Error = Error;

    fn try_from(level: u8) -> Result<Self> {
        Self::new(level)
    }
}

impl From<LikertLevel> for u8 {
    fn from(level: LikertLevel) -> u8 {
        level.0
    }
}

impl fmt::Display for LikertLevel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.0)
    }
}

/// A questionnaire item and the value it measures.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct PvqItem {
    pub item_id: String,
    pub text: String,
    pub value: ValueId,
}

const DEFAULT_PVQ_ITEMS: &str = include_str!("../assets/pvq21.jsonl");

/// The 21-item questionnaire shipped with the crate.
pub fn default_pvq_items() -> Vec<PvqItem> {
    parse_pvq_items(DEFAULT_PVQ_ITEMS, Path::new("<builtin pvq21.jsonl>"))
        .expect("builtin questionnaire is valid")
}

pub fn load_pvq_items(path: &Path) -> Result<Vec<PvqItem>> {
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    parse_pvq_items(&text, path)
}

fn parse_pvq_items(text: &str, path: &Path) -> Result<Vec<PvqItem>> {
    let items: Vec<PvqItem> = crate::io::parse_jsonl(text, path)?;
    let mut seen = BTreeSet::new();
    for item in &items {
        if !seen.insert(item.item_id.as_str()) {
            return Err(Error::validation(format!(
                "{}: duplicate item id `{}`",
                path.display(),
                item.item_id
            )));
        }
    }
    let covered: BTreeSet<ValueId> = items.iter().map(|i| i.value).collect();
    if let Some(missing) = ValueId::ALL.iter().find(|v| !covered.contains(v)) {
        return Err(Error::validation(format!(
            "{}: no item measures `{missing}`",
            path.display()
        )));
    }
    Ok(items)
}

fn answered_means(
    responses: &BTreeMap<String, LikertLevel>,
    items: &[PvqItem],
) -> Result<[f64; 10]> {
    let by_id: BTreeMap<&str, &PvqItem> = items.iter().map(|i| (i.item_id.as_str(), i)).collect();
    let mut sums = [0u32; 10];
    let mut counts = [0u32; 10];
    for (item_id, level) in responses {
        let item = by_id
            .get(item_id.as_str())
            .ok_or_else(|| Error::validation(format!("response for unknown item `{item_id}`")))?;
        sums[item.value.index()] += u32::from(level.get());
        counts[item.value.index()] += 1;
    }
    let mut means = [0.0; 10];
    for value in ValueId::ALL {
        let i = value.index();
        if counts[i] == 0 {
            return Err(Error::IncompleteSurvey(value));
        }
        means[i] = f64::from(sums[i]) / f64::from(counts[i]);
    }
    Ok(means)
}

/// Raw per-value mean of the integer responses to the items measuring each value.
pub fn score_pvq(
    responses: &BTreeMap<String, LikertLevel>,
    items: &[PvqItem],
) -> Result<ValueDistribution> {
    ValueDistribution::new(answered_means(responses, items)?)
}

/// Ipsatively centered scores: each value mean minus the respondent's mean over
/// all answered items. These leave the `[1, 6]` scale, so they are returned as a
/// plain map rather than a [`ValueDistribution`].
pub fn score_pvq_centered(
    responses: &BTreeMap<String, LikertLevel>,
    items: &[PvqItem],
) -> Result<BTreeMap<ValueId, f64>> {
    let means = answered_means(responses, items)?;
    let total: u32 = responses.values().map(|l| u32::from(l.get())).sum();
    let grand = f64::from(total) / responses.len() as f64;
    Ok(ValueId::ALL
        .iter()
        .map(|&v| (v, means[v.index()] - grand))
        .collect())
}

/// Extract a Likert level from a free-form answer.
///
/// Candidates are standalone digits 1-6 and the six option phrases when they
/// stand alone (not embedded in a sentence). The last candidate wins.
pub fn parse_likert(text: &str) -> Result<LikertLevel> {
    use regex::Regex;
    use std::sync::LazyLock;

    static NUMBER: LazyLock<Regex> = LazyLock::new(|| Regex::new(r"\d+(?:\.\d+)?").unwrap());
    static PHRASE: LazyLock<Regex> = LazyLock::new(|| {
        Regex::new(
            r"(?i)very much like me|not like me at all|not like me|a little like me|somewhat like me|like me",
        )
        .unwrap()
    });

    let mut best: Option<(usize, LikertLevel)> = None;
    let mut consider = |pos: usize, level: LikertLevel| {
        if best.is_none_or(|(p, _)| pos >= p) {
            best = Some((pos, level));
        }
    };

    for m in NUMBER.find_iter(text) {
        if let Ok(n) = m.as_str().parse::<u8>() {
            if let Ok(level) = LikertLevel::new(n) {
                consider(m.start(), level);
            }
        }
    }
    for m in PHRASE.find_iter(text) {
        let before = text[..m.start()].trim_end().chars().next_back();
        let after = text[m.end()..].trim_start().chars().next();
        let isolated = |c: Option<char>| c.is_none_or(|c| !c.is_alphanumeric());
        if isolated(before) && isolated(after) {
            if let Some(level) = LikertLevel::from_text(m.as_str()) {
                consider(m.start(), level);
            }
        }
    }
    best.map(|(_, level)| level)
        .ok_or_else(|| Error::Unparseable(text.to_string()))
}
