//! Loading, validation, and splitting of the argument, scenario, and survey corpora.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;
use std::path::Path;

use rand::seq::SliceRandom;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::io;
use crate::rng;
use crate::values::{LikertLevel, PvqItem, ValueId};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Stance {
    InFavorOf,
    Against,
}

impl Stance {
    pub fn label(self) -> &'static str {
        match self {
            Stance::InFavorOf => "in favor of",
            Stance::Against => "against",
        }
    }

    /// Verb used when a speaker states the stance in the first person.
    pub fn verb(self) -> &'static str {
        match self {
            Stance::InFavorOf => "agree",
            Stance::Against => "disagree",
        }
    }
}

impl std::str::FromStr for Stance {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let key: String = s
            .trim()
            .chars()
            .map(|c| {
                if c == '_' || c == '-' {
                    ' '
                } else {
                    c.to_ascii_lowercase()
                }
            })
            .collect();
        match key.as_str() {
            "in favor of" | "in favour of" | "pro" => Ok(Stance::InFavorOf),
            "against" | "con" => Ok(Stance::Against),
            _ => Err(Error::validation(format!("unknown stance `{s}`"))),
        }
    }
}

impl Serialize for Stance {
    fn serialize<S: serde::Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        s.serialize_str(self.label())
    }
}

impl<'de> Deserialize<'de> for Stance {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        String::deserialize(d)?
            .parse()
            .map_err(serde::de::Error::custom)
    }
}

/// A value-labeled argument: conclusion, stance, premise, and the values the premise expresses.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Argument {
    pub id: String,
    pub conclusion: String,
    pub stance: Stance,
    pub premise: String,
    #[serde(rename = "values")]
    pub labels: BTreeSet<ValueId>,
}

impl Argument {
    fn validate(&self) -> Result<()> {
        if self.id.trim().is_empty() {
            return Err(Error::validation("empty argument id"));
        }
        if self.conclusion.trim().is_empty() {
            return Err(Error::validation("empty conclusion"));
        }
        if self.premise.trim().is_empty() {
            return Err(Error::validation("empty premise"));
        }
        Ok(())
    }
}

fn validate_lines<T>(
    path: &Path,
    text: &str,
    records: &[T],
    check: impl Fn(&T) -> Result<()>,
) -> Result<()> {
    let lines = text
        .lines()
        .enumerate()
        .filter(|(_, l)| !l.trim().is_empty())
        .map(|(i, _)| i + 1);
    for (record, line) in records.iter().zip(lines) {
        check(record).map_err(|e| Error::Parse {
            path: path.to_path_buf(),
            line,
            msg: e.to_string(),
        })?;
    }
    Ok(())
}

pub fn load_arguments(path: &Path) -> Result<Vec<Argument>> {
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    let args: Vec<Argument> = io::parse_jsonl(&text, path)?;
    validate_lines(path, &text, &args, Argument::validate)?;
    let mut ids = BTreeSet::new();
    for a in &args {
        if !ids.insert(a.id.as_str()) {
            return Err(Error::validation(format!(
                "{}: duplicate argument id `{}`",
                path.display(),
                a.id
            )));
        }
    }
    Ok(args)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Polarity {
    Positive,
    Negative,
}

impl fmt::Display for Polarity {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Polarity::Positive => "positive",
            Polarity::Negative => "negative",
        })
    }
}

/// An everyday behavior tagged with one value and its relation to that value.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Scenario {
    pub id: String,
    pub text: String,
    pub value: ValueId,
    pub polarity: Polarity,
}

#[derive(Deserialize)]
struct RawScenario {
    id: String,
    text: String,
    value: ValueId,
    polarity: String,
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize)]
pub struct ScenarioLoad {
    pub scenarios: Vec<Scenario>,
    /// Records labeled "unrelated", dropped at load.
    pub dropped_unrelated: usize,
}

pub fn load_scenarios(path: &Path) -> Result<ScenarioLoad> {
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    let raw: Vec<RawScenario> = io::parse_jsonl(&text, path)?;
    let check = |r: &RawScenario| -> Result<()> {
        if r.text.trim().is_empty() {
            return Err(Error::validation("empty scenario text"));
        }
        match r.polarity.trim().to_ascii_lowercase().as_str() {
            "positive" | "negative" | "unrelated" => Ok(()),
            other => Err(Error::validation(format!("unknown polarity `{other}`"))),
        }
    };
    validate_lines(path, &text, &raw, check)?;
    let mut out = ScenarioLoad::default();
    for r in raw {
        let polarity = match r.polarity.trim().to_ascii_lowercase().as_str() {
            "positive" => Polarity::Positive,
            "negative" => Polarity::Negative,
            _ => {
                out.dropped_unrelated += 1;
                continue;
            }
        };
        out.scenarios.push(Scenario {
            id: r.id,
            text: r.text,
            value: r.value,
            polarity,
        });
    }
    if out.dropped_unrelated > 0 {
        log::warn!(
            "{}: dropped {} unrelated scenario(s)",
            path.display(),
            out.dropped_unrelated
        );
    }
    Ok(out)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Chapter {
    #[serde(rename = "MST")]
    MediaSocialTrust,
    #[serde(rename = "PSWB")]
    PersonalSocialWellBeing,
    #[serde(rename = "POL")]
    Politics,
    #[serde(rename = "UD")]
    UnderstandingDemocracy,
}

impl Chapter {
    pub const ALL: [Chapter; 4] = [
        Chapter::MediaSocialTrust,
        Chapter::PersonalSocialWellBeing,
        Chapter::Politics,
        Chapter::UnderstandingDemocracy,
    ];

    pub fn code(self) -> &'static str {
        match self {
            Chapter::MediaSocialTrust => "MST",
            Chapter::PersonalSocialWellBeing => "PSWB",
            Chapter::Politics => "POL",
            Chapter::UnderstandingDemocracy => "UD",
        }
    }
}

impl fmt::Display for Chapter {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.code())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum Scale {
    Binary,
    Range { lo: i64, hi: i64 },
}

impl Scale {
    pub fn bounds(self) -> (f64, f64) {
        match self {
            Scale::Binary => (0.0, 1.0),
            Scale::Range { lo, hi } => (lo as f64, hi as f64),
        }
    }

    pub fn midpoint(self) -> f64 {
        let (lo, hi) = self.bounds();
        (lo + hi) / 2.0
    }

    pub fn contains(self, answer: f64) -> bool {
        let (lo, hi) = self.bounds();
        (lo..=hi).contains(&answer)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EssQuestion {
    pub question_id: String,
    pub chapter: Chapter,
    pub text: String,
    pub scale: Scale,
}

pub fn load_questions(path: &Path) -> Result<Vec<EssQuestion>> {
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    let questions: Vec<EssQuestion> = io::parse_jsonl(&text, path)?;
    validate_lines(path, &text, &questions, |q| match q.scale {
        Scale::Range { lo, hi } if lo >= hi => Err(Error::validation(format!(
            "scale lo {lo} must be below hi {hi}"
        ))),
        _ if q.question_id.trim().is_empty() => Err(Error::validation("empty question id")),
        _ => Ok(()),
    })?;
    let mut ids = BTreeSet::new();
    for q in &questions {
        if !ids.insert(q.question_id.as_str()) {
            return Err(Error::validation(format!(
                "{}: duplicate question id `{}`",
                path.display(),
                q.question_id
            )));
        }
    }
    Ok(questions)
}

/// Map a raw survey answer (or a group mean of answers) onto `[0, 1]` according to the question's scale.
pub fn rescale_answer(answer: f64, scale: Scale) -> Result<f64> {
    let (lo, hi) = scale.bounds();
    if !scale.contains(answer) {
        return Err(Error::Range {
            what: "answer",
            value: answer,
            lo,
            hi,
        });
    }
    Ok((answer - lo) / (hi - lo))
}

/// One survey respondent: PVQ answers and raw chapter answers (missing answers absent).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Respondent {
    pub respondent_id: String,
    pub country: String,
    pub pvq: BTreeMap<String, LikertLevel>,
    pub answers: BTreeMap<String, f64>,
}

#[derive(Debug, Clone)]
pub struct RespondentOptions {
    /// Cell values treated as refusal/missing.
    pub missing: Vec<String>,
    /// PVQ columns use the inverted coding (1 = "Very much like me").
    pub pvq_reverse_coded: bool,
    /// When set, every respondent's country must be in this set.
    pub countries: Option<BTreeSet<String>>,
}

impl Default for RespondentOptions {
    fn default() -> Self {
        Self {
            missing: ["", "NA", "77", "88", "99"].map(String::from).to_vec(),
            pvq_reverse_coded: false,
            countries: None,
        }
    }
}

pub const RESPONDENT_ID_COLUMN: &str = "respondent_id";
pub const COUNTRY_COLUMN: &str = "country";

pub fn load_respondents(
    path: &Path,
    items: &[PvqItem],
    questions: &[EssQuestion],
    opts: &RespondentOptions,
) -> Result<Vec<Respondent>> {
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(true)
        .from_path(path)
        .map_err(|e| csv_error(path, e))?;
    let headers = reader.headers().map_err(|e| csv_error(path, e))?.clone();
    let column = |name: &str| -> Result<usize> {
        headers
            .iter()
            .position(|h| h.trim() == name)
            .ok_or_else(|| {
                Error::validation(format!("{}: missing column `{name}`", path.display()))
            })
    };
    let id_col = column(RESPONDENT_ID_COLUMN)?;
    let country_col = column(COUNTRY_COLUMN)?;
    let item_cols: Vec<(usize, &PvqItem)> = items
        .iter()
        .filter_map(|item| {
            headers
                .iter()
                .position(|h| h.trim() == item.item_id)
                .map(|c| (c, item))
        })
        .collect();
    let question_cols: Vec<(usize, &EssQuestion)> = questions
        .iter()
        .filter_map(|q| {
            headers
                .iter()
                .position(|h| h.trim() == q.question_id)
                .map(|c| (c, q))
        })
        .collect();

    let mut out = Vec::new();
    let mut ids = BTreeSet::new();
    for record in reader.records() {
        let record = record.map_err(|e| csv_error(path, e))?;
        let line = record.position().map_or(0, |p| p.line() as usize);
        let fail = |msg: String| Error::Parse {
            path: path.to_path_buf(),
            line,
            msg,
        };
        let cell = |c: usize| record.get(c).unwrap_or("").trim();
        let is_missing = |v: &str| opts.missing.iter().any(|m| m == v);

        let respondent_id = cell(id_col).to_string();
        if respondent_id.is_empty() {
            return Err(fail("empty respondent id".into()));
        }
        if !ids.insert(respondent_id.clone()) {
            return Err(fail(format!("duplicate respondent id `{respondent_id}`")));
        }
        let country = cell(country_col).to_string();
        if let Some(allowed) = &opts.countries {
            if !allowed.contains(&country) {
                return Err(fail(format!(
                    "country `{country}` not in the configured set"
                )));
            }
        }

        let mut pvq = BTreeMap::new();
        for &(c, item) in &item_cols {
            let raw = cell(c);
            if is_missing(raw) {
                continue;
            }
            let level: u8 = raw
                .parse()
                .ok()
                .filter(|l| (1..=6).contains(l))
                .ok_or_else(|| fail(format!("PVQ item `{}`: bad answer `{raw}`", item.item_id)))?;
            let level = if opts.pvq_reverse_coded {
                7 - level
            } else {
                level
            };
            pvq.insert(item.item_id.clone(), LikertLevel::new(level)?);
        }

        let mut answers = BTreeMap::new();
        for &(c, q) in &question_cols {
            let raw = cell(c);
            if is_missing(raw) {
                continue;
            }
            let value: f64 = raw
                .parse()
                .map_err(|_| fail(format!("question `{}`: bad answer `{raw}`", q.question_id)))?;
            if q.scale == Scale::Binary && value != 0.0 && value != 1.0 {
                return Err(fail(format!(
                    "question `{}`: binary answer `{raw}` is not 0 or 1",
                    q.question_id
                )));
            }
            rescale_answer(value, q.scale)
                .map_err(|e| fail(format!("question `{}`: {e}", q.question_id)))?;
            answers.insert(q.question_id.clone(), value);
        }

        out.push(Respondent {
            respondent_id,
            country,
            pvq,
            answers,
        });
    }
    Ok(out)
}

fn csv_error(path: &Path, e: csv::Error) -> Error {
    let line = e.position().map_or(0, |p| p.line() as usize);
    Error::Parse {
        path: path.to_path_buf(),
        line,
        msg: e.to_string(),
    }
}

/// Write respondents in the table layout read by [`load_respondents`]; missing cells are empty.
pub fn write_respondents(
    path: &Path,
    respondents: &[Respondent],
    items: &[PvqItem],
    questions: &[EssQuestion],
) -> Result<()> {
    let mut writer = csv::Writer::from_writer(Vec::new());
    let mut header = vec![RESPONDENT_ID_COLUMN.to_string(), COUNTRY_COLUMN.to_string()];
    header.extend(items.iter().map(|i| i.item_id.clone()));
    header.extend(questions.iter().map(|q| q.question_id.clone()));
    writer
        .write_record(&header)
        .map_err(|e| csv_error(path, e))?;
    for r in respondents {
        let mut row = vec![r.respondent_id.clone(), r.country.clone()];
        row.extend(items.iter().map(|i| {
            r.pvq
                .get(&i.item_id)
                .map_or(String::new(), |l| l.to_string())
        }));
        row.extend(questions.iter().map(|q| {
            r.answers
                .get(&q.question_id)
                .map_or(String::new(), |a| a.to_string())
        }));
        writer.write_record(&row).map_err(|e| csv_error(path, e))?;
    }
    let bytes = writer
        .into_inner()
        .map_err(|e| Error::validation(e.to_string()))?;
    io::write_atomic(path, &bytes)
}

/// Train/validation/test partition of argument ids.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct DatasetSplit {
    pub seed: u64,
    pub train: Vec<String>,
    pub validation: Vec<String>,
    pub test: Vec<String>,
}

/// Shuffle argument ids (sorted first, so input order is irrelevant) and cut 80/10/10.
pub fn split_arguments(args: &[Argument], seed: u64) -> Result<DatasetSplit> {
    if args.len() < 10 {
        return Err(Error::validation(format!(
            "need at least 10 arguments to split, got {}",
            args.len()
        )));
    }
    let mut ids: Vec<String> = args.iter().map(|a| a.id.clone()).collect();
    ids.sort();
    ids.shuffle(&mut rng::rng_for(seed, &["split"]));
    let n = ids.len();
    let n_train = (n as f64 * 0.8).round() as usize;
    let n_val = (n as f64 * 0.1).round() as usize;
    let test = ids.split_off(n_train + n_val);
    let validation = ids.split_off(n_train);
    Ok(DatasetSplit {
        seed,
        train: ids,
        validation,
        test,
    })
}

/// Draw a balanced behavior test set: `per_value / 2` positive and negative scenarios per value.
pub fn sample_behavior_testset(
    scenarios: &[Scenario],
    per_value: usize,
    seed: u64,
) -> Result<Vec<Scenario>> {
    if per_value == 0 || !per_value.is_multiple_of(2) {
        return Err(Error::validation(format!(
            "per-value sample size must be a positive even number, got {per_value}"
        )));
    }
    let half = per_value / 2;
    let mut cells: BTreeMap<(ValueId, Polarity), Vec<&Scenario>> = BTreeMap::new();
    for s in scenarios {
        cells.entry((s.value, s.polarity)).or_default().push(s);
    }
    let mut out = Vec::with_capacity(10 * per_value);
    for value in ValueId::ALL {
        for polarity in [Polarity::Positive, Polarity::Negative] {
            let mut cell = cells.remove(&(value, polarity)).unwrap_or_default();
            if cell.len() < half {
                return Err(Error::validation(format!(
                    "behavior cell ({value}, {polarity}) has {} scenario(s), need {half}",
                    cell.len()
                )));
            }
            cell.sort_by(|a, b| a.id.cmp(&b.id));
            let mut rng = rng::rng_for(seed, &["behavior", value.name(), &polarity.to_string()]);
            let (picked, _) = cell.partial_shuffle(&mut rng, half);
            let mut picked: Vec<Scenario> = picked.iter().map(|s| (*s).clone()).collect();
            picked.sort_by(|a, b| a.id.cmp(&b.id));
            out.extend(picked);
        }
    }
    Ok(out)
}
