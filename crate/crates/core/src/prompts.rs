//! Prompt templates with `{name}` placeholders, persona preambles, and few-shot assembly.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;
use std::path::Path;
use std::str::FromStr;

use rand::seq::IndexedRandom;
use serde::{Deserialize, Serialize};

use crate::corpus::{Argument, EssQuestion, Scenario, Stance};
use crate::error::{Error, Result};
use crate::rng;
use crate::values::{PvqItem, ValueDistribution, ValueId};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum TemplateId {
    AgTrain,
    AgWouldSay,
    AgWouldNotSay,
    QaTrain,
    QaAnswer,
    PvqSurvey,
    ArgStance,
    ArgPremise,
    Behavior,
    EssQuestion,
    PersonaShort,
    PersonaLong,
}

const PERSONA_KEYS: [&str; 11] = [
    "achievement",
    "benevolence",
    "conformity",
    "hedonism",
    "power",
    "security",
    "self_direction",
    "stimulation",
    "tradition",
    "universalism",
    "task",
];

impl TemplateId {
    pub const ALL: [TemplateId; 12] = [
        TemplateId::AgTrain,
        TemplateId::AgWouldSay,
        TemplateId::AgWouldNotSay,
        TemplateId::QaTrain,
        TemplateId::QaAnswer,
        TemplateId::PvqSurvey,
        TemplateId::ArgStance,
        TemplateId::ArgPremise,
        TemplateId::Behavior,
        TemplateId::EssQuestion,
        TemplateId::PersonaShort,
        TemplateId::PersonaLong,
    ];

    pub fn name(self) -> &'static str {
        match self {
            TemplateId::AgTrain => "ag_train",
            TemplateId::AgWouldSay => "ag_would_say",
            TemplateId::AgWouldNotSay => "ag_would_not_say",
            TemplateId::QaTrain => "qa_train",
            TemplateId::QaAnswer => "qa_answer",
            TemplateId::PvqSurvey => "pvq_survey",
            TemplateId::ArgStance => "arg_stance",
            TemplateId::ArgPremise => "arg_premise",
            TemplateId::Behavior => "behavior",
            TemplateId::EssQuestion => "ess_question",
            TemplateId::PersonaShort => "persona_short",
            TemplateId::PersonaLong => "persona_long",
        }
    }

    pub fn file_name(self) -> String {
        format!("{}.txt", self.name())
    }

    /// Placeholder names the template accepts.
    pub fn placeholders(self) -> &'static [&'static str] {
        match self {
            TemplateId::AgTrain | TemplateId::ArgStance => &["conclusion"],
            TemplateId::AgWouldSay | TemplateId::AgWouldNotSay | TemplateId::QaTrain => {
                &["conclusion", "premise", "stance"]
            }
            TemplateId::QaAnswer => &["expression", "score", "value"],
            TemplateId::PvqSurvey => &["pvq_item"],
            TemplateId::ArgPremise => &["conclusion", "stance"],
            TemplateId::Behavior => &["scenario"],
            TemplateId::EssQuestion => &["ess_item"],
            TemplateId::PersonaShort | TemplateId::PersonaLong => &PERSONA_KEYS,
        }
    }

    fn embedded(self) -> &'static str {
        match self {
            TemplateId::AgTrain => include_str!("../assets/templates/ag_train.txt"),
            TemplateId::AgWouldSay => include_str!("../assets/templates/ag_would_say.txt"),
            TemplateId::AgWouldNotSay => include_str!("../assets/templates/ag_would_not_say.txt"),
            TemplateId::QaTrain => include_str!("../assets/templates/qa_train.txt"),
            TemplateId::QaAnswer => include_str!("../assets/templates/qa_answer.txt"),
            TemplateId::PvqSurvey => include_str!("../assets/templates/pvq_survey.txt"),
            TemplateId::ArgStance => include_str!("../assets/templates/arg_stance.txt"),
            TemplateId::ArgPremise => include_str!("../assets/templates/arg_premise.txt"),
            TemplateId::Behavior => include_str!("../assets/templates/behavior.txt"),
            TemplateId::EssQuestion => include_str!("../assets/templates/ess_question.txt"),
            TemplateId::PersonaShort => include_str!("../assets/templates/persona_short.txt"),
            TemplateId::PersonaLong => include_str!("../assets/templates/persona_long.txt"),
        }
    }
}

impl fmt::Display for TemplateId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

/// A template body split into literal text and placeholder names.
#[derive(Debug, Clone, PartialEq, Eq)]
enum Piece {
    Text(String),
    Slot(String),
}

fn is_slot_name(s: &str) -> bool {
    !s.is_empty() && s.bytes().all(|b| b.is_ascii_lowercase() || b == b'_')
}

fn parse_body(body: &str) -> Vec<Piece> {
    let mut pieces = Vec::new();
    let mut text = String::new();
    let mut rest = body;
    while let Some(open) = rest.find('{') {
        let after = &rest[open + 1..];
        match after.find('}') {
            Some(close) if is_slot_name(&after[..close]) => {
                text.push_str(&rest[..open]);
                if !text.is_empty() {
                    pieces.push(Piece::Text(std::mem::take(&mut text)));
                }
                pieces.push(Piece::Slot(after[..close].to_string()));
                rest = &after[close + 1..];
            }
            _ => {
                text.push_str(&rest[..=open]);
                rest = after;
            }
        }
    }
    text.push_str(rest);
    if !text.is_empty() {
        pieces.push(Piece::Text(text));
    }
    pieces
}

fn strip_final_newline(body: &str) -> &str {
    body.strip_suffix("\r\n")
        .or_else(|| body.strip_suffix('\n'))
        .unwrap_or(body)
}

#[derive(Debug, Clone)]
pub struct TemplateRegistry {
    templates: BTreeMap<TemplateId, Vec<Piece>>,
}

impl Default for TemplateRegistry {
    fn default() -> Self {
        Self::embedded()
    }
}

impl TemplateRegistry {
    pub fn embedded() -> Self {
        let templates = TemplateId::ALL
            .iter()
            .map(|&id| (id, parse_body(strip_final_newline(id.embedded()))))
            .collect();
        Self { templates }
    }

    /// Embedded templates, replaced by any `<name>.txt` found in `dir`.
    pub fn with_overrides(dir: &Path) -> Result<Self> {
        let mut reg = Self::embedded();
        for id in TemplateId::ALL {
            let path = dir.join(id.file_name());
            if !path.exists() {
                continue;
            }
            let body = std::fs::read_to_string(&path).map_err(|e| Error::io(&path, e))?;
            let pieces = parse_body(strip_final_newline(&body));
            for piece in &pieces {
                if let Piece::Slot(name) = piece {
                    if !id.placeholders().contains(&name.as_str()) {
                        return Err(Error::UnknownPlaceholder(format!(
                            "{name} in {}",
                            path.display()
                        )));
                    }
                }
            }
            log::info!("template {id} overridden from {}", path.display());
            reg.templates.insert(id, pieces);
        }
        Ok(reg)
    }

    /// Substitute every placeholder in one pass; substituted text is never re-scanned.
    pub fn render(&self, id: TemplateId, vars: &BTreeMap<&str, String>) -> Result<String> {
        let pieces = &self.templates[&id];
        let used: BTreeSet<&str> = pieces
            .iter()
            .filter_map(|p| match p {
                Piece::Slot(name) => Some(name.as_str()),
                Piece::Text(_) => None,
            })
            .collect();
        if let Some(extra) = vars.keys().find(|k| !used.contains(*k)) {
            return Err(Error::UnknownPlaceholder(format!(
                "{extra} for template {id}"
            )));
        }
        let mut out = String::new();
        for piece in pieces {
            match piece {
                Piece::Text(t) => out.push_str(t),
                Piece::Slot(name) => out.push_str(vars.get(name.as_str()).ok_or_else(|| {
                    Error::MissingPlaceholder(format!("{name} for template {id}"))
                })?),
            }
        }
        Ok(out)
    }
}

fn vars<const N: usize>(pairs: [(&'static str, String); N]) -> BTreeMap<&'static str, String> {
    pairs.into_iter().collect()
}

/// Templates that append their own full stop get the text without one.
pub fn trim_period(text: &str) -> &str {
    let t = text.trim();
    t.strip_suffix('.').unwrap_or(t)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum PersonaMode {
    Short,
    Long,
}

impl FromStr for PersonaMode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "short" => Ok(PersonaMode::Short),
            "long" => Ok(PersonaMode::Long),
            _ => Err(Error::validation(format!("unknown persona mode `{s}`"))),
        }
    }
}

fn placeholder_key(value: ValueId) -> &'static str {
    PERSONA_KEYS[value.index()]
}

impl TemplateRegistry {
    /// Persona preamble followed by `task`.
    pub fn persona_with_task(
        &self,
        target: &ValueDistribution,
        mode: PersonaMode,
        task: &str,
    ) -> Result<String> {
        let mut map: BTreeMap<&str, String> = target
            .iter()
            .map(|(v, s)| (placeholder_key(v), format!("{s:.1}")))
            .collect();
        map.insert("task", task.to_string());
        let id = match mode {
            PersonaMode::Short => TemplateId::PersonaShort,
            PersonaMode::Long => TemplateId::PersonaLong,
        };
        self.render(id, &map)
    }

    /// Persona preamble alone, for use as a system message.
    pub fn render_persona(&self, target: &ValueDistribution, mode: PersonaMode) -> Result<String> {
        Ok(self
            .persona_with_task(target, mode, "")?
            .trim_end()
            .to_string())
    }

    pub fn ag_train(&self, arg: &Argument) -> Result<String> {
        self.render(
            TemplateId::AgTrain,
            &vars([("conclusion", arg.conclusion.trim().to_string())]),
        )
    }

    pub fn ag_completion(&self, arg: &Argument, would_say: bool) -> Result<String> {
        let id = if would_say {
            TemplateId::AgWouldSay
        } else {
            TemplateId::AgWouldNotSay
        };
        self.render(id, &argument_vars(arg))
    }

    pub fn qa_train(&self, arg: &Argument) -> Result<String> {
        self.render(TemplateId::QaTrain, &argument_vars(arg))
    }

    pub fn qa_answer(&self, value: ValueId, expression: &str, level: u8) -> Result<String> {
        self.render(
            TemplateId::QaAnswer,
            &vars([
                ("value", value.name().to_string()),
                ("expression", expression.to_string()),
                ("score", level.to_string()),
            ]),
        )
    }

    pub fn pvq(&self, item: &PvqItem) -> Result<String> {
        self.render(
            TemplateId::PvqSurvey,
            &vars([("pvq_item", trim_period(&item.text).to_string())]),
        )
    }

    pub fn arg_stance(&self, conclusion: &str) -> Result<String> {
        self.render(
            TemplateId::ArgStance,
            &vars([("conclusion", conclusion.trim().to_string())]),
        )
    }

    pub fn arg_premise(&self, conclusion: &str, stance: Stance) -> Result<String> {
        self.render(
            TemplateId::ArgPremise,
            &vars([
                ("conclusion", conclusion.trim().to_string()),
                ("stance", stance.verb().to_string()),
            ]),
        )
    }

    pub fn behavior(&self, scenario: &Scenario) -> Result<String> {
        self.render(
            TemplateId::Behavior,
            &vars([("scenario", trim_period(&scenario.text).to_string())]),
        )
    }

    pub fn ess(&self, question: &EssQuestion) -> Result<String> {
        self.render(
            TemplateId::EssQuestion,
            &vars([("ess_item", trim_period(&question.text).to_string())]),
        )
    }
}

fn argument_vars(arg: &Argument) -> BTreeMap<&'static str, String> {
    vars([
        ("conclusion", arg.conclusion.trim().to_string()),
        ("stance", arg.stance.verb().to_string()),
        ("premise", trim_period(&arg.premise).to_string()),
    ])
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Exemplar {
    pub question: String,
    pub answer: String,
    /// Alternate answer with reasoning, used for chain-of-thought blocks.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub rationale: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct FewShotBlock {
    pub k: usize,
    pub exemplars: Vec<Exemplar>,
    pub chain_of_thought: bool,
}

impl FewShotBlock {
    /// Draw `k` distinct exemplars from `pool`, seeded by `seed` and `key`.
    pub fn sample(pool: &[Exemplar], k: usize, seed: u64, key: &str) -> Result<Self> {
        if k > pool.len() {
            return Err(Error::validation(format!(
                "few-shot k = {k} exceeds the exemplar pool ({})",
                pool.len()
            )));
        }
        let mut rng = rng::rng_for(seed, &["few-shot", key]);
        Ok(Self {
            k,
            exemplars: pool.choose_multiple(&mut rng, k).cloned().collect(),
            chain_of_thought: false,
        })
    }
}

/// Prefix the task prompt with `block.k` exemplars, each as its question followed by its answer.
pub fn assemble_few_shot(task_prompt: &str, block: &FewShotBlock) -> Result<String> {
    if block.k != block.exemplars.len() {
        return Err(Error::validation(format!(
            "few-shot block declares k = {} but holds {} exemplar(s)",
            block.k,
            block.exemplars.len()
        )));
    }
    if block.k == 0 {
        return Ok(task_prompt.to_string());
    }
    let mut out = String::new();
    for ex in &block.exemplars {
        let answer = match (&ex.rationale, block.chain_of_thought) {
            (Some(r), true) => r,
            _ => &ex.answer,
        };
        out.push_str(&ex.question);
        out.push(' ');
        out.push_str(answer);
        out.push_str("\n\n");
    }
    out.push_str(task_prompt);
    Ok(out)
}
