//! Response parsing and refusal detection.

use std::sync::LazyLock;

use regex::Regex;
use serde::{Deserialize, Serialize};

use crate::corpus::Scale;

pub const DEFAULT_AVOIDANCE_PATTERNS: [&str; 5] = [
    "I cannot answer",
    "I can't answer",
    "as an AI language model",
    "an AI language model",
    "ethical guidelines",
];

fn fold(text: &str) -> String {
    text.replace(['\u{2018}', '\u{2019}'], "'").to_lowercase()
}

/// Case-insensitive substring matcher for refusal phrases.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct AvoidanceDetector {
    patterns: Vec<String>,
}

impl Default for AvoidanceDetector {
    fn default() -> Self {
        Self::new(DEFAULT_AVOIDANCE_PATTERNS)
    }
}

impl AvoidanceDetector {
    pub fn new<S: AsRef<str>>(patterns: impl IntoIterator<Item = S>) -> Self {
        Self {
            patterns: patterns
                .into_iter()
                .map(|p| fold(p.as_ref()))
                .filter(|p| !p.is_empty())
                .collect(),
        }
    }

    pub fn detect(&self, text: &str) -> bool {
        let folded = fold(text);
        self.patterns.iter().any(|p| folded.contains(p.as_str()))
    }
}

pub fn detect_avoidance(text: &str) -> bool {
    static DEFAULT: LazyLock<AvoidanceDetector> = LazyLock::new(AvoidanceDetector::default);
    DEFAULT.detect(text)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Agreement {
    Agree,
    Disagree,
    Avoided,
    Unparseable,
}

/// Refusals first, then "disagree" (which contains "agree"), then "agree".
pub fn parse_agreement(text: &str, detector: &AvoidanceDetector) -> Agreement {
    if detector.detect(text) {
        return Agreement::Avoided;
    }
    let lower = text.to_lowercase();
    if lower.contains("disagree") {
        Agreement::Disagree
    } else if lower.contains("agree") {
        Agreement::Agree
    } else {
        Agreement::Unparseable
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase", tag = "kind", content = "value")]
pub enum Numeric {
    Value(f64),
    Avoided,
    Unparseable,
}

/// Last number in the text (or, on a binary scale, the last yes/no) if it lies on the scale.
pub fn parse_numeric(text: &str, scale: Scale, detector: &AvoidanceDetector) -> Numeric {
    static NUMBER: LazyLock<Regex> = LazyLock::new(|| Regex::new(r"\d+(?:\.\d+)?").unwrap());
    static YES_NO: LazyLock<Regex> = LazyLock::new(|| Regex::new(r"(?i)\b(yes|no)\b").unwrap());

    if detector.detect(text) {
        return Numeric::Avoided;
    }
    let mut last: Option<(usize, f64)> = NUMBER
        .find_iter(text)
        .filter_map(|m| m.as_str().parse().ok().map(|v| (m.start(), v)))
        .last();
    if scale == Scale::Binary {
        if let Some(m) = YES_NO.find_iter(text).last() {
            if last.is_none_or(|(pos, _)| m.start() > pos) {
                let v = if m.as_str().eq_ignore_ascii_case("yes") {
                    1.0
                } else {
                    0.0
                };
                last = Some((m.start(), v));
            }
        }
    }
    match last {
        Some((_, v)) if scale.contains(v) => Numeric::Value(v),
        _ => Numeric::Unparseable,
    }
}
