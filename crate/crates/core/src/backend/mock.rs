//! Offline respondent that answers from a known value distribution.

use std::collections::{BTreeMap, BTreeSet};

use rand::Rng as _;

use super::{Backend, CompletionRequest, Generation, Payload};
use crate::corpus::Polarity;
use crate::datagen::sample_likert;
use crate::error::Result;
use crate::rng;
use crate::values::{normalize_score, ValueDistribution};

pub const REFUSAL_TEXT: &str =
    "I cannot answer this question as it goes against the ethical guidelines.";

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum MockMode {
    Deterministic,
    Stochastic(u64),
}

#[derive(Debug, Clone, PartialEq)]
pub struct MockPersona {
    pub distribution: ValueDistribution,
    pub mode: MockMode,
    /// Survey answers to echo, on each question's own scale.
    pub answer_book: BTreeMap<String, f64>,
    /// Question ids the persona refuses to answer.
    pub refuse: BTreeSet<String>,
}

impl MockPersona {
    pub fn new(distribution: ValueDistribution, mode: MockMode) -> Self {
        Self {
            distribution,
            mode,
            answer_book: BTreeMap::new(),
            refuse: BTreeSet::new(),
        }
    }
}

/// Round half up, then clip to the Likert range.
fn round_half_up(score: f64) -> u8 {
    (score + 0.5).floor().clamp(1.0, 6.0) as u8
}

pub fn mock_respond(payload: &Payload, persona: &MockPersona) -> String {
    let stream = |kind: &str, key: &str| match persona.mode {
        MockMode::Deterministic => None,
        MockMode::Stochastic(seed) => Some(rng::rng_for(seed, &[kind, key])),
    };
    match payload {
        Payload::Pvq(item) => {
            let score = persona.distribution.get(item.value);
            let level = match stream("pvq", &item.item_id) {
                None => round_half_up(score),
                Some(mut r) => {
                    sample_likert(score, &mut r).expect("distribution scores are in range")
                }
            };
            level.to_string()
        }
        Payload::Behavior(scenario) => {
            let p = normalize_score(persona.distribution.get(scenario.value))
                .expect("distribution scores are in range");
            let consistent = match stream("behavior", &scenario.id) {
                None => p >= 0.5,
                Some(mut r) => r.random::<f64>() < p,
            };
            let agree = consistent == (scenario.polarity == Polarity::Positive);
            if agree { "I agree" } else { "I disagree" }.to_string()
        }
        Payload::Ess(question) => {
            if persona.refuse.contains(&question.question_id) {
                return REFUSAL_TEXT.to_string();
            }
            let answer = persona
                .answer_book
                .get(&question.question_id)
                .copied()
                .unwrap_or_else(|| question.scale.midpoint());
            format!("{answer}")
        }
        Payload::Free => "I agree.".to_string(),
    }
}

#[derive(Debug, Clone)]
pub struct MockBackend {
    pub persona: MockPersona,
}

impl MockBackend {
    pub fn new(persona: MockPersona) -> Self {
        Self { persona }
    }
}

impl Backend for MockBackend {
    fn generate(&self, request: &CompletionRequest) -> Result<Generation> {
        Ok(Generation {
            text: mock_respond(&request.payload, &self.persona),
            retries: 0,
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::backend::parse::{parse_agreement, Agreement, AvoidanceDetector};
    use crate::corpus::{Chapter, EssQuestion, Scale, Scenario};
    use crate::values::{PvqItem, ValueId};
    use proptest::prelude::*;

    fn item(value: ValueId) -> Payload {
        Payload::Pvq(PvqItem {
            item_id: format!("i-{value}"),
            text: "t".into(),
            value,
        })
    }

    fn scenario(id: usize, value: ValueId, polarity: Polarity) -> Payload {
        Payload::Behavior(Scenario {
            id: format!("s{id}"),
            text: "t".into(),
            value,
            polarity,
        })
    }

    fn persona(score: f64, mode: MockMode) -> MockPersona {
        MockPersona::new(ValueDistribution::uniform(score).unwrap(), mode)
    }

    #[test]
    fn pvq_rounding() {
        let d = ValueDistribution::uniform(2.5)
            .unwrap()
            .with(ValueId::Tradition, 4.2)
            .unwrap();
        let p = MockPersona::new(d, MockMode::Deterministic);
        assert_eq!(mock_respond(&item(ValueId::Tradition), &p), "4");
        assert_eq!(mock_respond(&item(ValueId::Power), &p), "3");
        assert_eq!(
            mock_respond(
                &item(ValueId::Power),
                &persona(6.0, MockMode::Deterministic)
            ),
            "6"
        );
    }

    #[test]
    fn behavior_extremes() {
        for mode in [MockMode::Deterministic, MockMode::Stochastic(3)] {
            let p = persona(6.0, mode);
            for i in 0..200 {
                assert_eq!(
                    mock_respond(&scenario(i, ValueId::Power, Polarity::Positive), &p),
                    "I agree"
                );
                assert_eq!(
                    mock_respond(&scenario(i, ValueId::Power, Polarity::Negative), &p),
                    "I disagree"
                );
            }
        }
    }

    #[test]
    fn stochastic_behavior_rate() {
        let p = persona(3.0, MockMode::Stochastic(11));
        let expected = 0.4;
        let n = 4000;
        let consistent = (0..n)
            .filter(|&i| {
                mock_respond(&scenario(i, ValueId::Hedonism, Polarity::Positive), &p) == "I agree"
            })
            .count();
        let rate = consistent as f64 / n as f64;
        let bound = 3.0 * (expected * (1.0 - expected) / n as f64).sqrt();
        assert!((rate - expected).abs() <= bound, "{rate}");
    }

    #[test]
    fn ess_echo_midpoint_and_refusal() {
        let q = |id: &str, scale| {
            Payload::Ess(EssQuestion {
                question_id: id.into(),
                chapter: Chapter::MediaSocialTrust,
                text: "t".into(),
                scale,
            })
        };
        let mut p = persona(3.0, MockMode::Deterministic);
        p.answer_book.insert("a".into(), 6.25);
        p.refuse.insert("r".into());
        assert_eq!(
            mock_respond(&q("a", Scale::Range { lo: 0, hi: 10 }), &p),
            "6.25"
        );
        assert_eq!(
            mock_respond(&q("b", Scale::Range { lo: 0, hi: 10 }), &p),
            "5"
        );
        assert_eq!(
            mock_respond(&q("c", Scale::Range { lo: 1, hi: 4 }), &p),
            "2.5"
        );
        assert_eq!(mock_respond(&q("r", Scale::Binary), &p), REFUSAL_TEXT);
    }

    proptest! {
        #[test]
        fn behavior_always_parses(score in 1.0f64..=6.0, seed in any::<u64>(), id in 0usize..1000, neg in any::<bool>()) {
            let polarity = if neg { Polarity::Negative } else { Polarity::Positive };
            for mode in [MockMode::Deterministic, MockMode::Stochastic(seed)] {
                let text = mock_respond(&scenario(id, ValueId::Security, polarity), &persona(score, mode));
                let parsed = parse_agreement(&text, &AvoidanceDetector::default());
                prop_assert!(parsed == Agreement::Agree || parsed == Agreement::Disagree);
            }
        }

        #[test]
        fn deterministic_is_pure(score in 1.0f64..=6.0) {
            let p = persona(score, MockMode::Deterministic);
            prop_assert_eq!(mock_respond(&item(ValueId::Universalism), &p), mock_respond(&item(ValueId::Universalism), &p));
        }
    }
}
