//! Completion backends: an HTTP chat-completion client and an offline mock respondent.

pub mod http;
pub mod mock;
pub mod parse;

use std::time::{Duration, Instant};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::corpus::{EssQuestion, Scenario};
use crate::error::{Error, Result};
use crate::values::{parse_likert, PvqItem};

pub use http::{HttpBackend, HttpConfig};
pub use mock::{MockBackend, MockMode, MockPersona, REFUSAL_TEXT};
pub use parse::{
    detect_avoidance, parse_agreement, parse_numeric, Agreement, AvoidanceDetector, Numeric,
};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Sampling {
    pub temperature: f64,
    pub top_p: f64,
}

impl Default for Sampling {
    fn default() -> Self {
        Self {
            temperature: 1.0,
            top_p: 0.5,
        }
    }
}

impl Sampling {
    pub fn new(temperature: f64, top_p: f64) -> Result<Self> {
        if !(temperature >= 0.0 && temperature.is_finite()) {
            return Err(Error::validation(format!(
                "temperature {temperature} must be >= 0"
            )));
        }
        if !(top_p > 0.0 && top_p <= 1.0) {
            return Err(Error::validation(format!(
                "top_p {top_p} must be in (0, 1]"
            )));
        }
        Ok(Self { temperature, top_p })
    }
}

/// What a prompt asks for; drives response classification and the mock's answer.
#[derive(Debug, Clone, PartialEq)]
pub enum Payload {
    Pvq(PvqItem),
    Behavior(Scenario),
    Ess(EssQuestion),
    Free,
}

#[derive(Debug, Clone, PartialEq)]
pub struct CompletionRequest {
    /// Persona preamble, sent as a system message when present.
    pub system: Option<String>,
    pub prompt: String,
    pub sampling: Sampling,
    pub model: String,
    pub max_tokens: u32,
    pub payload: Payload,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Classification {
    Answered,
    Avoided,
    Unparseable,
}

#[derive(Debug, Clone, PartialEq)]
pub struct BackendResponse {
    pub text: String,
    pub latency: Duration,
    pub retries: u32,
    pub classification: Classification,
}

/// Raw text from a backend plus how many retries it took.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Generation {
    pub text: String,
    pub retries: u32,
}

pub trait Backend: Send + Sync {
    fn generate(&self, request: &CompletionRequest) -> Result<Generation>;
}

pub fn classify(text: &str, payload: &Payload, detector: &AvoidanceDetector) -> Classification {
    if detector.detect(text) {
        return Classification::Avoided;
    }
    let parsed = match payload {
        Payload::Pvq(_) => parse_likert(text).is_ok(),
        Payload::Behavior(_) => parse_agreement(text, detector) != Agreement::Unparseable,
        Payload::Ess(q) => matches!(parse_numeric(text, q.scale, detector), Numeric::Value(_)),
        Payload::Free => !text.trim().is_empty(),
    };
    if parsed {
        Classification::Answered
    } else {
        Classification::Unparseable
    }
}

pub fn complete(
    backend: &dyn Backend,
    request: &CompletionRequest,
    detector: &AvoidanceDetector,
) -> Result<BackendResponse> {
    let start = Instant::now();
    let generation = backend.generate(request)?;
    Ok(BackendResponse {
        classification: classify(&generation.text, &request.payload, detector),
        text: generation.text,
        latency: start.elapsed(),
        retries: generation.retries,
    })
}

/// Run requests with at most `cap` in flight; results keep request order.
pub fn complete_all(
    backend: &dyn Backend,
    requests: &[CompletionRequest],
    cap: usize,
    detector: &AvoidanceDetector,
) -> Result<Vec<Result<BackendResponse>>> {
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(cap.max(1))
        .build()
        .map_err(|e| Error::validation(format!("cannot build worker pool: {e}")))?;
    Ok(pool.install(|| {
        requests
            .par_iter()
            .with_max_len(1)
            .map(|r| complete(backend, r, detector))
            .collect()
    }))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::values::ValueDistribution;

    #[test]
    fn sampling_bounds() {
        assert!(Sampling::new(1.0, 0.5).is_ok());
        assert!(Sampling::new(-0.1, 0.5).is_err());
        assert!(Sampling::new(1.0, 0.0).is_err());
        assert!(Sampling::new(1.0, 1.0).is_ok());
    }

    #[test]
    fn complete_all_preserves_order() {
        let scores = [1.0, 2.0, 3.0, 4.0, 5.0, 6.0, 1.0, 2.0, 3.0, 4.0];
        let persona = MockPersona::new(
            ValueDistribution::new(scores).unwrap(),
            MockMode::Deterministic,
        );
        let backend = MockBackend::new(persona);
        let items = crate::values::default_pvq_items();
        let requests: Vec<_> = items
            .iter()
            .map(|item| CompletionRequest {
                system: None,
                prompt: item.text.clone(),
                sampling: Sampling::default(),
                model: "mock".into(),
                max_tokens: 16,
                payload: Payload::Pvq(item.clone()),
            })
            .collect();
        let out = complete_all(&backend, &requests, 4, &AvoidanceDetector::default()).unwrap();
        assert_eq!(out.len(), items.len());
        for (item, r) in items.iter().zip(out) {
            let r = r.unwrap();
            assert_eq!(r.text, format!("{}", scores[item.value.index()]));
            assert_eq!(r.classification, Classification::Answered);
        }
    }

    #[test]
    fn classification_by_payload() {
        let d = AvoidanceDetector::default();
        let q = EssQuestion {
            question_id: "q".into(),
            chapter: crate::corpus::Chapter::Politics,
            text: "t".into(),
            scale: crate::corpus::Scale::Range { lo: 0, hi: 10 },
        };
        assert_eq!(
            classify("12", &Payload::Ess(q.clone()), &d),
            Classification::Unparseable
        );
        assert_eq!(
            classify("10", &Payload::Ess(q), &d),
            Classification::Answered
        );
        assert_eq!(
            classify(REFUSAL_TEXT, &Payload::Free, &d),
            Classification::Avoided
        );
    }
}
