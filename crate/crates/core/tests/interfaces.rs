//! Contracts consumed by an external trainer/server: training JSON Lines and the chat request body.

use std::collections::BTreeSet;

use serde_json::Value;
use vinject_core::backend::{CompletionRequest, HttpBackend, Payload, Sampling};
use vinject_core::corpus::{Argument, Stance};
use vinject_core::datagen::{gen_ag_examples, gen_qa_examples, DatagenConfig, EmptyLabelPolicy};
use vinject_core::io::to_jsonl;
use vinject_core::prompts::TemplateRegistry;
use vinject_core::targets::{Origin, TargetProfile};
use vinject_core::{ValueDistribution, ValueId};

fn args() -> Vec<Argument> {
    (0..6)
        .map(|i| Argument {
            id: format!("A{i:02}"),
            conclusion: format!("We should adopt policy {i}"),
            stance: if i % 2 == 0 {
                Stance::InFavorOf
            } else {
                Stance::Against
            },
            premise: format!("Policy {i} protects people."),
            labels: [ValueId::Security, ValueId::Universalism]
                .into_iter()
                .take(1 + i % 2)
                .collect(),
        })
        .collect()
}

fn target() -> TargetProfile {
    TargetProfile {
        target_id: "cluster-000".into(),
        origin: Origin::Cluster(0),
        member_count: 3,
        distribution: ValueDistribution::uniform(4.5).unwrap(),
    }
}

#[test]
fn training_lines_carry_prompt_completion_and_meta() {
    let reg = TemplateRegistry::embedded();
    let cfg = DatagenConfig::new(3.0, 1, EmptyLabelPolicy::Skip).unwrap();
    let ag = gen_ag_examples(&reg, &args(), &target(), &cfg).unwrap();
    let qa = gen_qa_examples(&reg, &args(), &target(), &cfg).unwrap();
    assert_eq!(ag.examples.len(), 6);
    assert_eq!(qa.len(), 9);
    let bytes = to_jsonl(&[ag.examples, qa].concat()).unwrap();
    let text = String::from_utf8(bytes).unwrap();
    for line in text.lines() {
        let v: Value = serde_json::from_str(line).unwrap();
        let keys: BTreeSet<&str> = v.as_object().unwrap().keys().map(String::as_str).collect();
        assert_eq!(
            keys,
            BTreeSet::from(["completion", "meta", "prompt", "task"])
        );
        assert!(v["prompt"].as_str().unwrap().len() > 10);
        assert!(!v["completion"].as_str().unwrap().is_empty());
        assert!(["AG", "QA"].contains(&v["task"].as_str().unwrap()));
        assert_eq!(v["meta"]["target_id"], "cluster-000");
    }
    let first: Value = serde_json::from_str(text.lines().next().unwrap()).unwrap();
    assert!(first["completion"]
        .as_str()
        .unwrap()
        .starts_with("I would say"));
}

#[test]
fn chat_request_body_shape() {
    let req = CompletionRequest {
        system: None,
        prompt: "Q".into(),
        sampling: Sampling::new(0.2, 0.25).unwrap(),
        model: "tiny".into(),
        max_tokens: 8,
        payload: Payload::Free,
    };
    let body = HttpBackend::request_body(&req);
    assert_eq!(
        body,
        serde_json::json!({
            "model": "tiny",
            "messages": [{"role": "user", "content": "Q"}],
            "temperature": 0.2,
            "top_p": 0.25,
            "max_tokens": 8
        })
    );
}
