//! Training-example generation for a target profile: argument generation (AG)
//! with would-say / would-not-say framing, and question answering (QA) with
//! probabilistic Likert rounding.

use std::fmt;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::corpus::Argument;
use crate::error::{Error, Result};
use crate::prompts::TemplateRegistry;
use crate::rng;
use crate::targets::TargetProfile;
use crate::values::{ValueDistribution, ValueId};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EmptyLabelPolicy {
    #[default]
    Skip,
    WouldSay,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DatagenConfig {
    pub gamma: f64,
    pub seed: u64,
    pub empty_label_policy: EmptyLabelPolicy,
}

impl DatagenConfig {
    pub fn new(gamma: f64, seed: u64, empty_label_policy: EmptyLabelPolicy) -> Result<Self> {
        if !(1.0..=6.0).contains(&gamma) {
            return Err(Error::Range {
                what: "gamma",
                value: gamma,
                lo: 1.0,
                hi: 6.0,
            });
        }
        Ok(Self {
            gamma,
            seed,
            empty_label_policy,
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Frame {
    WouldSay,
    WouldNotSay,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum AgLabel {
    Framed(Frame),
    Skipped,
}

/// Frame an argument by the target's least-prioritized labeled value.
pub fn ag_label(arg: &Argument, target: &ValueDistribution, cfg: &DatagenConfig) -> AgLabel {
    let least = arg
        .labels
        .iter()
        .map(|&v| target.get(v))
        .min_by(f64::total_cmp);
    match (least, cfg.empty_label_policy) {
        (None, EmptyLabelPolicy::Skip) => AgLabel::Skipped,
        (None, EmptyLabelPolicy::WouldSay) => AgLabel::Framed(Frame::WouldSay),
        (Some(m), _) if m >= cfg.gamma => AgLabel::Framed(Frame::WouldSay),
        (Some(_), _) => AgLabel::Framed(Frame::WouldNotSay),
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Task {
    #[serde(rename = "AG")]
    Ag,
    #[serde(rename = "QA")]
    Qa,
}

impl fmt::Display for Task {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Task::Ag => "AG",
            Task::Qa => "QA",
        })
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ExampleMeta {
    pub argument_id: String,
    pub target_id: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub frame: Option<Frame>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub value: Option<ValueId>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub level: Option<u8>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TrainingExample {
    pub task: Task,
    pub prompt: String,
    pub completion: String,
    pub meta: ExampleMeta,
}

fn sorted_by_id(args: &[Argument]) -> Vec<&Argument> {
    let mut sorted: Vec<&Argument> = args.iter().collect();
    sorted.sort_by(|a, b| a.id.cmp(&b.id));
    sorted
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct AgOutput {
    pub examples: Vec<TrainingExample>,
    pub skipped: usize,
}

pub fn gen_ag_examples(
    reg: &TemplateRegistry,
    args: &[Argument],
    target: &TargetProfile,
    cfg: &DatagenConfig,
) -> Result<AgOutput> {
    let results: Vec<Option<TrainingExample>> = sorted_by_id(args)
        .into_par_iter()
        .map(|arg| {
            let AgLabel::Framed(frame) = ag_label(arg, &target.distribution, cfg) else {
                return Ok(None);
            };
            Ok(Some(TrainingExample {
                task: Task::Ag,
                prompt: reg.ag_train(arg)?,
                completion: reg.ag_completion(arg, frame == Frame::WouldSay)?,
                meta: ExampleMeta {
                    argument_id: arg.id.clone(),
                    target_id: target.target_id.clone(),
                    frame: Some(frame),
                    value: None,
                    level: None,
                },
            }))
        })
        .collect::<Result<_>>()?;
    let skipped = results.iter().filter(|r| r.is_none()).count();
    if skipped > 0 {
        log::warn!(
            "{}: skipped {skipped} argument(s) with no value labels",
            target.target_id
        );
    }
    Ok(AgOutput {
        examples: results.into_iter().flatten().collect(),
        skipped,
    })
}

/// Round a score down or up to an adjacent level, up with probability equal to its fractional part.
pub fn sample_likert(score: f64, rng: &mut impl rand::Rng) -> Result<u8> {
    if !(1.0..=6.0).contains(&score) {
        return Err(Error::Range {
            what: "PVQ score",
            value: score,
            lo: 1.0,
            hi: 6.0,
        });
    }
    let floor = score.floor();
    let frac = score - floor;
    let up = frac > 0.0 && rng.random::<f64>() < frac;
    Ok(floor as u8 + u8::from(up))
}

const EXPRESSIONS: [&str; 6] = [
    "not important to me at all",
    "not important to me",
    "a little important to me",
    "somewhat important to me",
    "important to me",
    "very much important to me",
];

pub fn expression_for(level: u8) -> Result<&'static str> {
    EXPRESSIONS
        .get(usize::from(level).wrapping_sub(1))
        .copied()
        .ok_or(Error::Range {
            what: "Likert level",
            value: f64::from(level),
            lo: 1.0,
            hi: 6.0,
        })
}

pub fn gen_qa_examples(
    reg: &TemplateRegistry,
    args: &[Argument],
    target: &TargetProfile,
    cfg: &DatagenConfig,
) -> Result<Vec<TrainingExample>> {
    let per_arg: Vec<Vec<TrainingExample>> = sorted_by_id(args)
        .into_par_iter()
        .map(|arg| {
            let prompt = reg.qa_train(arg)?;
            arg.labels
                .iter()
                .map(|&value| {
                    let mut rng =
                        rng::rng_for(cfg.seed, &[&target.target_id, &arg.id, value.name()]);
                    let level = sample_likert(target.distribution.get(value), &mut rng)?;
                    Ok(TrainingExample {
                        task: Task::Qa,
                        prompt: prompt.clone(),
                        completion: reg.qa_answer(value, expression_for(level)?, level)?,
                        meta: ExampleMeta {
                            argument_id: arg.id.clone(),
                            target_id: target.target_id.clone(),
                            frame: None,
                            value: Some(value),
                            level: Some(level),
                        },
                    })
                })
                .collect()
        })
        .collect::<Result<_>>()?;
    Ok(per_arg.into_iter().flatten().collect())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::corpus::Stance;
    use crate::targets::Origin;
    use proptest::prelude::*;
    use rand::SeedableRng;
    use std::collections::BTreeSet;

    fn figure_target() -> ValueDistribution {
        ValueDistribution::uniform(3.0)
            .unwrap()
            .with(ValueId::Security, 3.1)
            .unwrap()
            .with(ValueId::Benevolence, 2.1)
            .unwrap()
            .with(ValueId::SelfDirection, 2.1)
            .unwrap()
            .with(ValueId::Tradition, 4.2)
            .unwrap()
    }

    fn profile(d: ValueDistribution) -> TargetProfile {
        TargetProfile {
            target_id: "cluster-000".into(),
            origin: Origin::Cluster(0),
            member_count: 1,
            distribution: d,
        }
    }

    fn arg(id: &str, labels: &[ValueId]) -> Argument {
        Argument {
            id: id.into(),
            conclusion: "We should abandon the use of school uniform".into(),
            stance: Stance::InFavorOf,
            premise: "School uniforms are too expensive.".into(),
            labels: labels.iter().copied().collect(),
        }
    }

    fn cfg() -> DatagenConfig {
        DatagenConfig::new(3.0, 7, EmptyLabelPolicy::Skip).unwrap()
    }

    #[test]
    fn ag_label_examples() {
        let t = figure_target();
        assert_eq!(
            ag_label(&arg("a", &[ValueId::Security]), &t, &cfg()),
            AgLabel::Framed(Frame::WouldSay)
        );
        assert_eq!(
            ag_label(
                &arg("a", &[ValueId::Benevolence, ValueId::SelfDirection]),
                &t,
                &cfg()
            ),
            AgLabel::Framed(Frame::WouldNotSay)
        );
        assert_eq!(ag_label(&arg("a", &[]), &t, &cfg()), AgLabel::Skipped);
        let lenient = DatagenConfig {
            empty_label_policy: EmptyLabelPolicy::WouldSay,
            ..cfg()
        };
        assert_eq!(
            ag_label(&arg("a", &[]), &t, &lenient),
            AgLabel::Framed(Frame::WouldSay)
        );
    }

    #[test]
    fn gamma_is_validated() {
        assert!(DatagenConfig::new(0.5, 0, EmptyLabelPolicy::Skip).is_err());
        assert!(DatagenConfig::new(6.5, 0, EmptyLabelPolicy::Skip).is_err());
    }

    #[test]
    fn ag_examples_are_framed() {
        let reg = TemplateRegistry::embedded();
        let args = [
            arg("b", &[ValueId::Benevolence]),
            arg("a", &[ValueId::Security]),
            arg("c", &[]),
        ];
        let out = gen_ag_examples(&reg, &args, &profile(figure_target()), &cfg()).unwrap();
        assert_eq!(out.skipped, 1);
        assert_eq!(out.examples.len(), 2);
        assert_eq!(out.examples[0].meta.argument_id, "a");
        assert_eq!(
            out.examples[0].completion,
            "I would say, \"I agree with that because School uniforms are too expensive.\" about We should abandon the use of school uniform"
        );
        assert!(out.examples[1].completion.starts_with("I would not say"));
        assert!(out.examples[0]
            .prompt
            .starts_with("Tell me what you would say"));
    }

    #[test]
    fn sample_likert_edges() {
        let mut rng = rng::Rng::seed_from_u64(0);
        for _ in 0..1000 {
            assert_eq!(sample_likert(4.0, &mut rng).unwrap(), 4);
            assert_eq!(sample_likert(6.0, &mut rng).unwrap(), 6);
            assert_eq!(sample_likert(1.0, &mut rng).unwrap(), 1);
        }
        assert!(sample_likert(6.01, &mut rng).is_err());
    }

    #[test]
    fn expressions() {
        assert_eq!(expression_for(1).unwrap(), "not important to me at all");
        assert_eq!(expression_for(6).unwrap(), "very much important to me");
        assert!(expression_for(7).is_err());
        assert!(expression_for(0).is_err());
    }

    #[test]
    fn qa_examples_one_per_label() {
        let reg = TemplateRegistry::embedded();
        let args = [
            arg("a", &[ValueId::Benevolence, ValueId::Universalism]),
            arg("b", &[]),
            arg("c", &[ValueId::Tradition]),
        ];
        let out = gen_qa_examples(&reg, &args, &profile(figure_target()), &cfg()).unwrap();
        assert_eq!(out.len(), 3);
        assert!(out[0].prompt.contains(
            "Statement: I agree with We should abandon the use of school uniform. School uniforms are too expensive.\nAnswer:"
        ));
        for ex in &out {
            let level = ex.meta.level.unwrap();
            assert!(ex.completion.ends_with(&format!("my answer is {level}.")));
        }
        assert_eq!(out[1].meta.value, Some(ValueId::Universalism));
    }

    #[test]
    fn qa_mean_tracks_target() {
        let reg = TemplateRegistry::embedded();
        let args: Vec<_> = (0..10_000)
            .map(|i| arg(&format!("a{i:05}"), &[ValueId::Tradition]))
            .collect();
        let out = gen_qa_examples(&reg, &args, &profile(figure_target()), &cfg()).unwrap();
        let levels: Vec<u8> = out.iter().map(|e| e.meta.level.unwrap()).collect();
        assert!(levels.iter().all(|l| *l == 4 || *l == 5));
        let mean = levels.iter().map(|&l| f64::from(l)).sum::<f64>() / levels.len() as f64;
        assert!((mean - 4.2).abs() <= 0.02, "{mean}");
    }

    #[test]
    fn integer_targets_are_seed_independent() {
        let reg = TemplateRegistry::embedded();
        let args = [arg("a", &[ValueId::Power, ValueId::Hedonism])];
        let t = profile(ValueDistribution::uniform(5.0).unwrap());
        let a = gen_qa_examples(&reg, &args, &t, &cfg()).unwrap();
        let b = gen_qa_examples(&reg, &args, &t, &DatagenConfig { seed: 99, ..cfg() }).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn meta_serialization() {
        let reg = TemplateRegistry::embedded();
        let args = [arg("a", &[ValueId::Security])];
        let t = profile(figure_target());
        let ag = &gen_ag_examples(&reg, &args, &t, &cfg()).unwrap().examples[0];
        let qa = &gen_qa_examples(&reg, &args, &t, &cfg()).unwrap()[0];
        let ag_json = serde_json::to_value(ag).unwrap();
        let qa_json = serde_json::to_value(qa).unwrap();
        assert_eq!(ag_json["task"], "AG");
        assert_eq!(ag_json["meta"]["frame"], "would_say");
        assert_eq!(qa_json["task"], "QA");
        assert_eq!(qa_json["meta"]["value"], "security");
        assert!(qa_json["meta"].get("frame").is_none());
    }

    proptest! {
        #[test]
        fn raising_a_score_never_unsays(
            scores in proptest::array::uniform10(1.0f64..=6.0),
            label_mask in 1u16..1024,
            bump_index in 0usize..10,
            bump in 0.0f64..5.0,
        ) {
            let labels: BTreeSet<ValueId> = ValueId::ALL.iter().copied().filter(|v| label_mask & (1 << v.index()) != 0).collect();
            let a = Argument { labels, ..arg("x", &[]) };
            let before = ValueDistribution::new(scores).unwrap();
            let v = ValueId::ALL[bump_index];
            let after = before.with(v, (before.get(v) + bump).min(6.0)).unwrap();
            if ag_label(&a, &before, &cfg()) == AgLabel::Framed(Frame::WouldSay) {
                prop_assert_eq!(ag_label(&a, &after, &cfg()), AgLabel::Framed(Frame::WouldSay));
            }
        }

        #[test]
        fn sample_is_adjacent(score in 1.0f64..=6.0, seed in any::<u64>()) {
            let mut rng = rng::Rng::seed_from_u64(seed);
            let l = f64::from(sample_likert(score, &mut rng).unwrap());
            prop_assert!(l == score.floor() || l == score.ceil());
        }
    }
}
