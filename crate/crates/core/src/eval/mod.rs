//! Alignment metrics: NMSE on normalized scores, PVQ recovery, behavior agreement,
//! opinion ground truth, and the significance and agreement statistics.

pub mod annotation;
pub mod stats;

use std::collections::BTreeMap;
use std::fmt;

use serde::{Deserialize, Serialize};

use crate::backend::Agreement;
use crate::corpus::{rescale_answer, Chapter, EssQuestion, Polarity, Respondent, Scenario};
use crate::error::{Error, Result};
use crate::values::{normalize_score, score_pvq, LikertLevel, PvqItem, ValueDistribution, ValueId};

pub use annotation::{
    tally_pairwise, AnnotationItem, AnnotationPacket, Choice, Judgment, PairTally,
};
pub use stats::{fleiss_kappa, paired_t_test, TTest};

/// Mean squared difference between two equal-length vectors of `[0, 1]` scores.
pub fn nmse(pred: &[f64], gold: &[f64]) -> Result<f64> {
    if pred.len() != gold.len() {
        return Err(Error::validation(format!(
            "prediction has {} component(s), gold has {}",
            pred.len(),
            gold.len()
        )));
    }
    if pred.is_empty() {
        return Err(Error::validation("nmse of empty vectors"));
    }
    if let Some(&x) = pred.iter().chain(gold).find(|x| !(0.0..=1.0).contains(*x)) {
        return Err(Error::Range {
            what: "normalized score",
            value: x,
            lo: 0.0,
            hi: 1.0,
        });
    }
    Ok(pred
        .iter()
        .zip(gold)
        .map(|(p, g)| (p - g).powi(2))
        .sum::<f64>()
        / pred.len() as f64)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum EvalTask {
    Pvq,
    Behavior { value: ValueId },
    Opinion { chapter: Chapter },
}

impl fmt::Display for EvalTask {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            EvalTask::Pvq => f.write_str("pvq"),
            EvalTask::Behavior { value } => write!(f, "behavior/{value}"),
            EvalTask::Opinion { chapter } => write!(f, "opinion/{chapter}"),
        }
    }
}

/// Per-target, per-task comparison of normalized predictions with normalized gold.
/// `nmse` is absent when nothing was answered.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalRecord {
    pub target_id: String,
    pub task: EvalTask,
    pub predicted: Vec<f64>,
    pub gold: Vec<f64>,
    pub nmse: Option<f64>,
    pub answered: usize,
    pub avoided: usize,
    pub unparseable: usize,
    pub failed: usize,
}

impl EvalRecord {
    pub fn asked(&self) -> usize {
        self.answered + self.avoided + self.unparseable + self.failed
    }

    pub fn avoidance_pct(&self) -> Option<f64> {
        let n = self.asked();
        (n > 0).then(|| 100.0 * self.avoided as f64 / n as f64)
    }
}

/// What came back for one prompt after parsing.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "status", content = "value", rename_all = "lowercase")]
pub enum Outcome<T> {
    Answer(T),
    Avoided,
    Unparseable,
    Failed,
}

#[derive(Default)]
struct Counts {
    answered: usize,
    avoided: usize,
    unparseable: usize,
    failed: usize,
}

impl Counts {
    fn add<T>(&mut self, o: &Outcome<T>) {
        match o {
            Outcome::Answer(_) => self.answered += 1,
            Outcome::Avoided => self.avoided += 1,
            Outcome::Unparseable => self.unparseable += 1,
            Outcome::Failed => self.failed += 1,
        }
    }
}

/// Score the model's survey answers and compare with the target, value by value.
pub fn pvq_recovery(
    target_id: &str,
    answers: &BTreeMap<String, Outcome<LikertLevel>>,
    items: &[PvqItem],
    target: &ValueDistribution,
) -> Result<EvalRecord> {
    let mut counts = Counts::default();
    let mut parsed = BTreeMap::new();
    for (id, o) in answers {
        counts.add(o);
        if let Outcome::Answer(level) = o {
            parsed.insert(id.clone(), *level);
        }
    }
    let model = score_pvq(&parsed, items)?;
    let predicted = model.normalized();
    let gold = target.normalized();
    Ok(EvalRecord {
        target_id: target_id.to_string(),
        task: EvalTask::Pvq,
        nmse: Some(nmse(&predicted, &gold)?),
        predicted,
        gold,
        answered: counts.answered,
        avoided: counts.avoided,
        unparseable: counts.unparseable,
        failed: counts.failed,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct AgreementStat {
    pub consistent: usize,
    pub answered: usize,
    pub avoided: usize,
    pub unparseable: usize,
    pub failed: usize,
}

impl AgreementStat {
    /// Fraction of answered scenarios where the response matched the value; `None` if none answered.
    pub fn ratio(&self) -> Option<f64> {
        (self.answered > 0).then(|| self.consistent as f64 / self.answered as f64)
    }
}

/// Per value: agreeing on positive and disagreeing on negative scenarios count as consistent.
pub fn agreement_ratio(
    responses: &[(Scenario, Outcome<Agreement>)],
) -> BTreeMap<ValueId, AgreementStat> {
    let mut out: BTreeMap<ValueId, AgreementStat> = BTreeMap::new();
    for (s, o) in responses {
        let stat = out.entry(s.value).or_default();
        match o {
            Outcome::Answer(Agreement::Agree) | Outcome::Answer(Agreement::Disagree) => {
                stat.answered += 1;
                let agreed = matches!(o, Outcome::Answer(Agreement::Agree));
                if agreed == (s.polarity == Polarity::Positive) {
                    stat.consistent += 1;
                }
            }
            Outcome::Answer(Agreement::Avoided) | Outcome::Avoided => stat.avoided += 1,
            Outcome::Answer(Agreement::Unparseable) | Outcome::Unparseable => stat.unparseable += 1,
            Outcome::Failed => stat.failed += 1,
        }
    }
    out
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct BehaviorScore {
    pub per_value: BTreeMap<ValueId, Option<f64>>,
    pub mean: Option<f64>,
}

/// Squared gap between each agreement ratio and the normalized target score.
pub fn behavior_nmse(
    ratios: &BTreeMap<ValueId, Option<f64>>,
    target: &ValueDistribution,
) -> Result<BehaviorScore> {
    let mut per_value = BTreeMap::new();
    for value in ValueId::ALL {
        let err = match ratios.get(&value).copied().flatten() {
            Some(r) => Some(nmse(&[r], &[normalize_score(target.get(value))?])?),
            None => {
                log::warn!("no answered behavior scenario for `{value}`; excluded from the mean");
                None
            }
        };
        per_value.insert(value, err);
    }
    let defined: Vec<f64> = per_value.values().flatten().copied().collect();
    let mean = (!defined.is_empty()).then(|| defined.iter().sum::<f64>() / defined.len() as f64);
    Ok(BehaviorScore { per_value, mean })
}

/// One record per value for a target's behavior responses.
pub fn behavior_records(
    target_id: &str,
    stats: &BTreeMap<ValueId, AgreementStat>,
    target: &ValueDistribution,
) -> Result<Vec<EvalRecord>> {
    ValueId::ALL
        .iter()
        .map(|&value| {
            let stat = stats.get(&value).copied().unwrap_or_default();
            let gold = normalize_score(target.get(value))?;
            let (predicted, gold, nmse) = match stat.ratio() {
                Some(r) => (vec![r], vec![gold], Some(nmse(&[r], &[gold])?)),
                None => (vec![], vec![], None),
            };
            Ok(EvalRecord {
                target_id: target_id.to_string(),
                task: EvalTask::Behavior { value },
                predicted,
                gold,
                nmse,
                answered: stat.answered,
                avoided: stat.avoided,
                unparseable: stat.unparseable,
                failed: stat.failed,
            })
        })
        .collect()
}

/// Mean raw answer of the group, rescaled to `[0, 1]`; `None` when nobody answered.
pub fn opinion_ground_truth(group: &[&Respondent], question: &EssQuestion) -> Result<Option<f64>> {
    let answers: Vec<f64> = group
        .iter()
        .filter_map(|r| r.answers.get(&question.question_id).copied())
        .collect();
    match raw_group_mean(&answers) {
        Some(mean) => rescale_answer(mean, question.scale).map(Some),
        None => {
            log::warn!(
                "question {} has no valid answer in the group; excluded",
                question.question_id
            );
            Ok(None)
        }
    }
}

/// Mean of on-scale answers; the value echoed by an answer book.
pub fn raw_group_mean(answers: &[f64]) -> Option<f64> {
    (!answers.is_empty()).then(|| answers.iter().sum::<f64>() / answers.len() as f64)
}

/// NMSE over one chapter's answered questions. Each entry pairs the gold score with the
/// model's rescaled answer.
pub fn opinion_nmse(
    target_id: &str,
    chapter: Chapter,
    entries: &[(f64, Outcome<f64>)],
) -> Result<EvalRecord> {
    let mut counts = Counts::default();
    let mut predicted = Vec::new();
    let mut gold = Vec::new();
    for (g, o) in entries {
        counts.add(o);
        if let Outcome::Answer(p) = o {
            predicted.push(*p);
            gold.push(*g);
        }
    }
    let nmse = if predicted.is_empty() {
        None
    } else {
        Some(nmse(&predicted, &gold)?)
    };
    Ok(EvalRecord {
        target_id: target_id.to_string(),
        task: EvalTask::Opinion { chapter },
        predicted,
        gold,
        nmse,
        answered: counts.answered,
        avoided: counts.avoided,
        unparseable: counts.unparseable,
        failed: counts.failed,
    })
}

/// Average NMSE per task over the records that define one.
pub fn mean_by_task(records: &[EvalRecord]) -> BTreeMap<EvalTask, Option<f64>> {
    let mut acc: BTreeMap<EvalTask, (f64, usize)> = BTreeMap::new();
    for r in records {
        let e = acc.entry(r.task).or_default();
        if let Some(x) = r.nmse {
            e.0 += x;
            e.1 += 1;
        }
    }
    acc.into_iter()
        .map(|(t, (sum, n))| (t, (n > 0).then(|| sum / n as f64)))
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::corpus::Scale;
    use approx::assert_abs_diff_eq;
    use proptest::prelude::*;

    #[test]
    fn nmse_examples() {
        assert_eq!(nmse(&[0.3, 0.7], &[0.3, 0.7]).unwrap(), 0.0);
        assert_eq!(nmse(&[0.0; 4], &[1.0; 4]).unwrap(), 1.0);
        assert_abs_diff_eq!(
            nmse(&[0.2, 0.4], &[0.4, 0.8]).unwrap(),
            0.1,
            epsilon = 1e-12
        );
        assert!(nmse(&[0.1], &[0.1, 0.2]).is_err());
        assert!(nmse(&[], &[]).is_err());
        assert!(nmse(&[1.5], &[0.2]).is_err());
    }

    fn scenario(i: usize, value: ValueId, polarity: Polarity) -> Scenario {
        Scenario {
            id: format!("s{i}"),
            text: "t".into(),
            value,
            polarity,
        }
    }

    fn balanced(
        value: ValueId,
        answer: impl Fn(usize, Polarity) -> Agreement,
    ) -> Vec<(Scenario, Outcome<Agreement>)> {
        (0..50)
            .map(|i| {
                let p = if i < 25 {
                    Polarity::Positive
                } else {
                    Polarity::Negative
                };
                (scenario(i, value, p), Outcome::Answer(answer(i, p)))
            })
            .collect()
    }

    #[test]
    fn agreement_examples() {
        let all_agree = agreement_ratio(&balanced(ValueId::Power, |_, _| Agreement::Agree));
        assert_eq!(all_agree[&ValueId::Power].ratio(), Some(0.5));
        let consistent = agreement_ratio(&balanced(ValueId::Power, |_, p| {
            if p == Polarity::Positive {
                Agreement::Agree
            } else {
                Agreement::Disagree
            }
        }));
        assert_eq!(consistent[&ValueId::Power].ratio(), Some(1.0));
        let forty = agreement_ratio(&balanced(ValueId::Power, |i, p| {
            let right = if p == Polarity::Positive {
                Agreement::Agree
            } else {
                Agreement::Disagree
            };
            let wrong = if p == Polarity::Positive {
                Agreement::Disagree
            } else {
                Agreement::Agree
            };
            if i % 5 == 0 {
                wrong
            } else {
                right
            }
        }));
        assert_eq!(forty[&ValueId::Power].ratio(), Some(0.8));
    }

    #[test]
    fn avoided_scenarios_are_excluded() {
        let mut rs = balanced(ValueId::Power, |_, _| Agreement::Agree);
        rs[0].1 = Outcome::Avoided;
        rs[1].1 = Outcome::Answer(Agreement::Avoided);
        let stat = agreement_ratio(&rs)[&ValueId::Power];
        assert_eq!((stat.answered, stat.avoided), (48, 2));
    }

    #[test]
    fn behavior_nmse_examples() {
        let target = ValueDistribution::uniform(3.5)
            .unwrap()
            .with(ValueId::Power, 6.0)
            .unwrap();
        let mut ratios: BTreeMap<ValueId, Option<f64>> =
            ValueId::ALL.iter().map(|&v| (v, Some(0.5))).collect();
        ratios.insert(ValueId::Power, Some(1.0));
        assert_eq!(behavior_nmse(&ratios, &target).unwrap().mean, Some(0.0));
        ratios.insert(ValueId::Power, Some(0.0));
        assert_eq!(
            behavior_nmse(&ratios, &target).unwrap().per_value[&ValueId::Power],
            Some(1.0)
        );
        ratios.insert(ValueId::Hedonism, Some(0.7));
        let s = behavior_nmse(&ratios, &target).unwrap();
        assert_abs_diff_eq!(
            s.per_value[&ValueId::Hedonism].unwrap(),
            0.04,
            epsilon = 1e-12
        );
        ratios.insert(ValueId::Tradition, None);
        let s = behavior_nmse(&ratios, &target).unwrap();
        assert_eq!(s.per_value[&ValueId::Tradition], None);
        assert_abs_diff_eq!(s.mean.unwrap(), 1.04 / 9.0, epsilon = 1e-12);
    }

    fn resp(answer: Option<f64>) -> Respondent {
        Respondent {
            respondent_id: "r".into(),
            country: "DE".into(),
            pvq: BTreeMap::new(),
            answers: answer.map(|a| ("q".to_string(), a)).into_iter().collect(),
        }
    }

    fn question(scale: Scale) -> EssQuestion {
        EssQuestion {
            question_id: "q".into(),
            chapter: Chapter::Politics,
            text: "t".into(),
            scale,
        }
    }

    #[test]
    fn ground_truth_examples() {
        let range = question(Scale::Range { lo: 0, hi: 10 });
        let (a, b) = (resp(Some(4.0)), resp(Some(6.0)));
        assert_abs_diff_eq!(
            opinion_ground_truth(&[&a, &b], &range).unwrap().unwrap(),
            0.5,
            epsilon = 1e-15
        );
        let one = resp(Some(1.0));
        assert_eq!(
            opinion_ground_truth(&[&one], &question(Scale::Binary)).unwrap(),
            Some(1.0)
        );
        let none = resp(None);
        assert_eq!(opinion_ground_truth(&[&none, &none], &range).unwrap(), None);
    }

    #[test]
    fn opinion_avoidance() {
        let mut entries = vec![(0.4, Outcome::Answer(0.4)), (0.6, Outcome::Answer(0.5))];
        entries.extend([(0.1, Outcome::Avoided); 3]);
        let r = opinion_nmse("t", Chapter::MediaSocialTrust, &entries).unwrap();
        assert_eq!(r.avoidance_pct(), Some(60.0));
        assert_eq!(r.predicted.len(), 2);
        assert_abs_diff_eq!(r.nmse.unwrap(), 0.005, epsilon = 1e-12);
        let all = opinion_nmse("t", Chapter::Politics, &[(0.1, Outcome::Avoided)]).unwrap();
        assert_eq!(all.nmse, None);
        let extreme =
            opinion_nmse("t", Chapter::Politics, &[(1.0, Outcome::Answer(0.0)); 3]).unwrap();
        assert_eq!(extreme.nmse, Some(1.0));
    }

    #[test]
    fn pvq_recovery_extremes() {
        let items = crate::values::default_pvq_items();
        let ones: BTreeMap<_, _> = items
            .iter()
            .map(|i| {
                (
                    i.item_id.clone(),
                    Outcome::Answer(LikertLevel::new(1).unwrap()),
                )
            })
            .collect();
        let r = pvq_recovery(
            "t",
            &ones,
            &items,
            &ValueDistribution::uniform(6.0).unwrap(),
        )
        .unwrap();
        assert_eq!(r.nmse, Some(1.0));
        assert_eq!(r.answered, 21);

        let mut partial = ones.clone();
        partial.insert("ipcrtiv".into(), Outcome::Unparseable);
        let r = pvq_recovery(
            "t",
            &partial,
            &items,
            &ValueDistribution::uniform(1.0).unwrap(),
        )
        .unwrap();
        assert_eq!((r.answered, r.unparseable, r.nmse), (20, 1, Some(0.0)));

        partial.insert("impfree".into(), Outcome::Avoided);
        assert!(matches!(
            pvq_recovery(
                "t",
                &partial,
                &items,
                &ValueDistribution::uniform(1.0).unwrap()
            ),
            Err(Error::IncompleteSurvey(ValueId::SelfDirection))
        ));
    }

    #[test]
    fn record_serialization() {
        let r = opinion_nmse(
            "t",
            Chapter::UnderstandingDemocracy,
            &[(0.5, Outcome::Answer(0.5))],
        )
        .unwrap();
        let v = serde_json::to_value(&r).unwrap();
        assert_eq!(
            v["task"],
            serde_json::json!({"kind": "opinion", "chapter": "UD"})
        );
        let back: EvalRecord = serde_json::from_value(v).unwrap();
        assert_eq!(back, r);
    }

    proptest! {
        #[test]
        fn nmse_properties(pairs in proptest::collection::vec((0.0f64..=1.0, 0.0f64..=1.0), 1..20), i in any::<prop::sample::Index>()) {
            let (p, g): (Vec<f64>, Vec<f64>) = pairs.into_iter().unzip();
            let e = nmse(&p, &g).unwrap();
            prop_assert_eq!(nmse(&p, &p).unwrap(), 0.0);
            prop_assert_eq!(e, nmse(&g, &p).unwrap());
            prop_assert!((0.0..=1.0).contains(&e));
            let k = i.index(p.len());
            let mut wider = p.clone();
            wider[k] = if g[k] >= p[k] { (p[k] - 0.01).max(0.0) } else { (p[k] + 0.01).min(1.0) };
            if (wider[k] - g[k]).abs() > (p[k] - g[k]).abs() {
                prop_assert!(nmse(&wider, &g).unwrap() > e);
            }
        }

        #[test]
        fn mirror_ratios_sum_to_one(answers in proptest::collection::vec((any::<bool>(), any::<bool>()), 1..60)) {
            let rs: Vec<_> = answers
                .iter()
                .enumerate()
                .map(|(i, &(pos, agree))| {
                    let p = if pos { Polarity::Positive } else { Polarity::Negative };
                    (scenario(i, ValueId::Security, p), Outcome::Answer(if agree { Agreement::Agree } else { Agreement::Disagree }))
                })
                .collect();
            let mirrored: Vec<_> = rs
                .iter()
                .map(|(s, o)| {
                    let flipped = if s.polarity == Polarity::Positive { Polarity::Negative } else { Polarity::Positive };
                    (Scenario { polarity: flipped, ..s.clone() }, *o)
                })
                .collect();
            let a = agreement_ratio(&rs)[&ValueId::Security].ratio().unwrap();
            let b = agreement_ratio(&mirrored)[&ValueId::Security].ratio().unwrap();
            prop_assert!((a + b - 1.0).abs() < 1e-12);
        }
    }
}
