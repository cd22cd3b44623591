//! Query a backend per target, parse the replies, and score them.

use std::collections::{BTreeMap, BTreeSet};
use std::path::{Path, PathBuf};
use std::str::FromStr;
use std::time::Duration;

use serde::{Deserialize, Serialize};
use vinject_core::backend::{
    complete_all, parse_agreement, parse_numeric, Agreement, AvoidanceDetector, Backend,
    BackendResponse, Classification, CompletionRequest, HttpBackend, HttpConfig, MockBackend,
    MockMode, MockPersona, Numeric, Payload,
};
use vinject_core::corpus::{
    load_scenarios, rescale_answer, sample_behavior_testset, split_arguments, Chapter, Stance,
};
use vinject_core::corpus::{EssQuestion, Respondent, Scenario};
use vinject_core::eval::{
    agreement_ratio, behavior_records, opinion_ground_truth, opinion_nmse, pvq_recovery,
    raw_group_mean, EvalRecord, EvalTask, Outcome,
};
use vinject_core::prompts::{assemble_few_shot, Exemplar, FewShotBlock, TemplateRegistry};
use vinject_core::rng::derive_seed;
use vinject_core::targets::{select_targets, Origin, TargetProfile};
use vinject_core::values::parse_likert;
use vinject_core::{io, Error, LikertLevel, PvqItem, Result};

use super::{
    arguments, load_assignments, load_run_targets, pvq_items, questions, registry, report,
    respondents,
};
use crate::config::{BackendKind, MockKind, RunConfig};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum EvalKind {
    Pvq,
    Argue,
    Behavior,
    Opinion,
}

impl EvalKind {
    pub fn name(self) -> &'static str {
        match self {
            EvalKind::Pvq => "pvq",
            EvalKind::Argue => "argue",
            EvalKind::Behavior => "behavior",
            EvalKind::Opinion => "opinion",
        }
    }
}

impl FromStr for EvalKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "pvq" => Ok(EvalKind::Pvq),
            "argue" => Ok(EvalKind::Argue),
            "behavior" => Ok(EvalKind::Behavior),
            "opinion" => Ok(EvalKind::Opinion),
            _ => Err(Error::Validation(format!("unknown eval task `{s}`"))),
        }
    }
}

pub fn task_dir(out: &Path, kind: EvalKind) -> PathBuf {
    out.join("eval").join(kind.name())
}

/// One prompt/response exchange as persisted in `responses.jsonl`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ResponseLog {
    pub target_id: String,
    pub item_id: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub system: Option<String>,
    pub prompt: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub text: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub classification: Option<Classification>,
    pub retries: u32,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub error: Option<String>,
}

/// A generated stance and premise for one argument conclusion.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Generation {
    pub item_id: String,
    pub target_id: String,
    pub argument_id: String,
    pub conclusion: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub stance: Option<Stance>,
    pub premise: String,
}

#[derive(Debug, Clone, PartialEq)]
pub struct EvalSummary {
    pub kind: EvalKind,
    pub records: Vec<EvalRecord>,
    pub generations: Vec<Generation>,
    pub requests: usize,
    pub failed: usize,
}

/// Shared per-run state: templates, backend selection, and prompt decoration.
struct Runner<'a> {
    cfg: &'a RunConfig,
    reg: TemplateRegistry,
    http: Option<HttpBackend>,
    detector: AvoidanceDetector,
    exemplars: Vec<Exemplar>,
    log: Vec<ResponseLog>,
    first_error: Option<Error>,
    requests: usize,
    failed: usize,
}

impl<'a> Runner<'a> {
    fn new(cfg: &'a RunConfig) -> Result<Self> {
        let http = match cfg.backend.kind {
            BackendKind::Mock => None,
            BackendKind::Http => Some(HttpBackend::new(HttpConfig {
                api_key_env: cfg.backend.api_key_env.clone(),
                timeout: Duration::from_secs(cfg.backend.timeout_secs),
                max_attempts: cfg.backend.max_attempts,
                ..HttpConfig::new(cfg.backend.endpoint.clone().unwrap_or_default())
            })?),
        };
        let exemplars = match (&cfg.paths.exemplars, cfg.few_shot) {
            (_, 0) => Vec::new(),
            (Some(p), _) => io::read_jsonl(p)?,
            (None, k) => {
                return Err(Error::Validation(format!(
                    "few-shot k = {k} needs paths.exemplars"
                )))
            }
        };
        Ok(Self {
            cfg,
            reg: registry(cfg)?,
            http,
            detector: AvoidanceDetector::default(),
            exemplars,
            log: Vec::new(),
            first_error: None,
            requests: 0,
            failed: 0,
        })
    }

    fn mock(&self, target: &TargetProfile, answer_book: BTreeMap<String, f64>) -> MockBackend {
        let mode = match self.cfg.backend.mock {
            MockKind::Deterministic => MockMode::Deterministic,
            MockKind::Stochastic => {
                MockMode::Stochastic(derive_seed(self.cfg.seed, &["mock", &target.target_id]))
            }
        };
        let mut persona = MockPersona::new(target.distribution, mode);
        persona.answer_book = answer_book;
        persona.refuse = self.cfg.backend.mock_refuse.iter().cloned().collect();
        MockBackend::new(persona)
    }

    fn request(
        &self,
        target: &TargetProfile,
        task_key: &str,
        prompt: String,
        payload: Payload,
    ) -> Result<CompletionRequest> {
        let system = match self.cfg.persona.mode() {
            Some(mode) => Some(self.reg.render_persona(&target.distribution, mode)?),
            None => None,
        };
        let prompt = if self.cfg.few_shot > 0 {
            let block = FewShotBlock::sample(
                &self.exemplars,
                self.cfg.few_shot,
                self.cfg.seed,
                &format!("{}/{task_key}", target.target_id),
            )?;
            assemble_few_shot(&prompt, &block)?
        } else {
            prompt
        };
        Ok(CompletionRequest {
            system,
            prompt,
            sampling: self.cfg.sampling()?,
            model: self.cfg.backend.model.clone(),
            max_tokens: self.cfg.backend.max_tokens,
            payload,
        })
    }

    /// Send `(item_id, request)` pairs for one target; failures are logged and kept per item.
    fn send(
        &mut self,
        target: &TargetProfile,
        items: Vec<(String, CompletionRequest)>,
        answer_book: BTreeMap<String, f64>,
    ) -> Result<Vec<Result<BackendResponse>>> {
        let requests: Vec<CompletionRequest> = items.iter().map(|(_, r)| r.clone()).collect();
        let mock;
        let backend: &dyn Backend = match &self.http {
            Some(h) => h,
            None => {
                mock = self.mock(target, answer_book);
                &mock
            }
        };
        let responses = complete_all(backend, &requests, self.cfg.concurrency, &self.detector)?;
        for ((item_id, req), resp) in items.into_iter().zip(&responses) {
            self.requests += 1;
            let mut entry = ResponseLog {
                target_id: target.target_id.clone(),
                item_id,
                system: req.system,
                prompt: req.prompt,
                text: None,
                classification: None,
                retries: 0,
                error: None,
            };
            match resp {
                Ok(r) => {
                    entry.text = Some(r.text.clone());
                    entry.classification = Some(r.classification);
                    entry.retries = r.retries;
                }
                Err(e) => {
                    self.failed += 1;
                    log::warn!("{}/{}: {e}", entry.target_id, entry.item_id);
                    entry.error = Some(e.to_string());
                }
            }
            self.log.push(entry);
        }
        Ok(responses)
    }

    fn take_first_error(
        &mut self,
        responses: Vec<Result<BackendResponse>>,
    ) -> Vec<Option<BackendResponse>> {
        responses
            .into_iter()
            .map(|r| match r {
                Ok(r) => Some(r),
                Err(e) => {
                    self.first_error.get_or_insert(e);
                    None
                }
            })
            .collect()
    }
}

fn outcome<T>(resp: &Option<BackendResponse>, parse: impl FnOnce(&str) -> Option<T>) -> Outcome<T> {
    match resp {
        None => Outcome::Failed,
        Some(r) => match r.classification {
            Classification::Avoided => Outcome::Avoided,
            Classification::Unparseable => Outcome::Unparseable,
            Classification::Answered => {
                parse(&r.text).map_or(Outcome::Unparseable, Outcome::Answer)
            }
        },
    }
}

fn eval_pvq(
    runner: &mut Runner,
    targets: &[&TargetProfile],
    items: &[PvqItem],
) -> Result<Vec<EvalRecord>> {
    let mut records = Vec::new();
    for target in targets {
        let reqs = items
            .iter()
            .map(|item| {
                let prompt = runner.reg.pvq(item)?;
                Ok((
                    item.item_id.clone(),
                    runner.request(target, "pvq", prompt, Payload::Pvq(item.clone()))?,
                ))
            })
            .collect::<Result<Vec<_>>>()?;
        let responses = runner.send(target, reqs, BTreeMap::new())?;
        let responses = runner.take_first_error(responses);
        let answers: BTreeMap<String, Outcome<LikertLevel>> = items
            .iter()
            .zip(&responses)
            .map(|(item, r)| (item.item_id.clone(), outcome(r, |t| parse_likert(t).ok())))
            .collect();
        let record = match pvq_recovery(&target.target_id, &answers, items, &target.distribution) {
            Ok(r) => r,
            Err(e) => {
                log::warn!("{}: survey not scoreable: {e}", target.target_id);
                unscored_pvq(&target.target_id, &answers)
            }
        };
        records.push(record);
    }
    Ok(records)
}

fn unscored_pvq(target_id: &str, answers: &BTreeMap<String, Outcome<LikertLevel>>) -> EvalRecord {
    let count = |f: fn(&Outcome<LikertLevel>) -> bool| answers.values().filter(|o| f(o)).count();
    EvalRecord {
        target_id: target_id.to_string(),
        task: EvalTask::Pvq,
        predicted: Vec::new(),
        gold: Vec::new(),
        nmse: None,
        answered: count(|o| matches!(o, Outcome::Answer(_))),
        avoided: count(|o| matches!(o, Outcome::Avoided)),
        unparseable: count(|o| matches!(o, Outcome::Unparseable)),
        failed: count(|o| matches!(o, Outcome::Failed)),
    }
}

fn eval_behavior(
    runner: &mut Runner,
    targets: &[&TargetProfile],
    scenarios: &[Scenario],
) -> Result<Vec<EvalRecord>> {
    let mut records = Vec::new();
    for target in targets {
        let reqs = scenarios
            .iter()
            .map(|s| {
                let prompt = runner.reg.behavior(s)?;
                Ok((
                    s.id.clone(),
                    runner.request(target, "behavior", prompt, Payload::Behavior(s.clone()))?,
                ))
            })
            .collect::<Result<Vec<_>>>()?;
        let responses = runner.send(target, reqs, BTreeMap::new())?;
        let responses = runner.take_first_error(responses);
        let detector = runner.detector.clone();
        let pairs: Vec<(Scenario, Outcome<Agreement>)> = scenarios
            .iter()
            .zip(&responses)
            .map(|(s, r)| {
                let o = outcome(r, |t| match parse_agreement(t, &detector) {
                    a @ (Agreement::Agree | Agreement::Disagree) => Some(a),
                    _ => None,
                });
                (s.clone(), o)
            })
            .collect();
        records.extend(behavior_records(
            &target.target_id,
            &agreement_ratio(&pairs),
            &target.distribution,
        )?);
    }
    Ok(records)
}

/// Respondents behind each target: cluster members, or the scored respondents of a country.
fn groups<'r>(
    targets: &[&TargetProfile],
    assignments: &[vinject_core::targets::Assignment],
    respondents: &'r [Respondent],
) -> BTreeMap<String, Vec<&'r Respondent>> {
    let by_id: BTreeMap<&str, &Respondent> = respondents
        .iter()
        .map(|r| (r.respondent_id.as_str(), r))
        .collect();
    targets
        .iter()
        .map(|t| {
            let members = assignments
                .iter()
                .filter(|a| match &t.origin {
                    Origin::Cluster(c) => a.cluster == *c,
                    Origin::Country(code) => &a.country == code,
                })
                .filter_map(|a| by_id.get(a.respondent_id.as_str()).copied())
                .collect();
            (t.target_id.clone(), members)
        })
        .collect()
}

fn eval_opinion(
    runner: &mut Runner,
    targets: &[&TargetProfile],
    questions: &[EssQuestion],
    groups: &BTreeMap<String, Vec<&Respondent>>,
) -> Result<Vec<EvalRecord>> {
    let mut records = Vec::new();
    for target in targets {
        let group = &groups[&target.target_id];
        let mut asked: Vec<(&EssQuestion, f64)> = Vec::new();
        let mut book = BTreeMap::new();
        for q in questions {
            if let Some(gold) = opinion_ground_truth(group, q)? {
                let raw: Vec<f64> = group
                    .iter()
                    .filter_map(|r| r.answers.get(&q.question_id).copied())
                    .collect();
                if let Some(mean) = raw_group_mean(&raw) {
                    book.insert(q.question_id.clone(), mean);
                }
                asked.push((q, gold));
            }
        }
        let reqs = asked
            .iter()
            .map(|(q, _)| {
                let prompt = runner.reg.ess(q)?;
                Ok((
                    q.question_id.clone(),
                    runner.request(target, "opinion", prompt, Payload::Ess((*q).clone()))?,
                ))
            })
            .collect::<Result<Vec<_>>>()?;
        let responses = runner.send(target, reqs, book)?;
        let responses = runner.take_first_error(responses);
        let detector = runner.detector.clone();
        let mut per_chapter: BTreeMap<Chapter, Vec<(f64, Outcome<f64>)>> = BTreeMap::new();
        for ((q, gold), r) in asked.iter().zip(&responses) {
            let o = outcome(r, |t| match parse_numeric(t, q.scale, &detector) {
                Numeric::Value(v) => rescale_answer(v, q.scale).ok(),
                _ => None,
            });
            per_chapter.entry(q.chapter).or_default().push((*gold, o));
        }
        for (chapter, entries) in per_chapter {
            records.push(opinion_nmse(&target.target_id, chapter, &entries)?);
        }
    }
    Ok(records)
}

fn eval_argue(
    runner: &mut Runner,
    targets: &[&TargetProfile],
    args: &[vinject_core::corpus::Argument],
) -> Result<Vec<Generation>> {
    let mut out = Vec::new();
    for target in targets {
        let stance_reqs = args
            .iter()
            .map(|a| {
                let prompt = runner.reg.arg_stance(&a.conclusion)?;
                Ok((
                    format!("{}/stance", a.id),
                    runner.request(target, "argue", prompt, Payload::Free)?,
                ))
            })
            .collect::<Result<Vec<_>>>()?;
        let stance_resp = runner.send(target, stance_reqs, BTreeMap::new())?;
        let stance_resp = runner.take_first_error(stance_resp);
        let stances: Vec<Option<Stance>> = stance_resp
            .iter()
            .map(
                |r| match outcome(r, |t| Some(parse_agreement(t, &runner.detector))) {
                    Outcome::Answer(Agreement::Agree) => Some(Stance::InFavorOf),
                    Outcome::Answer(Agreement::Disagree) => Some(Stance::Against),
                    _ => None,
                },
            )
            .collect();
        let mut premise_reqs = Vec::new();
        let mut premise_args = Vec::new();
        for (a, stance) in args.iter().zip(&stances) {
            if let Some(stance) = stance {
                let prompt = runner.reg.arg_premise(&a.conclusion, *stance)?;
                premise_reqs.push((
                    format!("{}/premise", a.id),
                    runner.request(target, "argue", prompt, Payload::Free)?,
                ));
                premise_args.push((a, *stance));
            }
        }
        let premise_resp = runner.send(target, premise_reqs, BTreeMap::new())?;
        let premise_resp = runner.take_first_error(premise_resp);
        for ((a, stance), r) in premise_args.into_iter().zip(premise_resp) {
            if let Some(r) = r {
                out.push(Generation {
                    item_id: format!("{}/{}", target.target_id, a.id),
                    target_id: target.target_id.clone(),
                    argument_id: a.id.clone(),
                    conclusion: a.conclusion.clone(),
                    stance: Some(stance),
                    premise: r.text.trim().to_string(),
                });
            }
        }
    }
    Ok(out)
}

pub fn run(cfg: &RunConfig, kind: EvalKind, target_ids: &[String]) -> Result<EvalSummary> {
    let all_targets = load_run_targets(cfg)?;
    let targets = select_targets(&all_targets, target_ids)?;
    let mut runner = Runner::new(cfg)?;
    let mut records = Vec::new();
    let mut generations = Vec::new();
    match kind {
        EvalKind::Pvq => {
            let items = pvq_items(cfg)?;
            records = eval_pvq(&mut runner, &targets, &items)?;
        }
        EvalKind::Behavior => {
            let path = cfg.require("scenarios", &cfg.paths.scenarios)?;
            let load = load_scenarios(path)?;
            let testset =
                sample_behavior_testset(&load.scenarios, cfg.behavior_per_value, cfg.seed)?;
            records = eval_behavior(&mut runner, &targets, &testset)?;
        }
        EvalKind::Opinion => {
            let items = pvq_items(cfg)?;
            let qs = questions(cfg)?;
            let rs = respondents(cfg, &items, &qs)?;
            let assignments = load_assignments(cfg)?;
            let groups = groups(&targets, &assignments, &rs);
            records = eval_opinion(&mut runner, &targets, &qs, &groups)?;
        }
        EvalKind::Argue => {
            let args = arguments(cfg)?;
            let split = split_arguments(&args, cfg.seed)?;
            let test: BTreeSet<&str> = split.test.iter().map(String::as_str).collect();
            let mut test_args: Vec<_> = args
                .iter()
                .filter(|a| test.contains(a.id.as_str()))
                .cloned()
                .collect();
            test_args.sort_by(|a, b| a.id.cmp(&b.id));
            generations = eval_argue(&mut runner, &targets, &test_args)?;
        }
    }

    if runner.requests > 0 && runner.failed == runner.requests {
        return Err(runner
            .first_error
            .take()
            .unwrap_or_else(|| Error::Validation("every backend request failed".into())));
    }

    let dir = task_dir(&cfg.out, kind);
    io::write_jsonl(&dir.join("responses.jsonl"), &runner.log)?;
    if kind == EvalKind::Argue {
        io::write_jsonl(&dir.join("generations.jsonl"), &generations)?;
    } else {
        io::write_jsonl(&dir.join("results.jsonl"), &records)?;
        io::write_atomic(
            &dir.join("summary.tsv"),
            report::table(kind, &records).as_bytes(),
        )?;
    }
    log::info!(
        "{}: {} target(s), {} request(s), {} failed",
        kind.name(),
        targets.len(),
        runner.requests,
        runner.failed
    );
    Ok(EvalSummary {
        kind,
        records,
        generations,
        requests: runner.requests,
        failed: runner.failed,
    })
}
