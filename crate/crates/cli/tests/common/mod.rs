//! Synthetic corpora and a run configuration for the CLI tests.
#![allow(dead_code)]

use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use vinject_core::values::default_pvq_items;
use vinject_core::ValueId;

pub const COUNTRIES: [&str; 3] = ["DE", "FR", "ES"];
/// Likert level every PVQ item gets for a blob, before the one-item jitter.
pub const BLOB_LEVELS: [u8; 3] = [1, 3, 6];
pub const RESPONDENTS: usize = 60;

pub struct Fixture {
    pub dir: tempfile::TempDir,
    pub config: PathBuf,
}

impl Fixture {
    pub fn path(&self, name: &str) -> PathBuf {
        self.dir.path().join(name)
    }

    pub fn out(&self) -> PathBuf {
        self.path("out")
    }
}

pub fn blob_of(i: usize) -> usize {
    (i / 3) % 3
}

pub fn country_of(i: usize) -> &'static str {
    COUNTRIES[i % 3]
}

pub fn write_arguments(path: &Path, n: usize) {
    let mut text = String::new();
    for i in 0..n {
        let labels: Vec<&str> = ValueId::ALL
            .iter()
            .cycle()
            .skip(i)
            .take(1 + i % 3)
            .map(|v| v.name())
            .collect();
        let stance = if i % 2 == 0 { "in favor of" } else { "against" };
        writeln!(
            text,
            r#"{{"id": "A{i:03}", "conclusion": "We should adopt measure {i}", "stance": "{stance}", "premise": "Measure {i} changes how people live.", "values": {labels:?}}}"#
        )
        .unwrap();
    }
    fs::write(path, text).unwrap();
}

pub fn write_scenarios(path: &Path, per_polarity: usize) {
    let mut text = String::new();
    for v in ValueId::ALL {
        for pol in ["positive", "negative"] {
            for j in 0..per_polarity {
                writeln!(
                    text,
                    r#"{{"id": "{}-{pol}-{j:05}", "text": "Someone acted on {} ({pol} {j}).", "value": "{}", "polarity": "{pol}"}}"#,
                    v.name(),
                    v.name(),
                    v.name()
                )
                .unwrap();
            }
        }
        writeln!(
            text,
            r#"{{"id": "{}-unrelated", "text": "Someone had lunch.", "value": "{}", "polarity": "unrelated"}}"#,
            v.name(),
            v.name()
        )
        .unwrap();
    }
    fs::write(path, text).unwrap();
}

/// (id, chapter, scale json)
pub fn question_specs() -> Vec<(String, &'static str, &'static str)> {
    let range = r#"{"kind": "range", "lo": 0, "hi": 10}"#;
    let mut qs: Vec<(String, &str, &str)> =
        (0..5).map(|i| (format!("mst{i}"), "MST", range)).collect();
    qs.push(("pswb0".into(), "PSWB", range));
    qs.push((
        "pswb1".into(),
        "PSWB",
        r#"{"kind": "range", "lo": 1, "hi": 5}"#,
    ));
    qs.push(("pol0".into(), "POL", range));
    qs.push(("pol1".into(), "POL", r#"{"kind": "binary"}"#));
    qs.push(("ud0".into(), "UD", range));
    qs.push(("ud1".into(), "UD", range));
    qs
}

pub fn write_questions(path: &Path) {
    let mut text = String::new();
    for (id, chapter, scale) in question_specs() {
        writeln!(
            text,
            r#"{{"question_id": "{id}", "chapter": "{chapter}", "text": "Question {id}?", "scale": {scale}}}"#
        )
        .unwrap();
    }
    fs::write(path, text).unwrap();
}

fn answer(i: usize, qi: usize, scale: &str) -> String {
    if i == 7 && qi == 0 {
        return "77".into();
    }
    let b = blob_of(i);
    if scale.contains("binary") {
        return ((b + i) % 2).to_string();
    }
    if scale.contains("\"lo\": 1") {
        return (1 + (b + qi + i) % 5).to_string();
    }
    ((b * 3 + qi + i % 4) % 11).to_string()
}

pub fn write_respondents(path: &Path) {
    let items = default_pvq_items();
    let qs = question_specs();
    let mut header = vec!["respondent_id".to_string(), "country".to_string()];
    header.extend(items.iter().map(|i| i.item_id.clone()));
    header.extend(qs.iter().map(|q| q.0.clone()));
    let mut text = header.join(",") + "\n";
    for i in 0..RESPONDENTS {
        let base = BLOB_LEVELS[blob_of(i)];
        let mut row = vec![format!("R{i:04}"), country_of(i).to_string()];
        for (j, _) in items.iter().enumerate() {
            let level = if j == i % items.len() {
                if base == 6 {
                    5
                } else {
                    base + 1
                }
            } else {
                base
            };
            row.push(level.to_string());
        }
        for (qi, (_, _, scale)) in qs.iter().enumerate() {
            row.push(answer(i, qi, scale));
        }
        text.push_str(&row.join(","));
        text.push('\n');
    }
    fs::write(path, text).unwrap();
}

pub fn fixture() -> Fixture {
    fixture_with("")
}

/// Corpora plus `run.toml`; `extra` is appended to the top-level table.
pub fn fixture_with(extra: &str) -> Fixture {
    let dir = tempfile::tempdir().unwrap();
    let p = dir.path();
    write_arguments(&p.join("arguments.jsonl"), 30);
    write_scenarios(&p.join("scenarios.jsonl"), 6);
    write_questions(&p.join("questions.jsonl"));
    write_respondents(&p.join("respondents.csv"));
    let config = p.join("run.toml");
    fs::write(
        &config,
        format!(
            r#"seed = 11
out = "out"
k = 3
countries = ["DE", "FR", "ES"]
elbow = [1, 2, 3, 4]
behavior_per_value = 4
concurrency = 4
{extra}

[paths]
arguments = "arguments.jsonl"
scenarios = "scenarios.jsonl"
questions = "questions.jsonl"
respondents = "respondents.csv"
"#
        ),
    )
    .unwrap();
    Fixture { dir, config }
}

/// Run the library entry point with `--config` set; returns the exit code.
pub fn vinject(fx: &Fixture, args: &[&str]) -> i32 {
    let mut argv = vec![
        "vinject".to_string(),
        "--config".into(),
        fx.config.display().to_string(),
    ];
    argv.extend(args.iter().map(|s| s.to_string()));
    vinject_cli::run_cli(argv)
}

pub fn read(path: &Path) -> String {
    fs::read_to_string(path).unwrap_or_else(|e| panic!("{}: {e}", path.display()))
}
