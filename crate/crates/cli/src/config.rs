//! Run configuration: a TOML file with command-line overrides applied on top.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use vinject_core::backend::Sampling;
use vinject_core::datagen::EmptyLabelPolicy;
use vinject_core::prompts::PersonaMode;
use vinject_core::{Error, Result};

pub const DEFAULT_SEED: u64 = 20240601;

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Paths {
    pub arguments: Option<PathBuf>,
    pub scenarios: Option<PathBuf>,
    pub questions: Option<PathBuf>,
    pub respondents: Option<PathBuf>,
    /// Questionnaire items; the built-in 21-item set when absent.
    pub pvq_items: Option<PathBuf>,
    /// Directory of template overrides.
    pub templates: Option<PathBuf>,
    /// Few-shot exemplar pool (JSON Lines of question/answer/rationale).
    pub exemplars: Option<PathBuf>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum BackendKind {
    Mock,
    Http,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum MockKind {
    Deterministic,
    Stochastic,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct BackendConfig {
    pub kind: BackendKind,
    pub endpoint: Option<String>,
    pub model: String,
    pub api_key_env: Option<String>,
    pub max_tokens: u32,
    pub timeout_secs: u64,
    pub max_attempts: u32,
    pub mock: MockKind,
    /// Question ids the mock refuses to answer.
    pub mock_refuse: Vec<String>,
}

impl Default for BackendConfig {
    fn default() -> Self {
        Self {
            kind: BackendKind::Mock,
            endpoint: None,
            model: "mock".into(),
            api_key_env: None,
            max_tokens: 64,
            timeout_secs: 60,
            max_attempts: 3,
            mock: MockKind::Deterministic,
            mock_refuse: Vec::new(),
        }
    }
}

/// `short`, `long`, or `none` (bare task prompts, for fine-tuned endpoints).
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum PersonaSetting {
    Short,
    Long,
    None,
}

impl PersonaSetting {
    pub fn mode(self) -> Option<PersonaMode> {
        match self {
            PersonaSetting::Short => Some(PersonaMode::Short),
            PersonaSetting::Long => Some(PersonaMode::Long),
            PersonaSetting::None => None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    pub seed: u64,
    pub out: PathBuf,
    pub paths: Paths,
    pub backend: BackendConfig,
    pub temperature: f64,
    pub top_p: f64,
    pub gamma: f64,
    pub empty_label_policy: EmptyLabelPolicy,
    pub k: usize,
    pub restarts: usize,
    /// Expected country codes; the observed ones when empty.
    pub countries: Vec<String>,
    /// Cluster counts for the elbow report; skipped when empty.
    pub elbow: Vec<usize>,
    pub concurrency: usize,
    pub few_shot: usize,
    pub persona: PersonaSetting,
    /// Scenarios drawn per value for behavior evaluation.
    pub behavior_per_value: usize,
    /// Target ids to process, or `["all"]`.
    pub targets: Vec<String>,
    pub missing_codes: Option<Vec<String>>,
    pub pvq_reverse_coded: bool,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            seed: DEFAULT_SEED,
            out: PathBuf::from("out"),
            paths: Paths::default(),
            backend: BackendConfig::default(),
            temperature: 1.0,
            top_p: 0.5,
            gamma: 3.0,
            empty_label_policy: EmptyLabelPolicy::Skip,
            k: 100,
            restarts: 10,
            countries: Vec::new(),
            elbow: Vec::new(),
            concurrency: 8,
            few_shot: 0,
            persona: PersonaSetting::Short,
            behavior_per_value: 50,
            targets: vec!["all".into()],
            missing_codes: None,
            pvq_reverse_coded: false,
        }
    }
}

/// Flag values that take precedence over the file.
#[derive(Debug, Clone, Default)]
pub struct Overrides {
    pub seed: Option<u64>,
    pub out: Option<PathBuf>,
    pub backend: Option<BackendKind>,
    pub endpoint: Option<String>,
    pub model: Option<String>,
    pub temperature: Option<f64>,
    pub top_p: Option<f64>,
    pub concurrency: Option<usize>,
    pub gamma: Option<f64>,
    pub k: Option<usize>,
    pub persona: Option<PersonaSetting>,
    pub few_shot: Option<usize>,
}

impl RunConfig {
    /// Read `path` (if any), resolve relative paths against its directory, and apply overrides.
    pub fn load(path: Option<&Path>, overrides: &Overrides) -> Result<Self> {
        let mut cfg = match path {
            Some(p) => {
                let text = std::fs::read_to_string(p).map_err(|e| Error::Io {
                    path: p.to_path_buf(),
                    source: e,
                })?;
                let mut cfg: RunConfig = toml::from_str(&text)
                    .map_err(|e| Error::Validation(format!("{}: {e}", p.display())))?;
                cfg.resolve_relative(p.parent().unwrap_or(Path::new(".")));
                cfg
            }
            None => RunConfig::default(),
        };
        cfg.apply(overrides);
        cfg.validate()?;
        Ok(cfg)
    }

    fn resolve_relative(&mut self, base: &Path) {
        let fix = |p: &mut PathBuf| {
            if p.is_relative() {
                *p = base.join(&*p);
            }
        };
        let paths = &mut self.paths;
        for p in [
            &mut paths.arguments,
            &mut paths.scenarios,
            &mut paths.questions,
            &mut paths.respondents,
            &mut paths.pvq_items,
            &mut paths.templates,
            &mut paths.exemplars,
        ]
        .into_iter()
        .flatten()
        {
            fix(p);
        }
        fix(&mut self.out);
    }

    pub fn apply(&mut self, o: &Overrides) {
        if let Some(v) = o.seed {
            self.seed = v;
        }
        if let Some(v) = &o.out {
            self.out = v.clone();
        }
        if let Some(v) = o.backend {
            self.backend.kind = v;
        }
        if let Some(v) = &o.endpoint {
            self.backend.endpoint = Some(v.clone());
        }
        if let Some(v) = &o.model {
            self.backend.model = v.clone();
        }
        if let Some(v) = o.temperature {
            self.temperature = v;
        }
        if let Some(v) = o.top_p {
            self.top_p = v;
        }
        if let Some(v) = o.concurrency {
            self.concurrency = v;
        }
        if let Some(v) = o.gamma {
            self.gamma = v;
        }
        if let Some(v) = o.k {
            self.k = v;
        }
        if let Some(v) = o.persona {
            self.persona = v;
        }
        if let Some(v) = o.few_shot {
            self.few_shot = v;
        }
    }

    pub fn validate(&self) -> Result<()> {
        self.sampling()?;
        if self.k == 0 {
            return Err(Error::Validation("k must be at least 1".into()));
        }
        if self.restarts == 0 {
            return Err(Error::Validation("restarts must be at least 1".into()));
        }
        if self.concurrency == 0 {
            return Err(Error::Validation("concurrency must be at least 1".into()));
        }
        if !(1.0..=6.0).contains(&self.gamma) {
            return Err(Error::Validation(format!(
                "gamma {} must be in [1, 6]",
                self.gamma
            )));
        }
        if self.behavior_per_value == 0 || !self.behavior_per_value.is_multiple_of(2) {
            return Err(Error::Validation(
                "behavior_per_value must be a positive even number".into(),
            ));
        }
        if self.backend.kind == BackendKind::Http && self.backend.endpoint.is_none() {
            return Err(Error::Validation(
                "the http backend needs an endpoint".into(),
            ));
        }
        let p = &self.paths;
        for (name, path) in [
            ("arguments", &p.arguments),
            ("scenarios", &p.scenarios),
            ("questions", &p.questions),
            ("respondents", &p.respondents),
            ("pvq_items", &p.pvq_items),
            ("templates", &p.templates),
            ("exemplars", &p.exemplars),
        ] {
            if let Some(path) = path {
                if !path.exists() {
                    return Err(Error::Validation(format!(
                        "paths.{name}: {} does not exist",
                        path.display()
                    )));
                }
            }
        }
        Ok(())
    }

    pub fn sampling(&self) -> Result<Sampling> {
        Sampling::new(self.temperature, self.top_p)
    }

    pub fn require<'a>(&self, name: &str, path: &'a Option<PathBuf>) -> Result<&'a Path> {
        path.as_deref()
            .ok_or_else(|| Error::Validation(format!("paths.{name} is not configured")))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn flags_win_over_file() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("run.toml");
        std::fs::write(
            &path,
            "seed = 7\nk = 12\ntemperature = 0.7\n[backend]\nmodel = \"m\"\n",
        )
        .unwrap();
        let cfg = RunConfig::load(
            Some(&path),
            &Overrides {
                k: Some(3),
                ..Default::default()
            },
        )
        .unwrap();
        assert_eq!(
            (cfg.seed, cfg.k, cfg.temperature, cfg.top_p),
            (7, 3, 0.7, 0.5)
        );
        assert_eq!(cfg.backend.model, "m");
        assert_eq!(cfg.out, dir.path().join("out"));
    }

    #[test]
    fn rejects_bad_values() {
        let with = |o: Overrides| RunConfig::load(None, &o);
        assert!(with(Overrides {
            k: Some(0),
            ..Default::default()
        })
        .is_err());
        assert!(with(Overrides {
            top_p: Some(0.0),
            ..Default::default()
        })
        .is_err());
        assert!(with(Overrides {
            gamma: Some(7.0),
            ..Default::default()
        })
        .is_err());
        assert!(with(Overrides {
            backend: Some(BackendKind::Http),
            ..Default::default()
        })
        .is_err());
    }

    #[test]
    fn missing_path_and_unknown_key() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("run.toml");
        std::fs::write(&path, "[paths]\narguments = \"nope.jsonl\"\n").unwrap();
        assert!(RunConfig::load(Some(&path), &Overrides::default()).is_err());
        std::fs::write(&path, "colour = 1\n").unwrap();
        assert!(RunConfig::load(Some(&path), &Overrides::default()).is_err());
    }
}
