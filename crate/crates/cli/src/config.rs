//! Flat `key = value` pipeline configuration with typed accessors.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use sha2::{Digest, Sha256};

use timeds_core::align::TestThresholds;
use timeds_core::classifier::TrainConfig;
use timeds_core::corpus::CasePolicy;
use timeds_core::popularity::WindowSpec;
use timeds_core::rules::RelationSet;
use timeds_core::strategies::validate_thresholds;
use timeds_core::synth::SynthConfig;
use timeds_core::workflow::Params;
use timeds_core::TypeSet;

/// Every recognised key with its default. Empty path keys mean "use the
/// artifacts written by `synth`".
pub const DEFAULTS: &[(&str, &str)] = &[
    ("corpus", ""),
    ("gazetteer", ""),
    ("rules", ""),
    ("gold", ""),
    ("gold_format", "oracle"),
    ("out", "timeds-out"),
    ("seed", "0"),
    ("threads", "0"),
    ("relations", "Acquisition,Investing,JobChange,Lawsuit,Partnership"),
    ("undirected", "Partnership"),
    ("types", "ORG,PER,LOC"),
    ("case", "sensitive"),
    ("tau_c", "0.25"),
    ("window", "3"),
    ("holdout_fraction", "0.2"),
    ("test_thresholds", "Investing:0.2,*:0.7"),
    ("negative_reserve_fraction", "0.5"),
    ("negatives_per_positive", "1"),
    ("strict_negative_types", "false"),
    ("folds", "10"),
    ("filter_thetas", "0.6,0.5,0.4,0.3,0.2,0.1,0.0"),
    ("curriculum", "0.6,0.5,0.4,0.3,0.2,0.1,0.0"),
    ("train_mode", "both"),
    ("epochs", "10"),
    ("learning_rate", "0.1"),
    ("lr_decay", "0.0001"),
    ("l2", "0.001"),
    ("synth_sentences", "50000"),
    ("synth_planted", "20"),
    ("synth_days", "120"),
    ("synth_peak", "200"),
    ("synth_leak", "0.002"),
    ("synth_decay", "0.5"),
    ("synth_distractor_rate", "0.3"),
];

/// Keys that do not change any artifact and stay out of the config hash.
const UNHASHED: &[&str] = &["out", "threads"];

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Config {
    values: BTreeMap<String, String>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum TrainMode {
    OneShot,
    Curriculum,
    Both,
}

impl TrainMode {
    pub fn one_shot(self) -> bool {
        matches!(self, TrainMode::OneShot | TrainMode::Both)
    }

    pub fn curriculum(self) -> bool {
        matches!(self, TrainMode::Curriculum | TrainMode::Both)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum GoldFormat {
    Oracle,
    Labels,
}

impl Default for Config {
    fn default() -> Self {
        Config {
            values: DEFAULTS.iter().map(|(k, v)| (k.to_string(), v.to_string())).collect(),
        }
    }
}

impl Config {
    /// Parses `key = value` lines; `#` starts a comment line.
    pub fn parse(text: &str) -> Result<Self> {
        let mut cfg = Config::default();
        for (i, raw) in text.lines().enumerate() {
            let line = raw.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let Some((k, v)) = line.split_once('=') else {
                bail!("config line {}: expected key = value, got `{line}`", i + 1);
            };
            cfg.set(k.trim(), v.trim()).with_context(|| format!("config line {}", i + 1))?;
        }
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).with_context(|| format!("reading config {}", path.display()))?;
        Config::parse(&text)
    }

    pub fn set(&mut self, key: &str, value: &str) -> Result<()> {
        match self.values.get_mut(key) {
            Some(v) => {
                *v = value.to_string();
                Ok(())
            }
            None => bail!("unknown config key `{key}`"),
        }
    }

    /// Applies `--key=value` overrides.
    pub fn apply_overrides(&mut self, args: &[String]) -> Result<()> {
        for a in args {
            let body = a.strip_prefix("--").unwrap_or(a);
            let Some((k, v)) = body.split_once('=') else {
                bail!("override `{a}` is not of the form --key=value");
            };
            self.set(&k.replace('-', "_"), v)?;
        }
        Ok(())
    }

    pub fn get(&self, key: &str) -> &str {
        self.values.get(key).map(String::as_str).unwrap_or_else(|| panic!("no config key {key}"))
    }

    fn parsed<T: std::str::FromStr>(&self, key: &str) -> Result<T>
    where
        T::Err: std::fmt::Display,
    {
        let raw = self.get(key);
        raw.parse()
            .map_err(|e| anyhow::anyhow!("invalid value `{raw}` for config key `{key}`: {e}"))
    }

    fn fraction(&self, key: &str) -> Result<f64> {
        let v: f64 = self.parsed(key)?;
        if !(0.0..=1.0).contains(&v) {
            bail!("invalid value `{v}` for config key `{key}`: must lie in [0, 1]");
        }
        Ok(v)
    }

    fn list(&self, key: &str) -> Vec<String> {
        self.get(key)
            .split(',')
            .map(str::trim)
            .filter(|s| !s.is_empty())
            .map(str::to_string)
            .collect()
    }

    fn float_list(&self, key: &str) -> Result<Vec<f64>> {
        self.list(key)
            .iter()
            .map(|s| {
                s.parse::<f64>()
                    .map_err(|e| anyhow::anyhow!("invalid value `{s}` in config key `{key}`: {e}"))
            })
            .collect()
    }

    pub fn path(&self, key: &str) -> Option<PathBuf> {
        let v = self.get(key);
        (!v.is_empty()).then(|| PathBuf::from(v))
    }

    pub fn out(&self) -> PathBuf {
        PathBuf::from(self.get("out"))
    }

    pub fn seed(&self) -> Result<u64> {
        self.parsed("seed")
    }

    pub fn threads(&self) -> Result<usize> {
        self.parsed("threads")
    }

    pub fn relations(&self) -> Result<RelationSet> {
        let undirected = self.list("undirected");
        let names = self.list("relations");
        if names.is_empty() {
            bail!("config key `relations` lists no relations");
        }
        for u in &undirected {
            if !names.contains(u) {
                bail!("config key `undirected` names `{u}`, which is not in `relations`");
            }
        }
        Ok(RelationSet::new(names.into_iter().map(|n| {
            let directed = !undirected.contains(&n);
            (n, directed)
        })))
    }

    pub fn types(&self) -> Result<TypeSet> {
        let t = self.list("types");
        if t.is_empty() {
            bail!("config key `types` lists no entity types");
        }
        Ok(TypeSet::new(t))
    }

    pub fn case(&self) -> Result<CasePolicy> {
        match self.get("case") {
            "sensitive" => Ok(CasePolicy::Sensitive),
            "insensitive" => Ok(CasePolicy::Insensitive),
            v => bail!("invalid value `{v}` for config key `case`: expected sensitive or insensitive"),
        }
    }

    pub fn gold_format(&self) -> Result<GoldFormat> {
        match self.get("gold_format") {
            "oracle" => Ok(GoldFormat::Oracle),
            "labels" => Ok(GoldFormat::Labels),
            v => bail!("invalid value `{v}` for config key `gold_format`: expected oracle or labels"),
        }
    }

    pub fn train_mode(&self) -> Result<TrainMode> {
        match self.get("train_mode") {
            "oneshot" => Ok(TrainMode::OneShot),
            "curriculum" => Ok(TrainMode::Curriculum),
            "both" => Ok(TrainMode::Both),
            v => bail!("invalid value `{v}` for config key `train_mode`: expected oneshot, curriculum or both"),
        }
    }

    pub fn filter_thetas(&self) -> Result<Vec<f64>> {
        let v = self.float_list("filter_thetas")?;
        if v.iter().any(|t| !(*t >= 0.0)) {
            bail!("invalid value for config key `filter_thetas`: thresholds must be non-negative");
        }
        Ok(v)
    }

    pub fn curriculum(&self) -> Result<Vec<f64>> {
        let v = self.float_list("curriculum")?;
        validate_thresholds(&v).map_err(|e| anyhow::anyhow!("invalid value for config key `curriculum`: {e}"))?;
        Ok(v)
    }

    pub fn train(&self) -> Result<TrainConfig> {
        let learning_rate: f64 = self.parsed("learning_rate")?;
        if !(learning_rate > 0.0) {
            bail!("invalid value `{learning_rate}` for config key `learning_rate`: must be positive");
        }
        let l2: f64 = self.parsed("l2")?;
        if !(l2 >= 0.0) {
            bail!("invalid value `{l2}` for config key `l2`: must be non-negative");
        }
        let lr_decay: f64 = self.parsed("lr_decay")?;
        if !(lr_decay >= 0.0) {
            bail!("invalid value `{lr_decay}` for config key `lr_decay`: must be non-negative");
        }
        Ok(TrainConfig {
            epochs: self.parsed("epochs")?,
            learning_rate,
            lr_decay,
            l2,
            seed: self.seed()?,
            warm_start: false,
        })
    }

    pub fn params(&self) -> Result<Params> {
        let window = WindowSpec::new(self.parsed("window")?)
            .map_err(|e| anyhow::anyhow!("invalid value for config key `window`: {e}"))?;
        let test_thresholds = TestThresholds::parse(self.get("test_thresholds"))
            .map_err(|e| anyhow::anyhow!("invalid value for config key `test_thresholds`: {e}"))?;
        let holdout_fraction = self.fraction("holdout_fraction")?;
        if holdout_fraction == 0.0 || holdout_fraction == 1.0 {
            bail!("invalid value `{holdout_fraction}` for config key `holdout_fraction`: must lie strictly between 0 and 1");
        }
        let folds: usize = self.parsed("folds")?;
        if folds < 2 {
            bail!("invalid value `{folds}` for config key `folds`: need at least 2");
        }
        Ok(Params {
            tau_c: self.parsed("tau_c")?,
            window,
            holdout_fraction,
            test_thresholds,
            negative_reserve_fraction: self.fraction("negative_reserve_fraction")?,
            negatives_per_positive: self.parsed("negatives_per_positive")?,
            strict_negative_types: self.parsed("strict_negative_types")?,
            folds,
            curriculum: self.curriculum()?,
            train: self.train()?,
            seed: self.seed()?,
        })
    }

    pub fn synth(&self) -> Result<SynthConfig> {
        let mut cfg = SynthConfig::standard(self.seed()?);
        cfg.planted = self.parsed("synth_planted")?;
        cfg.days = self.parsed("synth_days")?;
        cfg.peak = self.parsed("synth_peak")?;
        cfg.leak = self.fraction("synth_leak")?;
        cfg.decay = self.parsed("synth_decay")?;
        cfg.distractor_rate = self.parsed("synth_distractor_rate")?;
        cfg.scale_to_sentences(self.parsed("synth_sentences")?);
        cfg.validate().map_err(|e| anyhow::anyhow!("invalid synth_* config keys: {e}"))?;
        Ok(cfg)
    }

    /// Canonical `key=value` listing of every hashed key.
    pub fn canonical(&self) -> String {
        self.values
            .iter()
            .filter(|(k, _)| !UNHASHED.contains(&k.as_str()))
            .map(|(k, v)| format!("{k}={v}\n"))
            .collect()
    }

    /// SHA-256 of [`Config::canonical`], hex encoded.
    pub fn hash(&self) -> String {
        hex::encode(Sha256::digest(self.canonical().as_bytes()))
    }
}
