//! Flat `key = value` experiment configuration.
//!
//! Blank lines and `#` comments are ignored, list values are comma
//! separated, relative paths resolve against the config file's directory and
//! unknown or repeated keys are errors. See the README for the key list.

use std::collections::BTreeMap;
use std::fmt;
use std::fs;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use crate::attack::AttackMode;
use crate::dataset::{CifarVariant, DistributionSpec, GaussianSpec};
use crate::error::{Error, Result};

/// How the target model is trained.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum TrainingMode {
    Centralized,
    Federated(usize),
}

impl TrainingMode {
    pub fn n_clients(self) -> usize {
        match self {
            TrainingMode::Centralized => 1,
            TrainingMode::Federated(n) => n,
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            TrainingMode::Centralized => "centralized",
            TrainingMode::Federated(_) => "federated",
        }
    }
}

impl fmt::Display for TrainingMode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            TrainingMode::Centralized => f.write_str("centralized"),
            TrainingMode::Federated(n) => write!(f, "federated:{n}"),
        }
    }
}

impl FromStr for TrainingMode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let s = s.trim();
        if s == "centralized" {
            return Ok(TrainingMode::Centralized);
        }
        if let Some(n) = s.strip_prefix("federated:") {
            let n: usize = n
                .trim()
                .parse()
                .map_err(|_| Error::config(format!("bad client count in `{s}`")))?;
            return Ok(TrainingMode::Federated(n));
        }
        Err(Error::config(format!(
            "training mode must be `centralized` or `federated:<n>`, got `{s}`"
        )))
    }
}

pub(crate) fn parse_attack_mode(s: &str) -> Result<AttackMode> {
    let s = s.trim();
    if s == "samplewise" {
        return Ok(AttackMode::SampleWise);
    }
    let b = s.strip_prefix("batchwise:").unwrap_or(s);
    b.trim().parse::<usize>().map(AttackMode::BatchWise).map_err(|_| {
        Error::config(format!(
            "attack mode must be `samplewise` or a batch size, got `{s}`"
        ))
    })
}

#[derive(Debug, Clone, PartialEq)]
pub struct ShadowSettings {
    pub count: usize,
    pub size: usize,
    pub train_fraction: f64,
    pub epochs: usize,
    pub batch_size: usize,
    pub learning_rate: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct AttackSettings {
    pub epochs: usize,
    pub batch_size: usize,
    pub learning_rate: f64,
    /// Hidden width of the attack classifier; `None` is logistic regression.
    pub hidden: Option<usize>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentConfig {
    pub dataset_name: String,
    pub dataset: DistributionSpec,
    /// Target training records (the member pool).
    pub target_train_size: usize,
    /// Held-out records never seen by target or attacker (the nonmember pool).
    pub nonmember_size: usize,
    /// Attacker-side records the shadow datasets are drawn from.
    pub shadow_master_size: usize,
    pub training_modes: Vec<TrainingMode>,
    pub hidden: Vec<usize>,
    pub rounds: usize,
    pub local_epochs: usize,
    pub batch_size: usize,
    pub learning_rate: f64,
    pub shadow: ShadowSettings,
    pub attack: AttackSettings,
    pub attack_modes: Vec<AttackMode>,
    pub seeds: Vec<u64>,
    pub output_path: Option<PathBuf>,
}

impl Default for ExperimentConfig {
    /// The desk-scale setup: 10-class synthetic data, 1000 target records,
    /// one hidden layer of 64, 100 effective epochs, 8 shadows.
    fn default() -> Self {
        ExperimentConfig {
            dataset_name: "synthetic".into(),
            dataset: DistributionSpec::SyntheticGaussian(GaussianSpec {
                class_count: 10,
                dim: 32,
                means_seed: 2024,
                spread: 0.8,
            }),
            target_train_size: 1000,
            nonmember_size: 1000,
            shadow_master_size: 4000,
            training_modes: vec![TrainingMode::Centralized],
            hidden: vec![64],
            rounds: 50,
            local_epochs: 2,
            batch_size: 16,
            learning_rate: 0.1,
            shadow: ShadowSettings {
                count: 8,
                size: 2000,
                train_fraction: 0.5,
                epochs: 100,
                batch_size: 16,
                learning_rate: 0.1,
            },
            attack: AttackSettings {
                epochs: 100,
                batch_size: 64,
                learning_rate: 0.1,
                hidden: None,
            },
            attack_modes: std::iter::once(AttackMode::SampleWise)
                .chain([8, 16, 32, 64, 128, 256].map(AttackMode::BatchWise))
                .collect(),
            seeds: vec![1, 2, 3, 4, 5],
            output_path: None,
        }
    }
}

impl ExperimentConfig {
    /// Effective epochs of the centralized baseline, `e * r`.
    pub fn total_epochs(&self) -> usize {
        self.local_epochs * self.rounds
    }

    pub fn validate(&self) -> Result<()> {
        self.dataset.validate()?;
        let positive = [
            ("target_train_size", self.target_train_size),
            ("nonmember_size", self.nonmember_size),
            ("shadow_master_size", self.shadow_master_size),
            ("rounds", self.rounds),
            ("local_epochs", self.local_epochs),
            ("batch_size", self.batch_size),
            ("shadow_count", self.shadow.count),
            ("shadow_size", self.shadow.size),
            ("shadow_epochs", self.shadow.epochs),
            ("shadow_batch_size", self.shadow.batch_size),
            ("attack_epochs", self.attack.epochs),
            ("attack_batch_size", self.attack.batch_size),
        ];
        if let Some((key, _)) = positive.iter().find(|(_, v)| *v == 0) {
            return Err(Error::config(format!("`{key}` must be at least 1")));
        }
        for (key, lr) in [
            ("learning_rate", self.learning_rate),
            ("shadow_learning_rate", self.shadow.learning_rate),
            ("attack_learning_rate", self.attack.learning_rate),
        ] {
            if !(lr.is_finite() && lr > 0.0) {
                return Err(Error::config(format!("`{key}` must be positive, got {lr}")));
            }
        }
        if self.hidden.contains(&0) || self.attack.hidden == Some(0) {
            return Err(Error::config("hidden layer widths must be at least 1"));
        }
        if self.shadow.size > self.shadow_master_size {
            return Err(Error::config(format!(
                "shadow_size {} exceeds shadow_master_size {}",
                self.shadow.size, self.shadow_master_size
            )));
        }
        if !(self.shadow.train_fraction > 0.0 && self.shadow.train_fraction < 1.0) {
            return Err(Error::config(
                "`shadow_train_fraction` must lie strictly between 0 and 1",
            ));
        }
        let split = (self.shadow.train_fraction * self.shadow.size as f64).round() as usize;
        if split == 0 || split == self.shadow.size {
            return Err(Error::config("shadow splits must both be nonempty"));
        }
        if self.training_modes.is_empty() {
            return Err(Error::config("at least one training mode is required"));
        }
        for m in &self.training_modes {
            if let TrainingMode::Federated(n) = m {
                if *n == 0 || *n > self.target_train_size {
                    return Err(Error::config(format!(
                        "cannot spread {} target records over {n} clients",
                        self.target_train_size
                    )));
                }
            }
        }
        if self.attack_modes.is_empty() {
            return Err(Error::config("at least one attack mode is required"));
        }
        if self.attack_modes.contains(&AttackMode::BatchWise(0)) {
            return Err(Error::config("attack batch sizes must be at least 1"));
        }
        if self.seeds.is_empty() {
            return Err(Error::config("at least one seed is required"));
        }
        if has_duplicates(&self.seeds)
            || has_duplicates(&self.attack_modes)
            || has_duplicates(&self.training_modes)
        {
            return Err(Error::config(
                "seeds, training modes and attack modes must not repeat",
            ));
        }
        Ok(())
    }

    pub fn from_file(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = fs::read_to_string(path)
            .map_err(|e| Error::config(format!("cannot read {}: {e}", path.display())))?;
        let base = path.parent().unwrap_or_else(|| Path::new("."));
        Self::parse(&text, base)
    }

    /// Parses config text; relative paths are joined onto `base_dir`.
    pub fn parse(text: &str, base_dir: &Path) -> Result<Self> {
        let mut entries = BTreeMap::new();
        for (lineno, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let (key, value) = line
                .split_once('=')
                .ok_or_else(|| Error::config(format!("line {}: expected `key = value`", lineno + 1)))?;
            let key = key.trim().to_string();
            if entries.insert(key.clone(), value.trim().to_string()).is_some() {
                return Err(Error::config(format!("line {}: `{key}` given twice", lineno + 1)));
            }
        }
        let mut kv = Entries { entries, base_dir };
        let cfg = kv.build()?;
        if let Some(key) = kv.entries.keys().next() {
            return Err(Error::config(format!("unknown key `{key}`")));
        }
        cfg.validate()?;
        Ok(cfg)
    }

    /// Renders the config in the file format accepted by [`ExperimentConfig::parse`].
    pub fn to_text(&self) -> String {
        let mut out = String::new();
        let mut put = |k: &str, v: String| {
            out.push_str(k);
            out.push_str(" = ");
            out.push_str(&v);
            out.push('\n');
        };
        let join = |v: &[String]| v.join(", ");
        put("dataset_name", self.dataset_name.clone());
        match &self.dataset {
            DistributionSpec::SyntheticGaussian(g) => {
                put("dataset", "synthetic".into());
                put("synthetic_classes", g.class_count.to_string());
                put("synthetic_dim", g.dim.to_string());
                put("synthetic_means_seed", g.means_seed.to_string());
                put("synthetic_spread", g.spread.to_string());
            }
            DistributionSpec::Idx { images, labels } => {
                put("dataset", "idx".into());
                put("idx_images", images.display().to_string());
                put("idx_labels", labels.display().to_string());
            }
            DistributionSpec::Cifar { variant, paths } => {
                let kind = match variant {
                    CifarVariant::Cifar10 => "cifar10",
                    CifarVariant::Cifar100 => "cifar100",
                };
                put("dataset", kind.into());
                let p: Vec<String> = paths.iter().map(|p| p.display().to_string()).collect();
                put("cifar_files", join(&p));
            }
        }
        put("target_train_size", self.target_train_size.to_string());
        put("nonmember_size", self.nonmember_size.to_string());
        put("shadow_master_size", self.shadow_master_size.to_string());
        let modes: Vec<String> = self.training_modes.iter().map(|m| m.to_string()).collect();
        put("training_modes", join(&modes));
        let hidden: Vec<String> = self.hidden.iter().map(|h| h.to_string()).collect();
        put("hidden", join(&hidden));
        put("rounds", self.rounds.to_string());
        put("local_epochs", self.local_epochs.to_string());
        put("batch_size", self.batch_size.to_string());
        put("learning_rate", self.learning_rate.to_string());
        put("shadow_count", self.shadow.count.to_string());
        put("shadow_size", self.shadow.size.to_string());
        put("shadow_train_fraction", self.shadow.train_fraction.to_string());
        put("shadow_epochs", self.shadow.epochs.to_string());
        put("shadow_batch_size", self.shadow.batch_size.to_string());
        put("shadow_learning_rate", self.shadow.learning_rate.to_string());
        let amodes: Vec<String> = self
            .attack_modes
            .iter()
            .map(|m| match m {
                AttackMode::SampleWise => "samplewise".to_string(),
                AttackMode::BatchWise(b) => b.to_string(),
            })
            .collect();
        put("attack_modes", join(&amodes));
        put("attack_epochs", self.attack.epochs.to_string());
        put("attack_batch_size", self.attack.batch_size.to_string());
        put("attack_learning_rate", self.attack.learning_rate.to_string());
        put("attack_hidden", self.attack.hidden.unwrap_or(0).to_string());
        let seeds: Vec<String> = self.seeds.iter().map(|s| s.to_string()).collect();
        put("seeds", join(&seeds));
        if let Some(p) = &self.output_path {
            put("output", p.display().to_string());
        }
        out
    }
}

fn has_duplicates<T: Ord + Clone>(items: &[T]) -> bool {
    let mut v = items.to_vec();
    v.sort();
    v.windows(2).any(|w| w[0] == w[1])
}

struct Entries<'a> {
    entries: BTreeMap<String, String>,
    base_dir: &'a Path,
}

impl Entries<'_> {
    fn take(&mut self, key: &str) -> Option<String> {
        self.entries.remove(key)
    }

    fn parsed<T: FromStr>(&mut self, key: &str, default: T) -> Result<T> {
        match self.take(key) {
            None => Ok(default),
            Some(v) => v
                .parse()
                .map_err(|_| Error::config(format!("`{key}`: cannot parse `{v}`"))),
        }
    }

    fn required(&mut self, key: &str) -> Result<String> {
        self.take(key)
            .ok_or_else(|| Error::config(format!("missing required key `{key}`")))
    }

    fn path(&self, v: &str) -> PathBuf {
        let p = PathBuf::from(v.trim());
        if p.is_absolute() {
            p
        } else {
            self.base_dir.join(p)
        }
    }

    fn list<T>(&mut self, key: &str, parse: impl Fn(&str) -> Result<T>) -> Result<Option<Vec<T>>> {
        match self.take(key) {
            None => Ok(None),
            Some(v) if v.trim().is_empty() => Ok(Some(Vec::new())),
            Some(v) => v
                .split(',')
                .map(|s| parse(s.trim()))
                .collect::<Result<Vec<_>>>()
                .map(Some),
        }
    }

    fn build(&mut self) -> Result<ExperimentConfig> {
        let d = ExperimentConfig::default();
        let kind = self.take("dataset").unwrap_or_else(|| "synthetic".into());
        let dataset = match kind.as_str() {
            "synthetic" => {
                let DistributionSpec::SyntheticGaussian(g) = &d.dataset else {
                    unreachable!("default source is synthetic")
                };
                DistributionSpec::SyntheticGaussian(GaussianSpec {
                    class_count: self.parsed("synthetic_classes", g.class_count)?,
                    dim: self.parsed("synthetic_dim", g.dim)?,
                    means_seed: self.parsed("synthetic_means_seed", g.means_seed)?,
                    spread: self.parsed("synthetic_spread", g.spread)?,
                })
            }
            "idx" => {
                let images = self.required("idx_images")?;
                let labels = self.required("idx_labels")?;
                DistributionSpec::Idx {
                    images: self.path(&images),
                    labels: self.path(&labels),
                }
            }
            "cifar10" | "cifar100" => {
                let variant = if kind == "cifar10" {
                    CifarVariant::Cifar10
                } else {
                    CifarVariant::Cifar100
                };
                let files = self.required("cifar_files")?;
                let paths = files
                    .split(',')
                    .filter(|s| !s.trim().is_empty())
                    .map(|s| self.path(s))
                    .collect();
                DistributionSpec::Cifar { variant, paths }
            }
            other => {
                return Err(Error::config(format!(
                    "`dataset` must be synthetic, idx, cifar10 or cifar100, got `{other}`"
                )))
            }
        };
        let dataset_name = self.take("dataset_name").unwrap_or(kind);

        let rounds = self.parsed("rounds", d.rounds)?;
        let local_epochs = self.parsed("local_epochs", d.local_epochs)?;
        let batch_size = self.parsed("batch_size", d.batch_size)?;
        let learning_rate = self.parsed("learning_rate", d.learning_rate)?;
        let shadow_master_size = self.parsed("shadow_master_size", d.shadow_master_size)?;

        let training_modes = self
            .list("training_modes", |s| s.parse())?
            .unwrap_or(d.training_modes);
        let hidden = self
            .list("hidden", |s| {
                s.parse::<usize>()
                    .map_err(|_| Error::config(format!("`hidden`: bad width `{s}`")))
            })?
            .unwrap_or(d.hidden);
        let attack_modes = self
            .list("attack_modes", parse_attack_mode)?
            .unwrap_or(d.attack_modes);
        let seeds = self
            .list("seeds", |s| {
                s.parse::<u64>()
                    .map_err(|_| Error::config(format!("`seeds`: bad seed `{s}`")))
            })?
            .unwrap_or(d.seeds);

        let shadow = ShadowSettings {
            count: self.parsed("shadow_count", d.shadow.count)?,
            size: self.parsed("shadow_size", shadow_master_size / 2)?,
            train_fraction: self.parsed("shadow_train_fraction", d.shadow.train_fraction)?,
            epochs: self.parsed("shadow_epochs", local_epochs * rounds)?,
            batch_size: self.parsed("shadow_batch_size", batch_size)?,
            learning_rate: self.parsed("shadow_learning_rate", learning_rate)?,
        };
        let attack_hidden: usize = self.parsed("attack_hidden", 0)?;
        let attack = AttackSettings {
            epochs: self.parsed("attack_epochs", d.attack.epochs)?,
            batch_size: self.parsed("attack_batch_size", d.attack.batch_size)?,
            learning_rate: self.parsed("attack_learning_rate", d.attack.learning_rate)?,
            hidden: (attack_hidden > 0).then_some(attack_hidden),
        };
        let output_path = self.take("output").map(|p| self.path(&p));

        Ok(ExperimentConfig {
            dataset_name,
            dataset,
            target_train_size: self.parsed("target_train_size", d.target_train_size)?,
            nonmember_size: self.parsed("nonmember_size", d.nonmember_size)?,
            shadow_master_size,
            training_modes,
            hidden,
            rounds,
            local_epochs,
            batch_size,
            learning_rate,
            shadow,
            attack,
            attack_modes,
            seeds,
            output_path,
        })
    }
}
