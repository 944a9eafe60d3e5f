//! Run configuration.
//!
//! The file format is flat `key = value` text. Keys are dotted
//! (`train.lr = 0.01`); a `[train]` header prefixes the keys below it until
//! the next header. `#` starts a comment. Values are never quoted; lists are
//! comma-separated. Every key has a default and unknown keys are rejected.
//! A `run.json` written by an earlier run is accepted in place of a config
//! file and restores its resolved settings.

use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};
use std::str::FromStr;
use std::time::Duration;

use tesmr_core::dataset::SplitConfig;
use tesmr_core::experiments::{SweepGrid, VariantName, VariantOverrides, VariantSpec};
use tesmr_core::hyper::default_hyperparams;
use tesmr_core::Hyperparams;

use crate::error::{Error, IoContext, Result};

fn defaults() -> Vec<(&'static str, String)> {
    let hp = default_hyperparams();
    let split = SplitConfig::default();
    let list = |v: &[f64]| v.iter().map(|x| format!("{x:?}")).collect::<Vec<_>>().join(",");
    vec![
        ("paths.recipes", "recipes.jsonl".into()),
        ("paths.interactions", "interactions.csv".into()),
        ("paths.dataset_dir", "data".into()),
        ("paths.cache_dir", "cache".into()),
        ("paths.output_dir", "out".into()),
        ("paths.image_root", ".".into()),
        ("split.ratios", list(&split.ratios)),
        ("split.min_interactions", split.min_interactions.to_string()),
        ("split.min_recipe_interactions", split.min_recipe_interactions.to_string()),
        ("split.seed", split.seed.to_string()),
        ("summarize.backend", "fallback".into()),
        ("summarize.fallback", "true".into()),
        ("summarize.review_cap", "20".into()),
        ("summarize.jobs", "4".into()),
        ("summarize.temperature", "0".into()),
        ("summarize.attempts", "3".into()),
        ("summarize.backoff_ms", "1000".into()),
        ("summarize.timeout_s", "120".into()),
        ("encode.backend", "fallback".into()),
        ("encode.source_dim", "384".into()),
        ("encode.model", "sentence-transformers/all-MiniLM-L6-v2".into()),
        ("encode.batch", "64".into()),
        ("encode.precomputed_dir", String::new()),
        (
            "encode.sources",
            "summaries,summaries_without_reviews,raw_features".into(),
        ),
        ("train.layers", hp.layers.to_string()),
        ("train.tau", format!("{:?}", hp.tau)),
        ("train.lambda_cl", format!("{:?}", hp.lambda_cl)),
        ("train.lambda_reg", format!("{:?}", hp.lambda_reg)),
        ("train.dim", hp.dim.to_string()),
        ("train.lr", format!("{:?}", hp.lr)),
        ("train.batch", hp.train_batch.to_string()),
        ("train.epochs", hp.epochs.to_string()),
        ("train.patience", hp.patience.to_string()),
        ("train.seed", hp.seed.to_string()),
        ("eval.k", "10,20".into()),
        ("eval.batch", hp.eval_batch.to_string()),
        ("eval.seeds", "0,1,2,3,4".into()),
        ("variant.name", "full".into()),
        ("variant.t2_both_branches", "false".into()),
        ("variant.cl_in_batch", "false".into()),
        ("sweep.tau", "0.3,0.5,0.7".into()),
        ("sweep.lambda_cl", "0.1,0.2,0.3,0.5".into()),
        ("sweep.layers", "1,2,3".into()),
    ]
}

/// Every known key with its current value.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ConfigMap {
    values: BTreeMap<String, String>,
}

impl Default for ConfigMap {
    fn default() -> Self {
        Self {
            values: defaults().into_iter().map(|(k, v)| (k.to_string(), v)).collect(),
        }
    }
}

impl ConfigMap {
    pub fn set(&mut self, key: &str, value: &str) -> Result<()> {
        match self.values.get_mut(key) {
            Some(slot) => {
                *slot = value.trim().to_string();
                Ok(())
            }
            None => Err(Error::Config(format!("unknown key `{key}`"))),
        }
    }

    /// Applies a `key=value` override.
    pub fn apply_override(&mut self, assignment: &str) -> Result<()> {
        let (k, v) = assignment
            .split_once('=')
            .ok_or_else(|| Error::Config(format!("override `{assignment}` is not key=value")))?;
        self.set(k.trim(), v)
    }

    pub fn get(&self, key: &str) -> &str {
        self.values.get(key).map_or("", String::as_str)
    }

    pub fn as_map(&self) -> &BTreeMap<String, String> {
        &self.values
    }

    /// Parses the `key = value` grammar described in the module docs.
    pub fn parse_text(&mut self, text: &str) -> Result<()> {
        let mut section = String::new();
        for (i, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let at = |msg: String| Error::Config(format!("line {}: {msg}", i + 1));
            if let Some(rest) = line.strip_prefix('[') {
                let name = rest
                    .strip_suffix(']')
                    .ok_or_else(|| at(format!("unterminated section header `{line}`")))?
                    .trim();
                section = name.to_string();
                continue;
            }
            let (k, v) = line
                .split_once('=')
                .ok_or_else(|| at(format!("expected `key = value`, got `{line}`")))?;
            let key = if section.is_empty() {
                k.trim().to_string()
            } else {
                format!("{section}.{}", k.trim())
            };
            self.set(&key, v).map_err(|e| at(e.to_string()))?;
        }
        Ok(())
    }

    /// Loads a config file (or a previous `run.json`) over the defaults.
    pub fn load(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path).at(path)?;
        let mut cfg = Self::default();
        if path.extension().is_some_and(|e| e == "json") {
            let v: serde_json::Value = serde_json::from_str(&text)
                .map_err(|e| Error::Config(format!("{}: {e}", path.display())))?;
            let obj = v
                .get("config")
                .and_then(|c| c.as_object())
                .ok_or_else(|| Error::Config(format!("{}: no `config` object", path.display())))?;
            for (k, v) in obj {
                let v = v
                    .as_str()
                    .ok_or_else(|| Error::Config(format!("{}: `{k}` is not a string", path.display())))?;
                cfg.set(k, v)?;
            }
        } else {
            cfg.parse_text(&text)?;
        }
        Ok(cfg)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SummarizeBackend {
    Service,
    Fallback,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum EncodeBackend {
    Fallback,
    Service,
    Precomputed,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Paths {
    pub recipes: PathBuf,
    pub interactions: PathBuf,
    pub dataset_dir: PathBuf,
    pub cache_dir: PathBuf,
    pub output_dir: PathBuf,
    pub image_root: PathBuf,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SummarizeConfig {
    pub backend: SummarizeBackend,
    pub fallback: bool,
    pub review_cap: usize,
    pub jobs: usize,
    pub temperature: f64,
    pub attempts: usize,
    pub backoff: Duration,
    pub timeout: Duration,
}

#[derive(Debug, Clone, PartialEq)]
pub struct EncodeConfig {
    pub backend: EncodeBackend,
    pub source_dim: usize,
    pub model: String,
    pub batch: usize,
    pub precomputed_dir: Option<PathBuf>,
    pub sources: Vec<tesmr_core::experiments::ContentSource>,
}

/// Typed view of a [`ConfigMap`].
#[derive(Debug, Clone, PartialEq)]
pub struct RunConfig {
    pub paths: Paths,
    pub split: SplitConfig,
    pub summarize: SummarizeConfig,
    pub encode: EncodeConfig,
    pub hp: Hyperparams,
    pub ks: Vec<usize>,
    pub seeds: Vec<u64>,
    pub variant: VariantSpec,
    pub grid: SweepGrid,
}

fn typed<T: FromStr>(map: &ConfigMap, key: &str) -> Result<T> {
    let raw = map.get(key);
    raw.parse()
        .map_err(|_| Error::Config(format!("`{key}`: cannot parse `{raw}`")))
}

fn list<T: FromStr>(map: &ConfigMap, key: &str) -> Result<Vec<T>> {
    let raw = map.get(key);
    if raw.trim().is_empty() {
        return Ok(Vec::new());
    }
    raw.split(',')
        .map(|s| {
            s.trim()
                .parse()
                .map_err(|_| Error::Config(format!("`{key}`: cannot parse `{}`", s.trim())))
        })
        .collect()
}

fn content_source(s: &str) -> Result<tesmr_core::experiments::ContentSource> {
    use tesmr_core::experiments::ContentSource::*;
    [Summaries, SummariesWithoutReviews, RawFeatures]
        .into_iter()
        .find(|c| c.as_str() == s.trim())
        .ok_or_else(|| Error::Config(format!("unknown content source `{}`", s.trim())))
}

impl RunConfig {
    pub fn from_map(map: &ConfigMap) -> Result<Self> {
        let path = |k: &str| PathBuf::from(map.get(k));
        let ratios: Vec<f64> = list(map, "split.ratios")?;
        let ratios: [f64; 3] = ratios
            .try_into()
            .map_err(|_| Error::Config("`split.ratios` needs three values".into()))?;
        let split = SplitConfig {
            ratios,
            min_interactions: typed(map, "split.min_interactions")?,
            min_recipe_interactions: typed(map, "split.min_recipe_interactions")?,
            seed: typed(map, "split.seed")?,
        };
        split.validate()?;

        let summarize = SummarizeConfig {
            backend: match map.get("summarize.backend") {
                "service" => SummarizeBackend::Service,
                "fallback" => SummarizeBackend::Fallback,
                other => {
                    return Err(Error::Config(format!(
                        "`summarize.backend` must be service or fallback, got `{other}`"
                    )))
                }
            },
            fallback: typed(map, "summarize.fallback")?,
            review_cap: typed(map, "summarize.review_cap")?,
            jobs: typed::<usize>(map, "summarize.jobs")?.max(1),
            temperature: typed(map, "summarize.temperature")?,
            attempts: typed::<usize>(map, "summarize.attempts")?.max(1),
            backoff: Duration::from_millis(typed(map, "summarize.backoff_ms")?),
            timeout: Duration::from_secs(typed(map, "summarize.timeout_s")?),
        };

        let dir = map.get("encode.precomputed_dir");
        let encode = EncodeConfig {
            backend: match map.get("encode.backend") {
                "fallback" => EncodeBackend::Fallback,
                "service" => EncodeBackend::Service,
                "precomputed" => EncodeBackend::Precomputed,
                other => {
                    return Err(Error::Config(format!(
                        "`encode.backend` must be fallback, service or precomputed, got `{other}`"
                    )))
                }
            },
            source_dim: typed(map, "encode.source_dim")?,
            model: map.get("encode.model").to_string(),
            batch: typed::<usize>(map, "encode.batch")?.max(1),
            precomputed_dir: (!dir.is_empty()).then(|| PathBuf::from(dir)),
            sources: map
                .get("encode.sources")
                .split(',')
                .filter(|s| !s.trim().is_empty())
                .map(content_source)
                .collect::<Result<_>>()?,
        };
        if encode.backend == EncodeBackend::Precomputed && encode.precomputed_dir.is_none() {
            return Err(Error::Config(
                "`encode.precomputed_dir` is required with the precomputed backend".into(),
            ));
        }
        if encode.source_dim == 0 {
            return Err(Error::Config("`encode.source_dim` must be positive".into()));
        }

        let hp = Hyperparams {
            layers: typed(map, "train.layers")?,
            tau: typed(map, "train.tau")?,
            lambda_cl: typed(map, "train.lambda_cl")?,
            lambda_reg: typed(map, "train.lambda_reg")?,
            dim: typed(map, "train.dim")?,
            lr: typed(map, "train.lr")?,
            train_batch: typed(map, "train.batch")?,
            eval_batch: typed(map, "eval.batch")?,
            epochs: typed(map, "train.epochs")?,
            patience: typed(map, "train.patience")?,
            seed: typed(map, "train.seed")?,
        };
        hp.validate()?;

        let ks: Vec<usize> = list(map, "eval.k")?;
        if ks.is_empty() || ks.contains(&0) {
            return Err(Error::Config("`eval.k` needs positive cutoffs".into()));
        }
        let seeds: Vec<u64> = list(map, "eval.seeds")?;
        if seeds.is_empty() {
            return Err(Error::Config("`eval.seeds` must not be empty".into()));
        }
        let variant = VariantSpec {
            name: VariantName::parse(map.get("variant.name"))?,
            overrides: VariantOverrides {
                t2_both_branches: typed(map, "variant.t2_both_branches")?,
                cl_in_batch: typed(map, "variant.cl_in_batch")?,
            },
        };
        let grid = SweepGrid {
            taus: list(map, "sweep.tau")?,
            lambda_cls: list(map, "sweep.lambda_cl")?,
            layers: list(map, "sweep.layers")?,
        };
        Ok(Self {
            paths: Paths {
                recipes: path("paths.recipes"),
                interactions: path("paths.interactions"),
                dataset_dir: path("paths.dataset_dir"),
                cache_dir: path("paths.cache_dir"),
                output_dir: path("paths.output_dir"),
                image_root: path("paths.image_root"),
            },
            split,
            summarize,
            encode,
            hp,
            ks,
            seeds,
            variant,
            grid,
        })
    }
}

/// Fails with a config error when `path` does not exist.
pub fn require_exists(path: &Path, what: &str) -> Result<()> {
    if path.exists() {
        Ok(())
    } else {
        Err(Error::Config(format!("{what} `{}` does not exist", path.display())))
    }
}
