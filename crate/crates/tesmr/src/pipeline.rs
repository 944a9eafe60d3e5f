//! The pipeline stages behind the subcommands. Stages talk only through files.
//!
//! Output directory layout:
//!
//! ```text
//! <output>/summaries/{recipes,users,users_without_reviews}.jsonl
//! <output>/embeddings/<source>.{users,recipes}.tesm
//! <output>/checkpoints/<variant>-seed<seed>.ckpt
//! <output>/logs/<variant>-seed<seed>.csv
//! <output>/reports/<variant>.json
//! <output>/report.txt
//! <output>/sweep.csv
//! <output>/run.json
//! ```

use std::collections::BTreeSet;
use std::fs;
use std::path::{Path, PathBuf};

use tesmr_core::dataset::{build_dataset, stats, Dataset, DatasetStats, SplitKind};
use tesmr_core::evaluate::{evaluate_model, render_table, MetricsReport, SeedMetrics};
use tesmr_core::experiments::{
    config_snapshot, propagate_content, run_mp_baseline, run_variant, sweep_csv, ContentSource,
    VariantName, VariantSpec,
};
use tesmr_core::propagate::normalize;
use tesmr_core::train::{fit, ContentFeatures, FitOutcome, TrainedModel};
use tesmr_core::Hyperparams;

use crate::config::{require_exists, EncodeBackend, RunConfig, SummarizeBackend};
use crate::embed::{encode_source, import_precomputed, Encoder, FileContent};
use crate::error::{Error, IoContext, Result};
use crate::ingest::{load_interactions, load_recipes};
use crate::service::{ChatClient, EmbeddingClient, RetryPolicy, TextGenerator};
use crate::store::{read_checkpoint, read_dataset, write_atomic, write_checkpoint, write_dataset};
use crate::summary::{summarize_dataset, SummaryCache, SummarySet, Summarizer};

pub fn summaries_dir(cfg: &RunConfig) -> PathBuf {
    cfg.paths.output_dir.join("summaries")
}

pub fn embeddings_dir(cfg: &RunConfig) -> PathBuf {
    cfg.paths.output_dir.join("embeddings")
}

pub fn reports_dir(cfg: &RunConfig) -> PathBuf {
    cfg.paths.output_dir.join("reports")
}

pub fn checkpoint_path(cfg: &RunConfig, variant: VariantName, seed: u64) -> PathBuf {
    cfg.paths
        .output_dir
        .join("checkpoints")
        .join(format!("{}-seed{seed}.ckpt", variant.as_str()))
}

pub fn log_path(cfg: &RunConfig, variant: VariantName, seed: u64) -> PathBuf {
    cfg.paths
        .output_dir
        .join("logs")
        .join(format!("{}-seed{seed}.csv", variant.as_str()))
}

pub fn report_path(cfg: &RunConfig, variant: &str) -> PathBuf {
    reports_dir(cfg).join(format!("{variant}.json"))
}

#[derive(Debug, Clone, PartialEq)]
pub struct IngestOutcome {
    pub stats: DatasetStats,
    pub warnings: Vec<String>,
}

/// Raw files to the dataset directory.
pub fn ingest(cfg: &RunConfig) -> Result<IngestOutcome> {
    require_exists(&cfg.paths.recipes, "recipe file")?;
    require_exists(&cfg.paths.interactions, "interaction file")?;
    let recipes = load_recipes(&cfg.paths.recipes)?;
    let interactions = load_interactions(&cfg.paths.interactions, &recipes.records)?;
    let ds = build_dataset(&recipes.records, &interactions.records, &cfg.split)?;
    write_dataset(&ds, &cfg.paths.dataset_dir)?;
    let mut warnings = recipes.warnings;
    warnings.extend(interactions.warnings);
    Ok(IngestOutcome {
        stats: stats(&ds),
        warnings,
    })
}

pub fn load_dataset(cfg: &RunConfig) -> Result<Dataset> {
    require_exists(&cfg.paths.dataset_dir, "dataset directory")?;
    read_dataset(&cfg.paths.dataset_dir)
}

/// Recipe and user summaries through the configured backend and the cache.
pub fn summarize(cfg: &RunConfig) -> Result<SummarySet> {
    let ds = load_dataset(cfg)?;
    let s = &cfg.summarize;
    let client = match s.backend {
        SummarizeBackend::Fallback => None,
        SummarizeBackend::Service => match ChatClient::from_env(s.temperature, s.timeout) {
            Some(c) => Some(c),
            None if s.fallback => {
                eprintln!("warning: TESMR_LLM_URL is not set; using fallback summaries");
                None
            }
            None => {
                return Err(Error::Config(
                    "summarize.backend = service needs TESMR_LLM_URL (or summarize.fallback = true)".into(),
                ))
            }
        },
    };
    let cache = SummaryCache::new(&cfg.paths.cache_dir);
    let mut summarizer = Summarizer::new(client.as_ref().map(|c| c as &dyn TextGenerator), &cache);
    summarizer.retry = RetryPolicy {
        attempts: s.attempts,
        base_backoff: s.backoff,
    };
    summarizer.fallback = s.fallback;
    summarizer.review_cap = s.review_cap;
    summarizer.image_root = cfg.paths.image_root.clone();
    let set = summarize_dataset(&summarizer, &ds, s.jobs)?;
    set.write(&summaries_dir(cfg))?;
    Ok(set)
}

/// Encoder embeddings for every configured content source.
pub fn encode(cfg: &RunConfig) -> Result<Vec<ContentSource>> {
    let ds = load_dataset(cfg)?;
    let out = embeddings_dir(cfg);
    let e = &cfg.encode;
    if e.backend == EncodeBackend::Precomputed {
        let from = e.precomputed_dir.as_ref().expect("validated in config");
        require_exists(from, "precomputed embedding directory")?;
        for &source in &e.sources {
            import_precomputed(&ds, from, source, &out)?;
        }
        return Ok(e.sources.clone());
    }
    let encoder = match e.backend {
        EncodeBackend::Fallback => Encoder::Fallback {
            source_dim: e.source_dim,
        },
        _ => Encoder::Service {
            client: EmbeddingClient::from_env(&e.model, cfg.summarize.timeout).ok_or_else(|| {
                Error::Config("encode.backend = service needs TESMR_EMB_URL".into())
            })?,
            batch: e.batch,
        },
    };
    let needs_summaries = e.sources.iter().any(|s| *s != ContentSource::RawFeatures);
    let summaries = if needs_summaries {
        let dir = summaries_dir(cfg);
        if !dir.exists() {
            return Err(Error::Config(format!(
                "{} not found; run `tesmr summarize` first",
                dir.display()
            )));
        }
        Some(SummarySet::read(&dir)?)
    } else {
        None
    };
    for &source in &e.sources {
        encode_source(&encoder, &ds, summaries.as_ref(), source, &out)?;
    }
    Ok(e.sources.clone())
}

fn content_for(
    cfg: &RunConfig,
    ds: &Dataset,
    spec: &VariantSpec,
    hp: &Hyperparams,
) -> Result<Option<ContentFeatures<f32>>> {
    let plan = spec.plan(hp.layers);
    match plan.content {
        Some(source) if plan.model.content_branch => {
            let mut files = FileContent::load(ds, &embeddings_dir(cfg), &[source])?;
            let raw = tesmr_core::experiments::ContentProvider::content(&mut files, ds, source)?;
            let adj = normalize(&ds.graph_train)?;
            Ok(Some(propagate_content(&adj, &raw, plan.content_layers)?))
        }
        _ => Ok(None),
    }
}

fn trained_spec(cfg: &RunConfig) -> Result<VariantSpec> {
    if !cfg.variant.plan(cfg.hp.layers).trained {
        return Err(Error::Config(format!(
            "variant `{}` is training-free; use `tesmr mp-baseline`",
            cfg.variant.name
        )));
    }
    Ok(cfg.variant)
}

/// Trains the configured variant with `train.seed`; writes the
/// best-validation checkpoint and the epoch log.
pub fn train(cfg: &RunConfig) -> Result<FitOutcome> {
    let spec = trained_spec(cfg)?;
    let ds = load_dataset(cfg)?;
    let content = content_for(cfg, &ds, &spec, &cfg.hp)?;
    let adj = normalize(&ds.graph_train)?;
    let plan = spec.plan(cfg.hp.layers);
    let outcome = fit(&ds, &adj, content.as_ref(), &cfg.hp, &plan.model)?;
    write_checkpoint(&outcome.state, &checkpoint_path(cfg, spec.name, cfg.hp.seed))?;
    write_atomic(&log_path(cfg, spec.name, cfg.hp.seed), outcome.log_csv().as_bytes())?;
    if let Some(d) = &outcome.diverged {
        return Err(Error::Service(format!("training diverged at {d}")));
    }
    Ok(outcome)
}

fn write_report(cfg: &RunConfig, report: &MetricsReport) -> Result<()> {
    let mut bytes = serde_json::to_vec_pretty(report).expect("in-memory serialization");
    bytes.push(b'\n');
    write_atomic(&report_path(cfg, &report.variant), &bytes)
}

/// Test-split metrics of the checkpoint written by `train`.
pub fn evaluate(cfg: &RunConfig) -> Result<MetricsReport> {
    let spec = trained_spec(cfg)?;
    let ds = load_dataset(cfg)?;
    let path = checkpoint_path(cfg, spec.name, cfg.hp.seed);
    require_exists(&path, "checkpoint (run `tesmr train` first)")?;
    let state = read_checkpoint(&path)?;
    let plan = spec.plan(cfg.hp.layers);
    if state.config != plan.model {
        return Err(Error::Config(format!(
            "{} was trained with a different model configuration than `{}` at train.layers = {}",
            path.display(),
            spec.name,
            cfg.hp.layers
        )));
    }
    let content = content_for(cfg, &ds, &spec, &cfg.hp)?;
    let adj = normalize(&ds.graph_train)?;
    let model = TrainedModel::new(&state, content.as_ref(), &adj)?;
    let metrics = evaluate_model(&model, &ds, SplitKind::Test, &cfg.ks, cfg.hp.eval_batch)?;
    let report = MetricsReport::new(
        spec.name.as_str(),
        SplitKind::Test,
        config_snapshot(&spec, &plan, &cfg.hp, &cfg.ks),
        vec![SeedMetrics {
            seed: cfg.hp.seed,
            metrics,
        }],
    );
    write_report(cfg, &report)?;
    Ok(report)
}

pub fn mp_baseline(cfg: &RunConfig) -> Result<MetricsReport> {
    let ds = load_dataset(cfg)?;
    let mut files = FileContent::load(&ds, &embeddings_dir(cfg), &[ContentSource::RawFeatures])?;
    let report = run_mp_baseline(&ds, &mut files, cfg.hp.layers, &cfg.ks, cfg.hp.eval_batch)?;
    write_report(cfg, &report)?;
    Ok(report)
}

/// Every variant over `eval.seeds`, one report file each.
pub fn ablate(cfg: &RunConfig) -> Result<Vec<MetricsReport>> {
    let ds = load_dataset(cfg)?;
    let specs: Vec<VariantSpec> = VariantName::ALL
        .iter()
        .map(|&name| VariantSpec {
            name,
            overrides: cfg.variant.overrides,
        })
        .collect();
    let sources: BTreeSet<&'static str> = specs
        .iter()
        .filter_map(|s| {
            let p = s.plan(cfg.hp.layers);
            p.content.filter(|_| p.model.content_branch || !p.trained)
        })
        .map(ContentSource::as_str)
        .collect();
    let sources: Vec<ContentSource> = [
        ContentSource::Summaries,
        ContentSource::SummariesWithoutReviews,
        ContentSource::RawFeatures,
    ]
    .into_iter()
    .filter(|s| sources.contains(s.as_str()))
    .collect();
    let mut files = FileContent::load(&ds, &embeddings_dir(cfg), &sources)?;
    let mut reports = Vec::with_capacity(specs.len());
    for spec in &specs {
        let run = run_variant(spec, &ds, &mut files, &cfg.hp, &cfg.seeds, &cfg.ks)?;
        write_report(cfg, &run.report)?;
        reports.push(run.report);
    }
    let table = render_table(&reports);
    write_atomic(&cfg.paths.output_dir.join("report.txt"), table.as_bytes())?;
    Ok(reports)
}

pub fn sweep(cfg: &RunConfig) -> Result<String> {
    let ds = load_dataset(cfg)?;
    let mut files = FileContent::load(&ds, &embeddings_dir(cfg), &[ContentSource::Summaries])?;
    let rows = tesmr_core::experiments::sweep(&ds, &mut files, &cfg.hp, &cfg.grid, &cfg.seeds)?;
    let csv = sweep_csv(&rows);
    write_atomic(&cfg.paths.output_dir.join("sweep.csv"), csv.as_bytes())?;
    Ok(csv)
}

/// Reads every report under `reports/` and renders one table, variants in
/// canonical order followed by any others by name.
pub fn report(cfg: &RunConfig) -> Result<String> {
    let dir = reports_dir(cfg);
    require_exists(&dir, "reports directory")?;
    let mut found = Vec::new();
    let mut entries: Vec<PathBuf> = fs::read_dir(&dir)
        .at(&dir)?
        .filter_map(|e| e.ok().map(|e| e.path()))
        .filter(|p| p.extension().is_some_and(|x| x == "json"))
        .collect();
    entries.sort();
    for path in entries {
        found.push(read_report(&path)?);
    }
    let rank = |r: &MetricsReport| {
        VariantName::ALL
            .iter()
            .position(|v| v.as_str() == r.variant)
            .unwrap_or(usize::MAX)
    };
    found.sort_by(|a, b| rank(a).cmp(&rank(b)).then_with(|| a.variant.cmp(&b.variant)));
    let table = render_table(&found);
    write_atomic(&cfg.paths.output_dir.join("report.txt"), table.as_bytes())?;
    Ok(table)
}

pub fn read_report(path: &Path) -> Result<MetricsReport> {
    let text = fs::read_to_string(path).at(path)?;
    serde_json::from_str(&text).map_err(|e| Error::Parse {
        path: path.into(),
        line: e.line(),
        message: e.to_string(),
    })
}
