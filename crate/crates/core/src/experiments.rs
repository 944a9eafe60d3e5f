//! Named run configurations (full model, ablations, degenerate baselines),
//! the training-free MP baseline and hyperparameter sweeps.

use alloc::collections::BTreeMap;
use alloc::format;
use alloc::string::{String, ToString};
use alloc::vec::Vec;
use core::fmt::{self, Write};
use core::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::dataset::{Dataset, SplitKind};
use crate::encode::fallback_encode_all;
use crate::error::{Error, Result};
use crate::evaluate::{evaluate_model, InnerProductScorer, MetricsReport, SeedMetrics};
use crate::hyper::Hyperparams;
use crate::matrix::EmbeddingMatrix;
use crate::propagate::{mean_operator_apply_joint, normalize, NormalizedAdjacency};
use crate::summarize::{
    fallback_recipe_summary, fallback_user_summary, raw_recipe_text, raw_user_text, user_history,
    DEFAULT_REVIEW_CAP,
};
use crate::train::{fit, ContentFeatures, FitOutcome, ModelConfig, TrainedModel};

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum VariantName {
    #[serde(rename = "full")]
    Full,
    #[serde(rename = "minus_T1")]
    MinusT1,
    #[serde(rename = "minus_T2")]
    MinusT2,
    #[serde(rename = "minus_T3")]
    MinusT3,
    #[serde(rename = "minus_R")]
    MinusR,
    #[serde(rename = "mp_baseline")]
    MpBaseline,
    #[serde(rename = "bprmf")]
    Bprmf,
    #[serde(rename = "lightgcn")]
    Lightgcn,
}

impl VariantName {
    pub const ALL: [VariantName; 8] = [
        VariantName::Full,
        VariantName::MinusT1,
        VariantName::MinusT2,
        VariantName::MinusT3,
        VariantName::MinusR,
        VariantName::MpBaseline,
        VariantName::Bprmf,
        VariantName::Lightgcn,
    ];

    /// The ablation rows, in table order.
    pub const ABLATIONS: [VariantName; 5] = [
        VariantName::Full,
        VariantName::MinusT1,
        VariantName::MinusT2,
        VariantName::MinusT3,
        VariantName::MinusR,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            VariantName::Full => "full",
            VariantName::MinusT1 => "minus_T1",
            VariantName::MinusT2 => "minus_T2",
            VariantName::MinusT3 => "minus_T3",
            VariantName::MinusR => "minus_R",
            VariantName::MpBaseline => "mp_baseline",
            VariantName::Bprmf => "bprmf",
            VariantName::Lightgcn => "lightgcn",
        }
    }

    pub fn parse(s: &str) -> Result<Self> {
        Self::ALL
            .into_iter()
            .find(|v| v.as_str() == s)
            .ok_or_else(|| Error::UnknownVariant(s.to_string()))
    }
}

impl fmt::Display for VariantName {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for VariantName {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Self::parse(s)
    }
}

/// Which texts feed the encoder.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ContentSource {
    /// Detailed recipe summaries and review-based user summaries.
    Summaries,
    /// Unsummarized recipe fields and raw reviews.
    RawFeatures,
    /// Like `Summaries`, but user summaries see only recipe summaries.
    SummariesWithoutReviews,
}

impl ContentSource {
    pub fn as_str(self) -> &'static str {
        match self {
            ContentSource::Summaries => "summaries",
            ContentSource::RawFeatures => "raw_features",
            ContentSource::SummariesWithoutReviews => "summaries_without_reviews",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct VariantOverrides {
    /// `minus_T2` also removes propagation from the learnable branch.
    pub t2_both_branches: bool,
    /// Restrict InfoNCE to the entities of each batch.
    pub cl_in_batch: bool,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct VariantSpec {
    pub name: VariantName,
    pub overrides: VariantOverrides,
}

/// Resolved configuration of one variant.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct VariantPlan {
    /// `None` when the variant uses no encoder input.
    pub content: Option<ContentSource>,
    /// Propagation layers applied to the encoder embeddings.
    pub content_layers: usize,
    pub model: ModelConfig,
    /// `false` for the training-free MP baseline.
    pub trained: bool,
}

impl VariantSpec {
    pub fn new(name: VariantName) -> Self {
        Self {
            name,
            overrides: VariantOverrides::default(),
        }
    }

    /// Configuration for a run with `layers` propagation layers.
    pub fn plan(&self, layers: usize) -> VariantPlan {
        let mut model = ModelConfig::full(layers);
        model.cl_in_batch = self.overrides.cl_in_batch;
        let mut plan = VariantPlan {
            content: Some(ContentSource::Summaries),
            content_layers: layers,
            model,
            trained: true,
        };
        match self.name {
            VariantName::Full => {}
            VariantName::MinusT1 => plan.content = Some(ContentSource::RawFeatures),
            VariantName::MinusT2 => {
                plan.content_layers = 0;
                if self.overrides.t2_both_branches {
                    plan.model.learnable_layers = 0;
                }
            }
            VariantName::MinusT3 => {
                plan.model.learnable_branch = false;
                plan.model.contrastive = false;
            }
            VariantName::MinusR => plan.content = Some(ContentSource::SummariesWithoutReviews),
            VariantName::MpBaseline => {
                plan.content = Some(ContentSource::RawFeatures);
                plan.model.learnable_branch = false;
                plan.model.contrastive = false;
                plan.trained = false;
            }
            VariantName::Bprmf | VariantName::Lightgcn => {
                plan.content = None;
                plan.model.content_branch = false;
                plan.model.contrastive = false;
                if self.name == VariantName::Bprmf {
                    plan.model.learnable_layers = 0;
                }
            }
        }
        plan
    }
}

/// Encoder input texts, in dense index order.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ContentTexts {
    pub users: Vec<String>,
    pub recipes: Vec<String>,
}

/// Raw (unpropagated) encoder embeddings, one row per entity.
#[derive(Debug, Clone, PartialEq)]
pub struct RawContent {
    pub users: EmbeddingMatrix,
    pub recipes: EmbeddingMatrix,
}

/// Supplies encoder embeddings for a content source.
pub trait ContentProvider {
    fn content(&mut self, dataset: &Dataset, source: ContentSource) -> Result<RawContent>;
}

/// Texts for `source` built with the offline summarizer.
pub fn fallback_texts(dataset: &Dataset, source: ContentSource, review_cap: usize) -> ContentTexts {
    match source {
        ContentSource::RawFeatures => ContentTexts {
            users: (0..dataset.n_users())
                .map(|u| raw_user_text(dataset, u))
                .collect(),
            recipes: dataset.recipe_docs.iter().map(raw_recipe_text).collect(),
        },
        ContentSource::Summaries | ContentSource::SummariesWithoutReviews => {
            let (simple, detailed): (Vec<String>, Vec<String>) =
                dataset.recipe_docs.iter().map(fallback_recipe_summary).unzip();
            summary_texts(
                dataset,
                &simple,
                detailed,
                source == ContentSource::Summaries,
                review_cap,
            )
        }
    }
}

/// Texts from given recipe summaries, with offline user summaries.
pub fn summary_texts(
    dataset: &Dataset,
    simple: &[String],
    detailed: Vec<String>,
    include_reviews: bool,
    review_cap: usize,
) -> ContentTexts {
    let users = (0..dataset.n_users())
        .map(|u| {
            let history = user_history(dataset, u, simple, include_reviews);
            fallback_user_summary(&history, review_cap).0
        })
        .collect();
    ContentTexts {
        users,
        recipes: detailed,
    }
}

/// Offline summarizer plus hashing encoder.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct FallbackContent {
    pub source_dim: usize,
    pub review_cap: usize,
}

impl FallbackContent {
    pub fn new(source_dim: usize) -> Self {
        Self {
            source_dim,
            review_cap: DEFAULT_REVIEW_CAP,
        }
    }
}

impl ContentProvider for FallbackContent {
    fn content(&mut self, dataset: &Dataset, source: ContentSource) -> Result<RawContent> {
        let texts = fallback_texts(dataset, source, self.review_cap);
        Ok(RawContent {
            users: fallback_encode_all(&texts.users, self.source_dim),
            recipes: fallback_encode_all(&texts.recipes, self.source_dim),
        })
    }
}

/// `P̄X` for both sides, the content branch input.
pub fn propagate_content(
    adj: &NormalizedAdjacency,
    raw: &RawContent,
    layers: usize,
) -> Result<ContentFeatures<f32>> {
    let (users, recipes) = mean_operator_apply_joint(adj, layers, &raw.users, &raw.recipes)?;
    Ok(ContentFeatures { users, recipes })
}

/// Evaluation cutoffs used by every report.
pub const DEFAULT_KS: [usize; 2] = [10, 20];

/// Flat snapshot of everything that determines a run.
pub fn config_snapshot(
    spec: &VariantSpec,
    plan: &VariantPlan,
    hp: &Hyperparams,
    ks: &[usize],
) -> BTreeMap<String, String> {
    let mut c = BTreeMap::new();
    let mut put = |k: &str, v: String| {
        c.insert(k.to_string(), v);
    };
    put("variant", spec.name.as_str().into());
    put("override.t2_both_branches", spec.overrides.t2_both_branches.to_string());
    put("override.cl_in_batch", spec.overrides.cl_in_batch.to_string());
    put(
        "content_source",
        plan.content.map_or("none", ContentSource::as_str).into(),
    );
    put("content_layers", plan.content_layers.to_string());
    put("model.content_branch", plan.model.content_branch.to_string());
    put("model.learnable_branch", plan.model.learnable_branch.to_string());
    put("model.contrastive", plan.model.uses_contrastive().to_string());
    put("model.learnable_layers", plan.model.learnable_layers.to_string());
    put("trained", plan.trained.to_string());
    put("hp.layers", hp.layers.to_string());
    put("hp.tau", format!("{:?}", hp.tau));
    put("hp.lambda_cl", format!("{:?}", hp.lambda_cl));
    put("hp.lambda_reg", format!("{:?}", hp.lambda_reg));
    put("hp.dim", hp.dim.to_string());
    put("hp.lr", format!("{:?}", hp.lr));
    put("hp.train_batch", hp.train_batch.to_string());
    put("hp.eval_batch", hp.eval_batch.to_string());
    put("hp.epochs", hp.epochs.to_string());
    put("hp.patience", hp.patience.to_string());
    put("eval.k", join_ks(ks));
    c
}

fn join_ks(ks: &[usize]) -> String {
    let ks: Vec<String> = ks.iter().map(usize::to_string).collect();
    ks.join(",")
}

/// Training-free baseline: raw texts encoded, propagated `layers` times and
/// scored by a single inner product. Reported under seed 0.
pub fn run_mp_baseline(
    dataset: &Dataset,
    provider: &mut dyn ContentProvider,
    layers: usize,
    ks: &[usize],
    eval_batch: usize,
) -> Result<MetricsReport> {
    let adj = normalize(&dataset.graph_train)?;
    let raw = provider.content(dataset, ContentSource::RawFeatures)?;
    let features = propagate_content(&adj, &raw, layers)?;
    let scorer = InnerProductScorer {
        users: features.users,
        recipes: features.recipes,
    };
    let metrics = evaluate_model(&scorer, dataset, SplitKind::Test, ks, eval_batch)?;
    let spec = VariantSpec::new(VariantName::MpBaseline);
    let plan = spec.plan(layers);
    let mut config = BTreeMap::new();
    config.insert("variant".into(), spec.name.as_str().into());
    config.insert("content_source".into(), ContentSource::RawFeatures.as_str().into());
    config.insert("content_layers".into(), plan.content_layers.to_string());
    config.insert("trained".into(), "false".into());
    config.insert("eval.k".into(), join_ks(ks));
    Ok(MetricsReport::new(
        spec.name.as_str(),
        SplitKind::Test,
        config,
        alloc::vec![SeedMetrics { seed: 0, metrics }],
    ))
}

/// Report plus the per-seed training outcomes (seed order).
#[derive(Debug, Clone, PartialEq)]
pub struct VariantRun {
    pub report: MetricsReport,
    pub outcomes: Vec<FitOutcome>,
}

/// Trains `spec` once per seed and evaluates the best-validation state on the test split.
pub fn run_variant(
    spec: &VariantSpec,
    dataset: &Dataset,
    provider: &mut dyn ContentProvider,
    hp: &Hyperparams,
    seeds: &[u64],
    ks: &[usize],
) -> Result<VariantRun> {
    hp.validate()?;
    let plan = spec.plan(hp.layers);
    if !plan.trained {
        let report = run_mp_baseline(dataset, provider, hp.layers, ks, hp.eval_batch)?;
        return Ok(VariantRun {
            report,
            outcomes: Vec::new(),
        });
    }
    let adj = normalize(&dataset.graph_train)?;
    let content = match plan.content {
        Some(source) if plan.model.content_branch => {
            let raw = provider.content(dataset, source)?;
            Some(propagate_content(&adj, &raw, plan.content_layers)?)
        }
        _ => None,
    };
    let mut per_seed = Vec::with_capacity(seeds.len());
    let mut outcomes = Vec::with_capacity(seeds.len());
    for &seed in seeds {
        let hp_seed = Hyperparams { seed, ..*hp };
        let outcome = fit(dataset, &adj, content.as_ref(), &hp_seed, &plan.model)?;
        let model = TrainedModel::new(&outcome.state, content.as_ref(), &adj)?;
        let metrics = evaluate_model(&model, dataset, SplitKind::Test, ks, hp.eval_batch)?;
        per_seed.push(SeedMetrics { seed, metrics });
        outcomes.push(outcome);
    }
    let config = config_snapshot(spec, &plan, hp, ks);
    Ok(VariantRun {
        report: MetricsReport::new(spec.name.as_str(), SplitKind::Test, config, per_seed),
        outcomes,
    })
}

/// Axes of a hyperparameter sweep.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepGrid {
    pub taus: Vec<f64>,
    pub lambda_cls: Vec<f64>,
    pub layers: Vec<usize>,
}

impl Default for SweepGrid {
    fn default() -> Self {
        Self {
            taus: crate::hyper::TAU_GRID.to_vec(),
            lambda_cls: crate::hyper::LAMBDA_CL_GRID.to_vec(),
            layers: crate::hyper::LAYER_GRID.to_vec(),
        }
    }
}

impl SweepGrid {
    pub fn n_cells(&self) -> usize {
        self.taus.len() * self.lambda_cls.len() * self.layers.len()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SweepRow {
    pub tau: f64,
    pub lambda_cl: f64,
    pub layers: usize,
    pub seed: u64,
    pub ndcg20: f64,
    pub recall10: f64,
}

/// Full-model runs over the cartesian product `layers × τ × λ_CL × seeds`.
pub fn sweep(
    dataset: &Dataset,
    provider: &mut dyn ContentProvider,
    base: &Hyperparams,
    grid: &SweepGrid,
    seeds: &[u64],
) -> Result<Vec<SweepRow>> {
    if grid.n_cells() == 0 || seeds.is_empty() {
        return Err(Error::InvalidHyperparam {
            name: "sweep",
            reason: "grid and seed list must be non-empty".into(),
        });
    }
    let adj = normalize(&dataset.graph_train)?;
    let raw = provider.content(dataset, ContentSource::Summaries)?;
    let mut rows = Vec::with_capacity(grid.n_cells() * seeds.len());
    for &layers in &grid.layers {
        let content = propagate_content(&adj, &raw, layers)?;
        let model = ModelConfig::full(layers);
        for &tau in &grid.taus {
            for &lambda_cl in &grid.lambda_cls {
                for &seed in seeds {
                    let hp = Hyperparams {
                        tau,
                        lambda_cl,
                        layers,
                        seed,
                        ..*base
                    };
                    let outcome = fit(dataset, &adj, Some(&content), &hp, &model)?;
                    let trained = TrainedModel::new(&outcome.state, Some(&content), &adj)?;
                    let m = evaluate_model(
                        &trained,
                        dataset,
                        SplitKind::Test,
                        &DEFAULT_KS,
                        hp.eval_batch,
                    )?;
                    rows.push(SweepRow {
                        tau,
                        lambda_cl,
                        layers,
                        seed,
                        ndcg20: m.ndcg_at(20).unwrap_or(0.0),
                        recall10: m.recall_at(10).unwrap_or(0.0),
                    });
                }
            }
        }
    }
    Ok(rows)
}

pub const SWEEP_CSV_HEADER: &str = "tau,lambda_cl,K,seed,ndcg20,recall10";

pub fn sweep_csv(rows: &[SweepRow]) -> String {
    let mut out = String::from(SWEEP_CSV_HEADER);
    out.push('\n');
    for r in rows {
        let _ = writeln!(
            out,
            "{:?},{:?},{},{},{:?},{:?}",
            r.tau, r.lambda_cl, r.layers, r.seed, r.ndcg20, r.recall10
        );
    }
    out
}

/// Relative gap `(max − min)/max` of seed-averaged NDCG@20 over the
/// `(τ, λ_CL)` cells at a fixed `layers`. `None` when no cell matches.
pub fn sweep_gap(rows: &[SweepRow], layers: usize) -> Option<f64> {
    let mut cells: BTreeMap<(u64, u64), (f64, usize)> = BTreeMap::new();
    for r in rows.iter().filter(|r| r.layers == layers) {
        let e = cells
            .entry((r.tau.to_bits(), r.lambda_cl.to_bits()))
            .or_insert((0.0, 0));
        e.0 += r.ndcg20;
        e.1 += 1;
    }
    let means = cells.values().map(|&(s, n)| s / n as f64);
    let (lo, hi) = means.fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), v| {
        (lo.min(v), hi.max(v))
    });
    if cells.is_empty() || hi <= 0.0 {
        return None;
    }
    Some((hi - lo) / hi)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn names_round_trip() {
        for v in VariantName::ALL {
            assert_eq!(VariantName::parse(v.as_str()).unwrap(), v);
        }
        assert_eq!(
            VariantName::parse("minus_T4"),
            Err(Error::UnknownVariant("minus_T4".into()))
        );
    }

    #[test]
    fn minus_t3_has_one_score_term_and_no_learnable_tables() {
        let plan = VariantSpec::new(VariantName::MinusT3).plan(2);
        assert_eq!(plan.model.n_score_terms(), 1);
        assert!(!plan.model.uses_contrastive());
        let state = crate::train::ModelState::<f32>::init(plan.model, 7, 9, 16, 4, 0);
        assert_eq!(state.params.n_learnable_embeddings(), 0);
    }

    #[test]
    fn minus_t2_keeps_learnable_propagation_unless_overridden() {
        let plan = VariantSpec::new(VariantName::MinusT2).plan(3);
        assert_eq!((plan.content_layers, plan.model.learnable_layers), (0, 3));
        let both = VariantSpec {
            name: VariantName::MinusT2,
            overrides: VariantOverrides {
                t2_both_branches: true,
                cl_in_batch: false,
            },
        };
        assert_eq!(both.plan(3).model.learnable_layers, 0);
    }

    #[test]
    fn bprmf_is_lightgcn_at_zero_layers() {
        let b = VariantSpec::new(VariantName::Bprmf).plan(2);
        let l = VariantSpec::new(VariantName::Lightgcn).plan(0);
        assert_eq!(b.model, l.model);
        assert_eq!(b.content, None);
    }

    #[test]
    fn sweep_csv_layout() {
        let rows = [SweepRow {
            tau: 0.5,
            lambda_cl: 0.2,
            layers: 2,
            seed: 1,
            ndcg20: 0.25,
            recall10: 0.125,
        }];
        assert_eq!(
            sweep_csv(&rows),
            "tau,lambda_cl,K,seed,ndcg20,recall10\n0.5,0.2,2,1,0.25,0.125\n"
        );
        assert_eq!(sweep_gap(&rows, 2), Some(0.0));
        assert_eq!(sweep_gap(&rows, 1), None);
        assert_eq!(SweepGrid::default().n_cells(), 36);
    }
}
