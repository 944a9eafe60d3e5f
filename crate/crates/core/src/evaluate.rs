//! Full-ranking top-k evaluation: Recall@k and binary-relevance NDCG@k,
//! averaged uniformly over users, plus multi-seed reports.

use alloc::collections::BTreeMap;
use alloc::format;
use alloc::string::String;
use alloc::vec;
use alloc::vec::Vec;
use core::cmp::Ordering;
use core::fmt::Write;

use serde::{Deserialize, Serialize};

use crate::dataset::{Dataset, SplitKind};
use crate::error::{Error, Result};
use crate::matrix::{dot, Matrix};
use crate::train::{score_all, ForwardOutputs};

/// Anything that scores every recipe for a user.
pub trait Scorer {
    fn n_recipes(&self) -> usize;
    fn score_user(&self, user: usize, out: &mut [f32]);
}

impl Scorer for ForwardOutputs<f32> {
    fn n_recipes(&self) -> usize {
        ForwardOutputs::n_recipes(self)
    }

    fn score_user(&self, user: usize, out: &mut [f32]) {
        score_all(self, user, out);
    }
}

/// Single inner product `⟨e_r, e_u⟩` between two embedding tables.
#[derive(Debug, Clone, PartialEq)]
pub struct InnerProductScorer {
    pub users: Matrix<f32>,
    pub recipes: Matrix<f32>,
}

impl Scorer for InnerProductScorer {
    fn n_recipes(&self) -> usize {
        self.recipes.rows()
    }

    fn score_user(&self, user: usize, out: &mut [f32]) {
        let eu = self.users.row(user);
        for (r, o) in out.iter_mut().enumerate() {
            *o = dot(self.recipes.row(r), eu);
        }
    }
}

/// Pseudo-random scores that depend only on `(seed, user, recipe)`.
#[derive(Debug, Clone, Copy)]
pub struct RandomScorer {
    pub n_recipes: usize,
    pub seed: u64,
}

impl Scorer for RandomScorer {
    fn n_recipes(&self) -> usize {
        self.n_recipes
    }

    fn score_user(&self, user: usize, out: &mut [f32]) {
        let base = mix64(self.seed ^ mix64(user as u64));
        for (r, o) in out.iter_mut().enumerate() {
            let h = mix64(base ^ (r as u64).wrapping_mul(0x9E37_79B9_7F4A_7C15));
            *o = (h >> 40) as f32 / (1u64 << 24) as f32;
        }
    }
}

/// SplitMix64 finalizer.
fn mix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

fn by_rank(scores: &[f32]) -> impl Fn(&u32, &u32) -> Ordering + '_ {
    move |&a, &b| {
        scores[b as usize]
            .total_cmp(&scores[a as usize])
            .then(a.cmp(&b))
    }
}

/// Top `k` unmasked recipes by descending score, ties to the lower index.
/// `mask` must be sorted. Returns fewer than `k` items when fewer remain.
pub fn rank_topk(scores: &[f32], mask: &[u32], k: usize) -> Vec<u32> {
    let mut cand: Vec<u32> = (0..scores.len() as u32)
        .filter(|r| mask.binary_search(r).is_err())
        .collect();
    let cmp = by_rank(scores);
    if k == 0 {
        return Vec::new();
    }
    if cand.len() > k {
        cand.select_nth_unstable_by(k - 1, &cmp);
        cand.truncate(k);
    }
    cand.sort_unstable_by(&cmp);
    cand
}

/// `|topk ∩ test| / |test|`; `test` must be sorted.
pub fn recall_at_k(topk: &[u32], test: &[u32]) -> f64 {
    if test.is_empty() {
        return 0.0;
    }
    let hits = topk.iter().filter(|r| test.binary_search(r).is_ok()).count();
    hits as f64 / test.len() as f64
}

#[inline]
fn discount(pos: usize) -> f64 {
    1.0 / num_traits::Float::log2((pos + 1) as f64)
}

/// Binary-relevance NDCG with `IDCG = Σ_{p ≤ min(k, |test|)} 1/log₂(p+1)`; `test` must be sorted.
pub fn ndcg_at_k(topk: &[u32], test: &[u32], k: usize) -> f64 {
    if test.is_empty() {
        return 0.0;
    }
    let dcg: f64 = topk
        .iter()
        .take(k)
        .enumerate()
        .filter(|(_, r)| test.binary_search(r).is_ok())
        .map(|(i, _)| discount(i + 1))
        .sum();
    let idcg: f64 = (1..=k.min(test.len())).map(discount).sum();
    dcg / idcg
}

/// Mean metrics over the users of one split.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SplitMetrics {
    pub ks: Vec<usize>,
    pub recall: Vec<f64>,
    pub ndcg: Vec<f64>,
    pub n_users: usize,
}

impl SplitMetrics {
    pub fn recall_at(&self, k: usize) -> Option<f64> {
        self.ks.iter().position(|&x| x == k).map(|i| self.recall[i])
    }

    pub fn ndcg_at(&self, k: usize) -> Option<f64> {
        self.ks.iter().position(|&x| x == k).map(|i| self.ndcg[i])
    }
}

fn fill_mask(mask: &mut Vec<u32>, dataset: &Dataset, user: usize, val: Option<&[Vec<u32>]>) {
    mask.clear();
    mask.extend_from_slice(dataset.graph_train.recipes_of(user));
    if let Some(val) = val {
        mask.extend_from_slice(&val[user]);
        mask.sort_unstable();
    }
}

/// Sorted recipes excluded from `user`'s ranking on `split`: train positives,
/// plus validation positives for the test split.
pub fn eval_mask(dataset: &Dataset, split: SplitKind, user: usize) -> Vec<u32> {
    let val = (split == SplitKind::Test).then(|| dataset.items_by_user(SplitKind::Val));
    let mut mask = Vec::new();
    fill_mask(&mut mask, dataset, user, val.as_deref());
    mask
}

/// Evaluates `scorer` on `split`. Masks train positives, plus validation
/// positives when evaluating the test split. Users are scored in blocks of
/// `eval_batch` and metrics are merged in user-index order.
pub fn evaluate_model<S: Scorer + ?Sized>(
    scorer: &S,
    dataset: &Dataset,
    split: SplitKind,
    ks: &[usize],
    eval_batch: usize,
) -> Result<SplitMetrics> {
    let targets = match split {
        SplitKind::Val => dataset.items_by_user(SplitKind::Val),
        SplitKind::Test => dataset.items_by_user(SplitKind::Test),
        SplitKind::Train => return Err(Error::EmptySplit("train (not an evaluation split)")),
    };
    let val = if split == SplitKind::Test {
        Some(dataset.items_by_user(SplitKind::Val))
    } else {
        None
    };
    let users: Vec<usize> = (0..dataset.n_users())
        .filter(|&u| !targets[u].is_empty())
        .collect();
    if users.is_empty() {
        return Err(Error::EmptySplit(split.as_str()));
    }
    let n_recipes = scorer.n_recipes();
    if n_recipes != dataset.n_recipes() {
        return Err(Error::Shape {
            context: "evaluate_model: scorer recipes",
            expected: format!("{}", dataset.n_recipes()),
            actual: format!("{n_recipes}"),
        });
    }
    let kmax = ks.iter().copied().max().unwrap_or(0);
    let mut recall = vec![0.0; ks.len()];
    let mut ndcg = vec![0.0; ks.len()];
    let block = eval_batch.max(1);
    let mut buf = vec![0.0f32; n_recipes * block.min(users.len())];
    let mut mask = Vec::new();
    for chunk in users.chunks(block) {
        for (slot, &u) in chunk.iter().enumerate() {
            scorer.score_user(u, &mut buf[slot * n_recipes..(slot + 1) * n_recipes]);
        }
        for (slot, &u) in chunk.iter().enumerate() {
            fill_mask(&mut mask, dataset, u, val.as_deref());
            let scores = &buf[slot * n_recipes..(slot + 1) * n_recipes];
            let top = rank_topk(scores, &mask, kmax);
            for (i, &k) in ks.iter().enumerate() {
                let topk = &top[..k.min(top.len())];
                recall[i] += recall_at_k(topk, &targets[u]);
                ndcg[i] += ndcg_at_k(topk, &targets[u], k);
            }
        }
    }
    let n = users.len() as f64;
    recall.iter_mut().for_each(|v| *v /= n);
    ndcg.iter_mut().for_each(|v| *v /= n);
    Ok(SplitMetrics {
        ks: ks.to_vec(),
        recall,
        ndcg,
        n_users: users.len(),
    })
}

/// Expected Recall@k of a uniformly random ranking: `min(k, C_u)/C_u` per
/// user, `C_u` being the number of unmasked candidates.
pub fn expected_random_recall(dataset: &Dataset, split: SplitKind, k: usize) -> f64 {
    let targets = dataset.items_by_user(split);
    let val = dataset.items_by_user(SplitKind::Val);
    let mut sum = 0.0;
    let mut n = 0usize;
    for (u, t) in targets.iter().enumerate() {
        if t.is_empty() {
            continue;
        }
        let mut masked = dataset.graph_train.recipes_of(u).len();
        if split == SplitKind::Test {
            masked += val[u].len();
        }
        let cand = dataset.n_recipes() - masked;
        sum += k.min(cand) as f64 / cand as f64;
        n += 1;
    }
    if n == 0 {
        0.0
    } else {
        sum / n as f64
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SeedMetrics {
    pub seed: u64,
    pub metrics: SplitMetrics,
}

/// Per-seed and mean metrics of one run configuration.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricsReport {
    pub variant: String,
    pub split: SplitKind,
    pub config: BTreeMap<String, String>,
    pub per_seed: Vec<SeedMetrics>,
    pub mean: SplitMetrics,
}

impl MetricsReport {
    pub fn new(
        variant: impl Into<String>,
        split: SplitKind,
        config: BTreeMap<String, String>,
        per_seed: Vec<SeedMetrics>,
    ) -> Self {
        let mean = mean_metrics(&per_seed);
        Self {
            variant: variant.into(),
            split,
            config,
            per_seed,
            mean,
        }
    }
}

fn mean_metrics(per_seed: &[SeedMetrics]) -> SplitMetrics {
    let Some(first) = per_seed.first() else {
        return SplitMetrics {
            ks: Vec::new(),
            recall: Vec::new(),
            ndcg: Vec::new(),
            n_users: 0,
        };
    };
    let n = per_seed.len() as f64;
    let avg = |f: fn(&SplitMetrics) -> &Vec<f64>| -> Vec<f64> {
        (0..first.metrics.ks.len())
            .map(|i| per_seed.iter().map(|s| f(&s.metrics)[i]).sum::<f64>() / n)
            .collect()
    };
    SplitMetrics {
        ks: first.metrics.ks.clone(),
        recall: avg(|m| &m.recall),
        ndcg: avg(|m| &m.ndcg),
        n_users: first.metrics.n_users,
    }
}

/// Aligned text table of mean metrics, one row per report: `R@k N@k` per cutoff.
pub fn render_table(reports: &[MetricsReport]) -> String {
    let ks: Vec<usize> = reports.first().map(|r| r.mean.ks.clone()).unwrap_or_default();
    let name_w = reports
        .iter()
        .map(|r| r.variant.len())
        .chain([6])
        .max()
        .unwrap_or(6);
    let mut out = String::new();
    let _ = write!(out, "{:<name_w$}", "Method");
    for k in &ks {
        let _ = write!(out, " | {:>7} {:>7}", format!("R@{k}"), format!("N@{k}"));
    }
    out.push('\n');
    let width = out.len() - 1;
    out.push_str(&"-".repeat(width));
    out.push('\n');
    for r in reports {
        let _ = write!(out, "{:<name_w$}", r.variant);
        for &k in &ks {
            let rec = r.mean.recall_at(k).unwrap_or(f64::NAN);
            let nd = r.mean.ndcg_at(k).unwrap_or(f64::NAN);
            let _ = write!(out, " | {rec:>7.4} {nd:>7.4}");
        }
        out.push('\n');
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn topk_orders_and_masks() {
        assert_eq!(rank_topk(&[0.1, 0.9, 0.5], &[], 2), vec![1, 2]);
        assert_eq!(rank_topk(&[0.0, 0.0, 0.3, 0.0, 0.3], &[], 3), vec![2, 4, 0]);
        assert_eq!(rank_topk(&[0.1, 0.9, 0.5], &[1], 1), vec![2]);
        assert_eq!(rank_topk(&[0.1, 0.9, 0.5], &[0, 1], 5), vec![2]);
        assert!(rank_topk(&[0.1], &[], 0).is_empty());
    }

    #[test]
    fn tie_prefers_lower_index() {
        let mut s = vec![0.0f32; 6];
        s[4] = 1.0;
        s[2] = 1.0;
        assert_eq!(rank_topk(&s, &[], 2), vec![2, 4]);
    }

    #[test]
    fn recall_cases() {
        let top: Vec<u32> = (0..10).collect();
        assert_eq!(recall_at_k(&top, &[3, 42]), 0.5);
        assert_eq!(recall_at_k(&top, &[0, 9]), 1.0);
    }

    #[test]
    fn ndcg_cases() {
        assert_eq!(ndcg_at_k(&[7, 1, 2], &[7], 3), 1.0);
        let want = 1.0 / 3f64.log2();
        assert!((ndcg_at_k(&[1, 7, 2], &[7], 3) - want).abs() < 1e-12);
        assert!((ndcg_at_k(&[1, 2, 3], &[1, 2, 3], 3) - 1.0).abs() < 1e-12);
        assert_eq!(ndcg_at_k(&[4, 5], &[1], 2), 0.0);
    }

    #[test]
    fn random_scorer_is_deterministic() {
        let s = RandomScorer {
            n_recipes: 20,
            seed: 3,
        };
        let mut a = vec![0.0; 20];
        let mut b = vec![0.0; 20];
        s.score_user(5, &mut a);
        s.score_user(5, &mut b);
        assert_eq!(a, b);
        s.score_user(6, &mut b);
        assert_ne!(a, b);
    }

    #[test]
    fn table_has_one_row_per_report() {
        let m = SplitMetrics {
            ks: vec![10, 20],
            recall: vec![0.1, 0.2],
            ndcg: vec![0.05, 0.07],
            n_users: 3,
        };
        let r = MetricsReport::new(
            "full",
            SplitKind::Test,
            BTreeMap::new(),
            vec![SeedMetrics { seed: 1, metrics: m }],
        );
        let t = render_table(&[r.clone(), r]);
        assert_eq!(t.lines().count(), 4);
        assert!(t.lines().next().unwrap().contains("R@10"));
        assert!(t.contains("0.1000  0.0500"));
    }
}
