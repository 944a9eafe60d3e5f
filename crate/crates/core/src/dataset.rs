//! In-memory dataset construction: iterative filtering, dense re-indexing and
//! the seeded per-user split.

use alloc::collections::{BTreeMap, BTreeSet};
use alloc::format;
use alloc::string::String;
use alloc::vec::Vec;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::graph::InteractionGraph;

/// Raw recipe record as it appears in the recipe file.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct RecipeDoc {
    pub id: String,
    pub title: String,
    #[serde(default)]
    pub ingredients: Vec<String>,
    #[serde(default)]
    pub directions: Vec<String>,
    #[serde(default)]
    pub nutrition: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub image_path: Option<String>,
}

/// One interaction row; any review is a positive interaction regardless of rating.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RawInteraction {
    pub user_id: String,
    pub recipe_id: String,
    pub review: String,
    pub rating: Option<f32>,
    pub date: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SplitConfig {
    /// (train, val, test) fractions.
    pub ratios: [f64; 3],
    /// Minimum interactions per retained user.
    pub min_interactions: usize,
    /// Minimum interactions per retained recipe.
    pub min_recipe_interactions: usize,
    pub seed: u64,
}

impl Default for SplitConfig {
    fn default() -> Self {
        Self {
            ratios: [0.8, 0.1, 0.1],
            min_interactions: 5,
            min_recipe_interactions: 1,
            seed: 2024,
        }
    }
}

impl SplitConfig {
    pub fn validate(&self) -> Result<()> {
        let sum: f64 = self.ratios.iter().sum();
        if (sum - 1.0).abs() > 1e-9 {
            return Err(Error::InvalidSplit(format!("ratios sum to {sum}, expected 1.0")));
        }
        if self.ratios.iter().any(|r| !(0.0..=1.0).contains(r)) {
            return Err(Error::InvalidSplit("ratios must lie in [0, 1]".into()));
        }
        if self.min_interactions < 3 {
            return Err(Error::InvalidSplit(format!(
                "min_interactions must be at least 3, got {}",
                self.min_interactions
            )));
        }
        Ok(())
    }

    /// Split sizes for a user with `n` interactions: floor for val and test,
    /// the remainder (never less than one) for train.
    pub fn split_sizes(&self, n: usize) -> (usize, usize, usize) {
        let floor = |r: f64| libm_floor(r * n as f64 + 1e-9) as usize;
        let mut val = floor(self.ratios[1]);
        let mut test = floor(self.ratios[2]);
        while val + test >= n && n > 0 {
            if test >= val && test > 0 {
                test -= 1;
            } else if val > 0 {
                val -= 1;
            } else {
                break;
            }
        }
        (n - val - test, val, test)
    }
}

fn libm_floor(x: f64) -> f64 {
    num_traits::Float::floor(x)
}

/// A review attached to one user's interaction.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Review {
    pub recipe: u32,
    pub text: String,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SplitKind {
    Train,
    Val,
    Test,
}

impl SplitKind {
    pub fn as_str(self) -> &'static str {
        match self {
            SplitKind::Train => "train",
            SplitKind::Val => "val",
            SplitKind::Test => "test",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DatasetStats {
    pub n_users: usize,
    pub n_recipes: usize,
    pub n_interactions: usize,
    pub n_ingredients: usize,
    /// Percentage of empty cells in the user × recipe matrix.
    pub sparsity: f64,
}

/// The dense, split dataset consumed by every downstream stage.
#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    pub graph_train: InteractionGraph,
    pub val_pairs: Vec<(u32, u32)>,
    pub test_pairs: Vec<(u32, u32)>,
    /// Indexed by dense recipe index.
    pub recipe_docs: Vec<RecipeDoc>,
    /// Original user identifiers, indexed by dense user index.
    pub user_ids: Vec<String>,
    /// Per user, every review (all splits) in chronological order.
    pub user_reviews: Vec<Vec<Review>>,
}

impl Dataset {
    pub fn n_users(&self) -> usize {
        self.graph_train.n_users()
    }

    pub fn n_recipes(&self) -> usize {
        self.graph_train.n_recipes()
    }

    pub fn pairs(&self, split: SplitKind) -> Vec<(u32, u32)> {
        match split {
            SplitKind::Train => self.graph_train.edges().collect(),
            SplitKind::Val => self.val_pairs.clone(),
            SplitKind::Test => self.test_pairs.clone(),
        }
    }

    /// Per-user sorted item lists for a split.
    pub fn items_by_user(&self, split: SplitKind) -> Vec<Vec<u32>> {
        let mut out = alloc::vec![Vec::new(); self.n_users()];
        for (u, r) in self.pairs(split) {
            out[u as usize].push(r);
        }
        for items in &mut out {
            items.sort_unstable();
        }
        out
    }

    /// Train-split reviews of `user`, oldest first.
    pub fn train_reviews(&self, user: usize) -> impl Iterator<Item = &Review> {
        let graph = &self.graph_train;
        self.user_reviews[user]
            .iter()
            .filter(move |rv| graph.contains(user as u32, rv.recipe))
    }
}

/// Filters, re-indexes and splits the raw tables into a [`Dataset`].
///
/// Users below `min_interactions` and recipes below `min_recipe_interactions`
/// are removed repeatedly until neither rule removes anything. Each user's
/// interactions are shuffled with a single seeded stream (users visited in
/// dense index order) and cut by [`SplitConfig::split_sizes`]. Recipes left
/// without any train edge are then dropped together with their val/test
/// pairs so that every node of the train graph has degree at least one.
pub fn build_dataset(
    recipes: &[RecipeDoc],
    interactions: &[RawInteraction],
    cfg: &SplitConfig,
) -> Result<Dataset> {
    cfg.validate()?;

    let mut recipe_pos: BTreeMap<&str, usize> = BTreeMap::new();
    for (i, doc) in recipes.iter().enumerate() {
        recipe_pos.entry(doc.id.as_str()).or_insert(i);
    }

    // Collapse duplicate (user, recipe) pairs, keeping first-seen order.
    let mut pair_pos: BTreeMap<(&str, &str), usize> = BTreeMap::new();
    let mut merged: Vec<(usize, &RawInteraction, String)> = Vec::new();
    for (order, it) in interactions.iter().enumerate() {
        if !recipe_pos.contains_key(it.recipe_id.as_str()) {
            continue;
        }
        let key = (it.user_id.as_str(), it.recipe_id.as_str());
        match pair_pos.get(&key) {
            Some(&i) => {
                let text = &mut merged[i].2;
                if !it.review.is_empty() {
                    if !text.is_empty() {
                        text.push_str(REVIEW_SEPARATOR);
                    }
                    text.push_str(&it.review);
                }
            }
            None => {
                pair_pos.insert(key, merged.len());
                merged.push((order, it, it.review.clone()));
            }
        }
    }

    // Iterative k-core style filtering.
    let mut alive: Vec<bool> = alloc::vec![true; merged.len()];
    loop {
        let mut user_count: BTreeMap<&str, usize> = BTreeMap::new();
        let mut recipe_count: BTreeMap<&str, usize> = BTreeMap::new();
        for (i, (_, it, _)) in merged.iter().enumerate() {
            if alive[i] {
                *user_count.entry(it.user_id.as_str()).or_default() += 1;
                *recipe_count.entry(it.recipe_id.as_str()).or_default() += 1;
            }
        }
        let mut changed = false;
        for (i, (_, it, _)) in merged.iter().enumerate() {
            if alive[i]
                && (user_count[it.user_id.as_str()] < cfg.min_interactions
                    || recipe_count[it.recipe_id.as_str()] < cfg.min_recipe_interactions)
            {
                alive[i] = false;
                changed = true;
            }
        }
        if !changed {
            break;
        }
    }
    let kept: Vec<&(usize, &RawInteraction, String)> = merged
        .iter()
        .zip(&alive)
        .filter_map(|(m, &a)| a.then_some(m))
        .collect();
    if kept.is_empty() {
        return Err(Error::EmptyDataset(format!(
            "{} interactions over {} recipes, none survive min_interactions={} / min_recipe_interactions={}",
            interactions.len(),
            recipes.len(),
            cfg.min_interactions,
            cfg.min_recipe_interactions
        )));
    }

    // Dense user indices in order of first appearance.
    let mut user_index: BTreeMap<&str, u32> = BTreeMap::new();
    let mut user_ids: Vec<String> = Vec::new();
    for (_, it, _) in &kept {
        user_index.entry(it.user_id.as_str()).or_insert_with(|| {
            user_ids.push(it.user_id.clone());
            (user_ids.len() - 1) as u32
        });
    }

    // Per-user chronological interaction lists (date, then input order).
    let mut per_user: Vec<Vec<(Option<&str>, usize, usize, &str)>> =
        alloc::vec![Vec::new(); user_ids.len()];
    for (order, it, text) in &kept {
        let u = user_index[it.user_id.as_str()] as usize;
        per_user[u].push((
            it.date.as_deref(),
            *order,
            recipe_pos[it.recipe_id.as_str()],
            text.as_str(),
        ));
    }
    for list in &mut per_user {
        list.sort_by(|a, b| (a.0, a.1).cmp(&(b.0, b.1)));
    }

    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let mut assigned: Vec<(u32, usize, SplitKind)> = Vec::new();
    for (u, list) in per_user.iter().enumerate() {
        let mut order: Vec<usize> = (0..list.len()).collect();
        order.shuffle(&mut rng);
        let (n_train, n_val, _) = cfg.split_sizes(list.len());
        for (rank, &i) in order.iter().enumerate() {
            let kind = if rank < n_train {
                SplitKind::Train
            } else if rank < n_train + n_val {
                SplitKind::Val
            } else {
                SplitKind::Test
            };
            assigned.push((u as u32, list[i].2, kind));
        }
    }

    // Recipes need a train edge to take part in propagation.
    let train_recipes: BTreeSet<usize> = assigned
        .iter()
        .filter(|a| a.2 == SplitKind::Train)
        .map(|a| a.1)
        .collect();
    let recipe_index: BTreeMap<usize, u32> = train_recipes
        .iter()
        .enumerate()
        .map(|(dense, &orig)| (orig, dense as u32))
        .collect();
    let recipe_docs: Vec<RecipeDoc> = train_recipes.iter().map(|&i| recipes[i].clone()).collect();

    let mut train_edges = Vec::new();
    let mut val_pairs = Vec::new();
    let mut test_pairs = Vec::new();
    for &(u, orig, kind) in &assigned {
        let Some(&r) = recipe_index.get(&orig) else {
            continue;
        };
        match kind {
            SplitKind::Train => train_edges.push((u, r)),
            SplitKind::Val => val_pairs.push((u, r)),
            SplitKind::Test => test_pairs.push((u, r)),
        }
    }
    val_pairs.sort_unstable();
    test_pairs.sort_unstable();

    let user_reviews = per_user
        .iter()
        .map(|list| {
            list.iter()
                .filter_map(|&(_, _, orig, text)| {
                    recipe_index.get(&orig).map(|&r| Review {
                        recipe: r,
                        text: text.into(),
                    })
                })
                .collect()
        })
        .collect();

    let graph_train = InteractionGraph::from_edges(user_ids.len(), recipe_docs.len(), &train_edges)?;
    Ok(Dataset {
        graph_train,
        val_pairs,
        test_pairs,
        recipe_docs,
        user_ids,
        user_reviews,
    })
}

/// Separator placed between reviews of a collapsed duplicate interaction.
pub const REVIEW_SEPARATOR: &str = "\n";

/// Counts over the full (train ∪ val ∪ test) interaction set.
pub fn stats(dataset: &Dataset) -> DatasetStats {
    let n_users = dataset.n_users();
    let n_recipes = dataset.n_recipes();
    let n_interactions =
        dataset.graph_train.n_edges() + dataset.val_pairs.len() + dataset.test_pairs.len();
    let ingredients: BTreeSet<String> = dataset
        .recipe_docs
        .iter()
        .flat_map(|d| d.ingredients.iter())
        .map(|i| i.trim().to_lowercase())
        .filter(|i| !i.is_empty())
        .collect();
    DatasetStats {
        n_users,
        n_recipes,
        n_interactions,
        n_ingredients: ingredients.len(),
        sparsity: sparsity(n_users, n_recipes, n_interactions),
    }
}

pub fn sparsity(n_users: usize, n_recipes: usize, n_interactions: usize) -> f64 {
    let cells = n_users as f64 * n_recipes as f64;
    if cells == 0.0 {
        return 0.0;
    }
    100.0 * (1.0 - n_interactions as f64 / cells)
}
