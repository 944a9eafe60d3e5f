//! Planted-preference data: users and recipes fall into blocks, users mostly
//! interact within their own block, and texts carry block-specific words.

use alloc::collections::BTreeSet;
use alloc::format;
use alloc::string::String;
use alloc::vec::Vec;

use rand::distributions::{Distribution, WeightedIndex};
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::dataset::{build_dataset, Dataset, RawInteraction, RecipeDoc, SplitConfig};
use crate::error::{Error, Result};

/// Per block: five topics of four words each.
const TOPIC_WORDS: [[[&str; 4]; 5]; 2] = [
    [
        ["chocolate", "cocoa", "fudge", "brownie"],
        ["berry", "strawberry", "raspberry", "jam"],
        ["cinnamon", "nutmeg", "apple", "pecan"],
        ["lemon", "lime", "zest", "meringue"],
        ["coconut", "mango", "pineapple", "banana"],
    ],
    [
        ["beef", "brisket", "gravy", "horseradish"],
        ["chili", "cumin", "jalapeno", "salsa"],
        ["soy", "ginger", "sesame", "scallion"],
        ["basil", "oregano", "parmesan", "marinara"],
        ["lamb", "rosemary", "mint", "yogurt"],
    ],
];

const BLOCK_WORDS: [[&str; 6]; 2] = [
    ["sugar", "butter", "flour", "cream", "vanilla", "honey"],
    ["garlic", "onion", "pepper", "tomato", "broth", "thyme"],
];

const SHARED_WORDS: [&str; 8] = ["salt", "water", "oil", "egg", "bowl", "pan", "fresh", "simple"];

const N_TOPICS: usize = 5;

const DISH_KINDS: [[&str; 4]; 2] = [
    ["cake", "pie", "cookies", "muffins"],
    ["stew", "curry", "roast", "chili"],
];

#[derive(Debug, Clone, PartialEq)]
pub struct SyntheticConfig {
    pub n_users: usize,
    pub n_recipes: usize,
    /// 1 or 2 blocks.
    pub n_blocks: usize,
    pub min_per_user: usize,
    pub max_per_user: usize,
    /// Probability that an interaction falls in the user's own block.
    pub in_block: f64,
    /// Probability that an in-block interaction falls in the user's own topic.
    pub in_topic: f64,
    /// Zipf exponent of recipe popularity within a block.
    pub zipf: f64,
    pub seed: u64,
}

impl Default for SyntheticConfig {
    fn default() -> Self {
        Self {
            n_users: 200,
            n_recipes: 100,
            n_blocks: 2,
            min_per_user: 8,
            max_per_user: 14,
            in_block: 0.9,
            in_topic: 0.7,
            zipf: 1.0,
            seed: 7,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SyntheticData {
    pub recipes: Vec<RecipeDoc>,
    pub interactions: Vec<RawInteraction>,
    /// Block of every raw user, by generation index.
    pub user_blocks: Vec<usize>,
    pub recipe_blocks: Vec<usize>,
}

impl SyntheticData {
    pub fn build(&self, split: &SplitConfig) -> Result<Dataset> {
        build_dataset(&self.recipes, &self.interactions, split)
    }
}

fn pick<'a, R: Rng>(rng: &mut R, words: &[&'a str]) -> &'a str {
    words[rng.gen_range(0..words.len())]
}

pub fn generate(cfg: &SyntheticConfig) -> Result<SyntheticData> {
    if !(1..=2).contains(&cfg.n_blocks) || cfg.n_recipes < cfg.n_blocks {
        return Err(Error::InvalidHyperparam {
            name: "n_blocks",
            reason: "must be 1 or 2 and at most n_recipes".into(),
        });
    }
    if cfg.min_per_user == 0 || cfg.min_per_user > cfg.max_per_user {
        return Err(Error::InvalidHyperparam {
            name: "min_per_user",
            reason: "must be in 1..=max_per_user".into(),
        });
    }
    let block_size = cfg.n_recipes / cfg.n_blocks;
    if block_size < N_TOPICS || cfg.max_per_user > block_size {
        return Err(Error::InvalidHyperparam {
            name: "max_per_user",
            reason: format!("blocks of {block_size} recipes are too small"),
        });
    }
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);

    let recipe_blocks: Vec<usize> = (0..cfg.n_recipes)
        .map(|r| (r / block_size).min(cfg.n_blocks - 1))
        .collect();
    let recipe_topics: Vec<usize> = (0..cfg.n_recipes).map(|r| r % N_TOPICS).collect();
    let mut recipes = Vec::with_capacity(cfg.n_recipes);
    for r in 0..cfg.n_recipes {
        let (b, t) = (recipe_blocks[r], recipe_topics[r]);
        let topic = &TOPIC_WORDS[b][t];
        let mut ingredients: Vec<String> = Vec::new();
        for w in [pick(&mut rng, topic), pick(&mut rng, topic), pick(&mut rng, &BLOCK_WORDS[b])]
            .into_iter()
            .chain([pick(&mut rng, &BLOCK_WORDS[b]), pick(&mut rng, &SHARED_WORDS)])
        {
            if !ingredients.iter().any(|i| i == w) {
                ingredients.push(w.into());
            }
        }
        let directions = alloc::vec![
            format!("mix the {} with the {}", ingredients[0], ingredients[1]),
            format!("cook in a {} until done", pick(&mut rng, &SHARED_WORDS)),
        ];
        recipes.push(RecipeDoc {
            id: format!("r{r:03}"),
            title: format!(
                "{} {} {}",
                pick(&mut rng, topic),
                pick(&mut rng, &BLOCK_WORDS[b]),
                pick(&mut rng, &DISH_KINDS[b])
            ),
            ingredients,
            directions,
            nutrition: format!("calories {}", 150 + rng.gen_range(0..400)),
            image_path: None,
        });
    }

    // Popularity inside each block follows a Zipf law over a random order;
    // topic draws reuse the same weights restricted to the topic.
    let popularity = |members: &[(usize, f64)]| {
        WeightedIndex::new(members.iter().map(|&(_, w)| w)).expect("positive weights")
    };
    let mut block_members: Vec<Vec<(usize, f64)>> = Vec::new();
    for b in 0..cfg.n_blocks {
        let mut m: Vec<usize> = (0..cfg.n_recipes).filter(|&r| recipe_blocks[r] == b).collect();
        m.shuffle(&mut rng);
        block_members.push(
            m.into_iter()
                .enumerate()
                .map(|(rank, r)| (r, 1.0 / num_traits::Float::powf(rank as f64 + 1.0, cfg.zipf)))
                .collect(),
        );
    }
    let topic_members: Vec<Vec<Vec<(usize, f64)>>> = block_members
        .iter()
        .map(|m| {
            (0..N_TOPICS)
                .map(|t| m.iter().copied().filter(|&(r, _)| recipe_topics[r] == t).collect())
                .collect()
        })
        .collect();
    let block_dist: Vec<_> = block_members.iter().map(|m| popularity(m)).collect();
    let topic_dist: Vec<Vec<_>> = topic_members
        .iter()
        .map(|ts| ts.iter().map(|m| popularity(m)).collect())
        .collect();

    let mut interactions = Vec::new();
    let mut user_blocks = Vec::with_capacity(cfg.n_users);
    let mut day = 0usize;
    for u in 0..cfg.n_users {
        let home = u % cfg.n_blocks;
        let taste = (u / cfg.n_blocks) % N_TOPICS;
        user_blocks.push(home);
        let n = rng.gen_range(cfg.min_per_user..=cfg.max_per_user);
        let mut chosen = BTreeSet::new();
        let mut order = Vec::with_capacity(n);
        while order.len() < n {
            let r = if cfg.n_blocks == 2 && !rng.gen_bool(cfg.in_block) {
                let other = 1 - home;
                block_members[other][block_dist[other].sample(&mut rng)].0
            } else if rng.gen_bool(cfg.in_topic) {
                topic_members[home][taste][topic_dist[home][taste].sample(&mut rng)].0
            } else {
                block_members[home][block_dist[home].sample(&mut rng)].0
            };
            if chosen.insert(r) {
                order.push(r);
            }
        }
        let topic = &TOPIC_WORDS[home][taste];
        for r in order {
            day += 1;
            interactions.push(RawInteraction {
                user_id: format!("u{u:03}"),
                recipe_id: recipes[r].id.clone(),
                review: format!(
                    "loved the {} and {}, {} dish",
                    pick(&mut rng, topic),
                    pick(&mut rng, &BLOCK_WORDS[home]),
                    pick(&mut rng, &SHARED_WORDS)
                ),
                rating: Some(rng.gen_range(3..=5) as f32),
                date: Some(format!("2020-{day:06}")),
            });
        }
    }
    Ok(SyntheticData {
        recipes,
        interactions,
        user_blocks,
        recipe_blocks,
    })
}
