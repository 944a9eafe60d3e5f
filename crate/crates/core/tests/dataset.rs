use std::collections::BTreeSet;

use proptest::prelude::*;
use tesmr_core::dataset::{build_dataset, RawInteraction, RecipeDoc, SplitConfig, SplitKind};

fn doc(id: usize) -> RecipeDoc {
    RecipeDoc {
        id: format!("r{id}"),
        title: format!("dish {id}"),
        ingredients: vec![format!("item{}", id % 7)],
        directions: vec![],
        nutrition: String::new(),
        image_path: None,
    }
}

fn rows(pairs: &[(u8, u8)]) -> Vec<RawInteraction> {
    pairs
        .iter()
        .enumerate()
        .map(|(i, &(u, r))| RawInteraction {
            user_id: format!("u{u}"),
            recipe_id: format!("r{r}"),
            review: format!("review {i}"),
            rating: Some(4.0),
            date: Some(format!("2021-{:04}", i)),
        })
        .collect()
}

proptest! {
    #[test]
    fn split_partitions_the_filtered_interactions(
        pairs in proptest::collection::vec((0u8..15, 0u8..25), 0..300),
        seed in any::<u64>(),
    ) {
        let recipes: Vec<RecipeDoc> = (0..25).map(doc).collect();
        let cfg = SplitConfig { seed, ..SplitConfig::default() };
        let Ok(ds) = build_dataset(&recipes, &rows(&pairs), &cfg) else {
            return Ok(());
        };
        let train: BTreeSet<(u32, u32)> = ds.pairs(SplitKind::Train).into_iter().collect();
        let val: BTreeSet<(u32, u32)> = ds.val_pairs.iter().copied().collect();
        let test: BTreeSet<(u32, u32)> = ds.test_pairs.iter().copied().collect();
        prop_assert_eq!(val.len(), ds.val_pairs.len());
        prop_assert_eq!(test.len(), ds.test_pairs.len());
        prop_assert!(train.is_disjoint(&val) && train.is_disjoint(&test) && val.is_disjoint(&test));

        // Union equals the surviving raw pairs, mapped back to string ids.
        let names = |(u, r): (u32, u32)| {
            (ds.user_ids[u as usize].clone(), ds.recipe_docs[r as usize].id.clone())
        };
        let all: BTreeSet<_> = train.iter().chain(&val).chain(&test).map(|&p| names(p)).collect();
        let kept_users: BTreeSet<&String> = ds.user_ids.iter().collect();
        let kept_recipes: BTreeSet<&String> = ds.recipe_docs.iter().map(|d| &d.id).collect();
        let raw: BTreeSet<(String, String)> = pairs
            .iter()
            .map(|&(u, r)| (format!("u{u}"), format!("r{r}")))
            .filter(|(u, r)| kept_users.contains(u) && kept_recipes.contains(r))
            .collect();
        prop_assert_eq!(all, raw);

        // Fixed point: every node of the train graph has an edge, and every
        // user has at least the configured number of interactions.
        prop_assert!(ds.graph_train.find_isolated().is_none());
        for u in 0..ds.n_users() {
            let n = ds.graph_train.recipes_of(u).len()
                + ds.items_by_user(SplitKind::Val)[u].len()
                + ds.items_by_user(SplitKind::Test)[u].len();
            prop_assert!(n >= cfg.min_interactions);
        }
        for &(u, _) in ds.val_pairs.iter().chain(&ds.test_pairs) {
            prop_assert!((u as usize) < ds.n_users());
        }

        let again = build_dataset(&recipes, &rows(&pairs), &cfg).unwrap();
        prop_assert_eq!(format!("{ds:?}"), format!("{again:?}"));
    }
}
