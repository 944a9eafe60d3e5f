#![allow(dead_code)]

pub mod stub;

use std::path::{Path, PathBuf};

use tesmr_core::synthetic::{generate, SyntheticConfig};

/// Writes synthetic raw files into `dir`; returns (recipes, interactions).
pub fn write_raw(dir: &Path, cfg: &SyntheticConfig) -> (PathBuf, PathBuf) {
    let data = generate(cfg).unwrap();
    let recipes = dir.join("recipes.jsonl");
    let mut text = String::new();
    for r in &data.recipes {
        text.push_str(&serde_json::to_string(r).unwrap());
        text.push('\n');
    }
    std::fs::write(&recipes, text).unwrap();
    let interactions = dir.join("interactions.csv");
    let mut w = csv::Writer::from_path(&interactions).unwrap();
    w.write_record(["user_id", "recipe_id", "review", "rating", "date"]).unwrap();
    for it in &data.interactions {
        w.write_record([
            it.user_id.as_str(),
            it.recipe_id.as_str(),
            it.review.as_str(),
            &it.rating.map(|r| r.to_string()).unwrap_or_default(),
            it.date.as_deref().unwrap_or(""),
        ])
        .unwrap();
    }
    w.flush().unwrap();
    (recipes, interactions)
}

/// A small config file rooted at `dir`.
pub fn write_config(dir: &Path, extra: &str) -> PathBuf {
    let path = dir.join("tesmr.conf");
    let text = format!(
        "[paths]\n\
         recipes = {d}/recipes.jsonl\n\
         interactions = {d}/interactions.csv\n\
         dataset_dir = {d}/data\n\
         cache_dir = {d}/cache\n\
         output_dir = {d}/out\n\
         \n\
         [encode]\n\
         source_dim = 64\n\
         \n\
         [train]\n\
         layers = 1\n\
         lambda_cl = 0.0003\n\
         lr = 0.01\n\
         batch = 256\n\
         epochs = 3\n\
         \n\
         [eval]\n\
         seeds = 0,1\n\
         {extra}\n",
        d = dir.display()
    );
    std::fs::write(&path, text).unwrap();
    path
}
