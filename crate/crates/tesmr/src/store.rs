//! On-disk layouts: the dataset directory, embedding files and checkpoints.
//!
//! Dataset directory:
//!
//! | file          | contents                                                          |
//! |---------------|-------------------------------------------------------------------|
//! | `graph.bin`   | little-endian u32 pairs; first pair is `(n_users, n_recipes)`, then train edges |
//! | `splits.csv`  | `user,recipe,split` over every retained interaction (dense indices) |
//! | `docs.jsonl`  | recipe records in dense index order                               |
//! | `users.jsonl` | `{id, reviews: [{recipe, text}]}` in dense index order, chronological |
//! | `stats.json`  | counts over the full interaction set                              |

use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use tesmr_core::dataset::{stats, Dataset, DatasetStats, RecipeDoc, Review, SplitKind};
use tesmr_core::encode::{decode_embedding_file, encode_embedding_file};
use tesmr_core::train::{decode_checkpoint, encode_checkpoint, ModelState};
use tesmr_core::{EmbeddingMatrix, InteractionGraph};

use crate::error::{Error, IoContext, Result};

pub const GRAPH_FILE: &str = "graph.bin";
pub const SPLITS_FILE: &str = "splits.csv";
pub const DOCS_FILE: &str = "docs.jsonl";
pub const USERS_FILE: &str = "users.jsonl";
pub const STATS_FILE: &str = "stats.json";

/// Writes via a sibling temp file and rename so readers never see partial output.
pub fn write_atomic(path: &Path, bytes: &[u8]) -> Result<()> {
    if let Some(dir) = path.parent() {
        if !dir.as_os_str().is_empty() {
            fs::create_dir_all(dir).at(dir)?;
        }
    }
    let mut tmp = path.as_os_str().to_owned();
    tmp.push(format!(".tmp{}", std::process::id()));
    let tmp = PathBuf::from(tmp);
    {
        let mut f = fs::File::create(&tmp).at(&tmp)?;
        f.write_all(bytes).at(&tmp)?;
        f.sync_all().at(&tmp)?;
    }
    fs::rename(&tmp, path).at(path)
}

pub fn read_bytes(path: &Path) -> Result<Vec<u8>> {
    fs::read(path).at(path)
}

pub fn write_embeddings(m: &EmbeddingMatrix, path: &Path) -> Result<()> {
    write_atomic(path, &encode_embedding_file(m))
}

pub fn read_embeddings(path: &Path) -> Result<EmbeddingMatrix> {
    decode_embedding_file(&read_bytes(path)?).map_err(|source| Error::Format {
        path: path.into(),
        source,
    })
}

/// Reads an embedding file and checks it has exactly `rows` rows.
pub fn read_embeddings_checked(path: &Path, rows: usize) -> Result<EmbeddingMatrix> {
    let m = read_embeddings(path)?;
    if m.rows() != rows {
        return Err(Error::RowCount {
            path: path.into(),
            expected: rows,
            found: m.rows(),
        });
    }
    Ok(m)
}

pub fn write_checkpoint(state: &ModelState<f32>, path: &Path) -> Result<()> {
    write_atomic(path, &encode_checkpoint(state))
}

pub fn read_checkpoint(path: &Path) -> Result<ModelState<f32>> {
    decode_checkpoint(&read_bytes(path)?).map_err(|source| Error::Format {
        path: path.into(),
        source,
    })
}

#[derive(Debug, Serialize, Deserialize)]
struct UserRecord {
    id: String,
    reviews: Vec<Review>,
}

fn graph_bytes(ds: &Dataset) -> Vec<u8> {
    let g = &ds.graph_train;
    let mut out = Vec::with_capacity(8 * (g.n_edges() + 1));
    for v in [g.n_users() as u32, g.n_recipes() as u32] {
        out.extend_from_slice(&v.to_le_bytes());
    }
    for (u, r) in g.edges() {
        out.extend_from_slice(&u.to_le_bytes());
        out.extend_from_slice(&r.to_le_bytes());
    }
    out
}

fn jsonl<T: Serialize>(items: impl IntoIterator<Item = T>) -> Vec<u8> {
    let mut out = Vec::new();
    for item in items {
        serde_json::to_writer(&mut out, &item).expect("in-memory serialization");
        out.push(b'\n');
    }
    out
}

/// Serializes `ds` into `dir`. The output is a pure function of the dataset.
pub fn write_dataset(ds: &Dataset, dir: &Path) -> Result<()> {
    fs::create_dir_all(dir).at(dir)?;
    write_atomic(&dir.join(GRAPH_FILE), &graph_bytes(ds))?;

    let mut splits = String::from("user,recipe,split\n");
    for split in [SplitKind::Train, SplitKind::Val, SplitKind::Test] {
        for (u, r) in ds.pairs(split) {
            splits.push_str(&format!("{u},{r},{}\n", split.as_str()));
        }
    }
    write_atomic(&dir.join(SPLITS_FILE), splits.as_bytes())?;
    write_atomic(&dir.join(DOCS_FILE), &jsonl(&ds.recipe_docs))?;
    let users = ds.user_ids.iter().zip(&ds.user_reviews).map(|(id, reviews)| UserRecord {
        id: id.clone(),
        reviews: reviews.clone(),
    });
    write_atomic(&dir.join(USERS_FILE), &jsonl(users))?;
    let mut st = serde_json::to_vec_pretty(&stats(ds)).expect("in-memory serialization");
    st.push(b'\n');
    write_atomic(&dir.join(STATS_FILE), &st)
}

fn parse_err(path: &Path, line: usize, message: impl Into<String>) -> Error {
    Error::Parse {
        path: path.into(),
        line,
        message: message.into(),
    }
}

fn read_jsonl<T: for<'de> Deserialize<'de>>(path: &Path) -> Result<Vec<T>> {
    let text = fs::read_to_string(path).at(path)?;
    text.lines()
        .enumerate()
        .filter(|(_, l)| !l.trim().is_empty())
        .map(|(i, l)| serde_json::from_str(l).map_err(|e| parse_err(path, i + 1, e.to_string())))
        .collect()
}

pub fn read_dataset(dir: &Path) -> Result<Dataset> {
    let gpath = dir.join(GRAPH_FILE);
    let bytes = read_bytes(&gpath)?;
    if bytes.len() < 8 || bytes.len() % 8 != 0 {
        return Err(parse_err(
            &gpath,
            0,
            format!("length {} is not a whole number of u32 pairs", bytes.len()),
        ));
    }
    let words: Vec<u32> = bytes
        .chunks_exact(4)
        .map(|c| u32::from_le_bytes([c[0], c[1], c[2], c[3]]))
        .collect();
    let (n_users, n_recipes) = (words[0] as usize, words[1] as usize);
    let edges: Vec<(u32, u32)> = words[2..].chunks_exact(2).map(|p| (p[0], p[1])).collect();
    let graph_train = InteractionGraph::from_edges(n_users, n_recipes, &edges)?;

    let spath = dir.join(SPLITS_FILE);
    let text = fs::read_to_string(&spath).at(&spath)?;
    let mut lines = text.lines().enumerate();
    match lines.next() {
        Some((_, "user,recipe,split")) => {}
        _ => return Err(parse_err(&spath, 1, "expected header `user,recipe,split`")),
    }
    let (mut val_pairs, mut test_pairs) = (Vec::new(), Vec::new());
    let mut n_train = 0usize;
    for (i, line) in lines {
        let mut f = line.split(',');
        let (Some(u), Some(r), Some(s), None) = (f.next(), f.next(), f.next(), f.next()) else {
            return Err(parse_err(&spath, i + 1, "expected three fields"));
        };
        let u: u32 = u.parse().map_err(|_| parse_err(&spath, i + 1, "bad user index"))?;
        let r: u32 = r.parse().map_err(|_| parse_err(&spath, i + 1, "bad recipe index"))?;
        if u as usize >= n_users || r as usize >= n_recipes {
            return Err(parse_err(&spath, i + 1, "index outside graph.bin dimensions"));
        }
        match s {
            "train" => {
                if !graph_train.contains(u, r) {
                    return Err(parse_err(&spath, i + 1, "train pair missing from graph.bin"));
                }
                n_train += 1;
            }
            "val" => val_pairs.push((u, r)),
            "test" => test_pairs.push((u, r)),
            other => return Err(parse_err(&spath, i + 1, format!("unknown split `{other}`"))),
        }
    }
    if n_train != graph_train.n_edges() {
        return Err(parse_err(
            &spath,
            0,
            format!("{n_train} train rows but graph.bin has {} edges", graph_train.n_edges()),
        ));
    }

    let dpath = dir.join(DOCS_FILE);
    let recipe_docs: Vec<RecipeDoc> = read_jsonl(&dpath)?;
    if recipe_docs.len() != n_recipes {
        return Err(parse_err(
            &dpath,
            0,
            format!("{} recipes, expected {n_recipes}", recipe_docs.len()),
        ));
    }
    let upath = dir.join(USERS_FILE);
    let users: Vec<UserRecord> = read_jsonl(&upath)?;
    if users.len() != n_users {
        return Err(parse_err(&upath, 0, format!("{} users, expected {n_users}", users.len())));
    }
    let (user_ids, user_reviews) = users.into_iter().map(|u| (u.id, u.reviews)).unzip();
    Ok(Dataset {
        graph_train,
        val_pairs,
        test_pairs,
        recipe_docs,
        user_ids,
        user_reviews,
    })
}

pub fn read_stats(dir: &Path) -> Result<DatasetStats> {
    let path = dir.join(STATS_FILE);
    let text = fs::read_to_string(&path).at(&path)?;
    serde_json::from_str(&text).map_err(|e| parse_err(&path, e.line(), e.to_string()))
}
