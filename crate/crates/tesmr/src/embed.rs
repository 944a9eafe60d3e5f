//! Encoder backends and the embedding directory consumed by training.
//!
//! Embeddings live in `<output>/embeddings/<source>.users.tesm` and
//! `<source>.recipes.tesm`, one pair per content source.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use tesmr_core::dataset::Dataset;
use tesmr_core::encode::{fallback_encode_all, normalize_rows};
use tesmr_core::experiments::{ContentProvider, ContentSource, ContentTexts, RawContent};
use tesmr_core::summarize::{raw_recipe_text, raw_user_text};
use tesmr_core::{EmbeddingMatrix, EntityKind, Matrix};

use crate::error::{Error, Result};
use crate::service::EmbeddingClient;
use crate::store::{read_embeddings_checked, write_embeddings};
use crate::summary::SummarySet;

pub fn embedding_path(dir: &Path, source: ContentSource, kind: EntityKind) -> PathBuf {
    let side = match kind {
        EntityKind::User => "users",
        EntityKind::Recipe => "recipes",
    };
    dir.join(format!("{}.{side}.tesm", source.as_str()))
}

/// Encoder inputs for `source`: detailed recipe summaries and user
/// summaries, or the raw texts for `raw_features`.
pub fn source_texts(ds: &Dataset, summaries: Option<&SummarySet>, source: ContentSource) -> Result<ContentTexts> {
    if source == ContentSource::RawFeatures {
        return Ok(ContentTexts {
            users: (0..ds.n_users()).map(|u| raw_user_text(ds, u)).collect(),
            recipes: ds.recipe_docs.iter().map(raw_recipe_text).collect(),
        });
    }
    let s = summaries.ok_or_else(|| {
        Error::MissingEmbeddings(format!("source `{}` needs summaries; run `tesmr summarize` first", source.as_str()))
    })?;
    let users = match source {
        ContentSource::SummariesWithoutReviews => &s.users_without_reviews,
        _ => &s.users,
    };
    if users.len() != ds.n_users() || s.recipes.len() != ds.n_recipes() {
        return Err(Error::Config(format!(
            "summaries cover {} users and {} recipes but the dataset has {} and {}",
            users.len(),
            s.recipes.len(),
            ds.n_users(),
            ds.n_recipes()
        )));
    }
    Ok(ContentTexts {
        users: users.iter().map(|u| u.text.clone()).collect(),
        recipes: s.recipes.iter().map(|r| r.detailed.clone()).collect(),
    })
}

pub enum Encoder {
    Fallback { source_dim: usize },
    Service { client: EmbeddingClient, batch: usize },
}

impl Encoder {
    /// Row `i` encodes `texts[i]`; rows are L2-normalized.
    pub fn encode(&self, texts: &[String]) -> Result<EmbeddingMatrix> {
        match self {
            Encoder::Fallback { source_dim } => Ok(fallback_encode_all(texts, *source_dim)),
            Encoder::Service { client, batch } => {
                let mut rows: Vec<Vec<f32>> = Vec::with_capacity(texts.len());
                for chunk in texts.chunks(*batch) {
                    let part = client.embed(chunk)?;
                    if let (Some(first), Some(p)) = (rows.first(), part.first()) {
                        if first.len() != p.len() {
                            return Err(Error::Service(format!(
                                "embedding width changed from {} to {} between batches",
                                first.len(),
                                p.len()
                            )));
                        }
                    }
                    rows.extend(part);
                }
                if rows.iter().any(|r| r.len() != rows[0].len() || r.is_empty()) {
                    return Err(Error::Service("embedding rows have inconsistent widths".into()));
                }
                let mut m = Matrix::from_rows(&rows)?;
                normalize_rows(&mut m);
                Ok(m)
            }
        }
    }
}

/// Encodes and writes the user and recipe files for `source`.
pub fn encode_source(
    encoder: &Encoder,
    ds: &Dataset,
    summaries: Option<&SummarySet>,
    source: ContentSource,
    out_dir: &Path,
) -> Result<()> {
    let texts = source_texts(ds, summaries, source)?;
    for (kind, t) in [(EntityKind::User, &texts.users), (EntityKind::Recipe, &texts.recipes)] {
        let m = encoder.encode(t)?;
        write_embeddings(&m, &embedding_path(out_dir, source, kind))?;
    }
    Ok(())
}

/// Validates externally produced files for `source` and copies them in.
pub fn import_precomputed(ds: &Dataset, from: &Path, source: ContentSource, out_dir: &Path) -> Result<()> {
    let content = load_source(ds, from, source)?;
    if content.users.dim() != content.recipes.dim() {
        return Err(Error::Config(format!(
            "precomputed `{}` users have width {}, recipes {}",
            source.as_str(),
            content.users.dim(),
            content.recipes.dim()
        )));
    }
    write_embeddings(&content.users, &embedding_path(out_dir, source, EntityKind::User))?;
    write_embeddings(&content.recipes, &embedding_path(out_dir, source, EntityKind::Recipe))
}

fn load_source(ds: &Dataset, dir: &Path, source: ContentSource) -> Result<RawContent> {
    let up = embedding_path(dir, source, EntityKind::User);
    let rp = embedding_path(dir, source, EntityKind::Recipe);
    for p in [&up, &rp] {
        if !p.exists() {
            return Err(Error::MissingEmbeddings(format!(
                "{} not found; run `tesmr encode` first",
                p.display()
            )));
        }
    }
    Ok(RawContent {
        users: read_embeddings_checked(&up, ds.n_users())?,
        recipes: read_embeddings_checked(&rp, ds.n_recipes())?,
    })
}

/// Embeddings read from disk up front, served to the experiment runners.
#[derive(Debug, Clone, Default)]
pub struct FileContent {
    loaded: BTreeMap<&'static str, RawContent>,
}

impl FileContent {
    pub fn load(ds: &Dataset, dir: &Path, sources: &[ContentSource]) -> Result<Self> {
        let mut loaded = BTreeMap::new();
        for &s in sources {
            if !loaded.contains_key(s.as_str()) {
                loaded.insert(s.as_str(), load_source(ds, dir, s)?);
            }
        }
        Ok(Self { loaded })
    }
}

impl ContentProvider for FileContent {
    fn content(&mut self, _dataset: &Dataset, source: ContentSource) -> tesmr_core::Result<RawContent> {
        self.loaded
            .get(source.as_str())
            .cloned()
            .ok_or(tesmr_core::Error::MissingContent)
    }
}
