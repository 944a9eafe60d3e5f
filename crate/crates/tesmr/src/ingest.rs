//! Readers for the raw recipe (JSON Lines) and interaction (CSV) files.

use std::collections::BTreeSet;
use std::fs::File;
use std::io::{BufRead, BufReader};
use std::path::Path;

use serde::Deserialize;
use tesmr_core::dataset::{RawInteraction, RecipeDoc};

use crate::error::{Error, IoContext, Result};

/// Records plus human-readable warnings about skipped input.
#[derive(Debug, Clone, PartialEq)]
pub struct Loaded<T> {
    pub records: Vec<T>,
    pub warnings: Vec<String>,
}

pub fn load_recipes(path: &Path) -> Result<Loaded<RecipeDoc>> {
    let file = File::open(path).at(path)?;
    let mut records = Vec::new();
    let mut warnings = Vec::new();
    let mut seen = BTreeSet::new();
    for (i, line) in BufReader::new(file).lines().enumerate() {
        let line = line.at(path)?;
        let lineno = i + 1;
        if line.trim().is_empty() {
            continue;
        }
        let value: serde_json::Value = serde_json::from_str(&line).map_err(|e| Error::Parse {
            path: path.into(),
            line: lineno,
            message: e.to_string(),
        })?;
        match value.get("id") {
            Some(serde_json::Value::String(_)) => {}
            Some(serde_json::Value::Number(_)) => {}
            _ => {
                warnings.push(format!("{}:{lineno}: recipe without `id` skipped", path.display()));
                continue;
            }
        }
        let mut value = value;
        if let Some(n @ serde_json::Value::Number(_)) = value.get("id").cloned() {
            value["id"] = serde_json::Value::String(n.to_string());
        }
        if value.get("title").is_none() {
            value["title"] = serde_json::Value::String(String::new());
        }
        let doc: RecipeDoc = serde_json::from_value(value).map_err(|e| Error::Parse {
            path: path.into(),
            line: lineno,
            message: e.to_string(),
        })?;
        if !seen.insert(doc.id.clone()) {
            warnings.push(format!(
                "{}:{lineno}: duplicate recipe id `{}` ignored",
                path.display(),
                doc.id
            ));
            continue;
        }
        records.push(doc);
    }
    Ok(Loaded { records, warnings })
}

#[derive(Debug, Deserialize)]
struct InteractionRow {
    user_id: String,
    recipe_id: String,
    #[serde(default)]
    review: String,
    #[serde(default)]
    rating: Option<String>,
    #[serde(default)]
    date: Option<String>,
}

/// Reads the interaction CSV. Rows naming a recipe absent from `recipes`
/// are dropped with one aggregated warning.
pub fn load_interactions(path: &Path, recipes: &[RecipeDoc]) -> Result<Loaded<RawInteraction>> {
    let known: BTreeSet<&str> = recipes.iter().map(|r| r.id.as_str()).collect();
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(true)
        .flexible(false)
        .from_path(path)
        .map_err(|e| csv_error(path, e))?;
    let headers = reader.headers().map_err(|e| csv_error(path, e))?.clone();
    for required in ["user_id", "recipe_id", "review"] {
        if !headers.iter().any(|h| h == required) {
            return Err(Error::Parse {
                path: path.into(),
                line: 1,
                message: format!("missing column `{required}`"),
            });
        }
    }
    let mut records = Vec::new();
    let mut warnings = Vec::new();
    let mut unknown = 0usize;
    let mut bad_rating = 0usize;
    for row in reader.deserialize::<InteractionRow>() {
        let row = row.map_err(|e| csv_error(path, e))?;
        if !known.contains(row.recipe_id.as_str()) {
            unknown += 1;
            continue;
        }
        let rating = match row.rating.as_deref().map(str::trim) {
            None | Some("") => None,
            Some(s) => match s.parse::<f32>() {
                Ok(v) => Some(v),
                Err(_) => {
                    bad_rating += 1;
                    None
                }
            },
        };
        records.push(RawInteraction {
            user_id: row.user_id,
            recipe_id: row.recipe_id,
            review: row.review,
            rating,
            date: row.date.filter(|d| !d.is_empty()),
        });
    }
    if unknown > 0 {
        warnings.push(format!(
            "{}: {unknown} interactions reference unknown recipes and were dropped",
            path.display()
        ));
    }
    if bad_rating > 0 {
        warnings.push(format!(
            "{}: {bad_rating} unparseable ratings treated as missing",
            path.display()
        ));
    }
    Ok(Loaded { records, warnings })
}

fn csv_error(path: &Path, e: csv::Error) -> Error {
    let line = e.position().map_or(0, |p| p.line() as usize);
    match e.into_kind() {
        csv::ErrorKind::Io(io) => Error::io(path, io),
        kind => Error::Parse {
            path: path.into(),
            line,
            message: format!("{kind:?}"),
        },
    }
}
