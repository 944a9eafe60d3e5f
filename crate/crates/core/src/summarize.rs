//! Prompt templates, response parsing and the deterministic offline
//! summarizer for recipe and user summaries.
//!
//! A recipe gets two summaries: a *simple* one built from every field except
//! the directions and a *detailed* one over all fields. A user summary is
//! built from the user's train-split history, each element being the simple
//! summary of the recipe followed by the user's review of it.

use alloc::format;
use alloc::string::String;
use alloc::vec::Vec;
use core::fmt::Write;

use serde::{Deserialize, Serialize};

use crate::dataset::{Dataset, RecipeDoc};
use crate::error::{Error, Result};

/// Bumped whenever any template below changes; part of every cache key.
pub const TEMPLATE_VERSION: &str = "tesmr-templates-v1";

/// Most recent history elements kept in a user prompt.
pub const DEFAULT_REVIEW_CAP: usize = 20;

const NONE: &str = "(none)";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SummarySource {
    Service,
    Fallback,
    Cache,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct RecipeSummaryPair {
    pub simple: String,
    pub detailed: String,
    pub source: SummarySource,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct UserSummary {
    pub text: String,
    pub n_reviews_used: usize,
    pub source: SummarySource,
}

/// The two recipe prompts plus the optional image reference.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RecipePrompts {
    pub simple: String,
    pub detailed: String,
    pub image_path: Option<String>,
}

impl RecipePrompts {
    /// Single request text asking for both summaries under `SIMPLE:` / `DETAILED:` markers.
    pub fn request_text(&self) -> String {
        format!(
            "Answer with exactly two sections.\n\
             Start the first with the line `SIMPLE:` and answer task 1.\n\
             Start the second with the line `DETAILED:` and answer task 2.\n\n\
             Task 1:\n{}\n\nTask 2:\n{}",
            self.simple, self.detailed
        )
    }
}

fn or_none(s: &str) -> &str {
    if s.trim().is_empty() {
        NONE
    } else {
        s
    }
}

fn join_or_none(items: &[String], sep: &str) -> String {
    let parts: Vec<&str> = items
        .iter()
        .map(|s| s.trim())
        .filter(|s| !s.is_empty())
        .collect();
    if parts.is_empty() {
        NONE.into()
    } else {
        parts.join(sep)
    }
}

fn recipe_fields(doc: &RecipeDoc, with_directions: bool) -> String {
    let mut out = String::new();
    let _ = writeln!(out, "Title: {}", or_none(&doc.title));
    let _ = writeln!(out, "Ingredients: {}", join_or_none(&doc.ingredients, ", "));
    if with_directions {
        let _ = writeln!(out, "Directions: {}", join_or_none(&doc.directions, " "));
    }
    let _ = write!(out, "Nutrition: {}", or_none(&doc.nutrition));
    out
}

pub fn render_recipe_prompts(doc: &RecipeDoc) -> RecipePrompts {
    let image_note = if doc.image_path.is_some() {
        "Use the attached photo of the dish as well.\n"
    } else {
        ""
    };
    let simple = format!(
        "Summarize this recipe in two or three sentences: what kind of dish it is, its key \
         ingredients, flavour and nutrition profile.\n{image_note}{}",
        recipe_fields(doc, false)
    );
    let detailed = format!(
        "Write a detailed summary of this recipe covering the dish, its ingredients, the \
         cooking process, flavour, difficulty and nutrition.\n{image_note}{}",
        recipe_fields(doc, true)
    );
    RecipePrompts {
        simple,
        detailed,
        image_path: doc.image_path.clone(),
    }
}

/// One element of a user's history: the recipe's simple summary and the review.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct HistoryItem<'a> {
    pub recipe: u32,
    pub simple_summary: &'a str,
    pub review: &'a str,
}

/// Oldest-first history elements after applying the cap (keeps the most recent).
pub fn capped<'h, 'a>(history: &'h [HistoryItem<'a>], cap: usize) -> &'h [HistoryItem<'a>] {
    &history[history.len().saturating_sub(cap)..]
}

fn render_item(out: &mut String, n: usize, item: &HistoryItem<'_>) {
    let _ = writeln!(out, "[item {n}]");
    // The element is the simple summary concatenated with the review.
    let _ = writeln!(out, "{}\n{}", item.simple_summary.trim(), or_none(item.review.trim()));
}

pub fn render_user_prompt(history: &[HistoryItem<'_>], cap: usize) -> Result<String> {
    if history.is_empty() {
        return Err(Error::EmptyHistory);
    }
    let mut out = String::from(
        "Below are recipes a user cooked, each a recipe summary followed by the user's review. \
         Summarize this user's food preferences: favourite dishes, ingredients, flavours, \
         dietary habits and dislikes.\n\n",
    );
    for (n, item) in capped(history, cap).iter().enumerate() {
        render_item(&mut out, n + 1, item);
    }
    Ok(out)
}

/// Train-split history of `user`, oldest first. With `include_reviews = false`
/// the review text is omitted (only recipe summaries remain).
pub fn user_history<'a>(
    dataset: &'a Dataset,
    user: usize,
    simple_summaries: &'a [String],
    include_reviews: bool,
) -> Vec<HistoryItem<'a>> {
    dataset
        .train_reviews(user)
        .map(|rv| HistoryItem {
            recipe: rv.recipe,
            simple_summary: &simple_summaries[rv.recipe as usize],
            review: if include_reviews { &rv.text } else { "" },
        })
        .collect()
}

/// Sections of a two-part service response. Looks for the `SIMPLE:` and
/// `DETAILED:` markers first and otherwise splits at the first blank line.
pub fn parse_two_sections(response: &str) -> Option<(String, String)> {
    let text = response.trim();
    let simple_at = find_marker(text, "SIMPLE:");
    let detailed_at = find_marker(text, "DETAILED:");
    if let (Some(s), Some(d)) = (simple_at, detailed_at) {
        let (simple, detailed) = if s < d {
            (&text[s + 7..d], &text[d + 9..])
        } else {
            (&text[s + 7..], &text[d + 9..s])
        };
        let (simple, detailed) = (simple.trim(), detailed.trim());
        if !simple.is_empty() && !detailed.is_empty() {
            return Some((simple.into(), detailed.into()));
        }
        return None;
    }
    let normalized = text.replace("\r\n", "\n");
    let (a, b) = normalized.split_once("\n\n")?;
    let (a, b) = (a.trim(), b.trim());
    if a.is_empty() || b.is_empty() {
        return None;
    }
    Some((a.into(), b.into()))
}

fn find_marker(text: &str, marker: &str) -> Option<usize> {
    text.find(marker)
}

/// Offline recipe summaries: a fixed template over the same fields the
/// service would see (simple omits the directions).
pub fn fallback_recipe_summary(doc: &RecipeDoc) -> (String, String) {
    let simple = format!(
        "Recipe: {}. Ingredients: {}. Nutrition: {}.",
        or_none(doc.title.trim()),
        join_or_none(&doc.ingredients, ", "),
        or_none(doc.nutrition.trim())
    );
    let detailed = format!(
        "{simple} Directions: {}",
        join_or_none(&doc.directions, " ")
    );
    (simple, detailed)
}

/// Offline user summary: a header followed by the capped history elements,
/// concatenated in order. A history with no review text at all yields a
/// summary built from the recipe summaries only.
pub fn fallback_user_summary(history: &[HistoryItem<'_>], cap: usize) -> (String, usize) {
    let items = capped(history, cap);
    let n_reviews = items.iter().filter(|h| !h.review.trim().is_empty()).count();
    let mut out = String::new();
    if n_reviews == 0 {
        out.push_str("User preference summary (from cooked recipes):");
        for item in items {
            let _ = write!(out, "\n- {}", item.simple_summary.trim());
        }
    } else {
        out.push_str("User preference summary (from reviews):");
        for item in items {
            let _ = write!(out, "\n- {}", item.simple_summary.trim());
            if !item.review.trim().is_empty() {
                let _ = write!(out, " Review: {}", item.review.trim());
            }
        }
    }
    if items.is_empty() {
        out.push_str(" (no history)");
    }
    (out, n_reviews)
}

/// Raw recipe text used without summarization: name, ingredients, directions, nutrition.
pub fn raw_recipe_text(doc: &RecipeDoc) -> String {
    recipe_fields(doc, true)
}

/// Raw user text used without summarization: each train review together
/// with the description of the reviewed recipe.
pub fn raw_user_text(dataset: &Dataset, user: usize) -> String {
    let mut out = String::new();
    for rv in dataset.train_reviews(user) {
        let doc = &dataset.recipe_docs[rv.recipe as usize];
        if !out.is_empty() {
            out.push('\n');
        }
        let _ = write!(out, "{}\nReview: {}", raw_recipe_text(doc), or_none(rv.text.trim()));
    }
    if out.is_empty() {
        out.push_str(NONE);
    }
    out
}
