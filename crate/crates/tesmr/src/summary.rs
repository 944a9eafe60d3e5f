//! Summary cache and the summarization pipeline over a dataset.

use std::fs;
use std::path::{Path, PathBuf};
use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::Mutex;
use std::time::{SystemTime, UNIX_EPOCH};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use tesmr_core::dataset::{Dataset, RecipeDoc};
use tesmr_core::summarize::{
    capped, fallback_recipe_summary, fallback_user_summary, parse_two_sections,
    render_recipe_prompts, render_user_prompt, user_history, HistoryItem, RecipeSummaryPair,
    SummarySource, UserSummary, TEMPLATE_VERSION,
};

use crate::error::{Error, IoContext, Result};
use crate::service::{GenerationRequest, RetryPolicy, TextGenerator};
use crate::store::write_atomic;

/// Cache key: SHA-256 over the template version and the rendered prompt.
pub fn prompt_hash(prompt: &str) -> String {
    let mut h = Sha256::new();
    h.update(TEMPLATE_VERSION.as_bytes());
    h.update([0u8]);
    h.update(prompt.as_bytes());
    hex::encode(h.finalize())
}

/// One cache file. Recipe entries carry `simple`/`detailed`, user entries `text`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct CacheEntry {
    pub prompt_hash: String,
    /// Unix seconds.
    pub created_at: u64,
    pub source: SummarySource,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub simple: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub detailed: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub text: Option<String>,
}

/// Hash-keyed store under `<root>/summaries/<first2>/<hash>.json`.
#[derive(Debug)]
pub struct SummaryCache {
    root: PathBuf,
    writer: Mutex<()>,
}

impl SummaryCache {
    pub fn new(cache_dir: &Path) -> Self {
        Self {
            root: cache_dir.join("summaries"),
            writer: Mutex::new(()),
        }
    }

    pub fn entry_path(&self, hash: &str) -> PathBuf {
        self.root.join(&hash[..2]).join(format!("{hash}.json"))
    }

    pub fn get(&self, hash: &str) -> Result<Option<CacheEntry>> {
        let path = self.entry_path(hash);
        let text = match fs::read_to_string(&path) {
            Ok(t) => t,
            Err(e) if e.kind() == std::io::ErrorKind::NotFound => return Ok(None),
            Err(e) => return Err(Error::io(path, e)),
        };
        let entry: CacheEntry = serde_json::from_str(&text).map_err(|e| Error::Parse {
            path: path.clone(),
            line: e.line(),
            message: e.to_string(),
        })?;
        if entry.prompt_hash != hash {
            return Err(Error::Parse {
                path,
                line: 0,
                message: format!("prompt_hash {} does not match file name", entry.prompt_hash),
            });
        }
        Ok(Some(entry))
    }

    /// Writes `entry` unless a file for its key already exists.
    pub fn put(&self, entry: &CacheEntry) -> Result<()> {
        let _guard = self.writer.lock().unwrap_or_else(|p| p.into_inner());
        let path = self.entry_path(&entry.prompt_hash);
        if path.exists() {
            return Ok(());
        }
        let mut bytes = serde_json::to_vec_pretty(entry).expect("in-memory serialization");
        bytes.push(b'\n');
        write_atomic(&path, &bytes)
    }

    pub fn len(&self) -> Result<usize> {
        if !self.root.exists() {
            return Ok(0);
        }
        let mut n = 0;
        for shard in fs::read_dir(&self.root).at(&self.root)? {
            let shard = shard.at(&self.root)?.path();
            if shard.is_dir() {
                n += fs::read_dir(&shard)
                    .at(&shard)?
                    .filter_map(|e| e.ok())
                    .filter(|e| e.path().extension().is_some_and(|x| x == "json"))
                    .count();
            }
        }
        Ok(n)
    }

    pub fn is_empty(&self) -> Result<bool> {
        Ok(self.len()? == 0)
    }
}

fn now_secs() -> u64 {
    SystemTime::now()
        .duration_since(UNIX_EPOCH)
        .map_or(0, |d| d.as_secs())
}

/// Summarizes recipes and users through an optional service, with caching
/// and fallback.
pub struct Summarizer<'a> {
    pub generator: Option<&'a dyn TextGenerator>,
    pub cache: &'a SummaryCache,
    pub retry: RetryPolicy,
    /// Use the offline summary when the service fails.
    pub fallback: bool,
    pub review_cap: usize,
    /// Resolves relative image paths.
    pub image_root: PathBuf,
    requests: AtomicUsize,
}

impl<'a> Summarizer<'a> {
    pub fn new(generator: Option<&'a dyn TextGenerator>, cache: &'a SummaryCache) -> Self {
        Self {
            generator,
            cache,
            retry: RetryPolicy::default(),
            fallback: true,
            review_cap: tesmr_core::summarize::DEFAULT_REVIEW_CAP,
            image_root: PathBuf::from("."),
            requests: AtomicUsize::new(0),
        }
    }

    /// Service requests issued so far (retries included).
    pub fn requests(&self) -> usize {
        self.requests.load(Ordering::Relaxed)
    }

    fn call<T>(&self, request: &GenerationRequest, parse: impl Fn(&str) -> Option<T>) -> Result<T> {
        let generator = self.generator.expect("checked by caller");
        self.retry.run(|| {
            self.requests.fetch_add(1, Ordering::Relaxed);
            let text = generator.generate(request)?;
            if text.trim().is_empty() {
                return Err(Error::Service("empty response".into()));
            }
            parse(&text).ok_or_else(|| Error::Service("response could not be parsed".into()))
        })
    }

    fn no_service(&self) -> Result<()> {
        if self.generator.is_none() && !self.fallback {
            return Err(Error::Service(
                "no text-generation service configured and fallback is disabled".into(),
            ));
        }
        Ok(())
    }

    pub fn summarize_recipe(&self, doc: &RecipeDoc) -> Result<RecipeSummaryPair> {
        self.no_service()?;
        let fallback = || {
            let (simple, detailed) = fallback_recipe_summary(doc);
            RecipeSummaryPair {
                simple,
                detailed,
                source: SummarySource::Fallback,
            }
        };
        if self.generator.is_none() {
            return Ok(fallback());
        }
        let prompts = render_recipe_prompts(doc);
        let mut key_text = prompts.request_text();
        if let Some(img) = &prompts.image_path {
            key_text.push_str("\n[image] ");
            key_text.push_str(img);
        }
        let hash = prompt_hash(&key_text);
        if let Some(hit) = self.cache.get(&hash)? {
            if let (Some(simple), Some(detailed)) = (hit.simple, hit.detailed) {
                return Ok(RecipeSummaryPair {
                    simple,
                    detailed,
                    source: SummarySource::Cache,
                });
            }
        }
        let image = prompts.image_path.as_ref().map(|p| {
            let p = Path::new(p);
            if p.is_absolute() {
                p.to_path_buf()
            } else {
                self.image_root.join(p)
            }
        });
        let request = GenerationRequest {
            prompt: prompts.request_text(),
            image,
        };
        match self.call(&request, parse_two_sections) {
            Ok((simple, detailed)) => {
                self.cache.put(&CacheEntry {
                    prompt_hash: hash,
                    created_at: now_secs(),
                    source: SummarySource::Service,
                    simple: Some(simple.clone()),
                    detailed: Some(detailed.clone()),
                    text: None,
                })?;
                Ok(RecipeSummaryPair {
                    simple,
                    detailed,
                    source: SummarySource::Service,
                })
            }
            Err(e) if self.fallback => {
                eprintln!("warning: recipe `{}`: {e}; using fallback summary", doc.id);
                Ok(fallback())
            }
            Err(e) => Err(e),
        }
    }

    /// Summary of one user's train history. A history without any review
    /// text (when reviews are requested) always uses the offline summary.
    pub fn summarize_user(&self, history: &[HistoryItem<'_>], include_reviews: bool) -> Result<UserSummary> {
        self.no_service()?;
        let fallback = || {
            let (text, n) = fallback_user_summary(history, self.review_cap);
            UserSummary {
                text,
                n_reviews_used: n,
                source: SummarySource::Fallback,
            }
        };
        let n_reviews = capped(history, self.review_cap)
            .iter()
            .filter(|h| !h.review.trim().is_empty())
            .count();
        if self.generator.is_none() || history.is_empty() || (include_reviews && n_reviews == 0) {
            return Ok(fallback());
        }
        let prompt = render_user_prompt(history, self.review_cap)?;
        let hash = prompt_hash(&prompt);
        if let Some(hit) = self.cache.get(&hash)? {
            if let Some(text) = hit.text {
                return Ok(UserSummary {
                    text,
                    n_reviews_used: n_reviews,
                    source: SummarySource::Cache,
                });
            }
        }
        let request = GenerationRequest { prompt, image: None };
        match self.call(&request, |t| Some(t.trim().to_string())) {
            Ok(text) => {
                self.cache.put(&CacheEntry {
                    prompt_hash: hash,
                    created_at: now_secs(),
                    source: SummarySource::Service,
                    simple: None,
                    detailed: None,
                    text: Some(text.clone()),
                })?;
                Ok(UserSummary {
                    text,
                    n_reviews_used: n_reviews,
                    source: SummarySource::Service,
                })
            }
            Err(e) if self.fallback => {
                eprintln!("warning: user summary: {e}; using fallback summary");
                Ok(fallback())
            }
            Err(e) => Err(e),
        }
    }
}

/// Applies `f` to every item with up to `jobs` worker threads. Results keep
/// input order; the first error by index is returned.
pub fn par_map<T: Sync, R: Send>(
    items: &[T],
    jobs: usize,
    f: impl Fn(&T) -> Result<R> + Sync,
) -> Result<Vec<R>> {
    let next = AtomicUsize::new(0);
    let slots: Vec<Mutex<Option<Result<R>>>> = items.iter().map(|_| Mutex::new(None)).collect();
    std::thread::scope(|s| {
        for _ in 0..jobs.max(1).min(items.len().max(1)) {
            s.spawn(|| loop {
                let i = next.fetch_add(1, Ordering::Relaxed);
                if i >= items.len() {
                    break;
                }
                let r = f(&items[i]);
                *slots[i].lock().unwrap_or_else(|p| p.into_inner()) = Some(r);
            });
        }
    });
    slots
        .into_iter()
        .map(|m| {
            m.into_inner()
                .unwrap_or_else(|p| p.into_inner())
                .expect("every slot filled")
        })
        .collect()
}

/// Every summary the encoder needs, in dense index order.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SummarySet {
    pub recipes: Vec<RecipeSummaryPair>,
    pub users: Vec<UserSummary>,
    /// User summaries built from recipe summaries alone.
    pub users_without_reviews: Vec<UserSummary>,
}

pub const RECIPE_SUMMARIES: &str = "recipes.jsonl";
pub const USER_SUMMARIES: &str = "users.jsonl";
pub const USER_SUMMARIES_NO_REVIEWS: &str = "users_without_reviews.jsonl";

impl SummarySet {
    pub fn write(&self, dir: &Path) -> Result<()> {
        fn lines<T: Serialize>(items: &[T]) -> Vec<u8> {
            let mut out = Vec::new();
            for it in items {
                serde_json::to_writer(&mut out, it).expect("in-memory serialization");
                out.push(b'\n');
            }
            out
        }
        write_atomic(&dir.join(RECIPE_SUMMARIES), &lines(&self.recipes))?;
        write_atomic(&dir.join(USER_SUMMARIES), &lines(&self.users))?;
        write_atomic(&dir.join(USER_SUMMARIES_NO_REVIEWS), &lines(&self.users_without_reviews))
    }

    pub fn read(dir: &Path) -> Result<Self> {
        fn lines<T: for<'de> Deserialize<'de>>(path: &Path) -> Result<Vec<T>> {
            let text = fs::read_to_string(path).at(path)?;
            text.lines()
                .enumerate()
                .filter(|(_, l)| !l.trim().is_empty())
                .map(|(i, l)| {
                    serde_json::from_str(l).map_err(|e| Error::Parse {
                        path: path.into(),
                        line: i + 1,
                        message: e.to_string(),
                    })
                })
                .collect()
        }
        Ok(Self {
            recipes: lines(&dir.join(RECIPE_SUMMARIES))?,
            users: lines(&dir.join(USER_SUMMARIES))?,
            users_without_reviews: lines(&dir.join(USER_SUMMARIES_NO_REVIEWS))?,
        })
    }

    pub fn simple(&self) -> Vec<String> {
        self.recipes.iter().map(|r| r.simple.clone()).collect()
    }
}

/// Summarizes every recipe, then every user twice (with and without reviews).
pub fn summarize_dataset(s: &Summarizer<'_>, ds: &Dataset, jobs: usize) -> Result<SummarySet> {
    let recipes = par_map(&ds.recipe_docs, jobs, |doc| s.summarize_recipe(doc))?;
    let simple: Vec<String> = recipes.iter().map(|r| r.simple.clone()).collect();
    let users: Vec<usize> = (0..ds.n_users()).collect();
    let with = par_map(&users, jobs, |&u| {
        s.summarize_user(&user_history(ds, u, &simple, true), true)
    })?;
    let without = par_map(&users, jobs, |&u| {
        s.summarize_user(&user_history(ds, u, &simple, false), false)
    })?;
    Ok(SummarySet {
        recipes,
        users: with,
        users_without_reviews: without,
    })
}
