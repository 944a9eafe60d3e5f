mod common;

use std::time::Duration;

use common::stub::{chat_reply, StubServer};
use tesmr::service::{ChatClient, EmbeddingClient, GenerationRequest, RetryPolicy, TextGenerator};
use tesmr::summary::{par_map, prompt_hash, summarize_dataset, SummaryCache, Summarizer};
use tesmr_core::dataset::{RecipeDoc, SplitConfig};
use tesmr_core::experiments::{fallback_texts, ContentSource};
use tesmr_core::summarize::{user_history, HistoryItem, SummarySource};
use tesmr_core::synthetic::{generate, SyntheticConfig};

fn recipe() -> RecipeDoc {
    RecipeDoc {
        id: "r1".into(),
        title: "lemon tart".into(),
        ingredients: vec!["lemon".into(), "butter".into()],
        directions: vec!["bake".into()],
        nutrition: "calories 300".into(),
        image_path: None,
    }
}

fn client(url: &str) -> ChatClient {
    ChatClient::new(url, Some("k".into()), "stub-model", 0.0, Duration::from_secs(5))
}

fn quick() -> RetryPolicy {
    RetryPolicy {
        attempts: 3,
        base_backoff: Duration::from_millis(1),
    }
}

#[test]
fn two_section_response_round_trips_through_stub() {
    let server = StubServer::start(vec![chat_reply("SIMPLE:\nA tart.\n\nDETAILED:\nA baked lemon tart.")]);
    let dir = tempfile::tempdir().unwrap();
    let cache = SummaryCache::new(dir.path());
    let c = client(&server.url);
    let mut s = Summarizer::new(Some(&c), &cache);
    s.retry = quick();
    let pair = s.summarize_recipe(&recipe()).unwrap();
    assert_eq!(pair.simple, "A tart.");
    assert_eq!(pair.detailed, "A baked lemon tart.");
    assert_eq!(pair.source, SummarySource::Service);

    let reqs = server.requests.lock().unwrap().clone();
    assert_eq!(reqs.len(), 1);
    assert_eq!(reqs[0].path, "/chat/completions");
    assert_eq!(reqs[0].body["model"], "stub-model");
    assert_eq!(reqs[0].body["temperature"], 0.0);
    assert_eq!(reqs[0].body["messages"][0]["role"], "user");
    assert!(reqs[0].body["messages"][0]["content"].as_str().unwrap().contains("SIMPLE:"));
}

#[test]
fn second_call_hits_cache_without_requests() {
    let server = StubServer::start(vec![chat_reply("SIMPLE: s\nDETAILED: d")]);
    let dir = tempfile::tempdir().unwrap();
    let cache = SummaryCache::new(dir.path());
    let c = client(&server.url);
    let s = Summarizer::new(Some(&c), &cache);
    assert_eq!(s.summarize_recipe(&recipe()).unwrap().source, SummarySource::Service);
    assert_eq!(cache.len().unwrap(), 1);
    let again = s.summarize_recipe(&recipe()).unwrap();
    assert_eq!(again.source, SummarySource::Cache);
    assert_eq!((again.simple.as_str(), again.detailed.as_str()), ("s", "d"));
    assert_eq!(server.count(), 1);
    assert_eq!(s.requests(), 1);
    assert_eq!(cache.len().unwrap(), 1);

    // A fresh cache handle over the same directory also hits.
    let cache2 = SummaryCache::new(dir.path());
    let s2 = Summarizer::new(Some(&c), &cache2);
    assert_eq!(s2.summarize_recipe(&recipe()).unwrap().source, SummarySource::Cache);
    assert_eq!(server.count(), 1);
}

#[test]
fn cache_file_layout_and_fields() {
    let server = StubServer::start(vec![chat_reply("a user who likes lemons")]);
    let dir = tempfile::tempdir().unwrap();
    let cache = SummaryCache::new(dir.path());
    let c = client(&server.url);
    let s = Summarizer::new(Some(&c), &cache);
    let history = [HistoryItem {
        recipe: 0,
        simple_summary: "A tart.",
        review: "great",
    }];
    let u = s.summarize_user(&history, true).unwrap();
    assert_eq!(u.text, "a user who likes lemons");
    assert_eq!(u.n_reviews_used, 1);
    let prompt = tesmr_core::summarize::render_user_prompt(&history, 20).unwrap();
    let hash = prompt_hash(&prompt);
    let path = dir.path().join("summaries").join(&hash[..2]).join(format!("{hash}.json"));
    let v: serde_json::Value = serde_json::from_str(&std::fs::read_to_string(path).unwrap()).unwrap();
    assert_eq!(v["prompt_hash"], hash.as_str());
    assert_eq!(v["source"], "service");
    assert_eq!(v["text"], "a user who likes lemons");
    assert!(v["created_at"].as_u64().unwrap() > 1_600_000_000);
    assert!(v.get("simple").is_none());
    assert_eq!(s.summarize_user(&history, true).unwrap().source, SummarySource::Cache);
}

#[test]
fn empty_response_is_retried_then_falls_back() {
    let server = StubServer::start(vec![chat_reply("   ")]);
    let dir = tempfile::tempdir().unwrap();
    let cache = SummaryCache::new(dir.path());
    let c = client(&server.url);
    let mut s = Summarizer::new(Some(&c), &cache);
    s.retry = quick();
    let pair = s.summarize_recipe(&recipe()).unwrap();
    assert_eq!(pair.source, SummarySource::Fallback);
    assert_eq!(server.count(), 3);
    assert!(cache.is_empty().unwrap());
}

#[test]
fn transient_failure_recovers_on_retry() {
    let server = StubServer::start(vec![(500, "{}".into()), chat_reply("SIMPLE: s\nDETAILED: d")]);
    let dir = tempfile::tempdir().unwrap();
    let cache = SummaryCache::new(dir.path());
    let c = client(&server.url);
    let mut s = Summarizer::new(Some(&c), &cache);
    s.retry = quick();
    assert_eq!(s.summarize_recipe(&recipe()).unwrap().source, SummarySource::Service);
    assert_eq!(server.count(), 2);
}

#[test]
fn unreachable_service_without_fallback_is_an_error() {
    let listener = std::net::TcpListener::bind("127.0.0.1:0").unwrap();
    let url = format!("http://{}", listener.local_addr().unwrap());
    drop(listener);
    let dir = tempfile::tempdir().unwrap();
    let cache = SummaryCache::new(dir.path());
    let c = client(&url);
    let mut s = Summarizer::new(Some(&c), &cache);
    s.retry = quick();
    s.fallback = false;
    assert!(s.summarize_recipe(&recipe()).is_err());
    s.fallback = true;
    assert_eq!(s.summarize_recipe(&recipe()).unwrap().source, SummarySource::Fallback);

    let mut none = Summarizer::new(None, &cache);
    none.fallback = false;
    assert!(none.summarize_recipe(&recipe()).is_err());
}

#[test]
fn image_is_attached_as_base64_part() {
    let dir = tempfile::tempdir().unwrap();
    std::fs::write(dir.path().join("tart.png"), [1u8, 2, 3]).unwrap();
    let c = client("http://127.0.0.1:9");
    let body = c
        .request_body(&GenerationRequest {
            prompt: "describe".into(),
            image: Some(dir.path().join("tart.png")),
        })
        .unwrap();
    let parts = body["messages"][0]["content"].as_array().unwrap();
    assert_eq!(parts[0]["type"], "text");
    assert_eq!(parts[1]["type"], "image_url");
    assert_eq!(parts[1]["image_url"]["url"], "data:image/png;base64,AQID");

    let text_only = c
        .request_body(&GenerationRequest {
            prompt: "describe".into(),
            image: None,
        })
        .unwrap();
    assert_eq!(text_only["messages"][0]["content"], "describe");
}

#[test]
fn embedding_client_reads_both_response_shapes() {
    let server = StubServer::start(vec![
        (200, r#"{"data":[{"index":1,"embedding":[0,1]},{"index":0,"embedding":[1,0]}]}"#.into()),
        (200, r#"{"embeddings":[[3,4]]}"#.into()),
    ]);
    let c = EmbeddingClient::new(&server.url, None, "enc", Duration::from_secs(5));
    let rows = c.embed(&["a".into(), "b".into()]).unwrap();
    assert_eq!(rows, vec![vec![1.0, 0.0], vec![0.0, 1.0]]);
    assert_eq!(c.embed(&["c".into()]).unwrap(), vec![vec![3.0, 4.0]]);
    let reqs = server.requests.lock().unwrap().clone();
    assert_eq!(reqs[0].path, "/embeddings");
    assert_eq!(reqs[0].body["input"], serde_json::json!(["a", "b"]));
    assert_eq!(reqs[0].body["model"], "enc");
    assert!(c.embed(&["x".into(), "y".into()]).is_err());
}

#[test]
fn fallback_pipeline_matches_in_memory_texts() {
    let ds = generate(&SyntheticConfig {
        n_users: 30,
        n_recipes: 40,
        ..SyntheticConfig::default()
    })
    .unwrap()
    .build(&SplitConfig::default())
    .unwrap();
    let dir = tempfile::tempdir().unwrap();
    let cache = SummaryCache::new(dir.path());
    let s = Summarizer::new(None, &cache);
    let set = summarize_dataset(&s, &ds, 4).unwrap();
    let with = fallback_texts(&ds, ContentSource::Summaries, 20);
    let without = fallback_texts(&ds, ContentSource::SummariesWithoutReviews, 20);
    let detailed: Vec<String> = set.recipes.iter().map(|r| r.detailed.clone()).collect();
    assert_eq!(detailed, with.recipes);
    let users: Vec<String> = set.users.iter().map(|u| u.text.clone()).collect();
    assert_eq!(users, with.users);
    let users: Vec<String> = set.users_without_reviews.iter().map(|u| u.text.clone()).collect();
    assert_eq!(users, without.users);
    assert!(cache.is_empty().unwrap());
}

/// Counts calls and answers with the prompt length; used to check
/// concurrency does not reorder results or duplicate work.
struct Echo(std::sync::atomic::AtomicUsize);

impl TextGenerator for Echo {
    fn generate(&self, r: &GenerationRequest) -> tesmr::Result<String> {
        self.0.fetch_add(1, std::sync::atomic::Ordering::SeqCst);
        Ok(format!("SIMPLE: {}\nDETAILED: {}", r.prompt.len(), r.prompt.len() * 2))
    }
}

#[test]
fn concurrent_summaries_are_ordered_and_leak_free() {
    let ds = generate(&SyntheticConfig {
        n_users: 40,
        n_recipes: 40,
        ..SyntheticConfig::default()
    })
    .unwrap()
    .build(&SplitConfig::default())
    .unwrap();
    let dir = tempfile::tempdir().unwrap();
    let cache = SummaryCache::new(dir.path());
    let echo = Echo(Default::default());
    let s = Summarizer::new(Some(&echo), &cache);
    let a = summarize_dataset(&s, &ds, 4).unwrap();
    let calls = echo.0.load(std::sync::atomic::Ordering::SeqCst);
    assert!(calls > 0);
    let entries = cache.len().unwrap();
    let b = summarize_dataset(&s, &ds, 1).unwrap();
    assert_eq!(echo.0.load(std::sync::atomic::Ordering::SeqCst), calls);
    assert_eq!(cache.len().unwrap(), entries);
    for (x, y) in a.recipes.iter().zip(&b.recipes) {
        assert_eq!((&x.simple, &x.detailed), (&y.simple, &y.detailed));
        assert_eq!(y.source, SummarySource::Cache);
    }

    // Every user prompt references only train pairs.
    let simple = a.simple();
    for u in 0..ds.n_users() {
        for item in user_history(&ds, u, &simple, true) {
            assert!(ds.graph_train.contains(u as u32, item.recipe));
        }
    }
}

#[test]
fn par_map_keeps_order_and_reports_first_error() {
    let items: Vec<usize> = (0..100).collect();
    let out = par_map(&items, 8, |&i| Ok(i * 2)).unwrap();
    assert_eq!(out, (0..100).map(|i| i * 2).collect::<Vec<_>>());
    let err = par_map(&items, 8, |&i| {
        if i % 30 == 7 {
            Err(tesmr::Error::Service(format!("item {i}")))
        } else {
            Ok(i)
        }
    })
    .unwrap_err();
    assert_eq!(err.to_string(), "service error: item 7");
}
