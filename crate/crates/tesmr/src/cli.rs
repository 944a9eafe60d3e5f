//! Command-line entry point. Exit codes: 0 success, 1 usage error, 2 runtime failure.

use std::ffi::OsString;
use std::path::PathBuf;
use std::time::Instant;

use clap::{Parser, Subcommand};
use tesmr_core::evaluate::render_table;
use tesmr_core::summarize::SummarySource;

use crate::config::{ConfigMap, RunConfig};
use crate::error::Result;
use crate::pipeline;
use crate::run::{write_run_record, OutputLock, RunRecord, VERSION};

pub const EXIT_OK: i32 = 0;
pub const EXIT_USAGE: i32 = 1;
pub const EXIT_RUNTIME: i32 = 2;

#[derive(Debug, Parser)]
#[command(name = "tesmr", version = VERSION, about = "Three-stage multimodal recipe recommender")]
pub struct Cli {
    /// Config file (`key = value`) or a previous run.json.
    #[arg(long, global = true, value_name = "FILE")]
    pub config: Option<PathBuf>,
    /// Override one key; repeatable.
    #[arg(long = "set", global = true, value_name = "KEY=VALUE")]
    pub set: Vec<String>,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Subcommand)]
pub enum Command {
    /// Filter, split and serialize the raw recipe and interaction files.
    Ingest,
    /// Recipe and user summaries (service, cache or fallback).
    Summarize,
    /// Encoder embeddings for every configured content source.
    Encode,
    /// Train the configured variant with train.seed.
    Train,
    /// Test metrics of the trained checkpoint.
    Evaluate,
    /// Training-free message-passing baseline.
    MpBaseline,
    /// Every variant over eval.seeds.
    Ablate,
    /// Full model over the tau, lambda_cl and layer grid.
    Sweep,
    /// Table over all saved reports.
    Report,
}

impl Command {
    pub fn name(self) -> &'static str {
        match self {
            Command::Ingest => "ingest",
            Command::Summarize => "summarize",
            Command::Encode => "encode",
            Command::Train => "train",
            Command::Evaluate => "evaluate",
            Command::MpBaseline => "mp-baseline",
            Command::Ablate => "ablate",
            Command::Sweep => "sweep",
            Command::Report => "report",
        }
    }
}

fn resolve(cli: &Cli) -> Result<(ConfigMap, RunConfig)> {
    let mut map = match &cli.config {
        Some(p) => ConfigMap::load(p)?,
        None => ConfigMap::default(),
    };
    for s in &cli.set {
        map.apply_override(s)?;
    }
    let cfg = RunConfig::from_map(&map)?;
    Ok((map, cfg))
}

fn execute(command: Command, cfg: &RunConfig) -> Result<String> {
    Ok(match command {
        Command::Ingest => {
            let out = pipeline::ingest(cfg)?;
            for w in &out.warnings {
                eprintln!("warning: {w}");
            }
            let s = out.stats;
            format!(
                "users {}  recipes {}  interactions {}  ingredients {}  sparsity {:.2}%\nwrote {}",
                s.n_users,
                s.n_recipes,
                s.n_interactions,
                s.n_ingredients,
                s.sparsity,
                cfg.paths.dataset_dir.display()
            )
        }
        Command::Summarize => {
            let set = pipeline::summarize(cfg)?;
            let count = |src: SummarySource| {
                set.recipes.iter().filter(|r| r.source == src).count()
                    + set.users.iter().chain(&set.users_without_reviews).filter(|u| u.source == src).count()
            };
            format!(
                "{} recipe and {} user summaries (service {}, cache {}, fallback {})",
                set.recipes.len(),
                set.users.len(),
                count(SummarySource::Service),
                count(SummarySource::Cache),
                count(SummarySource::Fallback)
            )
        }
        Command::Encode => {
            let sources = pipeline::encode(cfg)?;
            let names: Vec<&str> = sources.iter().map(|s| s.as_str()).collect();
            format!("encoded {}", names.join(", "))
        }
        Command::Train => {
            let o = pipeline::train(cfg)?;
            format!(
                "{} seed {}: {} epochs, best val Recall@20 {:.4} at epoch {} (initial {:.4}){}",
                cfg.variant.name,
                cfg.hp.seed,
                o.log.len(),
                o.best_val_recall20,
                o.best_epoch,
                o.initial_val_recall20,
                if o.stopped_early { ", stopped early" } else { "" }
            )
        }
        Command::Evaluate => render_table(&[pipeline::evaluate(cfg)?]),
        Command::MpBaseline => render_table(&[pipeline::mp_baseline(cfg)?]),
        Command::Ablate => render_table(&pipeline::ablate(cfg)?),
        Command::Sweep => pipeline::sweep(cfg)?,
        Command::Report => pipeline::report(cfg)?,
    })
}

/// Runs the command line and returns the process exit code.
pub fn main_with_args<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { EXIT_USAGE } else { EXIT_OK };
        }
    };
    let (map, cfg) = match resolve(&cli) {
        Ok(v) => v,
        Err(e) => {
            eprintln!("error: {e}");
            return EXIT_USAGE;
        }
    };
    let started = Instant::now();
    let result = OutputLock::acquire(&cfg.paths.output_dir).and_then(|_lock| {
        let text = execute(cli.command, &cfg)?;
        write_run_record(
            &cfg.paths.output_dir,
            &RunRecord {
                version: VERSION,
                command: cli.command.name(),
                config: map.as_map(),
                elapsed_ms: started.elapsed().as_millis(),
            },
        )?;
        Ok(text)
    });
    match result {
        Ok(text) => {
            print!("{text}");
            if !text.ends_with('\n') {
                println!();
            }
            EXIT_OK
        }
        Err(e) => {
            eprintln!("error: {e}");
            EXIT_RUNTIME
        }
    }
}
