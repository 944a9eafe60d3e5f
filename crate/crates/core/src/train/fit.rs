use alloc::string::{String, ToString};
use alloc::vec::Vec;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::model::{forward, total_loss_and_grads, ContentFeatures, ForwardOutputs, ModelConfig, ModelState};
use super::sampler::sample_negatives;
use crate::dataset::{Dataset, SplitKind};
use crate::error::{Error, Result};
use crate::evaluate::{evaluate_model, Scorer};
use crate::hyper::Hyperparams;
use crate::propagate::NormalizedAdjacency;

/// One row of the training log.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EpochLog {
    pub epoch: usize,
    pub total: f64,
    pub bpr_content: f64,
    pub bpr_learnable: f64,
    pub contrastive: f64,
    pub reg: f64,
    pub val_recall20: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct FitOutcome {
    /// State with the best validation Recall@20 (the initial state if no epoch improved).
    pub state: ModelState<f32>,
    pub log: Vec<EpochLog>,
    /// Validation Recall@20 before the first update.
    pub initial_val_recall20: f64,
    pub best_epoch: usize,
    pub best_val_recall20: f64,
    pub stopped_early: bool,
    /// Set when training aborted on a non-finite loss.
    pub diverged: Option<String>,
}

/// Forward outputs of a trained state, ready for scoring.
#[derive(Debug, Clone, PartialEq)]
pub struct TrainedModel {
    pub outputs: ForwardOutputs<f32>,
}

impl TrainedModel {
    pub fn new(
        state: &ModelState<f32>,
        content: Option<&ContentFeatures<f32>>,
        adj: &NormalizedAdjacency,
    ) -> Result<Self> {
        Ok(Self {
            outputs: forward(&state.params, content, adj, &state.config)?,
        })
    }

    pub fn n_score_terms(&self) -> usize {
        self.outputs.n_score_terms()
    }
}

impl Scorer for TrainedModel {
    fn n_recipes(&self) -> usize {
        self.outputs.n_recipes()
    }

    fn score_user(&self, user: usize, out: &mut [f32]) {
        self.outputs.score_user(user, out);
    }
}

const SAMPLER_STREAM: u64 = 0x005E_ED0F_BA7C;

/// Mini-batch training with early stopping on validation Recall@20.
///
/// Every epoch shuffles the train edges, cuts them into batches of
/// `hp.train_batch`, draws one negative per edge (shared by both branches)
/// and takes one Adam step per batch. Training stops after `hp.patience`
/// epochs without improvement (0 disables the rule) or after `hp.epochs`.
pub fn fit(
    dataset: &Dataset,
    adj: &NormalizedAdjacency,
    content: Option<&ContentFeatures<f32>>,
    hp: &Hyperparams,
    config: &ModelConfig,
) -> Result<FitOutcome> {
    hp.validate()?;
    let source_dim = content.map_or(0, ContentFeatures::source_dim);
    if config.content_branch && content.is_none() {
        return Err(Error::MissingContent);
    }
    let mut state = ModelState::<f32>::init(
        *config,
        dataset.n_users(),
        dataset.n_recipes(),
        source_dim,
        hp.dim,
        hp.seed,
    );
    let has_val = !dataset.val_pairs.is_empty();
    let validate = |state: &ModelState<f32>| -> Result<f64> {
        if !has_val {
            return Ok(0.0);
        }
        let model = TrainedModel::new(state, content, adj)?;
        let m = evaluate_model(&model, dataset, SplitKind::Val, &[20], hp.eval_batch)?;
        Ok(m.recall[0])
    };

    let initial = validate(&state)?;
    let mut outcome = FitOutcome {
        state: state.clone(),
        log: Vec::new(),
        initial_val_recall20: initial,
        best_epoch: 0,
        best_val_recall20: initial,
        stopped_early: false,
        diverged: None,
    };

    let mut rng = ChaCha8Rng::seed_from_u64(hp.seed ^ SAMPLER_STREAM);
    let mut edges: Vec<(u32, u32)> = dataset.graph_train.edges().collect();
    let mut since_best = 0usize;
    for epoch in 1..=hp.epochs {
        edges.shuffle(&mut rng);
        let mut sums = [0.0f64; 5];
        let mut n_batches = 0usize;
        for chunk in edges.chunks(hp.train_batch) {
            let batch = sample_negatives(&dataset.graph_train, chunk, &mut rng)?;
            let (losses, grads) =
                match total_loss_and_grads(&state.params, content, adj, &batch, hp, config) {
                    Ok(v) => v,
                    Err(Error::NonFinite(msg)) => {
                        outcome.diverged = Some(alloc::format!("epoch {epoch}: {msg}"));
                        return Ok(outcome);
                    }
                    Err(e) => return Err(e),
                };
            state.adam.step(&mut state.params, &grads, hp.lr);
            if !state.params.is_finite() {
                outcome.diverged =
                    Some(alloc::format!("epoch {epoch}: non-finite parameters after update"));
                return Ok(outcome);
            }
            for (s, v) in sums.iter_mut().zip([
                losses.total,
                losses.bpr_content,
                losses.bpr_learnable,
                losses.contrastive,
                losses.reg,
            ]) {
                *s += f64::from(v);
            }
            n_batches += 1;
        }
        let nb = n_batches.max(1) as f64;
        let val = validate(&state)?;
        outcome.log.push(EpochLog {
            epoch,
            total: sums[0] / nb,
            bpr_content: sums[1] / nb,
            bpr_learnable: sums[2] / nb,
            contrastive: sums[3] / nb,
            reg: sums[4] / nb,
            val_recall20: val,
        });
        if val > outcome.best_val_recall20 || !has_val {
            outcome.best_val_recall20 = val;
            outcome.best_epoch = epoch;
            outcome.state = state.clone();
            since_best = 0;
        } else {
            since_best += 1;
            if hp.patience > 0 && since_best >= hp.patience {
                outcome.stopped_early = true;
                break;
            }
        }
    }
    Ok(outcome)
}

impl FitOutcome {
    /// The log as CSV: `epoch,total,bpr_content,bpr_learnable,contrastive,reg,val_recall20`.
    pub fn log_csv(&self) -> String {
        let mut out =
            String::from("epoch,total,bpr_content,bpr_learnable,contrastive,reg,val_recall20\n");
        for e in &self.log {
            out.push_str(&alloc::format!(
                "{},{},{},{},{},{},{}\n",
                e.epoch, e.total, e.bpr_content, e.bpr_learnable, e.contrastive, e.reg, e.val_recall20
            ));
        }
        if let Some(d) = &self.diverged {
            out.push_str("# diverged: ");
            out.push_str(&d.to_string());
            out.push('\n');
        }
        out
    }
}
