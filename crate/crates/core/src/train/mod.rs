//! Dual-branch model, losses with analytic gradients, Adam and the training loop.
//!
//! The content branch projects propagated encoder embeddings into the model
//! space, `e^S = (P̄X)W`. The learnable branch propagates free initial
//! embeddings, `e^L = P̄ē^(0)`. Training minimizes
//! `BPR(e^S) + BPR(e^L) + λ_CL·(InfoNCE_users + InfoNCE_recipes) + λ_REG·‖ē^(0)‖²`
//! and recipes are scored with `⟨e^S_r, e^S_u⟩ + ⟨e^L_r, e^L_u⟩`.

mod adam;
mod checkpoint;
mod fit;
mod init;
mod loss;
mod model;
mod sampler;

pub use adam::{Adam, ADAM_BETA1, ADAM_BETA2, ADAM_EPS};
pub use checkpoint::{decode_checkpoint, encode_checkpoint, CHECKPOINT_MAGIC, CHECKPOINT_VERSION};
pub use fit::{fit, EpochLog, FitOutcome, TrainedModel};
pub use init::{xavier_bound, xavier_init};
pub use loss::{bpr_loss, infonce_loss, reg_loss, sigmoid, softplus, BprOutput, InfoNceOutput};
pub use model::{
    forward, score_all, total_loss_and_grads, BranchEmbeddings, ContentFeatures, ForwardOutputs,
    LossBreakdown, ModelConfig, ModelState, Params,
};
pub use sampler::{sample_negatives, BatchSample, Triplet};
