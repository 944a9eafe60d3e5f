use alloc::collections::BTreeSet;
use alloc::format;
use alloc::vec::Vec;

use num_traits::Float;
use serde::{Deserialize, Serialize};

use super::adam::Adam;
use super::init::xavier_init;
use super::loss::{bpr_loss, infonce_loss, reg_loss};
use super::sampler::BatchSample;
use crate::error::{Error, Result};
use crate::graph::EntityKind;
use crate::hyper::Hyperparams;
use crate::matrix::{dot, Matrix};
use crate::propagate::{mean_operator_apply_joint, NormalizedAdjacency};

/// Which parts of the dual-branch model are active.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct ModelConfig {
    /// Projected content embeddings `e^S`.
    pub content_branch: bool,
    /// Propagated learnable embeddings `e^L`.
    pub learnable_branch: bool,
    /// Cross-view InfoNCE; only takes effect with both branches.
    pub contrastive: bool,
    /// Propagation layers on the learnable branch.
    pub learnable_layers: usize,
    /// Restrict InfoNCE anchors and candidates to the entities of the batch.
    pub cl_in_batch: bool,
}

impl ModelConfig {
    pub fn full(layers: usize) -> Self {
        Self {
            content_branch: true,
            learnable_branch: true,
            contrastive: true,
            learnable_layers: layers,
            cl_in_batch: false,
        }
    }

    pub fn uses_contrastive(&self) -> bool {
        self.contrastive && self.content_branch && self.learnable_branch
    }

    pub fn n_score_terms(&self) -> usize {
        usize::from(self.content_branch) + usize::from(self.learnable_branch)
    }
}

/// Learnable parameters. Disabled parts are kept as zero-row matrices.
#[derive(Debug, Clone, PartialEq)]
pub struct Params<T> {
    /// `ē_u^(0)`, `n_users × dim`.
    pub user: Matrix<T>,
    /// `ē_r^(0)`, `n_recipes × dim`.
    pub recipe: Matrix<T>,
    /// Content bridge `W`, `source_dim × dim`.
    pub proj: Matrix<T>,
}

impl<T: Float> Params<T> {
    pub fn zeros_like(other: &Params<T>) -> Self {
        Self {
            user: Matrix::zeros(other.user.rows(), other.user.dim()),
            recipe: Matrix::zeros(other.recipe.rows(), other.recipe.dim()),
            proj: Matrix::zeros(other.proj.rows(), other.proj.dim()),
        }
    }

    pub fn tensors(&self) -> [&Matrix<T>; 3] {
        [&self.user, &self.recipe, &self.proj]
    }

    pub fn tensors_mut(&mut self) -> [&mut Matrix<T>; 3] {
        [&mut self.user, &mut self.recipe, &mut self.proj]
    }

    pub fn n_learnable_embeddings(&self) -> usize {
        self.user.as_slice().len() + self.recipe.as_slice().len()
    }

    pub fn cast<U: Float>(&self) -> Params<U> {
        Params {
            user: self.user.cast(),
            recipe: self.recipe.cast(),
            proj: self.proj.cast(),
        }
    }

    pub fn is_finite(&self) -> bool {
        self.tensors().iter().all(|m| m.is_finite())
    }
}

/// Parameters, optimizer moments and the configuration they were built for.
#[derive(Debug, Clone, PartialEq)]
pub struct ModelState<T> {
    pub config: ModelConfig,
    pub params: Params<T>,
    pub adam: Adam<T>,
}

impl<T: Float> ModelState<T> {
    /// Xavier-initialized state. Each tensor draws from its own seed derived from `seed`.
    pub fn init(
        config: ModelConfig,
        n_users: usize,
        n_recipes: usize,
        source_dim: usize,
        dim: usize,
        seed: u64,
    ) -> Self {
        let sub = |k: u64| seed.wrapping_mul(0x9E37_79B9_7F4A_7C15).wrapping_add(k);
        let (user, recipe) = if config.learnable_branch {
            (xavier_init(n_users, dim, sub(1)), xavier_init(n_recipes, dim, sub(2)))
        } else {
            (Matrix::zeros(0, dim), Matrix::zeros(0, dim))
        };
        let proj = if config.content_branch {
            xavier_init(source_dim, dim, sub(3))
        } else {
            Matrix::zeros(0, dim)
        };
        let params = Params { user, recipe, proj };
        let adam = Adam::new(&params);
        Self {
            config,
            params,
            adam,
        }
    }
}

/// Encoder embeddings after propagation (`P̄X`), `n × source_dim` per side.
#[derive(Debug, Clone, PartialEq)]
pub struct ContentFeatures<T> {
    pub users: Matrix<T>,
    pub recipes: Matrix<T>,
}

impl<T: Float> ContentFeatures<T> {
    pub fn source_dim(&self) -> usize {
        self.users.dim()
    }

    pub fn cast<U: Float>(&self) -> ContentFeatures<U> {
        ContentFeatures {
            users: self.users.cast(),
            recipes: self.recipes.cast(),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct BranchEmbeddings<T> {
    pub users: Matrix<T>,
    pub recipes: Matrix<T>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ForwardOutputs<T> {
    /// `e^S`: content branch after projection.
    pub content: Option<BranchEmbeddings<T>>,
    /// `e^L`: learnable branch after propagation.
    pub learnable: Option<BranchEmbeddings<T>>,
}

impl<T: Float> ForwardOutputs<T> {
    pub fn n_users(&self) -> usize {
        self.content
            .as_ref()
            .or(self.learnable.as_ref())
            .map_or(0, |b| b.users.rows())
    }

    pub fn n_recipes(&self) -> usize {
        self.content
            .as_ref()
            .or(self.learnable.as_ref())
            .map_or(0, |b| b.recipes.rows())
    }

    /// Number of inner-product terms in the score.
    pub fn n_score_terms(&self) -> usize {
        usize::from(self.content.is_some()) + usize::from(self.learnable.is_some())
    }
}

fn shape_err(context: &'static str, expected: usize, actual: usize) -> Error {
    Error::Shape {
        context,
        expected: format!("{expected}"),
        actual: format!("{actual}"),
    }
}

/// `e^S = (P̄X)·W` and `e^L = P̄·ē^(0)`; nothing is mutated.
pub fn forward<T: Float>(
    params: &Params<T>,
    content: Option<&ContentFeatures<T>>,
    adj: &NormalizedAdjacency,
    config: &ModelConfig,
) -> Result<ForwardOutputs<T>> {
    let content_out = if config.content_branch {
        let c = content.ok_or(Error::MissingContent)?;
        if c.users.rows() != adj.n_users() {
            return Err(shape_err("forward: content users", adj.n_users(), c.users.rows()));
        }
        if c.recipes.rows() != adj.n_recipes() {
            return Err(shape_err(
                "forward: content recipes",
                adj.n_recipes(),
                c.recipes.rows(),
            ));
        }
        Some(BranchEmbeddings {
            users: c.users.matmul(&params.proj)?,
            recipes: c.recipes.matmul(&params.proj)?,
        })
    } else {
        None
    };
    let learnable_out = if config.learnable_branch {
        let (users, recipes) =
            mean_operator_apply_joint(adj, config.learnable_layers, &params.user, &params.recipe)?;
        Some(BranchEmbeddings { users, recipes })
    } else {
        None
    };
    Ok(ForwardOutputs {
        content: content_out,
        learnable: learnable_out,
    })
}

/// `score(u, r) = ⟨e^S_r, e^S_u⟩ + ⟨e^L_r, e^L_u⟩` over every recipe, writing into `out`.
pub fn score_all<T: Float>(outputs: &ForwardOutputs<T>, user: usize, out: &mut [T]) {
    out.iter_mut().for_each(|v| *v = T::zero());
    for branch in [&outputs.content, &outputs.learnable].into_iter().flatten() {
        let eu = branch.users.row(user);
        for (r, o) in out.iter_mut().enumerate() {
            *o = *o + dot(branch.recipes.row(r), eu);
        }
    }
}

/// Loss components as they enter the total.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct LossBreakdown<T> {
    pub total: T,
    pub bpr_content: T,
    pub bpr_learnable: T,
    /// Unweighted `L_CL = L_CL^U + L_CL^R`.
    pub contrastive: T,
    /// Weighted regularization term `λ_REG·Σ‖ē^(0)‖²`.
    pub reg: T,
}

fn batch_entities(batch: &BatchSample) -> (Vec<u32>, Vec<u32>) {
    let users: BTreeSet<u32> = batch.triplets.iter().map(|t| t.user).collect();
    let recipes: BTreeSet<u32> = batch
        .triplets
        .iter()
        .flat_map(|t| [t.pos, t.neg])
        .collect();
    (users.into_iter().collect(), recipes.into_iter().collect())
}

/// `L_total = BPR^S + BPR^L + λ_CL·L_CL + λ_REG·Σ‖ē^(0)‖²` and its exact
/// gradient with respect to every parameter tensor.
///
/// Branch gradients flow back through `P̄` (self-adjoint) to `ē^(0)` and
/// through the projection to `W` as `XᵀG`.
pub fn total_loss_and_grads<T: Float>(
    params: &Params<T>,
    content: Option<&ContentFeatures<T>>,
    adj: &NormalizedAdjacency,
    batch: &BatchSample,
    hp: &Hyperparams,
    config: &ModelConfig,
) -> Result<(LossBreakdown<T>, Params<T>)> {
    let cast = |x: f64| T::from(x).expect("representable");
    let fwd = forward(params, content, adj, config)?;
    let mut losses = LossBreakdown {
        total: T::zero(),
        bpr_content: T::zero(),
        bpr_learnable: T::zero(),
        contrastive: T::zero(),
        reg: T::zero(),
    };
    let mut grads = Params::zeros_like(params);

    let mut g_content = fwd.content.as_ref().map(|s| {
        let out = bpr_loss(&s.users, &s.recipes, batch);
        losses.bpr_content = out.loss;
        (out.grad_users, out.grad_recipes)
    });
    let mut g_learn = fwd.learnable.as_ref().map(|l| {
        let out = bpr_loss(&l.users, &l.recipes, batch);
        losses.bpr_learnable = out.loss;
        (out.grad_users, out.grad_recipes)
    });

    if config.uses_contrastive() {
        let s = fwd.content.as_ref().expect("content branch");
        let l = fwd.learnable.as_ref().expect("learnable branch");
        let (bu, br) = batch_entities(batch);
        let (sub_u, sub_r) = if config.cl_in_batch {
            (Some(bu.as_slice()), Some(br.as_slice()))
        } else {
            (None, None)
        };
        let tau = cast(hp.tau);
        let lambda = cast(hp.lambda_cl);
        let cu = infonce_loss(&s.users, &l.users, tau, EntityKind::User, sub_u)?;
        let cr = infonce_loss(&s.recipes, &l.recipes, tau, EntityKind::Recipe, sub_r)?;
        losses.contrastive = cu.loss + cr.loss;
        if lambda != T::zero() {
            let (gsu, gsr) = g_content.as_mut().expect("content grads");
            gsu.axpy(lambda, &cu.grad_s);
            gsr.axpy(lambda, &cr.grad_s);
            let (glu, glr) = g_learn.as_mut().expect("learnable grads");
            glu.axpy(lambda, &cu.grad_l);
            glr.axpy(lambda, &cr.grad_l);
        }
    }

    if let Some((gu, gr)) = &g_content {
        let c = content.expect("checked in forward");
        c.users.add_transpose_matmul(gu, &mut grads.proj)?;
        c.recipes.add_transpose_matmul(gr, &mut grads.proj)?;
    }
    if let Some((gu, gr)) = &g_learn {
        let (pu, pr) = mean_operator_apply_joint(adj, config.learnable_layers, gu, gr)?;
        grads.user = pu;
        grads.recipe = pr;
        let (reg, ru, rr) = reg_loss(&params.user, &params.recipe, cast(hp.lambda_reg));
        losses.reg = reg;
        grads.user.add_assign(&ru);
        grads.recipe.add_assign(&rr);
    }

    losses.total = losses.bpr_content
        + losses.bpr_learnable
        + cast(hp.lambda_cl)
            * if config.uses_contrastive() {
                losses.contrastive
            } else {
                T::zero()
            }
        + losses.reg;
    if !losses.total.is_finite() {
        return Err(Error::NonFinite(format!(
            "total={:?} bpr_s={:?} bpr_l={:?} cl={:?} reg={:?}",
            losses.total.to_f64(),
            losses.bpr_content.to_f64(),
            losses.bpr_learnable.to_f64(),
            losses.contrastive.to_f64(),
            losses.reg.to_f64()
        )));
    }
    Ok((losses, grads))
}
