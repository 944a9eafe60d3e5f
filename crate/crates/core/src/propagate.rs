//! Parameter-free symmetric-normalized propagation over the user–recipe graph
//! with layer averaging.
//!
//! With `Â_ur = 1/√(|𝒩_u|·|𝒩_r|)` and the joint operator `P = [[0, Â], [Âᵀ, 0]]`
//! over (users, recipes), one layer maps `e^(k)` to `e^(k+1) = P e^(k)` and the
//! final embedding is the layer mean `P̄ e^(0)` with `P̄ = (1/(K+1)) Σ_{k≤K} P^k`.
//! `P` is symmetric, hence so is `P̄`; backpropagation through it reuses the
//! forward map.
//!
//! Row sums run in ascending neighbor order on one thread, so results are
//! bit-reproducible.

use alloc::format;
use alloc::vec::Vec;

use num_traits::Float;

use crate::error::{Error, Result};
use crate::graph::{Csr, EntityKind, InteractionGraph};
use crate::matrix::Matrix;

/// The train graph with a symmetric-normalization weight on every edge,
/// stored in both orientations.
#[derive(Debug, Clone, PartialEq)]
pub struct NormalizedAdjacency {
    n_users: usize,
    n_recipes: usize,
    user_rows: Csr,
    user_weights: Vec<f64>,
    recipe_rows: Csr,
    recipe_weights: Vec<f64>,
}

pub fn normalize(graph: &InteractionGraph) -> Result<NormalizedAdjacency> {
    if let Some(node) = graph.find_isolated() {
        return Err(Error::ZeroDegree {
            kind: node.kind,
            index: node.idx as usize,
        });
    }
    let du = graph.user_degree();
    let dr = graph.recipe_degree();
    let weight = |u: usize, r: usize| 1.0 / (f64::from(du[u]) * f64::from(dr[r])).sqrt();
    let user_rows = graph.user_to_recipes().clone();
    let recipe_rows = graph.recipe_to_users().clone();
    let user_weights = (0..graph.n_users())
        .flat_map(|u| user_rows.row(u).iter().map(move |&r| weight(u, r as usize)))
        .collect();
    let recipe_weights = (0..graph.n_recipes())
        .flat_map(|r| recipe_rows.row(r).iter().map(move |&u| weight(u as usize, r)))
        .collect();
    Ok(NormalizedAdjacency {
        n_users: graph.n_users(),
        n_recipes: graph.n_recipes(),
        user_rows,
        user_weights,
        recipe_rows,
        recipe_weights,
    })
}

impl NormalizedAdjacency {
    pub fn n_users(&self) -> usize {
        self.n_users
    }

    pub fn n_recipes(&self) -> usize {
        self.n_recipes
    }

    /// Weight of edge `(u, r)`, if present.
    pub fn weight(&self, u: usize, r: u32) -> Option<f64> {
        let row = self.user_rows.row(u);
        let start = self.user_rows.offsets()[u];
        row.binary_search(&r).ok().map(|i| self.user_weights[start + i])
    }

    /// Weight of edge `(u, r)` looked up through the recipe-side orientation.
    pub fn weight_from_recipe_side(&self, u: u32, r: usize) -> Option<f64> {
        let row = self.recipe_rows.row(r);
        let start = self.recipe_rows.offsets()[r];
        row.binary_search(&u).ok().map(|i| self.recipe_weights[start + i])
    }

    /// Users gather from recipes: `out_u = Σ_{r∈𝒩_u} w(u,r)·x_r` (the `Â` block).
    pub fn users_from_recipes<T: Float>(&self, recipes: &Matrix<T>) -> Matrix<T> {
        gather(&self.user_rows, &self.user_weights, recipes)
    }

    /// Recipes gather from users: `out_r = Σ_{u∈𝒩_r} w(u,r)·x_u` (the `Âᵀ` block).
    pub fn recipes_from_users<T: Float>(&self, users: &Matrix<T>) -> Matrix<T> {
        gather(&self.recipe_rows, &self.recipe_weights, users)
    }

    fn check<T: Float>(&self, users: &Matrix<T>, recipes: &Matrix<T>) -> Result<()> {
        if users.rows() != self.n_users || recipes.rows() != self.n_recipes {
            return Err(Error::Shape {
                context: "propagate",
                expected: format!("{} users and {} recipes", self.n_users, self.n_recipes),
                actual: format!("{} and {}", users.rows(), recipes.rows()),
            });
        }
        if users.dim() != recipes.dim() {
            return Err(Error::Shape {
                context: "propagate",
                expected: format!("matching widths (users have {})", users.dim()),
                actual: format!("recipes have {}", recipes.dim()),
            });
        }
        Ok(())
    }
}

fn gather<T: Float>(rows: &Csr, weights: &[f64], src: &Matrix<T>) -> Matrix<T> {
    let mut out = Matrix::zeros(rows.n_rows(), src.dim());
    for i in 0..rows.n_rows() {
        let start = rows.offsets()[i];
        let dst = out.row_mut(i);
        for (j, &c) in rows.row(i).iter().enumerate() {
            let w = T::from(weights[start + j]).expect("weight is representable");
            for (d, &s) in dst.iter_mut().zip(src.row(c as usize)) {
                *d = *d + w * s;
            }
        }
    }
    out
}

/// Per-layer embeddings `e^(0..=K)` and their means.
#[derive(Debug, Clone, PartialEq)]
pub struct PropagationResult<T> {
    pub user_layers: Vec<Matrix<T>>,
    pub recipe_layers: Vec<Matrix<T>>,
    pub user_mean: Matrix<T>,
    pub recipe_mean: Matrix<T>,
}

/// Runs `layers` propagation steps from the given initial embeddings, keeping every layer.
pub fn propagate<T: Float>(
    adj: &NormalizedAdjacency,
    users0: &Matrix<T>,
    recipes0: &Matrix<T>,
    layers: usize,
) -> Result<PropagationResult<T>> {
    adj.check(users0, recipes0)?;
    let mut user_layers = Vec::with_capacity(layers + 1);
    let mut recipe_layers = Vec::with_capacity(layers + 1);
    user_layers.push(users0.clone());
    recipe_layers.push(recipes0.clone());
    for k in 0..layers {
        let next_u = adj.users_from_recipes(&recipe_layers[k]);
        let next_r = adj.recipes_from_users(&user_layers[k]);
        user_layers.push(next_u);
        recipe_layers.push(next_r);
    }
    let user_mean = layer_mean(&user_layers);
    let recipe_mean = layer_mean(&recipe_layers);
    Ok(PropagationResult {
        user_layers,
        recipe_layers,
        user_mean,
        recipe_mean,
    })
}

fn layer_mean<T: Float>(layers: &[Matrix<T>]) -> Matrix<T> {
    let mut mean = layers[0].clone();
    for l in &layers[1..] {
        mean.add_assign(l);
    }
    if layers.len() > 1 {
        mean.scale(T::one() / T::from(layers.len()).expect("small count"));
    }
    mean
}

/// Applies `P̄` to a joint (users, recipes) input, returning both blocks.
pub fn mean_operator_apply_joint<T: Float>(
    adj: &NormalizedAdjacency,
    layers: usize,
    users: &Matrix<T>,
    recipes: &Matrix<T>,
) -> Result<(Matrix<T>, Matrix<T>)> {
    adj.check(users, recipes)?;
    if layers == 0 {
        return Ok((users.clone(), recipes.clone()));
    }
    let mut acc_u = users.clone();
    let mut acc_r = recipes.clone();
    let mut cur_u = users.clone();
    let mut cur_r = recipes.clone();
    for _ in 0..layers {
        let next_u = adj.users_from_recipes(&cur_r);
        let next_r = adj.recipes_from_users(&cur_u);
        acc_u.add_assign(&next_u);
        acc_r.add_assign(&next_r);
        cur_u = next_u;
        cur_r = next_r;
    }
    let s = T::one() / T::from(layers + 1).expect("small count");
    acc_u.scale(s);
    acc_r.scale(s);
    Ok((acc_u, acc_r))
}

/// One block of `P̄` applied to a joint input; equal to the matching mean of
/// [`propagate`].
pub fn mean_operator_apply<T: Float>(
    adj: &NormalizedAdjacency,
    layers: usize,
    side: EntityKind,
    users: &Matrix<T>,
    recipes: &Matrix<T>,
) -> Result<Matrix<T>> {
    let (u, r) = mean_operator_apply_joint(adj, layers, users, recipes)?;
    Ok(match side {
        EntityKind::User => u,
        EntityKind::Recipe => r,
    })
}
