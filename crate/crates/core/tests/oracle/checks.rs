//! Library-versus-oracle comparisons, one random case per call.

use rand::Rng;
use tesmr_core::evaluate::{ndcg_at_k, rank_topk, recall_at_k};
use tesmr_core::graph::EntityKind;
use tesmr_core::hyper::default_hyperparams;
use tesmr_core::propagate::{mean_operator_apply_joint, normalize, propagate};
use tesmr_core::train::{
    bpr_loss, infonce_loss, reg_loss, total_loss_and_grads, BatchSample, ContentFeatures,
    ModelConfig, Params, Triplet,
};
use tesmr_core::{Hyperparams, InteractionGraph, Matrix};

use super::*;

pub fn to_matrix(rows: &Rows, dim: usize) -> Matrix<f64> {
    if rows.is_empty() {
        return Matrix::zeros(0, dim);
    }
    Matrix::from_rows(rows).unwrap()
}

pub fn to_rows(m: &Matrix<f64>) -> Rows {
    m.iter_rows().map(<[f64]>::to_vec).collect()
}

fn max_abs(a: &Rows, b: &Rows) -> f64 {
    a.iter()
        .flatten()
        .zip(b.iter().flatten())
        .map(|(x, y)| (x - y).abs())
        .fold(0.0, f64::max)
}

/// Sparse propagation against the dense operator on a random graph with at
/// most 50 nodes. Returns the max-abs error over both layer means.
pub fn propagation_case(seed: u64) -> f64 {
    let mut rng = rng(seed);
    let n_users = rng.gen_range(1..=25);
    let n_recipes = rng.gen_range(1..=25);
    let dim = rng.gen_range(1..=8);
    let k = rng.gen_range(0..=3);
    let density = rng.gen_range(0.05..0.6);
    let edges = random_edges(&mut rng, n_users, n_recipes, density, false);
    let xu = random_rows(&mut rng, n_users, dim, 1.0);
    let xr = random_rows(&mut rng, n_recipes, dim, 1.0);

    let g = InteractionGraph::from_edges(n_users, n_recipes, &edges).unwrap();
    let adj = normalize(&g).unwrap();
    let out = propagate(&adj, &to_matrix(&xu, dim), &to_matrix(&xr, dim), k).unwrap();
    let (du, dr) = dense_propagate(n_users, n_recipes, &edges, &xu, &xr, k);
    max_abs(&to_rows(&out.user_mean), &du).max(max_abs(&to_rows(&out.recipe_mean), &dr))
}

/// `(P̄X)W` against `P̄(XW)`; returns `‖a − b‖ / ‖b‖`.
pub fn commutation_case(seed: u64) -> f64 {
    let mut rng = rng(seed);
    let n_users = rng.gen_range(2..=30);
    let n_recipes = rng.gen_range(2..=30);
    let source_dim = rng.gen_range(2..=16);
    let dim = rng.gen_range(1..=8);
    let k = rng.gen_range(0..=3);
    let edges = random_edges(&mut rng, n_users, n_recipes, 0.2, false);
    let adj = normalize(&InteractionGraph::from_edges(n_users, n_recipes, &edges).unwrap()).unwrap();
    let xu: Matrix<f32> = to_matrix(&random_rows(&mut rng, n_users, source_dim, 1.0), source_dim).cast();
    let xr: Matrix<f32> = to_matrix(&random_rows(&mut rng, n_recipes, source_dim, 1.0), source_dim).cast();
    let w: Matrix<f32> = to_matrix(&random_rows(&mut rng, source_dim, dim, 1.0), dim).cast();

    let (pu, pr) = mean_operator_apply_joint(&adj, k, &xu, &xr).unwrap();
    let first = [pu.matmul(&w).unwrap(), pr.matmul(&w).unwrap()];
    let (qu, qr) =
        mean_operator_apply_joint(&adj, k, &xu.matmul(&w).unwrap(), &xr.matmul(&w).unwrap()).unwrap();
    let second = [qu, qr];
    let mut diff = 0.0f64;
    let mut scale = 0.0f64;
    for (a, b) in first.iter().zip(&second) {
        for (x, y) in a.as_slice().iter().zip(b.as_slice()) {
            diff += f64::from(x - y).powi(2);
            scale += f64::from(*y).powi(2);
        }
    }
    (diff / scale.max(f64::MIN_POSITIVE)).sqrt()
}

pub fn batch(triplets: &[(usize, usize, usize)]) -> BatchSample {
    BatchSample {
        triplets: triplets
            .iter()
            .map(|&(u, p, n)| Triplet {
                user: u as u32,
                pos: p as u32,
                neg: n as u32,
            })
            .collect(),
    }
}

pub const FD_STEP: f64 = 1e-4;

/// Relative errors between analytic and finite-difference gradients for
/// every loss component and every parameter tensor of one random instance.
pub fn gradient_case(seed: u64) -> Vec<(&'static str, f64)> {
    let (inst, p) = random_instance(seed);
    let h = FD_STEP;
    let b = batch(&inst.triplets);
    let mut errs = Vec::new();

    // Component losses against their oracles, w.r.t. the branch embeddings.
    let ((su, sr), (lu, lr)) = dense_forward(&inst, &p);
    let d = inst.dim;
    let out = bpr_loss(&to_matrix(&su, d), &to_matrix(&sr, d), &b);
    let fd_u = central_diff(&su, h, |m| bpr(m, &sr, &inst.triplets));
    let fd_r = central_diff(&sr, h, |m| bpr(&su, m, &inst.triplets));
    errs.push(("bpr_s/users", rel_err(&to_rows(&out.grad_users), &fd_u)));
    errs.push(("bpr_s/recipes", rel_err(&to_rows(&out.grad_recipes), &fd_r)));
    let out = bpr_loss(&to_matrix(&lu, d), &to_matrix(&lr, d), &b);
    let fd_u = central_diff(&lu, h, |m| bpr(m, &lr, &inst.triplets));
    let fd_r = central_diff(&lr, h, |m| bpr(&lu, m, &inst.triplets));
    errs.push(("bpr_l/users", rel_err(&to_rows(&out.grad_users), &fd_u)));
    errs.push(("bpr_l/recipes", rel_err(&to_rows(&out.grad_recipes), &fd_r)));

    for (side, s, l) in [(EntityKind::User, &su, &lu), (EntityKind::Recipe, &sr, &lr)] {
        let out = infonce_loss(&to_matrix(s, d), &to_matrix(l, d), inst.tau, side, None).unwrap();
        let fd_s = central_diff(s, h, |m| infonce(m, l, inst.tau));
        let fd_l = central_diff(l, h, |m| infonce(s, m, inst.tau));
        let (ns, nl) = match side {
            EntityKind::User => ("cl_user/s", "cl_user/l"),
            EntityKind::Recipe => ("cl_recipe/s", "cl_recipe/l"),
        };
        errs.push((ns, rel_err(&to_rows(&out.grad_s), &fd_s)));
        errs.push((nl, rel_err(&to_rows(&out.grad_l), &fd_l)));
    }

    let (_, gu, gr) = reg_loss(&to_matrix(&p.user, d), &to_matrix(&p.recipe, d), inst.lambda_reg);
    let fd_u = central_diff(&p.user, h, |m| inst.lambda_reg * (sq_norm(m) + sq_norm(&p.recipe)));
    let fd_r = central_diff(&p.recipe, h, |m| inst.lambda_reg * (sq_norm(&p.user) + sq_norm(m)));
    errs.push(("reg/users", rel_err(&to_rows(&gu), &fd_u)));
    errs.push(("reg/recipes", rel_err(&to_rows(&gr), &fd_r)));

    // Total loss, end to end through propagation and projection.
    let g = InteractionGraph::from_edges(inst.n_users, inst.n_recipes, &inst.edges).unwrap();
    let adj = normalize(&g).unwrap();
    let source_dim = inst.raw_users[0].len();
    let (xu, xr) = mean_operator_apply_joint(
        &adj,
        inst.layers,
        &to_matrix(&inst.raw_users, source_dim),
        &to_matrix(&inst.raw_recipes, source_dim),
    )
    .unwrap();
    let content = ContentFeatures { users: xu, recipes: xr };
    let params = Params {
        user: to_matrix(&p.user, d),
        recipe: to_matrix(&p.recipe, d),
        proj: to_matrix(&p.proj, d),
    };
    let hp = Hyperparams {
        tau: inst.tau,
        lambda_cl: inst.lambda_cl,
        lambda_reg: inst.lambda_reg,
        layers: inst.layers,
        dim: d,
        ..default_hyperparams()
    };
    let config = ModelConfig::full(inst.layers);
    let (losses, grads) =
        total_loss_and_grads(&params, Some(&content), &adj, &b, &hp, &config).unwrap();
    let want = dense_losses(&inst, &p);
    let rel = |a: f64, b: f64| (a - b).abs() / b.abs().max(1e-12);
    errs.push(("value/total", rel(losses.total, want.total)));

    let fd_user = central_diff(&p.user, h, |m| {
        dense_losses(&inst, &DenseParams { user: m.clone(), ..p.clone() }).total
    });
    let fd_recipe = central_diff(&p.recipe, h, |m| {
        dense_losses(&inst, &DenseParams { recipe: m.clone(), ..p.clone() }).total
    });
    let fd_proj = central_diff(&p.proj, h, |m| {
        dense_losses(&inst, &DenseParams { proj: m.clone(), ..p.clone() }).total
    });
    errs.push(("total/user", rel_err(&to_rows(&grads.user), &fd_user)));
    errs.push(("total/recipe", rel_err(&to_rows(&grads.recipe), &fd_recipe)));
    errs.push(("total/proj", rel_err(&to_rows(&grads.proj), &fd_proj)));
    errs
}

/// Library ranking and metrics against brute force on one random case.
/// Returns `false` on any mismatch (exact comparison).
pub fn metric_case(seed: u64) -> bool {
    let mut rng = rng(seed);
    let n_users = rng.gen_range(1..=20);
    let n_recipes = rng.gen_range(1..=30);
    (0..n_users).all(|_| {
        let c = random_metric_case(&mut rng, n_recipes);
        let mut test = c.test.clone();
        test.sort_unstable();
        let lib_top = rank_topk(&c.scores, &c.mask, c.k);
        let brute = brute_topk(&c.scores, &c.mask, c.k);
        lib_top == brute
            && recall_at_k(&lib_top, &test) == brute_recall(&brute, &c.test, c.k)
            && ndcg_at_k(&lib_top, &test, c.k) == brute_ndcg(&brute, &c.test, c.k)
    })
}
