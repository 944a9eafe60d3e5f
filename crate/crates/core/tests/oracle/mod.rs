//! Dense, naive reference implementations and random instance generators.
//! Only `checks` calls into the library; everything else is independent of it.

#![allow(dead_code)]

pub mod checks;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub type Rows = Vec<Vec<f64>>;

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

pub fn random_rows(rng: &mut impl Rng, n: usize, d: usize, scale: f64) -> Rows {
    (0..n)
        .map(|_| (0..d).map(|_| rng.gen_range(-scale..scale)).collect())
        .collect()
}

/// Random bipartite edge list where every node has at least one edge.
/// With `leave_negative`, every user also misses at least one recipe.
pub fn random_edges(
    rng: &mut impl Rng,
    n_users: usize,
    n_recipes: usize,
    density: f64,
    leave_negative: bool,
) -> Vec<(u32, u32)> {
    let mut adj = vec![vec![false; n_recipes]; n_users];
    for row in adj.iter_mut() {
        for cell in row.iter_mut() {
            *cell = rng.gen_bool(density);
        }
    }
    for (u, row) in adj.iter_mut().enumerate() {
        if !row.iter().any(|&b| b) {
            row[rng.gen_range(0..n_recipes)] = true;
        }
        if leave_negative && row.iter().all(|&b| b) {
            row[(u + 1) % n_recipes] = false;
        }
    }
    for r in 0..n_recipes {
        if !(0..n_users).any(|u| adj[u][r]) {
            let mut u = rng.gen_range(0..n_users);
            if leave_negative {
                // prefer a user that keeps a missing recipe afterwards
                for _ in 0..n_users {
                    if adj[u].iter().filter(|&&b| !b).count() > 1 {
                        break;
                    }
                    u = (u + 1) % n_users;
                }
            }
            adj[u][r] = true;
        }
    }
    let mut edges = Vec::new();
    for (u, row) in adj.iter().enumerate() {
        for (r, &b) in row.iter().enumerate() {
            if b {
                edges.push((u as u32, r as u32));
            }
        }
    }
    edges
}

/// Dense `(1/(K+1)) Σ_k Â^k` over the joint `(n_u + n_r)`-node graph with
/// `Â = D^{-1/2} A D^{-1/2}`.
pub fn dense_mean_operator(n_users: usize, n_recipes: usize, edges: &[(u32, u32)], k: usize) -> Rows {
    let n = n_users + n_recipes;
    let mut a = vec![vec![0.0; n]; n];
    for &(u, r) in edges {
        let (i, j) = (u as usize, n_users + r as usize);
        a[i][j] = 1.0;
        a[j][i] = 1.0;
    }
    let deg: Vec<f64> = a.iter().map(|row| row.iter().sum()).collect();
    let mut norm = vec![vec![0.0; n]; n];
    for i in 0..n {
        for j in 0..n {
            if a[i][j] != 0.0 {
                norm[i][j] = 1.0 / (deg[i] * deg[j]).sqrt();
            }
        }
    }
    let mut power = identity(n);
    let mut sum = identity(n);
    for _ in 0..k {
        power = matmul(&norm, &power);
        for i in 0..n {
            for j in 0..n {
                sum[i][j] += power[i][j];
            }
        }
    }
    let w = 1.0 / (k as f64 + 1.0);
    for row in sum.iter_mut() {
        for v in row.iter_mut() {
            *v *= w;
        }
    }
    sum
}

pub fn identity(n: usize) -> Rows {
    (0..n)
        .map(|i| (0..n).map(|j| if i == j { 1.0 } else { 0.0 }).collect())
        .collect()
}

pub fn matmul(a: &Rows, b: &Rows) -> Rows {
    let inner = b.len();
    let cols = b.first().map_or(0, Vec::len);
    a.iter()
        .map(|row| {
            (0..cols)
                .map(|j| (0..inner).map(|t| row[t] * b[t][j]).sum())
                .collect()
        })
        .collect()
}

pub fn stack(a: &Rows, b: &Rows) -> Rows {
    a.iter().chain(b.iter()).cloned().collect()
}

/// Dense propagation of the stacked `[users; recipes]` embeddings.
pub fn dense_propagate(
    n_users: usize,
    n_recipes: usize,
    edges: &[(u32, u32)],
    users: &Rows,
    recipes: &Rows,
    k: usize,
) -> (Rows, Rows) {
    let m = dense_mean_operator(n_users, n_recipes, edges, k);
    let out = matmul(&m, &stack(users, recipes));
    let (u, r) = out.split_at(n_users);
    (u.to_vec(), r.to_vec())
}

pub fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

pub fn cosine(a: &[f64], b: &[f64]) -> f64 {
    dot(a, b) / (dot(a, a).sqrt() * dot(b, b).sqrt())
}

/// `−(1/|B|) Σ ln σ(⟨u,p⟩ − ⟨u,n⟩)` written out literally.
pub fn bpr(users: &Rows, recipes: &Rows, triplets: &[(usize, usize, usize)]) -> f64 {
    let total: f64 = triplets
        .iter()
        .map(|&(u, p, n)| {
            let x = dot(&users[u], &recipes[p]) - dot(&users[u], &recipes[n]);
            -(1.0 / (1.0 + (-x).exp())).ln()
        })
        .sum();
    total / triplets.len() as f64
}

/// Per-anchor InfoNCE over all rows, literally.
pub fn infonce_per_anchor(s: &Rows, l: &Rows, tau: f64) -> Vec<f64> {
    (0..s.len())
        .map(|i| {
            let num = (cosine(&s[i], &l[i]) / tau).exp();
            let den: f64 = (0..l.len()).map(|j| (cosine(&s[i], &l[j]) / tau).exp()).sum();
            -(num / den).ln()
        })
        .collect()
}

pub fn infonce(s: &Rows, l: &Rows, tau: f64) -> f64 {
    infonce_per_anchor(s, l, tau).iter().sum()
}

pub fn sq_norm(m: &Rows) -> f64 {
    m.iter().flatten().map(|v| v * v).sum()
}

/// Everything fixed in a gradient-check instance except the parameters.
#[derive(Debug, Clone)]
pub struct GradInstance {
    pub n_users: usize,
    pub n_recipes: usize,
    pub edges: Vec<(u32, u32)>,
    pub raw_users: Rows,
    pub raw_recipes: Rows,
    pub triplets: Vec<(usize, usize, usize)>,
    pub layers: usize,
    pub tau: f64,
    pub lambda_cl: f64,
    pub lambda_reg: f64,
    pub dim: usize,
}

#[derive(Debug, Clone)]
pub struct DenseParams {
    pub user: Rows,
    pub recipe: Rows,
    pub proj: Rows,
}

#[derive(Debug, Clone, Copy)]
pub struct DenseLosses {
    pub bpr_s: f64,
    pub bpr_l: f64,
    pub cl: f64,
    pub reg: f64,
    pub total: f64,
}

pub fn random_instance(seed: u64) -> (GradInstance, DenseParams) {
    let mut rng = rng(seed);
    let n_users = rng.gen_range(2..=10);
    let n_recipes = rng.gen_range(3..=10);
    let source_dim = rng.gen_range(3..=6);
    let dim = 4;
    let edges = random_edges(&mut rng, n_users, n_recipes, 0.35, true);
    let mut triplets = Vec::new();
    for _ in 0..rng.gen_range(1..=8) {
        let &(u, p) = &edges[rng.gen_range(0..edges.len())];
        let n = loop {
            let n = rng.gen_range(0..n_recipes as u32);
            if !edges.contains(&(u, n)) {
                break n;
            }
        };
        triplets.push((u as usize, p as usize, n as usize));
    }
    let inst = GradInstance {
        n_users,
        n_recipes,
        raw_users: random_rows(&mut rng, n_users, source_dim, 1.0),
        raw_recipes: random_rows(&mut rng, n_recipes, source_dim, 1.0),
        edges,
        triplets,
        layers: rng.gen_range(0..=3),
        tau: [0.3, 0.5, 0.7][rng.gen_range(0..3)],
        lambda_cl: [0.1, 0.2, 0.3, 0.5][rng.gen_range(0..4)],
        lambda_reg: 0.05,
        dim,
    };
    let params = DenseParams {
        user: random_rows(&mut rng, n_users, dim, 0.7),
        recipe: random_rows(&mut rng, n_recipes, dim, 0.7),
        proj: random_rows(&mut rng, source_dim, dim, 0.7),
    };
    (inst, params)
}

/// `(e^S, e^L)` for users and recipes: `(P̄X)W` and `P̄ē`.
pub fn dense_forward(inst: &GradInstance, p: &DenseParams) -> ((Rows, Rows), (Rows, Rows)) {
    let (xu, xr) = dense_propagate(
        inst.n_users,
        inst.n_recipes,
        &inst.edges,
        &inst.raw_users,
        &inst.raw_recipes,
        inst.layers,
    );
    let s = (matmul(&xu, &p.proj), matmul(&xr, &p.proj));
    let l = dense_propagate(inst.n_users, inst.n_recipes, &inst.edges, &p.user, &p.recipe, inst.layers);
    (s, l)
}

pub fn dense_losses(inst: &GradInstance, p: &DenseParams) -> DenseLosses {
    let ((su, sr), (lu, lr)) = dense_forward(inst, p);
    let bpr_s = bpr(&su, &sr, &inst.triplets);
    let bpr_l = bpr(&lu, &lr, &inst.triplets);
    let cl = infonce(&su, &lu, inst.tau) + infonce(&sr, &lr, inst.tau);
    let reg = inst.lambda_reg * (sq_norm(&p.user) + sq_norm(&p.recipe));
    DenseLosses {
        bpr_s,
        bpr_l,
        cl,
        reg,
        total: bpr_s + bpr_l + inst.lambda_cl * cl + reg,
    }
}

/// Central differences of `f` with respect to every entry of `m`.
pub fn central_diff(m: &Rows, h: f64, mut f: impl FnMut(&Rows) -> f64) -> Rows {
    let mut work = m.clone();
    let mut out = vec![vec![0.0; m.first().map_or(0, Vec::len)]; m.len()];
    for i in 0..m.len() {
        for j in 0..m[i].len() {
            let orig = work[i][j];
            work[i][j] = orig + h;
            let plus = f(&work);
            work[i][j] = orig - h;
            let minus = f(&work);
            work[i][j] = orig;
            out[i][j] = (plus - minus) / (2.0 * h);
        }
    }
    out
}

/// `‖a − b‖ / max(‖a‖, ‖b‖)`, and 0 when both are negligible.
pub fn rel_err(a: &Rows, b: &Rows) -> f64 {
    let diff: f64 = a
        .iter()
        .flatten()
        .zip(b.iter().flatten())
        .map(|(x, y)| (x - y) * (x - y))
        .sum::<f64>()
        .sqrt();
    let scale = sq_norm(a).sqrt().max(sq_norm(b).sqrt());
    if scale < 1e-12 {
        0.0
    } else {
        diff / scale
    }
}

/// Ranking by sorting every unmasked index: descending score, then ascending index.
pub fn brute_topk(scores: &[f32], mask: &[u32], k: usize) -> Vec<u32> {
    let mut idx: Vec<u32> = (0..scores.len() as u32).filter(|i| !mask.contains(i)).collect();
    idx.sort_by(|&a, &b| {
        scores[b as usize]
            .partial_cmp(&scores[a as usize])
            .unwrap()
            .then(a.cmp(&b))
    });
    idx.truncate(k);
    idx
}

pub fn brute_recall(ranked: &[u32], test: &[u32], k: usize) -> f64 {
    let hits = ranked.iter().take(k).filter(|r| test.contains(r)).count();
    hits as f64 / test.len() as f64
}

pub fn brute_ndcg(ranked: &[u32], test: &[u32], k: usize) -> f64 {
    let mut dcg = 0.0;
    for (i, r) in ranked.iter().take(k).enumerate() {
        if test.contains(r) {
            dcg += 1.0 / ((i + 2) as f64).log2();
        }
    }
    let mut idcg = 0.0;
    for i in 0..k.min(test.len()) {
        idcg += 1.0 / ((i + 2) as f64).log2();
    }
    dcg / idcg
}

/// Random evaluation case: scores with deliberate ties, a train mask and a
/// disjoint non-empty test set.
pub struct MetricCase {
    pub scores: Vec<f32>,
    pub mask: Vec<u32>,
    pub test: Vec<u32>,
    pub k: usize,
}

pub fn random_metric_case(rng: &mut impl Rng, n_recipes: usize) -> MetricCase {
    let scores = (0..n_recipes)
        .map(|_| {
            if rng.gen_bool(0.2) {
                0.5
            } else {
                rng.gen_range(-1.0f32..1.0)
            }
        })
        .collect();
    let mut mask = Vec::new();
    let mut test = Vec::new();
    for r in 0..n_recipes as u32 {
        match rng.gen_range(0..10) {
            0 | 1 => mask.push(r),
            2 | 3 => test.push(r),
            _ => {}
        }
    }
    if test.is_empty() {
        let r = mask.pop().unwrap_or(0);
        test.push(r);
    }
    MetricCase {
        scores,
        mask,
        test,
        k: rng.gen_range(1..=n_recipes + 2),
    }
}
