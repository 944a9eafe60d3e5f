use alloc::vec;
use alloc::vec::Vec;

use num_traits::Float;

use super::sampler::BatchSample;
use crate::error::{Error, Result};
use crate::graph::EntityKind;
use crate::matrix::{dot, norm, Matrix};

/// `ln(1 + eˣ)` without overflow.
#[inline]
pub fn softplus<T: Float>(x: T) -> T {
    x.max(T::zero()) + (-x.abs()).exp().ln_1p()
}

#[inline]
pub fn sigmoid<T: Float>(x: T) -> T {
    if x >= T::zero() {
        T::one() / (T::one() + (-x).exp())
    } else {
        let e = x.exp();
        e / (T::one() + e)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct BprOutput<T> {
    pub loss: T,
    pub grad_users: Matrix<T>,
    pub grad_recipes: Matrix<T>,
}

/// Mean of `−ln σ(⟨u, pos⟩ − ⟨u, neg⟩)` over the batch, with gradients with
/// respect to both embedding tables (zero outside the batch rows).
pub fn bpr_loss<T: Float>(
    users: &Matrix<T>,
    recipes: &Matrix<T>,
    batch: &BatchSample,
) -> BprOutput<T> {
    let mut grad_users = Matrix::zeros(users.rows(), users.dim());
    let mut grad_recipes = Matrix::zeros(recipes.rows(), recipes.dim());
    if batch.is_empty() {
        return BprOutput {
            loss: T::zero(),
            grad_users,
            grad_recipes,
        };
    }
    let inv_b = T::one() / T::from(batch.len()).expect("batch size");
    let mut loss = T::zero();
    for t in &batch.triplets {
        let (u, p, n) = (t.user as usize, t.pos as usize, t.neg as usize);
        let eu = users.row(u);
        let ep = recipes.row(p);
        let en = recipes.row(n);
        let margin = dot(eu, ep) - dot(eu, en);
        loss = loss + softplus(-margin);
        // d softplus(−x)/dx = −σ(−x)
        let c = -sigmoid(-margin) * inv_b;
        for ((g, &a), &b) in grad_users.row_mut(u).iter_mut().zip(ep).zip(en) {
            *g = *g + c * (a - b);
        }
        for (g, &a) in grad_recipes.row_mut(p).iter_mut().zip(eu) {
            *g = *g + c * a;
        }
        for (g, &a) in grad_recipes.row_mut(n).iter_mut().zip(eu) {
            *g = *g - c * a;
        }
    }
    BprOutput {
        loss: loss * inv_b,
        grad_users,
        grad_recipes,
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct InfoNceOutput<T> {
    /// Sum of per-anchor losses.
    pub loss: T,
    /// Loss of each anchor, in anchor order.
    pub per_anchor: Vec<T>,
    pub grad_s: Matrix<T>,
    pub grad_l: Matrix<T>,
}

/// Cross-view InfoNCE for one side.
///
/// Anchor `i` contributes `−log softmax_j(cos(s_i, l_j)/τ)[i]`, the
/// denominator running over every candidate `j`. Anchors and candidates are
/// all rows, or the rows listed in `subset` (in-batch mode).
pub fn infonce_loss<T: Float>(
    view_s: &Matrix<T>,
    view_l: &Matrix<T>,
    tau: T,
    side: EntityKind,
    subset: Option<&[u32]>,
) -> Result<InfoNceOutput<T>> {
    if !view_s.same_shape(view_l) {
        return Err(Error::Shape {
            context: "infonce_loss",
            expected: alloc::format!("{}x{}", view_s.rows(), view_s.dim()),
            actual: alloc::format!("{}x{}", view_l.rows(), view_l.dim()),
        });
    }
    if !(tau > T::zero()) {
        return Err(Error::InvalidHyperparam {
            name: "tau",
            reason: "must be positive".into(),
        });
    }
    let idx: Vec<usize> = match subset {
        Some(s) => s.iter().map(|&i| i as usize).collect(),
        None => (0..view_s.rows()).collect(),
    };
    let n = idx.len();
    let d = view_s.dim();

    // Unit rows for the anchors (a) and candidates (b).
    let unit = |m: &Matrix<T>| -> Result<(Vec<T>, Vec<T>)> {
        let mut units = Vec::with_capacity(n * d);
        let mut norms = Vec::with_capacity(n);
        for &i in &idx {
            let row = m.row(i);
            let nr = norm(row);
            if !(nr > T::zero()) || !nr.is_finite() {
                return Err(Error::ZeroNorm { kind: side, index: i });
            }
            units.extend(row.iter().map(|&v| v / nr));
            norms.push(nr);
        }
        Ok((units, norms))
    };
    let (a, a_norm) = unit(view_s)?;
    let (b, b_norm) = unit(view_l)?;
    let inv_tau = T::one() / tau;

    let mut per_anchor = Vec::with_capacity(n);
    let mut ga = vec![T::zero(); n * d];
    let mut gb = vec![T::zero(); n * d];
    let mut logits = vec![T::zero(); n];
    for i in 0..n {
        let ai = &a[i * d..(i + 1) * d];
        let mut max = T::neg_infinity();
        for (j, z) in logits.iter_mut().enumerate() {
            *z = dot(ai, &b[j * d..(j + 1) * d]) * inv_tau;
            max = max.max(*z);
        }
        let sum = logits.iter().fold(T::zero(), |s, &z| s + (z - max).exp());
        let lse = max + sum.ln();
        per_anchor.push(lse - logits[i]);
        // ∂loss_i/∂z_ij = p_ij − δ_ij
        for j in 0..n {
            let mut c = (logits[j] - lse).exp();
            if j == i {
                c = c - T::one();
            }
            let c = c * inv_tau;
            let bj = &b[j * d..(j + 1) * d];
            for (g, &v) in ga[i * d..(i + 1) * d].iter_mut().zip(bj) {
                *g = *g + c * v;
            }
            for (g, &v) in gb[j * d..(j + 1) * d].iter_mut().zip(ai) {
                *g = *g + c * v;
            }
        }
    }

    // Back through x ↦ x/‖x‖: (g − x̂(x̂·g))/‖x‖.
    let project = |units: &[T], norms: &[T], g: &[T], out: &mut Matrix<T>| {
        for (k, &row) in idx.iter().enumerate() {
            let u = &units[k * d..(k + 1) * d];
            let gk = &g[k * d..(k + 1) * d];
            let along = dot(u, gk);
            for ((o, &gv), &uv) in out.row_mut(row).iter_mut().zip(gk).zip(u) {
                *o = *o + (gv - uv * along) / norms[k];
            }
        }
    };
    let mut grad_s = Matrix::zeros(view_s.rows(), d);
    let mut grad_l = Matrix::zeros(view_l.rows(), d);
    project(&a, &a_norm, &ga, &mut grad_s);
    project(&b, &b_norm, &gb, &mut grad_l);

    let loss = per_anchor.iter().fold(T::zero(), |s, &v| s + v);
    Ok(InfoNceOutput {
        loss,
        per_anchor,
        grad_s,
        grad_l,
    })
}

/// `λ·(‖users‖² + ‖recipes‖²)` and its gradient `2λ·e`.
pub fn reg_loss<T: Float>(
    users: &Matrix<T>,
    recipes: &Matrix<T>,
    lambda: T,
) -> (T, Matrix<T>, Matrix<T>) {
    let value = lambda * (users.squared_norm() + recipes.squared_norm());
    let two_l = lambda + lambda;
    let mut gu = users.clone();
    gu.scale(two_l);
    let mut gr = recipes.clone();
    gr.scale(two_l);
    (value, gu, gr)
}
