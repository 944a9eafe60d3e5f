use alloc::vec::Vec;

use rand::Rng;

use crate::error::{Error, Result};
use crate::graph::InteractionGraph;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Triplet {
    pub user: u32,
    pub pos: u32,
    pub neg: u32,
}

/// BPR triplets `(u, pos, neg)` with `(u, pos)` a train edge and `(u, neg)` not.
#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct BatchSample {
    pub triplets: Vec<Triplet>,
}

impl BatchSample {
    pub fn len(&self) -> usize {
        self.triplets.len()
    }

    pub fn is_empty(&self) -> bool {
        self.triplets.is_empty()
    }
}

/// Draws one uniform negative per positive pair by rejection against the user's train set.
pub fn sample_negatives<R: Rng + ?Sized>(
    graph: &InteractionGraph,
    positives: &[(u32, u32)],
    rng: &mut R,
) -> Result<BatchSample> {
    let n_recipes = graph.n_recipes() as u32;
    let mut triplets = Vec::with_capacity(positives.len());
    for &(user, pos) in positives {
        let seen = graph.recipes_of(user as usize);
        if seen.len() >= n_recipes as usize {
            return Err(Error::NoNegative { user });
        }
        let neg = loop {
            let r = rng.gen_range(0..n_recipes);
            if seen.binary_search(&r).is_err() {
                break r;
            }
        };
        triplets.push(Triplet { user, pos, neg });
    }
    Ok(BatchSample { triplets })
}
