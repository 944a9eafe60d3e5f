//! Bipartite user–recipe interaction graph in compressed sparse row form.

use alloc::vec;
use alloc::vec::Vec;
use core::fmt;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum EntityKind {
    User,
    Recipe,
}

impl fmt::Display for EntityKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            EntityKind::User => "user",
            EntityKind::Recipe => "recipe",
        })
    }
}

/// A dense index into the user or recipe table.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct EntityIndex {
    pub kind: EntityKind,
    pub idx: u32,
}

impl EntityIndex {
    pub fn user(idx: u32) -> Self {
        Self {
            kind: EntityKind::User,
            idx,
        }
    }

    pub fn recipe(idx: u32) -> Self {
        Self {
            kind: EntityKind::Recipe,
            idx,
        }
    }
}

/// Binary sparse matrix: row pointers plus strictly increasing column indices per row.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Csr {
    offsets: Vec<usize>,
    indices: Vec<u32>,
}

impl Csr {
    /// Builds from `(row, col)` pairs; duplicates collapse to one entry.
    pub fn from_pairs(n_rows: usize, pairs: impl IntoIterator<Item = (u32, u32)>) -> Self {
        let mut pairs: Vec<(u32, u32)> = pairs.into_iter().collect();
        pairs.sort_unstable();
        pairs.dedup();
        let mut offsets = vec![0usize; n_rows + 1];
        for &(r, _) in &pairs {
            offsets[r as usize + 1] += 1;
        }
        for i in 0..n_rows {
            offsets[i + 1] += offsets[i];
        }
        let indices = pairs.into_iter().map(|(_, c)| c).collect();
        Self { offsets, indices }
    }

    #[inline]
    pub fn n_rows(&self) -> usize {
        self.offsets.len() - 1
    }

    #[inline]
    pub fn nnz(&self) -> usize {
        self.indices.len()
    }

    #[inline]
    pub fn row(&self, i: usize) -> &[u32] {
        &self.indices[self.offsets[i]..self.offsets[i + 1]]
    }

    #[inline]
    pub fn row_len(&self, i: usize) -> usize {
        self.offsets[i + 1] - self.offsets[i]
    }

    pub fn offsets(&self) -> &[usize] {
        &self.offsets
    }

    pub fn indices(&self) -> &[u32] {
        &self.indices
    }

    pub fn contains(&self, row: usize, col: u32) -> bool {
        self.row(row).binary_search(&col).is_ok()
    }

    /// Transpose into a matrix with `n_cols` rows. Rows are emitted in ascending
    /// source order, so column indices of the result stay sorted.
    pub fn transpose(&self, n_cols: usize) -> Csr {
        let mut offsets = vec![0usize; n_cols + 1];
        for &c in &self.indices {
            offsets[c as usize + 1] += 1;
        }
        for i in 0..n_cols {
            offsets[i + 1] += offsets[i];
        }
        let mut cursor = offsets.clone();
        let mut indices = vec![0u32; self.indices.len()];
        for r in 0..self.n_rows() {
            for &c in self.row(r) {
                indices[cursor[c as usize]] = r as u32;
                cursor[c as usize] += 1;
            }
        }
        Csr { offsets, indices }
    }
}

/// The training interaction graph `A`, stored in both orientations.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct InteractionGraph {
    n_users: usize,
    n_recipes: usize,
    user_to_recipes: Csr,
    recipe_to_users: Csr,
    user_degree: Vec<u32>,
    recipe_degree: Vec<u32>,
}

impl InteractionGraph {
    /// Builds the graph from `(user, recipe)` edges. Duplicate edges collapse.
    pub fn from_edges(n_users: usize, n_recipes: usize, edges: &[(u32, u32)]) -> Result<Self> {
        for &(u, r) in edges {
            if u as usize >= n_users || r as usize >= n_recipes {
                return Err(Error::EdgeOutOfRange {
                    user: u,
                    recipe: r,
                    n_users,
                    n_recipes,
                });
            }
        }
        let user_to_recipes = Csr::from_pairs(n_users, edges.iter().copied());
        let recipe_to_users = user_to_recipes.transpose(n_recipes);
        let user_degree = (0..n_users)
            .map(|u| user_to_recipes.row_len(u) as u32)
            .collect();
        let recipe_degree = (0..n_recipes)
            .map(|r| recipe_to_users.row_len(r) as u32)
            .collect();
        Ok(Self {
            n_users,
            n_recipes,
            user_to_recipes,
            recipe_to_users,
            user_degree,
            recipe_degree,
        })
    }

    pub fn n_users(&self) -> usize {
        self.n_users
    }

    pub fn n_recipes(&self) -> usize {
        self.n_recipes
    }

    pub fn n_edges(&self) -> usize {
        self.user_to_recipes.nnz()
    }

    pub fn user_to_recipes(&self) -> &Csr {
        &self.user_to_recipes
    }

    pub fn recipe_to_users(&self) -> &Csr {
        &self.recipe_to_users
    }

    /// Sorted recipes of user `u` (`𝒩_u`).
    pub fn recipes_of(&self, u: usize) -> &[u32] {
        self.user_to_recipes.row(u)
    }

    /// Sorted users of recipe `r` (`𝒩_r`).
    pub fn users_of(&self, r: usize) -> &[u32] {
        self.recipe_to_users.row(r)
    }

    pub fn user_degree(&self) -> &[u32] {
        &self.user_degree
    }

    pub fn recipe_degree(&self) -> &[u32] {
        &self.recipe_degree
    }

    pub fn contains(&self, u: u32, r: u32) -> bool {
        (u as usize) < self.n_users && self.user_to_recipes.contains(u as usize, r)
    }

    /// All edges in (user, recipe) lexicographic order.
    pub fn edges(&self) -> impl Iterator<Item = (u32, u32)> + '_ {
        (0..self.n_users)
            .flat_map(move |u| self.recipes_of(u).iter().map(move |&r| (u as u32, r)))
    }

    /// Swaps the roles of users and recipes.
    pub fn transposed(&self) -> InteractionGraph {
        InteractionGraph {
            n_users: self.n_recipes,
            n_recipes: self.n_users,
            user_to_recipes: self.recipe_to_users.clone(),
            recipe_to_users: self.user_to_recipes.clone(),
            user_degree: self.recipe_degree.clone(),
            recipe_degree: self.user_degree.clone(),
        }
    }

    /// First zero-degree node, if any.
    pub fn find_isolated(&self) -> Option<EntityIndex> {
        if let Some(u) = self.user_degree.iter().position(|&d| d == 0) {
            return Some(EntityIndex::user(u as u32));
        }
        self.recipe_degree
            .iter()
            .position(|&d| d == 0)
            .map(|r| EntityIndex::recipe(r as u32))
    }
}
