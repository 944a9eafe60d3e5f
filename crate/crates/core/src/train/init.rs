use num_traits::Float;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::matrix::Matrix;

/// Glorot-uniform bound `√(6/(rows+dim))`.
pub fn xavier_bound(rows: usize, dim: usize) -> f64 {
    (6.0 / (rows + dim) as f64).sqrt()
}

/// I.i.d. uniform entries on `[−a, a]` with the Glorot bound, reproducible from `seed`.
pub fn xavier_init<T: Float>(rows: usize, dim: usize, seed: u64) -> Matrix<T> {
    let a = xavier_bound(rows, dim);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let values = (0..rows * dim)
        .map(|_| T::from(rng.gen_range(-a..=a)).expect("finite"))
        .collect();
    Matrix::from_vec(rows, dim, values).expect("length matches")
}
