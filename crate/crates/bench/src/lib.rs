//! Random productive economies for benchmarking.

use eeio_core::{synthetic::model_from_matrices, IOModel};
use nalgebra::{DMatrix, DVector};
use rand::{rngs::StdRng, Rng, SeedableRng};

/// Dense `n`-sector economy with every column sum of `A` equal to
/// `column_sum`, `substances` flows and `indicators` impact categories.
pub fn random_economy(
    seed: u64,
    n: usize,
    column_sum: f64,
    substances: usize,
    indicators: usize,
) -> IOModel {
    let mut rng = StdRng::seed_from_u64(seed);
    let mut a = DMatrix::from_fn(n, n, |_, _| rng.gen::<f64>());
    for j in 0..n {
        let s = a.column(j).sum();
        a.column_mut(j).scale_mut(column_sum / s);
    }
    let b = DMatrix::from_fn(substances, n, |_, _| rng.gen::<f64>());
    let c = DMatrix::from_fn(indicators, substances, |_, _| rng.gen::<f64>());
    let y = DVector::from_fn(n, |_, _| rng.gen::<f64>() * 100.0);
    model_from_matrices(a, b, c, y).expect("column sums below one keep the economy productive")
}
