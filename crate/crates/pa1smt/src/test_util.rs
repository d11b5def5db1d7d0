//! Shared randomized fixtures for unit tests.

use ndarray::Array2;
use rand::prelude::*;

pub fn random_matrix(rng: &mut impl Rng, rows: usize, cols: usize) -> Array2<f64> {
    Array2::from_shape_fn((rows, cols), |_| rng.random_range(-1.0..1.0))
}

pub fn random_spd(rng: &mut impl Rng, n: usize) -> Array2<f64> {
    let r = random_matrix(rng, n, n);
    let mut a = r.dot(&r.t());
    for i in 0..n {
        a[[i, i]] += 0.5 + n as f64 * 0.1;
    }
    a
}

pub fn random_psd(rng: &mut impl Rng, n: usize) -> Array2<f64> {
    let rank = rng.random_range(1..=n);
    let s = random_matrix(rng, n, rank);
    s.dot(&s.t())
}
