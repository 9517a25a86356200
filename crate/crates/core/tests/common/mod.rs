#![allow(dead_code)]

use entdetect::linalg::CMatrix;
use entdetect::qstate::{self, DensityOperator};
use rand::Rng;
use rand_distr::{Distribution, Exp1};

/// Random two-qubit state; the rank cycles through 1..=4 with the seed.
pub fn random_two_qubit(seed: u64) -> DensityOperator {
    let rank = 1 + (seed % 4) as usize;
    qstate::random_density(&[2, 2], rank, seed).unwrap()
}

/// Point drawn uniformly from the probability simplex of dimension `m`.
pub fn random_simplex<R: Rng>(m: usize, rng: &mut R) -> Vec<f64> {
    let w: Vec<f64> = (0..m).map(|_| Exp1.sample(rng)).collect();
    let total: f64 = w.iter().sum();
    w.into_iter().map(|x| x / total).collect()
}

pub fn power_sums(spectrum: &[f64]) -> Vec<f64> {
    (1..=spectrum.len() as i32)
        .map(|k| spectrum.iter().map(|x| x.powi(k)).sum())
        .collect()
}

pub fn sorted(mut v: Vec<f64>) -> Vec<f64> {
    v.sort_by(f64::total_cmp);
    v
}

pub fn min_eig(m: &CMatrix) -> f64 {
    entdetect::linalg::min_eigenvalue(m).unwrap()
}
