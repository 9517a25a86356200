//! Dense complex helpers shared by the state, map and circuit code.

use nalgebra::{DMatrix, DVector, SymmetricEigen};
use num_complex::Complex64;

use crate::error::{Error, Result};

pub type CMatrix = DMatrix<Complex64>;
pub type CVector = DVector<Complex64>;

pub const ZERO: Complex64 = Complex64 { re: 0.0, im: 0.0 };
pub const ONE: Complex64 = Complex64 { re: 1.0, im: 0.0 };

/// Tolerance used when accepting a matrix as Hermitian.
pub const HERMITIAN_TOL: f64 = 1e-9;

/// Largest dense dimension the solvers will accept unless told otherwise.
pub const DEFAULT_DENSE_CAP: usize = 4096;

pub fn c(re: f64, im: f64) -> Complex64 {
    Complex64::new(re, im)
}

/// Largest entry of |M - M^dagger|.
pub fn hermitian_deviation(m: &CMatrix) -> f64 {
    let n = m.nrows();
    let mut worst = 0.0f64;
    for i in 0..n {
        for j in i..n {
            worst = worst.max((m[(i, j)] - m[(j, i)].conj()).norm());
        }
    }
    worst
}

pub fn trace(m: &CMatrix) -> Complex64 {
    m.diagonal().iter().sum()
}

/// Ascending eigenvalues of a Hermitian matrix.
pub fn eigenvalues(h: &CMatrix) -> Result<Vec<f64>> {
    if !h.is_square() {
        return Err(Error::DimensionMismatch {
            expected: "square matrix".into(),
            found: format!("{}x{}", h.nrows(), h.ncols()),
        });
    }
    let deviation = hermitian_deviation(h);
    if deviation > HERMITIAN_TOL {
        return Err(Error::NotHermitian { deviation });
    }
    Ok(hermitian_eigenvalues_unchecked(h))
}

pub(crate) fn hermitian_eigenvalues_unchecked(h: &CMatrix) -> Vec<f64> {
    if h.nrows() == 0 {
        return Vec::new();
    }
    // Symmetrize so the solver only ever sees an exactly Hermitian input.
    let sym = (h + h.adjoint()).scale(0.5);
    let mut vals: Vec<f64> = SymmetricEigen::new(sym).eigenvalues.iter().copied().collect();
    vals.sort_by(|a, b| a.total_cmp(b));
    vals
}

pub fn min_eigenvalue(h: &CMatrix) -> Result<f64> {
    Ok(eigenvalues(h)?.first().copied().unwrap_or(0.0))
}

pub fn kron(a: &CMatrix, b: &CMatrix) -> CMatrix {
    a.kronecker(b)
}

/// Mixed-radix digits of `index` for the given dims, leftmost factor most significant.
pub(crate) fn digits(mut index: usize, dims: &[usize], out: &mut [usize]) {
    for (slot, &d) in out.iter_mut().zip(dims).rev() {
        *slot = index % d;
        index /= d;
    }
}

pub(crate) fn compose(digits: &[usize], dims: &[usize]) -> usize {
    digits.iter().zip(dims).fold(0, |acc, (&x, &d)| acc * d + x)
}

/// `Tr(M^k)` by repeated multiplication.
pub fn power_trace(m: &CMatrix, k: u32) -> Complex64 {
    match k {
        0 => c(m.nrows() as f64, 0.0),
        1 => trace(m),
        _ => {
            let mut acc = m.clone();
            for _ in 1..k - 1 {
                acc = &acc * m;
            }
            // Tr(A B) without forming the final product.
            let mut t = ZERO;
            for i in 0..m.nrows() {
                for j in 0..m.ncols() {
                    t += acc[(i, j)] * m[(j, i)];
                }
            }
            t
        }
    }
}

/// Largest entry of |U U^dagger - I|.
pub fn unitarity_deviation(u: &CMatrix) -> f64 {
    let prod = u * u.adjoint();
    let n = u.nrows();
    let mut worst = 0.0f64;
    for i in 0..n {
        for j in 0..n {
            let target = if i == j { ONE } else { ZERO };
            worst = worst.max((prod[(i, j)] - target).norm());
        }
    }
    worst
}

pub fn max_abs_diff(a: &CMatrix, b: &CMatrix) -> f64 {
    a.iter().zip(b.iter()).map(|(x, y)| (x - y).norm()).fold(0.0, f64::max)
}
