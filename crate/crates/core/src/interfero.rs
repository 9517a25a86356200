//! Single-ancilla interferometry.
//!
//! The network is Hadamard, controlled-`U`, phase `φ`, Hadamard, followed by
//! a measurement of the ancilla. With the system in state `ρ` the ancilla
//! reads 0 with probability `(1 + Re[e^{iφ} Tr ρU]) / 2`. Choosing `U` to be
//! the cyclic shift of `k` copies and `ρ = ρ′^{⊗k}` turns that into an
//! estimate of `Tr ρ′^k`.

use std::f64::consts::FRAC_PI_2;
use std::sync::atomic::{AtomicU64, Ordering};

use num_complex::Complex64;
use rand::Rng;
use rand_distr::{Binomial, Distribution};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::{self, CMatrix, DEFAULT_DENSE_CAP, ONE};
use crate::qstate::DensityOperator;

pub const UNITARY_TOL: f64 = 1e-10;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Shots {
    /// Return the exact ancilla expectation instead of sampling.
    Exact,
    Finite(u64),
}

impl Shots {
    pub fn count(self) -> Option<u64> {
        match self {
            Shots::Exact => None,
            Shots::Finite(n) => Some(n),
        }
    }

    /// Worst-case Bernoulli standard error of `2f − 1`, i.e. `1/√shots`.
    pub fn std_error(self) -> f64 {
        match self {
            Shots::Exact => 0.0,
            Shots::Finite(n) => 1.0 / (n as f64).sqrt(),
        }
    }
}

/// Unitaries the controlled gate can apply to the system register.
pub trait SystemUnitary {
    fn dim(&self) -> usize;
    /// `U M`.
    fn apply_left(&self, m: &CMatrix) -> CMatrix;
    /// `M U†`.
    fn apply_right_adjoint(&self, m: &CMatrix) -> CMatrix;
    fn unitarity_deviation(&self) -> f64;
}

impl SystemUnitary for CMatrix {
    fn dim(&self) -> usize {
        self.nrows()
    }

    fn apply_left(&self, m: &CMatrix) -> CMatrix {
        self * m
    }

    fn apply_right_adjoint(&self, m: &CMatrix) -> CMatrix {
        m * self.adjoint()
    }

    fn unitarity_deviation(&self) -> f64 {
        if !self.is_square() {
            return f64::INFINITY;
        }
        linalg::unitarity_deviation(self)
    }
}

/// Ancilla–system density matrix held as 2×2 blocks over the ancilla basis.
#[derive(Debug, Clone)]
pub struct AncillaRegister {
    blocks: [CMatrix; 4],
}

impl AncillaRegister {
    /// `|0><0| ⊗ ρ`.
    pub fn new(rho: &CMatrix) -> Self {
        let zero = CMatrix::zeros(rho.nrows(), rho.ncols());
        Self {
            blocks: [rho.clone(), zero.clone(), zero.clone(), zero],
        }
    }

    pub fn hadamard(&mut self) {
        let [a, b, c, d] = &self.blocks;
        let half = Complex64::new(0.5, 0.0);
        let next = [
            (a + b + c + d) * half,
            (a - b + c - d) * half,
            (a + b - c - d) * half,
            (a - b - c + d) * half,
        ];
        self.blocks = next;
    }

    /// `|0><0| ⊗ I + |1><1| ⊗ U`.
    pub fn controlled(&mut self, u: &impl SystemUnitary) {
        let [_, b, c, d] = &self.blocks;
        let nb = u.apply_right_adjoint(b);
        let nc = u.apply_left(c);
        let nd = u.apply_right_adjoint(&u.apply_left(d));
        self.blocks[1] = nb;
        self.blocks[2] = nc;
        self.blocks[3] = nd;
    }

    /// `diag(1, e^{iφ})` on the ancilla.
    pub fn phase(&mut self, phi: f64) {
        let w = Complex64::from_polar(1.0, phi);
        self.blocks[1] *= w.conj();
        self.blocks[2] *= w;
    }

    pub fn prob_zero(&self) -> f64 {
        linalg::trace(&self.blocks[0]).re.clamp(0.0, 1.0)
    }
}

/// Runs the network once and returns the exact probability of ancilla 0.
pub fn ancilla_prob_zero(rho: &CMatrix, u: &impl SystemUnitary, phi: f64) -> f64 {
    let mut reg = AncillaRegister::new(rho);
    reg.hadamard();
    reg.controlled(u);
    reg.phase(phi);
    reg.hadamard();
    reg.prob_zero()
}

/// `2f − 1` where `f` is the observed frequency of ancilla 0.
fn sample_signal<R: Rng>(p0: f64, shots: Shots, rng: &mut R) -> f64 {
    match shots {
        Shots::Exact => 2.0 * p0 - 1.0,
        Shots::Finite(n) => {
            let zeros = Binomial::new(n, p0.clamp(0.0, 1.0))
                .expect("probability clamped to [0, 1]")
                .sample(rng);
            2.0 * zeros as f64 / n as f64 - 1.0
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct InterferenceResult {
    /// Estimated `Tr ρU`.
    pub estimate: Complex64,
    pub visibility: f64,
    /// Fringe shift in radians.
    pub phase: f64,
    pub shots: Shots,
    /// Per real/imaginary component.
    pub std_error: f64,
}

/// Estimates `Tr ρU` from two phase settings, `φ` and `φ − π/2`.
pub fn interfere<R: Rng>(
    rho: &DensityOperator,
    u: &impl SystemUnitary,
    phi: f64,
    shots: Shots,
    rng: &mut R,
) -> Result<InterferenceResult> {
    if u.dim() != rho.dim() {
        return Err(Error::DimensionMismatch {
            expected: format!("{0}x{0} unitary", rho.dim()),
            found: format!("{0}x{0}", u.dim()),
        });
    }
    let deviation = u.unitarity_deviation();
    if deviation > UNITARY_TOL {
        return Err(Error::NotUnitary { deviation });
    }
    if shots == Shots::Finite(0) {
        return Err(Error::Invalid("shots must be at least 1".into()));
    }
    let m = rho.matrix();
    let in_phase = sample_signal(ancilla_prob_zero(m, u, phi), shots, rng);
    let quadrature = sample_signal(ancilla_prob_zero(m, u, phi - FRAC_PI_2), shots, rng);
    // in_phase + i·quadrature estimates e^{iφ} Tr ρU.
    let estimate = Complex64::new(in_phase, quadrature) * Complex64::from_polar(1.0, -phi);
    Ok(InterferenceResult {
        estimate,
        visibility: estimate.norm(),
        phase: estimate.arg(),
        shots,
        std_error: shots.std_error(),
    })
}

/// Cyclic shift of `k` copies of an `m`-dimensional system:
/// `|φ₁>|φ₂>…|φ_k> ↦ |φ_k>|φ₁>…|φ_{k−1}>`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ShiftOperator {
    k: usize,
    m: usize,
    /// `image[i]` is the basis index of `V|i>`.
    image: Vec<usize>,
}

impl ShiftOperator {
    pub fn k(&self) -> usize {
        self.k
    }

    pub fn m(&self) -> usize {
        self.m
    }

    pub fn image(&self) -> &[usize] {
        &self.image
    }

    pub fn to_matrix(&self) -> CMatrix {
        let n = self.image.len();
        let mut u = CMatrix::zeros(n, n);
        for (i, &j) in self.image.iter().enumerate() {
            u[(j, i)] = ONE;
        }
        u
    }

    /// `Tr(ρ V)` read directly off the permutation.
    pub fn trace_with(&self, rho: &CMatrix) -> Complex64 {
        self.image.iter().enumerate().map(|(i, &j)| rho[(i, j)]).sum()
    }
}

impl SystemUnitary for ShiftOperator {
    fn dim(&self) -> usize {
        self.image.len()
    }

    fn apply_left(&self, m: &CMatrix) -> CMatrix {
        let mut out = CMatrix::zeros(m.nrows(), m.ncols());
        for (i, &j) in self.image.iter().enumerate() {
            out.row_mut(j).copy_from(&m.row(i));
        }
        out
    }

    fn apply_right_adjoint(&self, m: &CMatrix) -> CMatrix {
        let mut out = CMatrix::zeros(m.nrows(), m.ncols());
        for (i, &j) in self.image.iter().enumerate() {
            out.column_mut(j).copy_from(&m.column(i));
        }
        out
    }

    fn unitarity_deviation(&self) -> f64 {
        let mut seen = vec![false; self.image.len()];
        for &j in &self.image {
            if j >= seen.len() || seen[j] {
                return f64::INFINITY;
            }
            seen[j] = true;
        }
        0.0
    }
}

fn permutation_from_digits(k: usize, m: usize, relabel: impl Fn(&[usize], &mut [usize])) -> Vec<usize> {
    let dims = vec![m; k];
    let n = m.pow(k as u32);
    let mut src = vec![0; k];
    let mut dst = vec![0; k];
    (0..n)
        .map(|i| {
            linalg::digits(i, &dims, &mut src);
            relabel(&src, &mut dst);
            linalg::compose(&dst, &dims)
        })
        .collect()
}

/// Swap of copies `a` and `a + 1` as a basis permutation.
fn adjacent_swap(k: usize, m: usize, a: usize) -> Vec<usize> {
    permutation_from_digits(k, m, |src, dst| {
        dst.copy_from_slice(src);
        dst.swap(a, a + 1);
    })
}

pub fn build_shift(k: usize, m: usize) -> Result<ShiftOperator> {
    build_shift_with_cap(k, m, DEFAULT_DENSE_CAP)
}

pub fn build_shift_with_cap(k: usize, m: usize, cap: usize) -> Result<ShiftOperator> {
    if k < 2 || m < 2 {
        return Err(Error::Invalid(format!("shift needs k >= 2 and m >= 2, got k = {k}, m = {m}")));
    }
    let required = (m as u128).checked_pow(k as u32).unwrap_or(u128::MAX);
    if required > cap as u128 {
        return Err(Error::Capacity {
            required: required.min(usize::MAX as u128) as usize,
            cap,
        });
    }
    let image = permutation_from_digits(k, m, |src, dst| {
        dst[0] = src[k - 1];
        dst[1..].copy_from_slice(&src[..k - 1]);
    });

    // Cascade V = S_{1,2} S_{2,3} … S_{k−1,k}, rightmost applied first.
    let n = image.len();
    let mut cascade: Vec<usize> = (0..n).collect();
    for a in (0..k - 1).rev() {
        let swap = adjacent_swap(k, m, a);
        cascade.iter_mut().for_each(|x| *x = swap[*x]);
    }
    if cascade != image {
        return Err(Error::Invalid("shift does not match the cascade of swaps".into()));
    }
    let shift = ShiftOperator { k, m, image };
    if shift.unitarity_deviation() != 0.0 {
        return Err(Error::NotUnitary {
            deviation: f64::INFINITY,
        });
    }
    Ok(shift)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Backend {
    /// Builds `ρ′^{⊗k}` and runs the controlled-shift network.
    Circuit,
    /// Computes `Tr ρ′^k` directly and samples the ancilla with the same law.
    Analytic,
    /// Matrix-power trace, no sampling.
    Exact,
}

/// Copies of `ρ′` consumed by sampled power-sum measurements.
#[derive(Debug, Default)]
pub struct CopyBudget(AtomicU64);

impl CopyBudget {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn consume(&self, copies: u64) {
        self.0.fetch_add(copies, Ordering::Relaxed);
    }

    pub fn consumed(&self) -> u64 {
        self.0.load(Ordering::Relaxed)
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PowerTraceEstimate {
    pub value: f64,
    pub std_error: f64,
}

/// Estimates `Tr ρ′^k` at `φ = 0`.
pub fn power_trace<R: Rng>(
    rho: &DensityOperator,
    k: usize,
    shots: Shots,
    backend: Backend,
    rng: &mut R,
    budget: Option<&CopyBudget>,
) -> Result<PowerTraceEstimate> {
    power_trace_with_cap(rho, k, shots, backend, rng, budget, DEFAULT_DENSE_CAP)
}

pub fn power_trace_with_cap<R: Rng>(
    rho: &DensityOperator,
    k: usize,
    shots: Shots,
    backend: Backend,
    rng: &mut R,
    budget: Option<&CopyBudget>,
    cap: usize,
) -> Result<PowerTraceEstimate> {
    if k == 0 {
        return Err(Error::Invalid("power sums start at k = 1".into()));
    }
    if shots == Shots::Finite(0) {
        return Err(Error::Invalid("shots must be at least 1".into()));
    }
    let m = rho.matrix();
    if k == 1 {
        return Ok(PowerTraceEstimate {
            value: linalg::trace(m).re,
            std_error: 0.0,
        });
    }
    let exact = || PowerTraceEstimate {
        value: linalg::power_trace(m, k as u32).re,
        std_error: 0.0,
    };
    let p0 = match backend {
        Backend::Exact => return Ok(exact()),
        Backend::Analytic => {
            if shots == Shots::Exact {
                return Ok(exact());
            }
            (1.0 + linalg::power_trace(m, k as u32).re) / 2.0
        }
        Backend::Circuit => {
            let shift = build_shift_with_cap(k, rho.dim(), cap)?;
            let mut joint = m.clone();
            for _ in 1..k {
                joint = linalg::kron(&joint, m);
            }
            ancilla_prob_zero(&joint, &shift, 0.0)
        }
    };
    if let (Some(budget), Some(n)) = (budget, shots.count()) {
        budget.consume(n * k as u64);
    }
    Ok(PowerTraceEstimate {
        value: sample_signal(p0, shots, rng),
        std_error: shots.std_error(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::qstate::{random_density, DensityOperator, PureState};
    use crate::rng;
    use approx::assert_abs_diff_eq;

    #[test]
    fn identity_gives_unit_visibility() {
        let rho = random_density(&[3], 2, 1).unwrap();
        let res = interfere(&rho, &CMatrix::identity(3, 3), 0.3, Shots::Exact, &mut rng::stream(0, 0)).unwrap();
        assert_abs_diff_eq!(res.estimate.re, 1.0, epsilon = 1e-12);
        assert_abs_diff_eq!(res.estimate.im, 0.0, epsilon = 1e-12);
        assert_abs_diff_eq!(res.visibility, 1.0, epsilon = 1e-12);
        assert_abs_diff_eq!(res.phase, 0.0, epsilon = 1e-12);
        assert_eq!(res.std_error, 0.0);
    }

    #[test]
    fn swap_measures_purity() {
        let swap = build_shift(2, 2).unwrap();
        let psi = PureState::new(
            vec![2],
            crate::linalg::CVector::from_vec(vec![linalg::c(0.6, 0.0), linalg::c(0.0, 0.8)]),
        )
        .unwrap()
        .to_density();
        let pair = psi.tensor(&psi);
        let res = interfere(&pair, &swap, 0.0, Shots::Exact, &mut rng::stream(0, 0)).unwrap();
        assert_abs_diff_eq!(res.estimate.re, 1.0, epsilon = 1e-12);

        let half = DensityOperator::maximally_mixed(vec![2]);
        let res = interfere(&half.tensor(&half), &swap, 0.0, Shots::Exact, &mut rng::stream(0, 0)).unwrap();
        assert_abs_diff_eq!(res.estimate.re, 0.5, epsilon = 1e-12);
        assert_abs_diff_eq!(res.estimate.im, 0.0, epsilon = 1e-12);
    }

    #[test]
    fn complex_overlap_and_phase() {
        // U = diag(1, i): Tr ρU = ρ00 + i ρ11.
        let u = CMatrix::from_diagonal(&crate::linalg::CVector::from_vec(vec![ONE, linalg::c(0.0, 1.0)]));
        let rho = DensityOperator::new(
            vec![2],
            CMatrix::from_diagonal(&crate::linalg::CVector::from_vec(vec![linalg::c(0.25, 0.0), linalg::c(0.75, 0.0)])),
        )
        .unwrap();
        for phi in [0.0, 0.7, -1.9] {
            let res = interfere(&rho, &u, phi, Shots::Exact, &mut rng::stream(0, 0)).unwrap();
            assert_abs_diff_eq!(res.estimate.re, 0.25, epsilon = 1e-12);
            assert_abs_diff_eq!(res.estimate.im, 0.75, epsilon = 1e-12);
        }
    }

    #[test]
    fn rejects_bad_unitaries() {
        let rho = DensityOperator::maximally_mixed(vec![2]);
        let not_unitary = CMatrix::identity(2, 2).scale(2.0);
        assert!(matches!(
            interfere(&rho, &not_unitary, 0.0, Shots::Exact, &mut rng::stream(0, 0)),
            Err(Error::NotUnitary { .. })
        ));
        assert!(matches!(
            interfere(&rho, &CMatrix::identity(3, 3), 0.0, Shots::Exact, &mut rng::stream(0, 0)),
            Err(Error::DimensionMismatch { .. })
        ));
    }

    #[test]
    fn shift_examples() {
        let swap = build_shift(2, 2).unwrap();
        assert_eq!(linalg::trace(&swap.to_matrix()).re, 2.0);
        let v3 = build_shift(3, 2).unwrap().to_matrix();
        let cube = &v3 * &v3 * &v3;
        assert_eq!(cube, CMatrix::identity(8, 8));
        assert!(matches!(build_shift(7, 4).unwrap_err(), Error::Capacity { .. }));
        assert!(build_shift(1, 2).is_err());
    }

    #[test]
    fn shift_relabels_product_basis() {
        // Exhaustive over m = 2, k = 2, 3.
        for k in 2..=3 {
            let v = build_shift(k, 2).unwrap();
            let dims = vec![2; k];
            let mut src = vec![0; k];
            for i in 0..(1 << k) {
                linalg::digits(i, &dims, &mut src);
                let mut expect = vec![src[k - 1]];
                expect.extend_from_slice(&src[..k - 1]);
                assert_eq!(v.image()[i], linalg::compose(&expect, &dims));
            }
        }
    }

    #[test]
    fn permutation_application_matches_dense() {
        let v = build_shift(3, 2).unwrap();
        let dense = v.to_matrix();
        let rho = random_density(&[2, 2, 2], 8, 3).unwrap().into_matrix();
        assert!(linalg::max_abs_diff(&v.apply_left(&rho), &(&dense * &rho)) < 1e-15);
        assert!(linalg::max_abs_diff(&v.apply_right_adjoint(&rho), &(&rho * dense.adjoint())) < 1e-15);
        assert_abs_diff_eq!(v.trace_with(&rho).re, linalg::trace(&(&rho * &dense)).re, epsilon = 1e-15);
    }

    #[test]
    fn power_trace_examples() {
        let mut r = rng::stream(1, 0);
        let pure = crate::qstate::make_bell(1).unwrap().to_density();
        for k in 1..=4 {
            let est = power_trace(&pure, k, Shots::Exact, Backend::Exact, &mut r, None).unwrap();
            assert_abs_diff_eq!(est.value, 1.0, epsilon = 1e-12);
        }
        let mixed = DensityOperator::maximally_mixed(vec![3]);
        for k in 1..=4 {
            let est = power_trace(&mixed, k, Shots::Exact, Backend::Exact, &mut r, None).unwrap();
            assert_abs_diff_eq!(est.value, 3f64.powi(1 - k as i32), epsilon = 1e-14);
        }
        assert!(power_trace(&mixed, 0, Shots::Exact, Backend::Exact, &mut r, None).is_err());
    }

    #[test]
    fn circuit_capacity_error() {
        let rho = DensityOperator::maximally_mixed(vec![3, 3]);
        let err = power_trace(&rho, 9, Shots::Finite(10), Backend::Circuit, &mut rng::stream(0, 0), None).unwrap_err();
        assert!(err.is_capacity());
    }

    #[test]
    fn budget_counts_copies() {
        let budget = CopyBudget::new();
        let rho = DensityOperator::maximally_mixed(vec![2, 2]);
        let mut r = rng::stream(2, 0);
        power_trace(&rho, 3, Shots::Finite(100), Backend::Circuit, &mut r, Some(&budget)).unwrap();
        power_trace(&rho, 2, Shots::Finite(100), Backend::Analytic, &mut r, Some(&budget)).unwrap();
        power_trace(&rho, 4, Shots::Exact, Backend::Exact, &mut r, Some(&budget)).unwrap();
        assert_eq!(budget.consumed(), 500);
    }

    #[test]
    fn sampling_is_reproducible() {
        let rho = random_density(&[2, 2], 4, 5).unwrap();
        let a = power_trace(&rho, 2, Shots::Finite(1000), Backend::Circuit, &mut rng::stream(9, 2), None).unwrap();
        let b = power_trace(&rho, 2, Shots::Finite(1000), Backend::Circuit, &mut rng::stream(9, 2), None).unwrap();
        assert_eq!(a, b);
        assert_abs_diff_eq!(a.std_error, 1.0 / 1000f64.sqrt());
    }
}
