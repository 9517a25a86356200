mod common;

use common::random_two_qubit;
use entdetect::interfero::{self, Backend, CopyBudget, Shots};
use entdetect::linalg;
use entdetect::posmap::{self, BuiltinMap, PositiveMapSpec};
use entdetect::qstate::{self, DensityOperator};
use entdetect::rng;
use proptest::prelude::*;

fn spa_output(seed: u64) -> DensityOperator {
    let t = PositiveMapSpec::builtin(BuiltinMap::Transpose, 2).unwrap();
    posmap::apply_spa(&posmap::build_spa(&t).unwrap(), &random_two_qubit(seed)).unwrap()
}

fn exact_trace(rho: &DensityOperator, k: usize, backend: Backend) -> f64 {
    let mut r = rng::stream(0, 0);
    interfero::power_trace(rho, k, Shots::Exact, backend, &mut r, None)
        .unwrap()
        .value
}

#[test]
fn circuit_and_analytic_backends_agree() {
    for seed in 0..100u64 {
        let rho = spa_output(seed);
        for k in 2..=4 {
            let circuit = exact_trace(&rho, k, Backend::Circuit);
            let analytic = exact_trace(&rho, k, Backend::Analytic);
            let direct = linalg::power_trace(rho.matrix(), k as u32).re;
            assert!((circuit - analytic).abs() <= 1e-10, "seed {seed}, k {k}");
            assert!((circuit - direct).abs() <= 1e-10, "seed {seed}, k {k}");
        }
    }
}

#[test]
fn sampled_estimates_concentrate() {
    let shots = 1_000_000u64;
    let bound = 5.0 / (shots as f64).sqrt();
    let mut within = 0;
    for trial in 0..200u64 {
        let rho = spa_output(trial);
        let k = 2 + (trial % 3) as usize;
        let exact = linalg::power_trace(rho.matrix(), k as u32).re;
        let mut r = rng::stream(7, trial);
        let est = interfero::power_trace(&rho, k, Shots::Finite(shots), Backend::Circuit, &mut r, None).unwrap();
        if (est.value - exact).abs() <= bound {
            within += 1;
        }
    }
    assert!(within >= 198, "{within}/200 within 5/sqrt(N)");
}

#[test]
fn quadrature_arm_vanishes_for_hermitian_input() {
    let shots = 1_000_000u64;
    for seed in 0..20u64 {
        let rho = spa_output(seed);
        let shift = interfero::build_shift(2, rho.dim()).unwrap();
        let joint = rho.tensor(&rho);
        let exact = interfero::interfere(&joint, &shift, 0.0, Shots::Exact, &mut rng::stream(0, 0)).unwrap();
        assert!(exact.estimate.im.abs() <= 1e-12);
        let sampled = interfero::interfere(&joint, &shift, 0.0, Shots::Finite(shots), &mut rng::stream(seed, 1)).unwrap();
        assert!(sampled.estimate.im.abs() <= 5.0 * sampled.std_error, "seed {seed}: {}", sampled.estimate.im);
    }
}

#[test]
fn copies_are_counted_per_shot() {
    let rho = spa_output(3);
    let budget = CopyBudget::new();
    for k in 2..=4 {
        let mut r = rng::stream(1, k as u64);
        interfero::power_trace(&rho, k, Shots::Finite(1000), Backend::Analytic, &mut r, Some(&budget)).unwrap();
    }
    assert_eq!(budget.consumed(), 1000 * (2 + 3 + 4));
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn power_traces_decrease(seed in any::<u64>(), m in 2usize..6) {
        let rho = qstate::random_density(&[m], 1 + (seed as usize % m), seed).unwrap();
        let mut previous = 1.0;
        for k in 2..=6u32 {
            let p = linalg::power_trace(rho.matrix(), k).re;
            prop_assert!(p <= previous + 1e-12);
            prop_assert!(p >= -1e-12);
            previous = p;
        }
    }

    #[test]
    fn shift_relabels_basis_vectors_cyclically(k in 2usize..5, m in 2usize..4, seed in any::<u64>()) {
        let shift = interfero::build_shift(k, m).unwrap();
        let n = m.pow(k as u32);
        let input = (seed % n as u64) as usize;
        // Digits of the input, leftmost factor most significant.
        let mut digits = vec![0; k];
        let mut rest = input;
        for slot in (0..k).rev() {
            digits[slot] = rest % m;
            rest /= m;
        }
        let mut rotated = vec![digits[k - 1]];
        rotated.extend_from_slice(&digits[..k - 1]);
        let expected = rotated.iter().fold(0, |acc, &x| acc * m + x);
        let mat = shift.to_matrix();
        for row in 0..n {
            let want = if row == expected { 1.0 } else { 0.0 };
            prop_assert_eq!(mat[(row, input)], linalg::c(want, 0.0));
        }
    }

    #[test]
    fn shift_trace_is_power_trace(seed in any::<u64>(), k in 2usize..5) {
        let rho = qstate::random_density(&[2], 2, seed).unwrap();
        let shift = interfero::build_shift(k, 2).unwrap();
        let mut joint = rho.clone();
        for _ in 1..k {
            joint = joint.tensor(&rho);
        }
        let via_shift = shift.trace_with(joint.matrix());
        let direct = linalg::power_trace(rho.matrix(), k as u32);
        prop_assert!((via_shift - direct).norm() <= 1e-12);
    }
}
