//! End-to-end detection: approximate the positive-map test, measure the
//! power sums of the transformed state, reconstruct its minimal eigenvalue
//! and compare with the separability threshold. Also hosts the exact
//! partial-transpose oracle and the two-qubit entanglement-of-formation
//! bounds.

use std::time::{SystemTime, UNIX_EPOCH};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::interfero::{self, Backend, CopyBudget, Shots};
use crate::linalg::{self, DEFAULT_DENSE_CAP};
use crate::posmap::{self, BuiltinMap, PositiveMapSpec, SpaMap};
use crate::qstate::DensityOperator;
use crate::rng;
use crate::spectrum::{self, SpectrumEstimate, SpectrumOptions};

/// Exact-mode verdicts need the minimal eigenvalue this far below threshold.
pub const EXACT_DECISION_TOL: f64 = 1e-9;
/// The oracle calls a state PPT when its partial transpose is above this.
pub const PPT_TOL: f64 = -1e-9;
pub const DEFAULT_DECISION_SIGMA: f64 = 3.0;
pub const MIN_SAMPLED_SHOTS: u64 = 100;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "SCREAMING_SNAKE_CASE")]
pub enum Verdict {
    Entangled,
    /// Non-detection by a single test that is not sharp for this input class.
    NotDetected,
    /// Non-detection by a sharp test (two qubits, transposition).
    Separable,
    Inconclusive,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Mode {
    Exact,
    Sampled,
}

/// Which interferometric backend sampled mode uses.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "lowercase")]
pub enum BackendChoice {
    /// Circuit when `ρ′^{⊗k}` fits the dense cap for every `k`, else analytic.
    #[default]
    Auto,
    Circuit,
    Analytic,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct DetectConfig {
    pub mode: Mode,
    pub shots: u64,
    pub backend: BackendChoice,
    pub decision_sigma: f64,
    pub seed: u64,
    pub dense_cap: usize,
}

impl Default for DetectConfig {
    fn default() -> Self {
        Self {
            mode: Mode::Exact,
            shots: 1_000_000,
            backend: BackendChoice::Auto,
            decision_sigma: DEFAULT_DECISION_SIGMA,
            seed: 0,
            dense_cap: DEFAULT_DENSE_CAP,
        }
    }
}

impl DetectConfig {
    pub fn exact() -> Self {
        Self::default()
    }

    pub fn sampled(shots: u64, seed: u64) -> Self {
        Self {
            mode: Mode::Sampled,
            shots,
            seed,
            ..Self::default()
        }
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct DetectionReport {
    pub verdict: Verdict,
    pub lambda_min_estimate: f64,
    pub lambda_min_std_error: f64,
    pub threshold: f64,
    /// Sampled: `(threshold − λ_min)/std_error`. Exact: `threshold − λ_min`.
    pub margin: f64,
    pub rescale_factor: f64,
    pub mode: Mode,
    pub shots_per_power_sum: Option<u64>,
    pub copies_consumed: u64,
    pub test_name: String,
    pub seed: u64,
    /// Seconds since the Unix epoch.
    pub timestamp: u64,
    #[serde(skip)]
    pub sharp: bool,
    #[serde(skip)]
    pub spectrum: SpectrumEstimate,
}

impl DetectionReport {
    /// Bounds on the entanglement of formation, available only for the
    /// two-qubit transposition test.
    pub fn eof_bounds(&self) -> Option<EofBounds> {
        self.sharp
            .then(|| eof_bounds(lambda_prime_from_spa(self.lambda_min_estimate)).expect("λ′ clamped into range"))
    }
}

fn is_sharp(test: &PositiveMapSpec) -> bool {
    test.builtin_kind() == Some(BuiltinMap::Transpose) && test.d() == 2
}

fn resolve_backend(choice: BackendChoice, m: usize, cap: usize) -> Backend {
    match choice {
        BackendChoice::Circuit => Backend::Circuit,
        BackendChoice::Analytic => Backend::Analytic,
        BackendChoice::Auto => {
            let fits = (m as u128).checked_pow(m as u32).is_some_and(|n| n <= cap as u128);
            if fits {
                Backend::Circuit
            } else {
                Backend::Analytic
            }
        }
    }
}

#[derive(Debug, Clone)]
pub struct MeasuredSpectrum {
    pub spectrum: SpectrumEstimate,
    pub shots_per_power_sum: Option<u64>,
    pub copies_consumed: u64,
}

/// Estimates `Tr ρ^k` for `k = 2 … m` as the config prescribes and
/// reconstructs the spectrum. Power sum `k` draws from stream `k` of the
/// seed.
pub fn measure_spectrum(rho: &DensityOperator, config: &DetectConfig, options: SpectrumOptions) -> Result<MeasuredSpectrum> {
    if config.mode == Mode::Sampled && config.shots < MIN_SAMPLED_SHOTS {
        return Err(Error::Invalid(format!(
            "sampled mode needs at least {MIN_SAMPLED_SHOTS} shots, got {}",
            config.shots
        )));
    }
    let m = rho.dim();
    let budget = CopyBudget::new();
    let (shots, backend) = match config.mode {
        Mode::Exact => (Shots::Exact, Backend::Exact),
        Mode::Sampled => (
            Shots::Finite(config.shots),
            resolve_backend(config.backend, m, config.dense_cap),
        ),
    };
    // p₁ is fixed by normalization, never measured.
    let mut power_sums = vec![1.0];
    let mut std_errors = vec![0.0];
    for k in 2..=m {
        let mut stream = rng::stream(config.seed, k as u64);
        let est = interfero::power_trace_with_cap(rho, k, shots, backend, &mut stream, Some(&budget), config.dense_cap)?;
        power_sums.push(est.value);
        std_errors.push(est.std_error);
    }
    Ok(MeasuredSpectrum {
        spectrum: spectrum::newton_spectrum(&power_sums, &std_errors, options),
        shots_per_power_sum: shots.count(),
        copies_consumed: budget.consumed(),
    })
}

/// Runs the full pipeline for one state and one test.
pub fn detect(rho: &DensityOperator, test: &PositiveMapSpec, config: &DetectConfig) -> Result<DetectionReport> {
    let spa = posmap::build_spa_with_cap(test, config.dense_cap)?;
    detect_with_spa(rho, &spa, config)
}

/// As [`detect`], reusing an already built approximation.
pub fn detect_with_spa(rho: &DensityOperator, spa: &SpaMap, config: &DetectConfig) -> Result<DetectionReport> {
    if config.mode == Mode::Sampled && config.shots < MIN_SAMPLED_SHOTS {
        return Err(Error::Invalid(format!(
            "sampled mode needs at least {MIN_SAMPLED_SHOTS} shots, got {}",
            config.shots
        )));
    }
    if config.decision_sigma.is_nan() || config.decision_sigma < 0.0 {
        return Err(Error::Invalid("decision_sigma must be non-negative".into()));
    }
    let test = spa.base();
    let sigma = spa.apply_unnormalized(rho)?;
    let (rho_prime, rescale_factor) = if test.trace_preserving() {
        (DensityOperator::new(rho.dims().to_vec(), sigma)?, 1.0)
    } else {
        posmap::postselect_normalize(&sigma, rho.dims())?
    };

    let measured = measure_spectrum(&rho_prime, config, SpectrumOptions::default())?;
    let spectrum = measured.spectrum;
    let min = spectrum::min_eigenvalue(&spectrum);
    let lambda_min = min.value * rescale_factor;
    let std_error = min.std_error * rescale_factor;
    let threshold = spa.threshold();
    let sharp = is_sharp(test);
    let clear = if sharp { Verdict::Separable } else { Verdict::NotDetected };

    let (verdict, margin) = match config.mode {
        Mode::Exact => {
            let verdict = if lambda_min < threshold - EXACT_DECISION_TOL {
                Verdict::Entangled
            } else {
                clear
            };
            (verdict, threshold - lambda_min)
        }
        Mode::Sampled => {
            let band = config.decision_sigma * std_error;
            let verdict = if lambda_min < threshold - band {
                Verdict::Entangled
            } else if lambda_min > threshold + band {
                clear
            } else {
                Verdict::Inconclusive
            };
            let margin = if std_error > 0.0 {
                (threshold - lambda_min) / std_error
            } else {
                threshold - lambda_min
            };
            (verdict, margin)
        }
    };

    Ok(DetectionReport {
        verdict,
        lambda_min_estimate: lambda_min,
        lambda_min_std_error: std_error,
        threshold,
        margin,
        rescale_factor,
        mode: config.mode,
        shots_per_power_sum: measured.shots_per_power_sum,
        copies_consumed: measured.copies_consumed,
        test_name: test.name().to_string(),
        seed: config.seed,
        timestamp: SystemTime::now().duration_since(UNIX_EPOCH).map_or(0, |d| d.as_secs()),
        sharp,
        spectrum,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct PptOracle {
    pub is_ppt: bool,
    pub min_pt_eigenvalue: f64,
}

/// Exact diagonalization of the partial transpose on the second factor.
pub fn ppt_oracle(rho: &DensityOperator) -> Result<PptOracle> {
    rho.equal_bipartite_dim()?;
    let min = linalg::min_eigenvalue(&rho.partial_transpose(1)?)?;
    Ok(PptOracle {
        is_ppt: min >= PPT_TOL,
        min_pt_eigenvalue: min,
    })
}

/// Magnitude λ′ of the most negative eigenvalue of `[I ⊗ T](ρ)` recovered
/// from the minimal eigenvalue of the two-qubit approximation
/// `2/9 I + 1/9 [I ⊗ T](ρ)`.
pub fn lambda_prime_from_spa(lambda_min: f64) -> f64 {
    (-(9.0 * lambda_min - 2.0)).clamp(0.0, 0.5)
}

/// Binary Shannon entropy in bits, `H(0) = H(1) = 0`.
pub fn binary_entropy(x: f64) -> f64 {
    if x <= 0.0 || x >= 1.0 {
        return 0.0;
    }
    -x * x.log2() - (1.0 - x) * (1.0 - x).log2()
}

/// Entanglement of formation for concurrence `c`.
fn eof_from_concurrence(c: f64) -> f64 {
    binary_entropy((1.0 + (1.0 - c * c).max(0.0).sqrt()) / 2.0)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct EofBounds {
    pub lambda_prime: f64,
    pub lower: f64,
    pub upper: f64,
}

/// Lower and upper bounds on the entanglement of formation from the
/// concurrence range `2λ′ ≤ C ≤ 2(√(2λ′² + λ′) − λ′)`.
pub fn eof_bounds(lambda_prime: f64) -> Result<EofBounds> {
    if !(0.0..=0.5).contains(&lambda_prime) {
        return Err(Error::OutOfRange {
            name: "lambda_prime",
            value: lambda_prime,
            allowed: "[0, 1/2]",
        });
    }
    let c_lo = 2.0 * lambda_prime;
    let c_up = (2.0 * ((2.0 * lambda_prime * lambda_prime + lambda_prime).sqrt() - lambda_prime)).clamp(c_lo, 1.0);
    Ok(EofBounds {
        lambda_prime,
        lower: eof_from_concurrence(c_lo),
        upper: eof_from_concurrence(c_up),
    })
}
