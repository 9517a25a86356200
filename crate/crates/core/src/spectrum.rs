//! Spectrum reconstruction from power sums `p_k = Tr ρ^k`.
//!
//! Newton's identities turn the power sums into elementary symmetric
//! polynomials, which are the coefficients of the characteristic polynomial;
//! its roots are found as eigenvalues of the companion matrix.

use nalgebra::DMatrix;
use num_complex::Complex64;
use serde::Serialize;

/// Finite-difference step for the uncertainty Jacobian.
pub const JACOBIAN_STEP: f64 = 1e-6;
/// Scale factor for the multiple-root merge radius `c · ε^{1/μ}`.
const CLUSTER_FACTOR: f64 = 100.0;
const MERGE_CONSISTENCY_TOL: f64 = 1e-10;
/// Allowance, in rounding-error bounds, for a merge to miss a moment.
const MERGE_NOISE_FACTOR: f64 = 100.0;
const POLISH_ITERATIONS: usize = 5;

#[derive(Debug, Clone, Copy, Default)]
pub struct SpectrumOptions {
    /// Also report the Euclidean projection of the eigenvalues onto the
    /// simplex `{x ≥ 0, Σx = p₁}`. Does not affect `lambda_min`.
    pub project_to_simplex: bool,
}

#[derive(Debug, Clone, Serialize)]
pub struct SpectrumEstimate {
    pub m: usize,
    pub power_sums: Vec<f64>,
    pub power_sum_std_errors: Vec<f64>,
    /// Companion-matrix roots before any cleanup.
    pub eigenvalues_raw: Vec<Complex64>,
    /// Real parts of the cleaned roots, ascending.
    pub eigenvalues: Vec<f64>,
    /// Roots whose imaginary part survived cleanup.
    pub complex_roots: usize,
    pub max_imag_residue: f64,
    pub lambda_min: f64,
    pub lambda_min_std_error: f64,
    pub degenerate_warning: bool,
    /// False when the power sums are not those of any density matrix
    /// (complex or out-of-range roots, `p₂ > p₁²`).
    pub valid: bool,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub projected: Option<Vec<f64>>,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MinEigenvalue {
    pub value: f64,
    pub std_error: f64,
    /// The two smallest roots lie within two standard errors of each other,
    /// so the first-order uncertainty is unreliable.
    pub degenerate: bool,
}

/// `e_0 … e_m` from `p_1 … p_m` via `k e_k = Σ_{i=1}^{k} (−1)^{i−1} e_{k−i} p_i`.
pub fn elementary_symmetric(power_sums: &[f64]) -> Vec<f64> {
    let m = power_sums.len();
    let mut e = Vec::with_capacity(m + 1);
    e.push(1.0);
    for k in 1..=m {
        let mut acc = 0.0;
        for i in 1..=k {
            let sign = if i % 2 == 1 { 1.0 } else { -1.0 };
            acc += sign * e[k - i] * power_sums[i - 1];
        }
        e.push(acc / k as f64);
    }
    e
}

/// Monic characteristic polynomial coefficients, highest degree first:
/// `x^m − e₁ x^{m−1} + e₂ x^{m−2} − …`.
pub fn characteristic_polynomial(power_sums: &[f64]) -> Vec<f64> {
    elementary_symmetric(power_sums)
        .into_iter()
        .enumerate()
        .map(|(k, ek)| if k % 2 == 0 { ek } else { -ek })
        .collect()
}

fn horner(coeffs: &[f64], x: Complex64) -> (Complex64, Complex64) {
    let mut value = Complex64::new(0.0, 0.0);
    let mut deriv = Complex64::new(0.0, 0.0);
    for &a in coeffs {
        deriv = deriv * x + value;
        value = value * x + a;
    }
    (value, deriv)
}

fn companion_roots(coeffs: &[f64]) -> Vec<Complex64> {
    let m = coeffs.len() - 1;
    if m == 0 {
        return Vec::new();
    }
    if m == 1 {
        return vec![Complex64::new(-coeffs[1], 0.0)];
    }
    let mut comp = DMatrix::<f64>::zeros(m, m);
    for i in 1..m {
        comp[(i, i - 1)] = 1.0;
    }
    for i in 0..m {
        comp[(i, m - 1)] = -coeffs[m - i];
    }
    comp.complex_eigenvalues().iter().copied().collect()
}

fn polish(coeffs: &[f64], root: Complex64) -> Complex64 {
    let mut x = root;
    let mut residual = horner(coeffs, x).0.norm();
    for _ in 0..POLISH_ITERATIONS {
        let (v, dv) = horner(coeffs, x);
        if dv.norm() == 0.0 {
            break;
        }
        let candidate = x - v / dv;
        let r = horner(coeffs, candidate).0.norm();
        if r < residual {
            x = candidate;
            residual = r;
        } else {
            break;
        }
    }
    x
}

fn diameter(roots: &[Complex64], members: &[usize]) -> f64 {
    let mut worst = 0.0f64;
    for (n, &i) in members.iter().enumerate() {
        for &j in &members[n + 1..] {
            worst = worst.max((roots[i] - roots[j]).norm());
        }
    }
    worst
}

/// Whether `roots` reproduce every power sum within its tolerance.
fn reproduces(power_sums: &[f64], tolerances: &[f64], roots: &[Complex64]) -> bool {
    power_sums.iter().zip(tolerances).enumerate().all(|(idx, (&p, &tol))| {
        let q: Complex64 = roots.iter().map(|z| z.powi(idx as i32 + 1)).sum();
        (q - p).norm() <= tol * (1.0 + p.abs())
    })
}

/// Merges perturbed multiple roots into their centroid and polishes the
/// simple ones. Larger multiplicities are searched first, since a perturbed
/// μ-fold root spreads by roughly `ε^{1/μ}` and its sub-pairs are already
/// far apart at the pair radius. A merge is kept only if the merged roots
/// still reproduce the power sums.
fn merge_multiple_roots(power_sums: &[f64], tolerances: &[f64], coeffs: &[f64], raw: &[Complex64]) -> Vec<Complex64> {
    let scale = 1.0 + raw.iter().map(|z| z.norm()).fold(0.0, f64::max);
    let radius = |mult: usize| CLUSTER_FACTOR * f64::EPSILON.powf(1.0 / mult as f64) * scale;
    let mut roots = raw.to_vec();
    let mut remaining: Vec<usize> = (0..raw.len()).collect();
    for mult in (2..=raw.len()).rev() {
        loop {
            if remaining.len() < mult {
                break;
            }
            let mut candidates: Vec<(Vec<usize>, f64)> = Vec::new();
            for &center in &remaining {
                let mut by_distance = remaining.clone();
                by_distance.sort_by(|&a, &b| (raw[a] - raw[center]).norm().total_cmp(&(raw[b] - raw[center]).norm()));
                let members = &by_distance[..mult];
                let diam = diameter(raw, members);
                if diam <= radius(mult) {
                    candidates.push((members.to_vec(), diam));
                }
            }
            candidates.sort_by(|a, b| a.1.total_cmp(&b.1));
            let accepted = candidates.into_iter().find_map(|(members, _)| {
                let centroid = members.iter().map(|&i| raw[i]).sum::<Complex64>() / mult as f64;
                let mut trial = roots.clone();
                for &i in &members {
                    trial[i] = centroid;
                }
                reproduces(power_sums, tolerances, &trial).then_some((members, trial))
            });
            let Some((members, trial)) = accepted else { break };
            roots = trial;
            remaining.retain(|i| !members.contains(i));
        }
    }
    for i in remaining {
        roots[i] = polish(coeffs, raw[i]);
    }
    roots
}

struct Roots {
    raw: Vec<Complex64>,
    cleaned: Vec<Complex64>,
    imag_tol: f64,
}

/// Moments about `centre`, `q_j = Σ_k C(j,k) (−centre)^{j−k} p_k` with
/// `p_0 = m`, each with a bound on the rounding error it inherits.
fn central_moments(power_sums: &[f64], centre: f64) -> (Vec<f64>, Vec<f64>) {
    let m = power_sums.len();
    let p = |k: usize| if k == 0 { m as f64 } else { power_sums[k - 1] };
    let mut moments = Vec::with_capacity(m);
    let mut errors = Vec::with_capacity(m);
    for j in 1..=m {
        let mut binom = 1.0;
        let mut acc = 0.0;
        let mut magnitude = 0.0;
        for k in (0..=j).rev() {
            let term = binom * (-centre).powi((j - k) as i32) * p(k);
            acc += term;
            magnitude += term.abs();
            binom = binom * k as f64 / (j - k + 1) as f64;
        }
        moments.push(acc);
        errors.push(4.0 * (j + 1) as f64 * f64::EPSILON * magnitude);
    }
    (moments, errors)
}

/// Roots are found for the spectrum shifted to zero mean and scaled to unit
/// spread; clustered spectra lose most of their digits otherwise.
fn reconstruct(power_sums: &[f64]) -> Roots {
    let m = power_sums.len();
    if m == 0 {
        return Roots { raw: Vec::new(), cleaned: Vec::new(), imag_tol: 0.0 };
    }
    let centre = power_sums[0] / m as f64;
    let (mut moments, errors) = central_moments(power_sums, centre);
    moments[0] = 0.0;
    for (q, err) in moments.iter_mut().zip(&errors) {
        if q.abs() <= *err {
            *q = 0.0;
        }
    }
    let spread = moments
        .iter()
        .enumerate()
        .skip(1)
        .map(|(idx, q)| (q.abs() / m as f64).powf(1.0 / (idx + 1) as f64))
        .fold(0.0, f64::max);
    let lift = |y: Complex64| Complex64::new(centre, 0.0) + y * spread;

    let (raw, mut cleaned) = if spread == 0.0 {
        let all = vec![Complex64::new(centre, 0.0); m];
        (all.clone(), all)
    } else {
        let scaled: Vec<f64> = moments
            .iter()
            .enumerate()
            .map(|(idx, q)| q / spread.powi(idx as i32 + 1))
            .collect();
        let tolerances: Vec<f64> = errors
            .iter()
            .enumerate()
            .map(|(idx, e)| MERGE_CONSISTENCY_TOL + MERGE_NOISE_FACTOR * e / spread.powi(idx as i32 + 1))
            .collect();
        let coeffs = characteristic_polynomial(&scaled);
        let raw = companion_roots(&coeffs);
        let cleaned = merge_multiple_roots(&scaled, &tolerances, &coeffs, &raw);
        (raw.into_iter().map(lift).collect(), cleaned.into_iter().map(lift).collect())
    };
    let imag_tol = 1e-6 * (1.0 + cleaned.iter().map(|z| z.norm()).fold(0.0, f64::max));
    for z in &mut cleaned {
        if z.im.abs() <= imag_tol {
            z.im = 0.0;
        }
    }
    cleaned.sort_by(|a, b| a.re.total_cmp(&b.re));
    Roots { raw, cleaned, imag_tol }
}

fn smallest_root(power_sums: &[f64]) -> f64 {
    reconstruct(power_sums).cleaned.first().map_or(0.0, |z| z.re)
}

/// Reconstructs the spectrum from `p₁ … p_m` and their standard errors.
/// Noisy input may produce complex or negative roots; they are reported,
/// not hidden.
pub fn newton_spectrum(power_sums: &[f64], std_errors: &[f64], options: SpectrumOptions) -> SpectrumEstimate {
    assert_eq!(power_sums.len(), std_errors.len(), "one standard error per power sum");
    let m = power_sums.len();
    let roots = reconstruct(power_sums);
    let eigenvalues: Vec<f64> = roots.cleaned.iter().map(|z| z.re).collect();
    let complex_roots = roots.cleaned.iter().filter(|z| z.im != 0.0).count();
    let max_imag_residue = roots.raw.iter().map(|z| z.im.abs()).fold(0.0, f64::max);
    let lambda_min = eigenvalues.first().copied().unwrap_or(0.0);

    let mut variance = 0.0;
    for k in 0..m {
        if std_errors[k] == 0.0 {
            continue;
        }
        let mut up = power_sums.to_vec();
        let mut down = power_sums.to_vec();
        up[k] += JACOBIAN_STEP;
        down[k] -= JACOBIAN_STEP;
        let slope = (smallest_root(&up) - smallest_root(&down)) / (2.0 * JACOBIAN_STEP);
        variance += (slope * std_errors[k]).powi(2);
    }
    let lambda_min_std_error = variance.sqrt();

    let degenerate_warning = eigenvalues.len() >= 2 && eigenvalues[1] - eigenvalues[0] <= 2.0 * lambda_min_std_error;
    let p1 = power_sums.first().copied().unwrap_or(0.0);
    let tol = roots.imag_tol;
    let valid = complex_roots == 0
        && eigenvalues.iter().all(|&x| x >= -tol && x <= p1 + tol)
        && power_sums.get(1).is_none_or(|&p2| p2 <= p1 * p1 + tol);
    let projected = options.project_to_simplex.then(|| project_to_simplex(&eigenvalues, p1));

    SpectrumEstimate {
        m,
        power_sums: power_sums.to_vec(),
        power_sum_std_errors: std_errors.to_vec(),
        eigenvalues_raw: roots.raw,
        eigenvalues,
        complex_roots,
        max_imag_residue,
        lambda_min,
        lambda_min_std_error,
        degenerate_warning,
        valid,
        projected,
    }
}

/// Power sums known exactly (standard error zero).
pub fn newton_spectrum_exact(power_sums: &[f64]) -> SpectrumEstimate {
    newton_spectrum(power_sums, &vec![0.0; power_sums.len()], SpectrumOptions::default())
}

pub fn min_eigenvalue(est: &SpectrumEstimate) -> MinEigenvalue {
    MinEigenvalue {
        value: est.lambda_min,
        std_error: est.lambda_min_std_error,
        degenerate: est.degenerate_warning,
    }
}

/// Euclidean projection onto `{x ≥ 0, Σx = total}`, in the input order.
pub fn project_to_simplex(values: &[f64], total: f64) -> Vec<f64> {
    if values.is_empty() {
        return Vec::new();
    }
    let mut sorted = values.to_vec();
    sorted.sort_by(|a, b| b.total_cmp(a));
    let mut cumulative = 0.0;
    let mut theta = 0.0;
    for (j, &u) in sorted.iter().enumerate() {
        cumulative += u;
        let candidate = (cumulative - total) / (j + 1) as f64;
        if u - candidate > 0.0 {
            theta = candidate;
        }
    }
    values.iter().map(|&v| (v - theta).max(0.0)).collect()
}
