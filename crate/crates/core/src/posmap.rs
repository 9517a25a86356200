//! Positive maps, their structural physical approximations, and the two-qubit
//! Pauli-channel realization of the approximated partial transpose.
//!
//! Choi convention: `J(Λ) = Σ_ij |i><j| ⊗ Λ(|i><j|)`, unnormalized, so that
//! `Λ(X)[a, b] = Σ_ij X[i, j] J[(i, a), (j, b)]`.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::{self, c, CMatrix, DEFAULT_DENSE_CAP, ONE, ZERO};
use crate::qstate::{self, DensityOperator};

/// Hermiticity tolerance on Choi matrices.
pub const CHOI_HERMITIAN_TOL: f64 = 1e-10;
/// Tolerance for deciding trace preservation from the Choi matrix.
pub const TRACE_PRESERVING_TOL: f64 = 1e-10;
/// `build_spa` refuses approximations whose Choi matrix dips below this.
pub const SPA_PSD_TOL: f64 = 1e-9;
/// Induced negativity below this is treated as zero (completely positive map).
pub const NEGATIVITY_FLOOR: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum BuiltinMap {
    Identity,
    Transpose,
    /// `X ↦ Tr(X) I/d`, completely positive.
    Depolarizing,
    /// `X ↦ (Tr(X) I − X)/(d − 1)`, positive but not completely positive for d ≥ 2.
    Reduction,
    /// `X ↦ (1/3) Σ_{x,y,z} σ X σ`, qubits only.
    PauliLambda1,
    /// `X ↦ (1/4) Σ_{0,x,y,z} σ X σ`, qubits only.
    PauliLambda2,
}

impl BuiltinMap {
    pub const ALL: [BuiltinMap; 6] = [
        BuiltinMap::Identity,
        BuiltinMap::Transpose,
        BuiltinMap::Depolarizing,
        BuiltinMap::Reduction,
        BuiltinMap::PauliLambda1,
        BuiltinMap::PauliLambda2,
    ];

    pub fn name(self) -> &'static str {
        match self {
            BuiltinMap::Identity => "identity",
            BuiltinMap::Transpose => "transpose",
            BuiltinMap::Depolarizing => "depolarizing",
            BuiltinMap::Reduction => "reduction",
            BuiltinMap::PauliLambda1 => "pauli-lambda1",
            BuiltinMap::PauliLambda2 => "pauli-lambda2",
        }
    }

    pub fn from_name(name: &str) -> Option<Self> {
        Self::ALL.into_iter().find(|b| b.name() == name)
    }
}

/// A Hermiticity-preserving linear map on `M_d`, held as its Choi matrix.
#[derive(Debug, Clone)]
pub struct PositiveMapSpec {
    name: String,
    d: usize,
    choi: CMatrix,
    declared_positive: bool,
    trace_preserving: bool,
    builtin: Option<BuiltinMap>,
}

impl PositiveMapSpec {
    pub fn builtin(kind: BuiltinMap, d: usize) -> Result<Self> {
        if d < 1 {
            return Err(Error::OutOfRange {
                name: "d",
                value: d as f64,
                allowed: ">= 1",
            });
        }
        let qubit_only = matches!(kind, BuiltinMap::PauliLambda1 | BuiltinMap::PauliLambda2);
        if qubit_only && d != 2 {
            return Err(Error::DimensionMismatch {
                expected: "d = 2".into(),
                found: format!("d = {d}"),
            });
        }
        if kind == BuiltinMap::Reduction && d < 2 {
            return Err(Error::OutOfRange {
                name: "d",
                value: d as f64,
                allowed: ">= 2 for the reduction map",
            });
        }
        let choi = choi_from_fn(d, |x| match kind {
            BuiltinMap::Identity => x.clone(),
            BuiltinMap::Transpose => x.transpose(),
            BuiltinMap::Depolarizing => CMatrix::identity(d, d) * linalg::trace(x) / c(d as f64, 0.0),
            BuiltinMap::Reduction => {
                (CMatrix::identity(d, d) * linalg::trace(x) - x).unscale((d - 1) as f64)
            }
            BuiltinMap::PauliLambda1 => pauli_lambda1_unchecked(x),
            BuiltinMap::PauliLambda2 => pauli_lambda2_unchecked(x),
        });
        let trace_preserving = is_trace_preserving(&choi, d);
        Ok(Self {
            name: kind.name().to_string(),
            d,
            choi,
            declared_positive: true,
            trace_preserving,
            builtin: Some(kind),
        })
    }

    /// Wraps a user-supplied Choi matrix. The map is rescaled so that
    /// `max_ρ Tr Λ(ρ) = 1`.
    pub fn from_choi(name: impl Into<String>, d: usize, choi: CMatrix, declared_positive: bool) -> Result<Self> {
        if choi.nrows() != d * d || choi.ncols() != d * d {
            return Err(Error::DimensionMismatch {
                expected: format!("{0}x{0} Choi matrix", d * d),
                found: format!("{}x{}", choi.nrows(), choi.ncols()),
            });
        }
        let deviation = linalg::hermitian_deviation(&choi);
        if deviation > CHOI_HERMITIAN_TOL {
            return Err(Error::NotHermitian { deviation });
        }
        let trace_form = output_trace(&choi, d);
        let max_trace = *linalg::hermitian_eigenvalues_unchecked(&trace_form)
            .last()
            .unwrap_or(&0.0);
        if max_trace <= 1e-12 {
            return Err(Error::Invalid(format!(
                "map has no positive trace direction (max Tr Λ(ρ) = {max_trace:e})"
            )));
        }
        let choi = choi.unscale(max_trace);
        let trace_preserving = is_trace_preserving(&choi, d);
        Ok(Self {
            name: name.into(),
            d,
            choi,
            declared_positive,
            trace_preserving,
            builtin: None,
        })
    }

    /// Builds the Choi matrix by evaluating `f` on the matrix units.
    pub fn from_fn(
        name: impl Into<String>,
        d: usize,
        declared_positive: bool,
        f: impl Fn(&CMatrix) -> CMatrix,
    ) -> Result<Self> {
        Self::from_choi(name, d, choi_from_fn(d, f), declared_positive)
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn d(&self) -> usize {
        self.d
    }

    pub fn choi(&self) -> &CMatrix {
        &self.choi
    }

    pub fn declared_positive(&self) -> bool {
        self.declared_positive
    }

    pub fn trace_preserving(&self) -> bool {
        self.trace_preserving
    }

    pub fn builtin_kind(&self) -> Option<BuiltinMap> {
        self.builtin
    }

    /// Λ(X) for a `d × d` matrix.
    pub fn apply(&self, x: &CMatrix) -> Result<CMatrix> {
        let d = self.d;
        if x.nrows() != d || x.ncols() != d {
            return Err(Error::DimensionMismatch {
                expected: format!("{d}x{d}"),
                found: format!("{}x{}", x.nrows(), x.ncols()),
            });
        }
        let mut out = CMatrix::zeros(d, d);
        for i in 0..d {
            for j in 0..d {
                let xij = x[(i, j)];
                if xij == ZERO {
                    continue;
                }
                for a in 0..d {
                    for b in 0..d {
                        out[(a, b)] += xij * self.choi[(i * d + a, j * d + b)];
                    }
                }
            }
        }
        Ok(out)
    }

    pub fn to_json_text(&self) -> String {
        format!(
            "{{\"d\": {},\n \"choi\": {},\n \"declared_positive\": {}}}\n",
            self.d,
            qstate::matrix_to_json_text(&self.choi),
            self.declared_positive
        )
    }

    /// Reads a custom map file `{"d", "choi", "declared_positive"}`.
    pub fn from_json(name: impl Into<String>, text: &str) -> Result<Self> {
        #[derive(Deserialize)]
        struct MapFile {
            d: usize,
            choi: serde_json::Value,
            declared_positive: bool,
        }
        let file: MapFile = serde_json::from_str(text)?;
        let choi = qstate::matrix_from_json(&file.choi)?;
        Self::from_choi(name, file.d, choi, file.declared_positive)
    }
}

fn choi_from_fn(d: usize, f: impl Fn(&CMatrix) -> CMatrix) -> CMatrix {
    let mut choi = CMatrix::zeros(d * d, d * d);
    for i in 0..d {
        for j in 0..d {
            let mut unit = CMatrix::zeros(d, d);
            unit[(i, j)] = ONE;
            let image = f(&unit);
            for a in 0..d {
                for b in 0..d {
                    choi[(i * d + a, j * d + b)] = image[(a, b)];
                }
            }
        }
    }
    choi
}

/// `Tr_out J`, whose `(i, j)` entry is `Tr Λ(|i><j|)`.
fn output_trace(choi: &CMatrix, d: usize) -> CMatrix {
    qstate::partial_trace(choi, &[d, d], 1)
        .map(|(_, m)| m)
        .expect("Choi matrix has two factors")
}

fn is_trace_preserving(choi: &CMatrix, d: usize) -> bool {
    linalg::max_abs_diff(&output_trace(choi, d), &CMatrix::identity(d, d)) <= TRACE_PRESERVING_TOL
}

/// Applies `Λ` (given by its Choi matrix on `[d, d]`) to one factor of a
/// multipartite operator.
fn apply_on_factor(m: &CMatrix, dims: &[usize], factor: usize, choi: &CMatrix) -> CMatrix {
    let d = dims[factor];
    let n = m.nrows();
    let mut out = CMatrix::zeros(n, n);
    let mut row = vec![0; dims.len()];
    let mut col = vec![0; dims.len()];
    for r in 0..n {
        linalg::digits(r, dims, &mut row);
        let a = row[factor];
        for cidx in 0..n {
            linalg::digits(cidx, dims, &mut col);
            let b = col[factor];
            let mut acc = ZERO;
            for i in 0..d {
                row[factor] = i;
                let ri = linalg::compose(&row, dims);
                for j in 0..d {
                    let jv = choi[(i * d + a, j * d + b)];
                    if jv == ZERO {
                        continue;
                    }
                    col[factor] = j;
                    acc += m[(ri, linalg::compose(&col, dims))] * jv;
                }
            }
            row[factor] = a;
            col[factor] = b;
            out[(r, cidx)] = acc;
        }
    }
    out
}

/// `[I ⊗ Λ](ρ)` with Λ on the second factor.
pub fn apply_induced(map: &PositiveMapSpec, rho: &DensityOperator) -> Result<CMatrix> {
    let d = rho.equal_bipartite_dim()?;
    if d != map.d {
        return Err(Error::DimensionMismatch {
            expected: format!("state on [{0}, {0}]", map.d),
            found: format!("{:?}", rho.dims()),
        });
    }
    Ok(apply_on_factor(rho.matrix(), rho.dims(), 1, &map.choi))
}

fn check_cap(d: usize, cap: usize) -> Result<()> {
    let required = d.pow(4);
    if required > cap {
        return Err(Error::Capacity { required, cap });
    }
    Ok(())
}

/// Magnitude λ of the most negative eigenvalue produced when
/// `(I ⊗ I) ⊗ (I ⊗ Λ)` acts on the maximally entangled state of two
/// `d²`-dimensional systems. Dense `d⁴ × d⁴` diagonalization.
pub fn most_negative_induced_eigenvalue(map: &PositiveMapSpec) -> Result<f64> {
    most_negative_induced_eigenvalue_with_cap(map, DEFAULT_DENSE_CAP)
}

pub fn most_negative_induced_eigenvalue_with_cap(map: &PositiveMapSpec, cap: usize) -> Result<f64> {
    if !map.declared_positive {
        return Err(Error::UndeclaredPositivity);
    }
    let d = map.d;
    check_cap(d, cap)?;
    let big = d * d;
    // |Φ> on (d ⊗ d) ⊗ (d ⊗ d): first d² part is factors 0,1, second is 2,3.
    let phi = qstate::make_max_entangled(big)?.to_density().into_matrix();
    let induced = apply_on_factor(&phi, &[d, d, d, d], 3, &map.choi);
    let min = linalg::hermitian_eigenvalues_unchecked(&induced)[0];
    Ok(snap_negativity(-min))
}

/// Same quantity from the factorization `|Φ_{d²}> = |Φ_d>|Φ_d>`: only the
/// `d² × d²` matrix `J/d` has to be diagonalized.
pub fn most_negative_induced_eigenvalue_factored(map: &PositiveMapSpec) -> f64 {
    let min = linalg::hermitian_eigenvalues_unchecked(&map.choi)[0];
    snap_negativity(-min / map.d as f64)
}

/// Eigensolver noise on a PSD operator reads as negativity of order 1e-16.
fn snap_negativity(lambda: f64) -> f64 {
    if lambda <= NEGATIVITY_FLOOR {
        0.0
    } else {
        lambda
    }
}

/// Structural physical approximation `p (I⊗I)/d² + (1 − p)[I ⊗ Λ]` at the
/// smallest weight `p` that makes it completely positive.
#[derive(Debug, Clone)]
pub struct SpaMap {
    base: PositiveMapSpec,
    lambda_neg: f64,
    p_star: f64,
    threshold: f64,
    choi_full: CMatrix,
    choi_min_eigenvalue: f64,
}

pub fn build_spa(map: &PositiveMapSpec) -> Result<SpaMap> {
    build_spa_with_cap(map, DEFAULT_DENSE_CAP)
}

pub fn build_spa_with_cap(map: &PositiveMapSpec, cap: usize) -> Result<SpaMap> {
    let lambda_neg = most_negative_induced_eigenvalue_with_cap(map, cap)?;
    let d = map.d;
    let d2 = (d * d) as f64;
    let d4 = d2 * d2;
    let p_star = d4 * lambda_neg / (d4 * lambda_neg + 1.0);
    let threshold = d2 * lambda_neg / (d4 * lambda_neg + 1.0);

    // Choi matrix of the approximation on M_{d²}: the depolarizing part
    // contributes I/d², the induced map contributes Choi(id_d ⊗ Λ).
    let n = d * d * d * d;
    let mut choi_full = CMatrix::identity(n, n).scale(p_star / d2);
    let w = 1.0 - p_star;
    for x in 0..d {
        for xp in 0..d {
            for i in 0..d {
                for j in 0..d {
                    let big_i = x * d + i;
                    let big_j = xp * d + j;
                    for a in 0..d {
                        for b in 0..d {
                            let out_row = x * d + a;
                            let out_col = xp * d + b;
                            choi_full[(big_i * d * d + out_row, big_j * d * d + out_col)] +=
                                map.choi[(i * d + a, j * d + b)] * w;
                        }
                    }
                }
            }
        }
    }
    let choi_min_eigenvalue = linalg::hermitian_eigenvalues_unchecked(&choi_full)[0];
    if choi_min_eigenvalue < -SPA_PSD_TOL {
        return Err(Error::NotCompletelyPositive {
            min_eigenvalue: choi_min_eigenvalue,
        });
    }
    Ok(SpaMap {
        base: map.clone(),
        lambda_neg,
        p_star,
        threshold,
        choi_full,
        choi_min_eigenvalue,
    })
}

impl SpaMap {
    pub fn base(&self) -> &PositiveMapSpec {
        &self.base
    }

    pub fn d(&self) -> usize {
        self.base.d
    }

    pub fn lambda_neg(&self) -> f64 {
        self.lambda_neg
    }

    pub fn p_star(&self) -> f64 {
        self.p_star
    }

    /// Lower bound on the spectrum of the output for every separable input.
    pub fn threshold(&self) -> f64 {
        self.threshold
    }

    pub fn choi_full(&self) -> &CMatrix {
        &self.choi_full
    }

    pub fn choi_min_eigenvalue(&self) -> f64 {
        self.choi_min_eigenvalue
    }

    /// Coefficient of `I ⊗ I` in the output, `p*/d²`.
    pub fn identity_coefficient(&self) -> f64 {
        let d2 = (self.base.d * self.base.d) as f64;
        self.p_star / d2
    }

    /// Coefficient of `[I ⊗ Λ](ρ)` in the output, `1 − p*`.
    pub fn map_coefficient(&self) -> f64 {
        1.0 - self.p_star
    }

    pub fn trace_preserving(&self) -> bool {
        self.base.trace_preserving
    }

    /// Output before any normalization. Hermitian and PSD; unit trace only
    /// when the base map is trace-preserving.
    pub fn apply_unnormalized(&self, rho: &DensityOperator) -> Result<CMatrix> {
        let induced = apply_induced(&self.base, rho)?;
        let m = induced.nrows();
        Ok(CMatrix::identity(m, m).scale(self.identity_coefficient()) + induced.scale(self.map_coefficient()))
    }
}

/// `ρ′ = [I ⊗ Λ]~(ρ)`. Fails with a trace error when the base map is not
/// trace-preserving; use [`SpaMap::apply_unnormalized`] with
/// [`postselect_normalize`] there.
pub fn apply_spa(spa: &SpaMap, rho: &DensityOperator) -> Result<DensityOperator> {
    DensityOperator::new(rho.dims().to_vec(), spa.apply_unnormalized(rho)?)
}

/// Normalizes a postselected output, returning the state and the trace the
/// measured minimal eigenvalue must be multiplied by.
pub fn postselect_normalize(sigma: &CMatrix, dims: &[usize]) -> Result<(DensityOperator, f64)> {
    let trace = linalg::trace(sigma).re;
    if trace <= 1e-12 {
        return Err(Error::VanishingTrace { trace });
    }
    let state = DensityOperator::new(dims.to_vec(), sigma.unscale(trace))?;
    Ok((state, trace))
}

// --- Pauli channels ---------------------------------------------------------

pub fn pauli(which: usize) -> CMatrix {
    let m = match which {
        0 => [ONE, ZERO, ZERO, ONE],
        1 => [ZERO, ONE, ONE, ZERO],
        2 => [ZERO, c(0.0, -1.0), c(0.0, 1.0), ZERO],
        3 => [ONE, ZERO, ZERO, -ONE],
        _ => panic!("Pauli index {which} out of range"),
    };
    CMatrix::from_row_slice(2, 2, &m)
}

fn conjugate(u: &CMatrix, x: &CMatrix) -> CMatrix {
    u * x * u.adjoint()
}

fn pauli_lambda1_unchecked(x: &CMatrix) -> CMatrix {
    (1..=3).map(|i| conjugate(&pauli(i), x)).fold(CMatrix::zeros(2, 2), |a, b| a + b).unscale(3.0)
}

fn pauli_lambda2_unchecked(x: &CMatrix) -> CMatrix {
    (0..=3).map(|i| conjugate(&pauli(i), x)).fold(CMatrix::zeros(2, 2), |a, b| a + b).unscale(4.0)
}

fn require_qubit(x: &CMatrix) -> Result<()> {
    if x.nrows() != 2 || x.ncols() != 2 {
        return Err(Error::DimensionMismatch {
            expected: "2x2".into(),
            found: format!("{}x{}", x.nrows(), x.ncols()),
        });
    }
    Ok(())
}

/// `Λ₁(X) = (1/3) Σ_{i=x,y,z} σᵢ X σᵢ`.
pub fn pauli_channel_lambda1(x: &CMatrix) -> Result<CMatrix> {
    require_qubit(x)?;
    Ok(pauli_lambda1_unchecked(x))
}

/// `Λ₂(X) = (1/4) Σ_{i=0,x,y,z} σᵢ X σᵢ = Tr(X) I/2`.
pub fn pauli_channel_lambda2(x: &CMatrix) -> Result<CMatrix> {
    require_qubit(x)?;
    Ok(pauli_lambda2_unchecked(x))
}

/// Weight of the `Λ₁ ⊗ Λ₂` branch that reproduces `2/9 I⊗I + 1/9 [I⊗T](ρ)`.
/// The remaining `1/3` goes to `I ⊗ (σxσz) Λ₁ (σzσx)`, whose Bloch
/// contraction of 1/3 then yields the 1/9 coefficient of the transpose.
pub const PAULI_PRODUCT_WEIGHT: f64 = 2.0 / 3.0;

/// Mixture `w (Λ₁ ⊗ Λ₂)(ρ) + (1 − w)(I ⊗ U Λ₁ U†)(ρ)` with `U = σx σz`,
/// realized as a random choice of local Pauli products.
pub fn pauli_mixture(rho: &DensityOperator, product_weight: f64) -> Result<DensityOperator> {
    if rho.dims() != [2, 2] {
        return Err(Error::DimensionMismatch {
            expected: "[2, 2]".into(),
            found: format!("{:?}", rho.dims()),
        });
    }
    let m = rho.matrix();
    let mut out = CMatrix::zeros(4, 4);
    for a in 1..=3 {
        for b in 0..=3 {
            let k = linalg::kron(&pauli(a), &pauli(b));
            out += conjugate(&k, m).scale(product_weight / 12.0);
        }
    }
    let u = pauli(1) * pauli(3);
    let id = CMatrix::identity(2, 2);
    for a in 1..=3 {
        let k = linalg::kron(&id, &(&u * pauli(a)));
        out += conjugate(&k, m).scale((1.0 - product_weight) / 3.0);
    }
    DensityOperator::new(vec![2, 2], out)
}

/// The two-qubit approximated partial transpose computed from Pauli channels.
pub fn apply_spa_pauli_decomposition(rho: &DensityOperator) -> Result<DensityOperator> {
    pauli_mixture(rho, PAULI_PRODUCT_WEIGHT)
}
