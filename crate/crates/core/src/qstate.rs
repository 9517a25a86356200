//! Density operators on multipartite systems and the state families used as
//! test inputs.
//!
//! Basis ordering: the joint computational basis is the Kronecker product of
//! the subsystem bases with the leftmost subsystem most significant, so for
//! dims `[d1, d2]` the basis vector `|i>|j>` sits at index `i * d2 + j`. The
//! rightmost subsystem index varies fastest.

use std::f64::consts::FRAC_1_SQRT_2;
use std::fmt::Write as _;

use rand::Rng;
use rand_distr::{Exp1, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::{self, c, CMatrix, CVector, ONE, ZERO};
use crate::rng;

/// Tolerance for the Hermiticity, trace and positivity checks on construction.
pub const CONSTRUCTION_TOL: f64 = 1e-9;
/// Tolerance on the norm of a pure state.
pub const NORM_TOL: f64 = 1e-12;

#[derive(Debug, Clone, PartialEq)]
pub struct DensityOperator {
    dims: Vec<usize>,
    matrix: CMatrix,
}

impl DensityOperator {
    /// Validates Hermiticity, unit trace and positivity.
    pub fn new(dims: Vec<usize>, matrix: CMatrix) -> Result<Self> {
        check_shape(&dims, &matrix)?;
        let deviation = linalg::hermitian_deviation(&matrix);
        if deviation > CONSTRUCTION_TOL {
            return Err(Error::NotHermitian { deviation });
        }
        let trace = linalg::trace(&matrix).re;
        if (trace - 1.0).abs() > CONSTRUCTION_TOL {
            return Err(Error::TraceNotUnit { trace });
        }
        let min_eigenvalue = linalg::hermitian_eigenvalues_unchecked(&matrix)[0];
        if min_eigenvalue < -CONSTRUCTION_TOL {
            return Err(Error::NotPositive { min_eigenvalue });
        }
        Ok(Self { dims, matrix })
    }

    pub fn maximally_mixed(dims: Vec<usize>) -> Self {
        let m: usize = dims.iter().product();
        let matrix = CMatrix::identity(m, m).scale(1.0 / m as f64);
        Self { dims, matrix }
    }

    pub fn dims(&self) -> &[usize] {
        &self.dims
    }

    pub fn dim(&self) -> usize {
        self.matrix.nrows()
    }

    pub fn matrix(&self) -> &CMatrix {
        &self.matrix
    }

    pub fn into_matrix(self) -> CMatrix {
        self.matrix
    }

    pub fn tensor(&self, other: &DensityOperator) -> DensityOperator {
        let mut dims = self.dims.clone();
        dims.extend_from_slice(&other.dims);
        DensityOperator {
            dims,
            matrix: linalg::kron(&self.matrix, &other.matrix),
        }
    }

    pub fn partial_transpose(&self, subsystem: usize) -> Result<CMatrix> {
        partial_transpose(&self.matrix, &self.dims, subsystem)
    }

    pub fn partial_trace(&self, subsystem: usize) -> Result<DensityOperator> {
        let (dims, matrix) = partial_trace(&self.matrix, &self.dims, subsystem)?;
        Ok(DensityOperator { dims, matrix })
    }

    pub fn eigenvalues(&self) -> Vec<f64> {
        linalg::hermitian_eigenvalues_unchecked(&self.matrix)
    }

    /// Bipartite local dimension `d` if the state lives on `[d, d]`.
    pub fn equal_bipartite_dim(&self) -> Result<usize> {
        match self.dims.as_slice() {
            [a, b] if a == b => Ok(*a),
            _ => Err(Error::DimensionMismatch {
                expected: "bipartite dims [d, d]".into(),
                found: format!("{:?}", self.dims),
            }),
        }
    }
}

fn check_shape(dims: &[usize], matrix: &CMatrix) -> Result<()> {
    let m: usize = dims.iter().product();
    if dims.is_empty() || dims.contains(&0) || matrix.nrows() != m || matrix.ncols() != m {
        return Err(Error::DimensionMismatch {
            expected: format!("{m}x{m} matrix for dims {dims:?}"),
            found: format!("{}x{}", matrix.nrows(), matrix.ncols()),
        });
    }
    Ok(())
}

#[derive(Debug, Clone, PartialEq)]
pub struct PureState {
    dims: Vec<usize>,
    amplitudes: CVector,
}

impl PureState {
    pub fn new(dims: Vec<usize>, amplitudes: CVector) -> Result<Self> {
        let m: usize = dims.iter().product();
        if dims.is_empty() || amplitudes.len() != m {
            return Err(Error::DimensionMismatch {
                expected: format!("{m} amplitudes for dims {dims:?}"),
                found: amplitudes.len().to_string(),
            });
        }
        let norm = amplitudes.norm();
        if (norm - 1.0).abs() > NORM_TOL {
            return Err(Error::NotNormalized { norm });
        }
        Ok(Self { dims, amplitudes })
    }

    /// Computational basis vector `|index>`.
    pub fn basis(dims: Vec<usize>, index: usize) -> Result<Self> {
        let m: usize = dims.iter().product();
        if index >= m {
            return Err(Error::Invalid(format!("basis index {index} >= {m}")));
        }
        let mut amplitudes = CVector::zeros(m);
        amplitudes[index] = ONE;
        Self::new(dims, amplitudes)
    }

    pub fn dims(&self) -> &[usize] {
        &self.dims
    }

    pub fn amplitudes(&self) -> &CVector {
        &self.amplitudes
    }

    pub fn tensor(&self, other: &PureState) -> PureState {
        let mut dims = self.dims.clone();
        dims.extend_from_slice(&other.dims);
        PureState {
            dims,
            amplitudes: self.amplitudes.kronecker(&other.amplitudes),
        }
    }

    pub fn to_density(&self) -> DensityOperator {
        DensityOperator {
            dims: self.dims.clone(),
            matrix: &self.amplitudes * self.amplitudes.adjoint(),
        }
    }
}

/// Transposes the indices of one tensor factor. The result is Hermitian with
/// the same trace but need not be positive.
pub fn partial_transpose(m: &CMatrix, dims: &[usize], subsystem: usize) -> Result<CMatrix> {
    if subsystem >= dims.len() {
        return Err(Error::InvalidSubsystem {
            index: subsystem,
            count: dims.len(),
        });
    }
    let n = m.nrows();
    let mut row = vec![0; dims.len()];
    let mut col = vec![0; dims.len()];
    let mut out = CMatrix::zeros(n, n);
    for r in 0..n {
        linalg::digits(r, dims, &mut row);
        for cidx in 0..n {
            linalg::digits(cidx, dims, &mut col);
            std::mem::swap(&mut row[subsystem], &mut col[subsystem]);
            out[(r, cidx)] = m[(linalg::compose(&row, dims), linalg::compose(&col, dims))];
            std::mem::swap(&mut row[subsystem], &mut col[subsystem]);
        }
    }
    Ok(out)
}

/// Traces out one tensor factor, returning the reduced dims and matrix.
pub fn partial_trace(m: &CMatrix, dims: &[usize], subsystem: usize) -> Result<(Vec<usize>, CMatrix)> {
    if subsystem >= dims.len() || dims.len() < 2 {
        return Err(Error::InvalidSubsystem {
            index: subsystem,
            count: dims.len(),
        });
    }
    let mut reduced = dims.to_vec();
    let traced = reduced.remove(subsystem);
    let n: usize = reduced.iter().product();
    let mut row = vec![0; reduced.len()];
    let mut col = vec![0; reduced.len()];
    let mut full_row = vec![0; dims.len()];
    let mut full_col = vec![0; dims.len()];
    let mut out = CMatrix::zeros(n, n);
    for r in 0..n {
        linalg::digits(r, &reduced, &mut row);
        for cidx in 0..n {
            linalg::digits(cidx, &reduced, &mut col);
            let mut acc = ZERO;
            for x in 0..traced {
                insert_digit(&row, subsystem, x, &mut full_row);
                insert_digit(&col, subsystem, x, &mut full_col);
                acc += m[(linalg::compose(&full_row, dims), linalg::compose(&full_col, dims))];
            }
            out[(r, cidx)] = acc;
        }
    }
    Ok((reduced, out))
}

fn insert_digit(src: &[usize], at: usize, value: usize, dst: &mut [usize]) {
    dst[..at].copy_from_slice(&src[..at]);
    dst[at] = value;
    dst[at + 1..].copy_from_slice(&src[at..]);
}

// --- state families -------------------------------------------------------

/// Bell states: 0 = Φ+, 1 = Φ−, 2 = Ψ+, 3 = Ψ− (singlet).
pub fn make_bell(which: u8) -> Result<PureState> {
    let h = c(FRAC_1_SQRT_2, 0.0);
    let amps = match which {
        0 => [h, ZERO, ZERO, h],
        1 => [h, ZERO, ZERO, -h],
        2 => [ZERO, h, h, ZERO],
        3 => [ZERO, h, -h, ZERO],
        _ => {
            return Err(Error::OutOfRange {
                name: "which",
                value: which as f64,
                allowed: "0..=3",
            })
        }
    };
    PureState::new(vec![2, 2], CVector::from_row_slice(&amps))
}

/// `q |Ψ−><Ψ−| + (1 − q) I/4`.
pub fn make_werner(q: f64) -> Result<DensityOperator> {
    if !(0.0..=1.0).contains(&q) {
        return Err(Error::OutOfRange {
            name: "q",
            value: q,
            allowed: "[0, 1]",
        });
    }
    let singlet = make_bell(3)?.to_density().into_matrix();
    let matrix = singlet.scale(q) + CMatrix::identity(4, 4).scale((1.0 - q) / 4.0);
    DensityOperator::new(vec![2, 2], matrix)
}

/// `(1/√d) Σ_i |i>|i>` on `[d, d]`.
pub fn make_max_entangled(d: usize) -> Result<PureState> {
    if d < 1 {
        return Err(Error::OutOfRange {
            name: "d",
            value: d as f64,
            allowed: ">= 1",
        });
    }
    let mut amps = CVector::zeros(d * d);
    let a = c(1.0 / (d as f64).sqrt(), 0.0);
    for i in 0..d {
        amps[i * d + i] = a;
    }
    PureState::new(vec![d, d], amps)
}

/// Isotropic state with fidelity `f` to the maximally entangled state:
/// `f |Φ><Φ| + (1 − f)(I − |Φ><Φ|)/(d² − 1)`.
pub fn make_isotropic(f: f64, d: usize) -> Result<DensityOperator> {
    if !(0.0..=1.0).contains(&f) {
        return Err(Error::OutOfRange {
            name: "f",
            value: f,
            allowed: "[0, 1]",
        });
    }
    if d < 2 {
        return Err(Error::OutOfRange {
            name: "d",
            value: d as f64,
            allowed: ">= 2",
        });
    }
    let m = d * d;
    let phi = make_max_entangled(d)?.to_density().into_matrix();
    let rest = CMatrix::identity(m, m) - &phi;
    let matrix = phi.scale(f) + rest.scale((1.0 - f) / (m as f64 - 1.0));
    DensityOperator::new(vec![d, d], matrix)
}

fn gaussian_complex<R: Rng>(rng: &mut R) -> num_complex::Complex64 {
    c(rng.sample(StandardNormal), rng.sample(StandardNormal))
}

fn haar_vector<R: Rng>(dim: usize, rng: &mut R) -> CVector {
    let v = CVector::from_fn(dim, |_, _| gaussian_complex(rng));
    let norm = v.norm();
    v.unscale(norm)
}

/// Random state `G G† / Tr(G G†)` with `G` an `m × rank` Ginibre matrix.
pub fn random_density(dims: &[usize], rank: usize, seed: u64) -> Result<DensityOperator> {
    let m: usize = dims.iter().product();
    if rank == 0 || rank > m {
        return Err(Error::OutOfRange {
            name: "rank",
            value: rank as f64,
            allowed: "1..=m",
        });
    }
    let mut rng = rng::stream(seed, 0);
    let g = CMatrix::from_fn(m, rank, |_, _| gaussian_complex(&mut rng));
    let gg = &g * g.adjoint();
    let tr = linalg::trace(&gg).re;
    DensityOperator::new(dims.to_vec(), gg.unscale(tr))
}

/// Convex mixture of `terms` random product pure states on `[d, d]` with
/// flat-Dirichlet weights. Separable by construction.
pub fn random_separable(d: usize, terms: usize, seed: u64) -> Result<DensityOperator> {
    if d < 1 || terms < 1 {
        return Err(Error::Invalid("random_separable needs d >= 1 and terms >= 1".into()));
    }
    let mut rng = rng::stream(seed, 0);
    let weights: Vec<f64> = (0..terms).map(|_| rng.sample::<f64, _>(Exp1)).collect();
    let total: f64 = weights.iter().sum();
    let mut matrix = CMatrix::zeros(d * d, d * d);
    for w in weights {
        let a = haar_vector(d, &mut rng);
        let b = haar_vector(d, &mut rng);
        let ab = a.kronecker(&b);
        matrix += (&ab * ab.adjoint()).scale(w / total);
    }
    DensityOperator::new(vec![d, d], matrix)
}

// --- state files -----------------------------------------------------------

#[derive(Debug, Serialize, Deserialize)]
struct StateFile {
    dims: Vec<usize>,
    matrix: Vec<Vec<[f64; 2]>>,
}

/// Parses a row-major complex matrix given as `[[[re, im], ...], ...]`.
pub fn matrix_from_json(value: &serde_json::Value) -> Result<CMatrix> {
    let rows: Vec<Vec<[f64; 2]>> = serde_json::from_value(value.clone())?;
    rows_to_matrix(&rows)
}

fn rows_to_matrix(rows: &[Vec<[f64; 2]>]) -> Result<CMatrix> {
    let n = rows.len();
    if rows.iter().any(|r| r.len() != n) {
        return Err(Error::Invalid("matrix must be square".into()));
    }
    Ok(CMatrix::from_fn(n, n, |i, j| c(rows[i][j][0], rows[i][j][1])))
}

/// Reads a state file, enforcing the construction invariants.
pub fn read_state_json(text: &str) -> Result<DensityOperator> {
    let file: StateFile = serde_json::from_str(text)?;
    let matrix = rows_to_matrix(&file.matrix)?;
    DensityOperator::new(file.dims, matrix)
}

/// Formats a float with 17 significant digits.
pub fn fmt_f64(x: f64) -> String {
    format!("{x:.16e}")
}

pub fn matrix_to_json_text(m: &CMatrix) -> String {
    let mut out = String::from("[");
    for i in 0..m.nrows() {
        if i > 0 {
            out.push_str(",\n  ");
        }
        out.push('[');
        for j in 0..m.ncols() {
            if j > 0 {
                out.push_str(", ");
            }
            let z = m[(i, j)];
            let _ = write!(out, "[{}, {}]", fmt_f64(z.re), fmt_f64(z.im));
        }
        out.push(']');
    }
    out.push(']');
    out
}

pub fn write_state_json(rho: &DensityOperator) -> String {
    let dims: Vec<String> = rho.dims.iter().map(|d| d.to_string()).collect();
    format!(
        "{{\"dims\": [{}],\n \"matrix\": {}}}\n",
        dims.join(", "),
        matrix_to_json_text(&rho.matrix)
    )
}
