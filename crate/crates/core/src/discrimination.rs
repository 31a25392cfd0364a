//! Two-state discrimination.
//!
//! Norm convention: `||M||_1` is the Schatten-1 norm (sum of singular
//! values). Orthogonal pure states therefore sit at distance 2, and the
//! optimal probability of telling two equiprobable states apart is
//! `1/2 + ||rho_1 - rho_2||_1 / 4`. A 0.9 success target corresponds to a
//! Schatten-1 distance of 1.6 (trace distance 0.8).

use nalgebra::DMatrix;
use num_complex::Complex64;
use rand::Rng;
use rand_distr::StandardNormal;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::linalg::{self, CMatrix};

/// Tolerance for Hermiticity, positivity and trace checks.
pub const DENSITY_TOLERANCE: f64 = 1e-10;

/// Schatten-1 distance at which the optimal success probability is 0.9.
pub const SCHATTEN1_THRESHOLD_90: f64 = 1.6;

/// A normalized pure state on `n` qubits.
#[derive(Debug, Clone, PartialEq)]
pub struct Statevector {
    amplitudes: Vec<Complex64>,
}

impl Statevector {
    pub fn new(amplitudes: Vec<Complex64>) -> Result<Self> {
        if amplitudes.is_empty() {
            return Err(Error::EmptyVector);
        }
        if !amplitudes.len().is_power_of_two() {
            return Err(Error::NotPowerOfTwo(amplitudes.len()));
        }
        let norm_sq: f64 = amplitudes.iter().map(|z| z.norm_sqr()).sum();
        if (norm_sq.sqrt() - 1.0).abs() > DENSITY_TOLERANCE {
            return Err(Error::invalid(format!("statevector norm {} is not 1", norm_sq.sqrt())));
        }
        Ok(Statevector { amplitudes })
    }

    pub fn amplitudes(&self) -> &[Complex64] {
        &self.amplitudes
    }

    pub fn into_amplitudes(self) -> Vec<Complex64> {
        self.amplitudes
    }

    pub fn qubits(&self) -> u32 {
        self.amplitudes.len().trailing_zeros()
    }

    pub fn norm(&self) -> f64 {
        self.amplitudes.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt()
    }
}

/// Hermitian, positive semi-definite, unit-trace matrix.
#[derive(Debug, Clone)]
pub struct DensityOperator {
    matrix: CMatrix,
}

impl DensityOperator {
    /// Validates `matrix` and stores its Hermitian part.
    pub fn new(matrix: CMatrix) -> Result<Self> {
        if matrix.nrows() != matrix.ncols() || matrix.nrows() == 0 {
            return Err(Error::InvalidDensityOperator(format!(
                "shape {}x{} is not square",
                matrix.nrows(),
                matrix.ncols()
            )));
        }
        let defect = linalg::hermiticity_defect(&matrix);
        if defect > DENSITY_TOLERANCE {
            return Err(Error::InvalidDensityOperator(format!("not Hermitian (defect {defect:e})")));
        }
        let matrix = linalg::hermitian_part(&matrix);
        let tr = linalg::trace(&matrix).re;
        if (tr - 1.0).abs() > DENSITY_TOLERANCE {
            return Err(Error::InvalidDensityOperator(format!("trace {tr} is not 1")));
        }
        let min = linalg::hermitian_eigenvalues(&matrix)[0];
        if min < -DENSITY_TOLERANCE {
            return Err(Error::InvalidDensityOperator(format!("negative eigenvalue {min:e}")));
        }
        Ok(DensityOperator { matrix })
    }

    /// `|psi><psi|` for a unit vector of any length.
    pub fn pure(psi: &[Complex64]) -> Result<Self> {
        let norm: f64 = psi.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt();
        if (norm - 1.0).abs() > DENSITY_TOLERANCE {
            return Err(Error::InvalidDensityOperator(format!("state norm {norm} is not 1")));
        }
        Ok(DensityOperator { matrix: linalg::outer(psi) })
    }

    pub fn from_real(m: &DMatrix<f64>) -> Result<Self> {
        Self::new(linalg::real_matrix_to_complex(m))
    }

    pub fn matrix(&self) -> &CMatrix {
        &self.matrix
    }

    pub fn dim(&self) -> usize {
        self.matrix.nrows()
    }

    pub fn tensor(&self, other: &DensityOperator) -> DensityOperator {
        DensityOperator { matrix: linalg::kron(&self.matrix, &other.matrix) }
    }
}

fn same_dim(a: &DensityOperator, b: &DensityOperator) -> Result<()> {
    if a.dim() != b.dim() {
        return Err(Error::DimensionMismatch(a.dim(), b.dim()));
    }
    Ok(())
}

/// `||A - B||_1`, the sum of absolute eigenvalues of the difference.
pub fn schatten1_diff(a: &DensityOperator, b: &DensityOperator) -> Result<f64> {
    same_dim(a, b)?;
    Ok(linalg::schatten1_hermitian(&(a.matrix() - b.matrix())))
}

/// Optimal success probability for equiprobable `A`, `B`:
/// `1/2 + ||A - B||_1 / 4`.
pub fn helstrom_success(a: &DensityOperator, b: &DensityOperator) -> Result<f64> {
    Ok(helstrom_from_schatten1(schatten1_diff(a, b)?))
}

pub fn helstrom_from_schatten1(s1: f64) -> f64 {
    (0.5 + 0.25 * s1).clamp(0.5, 1.0)
}

/// Schatten-1 distance of two pure states with overlap magnitude `c`.
pub fn pure_state_schatten1(overlap: f64) -> f64 {
    2.0 * (1.0 - overlap * overlap).max(0.0).sqrt()
}

/// The optimal two-outcome measurement: projector onto the nonnegative
/// eigenspace of `A - B` (guess `A`) and its complement (guess `B`).
#[derive(Debug, Clone)]
pub struct HelstromMeasurement {
    /// Probability of guessing `A` when the state is `A`.
    pub p_correct_a: f64,
    /// Probability of guessing `B` when the state is `B`.
    pub p_correct_b: f64,
}

impl HelstromMeasurement {
    pub fn new(a: &DensityOperator, b: &DensityOperator) -> Result<Self> {
        same_dim(a, b)?;
        let diff = a.matrix() - b.matrix();
        let (vals, vecs) = linalg::hermitian_eigen(&diff);
        let cutoff = 1e-12 * a.dim() as f64;
        let keep: Vec<usize> = (0..vals.len()).filter(|&i| vals[i] > -cutoff).collect();
        let basis = CMatrix::from_fn(a.dim(), keep.len(), |r, c| vecs[(r, keep[c])]);
        let projector = &basis * basis.adjoint();
        let tr_pa = linalg::trace(&(&projector * a.matrix())).re.clamp(0.0, 1.0);
        let tr_pb = linalg::trace(&(&projector * b.matrix())).re.clamp(0.0, 1.0);
        Ok(HelstromMeasurement { p_correct_a: tr_pa, p_correct_b: 1.0 - tr_pb })
    }

    pub fn success_probability(&self) -> f64 {
        0.5 * (self.p_correct_a + self.p_correct_b)
    }
}

/// Monte Carlo of the optimal measurement: each trial prepares `A` or `B`
/// with probability 1/2, measures, and scores a correct guess.
pub fn simulate_discrimination<R: Rng + ?Sized>(
    a: &DensityOperator,
    b: &DensityOperator,
    trials: u64,
    rng: &mut R,
) -> Result<f64> {
    if trials == 0 {
        return Err(Error::invalid("need at least one trial"));
    }
    let m = HelstromMeasurement::new(a, b)?;
    let mut wins = 0u64;
    for _ in 0..trials {
        let p = if rng.random_bool(0.5) { m.p_correct_a } else { m.p_correct_b };
        if p >= 1.0 || (p > 0.0 && rng.random::<f64>() < p) {
            wins += 1;
        }
    }
    Ok(wins as f64 / trials as f64)
}

/// Random full-rank density operator `G G^dagger / tr(G G^dagger)` from a
/// complex Ginibre matrix with `rank` columns.
pub fn random_density_operator<R: Rng + ?Sized>(dim: usize, rank: usize, rng: &mut R) -> Result<DensityOperator> {
    if dim == 0 || rank == 0 {
        return Err(Error::invalid("dimension and rank must be positive"));
    }
    let g = CMatrix::from_fn(dim, rank, |_, _| Complex64::new(rng.sample(StandardNormal), rng.sample(StandardNormal)));
    let mut m = &g * g.adjoint();
    let tr = linalg::trace(&m).re;
    m /= Complex64::new(tr, 0.0);
    DensityOperator::new(linalg::hermitian_part(&m))
}

/// Closed-form Schatten-1 norm of
/// `|x*><x*|^{⊗N} ⊗ |x><x|^{⊗N} - |x><x|^{⊗N} ⊗ |x*><x*|^{⊗N}`
/// where `x*`, `x` are the unit minus-sign pair in dimension `d`.
///
/// The two product states have overlap `(1 - 2/d)^{2N}`, so the norm is
/// `2 sqrt(1 - (1 - 2/d)^{4N})`.
pub fn ncopy_minus_sign_tracenorm(d: u64, copies: u64) -> Result<f64> {
    if d < 2 {
        return Err(Error::invalid(format!("dimension must be at least 2, got {d}")));
    }
    if copies == 0 {
        return Err(Error::invalid("need at least one copy"));
    }
    let log_overlap_sq = 4.0 * copies as f64 * (-2.0 / d as f64).ln_1p();
    let one_minus = -log_overlap_sq.exp_m1();
    Ok(2.0 * one_minus.max(0.0).sqrt())
}

/// `(1 - 2/d)^{4N}`: the squared overlap of the two `N`-copy product states.
pub fn minus_sign_overlap_power(d: u64, copies: u64) -> f64 {
    (4.0 * copies as f64 * (-2.0 / d as f64).ln_1p()).exp()
}

/// Smallest `N` with `ncopy_minus_sign_tracenorm(d, N) >= threshold`.
pub fn min_copies_minus_sign(d: u64, threshold: f64) -> Result<u64> {
    if d < 3 {
        return Err(Error::invalid(format!("dimension must be at least 3, got {d}")));
    }
    if !(threshold > 0.0 && threshold < 2.0) {
        return Err(Error::invalid(format!("threshold must lie in (0, 2), got {threshold}")));
    }
    let reaches = |n: u64| ncopy_minus_sign_tracenorm(d, n).map(|v| v >= threshold);
    let mut hi = 1u64;
    while !reaches(hi)? {
        if hi > u64::MAX / 4 {
            return Err(Error::invalid("threshold unreachable"));
        }
        hi *= 2;
    }
    let mut lo = hi / 2; // does not reach (or zero)
    while hi - lo > 1 {
        let mid = lo + (hi - lo) / 2;
        if reaches(mid)? {
            hi = mid;
        } else {
            lo = mid;
        }
    }
    Ok(hi)
}

/// Unit minus-sign pair `(x*, x)` in dimension `d` (any `d >= 1`).
pub fn minus_sign_pair(d: usize) -> (Vec<Complex64>, Vec<Complex64>) {
    let s = 1.0 / (d as f64).sqrt();
    let plus = vec![Complex64::new(s, 0.0); d];
    let mut minus = plus.clone();
    minus[0] = Complex64::new(-s, 0.0);
    (minus, plus)
}

/// The two `2N`-copy product states `x*^{⊗N} ⊗ x^{⊗N}` and
/// `x^{⊗N} ⊗ x*^{⊗N}`, materialized.
pub fn minus_sign_copy_states(d: usize, copies: usize) -> (Vec<Complex64>, Vec<Complex64>) {
    let (minus, plus) = minus_sign_pair(d);
    let m = linalg::tensor_power(&minus, copies);
    let p = linalg::tensor_power(&plus, copies);
    (linalg::kron_vec(&m, &p), linalg::kron_vec(&p, &m))
}

#[derive(Debug, Clone, Copy, Serialize)]
pub struct DenseCheck {
    pub dim: usize,
    pub value: f64,
    pub full_eigendecomposition: bool,
}

/// Largest operator dimension for which [`dense_ncopy_minus_sign_tracenorm`]
/// builds and diagonalizes the full matrix.
pub const FULL_EIGEN_DIM: usize = 1024;

/// Numerical Schatten-1 norm of the `N`-copy minus-sign difference from
/// materialized states. Up to [`FULL_EIGEN_DIM`] the full difference
/// operator is diagonalized; above it, the rank-two difference is
/// diagonalized on the span of the two states.
pub fn dense_ncopy_minus_sign_tracenorm(d: usize, copies: usize) -> Result<DenseCheck> {
    let dim = (d as u64)
        .checked_pow(2 * copies as u32)
        .filter(|&v| v <= 1 << 22)
        .ok_or_else(|| Error::BudgetExceeded(format!("d^(2N) for d={d}, N={copies}")))? as usize;
    let (a, b) = minus_sign_copy_states(d, copies);
    if dim <= FULL_EIGEN_DIM {
        let diff = linalg::outer(&a) - linalg::outer(&b);
        Ok(DenseCheck { dim, value: linalg::schatten1_hermitian(&diff), full_eigendecomposition: true })
    } else {
        Ok(DenseCheck { dim, value: rank_two_schatten1(&a, &b), full_eigendecomposition: false })
    }
}

/// Schatten-1 norm of `|a><a| - |b><b|` via Gram-Schmidt onto span{a, b}.
pub fn rank_two_schatten1(a: &[Complex64], b: &[Complex64]) -> f64 {
    let dot = |u: &[Complex64], v: &[Complex64]| -> Complex64 { u.iter().zip(v).map(|(x, y)| x.conj() * y).sum() };
    let na = dot(a, a).re.sqrt();
    let e1: Vec<Complex64> = a.iter().map(|x| x / na).collect();
    let proj = dot(&e1, b);
    let resid: Vec<Complex64> = b.iter().zip(&e1).map(|(y, e)| y - proj * e).collect();
    let nr = dot(&resid, &resid).re.sqrt();
    let coords = |v: &[Complex64]| -> [Complex64; 2] {
        let c1 = dot(&e1, v);
        let c2 = if nr > 0.0 { dot(&resid, v) / nr } else { Complex64::new(0.0, 0.0) };
        [c1, c2]
    };
    let (ca, cb) = (coords(a), coords(b));
    let m = CMatrix::from_fn(2, 2, |r, c| ca[r] * ca[c].conj() - cb[r] * cb[c].conj());
    linalg::schatten1_hermitian(&m)
}
