//! Dense Hermitian helpers on top of `nalgebra`.

use nalgebra::DMatrix;
use num_complex::Complex64;

pub type CMatrix = DMatrix<Complex64>;

/// Largest entrywise `|M - M^dagger|`.
pub fn hermiticity_defect(m: &CMatrix) -> f64 {
    let n = m.nrows();
    let mut worst = 0.0f64;
    for i in 0..n {
        for j in i..n {
            worst = worst.max((m[(i, j)] - m[(j, i)].conj()).norm());
        }
    }
    worst
}

/// `(M + M^dagger) / 2`.
pub fn hermitian_part(m: &CMatrix) -> CMatrix {
    (m + m.adjoint()) * Complex64::new(0.5, 0.0)
}

/// Eigenvalues (ascending) and eigenvectors (columns, same order) of a
/// Hermitian matrix. Only the Hermitian part of `m` is used.
pub fn hermitian_eigen(m: &CMatrix) -> (Vec<f64>, CMatrix) {
    let eig = hermitian_part(m).symmetric_eigen();
    let mut order: Vec<usize> = (0..eig.eigenvalues.len()).collect();
    order.sort_by(|&a, &b| eig.eigenvalues[a].total_cmp(&eig.eigenvalues[b]));
    let values = order.iter().map(|&i| eig.eigenvalues[i]).collect();
    let vectors = CMatrix::from_fn(m.nrows(), m.ncols(), |r, c| eig.eigenvectors[(r, order[c])]);
    (values, vectors)
}

pub fn hermitian_eigenvalues(m: &CMatrix) -> Vec<f64> {
    let mut v: Vec<f64> = hermitian_part(m).symmetric_eigenvalues().iter().copied().collect();
    v.sort_by(f64::total_cmp);
    v
}

/// Ascending eigenvalues of a real symmetric matrix.
pub fn symmetric_eigenvalues(m: &DMatrix<f64>) -> Vec<f64> {
    let sym = (m + m.transpose()) * 0.5;
    let mut v: Vec<f64> = sym.symmetric_eigenvalues().iter().copied().collect();
    v.sort_by(f64::total_cmp);
    v
}

/// Sum of `|lambda|` over eigenvalues, dropping those below
/// `1e-12 * dim` in magnitude. Never returns `-0.0`.
pub fn abs_eigen_sum(eigenvalues: &[f64], dim: usize) -> f64 {
    let cutoff = 1e-12 * dim as f64;
    eigenvalues.iter().filter(|l| l.abs() >= cutoff).map(|l| l.abs()).fold(0.0, |a, b| a + b)
}

/// Schatten-1 norm of a Hermitian matrix.
pub fn schatten1_hermitian(m: &CMatrix) -> f64 {
    abs_eigen_sum(&hermitian_eigenvalues(m), m.nrows())
}

pub fn trace(m: &CMatrix) -> Complex64 {
    m.diagonal().iter().sum()
}

/// `|v><v|`.
pub fn outer(v: &[Complex64]) -> CMatrix {
    CMatrix::from_fn(v.len(), v.len(), |r, c| v[r] * v[c].conj())
}

/// Kronecker product `a ⊗ b`.
pub fn kron(a: &CMatrix, b: &CMatrix) -> CMatrix {
    a.kronecker(b)
}

/// Kronecker product of state vectors.
pub fn kron_vec(a: &[Complex64], b: &[Complex64]) -> Vec<Complex64> {
    a.iter().flat_map(|x| b.iter().map(move |y| x * y)).collect()
}

/// `v^{⊗k}`.
pub fn tensor_power(v: &[Complex64], k: usize) -> Vec<Complex64> {
    (1..k).fold(v.to_vec(), |acc, _| kron_vec(&acc, v))
}

pub fn real_matrix_to_complex(m: &DMatrix<f64>) -> CMatrix {
    m.map(|x| Complex64::new(x, 0.0))
}
