//! Haar moment operators `E[(|v><v|)^{⊗N}]` over the real and complex unit
//! spheres, represented in the occupation-number basis of the symmetric
//! subspace.
//!
//! Both operators are supported on the symmetric subspace. The complex one is
//! the maximally mixed state there, `P_sym / binom(d+N-1, N)`. The real one
//! has entries
//!
//! ```text
//! <m|E_R|m'> = sqrt(N!/m!) sqrt(N!/m'!) E[prod_j phi_j^(m_j + m'_j)]
//! ```
//!
//! and the monomial moments of the real sphere follow from Isserlis' theorem:
//! the number of perfect matchings of the index multiset pairing equal
//! indices, divided by `d (d+2) ... (d+2N-2)`. A moment vanishes unless every
//! exponent is even, so `E_R` is block diagonal over the parity pattern
//! `m mod 2`. Operators are stored as those blocks.

use std::collections::{BTreeMap, HashMap};
use std::sync::Arc;
use std::time::Instant;

use nalgebra::DMatrix;
use num_complex::Complex64;
use num_rational::Ratio;
use rand::Rng;
use rayon::prelude::*;
use serde::Serialize;
use statrs::function::gamma::ln_gamma;

use crate::discrimination::DensityOperator;
use crate::error::{Error, Result};
use crate::instances::{haar_unit_vector, Field};
use crate::linalg::{self, CMatrix};
use crate::seed::{rng_for, tag};

/// Largest symmetric-subspace dimension for which a basis is enumerated.
pub const SYM_BASIS_BUDGET: usize = 250_000;
/// Largest `2N` for pairing enumeration.
pub const MAX_PAIRING_POINTS: usize = 16;
/// Largest symmetric-subspace dimension materialized densely (dense
/// matrices, Monte Carlo estimates).
pub const DENSE_SYM_BUDGET: usize = 4096;
/// Largest full tensor-space dimension `d^N` for embeddings.
pub const FULL_SPACE_BUDGET: usize = 4096;

/// Tolerance for Hermiticity, positivity and trace of moment operators.
pub const MOMENT_TOLERANCE: f64 = 1e-10;
/// Slack allowed in the bound chain and for `O_rest` positivity.
pub const BOUND_SLACK: f64 = 1e-9;

/// `binom(n, k)` if it fits in a `u128`.
pub fn binomial(n: u64, k: u64) -> Option<u128> {
    let k = k.min(n.checked_sub(k)?);
    let mut acc: u128 = 1;
    for i in 0..k {
        acc = acc.checked_mul((n - i) as u128)? / (i as u128 + 1);
    }
    Some(acc)
}

/// `(2k-1)!! = 1 * 3 * ... * (2k-1)`, with `(-1)!! = 1`.
pub fn double_factorial_odd(k: u32) -> u128 {
    (1..=k as u128).map(|i| 2 * i - 1).product()
}

/// Occupation-number basis of the `N`-fold symmetric subspace over `C^d`.
#[derive(Debug, Clone)]
pub struct SymBasis {
    d: usize,
    copies: usize,
    elements: Vec<Vec<u32>>,
    norms: Vec<f64>,
}

impl SymBasis {
    /// Enumerates every occupation vector `(m_1, ..., m_d)` with
    /// `sum m_j = N`, starting from `(N, 0, ..., 0)` and decreasing
    /// lexicographically.
    pub fn new(d: usize, copies: usize) -> Result<Self> {
        Self::with_budget(d, copies, SYM_BASIS_BUDGET)
    }

    pub fn with_budget(d: usize, copies: usize, budget: usize) -> Result<Self> {
        if d == 0 || copies == 0 {
            return Err(Error::invalid(format!("need d >= 1 and N >= 1, got d={d}, N={copies}")));
        }
        let dim = binomial((d + copies - 1) as u64, copies as u64)
            .filter(|&b| b <= budget as u128)
            .ok_or_else(|| {
                Error::BudgetExceeded(format!("symmetric subspace for d={d}, N={copies} exceeds {budget} elements"))
            })? as usize;
        let mut elements = Vec::with_capacity(dim);
        let mut current = vec![0u32; d];
        fill(&mut current, 0, copies as u32, &mut elements);
        debug_assert_eq!(elements.len(), dim);
        let norms = elements.iter().map(|m| multinomial_sqrt(copies as u32, m)).collect();
        Ok(SymBasis { d, copies, elements, norms })
    }

    pub fn d(&self) -> usize {
        self.d
    }

    pub fn copies(&self) -> usize {
        self.copies
    }

    pub fn len(&self) -> usize {
        self.elements.len()
    }

    pub fn is_empty(&self) -> bool {
        self.elements.is_empty()
    }

    pub fn elements(&self) -> &[Vec<u32>] {
        &self.elements
    }

    /// `sqrt(N! / prod_j m_j!)`, the overlap `<m|e^{⊗N}>` scale.
    pub fn norms(&self) -> &[f64] {
        &self.norms
    }

    /// Groups element indices by the parity pattern `m mod 2`; blocks are
    /// ordered by their first member.
    pub fn parity_classes(&self) -> Vec<Vec<usize>> {
        let mut classes: BTreeMap<Vec<u8>, Vec<usize>> = BTreeMap::new();
        for (i, m) in self.elements.iter().enumerate() {
            classes.entry(m.iter().map(|&k| (k % 2) as u8).collect()).or_default().push(i);
        }
        let mut blocks: Vec<Vec<usize>> = classes.into_values().collect();
        blocks.sort_by_key(|b| b[0]);
        blocks
    }

    /// Amplitudes `<m|v^{⊗N}>` for every basis element.
    pub fn amplitudes(&self, v: &[Complex64]) -> Vec<Complex64> {
        self.elements
            .iter()
            .zip(&self.norms)
            .map(|(m, &c)| {
                m.iter()
                    .zip(v)
                    .filter(|(&k, _)| k > 0)
                    .fold(Complex64::new(c, 0.0), |acc, (&k, z)| acc * z.powu(k))
            })
            .collect()
    }

    /// Isometry from the symmetric basis into `(C^d)^{⊗N}` (columns are
    /// the normalized symmetrized kets). Tensor index `t_1 ... t_N` maps to
    /// `sum_i t_i d^(N-i)`.
    pub fn embedding(&self) -> Result<DMatrix<f64>> {
        let full = (self.d as u64)
            .checked_pow(self.copies as u32)
            .filter(|&f| f <= FULL_SPACE_BUDGET as u64)
            .ok_or_else(|| Error::BudgetExceeded(format!("tensor space d^N for d={}, N={}", self.d, self.copies)))?
            as usize;
        let index: HashMap<&[u32], usize> = self.elements.iter().enumerate().map(|(i, m)| (m.as_slice(), i)).collect();
        let mut v = DMatrix::zeros(full, self.len());
        let mut occ = vec![0u32; self.d];
        for t in 0..full {
            occ.iter_mut().for_each(|o| *o = 0);
            let mut rest = t;
            for _ in 0..self.copies {
                occ[rest % self.d] += 1;
                rest /= self.d;
            }
            let col = index[occ.as_slice()];
            v[(t, col)] = 1.0 / self.norms[col];
        }
        Ok(v)
    }
}

fn fill(current: &mut Vec<u32>, pos: usize, remaining: u32, out: &mut Vec<Vec<u32>>) {
    if pos == current.len() - 1 {
        current[pos] = remaining;
        out.push(current.clone());
        current[pos] = 0;
        return;
    }
    for k in (0..=remaining).rev() {
        current[pos] = k;
        fill(current, pos + 1, remaining - k, out);
    }
    current[pos] = 0;
}

/// `sqrt(N! / prod m_j!)`, exact integer multinomial when it fits.
fn multinomial_sqrt(copies: u32, m: &[u32]) -> f64 {
    let mut acc: Option<u128> = Some(1);
    let mut placed = 0u64;
    for &k in m.iter().filter(|&&k| k > 0) {
        placed += k as u64;
        acc = acc.and_then(|a| binomial(placed, k as u64).and_then(|b| a.checked_mul(b)));
    }
    match acc {
        Some(v) if v < 1u128 << 53 => (v as f64).sqrt(),
        _ => (0.5 * (ln_factorial(copies) - m.iter().map(|&k| ln_factorial(k)).sum::<f64>())).exp(),
    }
}

fn ln_factorial(k: u32) -> f64 {
    ln_gamma(k as f64 + 1.0)
}

/// A perfect matching of `{0, ..., 2N-1}`.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct Pairing {
    pub pairs: Vec<(usize, usize)>,
}

/// Every perfect matching of `two_n` points, `(2N-1)!!` of them.
pub fn enumerate_pairings(two_n: usize) -> Result<Vec<Pairing>> {
    if two_n == 0 || two_n % 2 == 1 {
        return Err(Error::invalid(format!("pairings need a positive even point count, got {two_n}")));
    }
    if two_n > MAX_PAIRING_POINTS {
        return Err(Error::BudgetExceeded(format!("{two_n} points exceed the pairing budget {MAX_PAIRING_POINTS}")));
    }
    let mut out = Vec::with_capacity(double_factorial_odd((two_n / 2) as u32) as usize);
    let mut pairs = Vec::with_capacity(two_n / 2);
    let mut free: Vec<usize> = (0..two_n).collect();
    match_rest(&mut free, &mut pairs, &mut out);
    Ok(out)
}

fn match_rest(free: &mut Vec<usize>, pairs: &mut Vec<(usize, usize)>, out: &mut Vec<Pairing>) {
    if free.is_empty() {
        out.push(Pairing { pairs: pairs.clone() });
        return;
    }
    let first = free.remove(0);
    for i in 0..free.len() {
        let partner = free.remove(i);
        pairs.push((first, partner));
        match_rest(free, pairs, out);
        pairs.pop();
        free.insert(i, partner);
    }
    free.insert(0, first);
}

/// `d (d+2) ... (d+2N-2)`.
pub fn sphere_moment_denominator(d: usize, copies: usize) -> f64 {
    (0..copies).map(|k| (d + 2 * k) as f64).product()
}

/// `2^N Γ(N + d/2) / Γ(d/2)` through log-gamma.
pub fn gamma_normalization(d: usize, copies: usize) -> f64 {
    let (d, n) = (d as f64, copies as f64);
    (n * std::f64::consts::LN_2 + ln_gamma(n + d / 2.0) - ln_gamma(d / 2.0)).exp()
}

/// A real-sphere monomial moment: the matching count over the product
/// `d (d+2) ... (d+2N-2)`, exact when the denominator fits in 128 bits.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MonomialMoment {
    pub matchings: u64,
    pub exact: Option<Ratio<u128>>,
    pub value: f64,
}

/// `E[phi_{a_1} ... phi_{a_2N}]` for `phi` uniform on the unit sphere of
/// `R^d`, by counting pairings whose pairs join equal indices. Indices are
/// 1-based.
pub fn real_monomial_moment(indices: &[usize], d: usize) -> Result<MonomialMoment> {
    if let Some(&bad) = indices.iter().find(|&&a| a == 0 || a > d) {
        return Err(Error::IndexOutOfRange { index: bad as u64, len: d as u64 });
    }
    let pairings = enumerate_pairings(indices.len())?;
    let matchings = pairings
        .iter()
        .filter(|p| p.pairs.iter().all(|&(a, b)| indices[a] == indices[b]))
        .count() as u64;
    let copies = indices.len() / 2;
    let denom = (0..copies).try_fold(1u128, |acc, k| acc.checked_mul((d + 2 * k) as u128));
    Ok(MonomialMoment {
        matchings,
        exact: denom.map(|q| Ratio::new(matchings as u128, q)),
        value: matchings as f64 / sphere_moment_denominator(d, copies),
    })
}

/// The same moment from exponents: `prod_j (e_j - 1)!!` over the
/// denominator when all `e_j` are even, else zero.
pub fn real_moment_from_exponents(exponents: &[u32], d: usize) -> f64 {
    if exponents.iter().any(|e| e % 2 == 1) {
        return 0.0;
    }
    let total: u32 = exponents.iter().sum();
    let numer: f64 = exponents.iter().map(|&e| double_factorial_odd(e / 2) as f64).product();
    numer / sphere_moment_denominator(d, (total / 2) as usize)
}

/// One diagonal block: basis indices and the real symmetric sub-matrix.
#[derive(Debug, Clone)]
pub struct Block {
    pub members: Vec<usize>,
    pub matrix: DMatrix<f64>,
}

/// `E[(|v><v|)^{⊗N}]` on the symmetric subspace, block diagonal over parity
/// classes.
#[derive(Debug, Clone)]
pub struct MomentOperator {
    pub field: Field,
    basis: Arc<SymBasis>,
    blocks: Vec<Block>,
}

impl MomentOperator {
    pub fn basis(&self) -> &SymBasis {
        &self.basis
    }

    pub fn dim(&self) -> usize {
        self.basis.len()
    }

    pub fn blocks(&self) -> &[Block] {
        &self.blocks
    }

    pub fn trace(&self) -> f64 {
        self.blocks.iter().map(|b| b.matrix.trace()).sum()
    }

    /// Largest `|M_ij - M_ji|` over the blocks.
    pub fn symmetry_defect(&self) -> f64 {
        self.blocks
            .iter()
            .map(|b| (&b.matrix - b.matrix.transpose()).abs().max())
            .fold(0.0, f64::max)
    }

    /// All eigenvalues, ascending.
    pub fn eigenvalues(&self) -> Vec<f64> {
        let mut all: Vec<f64> = self
            .blocks
            .par_iter()
            .map(|b| linalg::symmetric_eigenvalues(&b.matrix))
            .collect::<Vec<_>>()
            .concat();
        all.sort_by(f64::total_cmp);
        all
    }

    /// The full matrix in the symmetric basis.
    pub fn dense(&self) -> Result<DMatrix<f64>> {
        if self.dim() > DENSE_SYM_BUDGET {
            return Err(Error::BudgetExceeded(format!("dense moment operator of dimension {}", self.dim())));
        }
        let mut m = DMatrix::zeros(self.dim(), self.dim());
        for b in &self.blocks {
            for (r, &i) in b.members.iter().enumerate() {
                for (c, &j) in b.members.iter().enumerate() {
                    m[(i, j)] = b.matrix[(r, c)];
                }
            }
        }
        Ok(m)
    }

    /// The operator on the full tensor space `(C^d)^{⊗N}`.
    pub fn full_space(&self) -> Result<DMatrix<f64>> {
        let v = self.basis.embedding()?;
        Ok(&v * self.dense()? * v.transpose())
    }

    /// Hermitian within tolerance, positive semi-definite, unit trace.
    pub fn check(&self) -> Result<MomentDiagnostics> {
        let eig = self.eigenvalues();
        let diag = MomentDiagnostics {
            symmetry_defect: self.symmetry_defect(),
            min_eigenvalue: eig.first().copied().unwrap_or(0.0),
            trace: self.trace(),
        };
        if diag.symmetry_defect > MOMENT_TOLERANCE
            || diag.min_eigenvalue < -MOMENT_TOLERANCE
            || (diag.trace - 1.0).abs() > MOMENT_TOLERANCE
        {
            return Err(Error::BoundViolation(format!("{:?} moment operator invalid: {diag:?}", self.field)));
        }
        Ok(diag)
    }
}

#[derive(Debug, Clone, Copy, Serialize)]
pub struct MomentDiagnostics {
    pub symmetry_defect: f64,
    pub min_eigenvalue: f64,
    pub trace: f64,
}

fn max_pairing_copies(copies: usize) -> Result<()> {
    if 2 * copies > MAX_PAIRING_POINTS {
        return Err(Error::BudgetExceeded(format!("N={copies} exceeds the supported maximum {}", MAX_PAIRING_POINTS / 2)));
    }
    Ok(())
}

/// `E_{Haar(R^d)}[(|phi><phi|)^{⊗N}]`.
pub fn real_moment(d: usize, copies: usize) -> Result<MomentOperator> {
    max_pairing_copies(copies)?;
    let basis = Arc::new(SymBasis::new(d, copies)?);
    real_moment_on(basis)
}

fn real_moment_on(basis: Arc<SymBasis>) -> Result<MomentOperator> {
    let d = basis.d();
    let blocks = basis
        .parity_classes()
        .into_par_iter()
        .map(|members| {
            let k = members.len();
            let mut matrix = DMatrix::zeros(k, k);
            let mut exps = vec![0u32; d];
            for r in 0..k {
                for c in r..k {
                    let (mi, mj) = (&basis.elements()[members[r]], &basis.elements()[members[c]]);
                    for ((e, a), b) in exps.iter_mut().zip(mi).zip(mj) {
                        *e = a + b;
                    }
                    let value = basis.norms()[members[r]] * basis.norms()[members[c]] * real_moment_from_exponents(&exps, d);
                    matrix[(r, c)] = value;
                    matrix[(c, r)] = value;
                }
            }
            Block { members, matrix }
        })
        .collect();
    Ok(MomentOperator { field: Field::Real, basis, blocks })
}

/// `E_{Haar(C^d)}[(|psi><psi|)^{⊗N}] = P_sym / binom(d+N-1, N)`.
pub fn complex_moment(d: usize, copies: usize) -> Result<MomentOperator> {
    max_pairing_copies(copies)?;
    let basis = Arc::new(SymBasis::new(d, copies)?);
    complex_moment_on(basis)
}

fn complex_moment_on(basis: Arc<SymBasis>) -> Result<MomentOperator> {
    let scale = 1.0 / basis.len() as f64;
    let blocks = basis
        .parity_classes()
        .into_iter()
        .map(|members| {
            let k = members.len();
            Block { members, matrix: DMatrix::identity(k, k) * scale }
        })
        .collect();
    Ok(MomentOperator { field: Field::Complex, basis, blocks })
}

/// Trace-norm gap between the complex and real moment operators together
/// with the bounds it must respect.
#[derive(Debug, Clone, Serialize)]
pub struct GapReport {
    pub d: usize,
    pub copies: usize,
    pub sym_dim: usize,
    /// `||E_C - E_R||_1`.
    pub gap: f64,
    /// `2 (1 - (1 + 2N/d)^{-N})`.
    pub bound_two_term: f64,
    /// `4 N^2 / d`.
    pub bound_final: f64,
    /// `1 - (d+N-1)! (d/2-1)! / (2^N (d/2+N-1)! (d-1)!)`, reported only.
    pub middle_term: f64,
    /// Smallest eigenvalue of `E_R - N! / (d (d+2) ... (d+2N-2)) P_sym`.
    pub o_rest_min_eig: f64,
    pub real_diagnostics: MomentDiagnostics,
    pub complex_diagnostics: MomentDiagnostics,
    /// `||rho_1 - rho_2||_1` for the `2N`-copy product states, at tiny
    /// sizes only.
    pub rho_diff: Option<f64>,
    /// Max entry deviation of a Monte Carlo estimate of `E_R`, when asked.
    pub mc_max_dev: Option<f64>,
    pub seconds: f64,
}

/// Largest `d^(2N)` for which the `2N`-copy states are compared densely.
pub const RHO_CHECK_DIM: usize = 1024;

/// Builds both operators, computes the gap and checks
/// `0 <= gap <= 2(1 - (1+2N/d)^{-N}) <= 4N^2/d` and `O_rest >= 0`. A
/// failed check is an error, never a flag.
pub fn trace_norm_gap(d: usize, copies: usize) -> Result<GapReport> {
    let start = Instant::now();
    max_pairing_copies(copies)?;
    let basis = Arc::new(SymBasis::new(d, copies)?);
    let real = real_moment_on(Arc::clone(&basis))?;
    let cplx = complex_moment_on(Arc::clone(&basis))?;
    let real_diagnostics = real.check()?;
    let complex_diagnostics = cplx.check()?;

    let dim = basis.len();
    let level = 1.0 / dim as f64;
    let eig = real.eigenvalues();
    let diff: Vec<f64> = eig.iter().map(|l| level - l).collect();
    let gap = linalg::abs_eigen_sum(&diff, dim);

    let (df, nf) = (d as f64, copies as f64);
    let bound_two_term = 2.0 * (1.0 - (1.0 + 2.0 * nf / df).powf(-nf));
    let bound_final = 4.0 * nf * nf / df;
    let ln_ratio = ln_gamma(df + nf) + ln_gamma(df / 2.0) - nf * std::f64::consts::LN_2 - ln_gamma(df / 2.0 + nf) - ln_gamma(df);
    let middle_term = 1.0 - ln_ratio.exp();

    let n_factorial: f64 = (1..=copies).map(|k| k as f64).product();
    let projector_weight = n_factorial / sphere_moment_denominator(d, copies);
    let o_rest_min_eig = eig[0] - projector_weight;

    let rho_diff = match (d as u64).checked_pow(2 * copies as u32) {
        Some(full) if full as usize <= RHO_CHECK_DIM => {
            let (r1, r2) = haar_rho_pair_from(&real, &cplx)?;
            Some(crate::discrimination::schatten1_diff(&r1, &r2)?)
        }
        _ => None,
    };

    let report = GapReport {
        d,
        copies,
        sym_dim: dim,
        gap,
        bound_two_term,
        bound_final,
        middle_term,
        o_rest_min_eig,
        real_diagnostics,
        complex_diagnostics,
        rho_diff,
        mc_max_dev: None,
        seconds: start.elapsed().as_secs_f64(),
    };
    report.verify()?;
    Ok(report)
}

impl GapReport {
    /// Re-checks every inequality the report must satisfy.
    pub fn verify(&self) -> Result<()> {
        let fail = |what: String| Err(Error::BoundViolation(format!("d={}, N={}: {what}", self.d, self.copies)));
        if self.gap < -BOUND_SLACK {
            return fail(format!("negative gap {}", self.gap));
        }
        if self.gap > self.bound_two_term + BOUND_SLACK {
            return fail(format!("gap {} exceeds 2(1-(1+2N/d)^-N) = {}", self.gap, self.bound_two_term));
        }
        if self.bound_two_term > self.bound_final + BOUND_SLACK {
            return fail(format!("{} exceeds 4N^2/d = {}", self.bound_two_term, self.bound_final));
        }
        if self.o_rest_min_eig < -BOUND_SLACK {
            return fail(format!("O_rest has eigenvalue {}", self.o_rest_min_eig));
        }
        if let Some(r) = self.rho_diff {
            if r > 2.0 * self.gap + BOUND_SLACK {
                return fail(format!("||rho1 - rho2||_1 = {r} exceeds twice the gap {}", self.gap));
            }
        }
        Ok(())
    }
}

fn haar_rho_pair_from(real: &MomentOperator, cplx: &MomentOperator) -> Result<(DensityOperator, DensityOperator)> {
    let er = linalg::real_matrix_to_complex(&real.full_space()?);
    let ec = linalg::real_matrix_to_complex(&cplx.full_space()?);
    let rho1 = DensityOperator::new(linalg::kron(&ec, &er))?;
    let rho2 = DensityOperator::new(linalg::kron(&er, &ec))?;
    Ok((rho1, rho2))
}

/// `rho_1 = E_C ⊗ E_R` and `rho_2 = E_R ⊗ E_C` on `(C^d)^{⊗2N}`.
pub fn haar_rho_pair(d: usize, copies: usize) -> Result<(DensityOperator, DensityOperator)> {
    let full = (d as u64)
        .checked_pow(2 * copies as u32)
        .filter(|&f| f as usize <= RHO_CHECK_DIM)
        .ok_or_else(|| Error::BudgetExceeded(format!("d^(2N) for d={d}, N={copies} exceeds {RHO_CHECK_DIM}")))?;
    debug_assert!(full > 0);
    haar_rho_pair_from(&real_moment(d, copies)?, &complex_moment(d, copies)?)
}

/// Monte Carlo estimate of a moment operator in the symmetric basis.
#[derive(Debug, Clone)]
pub struct MomentEstimate {
    pub field: Field,
    pub samples: u64,
    pub mean: CMatrix,
    pub std_err: DMatrix<f64>,
}

impl MomentEstimate {
    /// Largest entrywise `|estimate - exact|`.
    pub fn max_deviation(&self, exact: &MomentOperator) -> Result<f64> {
        let dense = exact.dense()?;
        if dense.nrows() != self.mean.nrows() {
            return Err(Error::DimensionMismatch(dense.nrows(), self.mean.nrows()));
        }
        Ok(self
            .mean
            .iter()
            .zip(dense.iter())
            .map(|(a, b)| (a - Complex64::new(*b, 0.0)).norm())
            .fold(0.0, f64::max))
    }
}

const MC_CHUNK: u64 = 4096;

/// Averages `(|v><v|)^{⊗N}` over `samples` Haar vectors, projected into the
/// symmetric basis, with entrywise standard errors. Chunk `c` of 4096
/// samples draws from the stream keyed by `(seed, c)`, so the estimate does
/// not depend on thread scheduling.
pub fn mc_moment(d: usize, copies: usize, samples: u64, field: Field, seed: u64) -> Result<MomentEstimate> {
    if samples == 0 {
        return Err(Error::invalid("need at least one sample"));
    }
    let basis = SymBasis::with_budget(d, copies, DENSE_SYM_BUDGET)?;
    let dim = basis.len();
    let chunks = samples.div_ceil(MC_CHUNK);
    let partials: Vec<(CMatrix, DMatrix<f64>)> = (0..chunks)
        .into_par_iter()
        .map(|c| {
            let mut rng = rng_for(seed, &[tag::MONTE_CARLO, c]);
            let count = MC_CHUNK.min(samples - c * MC_CHUNK);
            let mut sum = CMatrix::zeros(dim, dim);
            let mut sum_sq = DMatrix::<f64>::zeros(dim, dim);
            for _ in 0..count {
                let v = haar_draw(d, field, &mut rng);
                let a = basis.amplitudes(&v);
                for r in 0..dim {
                    for s in 0..dim {
                        let x = a[r] * a[s].conj();
                        sum[(r, s)] += x;
                        sum_sq[(r, s)] += x.norm_sqr();
                    }
                }
            }
            (sum, sum_sq)
        })
        .collect();
    let mut sum = CMatrix::zeros(dim, dim);
    let mut sum_sq = DMatrix::<f64>::zeros(dim, dim);
    for (s, q) in partials {
        sum += s;
        sum_sq += q;
    }
    let nf = samples as f64;
    let mean = sum / Complex64::new(nf, 0.0);
    let std_err = DMatrix::from_fn(dim, dim, |r, s| {
        if samples < 2 {
            return 0.0;
        }
        let var = (sum_sq[(r, s)] / nf - mean[(r, s)].norm_sqr()).max(0.0) * nf / (nf - 1.0);
        (var / nf).sqrt()
    });
    Ok(MomentEstimate { field, samples, mean, std_err })
}

fn haar_draw<R: Rng + ?Sized>(d: usize, field: Field, rng: &mut R) -> Vec<Complex64> {
    haar_unit_vector(d, field, rng).expect("d >= 1").vector
}
