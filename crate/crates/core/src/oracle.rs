//! Sample-and-query access.
//!
//! An [`SqHandle`] wraps a vector `x` of length `2^n` and serves three
//! operations, each charged unit cost:
//!
//! * `Sample` draws an index `i` with probability `|x_i|^2 / ||x||^2`;
//! * `Query(i)` returns the component `x_i`;
//! * `QueryN` returns `||x||_2`.
//!
//! Indices are 1-based at this boundary. Backings are either a materialized
//! [`DenseVector`] (sampled through a cumulative weight tree) or an
//! [`ImplicitVector`] whose components are evaluated in closed form, so that
//! vectors with `2^50` entries cost nothing to hold.

use std::fmt;
use std::sync::atomic::{AtomicU64, Ordering};
use std::sync::Arc;

use num_complex::Complex64;
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Largest dimension exponent an implicit vector may carry; 1-based indices
/// up to `2^63` still fit in a `u64`.
pub const MAX_IMPLICIT_QUBITS: u32 = 63;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Capability {
    Sample,
    Query,
    QueryN,
}

impl Capability {
    fn bit(self) -> u8 {
        match self {
            Capability::Sample => 1,
            Capability::Query => 2,
            Capability::QueryN => 4,
        }
    }
}

/// A set of [`Capability`] values.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct Capabilities(u8);

impl Capabilities {
    pub const ALL: Capabilities = Capabilities(7);
    pub const NONE: Capabilities = Capabilities(0);
    pub const SAMPLE_ONLY: Capabilities = Capabilities(1);

    pub fn contains(self, cap: Capability) -> bool {
        self.0 & cap.bit() != 0
    }

    pub fn with(self, cap: Capability) -> Self {
        Capabilities(self.0 | cap.bit())
    }

    pub fn is_subset_of(self, other: Capabilities) -> bool {
        self.0 & !other.0 == 0
    }

    pub fn iter(self) -> impl Iterator<Item = Capability> {
        [Capability::Sample, Capability::Query, Capability::QueryN]
            .into_iter()
            .filter(move |c| self.contains(*c))
    }
}

impl FromIterator<Capability> for Capabilities {
    fn from_iter<I: IntoIterator<Item = Capability>>(iter: I) -> Self {
        iter.into_iter().fold(Capabilities::NONE, Capabilities::with)
    }
}

impl<const K: usize> From<[Capability; K]> for Capabilities {
    fn from(caps: [Capability; K]) -> Self {
        caps.into_iter().collect()
    }
}

/// A materialized complex vector whose length is a power of two.
#[derive(Debug, Clone, PartialEq)]
pub struct DenseVector {
    entries: Vec<Complex64>,
    norm_sq: f64,
}

impl DenseVector {
    pub fn new(entries: Vec<Complex64>) -> Result<Self> {
        if entries.is_empty() {
            return Err(Error::EmptyVector);
        }
        if !entries.len().is_power_of_two() {
            return Err(Error::NotPowerOfTwo(entries.len()));
        }
        let norm_sq = pairwise_norm_sq(&entries);
        Ok(DenseVector { entries, norm_sq })
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    /// Dimension exponent `n` with `len = 2^n`.
    pub fn qubits(&self) -> u32 {
        self.entries.len().trailing_zeros()
    }

    pub fn entries(&self) -> &[Complex64] {
        &self.entries
    }

    pub fn norm_sq(&self) -> f64 {
        self.norm_sq
    }

    pub fn norm(&self) -> f64 {
        self.norm_sq.sqrt()
    }
}

/// Squared 2-norm by pairwise summation.
pub(crate) fn pairwise_norm_sq(xs: &[Complex64]) -> f64 {
    if xs.len() <= 64 {
        xs.iter().map(|z| z.norm_sqr()).sum()
    } else {
        let (a, b) = xs.split_at(xs.len() / 2);
        pairwise_norm_sq(a) + pairwise_norm_sq(b)
    }
}

pub(crate) fn pairwise_norm(xs: &[Complex64]) -> f64 {
    pairwise_norm_sq(xs).sqrt()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum ImplicitKind {
    /// Every component equals `+scale`.
    AllPlus,
    /// Component at the given 1-based index is `-scale`, all others `+scale`.
    MinusAt(u64),
    /// Component `i` (0-based) is `scale * (-1)^popcount(i & mask)`.
    SignPattern(u64),
}

/// A `±scale` vector of length `2^n` evaluated in closed form.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ImplicitVector {
    pub kind: ImplicitKind,
    pub n: u32,
    pub scale: f64,
}

impl ImplicitVector {
    pub fn new(kind: ImplicitKind, n: u32, scale: f64) -> Result<Self> {
        if n == 0 || n > MAX_IMPLICIT_QUBITS {
            return Err(Error::invalid(format!(
                "implicit dimension exponent must lie in 1..={MAX_IMPLICIT_QUBITS}, got {n}"
            )));
        }
        if !(scale.is_finite() && scale > 0.0) {
            return Err(Error::invalid(format!("scale must be positive and finite, got {scale}")));
        }
        let len = 1u64 << n;
        match kind {
            ImplicitKind::MinusAt(j) if j == 0 || j > len => {
                return Err(Error::IndexOutOfRange { index: j, len });
            }
            ImplicitKind::SignPattern(mask) if n < 64 && mask >> n != 0 => {
                return Err(Error::invalid(format!("sign mask {mask:#x} has bits beyond n={n}")));
            }
            _ => {}
        }
        Ok(ImplicitVector { kind, n, scale })
    }

    /// Unit-norm scale `2^{-n/2}`.
    pub fn unit_scale(n: u32) -> f64 {
        (-(n as f64) / 2.0).exp2()
    }

    pub fn len(&self) -> u64 {
        1u64 << self.n
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    /// Component at 0-based index `i`.
    pub fn component(&self, i: u64) -> f64 {
        let negative = match self.kind {
            ImplicitKind::AllPlus => false,
            ImplicitKind::MinusAt(j) => i + 1 == j,
            ImplicitKind::SignPattern(mask) => (i & mask).count_ones() % 2 == 1,
        };
        if negative {
            -self.scale
        } else {
            self.scale
        }
    }

    pub fn norm(&self) -> f64 {
        self.scale * (self.n as f64 / 2.0).exp2()
    }

    /// Expands into a dense vector. Only sensible for small `n`.
    pub fn materialize(&self) -> Result<DenseVector> {
        if self.n > crate::instances::DENSE_QUBIT_BUDGET {
            return Err(Error::BudgetExceeded(format!(
                "materializing 2^{} entries exceeds the dense budget",
                self.n
            )));
        }
        DenseVector::new((0..self.len()).map(|i| Complex64::new(self.component(i), 0.0)).collect())
    }
}

/// Complete binary tree of partial sums over the squared magnitudes.
///
/// Node `1` is the root; the leaves occupy `len..2*len`.
#[derive(Debug, Clone)]
struct WeightTree {
    nodes: Vec<f64>,
    len: usize,
}

impl WeightTree {
    fn build(weights: impl ExactSizeIterator<Item = f64>) -> Self {
        let len = weights.len();
        let mut nodes = vec![0.0; 2 * len];
        for (slot, w) in nodes[len..].iter_mut().zip(weights) {
            *slot = w;
        }
        for i in (1..len).rev() {
            nodes[i] = nodes[2 * i] + nodes[2 * i + 1];
        }
        WeightTree { nodes, len }
    }

    fn total(&self) -> f64 {
        self.nodes[1]
    }

    fn leaf(&self, i: usize) -> f64 {
        self.nodes[self.len + i]
    }

    fn depth(&self) -> u32 {
        self.len.trailing_zeros()
    }

    /// Descends from the root; never lands on a zero-weight leaf.
    fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> usize {
        let mut u = rng.random::<f64>() * self.total();
        let mut node = 1;
        while node < self.len {
            let left = self.nodes[2 * node];
            let right = self.nodes[2 * node + 1];
            if (u < left && left > 0.0) || right <= 0.0 {
                node *= 2;
            } else {
                u -= left;
                node = 2 * node + 1;
            }
        }
        node - self.len
    }
}

#[derive(Debug)]
enum Backing {
    Dense { vector: DenseVector, tree: WeightTree },
    Implicit(ImplicitVector),
}

#[derive(Debug, Default)]
struct Counters {
    sample: AtomicU64,
    query: AtomicU64,
    norm: AtomicU64,
}

/// Counts of successfully served oracle calls.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct OracleStats {
    pub sample_calls: u64,
    pub query_calls: u64,
    pub norm_calls: u64,
}

impl OracleStats {
    pub fn total(&self) -> u64 {
        self.sample_calls + self.query_calls + self.norm_calls
    }
}

/// SQ access to one vector.
///
/// Handles are `Sync`: the backing is immutable and the counters are atomic,
/// so a handle can be shared by reference across threads.
#[derive(Debug)]
pub struct SqHandle {
    backing: Arc<Backing>,
    caps: Capabilities,
    counters: Counters,
}

impl SqHandle {
    /// Builds full SQ access over a dense vector. Construction is linear in
    /// the length; each sample afterwards is one root-to-leaf descent.
    pub fn build_dense(values: Vec<Complex64>) -> Result<Self> {
        Self::from_dense(DenseVector::new(values)?)
    }

    pub fn from_dense(vector: DenseVector) -> Result<Self> {
        if vector.norm_sq() == 0.0 {
            return Err(Error::ZeroVector);
        }
        let tree = WeightTree::build(vector.entries().iter().map(|z| z.norm_sqr()));
        Ok(Self::with_backing(Arc::new(Backing::Dense { vector, tree }), Capabilities::ALL))
    }

    pub fn build_implicit(spec: ImplicitVector) -> Result<Self> {
        let spec = ImplicitVector::new(spec.kind, spec.n, spec.scale)?;
        Ok(Self::with_backing(Arc::new(Backing::Implicit(spec)), Capabilities::ALL))
    }

    fn with_backing(backing: Arc<Backing>, caps: Capabilities) -> Self {
        SqHandle { backing, caps, counters: Counters::default() }
    }

    fn require(&self, cap: Capability) -> Result<()> {
        if self.caps.contains(cap) {
            Ok(())
        } else {
            Err(Error::CapabilityMissing(cap))
        }
    }

    /// Number of components, `2^n`.
    pub fn len(&self) -> u64 {
        match &*self.backing {
            Backing::Dense { vector, .. } => vector.len() as u64,
            Backing::Implicit(v) => v.len(),
        }
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn qubits(&self) -> u32 {
        self.len().trailing_zeros()
    }

    pub fn capabilities(&self) -> Capabilities {
        self.caps
    }

    /// Draws a 1-based index with probability `|x_i|^2 / ||x||^2`.
    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> Result<u64> {
        self.require(Capability::Sample)?;
        let i = match &*self.backing {
            Backing::Dense { tree, .. } => tree.sample(rng) as u64,
            // Every implicit kind has equal magnitudes everywhere.
            Backing::Implicit(v) => rng.random_range(0..v.len()),
        };
        self.counters.sample.fetch_add(1, Ordering::Relaxed);
        Ok(i + 1)
    }

    /// Returns the component at 1-based index `i`, exactly as represented.
    pub fn query(&self, i: u64) -> Result<Complex64> {
        self.require(Capability::Query)?;
        let len = self.len();
        if i == 0 || i > len {
            return Err(Error::IndexOutOfRange { index: i, len });
        }
        let value = match &*self.backing {
            Backing::Dense { vector, .. } => vector.entries()[(i - 1) as usize],
            Backing::Implicit(v) => Complex64::new(v.component(i - 1), 0.0),
        };
        self.counters.query.fetch_add(1, Ordering::Relaxed);
        Ok(value)
    }

    pub fn query_norm(&self) -> Result<f64> {
        self.require(Capability::QueryN)?;
        let norm = match &*self.backing {
            Backing::Dense { vector, .. } => vector.norm(),
            Backing::Implicit(v) => v.norm(),
        };
        self.counters.norm.fetch_add(1, Ordering::Relaxed);
        Ok(norm)
    }

    /// A new handle over the same backing, gated to `caps`, with fresh
    /// counters.
    pub fn restrict(&self, caps: impl Into<Capabilities>) -> Result<SqHandle> {
        let caps = caps.into();
        if let Some(missing) = caps.iter().find(|c| !self.caps.contains(*c)) {
            return Err(Error::CapabilityMissing(missing));
        }
        Ok(Self::with_backing(Arc::clone(&self.backing), caps))
    }

    pub fn stats(&self) -> OracleStats {
        OracleStats {
            sample_calls: self.counters.sample.load(Ordering::Relaxed),
            query_calls: self.counters.query.load(Ordering::Relaxed),
            norm_calls: self.counters.norm.load(Ordering::Relaxed),
        }
    }

    // Accessors below are for the data holder (serialization, encoding), not
    // for solvers: they bypass gating and accounting.

    pub fn dense_backing(&self) -> Option<&DenseVector> {
        match &*self.backing {
            Backing::Dense { vector, .. } => Some(vector),
            Backing::Implicit(_) => None,
        }
    }

    pub fn implicit_backing(&self) -> Option<&ImplicitVector> {
        match &*self.backing {
            Backing::Dense { .. } => None,
            Backing::Implicit(v) => Some(v),
        }
    }

    /// Squared magnitude stored at the sampling-tree leaf for 0-based `i`.
    pub fn sampling_weight(&self, i: usize) -> Option<f64> {
        match &*self.backing {
            Backing::Dense { tree, .. } => Some(tree.leaf(i)),
            Backing::Implicit(_) => None,
        }
    }

    /// Number of tree levels a dense sample descends (`log2 len`); zero for
    /// implicit backings.
    pub fn sample_depth(&self) -> u32 {
        match &*self.backing {
            Backing::Dense { tree, .. } => tree.depth(),
            Backing::Implicit(_) => 0,
        }
    }

    /// Exact sampling probabilities (0-based), for small vectors.
    pub fn sampling_distribution(&self) -> Result<Vec<f64>> {
        match &*self.backing {
            Backing::Dense { vector, .. } => {
                let total = vector.norm_sq();
                Ok(vector.entries().iter().map(|z| z.norm_sqr() / total).collect())
            }
            Backing::Implicit(v) => {
                if v.n > crate::instances::DENSE_QUBIT_BUDGET {
                    return Err(Error::BudgetExceeded(format!("distribution over 2^{} indices", v.n)));
                }
                Ok(vec![1.0 / v.len() as f64; v.len() as usize])
            }
        }
    }
}

impl fmt::Display for SqHandle {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match &*self.backing {
            Backing::Dense { vector, .. } => write!(f, "SQ(dense, len={})", vector.len()),
            Backing::Implicit(v) => write!(f, "SQ({:?}, n={}, scale={})", v.kind, v.n, v.scale),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::seed::rng_for;

    fn c(re: f64, im: f64) -> Complex64 {
        Complex64::new(re, im)
    }

    #[test]
    fn point_mass_always_samples_its_index() {
        let h = SqHandle::build_dense(vec![c(1.0, 0.0), c(0.0, 0.0), c(0.0, 0.0), c(0.0, 0.0)]).unwrap();
        let mut rng = rng_for(1, &[]);
        for _ in 0..1000 {
            assert_eq!(h.sample(&mut rng).unwrap(), 1);
        }
        let h = SqHandle::build_dense(vec![c(0.0, 0.0), c(0.0, 0.0), c(0.0, 0.0), c(0.0, 2.0)]).unwrap();
        for _ in 0..1000 {
            assert_eq!(h.sample(&mut rng).unwrap(), 4);
        }
    }

    #[test]
    fn norm_and_distribution_of_small_vectors() {
        let h = SqHandle::build_dense(vec![c(0.6, 0.0), c(0.0, 0.8)]).unwrap();
        assert!((h.query_norm().unwrap() - 1.0).abs() < 1e-15);
        let h = SqHandle::build_dense(vec![c(1.0, 0.0), c(0.0, 2.0)]).unwrap();
        let p = h.sampling_distribution().unwrap();
        assert!((p[0] - 0.2).abs() < 1e-15 && (p[1] - 0.8).abs() < 1e-15);
        let h = SqHandle::build_dense(vec![c(3.0, 0.0), c(4.0, 0.0)]).unwrap();
        assert_eq!(h.query_norm().unwrap(), 5.0);
        let r = std::f64::consts::FRAC_1_SQRT_2;
        let h = SqHandle::build_dense(vec![c(r, 0.0), c(r, 0.0)]).unwrap();
        assert!((h.query_norm().unwrap() - 1.0).abs() < 1e-15);
    }

    #[test]
    fn construction_errors() {
        assert!(matches!(SqHandle::build_dense(vec![]), Err(Error::EmptyVector)));
        assert!(matches!(SqHandle::build_dense(vec![c(1.0, 0.0); 3]), Err(Error::NotPowerOfTwo(3))));
        assert!(matches!(SqHandle::build_dense(vec![c(0.0, 0.0); 4]), Err(Error::ZeroVector)));
        assert!(ImplicitVector::new(ImplicitKind::AllPlus, 0, 1.0).is_err());
        assert!(ImplicitVector::new(ImplicitKind::AllPlus, 64, 1.0).is_err());
        assert!(ImplicitVector::new(ImplicitKind::MinusAt(5), 2, 1.0).is_err());
        assert!(ImplicitVector::new(ImplicitKind::SignPattern(0b100), 2, 1.0).is_err());
        assert!(ImplicitVector::new(ImplicitKind::AllPlus, 2, 0.0).is_err());
    }

    #[test]
    fn dense_query_is_exact_and_range_checked() {
        let h = SqHandle::build_dense(vec![c(3.0, 0.0), c(0.0, 4.0)]).unwrap();
        assert_eq!(h.query(2).unwrap(), c(0.0, 4.0));
        assert!(matches!(h.query(0), Err(Error::IndexOutOfRange { .. })));
        assert!(matches!(h.query(3), Err(Error::IndexOutOfRange { .. })));
        // failed calls are not charged
        assert_eq!(h.stats().query_calls, 1);
    }

    #[test]
    fn implicit_components_and_norms() {
        let scale = (-25f64).exp2();
        let h = SqHandle::build_implicit(ImplicitVector::new(ImplicitKind::MinusAt(1), 50, scale).unwrap()).unwrap();
        assert_eq!(h.query(1).unwrap(), c(-scale, 0.0));
        assert_eq!(h.query(2).unwrap(), c(scale, 0.0));
        assert_eq!(h.query(1 << 50).unwrap(), c(scale, 0.0));
        assert_eq!(h.query_norm().unwrap(), 1.0);

        let h = SqHandle::build_implicit(
            ImplicitVector::new(ImplicitKind::AllPlus, 3, ImplicitVector::unit_scale(3)).unwrap(),
        )
        .unwrap();
        assert!((h.query_norm().unwrap() - 1.0).abs() < 1e-15);

        let h = SqHandle::build_implicit(ImplicitVector::new(ImplicitKind::MinusAt(1), 2, 0.5).unwrap()).unwrap();
        assert_eq!(h.query(1).unwrap(), c(-0.5, 0.0));

        let h = SqHandle::build_implicit(ImplicitVector::new(ImplicitKind::AllPlus, 10, 1.0).unwrap()).unwrap();
        assert_eq!(h.query(777).unwrap(), c(1.0, 0.0));

        let h = SqHandle::build_implicit(ImplicitVector::new(ImplicitKind::AllPlus, 4, 1.0).unwrap()).unwrap();
        assert_eq!(h.query_norm().unwrap(), 4.0);
    }

    #[test]
    fn sign_pattern_matches_popcount_parity() {
        let v = ImplicitVector::new(ImplicitKind::SignPattern(0b101), 3, 1.0).unwrap();
        let expected = [1.0, -1.0, 1.0, -1.0, -1.0, 1.0, -1.0, 1.0];
        for (i, e) in expected.iter().enumerate() {
            assert_eq!(v.component(i as u64), *e);
        }
    }

    #[test]
    fn implicit_sampling_covers_all_indices_uniformly() {
        let h = SqHandle::build_implicit(ImplicitVector::new(ImplicitKind::MinusAt(1), 2, 0.5).unwrap()).unwrap();
        let mut rng = rng_for(2, &[]);
        let mut counts = [0u32; 4];
        for _ in 0..40_000 {
            counts[(h.sample(&mut rng).unwrap() - 1) as usize] += 1;
        }
        for c in counts {
            assert!((c as f64 / 40_000.0 - 0.25).abs() < 0.01, "{counts:?}");
        }
    }

    #[test]
    fn restriction_gates_capabilities() {
        let h = SqHandle::build_dense(vec![c(1.0, 0.0), c(1.0, 0.0)]).unwrap();
        let s = h.restrict([Capability::Sample]).unwrap();
        assert!(matches!(s.query(1), Err(Error::CapabilityMissing(Capability::Query))));
        assert!(matches!(s.query_norm(), Err(Error::CapabilityMissing(Capability::QueryN))));
        let mut rng = rng_for(3, &[]);
        assert!(s.sample(&mut rng).is_ok());

        let sn = h.restrict([Capability::Sample, Capability::QueryN]).unwrap();
        assert!(sn.sample(&mut rng).is_ok());
        assert!(sn.query_norm().is_ok());

        assert!(matches!(s.restrict([Capability::Query]), Err(Error::CapabilityMissing(Capability::Query))));
        assert!(s.restrict(Capabilities::SAMPLE_ONLY).is_ok());
    }

    #[test]
    fn counters_track_successful_calls_per_handle() {
        let h = SqHandle::build_dense(vec![c(1.0, 0.0), c(1.0, 0.0)]).unwrap();
        assert_eq!(h.stats(), OracleStats::default());
        for _ in 0..3 {
            h.query(1).unwrap();
        }
        assert_eq!(h.stats().query_calls, 3);
        let child = h.restrict(Capabilities::ALL).unwrap();
        assert_eq!(child.stats(), OracleStats::default());
        child.query_norm().unwrap();
        assert_eq!(h.stats(), OracleStats { sample_calls: 0, query_calls: 3, norm_calls: 0 });
        assert_eq!(child.stats().norm_calls, 1);
    }

    #[test]
    fn counters_are_exact_under_concurrency() {
        use rayon::prelude::*;
        let h = SqHandle::build_dense(vec![c(1.0, 0.0), c(2.0, 0.0), c(0.0, 1.0), c(0.5, 0.5)]).unwrap();
        (0..10_000u64).into_par_iter().for_each(|t| {
            let mut rng = rng_for(9, &[t]);
            h.sample(&mut rng).unwrap();
            h.query(1 + t % 4).unwrap();
            if t % 2 == 0 {
                h.query_norm().unwrap();
            }
        });
        assert_eq!(h.stats(), OracleStats { sample_calls: 10_000, query_calls: 10_000, norm_calls: 5_000 });
    }

    #[test]
    fn tree_leaves_hold_squared_magnitudes() {
        let values: Vec<_> = (0..16).map(|i| c(i as f64 * 0.3 - 2.0, (i % 3) as f64)).collect();
        let h = SqHandle::build_dense(values.clone()).unwrap();
        assert_eq!(h.sample_depth(), 4);
        for (i, v) in values.iter().enumerate() {
            assert_eq!(h.sampling_weight(i).unwrap(), v.norm_sqr());
        }
        let direct: f64 = values.iter().map(|v| v.norm_sqr()).sum();
        let cached = h.dense_backing().unwrap().norm_sq();
        assert!((cached - direct).abs() <= 1e-12 * direct);
    }

    #[test]
    fn single_entry_vector() {
        let h = SqHandle::build_dense(vec![c(0.0, -2.0)]).unwrap();
        let mut rng = rng_for(4, &[]);
        assert_eq!(h.sample(&mut rng).unwrap(), 1);
        assert_eq!(h.query_norm().unwrap(), 2.0);
    }
}
