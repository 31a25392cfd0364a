//! Problem families with a hidden distinguished vector, and Haar sampling.
//!
//! * minus-sign: `C` unit vectors of `±1/sqrt(d)` entries; the hidden one
//!   has a minus sign in its first component. Implicit backings.
//! * real-search: one Haar vector from the real sphere, the rest from the
//!   complex sphere. Dense backings.
//! * unnormalized-minus: as minus-sign with entries `±1`. Implicit backings.
//!
//! Generation is a pure function of the parameters and a 64-bit seed. The
//! hidden index is drawn uniformly from `1..=C`.

use std::fmt;
use std::fs;
use std::path::Path;
use std::str::FromStr;

use num_complex::Complex64;
use rand::Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::oracle::{Capabilities, DenseVector, ImplicitKind, ImplicitVector, SqHandle};
use crate::seed::{rng_for, tag};
use crate::vector_io;

/// Largest `n` for which a `2^n` vector is materialized (16M entries).
pub const DENSE_QUBIT_BUDGET: u32 = 24;

const GAUSSIAN_CHUNK: usize = 1 << 12;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Field {
    Real,
    Complex,
}

/// A unit vector drawn from the uniform measure on a sphere.
#[derive(Debug, Clone)]
pub struct HaarSample {
    pub vector: Vec<Complex64>,
    pub field: Field,
}

impl HaarSample {
    pub fn norm(&self) -> f64 {
        self.vector.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt()
    }

    /// Dense SQ backing; the dimension must be a power of two.
    pub fn into_dense(self) -> Result<DenseVector> {
        DenseVector::new(self.vector)
    }
}

fn gaussian_entry<R: Rng + ?Sized>(field: Field, rng: &mut R) -> Complex64 {
    let re: f64 = rng.sample(StandardNormal);
    match field {
        Field::Real => Complex64::new(re, 0.0),
        Field::Complex => Complex64::new(re, rng.sample(StandardNormal)),
    }
}

fn normalize(mut entries: Vec<Complex64>, field: Field) -> Result<HaarSample> {
    let norm = crate::oracle::pairwise_norm(&entries);
    if norm == 0.0 {
        return Err(Error::ZeroVector);
    }
    for z in &mut entries {
        *z = match field {
            Field::Real => Complex64::new(z.re / norm, 0.0),
            Field::Complex => *z / norm,
        };
    }
    Ok(HaarSample { vector: entries, field })
}

/// Normalized independent Gaussians from a caller-supplied generator.
pub fn haar_unit_vector<R: Rng + ?Sized>(d: usize, field: Field, rng: &mut R) -> Result<HaarSample> {
    if d == 0 {
        return Err(Error::invalid("sphere dimension must be at least 1"));
    }
    let entries = (0..d).map(|_| gaussian_entry(field, rng)).collect();
    normalize(entries, field)
}

/// Haar vector whose component block `c` (of 4096 entries) is drawn from the
/// stream keyed by `path ++ [c]`, so large vectors fill in parallel with a
/// result independent of scheduling.
pub fn haar_unit_vector_keyed(d: usize, field: Field, seed: u64, path: &[u64]) -> Result<HaarSample> {
    if d == 0 {
        return Err(Error::invalid("sphere dimension must be at least 1"));
    }
    let mut entries = vec![Complex64::new(0.0, 0.0); d];
    entries.par_chunks_mut(GAUSSIAN_CHUNK).enumerate().for_each(|(c, chunk)| {
        let mut key = path.to_vec();
        key.push(c as u64);
        let mut rng = rng_for(seed, &key);
        for z in chunk {
            *z = gaussian_entry(field, &mut rng);
        }
    });
    normalize(entries, field)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ProblemKind {
    MinusSign,
    RealSearch,
    UnnormalizedMinus,
}

impl ProblemKind {
    pub fn name(self) -> &'static str {
        match self {
            ProblemKind::MinusSign => "minus-sign",
            ProblemKind::RealSearch => "real-search",
            ProblemKind::UnnormalizedMinus => "unnormalized-minus",
        }
    }
}

impl fmt::Display for ProblemKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for ProblemKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "minus-sign" => Ok(ProblemKind::MinusSign),
            "real-search" => Ok(ProblemKind::RealSearch),
            "unnormalized-minus" => Ok(ProblemKind::UnnormalizedMinus),
            other => Err(Error::invalid(format!("unknown problem kind {other:?}"))),
        }
    }
}

/// `C` SQ handles, one of which (index `k*`, 1-based) is distinguished.
#[derive(Debug)]
pub struct ProblemInstance {
    kind: ProblemKind,
    handles: Vec<SqHandle>,
    hidden_k: Option<usize>,
    n: u32,
    seed: u64,
}

fn check_common(n: u32, c: usize) -> Result<()> {
    if c < 2 {
        return Err(Error::invalid(format!("need at least two vectors, got C={c}")));
    }
    if n == 0 {
        return Err(Error::invalid("dimension exponent n must be at least 1"));
    }
    Ok(())
}

fn draw_hidden_index(c: usize, seed: u64) -> usize {
    rng_for(seed, &[tag::HIDDEN_INDEX]).random_range(1..=c)
}

fn sign_family(kind: ProblemKind, n: u32, c: usize, seed: u64, scale: f64) -> Result<ProblemInstance> {
    check_common(n, c)?;
    let k = draw_hidden_index(c, seed);
    let handles = (1..=c)
        .map(|j| {
            let shape = if j == k { ImplicitKind::MinusAt(1) } else { ImplicitKind::AllPlus };
            SqHandle::build_implicit(ImplicitVector::new(shape, n, scale)?)
        })
        .collect::<Result<_>>()?;
    Ok(ProblemInstance { kind, handles, hidden_k: Some(k), n, seed })
}

/// Minus-sign search: entries `±2^{-n/2}`, minus sign in the first component
/// of the hidden vector.
pub fn gen_minus_sign(n: u32, c: usize, seed: u64) -> Result<ProblemInstance> {
    sign_family(ProblemKind::MinusSign, n, c, seed, ImplicitVector::unit_scale(n))
}

/// As [`gen_minus_sign`] with entries `±1`.
pub fn gen_unnormalized_minus(n: u32, c: usize, seed: u64) -> Result<ProblemInstance> {
    sign_family(ProblemKind::UnnormalizedMinus, n, c, seed, 1.0)
}

/// Real vector search with the default materialization budget.
pub fn gen_real_vector_search(n: u32, c: usize, seed: u64) -> Result<ProblemInstance> {
    gen_real_vector_search_with_budget(n, c, seed, DENSE_QUBIT_BUDGET)
}

pub fn gen_real_vector_search_with_budget(n: u32, c: usize, seed: u64, max_qubits: u32) -> Result<ProblemInstance> {
    check_common(n, c)?;
    if n > max_qubits {
        return Err(Error::BudgetExceeded(format!(
            "real-search needs dense vectors of 2^{n} entries; budget is 2^{max_qubits}"
        )));
    }
    let k = draw_hidden_index(c, seed);
    let d = 1usize << n;
    let handles = (1..=c)
        .map(|j| {
            let field = if j == k { Field::Real } else { Field::Complex };
            let sample = haar_unit_vector_keyed(d, field, seed, &[tag::VECTOR, j as u64])?;
            SqHandle::from_dense(sample.into_dense()?)
        })
        .collect::<Result<_>>()?;
    Ok(ProblemInstance { kind: ProblemKind::RealSearch, handles, hidden_k: Some(k), n, seed })
}

pub fn generate(kind: ProblemKind, n: u32, c: usize, seed: u64) -> Result<ProblemInstance> {
    match kind {
        ProblemKind::MinusSign => gen_minus_sign(n, c, seed),
        ProblemKind::RealSearch => gen_real_vector_search(n, c, seed),
        ProblemKind::UnnormalizedMinus => gen_unnormalized_minus(n, c, seed),
    }
}

const MANIFEST: &str = "manifest.txt";

impl ProblemInstance {
    /// Assembles an instance from parts, e.g. a hand-built family for tests.
    /// The hidden index is 1-based.
    pub fn from_parts(kind: ProblemKind, handles: Vec<SqHandle>, hidden_k: Option<usize>, seed: u64) -> Result<Self> {
        let n = handles.first().map(|h| h.qubits()).unwrap_or(0);
        if let Some(k) = hidden_k {
            if k == 0 || k > handles.len() {
                return Err(Error::IndexOutOfRange { index: k as u64, len: handles.len() as u64 });
            }
        }
        if handles.iter().any(|h| h.qubits() != n) {
            return Err(Error::MalformedInstance("vectors have different lengths".into()));
        }
        Ok(ProblemInstance { kind, handles, hidden_k, n, seed })
    }

    pub fn kind(&self) -> ProblemKind {
        self.kind
    }

    pub fn handles(&self) -> &[SqHandle] {
        &self.handles
    }

    pub fn num_vectors(&self) -> usize {
        self.handles.len()
    }

    pub fn n(&self) -> u32 {
        self.n
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    /// Whether the hidden index is known (instances loaded without the
    /// revealed answer cannot be verified).
    pub fn is_verifiable(&self) -> bool {
        self.hidden_k.is_some()
    }

    /// True iff the 1-based `k` names the distinguished vector.
    pub fn verify_answer(&self, k: usize) -> Result<bool> {
        if k == 0 || k > self.handles.len() {
            return Err(Error::IndexOutOfRange { index: k as u64, len: self.handles.len() as u64 });
        }
        let hidden = self
            .hidden_k
            .ok_or_else(|| Error::MalformedInstance("hidden index was not revealed".into()))?;
        Ok(k == hidden)
    }

    /// Fresh handles over the same vectors gated to `caps`.
    pub fn restricted(&self, caps: Capabilities) -> Result<Vec<SqHandle>> {
        self.handles.iter().map(|h| h.restrict(caps)).collect()
    }

    /// Euclidean distances `||x_i - x_j||` for all `i < j`, in lexicographic
    /// pair order. Requires dense backings.
    pub fn pairwise_distance_report(&self) -> Result<Vec<f64>> {
        let dense: Vec<&DenseVector> = self
            .handles
            .iter()
            .map(|h| {
                h.dense_backing().ok_or_else(|| {
                    Error::invalid("pairwise distances need dense backings; use the closed form for implicit vectors")
                })
            })
            .collect::<Result<_>>()?;
        let mut out = Vec::with_capacity(dense.len() * (dense.len() - 1) / 2);
        for i in 0..dense.len() {
            for j in i + 1..dense.len() {
                let d2: f64 = dense[i]
                    .entries()
                    .iter()
                    .zip(dense[j].entries())
                    .map(|(a, b)| (a - b).norm_sqr())
                    .sum();
                out.push(d2.sqrt());
            }
        }
        Ok(out)
    }

    /// Checks the family's structural invariants.
    pub fn check_invariants(&self) -> Result<()> {
        let fail = |msg: String| Err(Error::MalformedInstance(msg));
        if self.handles.len() < 2 {
            return fail(format!("C={} < 2", self.handles.len()));
        }
        match self.kind {
            ProblemKind::MinusSign | ProblemKind::UnnormalizedMinus => {
                let mut minus = 0;
                for h in &self.handles {
                    let Some(v) = h.implicit_backing() else {
                        return fail("sign families must have implicit backings".into());
                    };
                    match v.kind {
                        ImplicitKind::MinusAt(1) => minus += 1,
                        ImplicitKind::AllPlus => {}
                        other => return fail(format!("unexpected implicit kind {other:?}")),
                    }
                    let want = if self.kind == ProblemKind::MinusSign { ImplicitVector::unit_scale(v.n) } else { 1.0 };
                    if v.scale != want {
                        return fail(format!("scale {} differs from {want}", v.scale));
                    }
                }
                if minus != 1 {
                    return fail(format!("{minus} vectors carry the minus sign"));
                }
            }
            ProblemKind::RealSearch => {
                let mut real = 0;
                for h in &self.handles {
                    let Some(v) = h.dense_backing() else {
                        return fail("real-search vectors must be dense".into());
                    };
                    if (v.norm() - 1.0).abs() > 1e-12 {
                        return fail(format!("norm {} is not 1", v.norm()));
                    }
                    if v.entries().iter().all(|z| z.im == 0.0) {
                        real += 1;
                    }
                }
                if real != 1 {
                    return fail(format!("{real} vectors are real"));
                }
            }
        }
        if let Some(k) = self.hidden_k {
            if k == 0 || k > self.handles.len() {
                return fail(format!("hidden index {k} out of range"));
            }
        }
        Ok(())
    }

    /// Writes a manifest plus one file per vector. The hidden index is only
    /// written when `reveal` is set.
    pub fn save(&self, dir: &Path, reveal: bool) -> Result<()> {
        fs::create_dir_all(dir)?;
        let mut manifest = format!(
            "kind {}\nn {}\nC {}\nseed {}\n",
            self.kind,
            self.n,
            self.handles.len(),
            self.seed
        );
        if reveal {
            if let Some(k) = self.hidden_k {
                manifest.push_str(&format!("k_star {k}\n"));
            }
        }
        fs::write(dir.join(MANIFEST), manifest)?;
        for (j, h) in self.handles.iter().enumerate() {
            if let Some(v) = h.implicit_backing() {
                fs::write(dir.join(format!("vector_{}.implicit", j + 1)), vector_io::format_implicit(v))?;
            } else if let Some(v) = h.dense_backing() {
                fs::write(dir.join(format!("vector_{}.txt", j + 1)), vector_io::format_dense_vector(v.entries()))?;
            }
        }
        Ok(())
    }

    pub fn load(dir: &Path) -> Result<Self> {
        let text = fs::read_to_string(dir.join(MANIFEST))?;
        let (mut kind, mut n, mut c, mut seed, mut hidden) = (None, None, None, None, None);
        for (i, line) in text.lines().enumerate() {
            let line = line.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let bad = || Error::Parse { line: i + 1, msg: format!("bad manifest line {line:?}") };
            let (key, value) = line.split_once(' ').ok_or_else(bad)?;
            let value = value.trim();
            match key {
                "kind" => kind = Some(value.parse::<ProblemKind>()?),
                "n" => n = Some(value.parse::<u32>().map_err(|_| bad())?),
                "C" => c = Some(value.parse::<usize>().map_err(|_| bad())?),
                "seed" => seed = Some(value.parse::<u64>().map_err(|_| bad())?),
                "k_star" => hidden = Some(value.parse::<usize>().map_err(|_| bad())?),
                _ => return Err(bad()),
            }
        }
        let missing = |f: &str| Error::MalformedInstance(format!("manifest lacks `{f}`"));
        let kind = kind.ok_or_else(|| missing("kind"))?;
        let n = n.ok_or_else(|| missing("n"))?;
        let c = c.ok_or_else(|| missing("C"))?;
        let seed = seed.ok_or_else(|| missing("seed"))?;
        let handles = (1..=c)
            .map(|j| {
                let implicit = dir.join(format!("vector_{j}.implicit"));
                if implicit.exists() {
                    SqHandle::build_implicit(vector_io::parse_implicit(&fs::read_to_string(implicit)?)?)
                } else {
                    SqHandle::build_dense(vector_io::read_dense_vector(&dir.join(format!("vector_{j}.txt")))?)
                }
            })
            .collect::<Result<Vec<_>>>()?;
        let inst = ProblemInstance::from_parts(kind, handles, hidden, seed)?;
        if inst.n != n {
            return Err(Error::MalformedInstance(format!("manifest says n={n}, vectors have n={}", inst.n)));
        }
        Ok(inst)
    }
}

/// `||x* - x||` for the minus-sign pair: only the first components differ,
/// by `2/sqrt(d)`.
pub fn minus_sign_distance(n: u32) -> f64 {
    2.0 * ImplicitVector::unit_scale(n)
}
