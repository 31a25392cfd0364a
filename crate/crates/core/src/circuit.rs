//! Statevector simulation over the gate set `{H, T, S, X, Z, CNOT}`.
//!
//! Qubit 0 in circuit files (the "first qubit") is the most significant bit
//! of the basis index, so `|q_0 q_1 ... q_{n-1}>` has index
//! `sum_k q_k 2^(n-1-k)`.
//!
//! The strong-simulation bridge builds
//! `|psi_U> = (I ⊗ U^dagger) CNOT_{2->1} (I ⊗ U) |0>|0^n>`, whose first
//! amplitude equals the probability that the first qubit of `U|0^n>` reads 0.
//! An SQ `Query` of that amplitude is therefore a strong simulation of `U`.

use std::fmt;

use num_complex::Complex64;
use rand::Rng;
use serde::Serialize;

use crate::discrimination::{self, DensityOperator, Statevector};
use crate::error::{Error, Result};
use crate::instances::ProblemInstance;
use crate::oracle::{ImplicitKind, SqHandle};

/// Largest register simulated.
pub const MAX_QUBITS: usize = 20;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Gate {
    H(usize),
    T(usize),
    S(usize),
    X(usize),
    Z(usize),
    Cnot { control: usize, target: usize },
}

impl Gate {
    fn qubits(&self) -> Vec<usize> {
        match *self {
            Gate::H(q) | Gate::T(q) | Gate::S(q) | Gate::X(q) | Gate::Z(q) => vec![q],
            Gate::Cnot { control, target } => vec![control, target],
        }
    }

    fn shifted(self, by: usize) -> Gate {
        match self {
            Gate::H(q) => Gate::H(q + by),
            Gate::T(q) => Gate::T(q + by),
            Gate::S(q) => Gate::S(q + by),
            Gate::X(q) => Gate::X(q + by),
            Gate::Z(q) => Gate::Z(q + by),
            Gate::Cnot { control, target } => Gate::Cnot { control: control + by, target: target + by },
        }
    }

    /// Applies the gate (or its adjoint) to `state` on `n` qubits.
    fn apply(&self, state: &mut [Complex64], n: usize, adjoint: bool) {
        let mask = |q: usize| 1usize << (n - 1 - q);
        let phase = |p: Complex64| if adjoint { p.conj() } else { p };
        match *self {
            Gate::H(q) => {
                let m = mask(q);
                let r = std::f64::consts::FRAC_1_SQRT_2;
                for i in (0..state.len()).filter(|i| i & m == 0) {
                    let (a, b) = (state[i], state[i | m]);
                    state[i] = (a + b) * r;
                    state[i | m] = (a - b) * r;
                }
            }
            Gate::T(q) => {
                let p = phase(Complex64::from_polar(1.0, std::f64::consts::FRAC_PI_4));
                scale_where(state, mask(q), p);
            }
            Gate::S(q) => scale_where(state, mask(q), phase(Complex64::new(0.0, 1.0))),
            Gate::Z(q) => scale_where(state, mask(q), Complex64::new(-1.0, 0.0)),
            Gate::X(q) => {
                let m = mask(q);
                for i in (0..state.len()).filter(|i| i & m == 0) {
                    state.swap(i, i | m);
                }
            }
            Gate::Cnot { control, target } => {
                let (c, t) = (mask(control), mask(target));
                for i in (0..state.len()).filter(|i| i & c != 0 && i & t == 0) {
                    state.swap(i, i | t);
                }
            }
        }
    }
}

fn scale_where(state: &mut [Complex64], mask: usize, factor: Complex64) {
    for (i, z) in state.iter_mut().enumerate() {
        if i & mask != 0 {
            *z *= factor;
        }
    }
}

impl fmt::Display for Gate {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Gate::H(q) => write!(f, "H {q}"),
            Gate::T(q) => write!(f, "T {q}"),
            Gate::S(q) => write!(f, "S {q}"),
            Gate::X(q) => write!(f, "X {q}"),
            Gate::Z(q) => write!(f, "Z {q}"),
            Gate::Cnot { control, target } => write!(f, "CNOT {control} {target}"),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Circuit {
    qubits: usize,
    gates: Vec<Gate>,
}

impl Circuit {
    pub fn new(qubits: usize, gates: Vec<Gate>) -> Result<Self> {
        for (i, g) in gates.iter().enumerate() {
            if let Some(&q) = g.qubits().iter().find(|&&q| q >= qubits) {
                return Err(Error::invalid(format!("gate {} ({g}) uses qubit {q} of {qubits}", i + 1)));
            }
            if let Gate::Cnot { control, target } = g {
                if control == target {
                    return Err(Error::invalid(format!("gate {} has control equal to target", i + 1)));
                }
            }
        }
        Ok(Circuit { qubits, gates })
    }

    pub fn qubits(&self) -> usize {
        self.qubits
    }

    pub fn gates(&self) -> &[Gate] {
        &self.gates
    }

    pub fn to_text(&self) -> String {
        let mut out = format!("qubits {}\n", self.qubits);
        for g in &self.gates {
            out.push_str(&g.to_string());
            out.push('\n');
        }
        out
    }
}

/// Parses the circuit text format: `qubits <n>` then one gate per line.
/// A file with no gates and no header is the empty circuit on zero qubits.
pub fn parse_circuit(text: &str) -> Result<Circuit> {
    let mut qubits: Option<usize> = None;
    let mut gates = Vec::new();
    for (i, raw) in text.lines().enumerate() {
        let line_no = i + 1;
        let line = raw.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let toks: Vec<&str> = line.split_whitespace().collect();
        let err = |msg: String| Error::Parse { line: line_no, msg };
        let index = |tok: &str| -> Result<usize> {
            let q: usize = tok.parse().map_err(|_| err(format!("bad qubit index {tok:?}")))?;
            match qubits {
                Some(n) if q < n => Ok(q),
                Some(n) => Err(err(format!("qubit {q} out of range for {n} qubits"))),
                None => Err(err("gate before `qubits <n>` header".into())),
            }
        };
        let gate = match toks.as_slice() {
            ["qubits", n] => {
                if qubits.is_some() {
                    return Err(err("duplicate `qubits` header".into()));
                }
                let n: usize = n.parse().map_err(|_| err(format!("bad qubit count {n:?}")))?;
                qubits = Some(n);
                continue;
            }
            ["H", q] => Gate::H(index(q)?),
            ["T", q] => Gate::T(index(q)?),
            ["S", q] => Gate::S(index(q)?),
            ["X", q] => Gate::X(index(q)?),
            ["Z", q] => Gate::Z(index(q)?),
            ["CNOT", c, t] => {
                let (control, target) = (index(c)?, index(t)?);
                if control == target {
                    return Err(err("CNOT control equals target".into()));
                }
                Gate::Cnot { control, target }
            }
            [name, ..] => return Err(err(format!("unknown gate or wrong arity: {name:?}"))),
            [] => unreachable!("blank lines are skipped"),
        };
        gates.push(gate);
    }
    Circuit::new(qubits.unwrap_or(0), gates)
}

fn check_budget(qubits: usize) -> Result<()> {
    if qubits > MAX_QUBITS {
        return Err(Error::BudgetExceeded(format!("{qubits} qubits exceed the simulator limit {MAX_QUBITS}")));
    }
    Ok(())
}

fn basis_zero(qubits: usize) -> Vec<Complex64> {
    let mut s = vec![Complex64::new(0.0, 0.0); 1 << qubits];
    s[0] = Complex64::new(1.0, 0.0);
    s
}

fn run_raw(circuit: &Circuit) -> Result<Vec<Complex64>> {
    check_budget(circuit.qubits)?;
    let mut state = basis_zero(circuit.qubits);
    for g in &circuit.gates {
        g.apply(&mut state, circuit.qubits, false);
    }
    Ok(state)
}

/// `U|0^n>`.
pub fn run_statevector(circuit: &Circuit) -> Result<Statevector> {
    Statevector::new(run_raw(circuit)?)
}

/// `(I ⊗ U^dagger) CNOT_{2->1} (I ⊗ U) |0>|0^n>` on `n + 1` qubits, where the
/// extra qubit is the new first (most significant) qubit.
pub fn build_psi_u(circuit: &Circuit) -> Result<Statevector> {
    let total = circuit.qubits + 1;
    check_budget(total)?;
    if circuit.qubits == 0 {
        return Err(Error::invalid("circuit must act on at least one qubit"));
    }
    let mut state = basis_zero(total);
    for g in &circuit.gates {
        g.shifted(1).apply(&mut state, total, false);
    }
    Gate::Cnot { control: 1, target: 0 }.apply(&mut state, total, false);
    for g in circuit.gates.iter().rev() {
        g.shifted(1).apply(&mut state, total, true);
    }
    Statevector::new(state)
}

/// Probability that measuring the first qubit of `U|0^n>` gives 0.
pub fn p_zero_first_qubit(circuit: &Circuit) -> Result<f64> {
    if circuit.qubits == 0 {
        return Err(Error::invalid("circuit must act on at least one qubit"));
    }
    let state = run_raw(circuit)?;
    Ok(state[..state.len() / 2].iter().map(|z| z.norm_sqr()).sum())
}

/// Dense SQ access over the amplitudes of `state`.
pub fn sq_from_state(state: &Statevector) -> Result<SqHandle> {
    SqHandle::build_dense(state.amplitudes().to_vec())
}

/// A random circuit with `depth` gates drawn uniformly from the gate set
/// (CNOT only when `n >= 2`) on uniformly random qubits.
pub fn random_circuit<R: Rng + ?Sized>(qubits: usize, depth: usize, rng: &mut R) -> Result<Circuit> {
    if qubits == 0 {
        return Err(Error::invalid("random circuits need at least one qubit"));
    }
    let kinds = if qubits >= 2 { 6 } else { 5 };
    let gates = (0..depth)
        .map(|_| {
            let q = rng.random_range(0..qubits);
            match rng.random_range(0..kinds) {
                0 => Gate::H(q),
                1 => Gate::T(q),
                2 => Gate::S(q),
                3 => Gate::X(q),
                4 => Gate::Z(q),
                _ => {
                    let t = (q + rng.random_range(1..qubits)) % qubits;
                    Gate::Cnot { control: q, target: t }
                }
            }
        })
        .collect();
    Circuit::new(qubits, gates)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum ProductFactor {
    Plus,
    Minus,
}

impl ProductFactor {
    fn amplitudes(self) -> [Complex64; 2] {
        let r = std::f64::consts::FRAC_1_SQRT_2;
        match self {
            ProductFactor::Plus => [Complex64::new(r, 0.0), Complex64::new(r, 0.0)],
            ProductFactor::Minus => [Complex64::new(r, 0.0), Complex64::new(-r, 0.0)],
        }
    }

    /// Born probability of the `-` outcome in the `{|+>, |->}` basis.
    pub fn prob_minus(self) -> f64 {
        let [a, b] = self.amplitudes();
        let r = std::f64::consts::FRAC_1_SQRT_2;
        ((a - b) * r).norm_sqr().clamp(0.0, 1.0)
    }
}

/// A classical sign vector stored in a quantum state.
#[derive(Debug, Clone)]
pub enum EncodedVector {
    /// Components as normalized amplitudes.
    Amplitude(Statevector),
    /// One `|+>`/`|->` factor per qubit.
    Product(Vec<ProductFactor>),
}

impl EncodedVector {
    pub fn qubits(&self) -> u32 {
        match self {
            EncodedVector::Amplitude(s) => s.qubits(),
            EncodedVector::Product(f) => f.len() as u32,
        }
    }

    /// Full statevector (small `n` only).
    pub fn to_statevector(&self) -> Result<Statevector> {
        match self {
            EncodedVector::Amplitude(s) => Ok(s.clone()),
            EncodedVector::Product(factors) => {
                check_budget(factors.len())?;
                let state = factors.iter().fold(vec![Complex64::new(1.0, 0.0)], |acc, f| {
                    crate::linalg::kron_vec(&acc, &f.amplitudes())
                });
                Statevector::new(state)
            }
        }
    }
}

/// `|->|+>^{⊗(n-1)}` when `negative_first`, else `|+>^{⊗n}`.
pub fn product_encode_sign_vector(n: usize, negative_first: bool) -> Result<EncodedVector> {
    if n == 0 {
        return Err(Error::invalid("need at least one qubit"));
    }
    let mut factors = vec![ProductFactor::Plus; n];
    if negative_first {
        factors[0] = ProductFactor::Minus;
    }
    Ok(EncodedVector::Product(factors))
}

/// Product-encodes every vector of a sign-family instance. The encoder is
/// the data holder: it reads the backing directly, not through the oracle.
pub fn product_encode_instance(instance: &ProblemInstance) -> Result<Vec<EncodedVector>> {
    instance
        .handles()
        .iter()
        .map(|h| {
            let v = h
                .implicit_backing()
                .ok_or_else(|| Error::invalid("product encoding needs implicit sign vectors"))?;
            let negative = match v.kind {
                ImplicitKind::MinusAt(1) => true,
                ImplicitKind::AllPlus => false,
                other => return Err(Error::invalid(format!("no product encoding for {other:?}"))),
            };
            product_encode_sign_vector(v.n as usize, negative)
        })
        .collect()
}

#[derive(Debug, Clone, Serialize)]
pub struct ProductSolveReport {
    /// 1-based index of the object whose first qubit read `-`.
    pub answer: usize,
    /// Single-qubit measurements made on each object.
    pub measurements: Vec<u64>,
}

/// Measures qubit 1 of each product-encoded object once in the `{|+>,|->}`
/// basis and returns the object that read `-`.
pub fn solve_product_encoding<R: Rng + ?Sized>(encoded: &[EncodedVector], rng: &mut R) -> Result<ProductSolveReport> {
    let mut minus = Vec::new();
    for (i, e) in encoded.iter().enumerate() {
        let EncodedVector::Product(factors) = e else {
            return Err(Error::invalid("solver needs product-encoded objects"));
        };
        let p = factors[0].prob_minus();
        let outcome_minus = p >= 1.0 || (p > 0.0 && rng.random::<f64>() < p);
        if outcome_minus {
            minus.push(i + 1);
        }
    }
    match minus.as_slice() {
        [k] => Ok(ProductSolveReport { answer: *k, measurements: vec![1; encoded.len()] }),
        _ => Err(Error::MalformedInstance(format!("{} objects read `-`", minus.len()))),
    }
}

/// Single-copy optimal success probability for telling the amplitude-encoded
/// minus-sign vector from the all-plus one: overlap `1 - 2/d`, so
/// `1/2 + (1/2) sqrt(1 - (1 - 2/d)^2)`.
pub fn amplitude_single_copy_success(n: u32) -> f64 {
    let overlap = 1.0 - 2.0 / (n as f64).exp2();
    discrimination::helstrom_from_schatten1(discrimination::pure_state_schatten1(overlap))
}

/// The same quantity from materialized density operators.
pub fn amplitude_single_copy_success_dense(n: u32) -> Result<f64> {
    check_budget(n as usize)?;
    let (minus, plus) = discrimination::minus_sign_pair(1 << n);
    discrimination::helstrom_success(&DensityOperator::pure(&minus)?, &DensityOperator::pure(&plus)?)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::seed::rng_for;

    fn approx(a: Complex64, re: f64, im: f64) -> bool {
        (a - Complex64::new(re, im)).norm() < 1e-14
    }

    #[test]
    fn parse_examples() {
        let c = parse_circuit("qubits 2\nH 0\nCNOT 0 1\n").unwrap();
        assert_eq!(c.gates(), &[Gate::H(0), Gate::Cnot { control: 0, target: 1 }]);
        let err = parse_circuit("qubits 2\nCNOT 0 0\n").unwrap_err();
        assert!(matches!(err, Error::Parse { line: 2, .. }));
        let empty = parse_circuit("").unwrap();
        assert_eq!(empty.gates().len(), 0);
        assert!(matches!(parse_circuit("qubits 2\n# c\nY 0\n"), Err(Error::Parse { line: 3, .. })));
        assert!(matches!(parse_circuit("qubits 2\nH 2\n"), Err(Error::Parse { line: 2, .. })));
        assert!(matches!(parse_circuit("H 0\n"), Err(Error::Parse { line: 1, .. })));
        assert!(matches!(parse_circuit("qubits 2\nH\n"), Err(Error::Parse { line: 2, .. })));
        let c = parse_circuit("qubits 3\nT 1\nS 2\nX 0\nZ 1\n").unwrap();
        assert_eq!(parse_circuit(&c.to_text()).unwrap(), c);
    }

    #[test]
    fn single_gate_states() {
        let h = run_statevector(&parse_circuit("qubits 1\nH 0").unwrap()).unwrap();
        let r = std::f64::consts::FRAC_1_SQRT_2;
        assert!(approx(h.amplitudes()[0], r, 0.0) && approx(h.amplitudes()[1], r, 0.0));
        let t = run_statevector(&parse_circuit("qubits 1\nT 0").unwrap()).unwrap();
        assert_eq!(t.amplitudes(), &[Complex64::new(1.0, 0.0), Complex64::new(0.0, 0.0)]);
        let bell = run_statevector(&parse_circuit("qubits 2\nH 0\nH 1\nCNOT 0 1").unwrap()).unwrap();
        assert!((bell.norm() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn first_qubit_is_most_significant() {
        let s = run_statevector(&parse_circuit("qubits 3\nX 0").unwrap()).unwrap();
        assert_eq!(s.amplitudes()[4], Complex64::new(1.0, 0.0));
        let s = run_statevector(&parse_circuit("qubits 3\nX 0\nCNOT 0 2").unwrap()).unwrap();
        assert_eq!(s.amplitudes()[5], Complex64::new(1.0, 0.0));
    }

    #[test]
    fn phase_gates_and_adjoints() {
        let mut s = vec![Complex64::new(0.0, 0.0), Complex64::new(1.0, 0.0)];
        Gate::T(0).apply(&mut s, 1, false);
        Gate::T(0).apply(&mut s, 1, false);
        assert!(approx(s[1], 0.0, 1.0));
        Gate::S(0).apply(&mut s, 1, true);
        assert!(approx(s[1], 1.0, 0.0));
        Gate::Z(0).apply(&mut s, 1, false);
        assert!(approx(s[1], -1.0, 0.0));
    }

    #[test]
    fn psi_u_examples() {
        let id = parse_circuit("qubits 2\n").unwrap();
        let psi = build_psi_u(&id).unwrap();
        assert_eq!(psi.amplitudes()[0], Complex64::new(1.0, 0.0));
        assert!(psi.amplitudes()[1..].iter().all(|z| *z == Complex64::new(0.0, 0.0)));
        assert_eq!(p_zero_first_qubit(&id).unwrap(), 1.0);

        let x = parse_circuit("qubits 2\nX 0").unwrap();
        assert!(build_psi_u(&x).unwrap().amplitudes()[0].norm() < 1e-15);
        assert_eq!(p_zero_first_qubit(&x).unwrap(), 0.0);

        let h = parse_circuit("qubits 2\nH 0").unwrap();
        assert!(approx(build_psi_u(&h).unwrap().amplitudes()[0], 0.5, 0.0));
        assert!((p_zero_first_qubit(&h).unwrap() - 0.5).abs() < 1e-15);
    }

    #[test]
    fn sq_over_psi_u_gives_p_zero() {
        let mut rng = rng_for(10, &[]);
        for _ in 0..20 {
            let n = rng.random_range(1..=6);
            let c = random_circuit(n, 15, &mut rng).unwrap();
            let h = sq_from_state(&build_psi_u(&c).unwrap()).unwrap();
            let q = h.query(1).unwrap();
            assert!((q - Complex64::new(p_zero_first_qubit(&c).unwrap(), 0.0)).norm() <= 1e-12);
            assert!((h.query_norm().unwrap() - 1.0).abs() < 1e-12);
        }
    }

    #[test]
    fn budget_is_enforced() {
        let c = Circuit::new(21, vec![]).unwrap();
        assert!(matches!(run_statevector(&c), Err(Error::BudgetExceeded(_))));
        let c = Circuit::new(20, vec![]).unwrap();
        assert!(matches!(build_psi_u(&c), Err(Error::BudgetExceeded(_))));
    }

    #[test]
    fn product_encoding_single_qubit_case_is_orthogonal() {
        let minus = product_encode_sign_vector(1, true).unwrap().to_statevector().unwrap();
        let plus = product_encode_sign_vector(1, false).unwrap().to_statevector().unwrap();
        let overlap: Complex64 = minus.amplitudes().iter().zip(plus.amplitudes()).map(|(a, b)| a.conj() * b).sum();
        assert!(overlap.norm() < 1e-15);
        assert_eq!(ProductFactor::Minus.prob_minus(), 1.0);
        assert_eq!(ProductFactor::Plus.prob_minus(), 0.0);
    }

    #[test]
    fn product_state_is_not_the_amplitude_encoding() {
        // |->|+>|+> has amplitudes (-1)^{z_1}/sqrt(8): half the entries are
        // negative, unlike (-1, 1, ..., 1)/sqrt(8).
        let s = product_encode_sign_vector(3, true).unwrap().to_statevector().unwrap();
        assert_eq!(s.amplitudes().iter().filter(|z| z.re < 0.0).count(), 4);
    }

    #[test]
    fn amplitude_success_closed_form_matches_dense() {
        for n in 1..=6 {
            let a = amplitude_single_copy_success(n);
            let b = amplitude_single_copy_success_dense(n).unwrap();
            assert!((a - b).abs() < 1e-12, "n={n}: {a} vs {b}");
        }
        assert_eq!(amplitude_single_copy_success(1), 1.0);
        assert!(amplitude_single_copy_success(10) <= 0.54);
    }
}
