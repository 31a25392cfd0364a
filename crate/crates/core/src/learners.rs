//! Classical solvers over SQ handles.
//!
//! The two SQ solvers read one component per vector and stop: the cost is
//! `C` queries whatever the dimension. The sample-only solver sees only
//! Born-distributed indices, which for the sign families are uniform for
//! every vector, so it cannot beat a blind guess.

use std::time::Instant;

use rand::Rng;
use rayon::prelude::*;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::instances::{self, ProblemInstance, ProblemKind};
use crate::oracle::{Capabilities, OracleStats, SqHandle};
use crate::seed::{rng_for, tag};

#[derive(Debug, Clone, Serialize)]
pub struct SolveReport {
    /// 1-based index of the vector the solver picked.
    pub answer: usize,
    /// Oracle calls made by the solver, per handle.
    pub stats: Vec<OracleStats>,
    pub elapsed_ns: u64,
    /// Filled by the harness when the hidden index is known.
    pub correct: Option<bool>,
}

impl SolveReport {
    pub fn total_stats(&self) -> OracleStats {
        self.stats.iter().fold(OracleStats::default(), |acc, s| OracleStats {
            sample_calls: acc.sample_calls + s.sample_calls,
            query_calls: acc.query_calls + s.query_calls,
            norm_calls: acc.norm_calls + s.norm_calls,
        })
    }
}

fn delta(before: OracleStats, after: OracleStats) -> OracleStats {
    OracleStats {
        sample_calls: after.sample_calls - before.sample_calls,
        query_calls: after.query_calls - before.query_calls,
        norm_calls: after.norm_calls - before.norm_calls,
    }
}

fn instrumented<F>(handles: &[SqHandle], body: F) -> Result<SolveReport>
where
    F: FnOnce() -> Result<usize>,
{
    let before: Vec<OracleStats> = handles.iter().map(SqHandle::stats).collect();
    let start = Instant::now();
    let answer = body()?;
    let elapsed_ns = start.elapsed().as_nanos() as u64;
    let stats = handles.iter().zip(before).map(|(h, b)| delta(b, h.stats())).collect();
    Ok(SolveReport { answer, stats, elapsed_ns, correct: None })
}

fn unique_match(flags: &[bool], what: &str) -> Result<usize> {
    let mut hits = flags.iter().enumerate().filter(|(_, &f)| f).map(|(i, _)| i + 1);
    match (hits.next(), hits.next()) {
        (Some(k), None) => Ok(k),
        (None, _) => Err(Error::MalformedInstance(format!("no vector {what}"))),
        (Some(_), Some(_)) => Err(Error::MalformedInstance(format!("more than one vector {what}"))),
    }
}

/// Picks the vector whose first component has negative real part.
pub fn solve_minus_sign(handles: &[SqHandle]) -> Result<SolveReport> {
    instrumented(handles, || {
        let flags = handles
            .iter()
            .map(|h| h.query(1).map(|x| x.re < 0.0))
            .collect::<Result<Vec<_>>>()?;
        unique_match(&flags, "has a negative first component")
    })
}

/// Picks the vector whose first component has an exactly zero imaginary
/// part.
pub fn solve_real_search(handles: &[SqHandle]) -> Result<SolveReport> {
    solve_real_search_with_tolerance(handles, 0.0)
}

/// As [`solve_real_search`] but accepting `|Im x_1| <= eta`, for data that
/// went through other tools.
pub fn solve_real_search_with_tolerance(handles: &[SqHandle], eta: f64) -> Result<SolveReport> {
    if eta.is_nan() || eta < 0.0 {
        return Err(Error::invalid(format!("tolerance must be nonnegative, got {eta}")));
    }
    instrumented(handles, || {
        let flags = handles
            .iter()
            .map(|h| h.query(1).map(|x| x.im.abs() <= eta))
            .collect::<Result<Vec<_>>>()?;
        unique_match(&flags, "has a real first component")
    })
}

/// Draws `budget` samples from every handle and guesses the vector whose
/// first index was hit most often, breaking ties uniformly at random.
///
/// Only `Sample` is called, so the handles may be restricted to
/// [`Capabilities::SAMPLE_ONLY`].
pub fn solve_sample_only<R: Rng + ?Sized>(handles: &[SqHandle], budget: u64, rng: &mut R) -> Result<SolveReport> {
    if handles.is_empty() {
        return Err(Error::invalid("no vectors to choose from"));
    }
    instrumented(handles, || {
        let mut hits = Vec::with_capacity(handles.len());
        for h in handles {
            let mut first = 0u64;
            for _ in 0..budget {
                if h.sample(rng)? == 1 {
                    first += 1;
                }
            }
            hits.push(first);
        }
        let best = *hits.iter().max().expect("nonempty");
        let tied: Vec<usize> = hits.iter().enumerate().filter(|(_, &h)| h == best).map(|(i, _)| i + 1).collect();
        Ok(tied[rng.random_range(0..tied.len())])
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum Solver {
    MinusSign,
    RealSearch,
    SampleOnly { budget: u64 },
}

impl Solver {
    pub fn name(&self) -> &'static str {
        match self {
            Solver::MinusSign => "minus-sign",
            Solver::RealSearch => "real-search",
            Solver::SampleOnly { .. } => "sample-only",
        }
    }
}

/// Runs `solver` on `instance` and fills in `correct` when possible.
/// `seed` drives the sample-only solver's randomness.
pub fn solve_instance(instance: &ProblemInstance, solver: Solver, seed: u64) -> Result<SolveReport> {
    let mut report = match solver {
        Solver::MinusSign => solve_minus_sign(instance.handles())?,
        Solver::RealSearch => solve_real_search(instance.handles())?,
        Solver::SampleOnly { budget } => {
            let handles = instance.restricted(Capabilities::SAMPLE_ONLY)?;
            let mut rng = rng_for(seed, &[tag::TRIAL]);
            solve_sample_only(&handles, budget, &mut rng)?
        }
    };
    if instance.is_verifiable() {
        report.correct = Some(instance.verify_answer(report.answer)?);
    }
    Ok(report)
}

#[derive(Debug, Clone, Serialize)]
pub struct TrialSummary {
    pub problem: ProblemKind,
    pub solver: Solver,
    pub n: u32,
    pub num_vectors: usize,
    pub trials: u64,
    pub successes: u64,
    /// Calls per solve, identical across trials for the SQ solvers.
    pub max_calls: OracleStats,
    pub min_calls: OracleStats,
    pub total_elapsed_ns: u64,
}

impl TrialSummary {
    pub fn success_rate(&self) -> f64 {
        self.successes as f64 / self.trials as f64
    }
}

/// Generates `trials` instances (trial `t` seeded by `(seed, t)`), solves
/// each and aggregates. Trials run in parallel; the result does not depend
/// on scheduling.
pub fn run_trials(problem: ProblemKind, solver: Solver, n: u32, c: usize, trials: u64, seed: u64) -> Result<TrialSummary> {
    let reports = (0..trials)
        .into_par_iter()
        .map(|t| {
            let inst_seed = crate::seed::derive_seed(seed, &[tag::TRIAL, t]);
            let inst = instances::generate(problem, n, c, inst_seed)?;
            solve_instance(&inst, solver, inst_seed)
        })
        .collect::<Result<Vec<_>>>()?;
    let calls: Vec<OracleStats> = reports.iter().map(SolveReport::total_stats).collect();
    let pick = |f: fn(&OracleStats) -> u64, max: bool| {
        let it = calls.iter().map(f);
        if max { it.max() } else { it.min() }.unwrap_or(0)
    };
    Ok(TrialSummary {
        problem,
        solver,
        n,
        num_vectors: c,
        trials,
        successes: reports.iter().filter(|r| r.correct == Some(true)).count() as u64,
        max_calls: OracleStats {
            sample_calls: pick(|s| s.sample_calls, true),
            query_calls: pick(|s| s.query_calls, true),
            norm_calls: pick(|s| s.norm_calls, true),
        },
        min_calls: OracleStats {
            sample_calls: pick(|s| s.sample_calls, false),
            query_calls: pick(|s| s.query_calls, false),
            norm_calls: pick(|s| s.norm_calls, false),
        },
        total_elapsed_ns: reports.iter().map(|r| r.elapsed_ns).sum(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::instances::{gen_minus_sign, gen_real_vector_search};
    use crate::oracle::{ImplicitKind, ImplicitVector};
    use num_complex::Complex64;

    #[test]
    fn minus_sign_uses_exactly_c_queries_at_any_n() {
        for n in [10, 50] {
            let inst = gen_minus_sign(n, 4, 17).unwrap();
            let report = solve_instance(&inst, Solver::MinusSign, 0).unwrap();
            assert_eq!(report.correct, Some(true));
            assert_eq!(report.total_stats(), OracleStats { sample_calls: 0, query_calls: 4, norm_calls: 0 });
            assert!(report.stats.iter().all(|s| s.query_calls == 1));
        }
    }

    #[test]
    fn all_positive_family_is_malformed() {
        let h = |_| SqHandle::build_implicit(ImplicitVector::new(ImplicitKind::AllPlus, 3, 1.0).unwrap()).unwrap();
        let handles: Vec<_> = (0..3).map(h).collect();
        assert!(matches!(solve_minus_sign(&handles), Err(Error::MalformedInstance(_))));
        let two_minus: Vec<_> = (0..2)
            .map(|_| SqHandle::build_implicit(ImplicitVector::new(ImplicitKind::MinusAt(1), 3, 1.0).unwrap()).unwrap())
            .collect();
        assert!(matches!(solve_minus_sign(&two_minus), Err(Error::MalformedInstance(_))));
    }

    #[test]
    fn real_search_tracks_the_real_vector_not_its_position() {
        let real = vec![Complex64::new(0.6, 0.0), Complex64::new(0.8, 0.0)];
        let cplx = vec![Complex64::new(0.6, 0.1), Complex64::new(0.0, 0.63f64.sqrt())];
        for order in [[0, 1], [1, 0]] {
            let vs = [&real, &cplx];
            let handles: Vec<_> = order.iter().map(|&i| SqHandle::build_dense(vs[i].clone()).unwrap()).collect();
            let r = solve_real_search(&handles).unwrap();
            assert_eq!(r.answer, order.iter().position(|&i| i == 0).unwrap() + 1);
            assert_eq!(r.total_stats().query_calls, 2);
        }
    }

    #[test]
    fn tolerance_variant_accepts_rounding_dust() {
        let dusty = vec![Complex64::new(0.6, 1e-17), Complex64::new(0.8, 0.0)];
        let cplx = vec![Complex64::new(0.6, 0.3), Complex64::new(0.0, 0.74)];
        let handles = vec![SqHandle::build_dense(cplx).unwrap(), SqHandle::build_dense(dusty).unwrap()];
        assert!(solve_real_search(&handles).is_err());
        assert_eq!(solve_real_search_with_tolerance(&handles, 1e-12).unwrap().answer, 2);
        assert!(solve_real_search_with_tolerance(&handles, -1.0).is_err());
    }

    #[test]
    fn real_search_on_generated_instances() {
        for s in 0..20 {
            let inst = gen_real_vector_search(6, 4, s).unwrap();
            let r = solve_instance(&inst, Solver::RealSearch, 0).unwrap();
            assert_eq!(r.correct, Some(true));
            assert_eq!(r.total_stats(), OracleStats { sample_calls: 0, query_calls: 4, norm_calls: 0 });
        }
    }

    #[test]
    fn sample_only_with_zero_budget_guesses() {
        let inst = gen_minus_sign(3, 4, 1).unwrap();
        let handles = inst.restricted(Capabilities::SAMPLE_ONLY).unwrap();
        let mut rng = rng_for(0, &[]);
        let r = solve_sample_only(&handles, 0, &mut rng).unwrap();
        assert!((1..=4).contains(&r.answer));
        assert_eq!(r.total_stats().total(), 0);
        let r = solve_sample_only(&handles, 10, &mut rng).unwrap();
        assert_eq!(r.total_stats().sample_calls, 40);
        assert_eq!(r.total_stats().query_calls, 0);
    }

    #[test]
    fn sample_only_rejects_query_capability_needs() {
        let inst = gen_minus_sign(3, 2, 1).unwrap();
        let handles = inst.restricted(Capabilities::SAMPLE_ONLY).unwrap();
        assert!(solve_minus_sign(&handles).is_err());
    }

    #[test]
    fn trial_harness_is_deterministic() {
        let a = run_trials(ProblemKind::MinusSign, Solver::SampleOnly { budget: 20 }, 4, 2, 200, 3).unwrap();
        let b = run_trials(ProblemKind::MinusSign, Solver::SampleOnly { budget: 20 }, 4, 2, 200, 3).unwrap();
        assert_eq!(a.successes, b.successes);
        let sq = run_trials(ProblemKind::UnnormalizedMinus, Solver::MinusSign, 12, 3, 100, 3).unwrap();
        assert_eq!(sq.successes, 100);
        assert_eq!(sq.max_calls, sq.min_calls);
        assert_eq!(sq.max_calls.query_calls, 3);
    }
}
