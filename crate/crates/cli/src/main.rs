use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde_json::json;

use sqlab::circuit;
use sqlab::discrimination::{self, DensityOperator};
use sqlab::experiment::{self, Experiment, ExperimentConfig, OutputFormat, ResultRecord};
use sqlab::instances::{self, ProblemInstance, ProblemKind};
use sqlab::learners::{self, Solver};
use sqlab::moments;
use sqlab::seed::{rng_for, tag};
use sqlab::stats;
use sqlab::vector_io;
use sqlab::{Error, ImplicitKind, ImplicitVector, Result, SqHandle};

/// Largest vector `sample-test` tabulates.
const SAMPLE_TEST_MAX_LEN: u64 = 1 << 20;

#[derive(Parser, Debug)]
#[command(name = "sqlab", version, about = "Sample-and-query access experiments")]
struct Cli {
    /// Root seed for every random stream.
    #[arg(long, global = true, default_value_t = 0)]
    seed: u64,
    /// Output file (standard output when absent).
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    /// Output format for sweeps.
    #[arg(long, global = true, value_enum, default_value_t = Format::Csv)]
    format: Format,
    /// Worker threads (all cores when absent).
    #[arg(long, global = true)]
    threads: Option<usize>,
    /// Record wall-clock columns in sweeps (breaks byte-identical reruns).
    #[arg(long, global = true)]
    timing: bool,
    #[command(subcommand)]
    command: Command,
}

#[derive(Copy, Clone, Debug, ValueEnum)]
enum Format {
    Csv,
    JsonLines,
}

impl From<Format> for OutputFormat {
    fn from(f: Format) -> Self {
        match f {
            Format::Csv => OutputFormat::Csv,
            Format::JsonLines => OutputFormat::JsonLines,
        }
    }
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Chi-square test of the sampler against |x_i|^2 / ||x||^2.
    SampleTest {
        #[command(flatten)]
        vector: VectorArgs,
        #[arg(long, default_value_t = 100_000)]
        draws: u64,
        #[arg(long, default_value_t = 1e-3)]
        significance: f64,
    },
    /// Run a solver on a saved instance directory.
    Solve {
        #[arg(value_enum)]
        solver: SolverName,
        instance: PathBuf,
        /// Sample budget per vector for the sample-only solver.
        #[arg(long, default_value_t = 10_000)]
        budget: u64,
    },
    /// Generate an instance and save it to a directory.
    GenInstance {
        #[arg(long, value_enum)]
        kind: ProblemName,
        #[arg(long)]
        n: u32,
        #[arg(long = "c", default_value_t = 2)]
        c: usize,
        #[arg(long)]
        dir: PathBuf,
        /// Write the hidden index into the manifest.
        #[arg(long)]
        reveal: bool,
    },
    /// Optimal two-state discrimination.
    Discriminate {
        /// Density operator file for state A.
        #[arg(long, requires = "b", conflicts_with = "family")]
        a: Option<PathBuf>,
        #[arg(long, requires = "a")]
        b: Option<PathBuf>,
        /// Build the pair from a named family instead of files.
        #[arg(long, value_enum)]
        family: Option<Family>,
        #[arg(long, default_value_t = 4)]
        d: usize,
        #[arg(long = "copies", default_value_t = 1)]
        copies: usize,
        /// Simulated measurement trials (0 skips the simulation).
        #[arg(long, default_value_t = 0)]
        trials: u64,
    },
    /// Trace-norm gap between real and complex Haar moments.
    HaarGap {
        #[arg(long = "d", value_delimiter = ',', required = true)]
        d: Vec<usize>,
        #[arg(long = "N", value_delimiter = ',', required = true)]
        copies: Vec<usize>,
        #[arg(long, default_value_t = 0)]
        mc_samples: u64,
    },
    /// Minimal copies separating the minus-sign pair, per dimension.
    CopiesSweep {
        #[arg(long = "d", value_delimiter = ',', default_values_t = default_copies_ds())]
        d: Vec<u64>,
        /// Schatten-1 target; 1.6 is success probability 0.9.
        #[arg(long, default_value_t = discrimination::SCHATTEN1_THRESHOLD_90)]
        threshold: f64,
    },
    /// Repeated seeded solves per n.
    Trials {
        #[arg(long, value_enum)]
        problem: ProblemName,
        #[arg(long, value_enum)]
        solver: SolverName,
        #[arg(long = "n", value_delimiter = ',', required = true)]
        n: Vec<u32>,
        #[arg(long = "c", default_value_t = 4)]
        c: usize,
        #[arg(long, default_value_t = 1000)]
        trials: u64,
        #[arg(long, default_value_t = 10_000)]
        budget: u64,
    },
    /// Strong simulation of a circuit through one SQ query.
    SharpP {
        #[arg(long)]
        circuit: PathBuf,
    },
    /// Product versus amplitude encoding of the minus-sign family.
    EncodingDemo {
        #[arg(long = "n", value_delimiter = ',', required = true)]
        n: Vec<u32>,
        #[arg(long, default_value_t = 1000)]
        trials: u64,
        #[arg(long = "c", default_value_t = 2)]
        c: usize,
    },
}

fn default_copies_ds() -> Vec<u64> {
    (6..=12).map(|k| 1u64 << k).collect()
}

#[derive(Args, Debug)]
struct VectorArgs {
    /// Dense vector file (`<re> <im>` per line).
    #[arg(long, conflicts_with = "kind")]
    vector: Option<PathBuf>,
    #[arg(long, value_enum, requires = "n")]
    kind: Option<KindName>,
    #[arg(long)]
    n: Option<u32>,
    /// 1-based index of the negative component for `minus-at-index`.
    #[arg(long)]
    minus_index: Option<u64>,
    /// Bit mask for `sign-pattern`.
    #[arg(long)]
    mask: Option<u64>,
    /// Magnitude of every component (default 2^{-n/2}).
    #[arg(long)]
    scale: Option<f64>,
}

#[derive(Copy, Clone, Debug, ValueEnum)]
enum KindName {
    AllPlus,
    MinusAtIndex,
    SignPattern,
}

#[derive(Copy, Clone, Debug, ValueEnum)]
enum SolverName {
    MinusSign,
    RealSearch,
    SampleOnly,
}

impl SolverName {
    fn solver(self, budget: u64) -> Solver {
        match self {
            SolverName::MinusSign => Solver::MinusSign,
            SolverName::RealSearch => Solver::RealSearch,
            SolverName::SampleOnly => Solver::SampleOnly { budget },
        }
    }
}

#[derive(Copy, Clone, Debug, ValueEnum)]
enum ProblemName {
    MinusSign,
    RealSearch,
    UnnormalizedMinus,
}

impl From<ProblemName> for ProblemKind {
    fn from(p: ProblemName) -> Self {
        match p {
            ProblemName::MinusSign => ProblemKind::MinusSign,
            ProblemName::RealSearch => ProblemKind::RealSearch,
            ProblemName::UnnormalizedMinus => ProblemKind::UnnormalizedMinus,
        }
    }
}

#[derive(Copy, Clone, Debug, ValueEnum)]
enum Family {
    MinusSign,
    HaarMoments,
}

/// A run that completed but found a failed check.
struct Violation(String);

enum Failure {
    Config(Error),
    Violation(String),
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        if e.is_violation() { Failure::Violation(e.to_string()) } else { Failure::Config(e) }
    }
}

impl From<Violation> for Failure {
    fn from(v: Violation) -> Self {
        Failure::Violation(v.0)
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { ExitCode::from(1) } else { ExitCode::SUCCESS };
        }
    };
    if let Some(t) = cli.threads {
        if let Err(e) = rayon::ThreadPoolBuilder::new().num_threads(t).build_global() {
            eprintln!("error: cannot configure thread pool: {e}");
            return ExitCode::from(1);
        }
    }
    match run(&cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(Failure::Config(e)) => {
            eprintln!("error: {e}");
            ExitCode::from(1)
        }
        Err(Failure::Violation(msg)) => {
            eprintln!("violation: {msg}");
            ExitCode::from(2)
        }
    }
}

fn run(cli: &Cli) -> std::result::Result<(), Failure> {
    match &cli.command {
        Command::SampleTest { vector, draws, significance } => sample_test(cli, vector, *draws, *significance),
        Command::Solve { solver, instance, budget } => solve(cli, *solver, instance, *budget),
        Command::GenInstance { kind, n, c, dir, reveal } => {
            let inst = instances::generate((*kind).into(), *n, *c, cli.seed)?;
            inst.save(dir, *reveal)?;
            emit(cli, &json!({"kind": inst.kind().name(), "n": n, "C": c, "seed": cli.seed, "dir": dir}))
        }
        Command::Discriminate { a, b, family, d, copies, trials } => match (a, b, family) {
            (Some(a), Some(b), None) => discriminate_files(cli, a, b, *trials),
            (None, None, Some(Family::MinusSign)) => discriminate_minus_sign(cli, *d, *copies, *trials),
            (None, None, Some(Family::HaarMoments)) => discriminate_haar(cli, *d, *copies, *trials),
            _ => Err(Error::InvalidParameter("give either --a and --b or --family".into()).into()),
        },
        Command::HaarGap { d, copies, mc_samples } => {
            sweep(cli, Experiment::HaarGap { ds: d.clone(), copies: copies.clone(), mc_samples: *mc_samples })
                .map(|_| ())
        }
        Command::CopiesSweep { d, threshold } => {
            let records = sweep(cli, Experiment::CopiesSweep { ds: d.clone(), threshold: *threshold })?;
            report_copies_fit(&records);
            Ok(())
        }
        Command::Trials { problem, solver, n, c, trials, budget } => sweep(
            cli,
            Experiment::Trials {
                problem: (*problem).into(),
                solver: solver.solver(*budget),
                ns: n.clone(),
                num_vectors: *c,
                trials: *trials,
            },
        )
        .map(|_| ()),
        Command::SharpP { circuit } => sharp_p(cli, circuit),
        Command::EncodingDemo { n, trials, c } => {
            sweep(cli, Experiment::EncodingDemo { ns: n.clone(), num_vectors: *c, trials: *trials }).map(|_| ())
        }
    }
}

/// Writes one JSON line to `--out` or standard output.
fn emit(cli: &Cli, value: &serde_json::Value) -> std::result::Result<(), Failure> {
    let line = format!("{value}\n");
    match &cli.out {
        Some(p) => std::fs::write(p, line).map_err(Error::from)?,
        None => print!("{line}"),
    }
    Ok(())
}

fn sweep(cli: &Cli, experiment: Experiment) -> std::result::Result<Vec<ResultRecord>, Failure> {
    let mut config = ExperimentConfig::new(experiment, cli.seed);
    config.out = cli.out.clone();
    config.format = cli.format.into();
    config.timing = cli.timing;
    let records = experiment::run_sweep(&config)?;
    experiment::write_records(&records, config.format, config.out.as_deref())?;
    for r in records.iter().filter(|r| r.error.is_some()) {
        eprintln!("cell failed: {}", r.error.as_deref().unwrap_or_default());
    }
    if let Some(v) = records.iter().find(|r| r.is_violation()) {
        return Err(Violation(v.error.clone().unwrap_or_default()).into());
    }
    Ok(records)
}

fn report_copies_fit(records: &[ResultRecord]) {
    let pts: Vec<(f64, f64)> =
        records.iter().filter_map(|r| Some((r.get_f64("d")?, r.get_f64("min_copies")?))).collect();
    if pts.len() < 3 {
        return;
    }
    let (xs, ys): (Vec<f64>, Vec<f64>) = pts.into_iter().unzip();
    if let Ok(fit) = stats::linear_fit(&xs, &ys) {
        eprintln!("fit: N = {:.6} d + {:.6}, R^2 = {:.6}", fit.slope, fit.intercept, fit.r_squared);
    }
}

fn build_vector(args: &VectorArgs) -> Result<SqHandle> {
    if let Some(path) = &args.vector {
        return SqHandle::build_dense(vector_io::read_dense_vector(path)?);
    }
    let (Some(kind), Some(n)) = (args.kind, args.n) else {
        return Err(Error::InvalidParameter("give --vector or --kind with --n".into()));
    };
    let kind = match kind {
        KindName::AllPlus => ImplicitKind::AllPlus,
        KindName::MinusAtIndex => ImplicitKind::MinusAt(
            args.minus_index.ok_or_else(|| Error::InvalidParameter("minus-at-index needs --minus-index".into()))?,
        ),
        KindName::SignPattern => ImplicitKind::SignPattern(
            args.mask.ok_or_else(|| Error::InvalidParameter("sign-pattern needs --mask".into()))?,
        ),
    };
    let scale = args.scale.unwrap_or_else(|| ImplicitVector::unit_scale(n));
    SqHandle::build_implicit(ImplicitVector::new(kind, n, scale)?)
}

fn sample_test(cli: &Cli, args: &VectorArgs, draws: u64, significance: f64) -> std::result::Result<(), Failure> {
    let handle = build_vector(args)?;
    if handle.len() > SAMPLE_TEST_MAX_LEN {
        return Err(Error::BudgetExceeded(format!("{} indices exceed {SAMPLE_TEST_MAX_LEN}", handle.len())).into());
    }
    if draws == 0 {
        return Err(Error::InvalidParameter("--draws must be positive".into()).into());
    }
    let probs = handle.sampling_distribution()?;
    let mut counts = vec![0u64; probs.len()];
    let mut rng = rng_for(cli.seed, &[tag::TRIAL]);
    for _ in 0..draws {
        counts[(handle.sample(&mut rng)? - 1) as usize] += 1;
    }
    let outcome = stats::chi_square_gof(&counts, &probs)?;
    let max_dev = counts
        .iter()
        .zip(&probs)
        .map(|(&c, &p)| (c as f64 / draws as f64 - p).abs())
        .fold(0.0, f64::max);
    let passes = outcome.passes(significance);
    emit(
        cli,
        &json!({
            "len": handle.len(),
            "draws": draws,
            "statistic": outcome.statistic,
            "dof": outcome.dof,
            "p_value": outcome.p_value,
            "significance": significance,
            "max_abs_freq_dev": max_dev,
            "passes": passes,
            "seed": cli.seed,
        }),
    )?;
    if !passes {
        return Err(Violation(format!("chi-square p-value {} below {significance}", outcome.p_value)).into());
    }
    Ok(())
}

fn solve(cli: &Cli, solver: SolverName, dir: &Path, budget: u64) -> std::result::Result<(), Failure> {
    let inst = ProblemInstance::load(dir)?;
    let solver = solver.solver(budget);
    let report = learners::solve_instance(&inst, solver, cli.seed)?;
    let calls: Vec<_> = report
        .stats
        .iter()
        .map(|s| json!({"sample": s.sample_calls, "query": s.query_calls, "norm": s.norm_calls}))
        .collect();
    emit(
        cli,
        &json!({
            "solver": solver.name(),
            "answer": report.answer,
            "correct": report.correct,
            "calls": calls,
            "elapsed_ns": report.elapsed_ns,
        }),
    )
}

fn discrimination_json(
    cli: &Cli,
    a: &DensityOperator,
    b: &DensityOperator,
    trials: u64,
) -> Result<serde_json::Map<String, serde_json::Value>> {
    let s1 = discrimination::schatten1_diff(a, b)?;
    let success = discrimination::helstrom_from_schatten1(s1);
    let mut out = serde_json::Map::new();
    out.insert("dim".into(), a.dim().into());
    out.insert("schatten1".into(), s1.into());
    out.insert("helstrom_success".into(), success.into());
    if trials > 0 {
        let mut rng = rng_for(cli.seed, &[tag::TRIAL]);
        let sim = discrimination::simulate_discrimination(a, b, trials, &mut rng)?;
        out.insert("trials".into(), trials.into());
        out.insert("simulated_success".into(), sim.into());
        out.insert("binomial_sigma".into(), stats::binomial_sigma(success, trials).into());
    }
    Ok(out)
}

fn read_density(path: &Path) -> Result<DensityOperator> {
    DensityOperator::new(vector_io::parse_density_matrix(&std::fs::read_to_string(path)?)?)
}

fn discriminate_files(cli: &Cli, a: &Path, b: &Path, trials: u64) -> std::result::Result<(), Failure> {
    let (a, b) = (read_density(a)?, read_density(b)?);
    emit(cli, &discrimination_json(cli, &a, &b, trials)?.into())
}

/// Largest `d^N` for which the minus-sign family materializes density
/// operators for simulation.
const FAMILY_SIM_DIM: usize = 256;

fn discriminate_minus_sign(cli: &Cli, d: usize, copies: usize, trials: u64) -> std::result::Result<(), Failure> {
    let closed = discrimination::ncopy_minus_sign_tracenorm(d as u64, copies as u64)?;
    let dense = discrimination::dense_ncopy_minus_sign_tracenorm(d, copies)?;
    let mut out = serde_json::Map::new();
    out.insert("family".into(), "minus-sign".into());
    out.insert("d".into(), d.into());
    out.insert("copies".into(), copies.into());
    out.insert("closed_form_schatten1".into(), closed.into());
    out.insert("dense_schatten1".into(), dense.value.into());
    out.insert("helstrom_success".into(), discrimination::helstrom_from_schatten1(closed).into());
    if trials > 0 {
        if dense.dim > FAMILY_SIM_DIM {
            return Err(Error::BudgetExceeded(format!("simulation needs d^N <= {FAMILY_SIM_DIM}")).into());
        }
        let (x, y) = discrimination::minus_sign_copy_states(d, copies);
        let detail = discrimination_json(cli, &DensityOperator::pure(&x)?, &DensityOperator::pure(&y)?, trials)?;
        out.insert("trials".into(), trials.into());
        out.insert("simulated_success".into(), detail["simulated_success"].clone());
        out.insert("binomial_sigma".into(), detail["binomial_sigma"].clone());
    }
    emit(cli, &out.into())?;
    if (closed - dense.value).abs() > 1e-9 {
        return Err(Violation(format!("closed form {closed} disagrees with dense value {}", dense.value)).into());
    }
    Ok(())
}

fn discriminate_haar(cli: &Cli, d: usize, copies: usize, trials: u64) -> std::result::Result<(), Failure> {
    let report = moments::trace_norm_gap(d, copies)?;
    let (r1, r2) = moments::haar_rho_pair(d, copies)?;
    let mut out = discrimination_json(cli, &r1, &r2, trials)?;
    out.insert("family".into(), "haar-moments".into());
    out.insert("d".into(), d.into());
    out.insert("copies".into(), copies.into());
    out.insert("gap".into(), report.gap.into());
    emit(cli, &out.into())
}

fn sharp_p(cli: &Cli, path: &Path) -> std::result::Result<(), Failure> {
    let c = circuit::parse_circuit(&std::fs::read_to_string(path).map_err(Error::from)?)?;
    let psi = circuit::build_psi_u(&c)?;
    let handle = circuit::sq_from_state(&psi)?;
    let q = handle.query(1)?;
    let p0 = circuit::p_zero_first_qubit(&c)?;
    let diff = (q - sqlab::Complex64::new(p0, 0.0)).norm();
    emit(
        cli,
        &json!({
            "qubits": c.qubits(),
            "gates": c.gates().len(),
            "query_re": q.re,
            "query_im": q.im,
            "p_zero": p0,
            "abs_diff": diff,
            "query_calls": handle.stats().query_calls,
        }),
    )?;
    if diff > 1e-12 {
        return Err(Violation(format!("|Query - p_zero| = {diff:e}")).into());
    }
    Ok(())
}
