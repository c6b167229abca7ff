//! Config-driven experiment runner behind the `boundedrank` binary.
//!
//! Exit codes: 0 when every solve ends stationary, 2 on `max_iters`, 3 on a
//! line-search failure, 1 on configuration or input errors, 4 when `check`
//! finds a failing property or `compare --assert-identical` finds differing
//! traces. When several solves run, the largest code wins.

use std::ffi::OsString;
use std::fs;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand, ValueEnum};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::checks::{render_table, run_all, DEFAULT_CHECK_SEED};
use crate::error::{Error, Result};
use crate::io::{matrix_from_csv, matrix_from_json, point_from_json, MatrixDoc};
use crate::linalg::{truncate_to_rank, DenseMatrix, RankParams};
use crate::problems::{CompletionPayload, CostFunction, LowRankApproxPayload, ProblemDoc, TermDoc};
use crate::sampling::{gaussian_low_rank, gaussian_matrix};
use crate::solver::{
    run, Algorithm, LineSearchParams, ProjectionMethod, SolverParams, Termination, Trace,
};
use crate::variety::VarietyPoint;

pub const EXIT_OK: i32 = 0;
pub const EXIT_CONFIG: i32 = 1;
pub const EXIT_MAX_ITERS: i32 = 2;
pub const EXIT_LINE_SEARCH: i32 = 3;
pub const EXIT_CHECK_FAILED: i32 = 4;

pub const SEED_ENV: &str = "LOWRANK_SEED";

pub fn exit_code(termination: Termination) -> i32 {
    match termination {
        Termination::Stationary => EXIT_OK,
        Termination::MaxIters => EXIT_MAX_ITERS,
        Termination::LineSearchFailure => EXIT_LINE_SEARCH,
    }
}

#[derive(Debug, Parser)]
#[command(
    name = "boundedrank",
    version,
    about = "Rank-constrained first-order optimization"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Solve the configured problem and write traces and summaries.
    Run(RunArgs),
    /// Run P²GD and P²GDR from the same start and write a verdict.
    Compare(CompareArgs),
    /// Run the property suite and print a pass/fail table.
    Check {
        #[arg(long, default_value_t = DEFAULT_CHECK_SEED)]
        seed: u64,
    },
    /// Print or write a problem document.
    GenProblem(GenArgs),
}

#[derive(Debug, Args)]
struct RunArgs {
    /// Path to the JSON run configuration.
    config: PathBuf,
    #[command(flatten)]
    overrides: Overrides,
}

#[derive(Debug, Args)]
struct CompareArgs {
    config: PathBuf,
    #[command(flatten)]
    overrides: Overrides,
    /// Fail with exit code 4 unless both traces are byte-identical.
    #[arg(long)]
    assert_identical: bool,
}

/// Command-line values that take precedence over the configuration file.
#[derive(Debug, Clone, Default, Args)]
pub struct Overrides {
    #[arg(long)]
    pub max_iters: Option<usize>,
    #[arg(long)]
    pub delta: Option<f64>,
    #[arg(long)]
    pub stop_tol: Option<f64>,
    /// Output directory.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
enum ProblemKind {
    LowrankApprox,
    Completion,
    Polynomial,
}

#[derive(Debug, Args)]
struct GenArgs {
    #[arg(value_enum)]
    kind: ProblemKind,
    #[arg(long, default_value_t = 10)]
    rows: usize,
    #[arg(long, default_value_t = 8)]
    cols: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Rank of the planted completion target.
    #[arg(long, default_value_t = 2)]
    planted_rank: usize,
    /// Probability that a completion entry is observed.
    #[arg(long, default_value_t = 0.6)]
    observed: f64,
    /// Write to this file instead of standard output.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum AlgorithmChoice {
    #[default]
    P2gdr,
    P2gd,
    Both,
}

impl AlgorithmChoice {
    pub fn algorithms(self) -> Vec<Algorithm> {
        match self {
            AlgorithmChoice::P2gdr => vec![Algorithm::P2gdr],
            AlgorithmChoice::P2gd => vec![Algorithm::P2gd],
            AlgorithmChoice::Both => vec![Algorithm::P2gd, Algorithm::P2gdr],
        }
    }
}

fn default_x0() -> String {
    "zero".into()
}

fn default_delta() -> f64 {
    RankParams::default().delta
}

fn default_max_iters() -> usize {
    1000
}

fn default_output_dir() -> PathBuf {
    PathBuf::from("out")
}

/// The JSON run configuration. Relative paths are resolved against the
/// directory containing the configuration file.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub problem: PathBuf,
    /// `"zero"`, `"random"`, `"random:<seed>"`, or a path to a `.json`
    /// matrix or point, or a `.csv` matrix.
    #[serde(default = "default_x0")]
    pub x0: String,
    pub rank_bound: usize,
    #[serde(default)]
    pub algorithm: AlgorithmChoice,
    #[serde(default)]
    pub line_search: LineSearchParams,
    #[serde(default = "default_delta")]
    pub delta: f64,
    #[serde(default)]
    pub rank_rel_tol: Option<f64>,
    #[serde(default)]
    pub stop_tol: Option<f64>,
    #[serde(default = "default_max_iters")]
    pub max_iters: usize,
    #[serde(default)]
    pub projection: ProjectionMethod,
    #[serde(default = "default_output_dir")]
    pub output_dir: PathBuf,
}

impl RunConfig {
    pub fn from_json(text: &str) -> Result<Self> {
        Ok(serde_json::from_str(text)?)
    }

    pub fn solver_params(&self) -> SolverParams {
        let mut rank = RankParams {
            delta: self.delta,
            ..RankParams::default()
        };
        if let Some(tol) = self.rank_rel_tol {
            rank.rank_rel_tol = tol;
        }
        SolverParams {
            line_search: self.line_search,
            rank,
            stop_tol: self.stop_tol,
            max_iters: self.max_iters,
            rank_bound: self.rank_bound,
            projection: self.projection,
        }
    }

    pub fn apply(&mut self, overrides: &Overrides) {
        if let Some(v) = overrides.max_iters {
            self.max_iters = v;
        }
        if let Some(v) = overrides.delta {
            self.delta = v;
        }
        if let Some(v) = overrides.stop_tol {
            self.stop_tol = Some(v);
        }
        if let Some(v) = &overrides.out {
            self.output_dir = v.clone();
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum X0Source {
    Zero,
    Random(Option<u64>),
    File(PathBuf),
}

impl X0Source {
    pub fn parse(text: &str) -> Result<Self> {
        match text {
            "zero" => Ok(X0Source::Zero),
            "random" => Ok(X0Source::Random(None)),
            _ => match text.strip_prefix("random:") {
                Some(seed) => seed
                    .parse()
                    .map(|s| X0Source::Random(Some(s)))
                    .map_err(|_| Error::invalid(format!("bad seed in x0 {text:?}"))),
                None => Ok(X0Source::File(PathBuf::from(text))),
            },
        }
    }
}

/// Seed from `LOWRANK_SEED` if set, else from the configuration, else 0.
fn resolve_seed(configured: Option<u64>) -> Result<u64> {
    match std::env::var(SEED_ENV) {
        Ok(value) => value.trim().parse().map_err(|_| {
            Error::invalid(format!(
                "{SEED_ENV} must be an unsigned integer, got {value:?}"
            ))
        }),
        Err(_) => Ok(configured.unwrap_or(0)),
    }
}

/// Entries i.i.d. standard normal, truncated to rank `rank_bound`.
pub fn random_start(seed: u64, rows: usize, cols: usize, rank_bound: usize) -> Result<DenseMatrix> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    gaussian_low_rank(&mut rng, rows, cols, rank_bound)
}

fn read(path: &Path) -> Result<String> {
    fs::read_to_string(path).map_err(|e| Error::Format(format!("{}: {e}", path.display())))
}

fn load_matrix(path: &Path) -> Result<DenseMatrix> {
    let text = read(path)?;
    match path.extension().and_then(|e| e.to_str()) {
        Some("csv") => matrix_from_csv(&text),
        Some("json") => match matrix_from_json(&text) {
            Ok(x) => Ok(x),
            Err(_) => Ok(point_from_json(&text)?.to_matrix()),
        },
        _ => Err(Error::Format(format!(
            "{}: expected a .json or .csv file",
            path.display()
        ))),
    }
}

fn resolve(base: &Path, path: &Path) -> PathBuf {
    if path.is_absolute() {
        path.to_path_buf()
    } else {
        base.join(path)
    }
}

/// A fully validated experiment, ready to run.
pub struct Experiment {
    pub problem: Box<dyn CostFunction>,
    pub x0: DenseMatrix,
    pub params: SolverParams,
    pub algorithm: AlgorithmChoice,
    pub output_dir: PathBuf,
}

impl Experiment {
    /// Loads and validates everything a run needs without touching the
    /// output directory.
    pub fn prepare(config_path: &Path, overrides: &Overrides) -> Result<Self> {
        let mut config = RunConfig::from_json(&read(config_path)?)?;
        let base = config_path.parent().unwrap_or(Path::new("."));
        config.output_dir = resolve(base, &config.output_dir);
        config.apply(overrides);
        let params = config.solver_params();
        params.validate()?;

        let problem = ProblemDoc::from_json(&read(&resolve(base, &config.problem))?)?.build()?;
        let (rows, cols) = problem.shape();
        if config.rank_bound >= rows.min(cols) {
            return Err(Error::invalid(format!(
                "rank_bound {} must be smaller than min(m, n) = {}",
                config.rank_bound,
                rows.min(cols)
            )));
        }
        let x0 = match X0Source::parse(&config.x0)? {
            X0Source::Zero => DenseMatrix::zeros(rows, cols),
            X0Source::Random(seed) => {
                random_start(resolve_seed(seed)?, rows, cols, config.rank_bound)?
            }
            X0Source::File(path) => load_matrix(&resolve(base, &path))?,
        };
        if x0.shape() != (rows, cols) {
            return Err(Error::ShapeMismatch {
                expected: (rows, cols),
                found: x0.shape(),
            });
        }
        VarietyPoint::from_matrix_with(&x0, config.rank_bound, params.rank.rank_rel_tol)?;
        Ok(Self {
            problem,
            x0,
            params,
            algorithm: config.algorithm,
            output_dir: config.output_dir,
        })
    }

    pub fn solve(&self, algorithm: Algorithm) -> Result<Trace> {
        run(algorithm, self.problem.as_ref(), &self.x0, &self.params)
    }

    /// Solves with every requested algorithm; `both` runs the two solves on
    /// separate threads.
    pub fn solve_all(&self, algorithms: &[Algorithm]) -> Vec<(Algorithm, Result<Trace>)> {
        std::thread::scope(|scope| {
            let handles: Vec<_> = algorithms
                .iter()
                .map(|&a| (a, scope.spawn(move || self.solve(a))))
                .collect();
            handles
                .into_iter()
                .map(|(a, h)| (a, h.join().expect("solver thread panicked")))
                .collect()
        })
    }
}

pub fn trace_path(dir: &Path, algorithm: Algorithm) -> PathBuf {
    dir.join(format!("trace_{}.csv", algorithm.name()))
}

pub fn summary_path(dir: &Path, algorithm: Algorithm) -> PathBuf {
    dir.join(format!("summary_{}.json", algorithm.name()))
}

pub fn write_trace(dir: &Path, trace: &Trace) -> Result<()> {
    fs::create_dir_all(dir)?;
    fs::write(trace_path(dir, trace.algorithm), trace.to_csv())?;
    let summary = serde_json::to_string_pretty(&trace.summary())?;
    fs::write(summary_path(dir, trace.algorithm), summary + "\n")?;
    Ok(())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FinalState {
    pub final_s: f64,
    pub final_f: f64,
    pub final_rank: usize,
}

impl FinalState {
    fn of(trace: &Trace) -> Self {
        Self {
            final_s: trace.final_s,
            final_f: trace.final_f,
            final_rank: trace.final_point.rank(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Verdict {
    pub p2gd: FinalState,
    pub p2gdr: FinalState,
    pub stop_tol: f64,
    pub apocalypse_flag: bool,
}

impl Verdict {
    pub fn new(plain: &Trace, reduced: &Trace) -> Self {
        let stop_tol = reduced.stop_tol;
        Self {
            p2gd: FinalState::of(plain),
            p2gdr: FinalState::of(reduced),
            stop_tol,
            apocalypse_flag: plain.final_s > 10.0 * stop_tol && reduced.final_s <= stop_tol,
        }
    }
}

fn report(algorithm: Algorithm, trace: &Trace) {
    let mut line = format!(
        "{algorithm}: {} after {} iterations, f = {:e}, s = {:e}, rank {}",
        trace.termination,
        trace.iterations(),
        trace.final_f,
        trace.final_s,
        trace.final_point.rank()
    );
    if let Some(failure) = &trace.failure {
        line.push_str(&format!(" ({failure})"));
    }
    eprintln!("{line}");
}

fn write_and_code(dir: &Path, algorithm: Algorithm, outcome: &Result<Trace>) -> i32 {
    match outcome {
        Ok(trace) => {
            report(algorithm, trace);
            match write_trace(dir, trace) {
                Ok(()) => exit_code(trace.termination),
                Err(err) => {
                    eprintln!("error: {algorithm}: {err}");
                    EXIT_CONFIG
                }
            }
        }
        Err(err) => {
            eprintln!("error: {algorithm}: {err}");
            EXIT_CONFIG
        }
    }
}

fn cmd_run(args: &RunArgs) -> i32 {
    let experiment = match Experiment::prepare(&args.config, &args.overrides) {
        Ok(e) => e,
        Err(err) => {
            eprintln!("error: {err}");
            return EXIT_CONFIG;
        }
    };
    experiment
        .solve_all(&experiment.algorithm.algorithms())
        .iter()
        .map(|(a, outcome)| write_and_code(&experiment.output_dir, *a, outcome))
        .max()
        .unwrap_or(EXIT_OK)
}

fn cmd_compare(args: &CompareArgs) -> i32 {
    let experiment = match Experiment::prepare(&args.config, &args.overrides) {
        Ok(e) => e,
        Err(err) => {
            eprintln!("error: {err}");
            return EXIT_CONFIG;
        }
    };
    let outcomes = experiment.solve_all(&[Algorithm::P2gd, Algorithm::P2gdr]);
    let mut code = outcomes
        .iter()
        .map(|(a, outcome)| write_and_code(&experiment.output_dir, *a, outcome))
        .max()
        .unwrap_or(EXIT_OK);
    if let [(_, Ok(plain)), (_, Ok(reduced))] = outcomes.as_slice() {
        let verdict = Verdict::new(plain, reduced);
        let text = serde_json::to_string_pretty(&verdict).expect("verdict serializes") + "\n";
        if let Err(err) = fs::write(experiment.output_dir.join("verdict.json"), text) {
            eprintln!("error: verdict: {err}");
            code = code.max(EXIT_CONFIG);
        }
        eprintln!("apocalypse_flag = {}", verdict.apocalypse_flag);
        if args.assert_identical {
            if plain.to_csv() == reduced.to_csv() {
                eprintln!("traces are identical");
            } else {
                eprintln!("error: traces differ");
                code = code.max(EXIT_CHECK_FAILED);
            }
        }
    } else if args.assert_identical {
        code = code.max(EXIT_CHECK_FAILED);
    }
    code
}

fn cmd_check(seed: u64) -> i32 {
    let outcomes = run_all(seed);
    print!("{}", render_table(&outcomes));
    if outcomes.iter().all(|o| o.passed) {
        EXIT_OK
    } else {
        EXIT_CHECK_FAILED
    }
}

/// A problem document of the requested kind with seeded random data.
pub fn generate_problem(
    kind: &str,
    rows: usize,
    cols: usize,
    seed: u64,
    planted_rank: usize,
    observed: f64,
) -> Result<ProblemDoc> {
    if rows == 0 || cols == 0 {
        return Err(Error::invalid("matrix dimensions must be positive"));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let shape = (rows, cols);
    match kind {
        "lowrank_approx" => Ok(ProblemDoc::LowrankApprox {
            shape,
            payload: LowRankApproxPayload {
                target: MatrixDoc::from_matrix(&gaussian_matrix(&mut rng, rows, cols)),
            },
        }),
        "completion" => {
            if !(0.0..=1.0).contains(&observed) {
                return Err(Error::invalid(format!(
                    "observed fraction {observed} outside [0, 1]"
                )));
            }
            if planted_rank > rows.min(cols) {
                return Err(Error::invalid("planted rank exceeds min(m, n)"));
            }
            let target = truncate_to_rank(&gaussian_matrix(&mut rng, rows, cols), planted_rank)?.0;
            let mask = DenseMatrix::from_fn(rows, cols, |_, _| {
                if rng.random_bool(observed) {
                    1.0
                } else {
                    0.0
                }
            });
            Ok(ProblemDoc::Completion {
                shape,
                payload: CompletionPayload {
                    target: MatrixDoc::from_matrix(&target),
                    mask: MatrixDoc::from_matrix(&mask),
                },
            })
        }
        // ½‖X‖² written out term by term, as a template to edit.
        "polynomial" => Ok(ProblemDoc::Polynomial {
            shape,
            payload: (0..rows)
                .flat_map(|i| {
                    (0..cols).map(move |j| TermDoc {
                        monomial: vec![(i, j, 2)],
                        coeff: 0.5,
                    })
                })
                .collect(),
        }),
        other => Err(Error::invalid(format!("unknown problem kind {other:?}"))),
    }
}

fn cmd_gen_problem(args: &GenArgs) -> i32 {
    let kind = match args.kind {
        ProblemKind::LowrankApprox => "lowrank_approx",
        ProblemKind::Completion => "completion",
        ProblemKind::Polynomial => "polynomial",
    };
    let doc = match generate_problem(
        kind,
        args.rows,
        args.cols,
        args.seed,
        args.planted_rank,
        args.observed,
    ) {
        Ok(doc) => doc,
        Err(err) => {
            eprintln!("error: {err}");
            return EXIT_CONFIG;
        }
    };
    let text = doc.to_json_pretty() + "\n";
    match &args.out {
        Some(path) => match fs::write(path, text) {
            Ok(()) => EXIT_OK,
            Err(err) => {
                eprintln!("error: {}: {err}", path.display());
                EXIT_CONFIG
            }
        },
        None => {
            print!("{text}");
            EXIT_OK
        }
    }
}

/// Parses `args` (including the program name) and runs the command,
/// returning the process exit code.
pub fn main_with_args<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(err) => {
            let code = if err.use_stderr() {
                EXIT_CONFIG
            } else {
                EXIT_OK
            };
            let _ = err.print();
            return code;
        }
    };
    match &cli.command {
        Command::Run(args) => cmd_run(args),
        Command::Compare(args) => cmd_compare(args),
        Command::Check { seed } => cmd_check(*seed),
        Command::GenProblem(args) => cmd_gen_problem(args),
    }
}
