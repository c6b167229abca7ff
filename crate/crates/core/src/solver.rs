//! Projected steepest descent on the bounded-rank variety with backtracking
//! line search (P²GD), its rank-reduction search function, and the P²GDR
//! outer loop.

use std::fmt;
use std::time::Instant;

use nalgebra::DVector;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::io::format_f64;
use crate::linalg::{compute_svd_with, ensure_finite, rank_threshold, DenseMatrix, RankParams};
use crate::problems::CostFunction;
use crate::variety::{
    evaluate_stationarity, StationarityEval, TangentDecomposition, TangentProjection, VarietyPoint,
};

/// Constants of the backtracking line search.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct LineSearchParams {
    pub alpha_lo: f64,
    pub alpha_hi: f64,
    pub beta: f64,
    pub c: f64,
    pub max_backtracks: usize,
    /// First trial step; `None` starts at `alpha_hi`. Must lie in
    /// `[alpha_lo, alpha_hi]`.
    pub initial_alpha: Option<f64>,
}

impl Default for LineSearchParams {
    fn default() -> Self {
        Self {
            alpha_lo: 1e-8,
            alpha_hi: 1.0,
            beta: 0.5,
            c: 1e-4,
            max_backtracks: 60,
            initial_alpha: None,
        }
    }
}

impl LineSearchParams {
    pub fn validate(&self) -> Result<()> {
        if !(self.alpha_lo > 0.0 && self.alpha_lo < self.alpha_hi && self.alpha_hi.is_finite()) {
            return Err(Error::invalid(format!(
                "need 0 < alpha_lo < alpha_hi < inf, got alpha_lo = {}, alpha_hi = {}",
                self.alpha_lo, self.alpha_hi
            )));
        }
        if !(self.beta > 0.0 && self.beta < 1.0) {
            return Err(Error::invalid(format!(
                "beta must lie in (0, 1), got {}",
                self.beta
            )));
        }
        if !(self.c > 0.0 && self.c < 1.0) {
            return Err(Error::invalid(format!(
                "c must lie in (0, 1), got {}",
                self.c
            )));
        }
        if self.max_backtracks == 0 {
            return Err(Error::invalid("max_backtracks must be positive"));
        }
        if let Some(a) = self.initial_alpha {
            if !(a >= self.alpha_lo && a <= self.alpha_hi) {
                return Err(Error::invalid(format!(
                    "initial_alpha {a} outside [{}, {}]",
                    self.alpha_lo, self.alpha_hi
                )));
            }
        }
        Ok(())
    }

    pub fn initial(&self) -> f64 {
        self.initial_alpha.unwrap_or(self.alpha_hi)
    }
}

/// How `X + αG` is projected back onto the variety.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ProjectionMethod {
    /// SVD of the materialized `m × n` sum.
    #[default]
    Ambient,
    /// QR of the stacked low-rank factors (width at most `rank + r`) followed
    /// by an SVD of the small core.
    Factored,
}

#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct StepOptions {
    pub projection: ProjectionMethod,
    pub rank_rel_tol: f64,
}

impl StepOptions {
    pub fn new(projection: ProjectionMethod, rank_rel_tol: f64) -> Self {
        Self {
            projection,
            rank_rel_tol,
        }
    }
}

fn default_step_options() -> StepOptions {
    StepOptions::new(
        ProjectionMethod::Ambient,
        RankParams::default().rank_rel_tol,
    )
}

#[derive(Debug, Clone, PartialEq)]
pub struct SolverParams {
    pub line_search: LineSearchParams,
    pub rank: RankParams,
    /// Threshold on `s_f` below which an iterate counts as stationary.
    /// `None` means `1e-8 · (1 + ‖∇f(X₀)‖)`.
    pub stop_tol: Option<f64>,
    pub max_iters: usize,
    pub rank_bound: usize,
    pub projection: ProjectionMethod,
}

impl SolverParams {
    pub fn new(rank_bound: usize, delta: f64) -> Self {
        Self {
            line_search: LineSearchParams::default(),
            rank: RankParams {
                delta,
                ..RankParams::default()
            },
            stop_tol: None,
            max_iters: 1000,
            rank_bound,
            projection: ProjectionMethod::Ambient,
        }
    }

    pub fn validate(&self) -> Result<()> {
        self.line_search.validate()?;
        self.rank.validate()?;
        if let Some(tol) = self.stop_tol {
            if !(tol >= 0.0 && tol.is_finite()) {
                return Err(Error::invalid(format!("stop_tol must be >= 0, got {tol}")));
            }
        }
        if self.max_iters == 0 {
            return Err(Error::invalid("max_iters must be positive"));
        }
        Ok(())
    }

    fn step_options(&self) -> StepOptions {
        StepOptions::new(self.projection, self.rank.rank_rel_tol)
    }

    /// The stopping threshold for a solve whose initial gradient has norm
    /// `initial_gradient_norm`.
    pub fn resolved_stop_tol(&self, initial_gradient_norm: f64) -> f64 {
        self.stop_tol
            .unwrap_or(1e-8 * (1.0 + initial_gradient_norm))
    }
}

/// Result of one P²GD step.
#[derive(Debug, Clone)]
pub struct StepOutcome {
    pub next_point: VarietyPoint,
    pub accepted_alpha: f64,
    pub backtrack_count: usize,
    pub f_before: f64,
    pub f_after: f64,
    pub s_before: f64,
}

/// One row of a solver trace, describing iterate `index` and the step taken from it.
#[derive(Debug, Clone, PartialEq)]
pub struct IterationRecord {
    pub index: usize,
    pub f_value: f64,
    pub s_value: f64,
    pub rank: usize,
    pub delta_rank: usize,
    /// Rank-reduction depth of the winning candidate.
    pub chosen_j: usize,
    /// Step size of the winning candidate; zero when that candidate was a
    /// reduced point that was already stationary and no step was taken.
    pub accepted_alpha: f64,
    pub candidates_evaluated: usize,
    pub backtracks: usize,
    pub f_next: f64,
}

fn projected_sum(
    point: &VarietyPoint,
    projection: &TangentProjection,
    alpha: f64,
    opts: StepOptions,
) -> Result<VarietyPoint> {
    match opts.projection {
        ProjectionMethod::Ambient => {
            let sum = point.to_matrix() + &projection.projected * alpha;
            ensure_finite(&sum, "trial point")?;
            let svd = compute_svd_with(&sum, opts.rank_rel_tol)?;
            Ok(VarietyPoint::from_svd(&svd, point.rank_bound()))
        }
        ProjectionMethod::Factored => {
            factored_projection(point, &projection.decomposition, alpha, opts.rank_rel_tol)
        }
    }
}

/// Projects `X + αG` onto the variety using only the factors of `X` and the
/// blocks of `G`.
///
/// `X + αG = L K Rᵀ` with `L = [U | U⊥C | U_D]`, `R = [V | V⊥Bᵀ | V_D]` and
/// `K = [[Σ + αA, αI, 0], [αI, 0, 0], [0, 0, αΣ_D]]`; after thin QR of `L`
/// and `R` only a small core needs an SVD.
pub fn factored_projection(
    point: &VarietyPoint,
    tangent: &TangentDecomposition,
    alpha: f64,
    rank_rel_tol: f64,
) -> Result<VarietyPoint> {
    let (m, n) = point.shape();
    let k = point.rank();
    let kd = tangent.d_u.ncols();
    let width = 2 * k + kd;
    if width == 0 {
        return VarietyPoint::zero(m, n, point.rank_bound());
    }

    let mut left = DenseMatrix::zeros(m, width);
    left.columns_mut(0, k).copy_from(point.u());
    left.columns_mut(k, k).copy_from(&tangent.c_cols);
    left.columns_mut(2 * k, kd).copy_from(&tangent.d_u);
    let mut right = DenseMatrix::zeros(n, width);
    right.columns_mut(0, k).copy_from(point.v());
    right
        .columns_mut(k, k)
        .copy_from(&tangent.b_rows.transpose());
    right.columns_mut(2 * k, kd).copy_from(&tangent.d_v);

    let mut core = DenseMatrix::zeros(width, width);
    let mut top_left = &tangent.a * alpha;
    for i in 0..k {
        top_left[(i, i)] += point.sigma()[i];
        core[(i, k + i)] = alpha;
        core[(k + i, i)] = alpha;
    }
    core.view_mut((0, 0), (k, k)).copy_from(&top_left);
    for i in 0..kd {
        core[(2 * k + i, 2 * k + i)] = alpha * tangent.d_sigma[i];
    }
    ensure_finite(&core, "trial point core")?;

    let left_qr = left.qr();
    let right_qr = right.qr();
    let small = left_qr.r() * core * right_qr.r().transpose();
    let svd = compute_svd_with(&small, rank_rel_tol)?;
    let sigma_max = svd.sigma.iter().copied().fold(0.0, f64::max);
    let tau = rank_threshold(sigma_max, m, n, rank_rel_tol);
    let keep = svd
        .sigma
        .iter()
        .filter(|&&s| s > tau)
        .count()
        .min(point.rank_bound());

    let u = left_qr.q() * svd.u.columns(0, keep);
    let v = right_qr.q() * svd.v.columns(0, keep);
    let sigma: DVector<f64> = svd.sigma.rows(0, keep).into_owned();
    Ok(VarietyPoint::from_parts(u, sigma, v, point.rank_bound()))
}

fn backtrack(
    problem: &dyn CostFunction,
    point: &VarietyPoint,
    f_before: f64,
    eval: &StationarityEval,
    params: &LineSearchParams,
    opts: StepOptions,
) -> Result<StepOutcome> {
    params.validate()?;
    let s = eval.report.s_value;
    if !(s > 0.0) {
        return Err(Error::Domain("P²GD step requires s_f(X) > 0".into()));
    }
    let mut alpha = params.initial();
    let mut backtracks = 0;
    loop {
        let candidate = projected_sum(point, &eval.projection, alpha, opts)?;
        let f_after = problem.eval(&candidate.to_matrix());
        // Armijo sufficient decrease; the strict comparison keeps it
        // meaningful once c·α·s² falls below the resolution of f.
        if f_after.is_finite()
            && f_after <= f_before - params.c * alpha * s * s
            && f_after < f_before
        {
            return Ok(StepOutcome {
                next_point: candidate,
                accepted_alpha: alpha,
                backtrack_count: backtracks,
                f_before,
                f_after,
                s_before: s,
            });
        }
        if backtracks == params.max_backtracks {
            return Err(Error::LineSearchFailure {
                last_alpha: alpha,
                backtracks,
                candidate: None,
            });
        }
        alpha *= params.beta;
        backtracks += 1;
    }
}

fn evaluate(problem: &dyn CostFunction, point: &VarietyPoint) -> Result<(f64, StationarityEval)> {
    let f = problem.eval(&point.to_matrix());
    if !f.is_finite() {
        return Err(Error::NonFinite("cost value"));
    }
    Ok((f, evaluate_stationarity(problem, point)?))
}

/// One step of projected steepest descent with backtracking from `point`.
pub fn p2gd_step(
    problem: &dyn CostFunction,
    point: &VarietyPoint,
    params: &LineSearchParams,
) -> Result<StepOutcome> {
    p2gd_step_with(problem, point, params, default_step_options())
}

pub fn p2gd_step_with(
    problem: &dyn CostFunction,
    point: &VarietyPoint,
    params: &LineSearchParams,
    opts: StepOptions,
) -> Result<StepOutcome> {
    let (f, eval) = evaluate(problem, point)?;
    backtrack(problem, point, f, &eval, params, opts)
}

/// `κ_B(f, X, ᾱ)`: `L/2` at the zero matrix, otherwise
/// `(√r̲/(2σ_min))‖∇f(X)‖ + (L/2)((√r̲/(2σ_min)) ᾱ s_f(X) + 1)²`, where `L`
/// is a Lipschitz constant of `∇f` on a ball containing every trial point.
pub fn kappa_bound(
    problem: &dyn CostFunction,
    point: &VarietyPoint,
    alpha_hi: f64,
    lipschitz: f64,
) -> Result<f64> {
    if !(lipschitz > 0.0 && lipschitz.is_finite()) {
        return Err(Error::invalid(format!(
            "Lipschitz constant must be positive, got {lipschitz}"
        )));
    }
    if point.is_zero() {
        return Ok(0.5 * lipschitz);
    }
    let eval = evaluate_stationarity(problem, point)?;
    let sigma_min = point.sigma_min().expect("nonzero point");
    let t = (point.rank() as f64).sqrt() / (2.0 * sigma_min);
    let inner = t * alpha_hi * eval.report.s_value + 1.0;
    Ok(t * eval.report.gradient_norm + 0.5 * lipschitz * inner * inner)
}

/// `min{α̲, β(1 − c)/κ}`, the smallest step size backtracking can accept.
pub fn step_size_floor(params: &LineSearchParams, kappa: f64) -> f64 {
    params.alpha_lo.min(params.beta * (1.0 - params.c) / kappa)
}

struct Candidate {
    j: usize,
    point: VarietyPoint,
    f: f64,
    alpha: f64,
    backtracks: usize,
}

fn search_from(
    problem: &dyn CostFunction,
    point: &VarietyPoint,
    f_x: f64,
    eval_x: &StationarityEval,
    params: &SolverParams,
    stop_tol: f64,
    reduce_rank: bool,
) -> Result<(VarietyPoint, IterationRecord)> {
    let opts = params.step_options();
    let rank = point.rank();
    let delta_rank = point.delta_rank(params.rank.delta);
    let max_j = if reduce_rank { rank - delta_rank } else { 0 };

    let mut best: Option<Candidate> = None;
    for j in 0..=max_j {
        let candidate = if j == 0 {
            let step = backtrack(problem, point, f_x, eval_x, &params.line_search, opts)
                .map_err(|e| tag_candidate(e, j))?;
            Candidate {
                j,
                point: step.next_point,
                f: step.f_after,
                alpha: step.accepted_alpha,
                backtracks: step.backtrack_count,
            }
        } else {
            let reduced = point.truncated(rank - j);
            let (f_hat, eval_hat) = evaluate(problem, &reduced)?;
            if eval_hat.report.s_value <= stop_tol {
                Candidate {
                    j,
                    point: reduced,
                    f: f_hat,
                    alpha: 0.0,
                    backtracks: 0,
                }
            } else {
                let step = backtrack(
                    problem,
                    &reduced,
                    f_hat,
                    &eval_hat,
                    &params.line_search,
                    opts,
                )
                .map_err(|e| tag_candidate(e, j))?;
                Candidate {
                    j,
                    point: step.next_point,
                    f: step.f_after,
                    alpha: step.accepted_alpha,
                    backtracks: step.backtrack_count,
                }
            }
        };
        // strict comparison: ties go to the smallest j
        if best.as_ref().is_none_or(|b| candidate.f < b.f) {
            best = Some(candidate);
        }
    }
    let best = best.expect("j = 0 is always evaluated");
    let record = IterationRecord {
        index: 0,
        f_value: f_x,
        s_value: eval_x.report.s_value,
        rank,
        delta_rank,
        chosen_j: best.j,
        accepted_alpha: best.alpha,
        candidates_evaluated: max_j + 1,
        backtracks: best.backtracks,
        f_next: best.f,
    };
    Ok((best.point, record))
}

fn tag_candidate(err: Error, j: usize) -> Error {
    match err {
        Error::LineSearchFailure {
            last_alpha,
            backtracks,
            ..
        } => Error::LineSearchFailure {
            last_alpha,
            backtracks,
            candidate: Some(j),
        },
        other => other,
    }
}

/// One application of the rank-reduction search function: P²GD steps from
/// `point` and from its truncations to every rank between `rank_Δ` and
/// `rank`, keeping the candidate with the lowest cost.
pub fn p2gdr_search(
    problem: &dyn CostFunction,
    point: &VarietyPoint,
    params: &SolverParams,
) -> Result<(VarietyPoint, IterationRecord)> {
    params.validate()?;
    let (f, eval) = evaluate(problem, point)?;
    let stop_tol = params.resolved_stop_tol(eval.report.gradient_norm);
    if eval.report.s_value <= stop_tol {
        return Err(Error::Domain(format!(
            "search requires s_f(X) > stop_tol, got s_f = {:e}",
            eval.report.s_value
        )));
    }
    search_from(problem, point, f, &eval, params, stop_tol, true)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Algorithm {
    P2gdr,
    P2gd,
}

impl Algorithm {
    pub fn name(self) -> &'static str {
        match self {
            Algorithm::P2gdr => "p2gdr",
            Algorithm::P2gd => "p2gd",
        }
    }
}

impl fmt::Display for Algorithm {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Termination {
    Stationary,
    MaxIters,
    LineSearchFailure,
}

impl fmt::Display for Termination {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Termination::Stationary => "stationary",
            Termination::MaxIters => "max_iters",
            Termination::LineSearchFailure => "line_search_failure",
        })
    }
}

#[derive(Debug, Clone)]
pub struct Trace {
    pub algorithm: Algorithm,
    pub records: Vec<IterationRecord>,
    pub final_point: VarietyPoint,
    pub final_f: f64,
    pub final_s: f64,
    pub termination: Termination,
    /// Diagnostic for a line-search failure.
    pub failure: Option<String>,
    pub stop_tol: f64,
    pub wall_time_ms: f64,
}

pub const TRACE_CSV_HEADER: &str = "iter,f,s,rank,delta_rank,chosen_j,alpha,candidates";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TraceSummary {
    pub termination: Termination,
    pub iters: usize,
    pub final_f: f64,
    pub final_s: f64,
    pub final_rank: usize,
    pub wall_time_ms: f64,
}

impl Trace {
    pub fn iterations(&self) -> usize {
        self.records.len()
    }

    /// Cost values of every iterate, including the final one.
    pub fn f_values(&self) -> Vec<f64> {
        self.records
            .iter()
            .map(|r| r.f_value)
            .chain(std::iter::once(self.final_f))
            .collect()
    }

    pub fn is_strictly_decreasing(&self) -> bool {
        self.f_values().windows(2).all(|w| w[1] < w[0])
    }

    pub fn to_csv(&self) -> String {
        let mut out = String::from(TRACE_CSV_HEADER);
        out.push('\n');
        for r in &self.records {
            out.push_str(&format!(
                "{},{},{},{},{},{},{},{}\n",
                r.index,
                format_f64(r.f_value),
                format_f64(r.s_value),
                r.rank,
                r.delta_rank,
                r.chosen_j,
                format_f64(r.accepted_alpha),
                r.candidates_evaluated
            ));
        }
        out
    }

    pub fn summary(&self) -> TraceSummary {
        TraceSummary {
            termination: self.termination,
            iters: self.iterations(),
            final_f: self.final_f,
            final_s: self.final_s,
            final_rank: self.final_point.rank(),
            wall_time_ms: self.wall_time_ms,
        }
    }
}

fn solve(
    problem: &dyn CostFunction,
    x0: &DenseMatrix,
    params: &SolverParams,
    algorithm: Algorithm,
) -> Result<Trace> {
    let start = Instant::now();
    params.validate()?;
    if x0.shape() != problem.shape() {
        return Err(Error::ShapeMismatch {
            expected: problem.shape(),
            found: x0.shape(),
        });
    }
    let mut point =
        VarietyPoint::from_matrix_with(x0, params.rank_bound, params.rank.rank_rel_tol)?;
    let (mut f, mut eval) = evaluate(problem, &point)?;
    let stop_tol = params.resolved_stop_tol(eval.report.gradient_norm);
    let reduce_rank = algorithm == Algorithm::P2gdr;

    let mut records = Vec::new();
    let mut failure = None;
    let termination = loop {
        if eval.report.s_value <= stop_tol {
            break Termination::Stationary;
        }
        if records.len() == params.max_iters {
            break Termination::MaxIters;
        }
        match search_from(problem, &point, f, &eval, params, stop_tol, reduce_rank) {
            Ok((next, mut record)) => {
                record.index = records.len();
                records.push(record);
                point = next;
                (f, eval) = evaluate(problem, &point)?;
            }
            Err(err @ Error::LineSearchFailure { .. }) => {
                failure = Some(err.to_string());
                break Termination::LineSearchFailure;
            }
            Err(err) => return Err(err),
        }
    };

    Ok(Trace {
        algorithm,
        records,
        final_point: point,
        final_f: f,
        final_s: eval.report.s_value,
        termination,
        failure,
        stop_tol,
        wall_time_ms: start.elapsed().as_secs_f64() * 1e3,
    })
}

/// P²GD with rank reduction, iterated from `x0` until `s_f ≤ stop_tol`,
/// `max_iters` steps, or a line-search failure.
pub fn p2gdr(problem: &dyn CostFunction, x0: &DenseMatrix, params: &SolverParams) -> Result<Trace> {
    solve(problem, x0, params, Algorithm::P2gdr)
}

/// Plain P²GD: the same loop with the search restricted to `j = 0`.
pub fn p2gd_plain(
    problem: &dyn CostFunction,
    x0: &DenseMatrix,
    params: &SolverParams,
) -> Result<Trace> {
    solve(problem, x0, params, Algorithm::P2gd)
}

pub fn run(
    algorithm: Algorithm,
    problem: &dyn CostFunction,
    x0: &DenseMatrix,
    params: &SolverParams,
) -> Result<Trace> {
    solve(problem, x0, params, algorithm)
}
