//! Randomized property suite run by `boundedrank check`.
//!
//! Each property samples its own instances from a seeded generator and
//! reports a single pass/fail line. A property that hits a library error
//! counts as failed.

use std::fmt::Write as _;

use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::error::Result;
use crate::linalg::{
    compute_svd, delta_rank, distance_to_bounded_rank, numerical_rank, singular_values,
    truncate_to_rank, DenseMatrix,
};
use crate::problems::{
    finite_difference_check, CostFunction, LowRankApproxProblem, MatrixCompletionProblem,
    UserPolynomialProblem,
};
use crate::sampling::{gaussian_low_rank, gaussian_matrix, random_point};
use crate::solver::{
    factored_projection, kappa_bound, p2gd_step, p2gdr, p2gdr_search, step_size_floor,
    LineSearchParams, SolverParams,
};
use crate::variety::{
    appendix_tightness_instance, evaluate_stationarity, gamma_quadratic_term,
    project_to_tangent_cone, stationarity_measure, stationarity_sandwich_check,
    tangent_curve_gamma, tangent_line_distance_bound, VarietyPoint,
};

pub const DEFAULT_CHECK_SEED: u64 = 0x0b0d_5eed;

#[derive(Debug, Clone, PartialEq)]
pub struct PropertyOutcome {
    pub name: &'static str,
    pub passed: bool,
    pub detail: String,
}

type Property = fn(&mut ChaCha8Rng) -> Result<std::result::Result<String, String>>;

const PROPERTIES: &[(&str, Property)] = &[
    ("svd_factorization", svd_factorization),
    ("singular_value_lipschitz", singular_value_lipschitz),
    ("truncation_norm_identity", truncation_norm_identity),
    ("delta_rank_monotone", delta_rank_monotone),
    ("local_delta_rank", local_delta_rank),
    ("projection_optimality", projection_optimality),
    ("stationarity_sandwich", stationarity_sandwich),
    ("stationarity_frame_invariance", frame_invariance),
    (
        "stationarity_continuity_on_fixed_rank",
        continuity_on_fixed_rank,
    ),
    ("tangent_curve_identity", tangent_curve_identity),
    ("tangent_line_distance_bound", tangent_line_bound),
    ("tightness_fixture_eps_0_25", tightness_fixture),
    ("armijo_certificate", armijo_certificate),
    ("armijo_step_floor", step_floor),
    ("candidate_dominance", candidate_dominance),
    ("factored_projection_agreement", factored_agreement),
    (
        "solver_feasible_and_strictly_decreasing",
        feasible_and_decreasing,
    ),
    ("solver_determinism", determinism),
    ("gradient_finite_differences", gradients),
    ("truncation_is_stationary", truncation_is_stationary),
    ("full_mask_completion_matches_lowrank", full_mask_completion),
];

pub fn property_names() -> Vec<&'static str> {
    PROPERTIES.iter().map(|(name, _)| *name).collect()
}

/// Runs every property; each one gets a generator derived from `seed` and
/// its position so that properties are independent of each other.
pub fn run_all(seed: u64) -> Vec<PropertyOutcome> {
    PROPERTIES
        .iter()
        .enumerate()
        .map(|(i, (name, property))| {
            let mut rng = ChaCha8Rng::seed_from_u64(seed.wrapping_add(i as u64));
            let (passed, detail) = match property(&mut rng) {
                Ok(Ok(detail)) => (true, detail),
                Ok(Err(detail)) => (false, detail),
                Err(err) => (false, format!("error: {err}")),
            };
            PropertyOutcome {
                name,
                passed,
                detail,
            }
        })
        .collect()
}

pub fn render_table(outcomes: &[PropertyOutcome]) -> String {
    let width = outcomes.iter().map(|o| o.name.len()).max().unwrap_or(0);
    let mut out = String::new();
    for o in outcomes {
        let verdict = if o.passed { "PASS" } else { "FAIL" };
        writeln!(out, "{:<width$}  {verdict}  {}", o.name, o.detail).expect("write to string");
    }
    let passed = outcomes.iter().filter(|o| o.passed).count();
    writeln!(out, "{passed}/{} properties passed", outcomes.len()).expect("write to string");
    out
}

fn verdict(ok: bool, detail: String) -> Result<std::result::Result<String, String>> {
    Ok(if ok { Ok(detail) } else { Err(detail) })
}

fn random_shape(rng: &mut ChaCha8Rng, lo: usize, hi: usize) -> (usize, usize) {
    (rng.random_range(lo..=hi), rng.random_range(lo..=hi))
}

fn sign_flipped(point: &VarietyPoint, col: usize) -> Result<VarietyPoint> {
    let mut u = point.u().clone();
    let mut v = point.v().clone();
    u.column_mut(col).neg_mut();
    v.column_mut(col).neg_mut();
    VarietyPoint::from_factors(u, point.sigma().clone(), v, point.rank_bound())
}

fn svd_factorization(rng: &mut ChaCha8Rng) -> Result<std::result::Result<String, String>> {
    let mut worst: f64 = 0.0;
    for i in 0..60 {
        let (m, n) = random_shape(rng, 1, 9);
        let x = if i % 2 == 0 {
            gaussian_matrix(rng, m, n)
        } else {
            let k = rng.random_range(0..=m.min(n));
            gaussian_low_rank(rng, m, n, k)?
        };
        let svd = compute_svd(&x)?;
        let k = svd.sigma.len();
        let eye = DenseMatrix::identity(k, k);
        let sorted = svd.sigma.as_slice().windows(2).all(|w| w[0] >= w[1]);
        if !sorted {
            return verdict(false, format!("unsorted singular values for {m}x{n}"));
        }
        worst = worst
            .max((svd.reconstruct() - &x).norm() / (1.0 + x.norm()))
            .max((svd.u.transpose() * &svd.u - &eye).norm())
            .max((svd.v.transpose() * &svd.v - &eye).norm());
    }
    verdict(worst <= 1e-12, format!("max defect {worst:.2e}"))
}

fn singular_value_lipschitz(rng: &mut ChaCha8Rng) -> Result<std::result::Result<String, String>> {
    let mut worst = f64::NEG_INFINITY;
    for _ in 0..60 {
        let (m, n) = random_shape(rng, 1, 9);
        let x = gaussian_matrix(rng, m, n);
        let scale = 10f64.powi(rng.random_range(-3..=1));
        let y = &x + gaussian_matrix(rng, m, n) * scale;
        let (sx, sy) = (singular_values(&x)?, singular_values(&y)?);
        let gap = (&x - &y).norm();
        for (a, b) in sx.iter().zip(sy.iter()) {
            worst = worst.max((a - b).abs() - gap);
        }
    }
    verdict(worst <= 1e-10, format!("max excess {worst:.2e}"))
}

fn truncation_norm_identity(rng: &mut ChaCha8Rng) -> Result<std::result::Result<String, String>> {
    let mut worst: f64 = 0.0;
    for _ in 0..60 {
        let (m, n) = random_shape(rng, 1, 9);
        let x = gaussian_matrix(rng, m, n);
        for target in 0..=m.min(n) {
            let (y, d) = truncate_to_rank(&x, target)?;
            let xx = x.norm_squared();
            worst = worst
                .max((y.norm_squared() + d * d - xx).abs() / xx)
                .max(((&x - &y).norm() - d).abs() / (1.0 + d))
                .max((distance_to_bounded_rank(&x, target)? - d).abs());
            if numerical_rank(&y)? > target {
                return verdict(false, format!("rank of truncation exceeds {target}"));
            }
        }
    }
    verdict(worst <= 1e-9, format!("max relative defect {worst:.2e}"))
}

fn delta_rank_monotone(rng: &mut ChaCha8Rng) -> Result<std::result::Result<String, String>> {
    for _ in 0..60 {
        let (m, n) = random_shape(rng, 1, 9);
        let x = gaussian_matrix(rng, m, n);
        let mut deltas: Vec<f64> = (0..6).map(|_| rng.random_range(1e-3..4.0)).collect();
        deltas.sort_by(f64::total_cmp);
        let ranks = deltas
            .iter()
            .map(|&d| delta_rank(&x, d))
            .collect::<Result<Vec<_>>>()?;
        if ranks.windows(2).any(|w| w[0] < w[1]) {
            return verdict(
                false,
                format!("delta ranks {ranks:?} for deltas {deltas:?}"),
            );
        }
    }
    verdict(true, "60 matrices".into())
}

fn local_delta_rank(rng: &mut ChaCha8Rng) -> Result<std::result::Result<String, String>> {
    let mut checked = 0;
    for _ in 0..40 {
        let (m, n) = random_shape(rng, 2, 8);
        let k = rng.random_range(1..m.min(n));
        let x = random_point(rng, m, n, k, k, (0.5, 3.0))?.to_matrix();
        let sigma_k = singular_values(&x)?[k - 1];
        let delta = rng.random_range(0.05..2.0);
        let eps = 0.99 * sigma_k.min(delta);
        for _ in 0..5 {
            let e = gaussian_matrix(rng, m, n);
            let radius = eps * rng.random_range(0.0..1.0);
            let y = &x + &e * (radius / e.norm());
            let (lo, hi) = (delta_rank(&y, delta)?, numerical_rank(&y)?);
            if lo > k || k > hi {
                return verdict(
                    false,
                    format!("rank_delta {lo}, rank {hi}, expected k = {k}"),
                );
            }
            let (p, _) = truncate_to_rank(&y, k)?;
            if (&p - &x).norm() > 2.0 * eps + 1e-12 {
                return verdict(false, "projection left the 2-eps ball".into());
            }
            checked += 1;
        }
    }
    verdict(true, format!("{checked} perturbations"))
}

/// A tangent vector at `point` built from random blocks in its frame.
fn random_tangent(rng: &mut ChaCha8Rng, point: &VarietyPoint) -> DenseMatrix {
    let (m, n) = point.shape();
    let (u, v) = (point.u(), point.v());
    let k = point.rank();
    let budget = point.rank_bound() - k;
    let left_proj = DenseMatrix::identity(m, m) - u * u.transpose();
    let right_proj = DenseMatrix::identity(n, n) - v * v.transpose();
    let a = gaussian_matrix(rng, k, k);
    let b = gaussian_matrix(rng, k, n) * &right_proj;
    let c = &left_proj * gaussian_matrix(rng, m, k);
    let d = &left_proj
        * gaussian_matrix(rng, m, budget)
        * gaussian_matrix(rng, budget, n)
        * &right_proj;
    u * a * v.transpose() + u * b + c * v.transpose() + d
}

fn projection_optimality(rng: &mut ChaCha8Rng) -> Result<std::result::Result<String, String>> {
    let mut worst = f64::NEG_INFINITY;
    for _ in 0..40 {
        let (m, n) = random_shape(rng, 2, 8);
        let r = rng.random_range(1..m.min(n));
        let k = rng.random_range(0..=r);
        let point = random_point(rng, m, n, k, r, (0.5, 3.0))?;
        let g = gaussian_matrix(rng, m, n);
        let proj = project_to_tangent_cone(&point, &g)?;
        let best = (&g - &proj.projected).norm();
        for _ in 0..8 {
            let w = random_tangent(rng, &point);
            let scale = rng.random_range(0.0..2.0);
            worst = worst.max(best - (&g - w * scale).norm());
        }
    }
    verdict(worst <= 1e-9, format!("max excess {worst:.2e}"))
}

fn stationarity_sandwich(rng: &mut ChaCha8Rng) -> Result<std::result::Result<String, String>> {
    let mut worst: f64 = 0.0;
    for _ in 0..60 {
        let (m, n) = random_shape(rng, 2, 8);
        let r = rng.random_range(1..m.min(n)).min(4);
        let k = rng.random_range(0..=r);
        let point = random_point(rng, m, n, k, r, (0.5, 3.0))?;
        let problem = LowRankApproxProblem::new(gaussian_matrix(rng, m, n))?;
        let report = stationarity_measure(&problem, &point)?;
        if !stationarity_sandwich_check(&point, &report) {
            return verdict(false, format!("{m}x{n}, r = {r}, rank {k}: {report:?}"));
        }
        let pythagoras = report.s_value.powi(2) + report.residual_distance.powi(2);
        worst = worst.max(
            (pythagoras - report.gradient_norm.powi(2)).abs()
                / (1.0 + report.gradient_norm.powi(2)),
        );
    }
    verdict(
        worst <= 1e-10,
        format!("max norm-identity defect {worst:.2e}"),
    )
}

fn frame_invariance(rng: &mut ChaCha8Rng) -> Result<std::result::Result<String, String>> {
    let mut worst: f64 = 0.0;
    for _ in 0..40 {
        let (m, n) = random_shape(rng, 2, 8);
        let r = rng.random_range(1..m.min(n));
        let k = rng.random_range(1..=r);
        let point = random_point(rng, m, n, k, r, (0.5, 3.0))?;
        let flipped = sign_flipped(&point, rng.random_range(0..k))?;
        let problem = LowRankApproxProblem::new(gaussian_matrix(rng, m, n))?;
        let a = stationarity_measure(&problem, &point)?.s_value;
        let b = stationarity_measure(&problem, &flipped)?.s_value;
        worst = worst.max((a - b).abs() / a.max(1e-300));
    }
    verdict(worst <= 1e-9, format!("max relative change {worst:.2e}"))
}

fn continuity_on_fixed_rank(rng: &mut ChaCha8Rng) -> Result<std::result::Result<String, String>> {
    let (m, n, k, r) = (6, 5, 1, 2);
    let point = random_point(rng, m, n, k, r, (1.0, 2.0))?;
    let problem = LowRankApproxProblem::new(gaussian_matrix(rng, m, n))?;
    let base = stationarity_measure(&problem, &point)?.s_value;
    let directions: Vec<DenseMatrix> = (0..10).map(|_| gaussian_matrix(rng, m, n)).collect();
    let mut oscillation = Vec::new();
    for h in [1e-2, 1e-3, 1e-4] {
        let mut dev: f64 = 0.0;
        for e in &directions {
            let (y, _) = truncate_to_rank(&(point.to_matrix() + e * (h / e.norm())), k)?;
            let p = VarietyPoint::from_matrix(&y, r)?;
            if p.rank() != k {
                return verdict(
                    false,
                    format!("perturbation changed the rank to {}", p.rank()),
                );
            }
            dev = dev.max((stationarity_measure(&problem, &p)?.s_value - base).abs());
        }
        oscillation.push(dev);
    }
    let shrinking = oscillation.windows(2).all(|w| w[1] < w[0]);
    verdict(
        shrinking,
        format!(
            "oscillation {:.2e} > {:.2e} > {:.2e}",
            oscillation[0], oscillation[1], oscillation[2]
        ),
    )
}

fn tangent_curve_identity(rng: &mut ChaCha8Rng) -> Result<std::result::Result<String, String>> {
    let mut worst: f64 = 0.0;
    for _ in 0..40 {
        let (m, n) = random_shape(rng, 2, 8);
        let r = rng.random_range(1..m.min(n));
        let k = rng.random_range(1..=r);
        let point = random_point(rng, m, n, k, r, (0.5, 3.0))?;
        let proj = project_to_tangent_cone(&point, &gaussian_matrix(rng, m, n))?;
        let q = gamma_quadratic_term(&point, &proj.decomposition)?;
        let t = rng.random_range(0.0..2.0);
        let gamma = tangent_curve_gamma(&point, &proj.decomposition, t)?;
        let lhs = gamma - point.to_matrix() - &proj.projected * t;
        let rhs = q * (t * t);
        worst = worst.max((&lhs - &rhs).norm() / (1.0 + rhs.norm()));
    }
    verdict(worst <= 1e-9, format!("max relative defect {worst:.2e}"))
}

fn tangent_line_bound(rng: &mut ChaCha8Rng) -> Result<std::result::Result<String, String>> {
    let mut worst = f64::NEG_INFINITY;
    for _ in 0..60 {
        let (m, n) = random_shape(rng, 2, 8);
        let r = rng.random_range(1..m.min(n));
        let k = rng.random_range(1..=r);
        let point = random_point(rng, m, n, k, r, (0.2, 3.0))?;
        let scale = rng.random_range(0.01..3.0);
        let g = project_to_tangent_cone(&point, &gaussian_matrix(rng, m, n))?.projected * scale;
        let d = distance_to_bounded_rank(&(point.to_matrix() + &g), r)?;
        worst = worst.max(d - tangent_line_distance_bound(&point, g.norm())?);
    }
    verdict(worst <= 1e-10, format!("max excess {worst:.2e}"))
}

fn tightness_fixture(_: &mut ChaCha8Rng) -> Result<std::result::Result<String, String>> {
    let eps = 0.25;
    let (point, g) = appendix_tightness_instance(2, 3, 3, eps)?;
    let sigma = 1.0 / (4.0 * eps);
    let d = distance_to_bounded_rank(&(point.to_matrix() + &g), 2)?;
    let golden = (5f64.sqrt() - 1.0) / 2.0 * sigma;
    let ratio = d / g.norm_squared();
    let ok = (d - golden).abs() <= 1e-10
        && (g.norm_squared() - 2.0 * sigma * sigma).abs() <= 1e-12
        && ratio + 1e-10 >= 1.0 / (2.0 * sigma) - eps;
    verdict(
        ok,
        format!(
            "d = {d:.12}, |G|^2 = {:.12}, ratio = {ratio:.12}",
            g.norm_squared()
        ),
    )
}

fn armijo_certificate(rng: &mut ChaCha8Rng) -> Result<std::result::Result<String, String>> {
    let params = LineSearchParams::default();
    for _ in 0..40 {
        let (m, n) = random_shape(rng, 3, 7);
        let r = rng.random_range(1..m.min(n));
        let k = rng.random_range(0..=r);
        let point = random_point(rng, m, n, k, r, (0.5, 3.0))?;
        let problem = LowRankApproxProblem::new(gaussian_matrix(rng, m, n))?;
        let step = p2gd_step(&problem, &point, &params)?;
        let bound = step.f_before - params.c * step.accepted_alpha * step.s_before.powi(2);
        if !(step.f_after <= bound && step.f_after < step.f_before) {
            return verdict(false, format!("f_after {} above {bound}", step.f_after));
        }
    }
    verdict(true, "40 steps".into())
}

fn step_floor(rng: &mut ChaCha8Rng) -> Result<std::result::Result<String, String>> {
    let params = LineSearchParams::default();
    let mut margin = f64::INFINITY;
    for _ in 0..40 {
        let (m, n) = random_shape(rng, 3, 7);
        let r = rng.random_range(1..m.min(n));
        let k = rng.random_range(0..=r);
        let point = random_point(rng, m, n, k, r, (0.05, 3.0))?;
        let problem = LowRankApproxProblem::new(gaussian_matrix(rng, m, n) * 3.0)?;
        let step = p2gd_step(&problem, &point, &params)?;
        let kappa = kappa_bound(&problem, &point, params.alpha_hi, 1.0)?;
        margin = margin.min(step.accepted_alpha / step_size_floor(&params, kappa));
    }
    verdict(margin >= 1.0, format!("min accepted/floor {margin:.3}"))
}

fn candidate_dominance(rng: &mut ChaCha8Rng) -> Result<std::result::Result<String, String>> {
    let mut reduced = 0;
    for _ in 0..30 {
        let (m, n) = random_shape(rng, 3, 7);
        let r = rng.random_range(1..m.min(n));
        let k = rng.random_range(1..=r);
        let point = random_point(rng, m, n, k, r, (0.01, 2.0))?;
        let problem = LowRankApproxProblem::new(gaussian_matrix(rng, m, n))?;
        let params = SolverParams::new(r, 0.5);
        if evaluate_stationarity(&problem, &point)?.report.s_value
            <= params.resolved_stop_tol(problem.gradient(&point.to_matrix()).norm())
        {
            continue;
        }
        let (next, record) = p2gdr_search(&problem, &point, &params)?;
        let plain = p2gd_step(&problem, &point, &params.line_search)?;
        let f_next = problem.eval(&next.to_matrix());
        if f_next > plain.f_after || f_next >= problem.eval(&point.to_matrix()) {
            return verdict(
                false,
                format!("search value {f_next} vs plain {}", plain.f_after),
            );
        }
        reduced += usize::from(record.candidates_evaluated > 1);
    }
    verdict(
        true,
        format!("30 searches, {reduced} with reduced candidates"),
    )
}

fn factored_agreement(rng: &mut ChaCha8Rng) -> Result<std::result::Result<String, String>> {
    let mut worst: f64 = 0.0;
    for _ in 0..40 {
        let (m, n) = random_shape(rng, 3, 8);
        let r = rng.random_range(1..m.min(n));
        let k = rng.random_range(0..=r);
        let point = random_point(rng, m, n, k, r, (0.5, 3.0))?;
        let proj = project_to_tangent_cone(&point, &gaussian_matrix(rng, m, n))?;
        let alpha = rng.random_range(0.01..1.0);
        let factored = factored_projection(&point, &proj.decomposition, alpha, 1.0)?;
        let (ambient, _) = truncate_to_rank(&(point.to_matrix() + &proj.projected * alpha), r)?;
        worst = worst.max((factored.to_matrix() - ambient).norm());
    }
    verdict(worst <= 1e-10, format!("max difference {worst:.2e}"))
}

fn completion_instance(
    rng: &mut ChaCha8Rng,
    m: usize,
    n: usize,
) -> Result<MatrixCompletionProblem> {
    let target = gaussian_low_rank(rng, m, n, 2)?;
    let mask = nalgebra::DMatrix::from_fn(m, n, |_, _| rng.random_bool(0.6));
    MatrixCompletionProblem::new(target, mask)
}

fn feasible_and_decreasing(rng: &mut ChaCha8Rng) -> Result<std::result::Result<String, String>> {
    let mut iters = 0;
    for _ in 0..4 {
        let problem = completion_instance(rng, 7, 6)?;
        let params = SolverParams {
            max_iters: 150,
            ..SolverParams::new(2, 0.1)
        };
        let x0 = gaussian_low_rank(rng, 7, 6, 2)?;
        let trace = p2gdr(&problem, &x0, &params)?;
        if !trace.is_strictly_decreasing() {
            return verdict(false, "cost increased or stalled".into());
        }
        if trace.records.iter().any(|rec| rec.rank > 2) || trace.final_point.rank() > 2 {
            return verdict(false, "iterate above the rank bound".into());
        }
        iters += trace.iterations();
    }
    verdict(true, format!("{iters} iterations"))
}

fn determinism(rng: &mut ChaCha8Rng) -> Result<std::result::Result<String, String>> {
    let problem = completion_instance(rng, 6, 6)?;
    let params = SolverParams {
        max_iters: 60,
        ..SolverParams::new(2, 0.2)
    };
    let x0 = gaussian_low_rank(rng, 6, 6, 2)?;
    let a = p2gdr(&problem, &x0, &params)?;
    let b = p2gdr(&problem, &x0, &params)?;
    let same = a.to_csv() == b.to_csv() && a.final_point == b.final_point;
    verdict(same, format!("{} iterations", a.iterations()))
}

fn gradients(rng: &mut ChaCha8Rng) -> Result<std::result::Result<String, String>> {
    let mut worst: f64 = 0.0;
    let problems: Vec<Box<dyn CostFunction>> = vec![
        Box::new(LowRankApproxProblem::new(gaussian_matrix(rng, 5, 4))?),
        Box::new(completion_instance(rng, 5, 4)?),
        Box::new(UserPolynomialProblem::new(
            3,
            3,
            vec![
                (vec![(0, 0, 2), (1, 1, 1)], 1.5),
                (vec![(2, 1, 4)], -0.25),
                (vec![(0, 2, 1), (1, 0, 1), (2, 2, 1)], 2.0),
                (vec![], 0.5),
            ],
        )?),
    ];
    for problem in &problems {
        let (m, n) = problem.shape();
        for _ in 0..10 {
            worst = worst.max(finite_difference_check(
                problem.as_ref(),
                &gaussian_matrix(rng, m, n),
                1e-5,
            ));
        }
    }
    verdict(worst <= 1e-6, format!("max error {worst:.2e}"))
}

fn truncation_is_stationary(rng: &mut ChaCha8Rng) -> Result<std::result::Result<String, String>> {
    for _ in 0..30 {
        let (m, n) = random_shape(rng, 3, 8);
        let r = rng.random_range(1..m.min(n));
        let a = gaussian_matrix(rng, m, n);
        let sv = singular_values(&a)?;
        if sv[r - 1] - sv[r] < 1e-6 {
            continue;
        }
        let point = VarietyPoint::from_matrix(&truncate_to_rank(&a, r)?.0, r)?;
        let s = stationarity_measure(&LowRankApproxProblem::new(a.clone())?, &point)?.s_value;
        if s > 1e-8 * (1.0 + a.norm()) {
            return verdict(false, format!("s_f = {s:.2e} at the truncation"));
        }
    }
    verdict(true, "30 targets".into())
}

fn full_mask_completion(rng: &mut ChaCha8Rng) -> Result<std::result::Result<String, String>> {
    for _ in 0..20 {
        let (m, n) = random_shape(rng, 2, 7);
        let a = gaussian_matrix(rng, m, n);
        let lra = LowRankApproxProblem::new(a.clone())?;
        let mc = MatrixCompletionProblem::new(a, nalgebra::DMatrix::from_element(m, n, true))?;
        let x = gaussian_matrix(rng, m, n);
        if lra.eval(&x) != mc.eval(&x) || lra.gradient(&x) != mc.gradient(&x) {
            return verdict(false, format!("mismatch on a {m}x{n} instance"));
        }
    }
    verdict(true, "20 points, bitwise equal".into())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn every_property_passes() {
        let outcomes = run_all(DEFAULT_CHECK_SEED);
        let table = render_table(&outcomes);
        assert!(outcomes.iter().all(|o| o.passed), "{table}");
        assert_eq!(outcomes.len(), property_names().len());
    }

    #[test]
    fn table_has_one_line_per_property() {
        let outcomes = vec![
            PropertyOutcome {
                name: "a",
                passed: true,
                detail: "ok".into(),
            },
            PropertyOutcome {
                name: "bbb",
                passed: false,
                detail: "bad".into(),
            },
        ];
        let table = render_table(&outcomes);
        assert_eq!(table.lines().count(), 3);
        assert!(table.contains("a    PASS  ok"));
        assert!(table.contains("bbb  FAIL  bad"));
        assert!(table.ends_with("1/2 properties passed\n"));
    }
}
