//! Geometry of the set of `m × n` matrices of rank at most `r`.
//!
//! Points are kept in thin-SVD factored form `U diag(σ) Vᵀ`. The orthogonal
//! complements `U⊥`, `V⊥` are never formed: the off-diagonal blocks of a
//! matrix `G` in the frame of a point are carried as `Uᵀ G (I − VVᵀ)` and
//! `(I − UUᵀ) G V`, and the lower-right block as
//! `(I − UUᵀ) G (I − VVᵀ)`, all of which have the same norms and singular
//! values as the blocks they stand for.

use nalgebra::DVector;

use crate::error::{Error, Result};
use crate::linalg::{
    compute_svd, compute_svd_with, ensure_finite, ensure_shape, rank_threshold, DenseMatrix,
    SvdFactorization,
};
use crate::problems::CostFunction;

const ORTHONORMALITY_TOL: f64 = 1e-8;

/// A matrix of rank `rank() ≤ rank_bound()` stored as `U diag(σ) Vᵀ` with
/// `σ` positive and nonincreasing.
#[derive(Debug, Clone, PartialEq)]
pub struct VarietyPoint {
    u: DenseMatrix,
    sigma: DVector<f64>,
    v: DenseMatrix,
    rank_bound: usize,
}

impl VarietyPoint {
    pub fn zero(rows: usize, cols: usize, rank_bound: usize) -> Result<Self> {
        check_rank_bound(rows, cols, rank_bound)?;
        Ok(Self {
            u: DenseMatrix::zeros(rows, 0),
            sigma: DVector::zeros(0),
            v: DenseMatrix::zeros(cols, 0),
            rank_bound,
        })
    }

    /// Builds a point from explicit factors, validating shapes, orthonormality
    /// and the ordering of `sigma`.
    pub fn from_factors(
        u: DenseMatrix,
        sigma: DVector<f64>,
        v: DenseMatrix,
        rank_bound: usize,
    ) -> Result<Self> {
        let (rows, cols) = (u.nrows(), v.nrows());
        check_rank_bound(rows, cols, rank_bound)?;
        let k = sigma.len();
        if u.ncols() != k || v.ncols() != k {
            return Err(Error::invalid(format!(
                "factor widths disagree: u has {}, sigma has {k}, v has {}",
                u.ncols(),
                v.ncols()
            )));
        }
        ensure_finite(&u, "u factor")?;
        ensure_finite(&v, "v factor")?;
        if sigma.iter().any(|s| !s.is_finite()) {
            return Err(Error::NonFinite("singular values"));
        }
        if k > rank_bound {
            return Err(Error::InfeasiblePoint {
                rank: k,
                bound: rank_bound,
            });
        }
        if sigma.as_slice().windows(2).any(|w| w[0] < w[1]) {
            return Err(Error::invalid("singular values must be nonincreasing"));
        }
        if k > 0 {
            let tau = rank_threshold(sigma[0], rows, cols, 1.0);
            if !(sigma[k - 1] > tau) {
                return Err(Error::invalid(format!(
                    "smallest singular value {:e} is not above the rank threshold {tau:e}",
                    sigma[k - 1]
                )));
            }
            let eye = DenseMatrix::identity(k, k);
            if (u.transpose() * &u - &eye).norm() > ORTHONORMALITY_TOL
                || (v.transpose() * &v - &eye).norm() > ORTHONORMALITY_TOL
            {
                return Err(Error::invalid("factors do not have orthonormal columns"));
            }
        }
        Ok(Self {
            u,
            sigma,
            v,
            rank_bound,
        })
    }

    /// Factors `x` and checks that its numerical rank does not exceed `rank_bound`.
    pub fn from_matrix(x: &DenseMatrix, rank_bound: usize) -> Result<Self> {
        Self::from_matrix_with(x, rank_bound, 1.0)
    }

    pub fn from_matrix_with(x: &DenseMatrix, rank_bound: usize, rank_rel_tol: f64) -> Result<Self> {
        check_rank_bound(x.nrows(), x.ncols(), rank_bound)?;
        let svd = compute_svd_with(x, rank_rel_tol)?;
        if svd.numerical_rank > rank_bound {
            return Err(Error::InfeasiblePoint {
                rank: svd.numerical_rank,
                bound: rank_bound,
            });
        }
        Ok(Self::from_svd(&svd, rank_bound))
    }

    /// Leading `min(rank_bound, numerical_rank)` triplets of `svd`: an element
    /// of the projection of the factored matrix onto the variety.
    pub(crate) fn from_svd(svd: &SvdFactorization, rank_bound: usize) -> Self {
        let k = svd.numerical_rank.min(rank_bound);
        Self {
            u: svd.u.columns(0, k).into_owned(),
            sigma: svd.sigma.rows(0, k).into_owned(),
            v: svd.v.columns(0, k).into_owned(),
            rank_bound,
        }
    }

    pub(crate) fn from_parts(
        u: DenseMatrix,
        sigma: DVector<f64>,
        v: DenseMatrix,
        rank_bound: usize,
    ) -> Self {
        debug_assert!(sigma.len() <= rank_bound);
        Self {
            u,
            sigma,
            v,
            rank_bound,
        }
    }

    pub fn rows(&self) -> usize {
        self.u.nrows()
    }

    pub fn cols(&self) -> usize {
        self.v.nrows()
    }

    pub fn shape(&self) -> (usize, usize) {
        (self.rows(), self.cols())
    }

    pub fn rank(&self) -> usize {
        self.sigma.len()
    }

    pub fn rank_bound(&self) -> usize {
        self.rank_bound
    }

    pub fn u(&self) -> &DenseMatrix {
        &self.u
    }

    pub fn sigma(&self) -> &DVector<f64> {
        &self.sigma
    }

    pub fn v(&self) -> &DenseMatrix {
        &self.v
    }

    pub fn sigma_min(&self) -> Option<f64> {
        self.sigma.as_slice().last().copied()
    }

    pub fn is_zero(&self) -> bool {
        self.rank() == 0
    }

    /// Number of stored singular values strictly greater than `delta`.
    pub fn delta_rank(&self, delta: f64) -> usize {
        self.sigma.iter().take_while(|&&s| s > delta).count()
    }

    /// Keeps the leading `k` triplets, an element of the projection onto
    /// matrices of rank `k` when `k ≤ rank()`.
    pub fn truncated(&self, k: usize) -> Self {
        let k = k.min(self.rank());
        Self {
            u: self.u.columns(0, k).into_owned(),
            sigma: self.sigma.rows(0, k).into_owned(),
            v: self.v.columns(0, k).into_owned(),
            rank_bound: self.rank_bound,
        }
    }

    pub fn to_matrix(&self) -> DenseMatrix {
        scale_columns(&self.u, &self.sigma) * self.v.transpose()
    }

    pub fn norm(&self) -> f64 {
        self.sigma.norm()
    }
}

fn check_rank_bound(rows: usize, cols: usize, rank_bound: usize) -> Result<()> {
    if rows == 0 || cols == 0 {
        return Err(Error::invalid("matrix dimensions must be positive"));
    }
    if rank_bound >= rows.min(cols) {
        return Err(Error::invalid(format!(
            "rank bound {rank_bound} must be smaller than min(m, n) = {}",
            rows.min(cols)
        )));
    }
    Ok(())
}

fn scale_columns(m: &DenseMatrix, scale: &DVector<f64>) -> DenseMatrix {
    let mut out = m.clone();
    for (j, mut col) in out.column_iter_mut().enumerate() {
        col *= scale[j];
    }
    out
}

/// Blocks of a matrix `G` in the SVD frame of a point, with the lower-right
/// block replaced by its best approximation within the remaining rank budget.
#[derive(Debug, Clone)]
pub struct TangentDecomposition {
    /// `Uᵀ G V`.
    pub a: DenseMatrix,
    /// `Uᵀ G (I − VVᵀ)`, i.e. `B V⊥ᵀ`.
    pub b_rows: DenseMatrix,
    /// `(I − UUᵀ) G V`, i.e. `U⊥ C`.
    pub c_cols: DenseMatrix,
    /// Leading singular triplets kept from the lower-right block.
    pub d_u: DenseMatrix,
    pub d_sigma: DVector<f64>,
    pub d_v: DenseMatrix,
    /// Truncated lower-right block `U⊥ trunc(D) V⊥ᵀ` in ambient coordinates.
    pub d_truncated: DenseMatrix,
    /// `‖D − trunc(D)‖`.
    pub d_residual_norm: f64,
}

impl TangentDecomposition {
    pub fn a_norm_sq(&self) -> f64 {
        self.a.norm_squared()
    }

    pub fn b_norm_sq(&self) -> f64 {
        self.b_rows.norm_squared()
    }

    pub fn c_norm_sq(&self) -> f64 {
        self.c_cols.norm_squared()
    }

    pub fn d_norm_sq(&self) -> f64 {
        self.d_sigma.norm_squared()
    }

    pub fn norm(&self) -> f64 {
        (self.a_norm_sq() + self.b_norm_sq() + self.c_norm_sq() + self.d_norm_sq()).sqrt()
    }

    pub fn d_rank(&self) -> usize {
        self.d_sigma.len()
    }

    /// Reassembles the tangent vector in ambient coordinates.
    pub fn to_matrix(&self, point: &VarietyPoint) -> DenseMatrix {
        let u = point.u();
        let v = point.v();
        u * (&self.a * v.transpose() + &self.b_rows)
            + &self.c_cols * v.transpose()
            + &self.d_truncated
    }
}

/// A projection of `G` onto the tangent cone at a point.
#[derive(Debug, Clone)]
pub struct TangentProjection {
    pub decomposition: TangentDecomposition,
    pub projected: DenseMatrix,
    pub norm: f64,
}

/// Projects `g` onto the tangent cone of the rank-`r` variety at `point`.
///
/// The `A`, `B`, `C` blocks pass through unchanged and the lower-right block
/// is truncated to rank `r − rank(point)`. At the zero matrix this reduces to
/// the best rank-`r` approximation of `g`.
pub fn project_to_tangent_cone(point: &VarietyPoint, g: &DenseMatrix) -> Result<TangentProjection> {
    ensure_shape(g, point.shape())?;
    ensure_finite(g, "tangent-cone projection input")?;
    let (m, n) = point.shape();
    let k = point.rank();
    let budget = point.rank_bound() - k;
    let u = point.u();
    let v = point.v();

    let ut_g = u.transpose() * g;
    let a = &ut_g * v;
    let b_rows = &ut_g - &a * v.transpose();
    let c_cols = g * v - u * &a;
    let d_full = if k == 0 {
        g.clone()
    } else {
        g - u * &ut_g - &c_cols * v.transpose()
    };

    let (d_u, d_sigma, d_v, d_truncated, d_residual_norm) = if budget == 0 {
        let residual = d_full.norm();
        (
            DenseMatrix::zeros(m, 0),
            DVector::zeros(0),
            DenseMatrix::zeros(n, 0),
            DenseMatrix::zeros(m, n),
            residual,
        )
    } else {
        let svd = compute_svd(&d_full)?;
        let keep = svd.numerical_rank.min(budget);
        let residual = svd.tail_norm(budget);
        let truncated = if svd.numerical_rank <= budget {
            d_full
        } else {
            svd.reconstruct_leading(budget)
        };
        (
            svd.u.columns(0, keep).into_owned(),
            svd.sigma.rows(0, budget.min(svd.sigma.len())).into_owned(),
            svd.v.columns(0, keep).into_owned(),
            truncated,
            residual,
        )
    };
    // Factors carry only the triplets above the rank threshold; the norm uses
    // all of the leading `budget` singular values.
    let d_sigma_kept = d_sigma.rows(0, d_u.ncols()).into_owned();
    let norm_sq =
        a.norm_squared() + b_rows.norm_squared() + c_cols.norm_squared() + d_sigma.norm_squared();

    let projected = if k == 0 {
        d_truncated.clone()
    } else {
        u * &ut_g + &c_cols * v.transpose() + &d_truncated
    };
    Ok(TangentProjection {
        decomposition: TangentDecomposition {
            a,
            b_rows,
            c_cols,
            d_u,
            d_sigma: d_sigma_kept,
            d_v,
            d_truncated,
            d_residual_norm,
        },
        projected,
        norm: norm_sq.sqrt(),
    })
}

/// `s_f(X)` together with the quantities it is built from.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StationarityReport {
    pub s_value: f64,
    pub gradient_norm: f64,
    /// Distance from `−∇f(X)` to the tangent cone.
    pub residual_distance: f64,
}

impl StationarityReport {
    pub fn from_projection(projection: &TangentProjection, gradient_norm: f64) -> Self {
        Self {
            s_value: projection.norm,
            gradient_norm,
            residual_distance: projection.decomposition.d_residual_norm,
        }
    }
}

/// Gradient, its negated tangent-cone projection and the resulting report.
#[derive(Debug, Clone)]
pub struct StationarityEval {
    pub gradient: DenseMatrix,
    pub projection: TangentProjection,
    pub report: StationarityReport,
}

pub fn evaluate_stationarity(
    problem: &dyn CostFunction,
    point: &VarietyPoint,
) -> Result<StationarityEval> {
    if problem.shape() != point.shape() {
        return Err(Error::ShapeMismatch {
            expected: problem.shape(),
            found: point.shape(),
        });
    }
    let gradient = problem.gradient(&point.to_matrix());
    ensure_finite(&gradient, "gradient")?;
    let projection = project_to_tangent_cone(point, &(-&gradient))?;
    let report = StationarityReport::from_projection(&projection, gradient.norm());
    Ok(StationarityEval {
        gradient,
        projection,
        report,
    })
}

/// Norm of a projection of `−∇f(X)` onto the tangent cone at `point`,
/// always computed at the point's stored rank.
pub fn stationarity_measure(
    problem: &dyn CostFunction,
    point: &VarietyPoint,
) -> Result<StationarityReport> {
    Ok(evaluate_stationarity(problem, point)?.report)
}

/// `√((r − r̲)/(min(m, n) − r̲))`, the lower factor of the bound on `s_f / ‖∇f‖`.
pub fn sandwich_lower_factor(point: &VarietyPoint) -> f64 {
    let k = point.rank() as f64;
    let r = point.rank_bound() as f64;
    let min_dim = point.rows().min(point.cols()) as f64;
    ((r - k) / (min_dim - k)).sqrt()
}

/// Whether `‖∇f‖ ≥ s_f ≥ √((r − r̲)/(min(m, n) − r̲)) ‖∇f‖` holds with
/// additive slack `1e-9 ‖∇f‖`.
pub fn stationarity_sandwich_check(point: &VarietyPoint, report: &StationarityReport) -> bool {
    let slack = 1e-9 * report.gradient_norm;
    let lower = sandwich_lower_factor(point) * report.gradient_norm;
    report.gradient_norm + slack >= report.s_value && report.s_value + slack >= lower
}

fn require_nonzero(point: &VarietyPoint, what: &str) -> Result<()> {
    if point.is_zero() {
        Err(Error::Domain(format!(
            "{what} is undefined at the zero matrix"
        )))
    } else {
        Ok(())
    }
}

fn inverse_sigma(point: &VarietyPoint) -> DVector<f64> {
    point.sigma().map(|s| 1.0 / s)
}

/// Feasible curve `γ(t) = (U + t(U⊥C + ½UA)Σ⁻¹) Σ (V + t(V⊥Bᵀ + ½VAᵀ)Σ⁻¹)ᵀ + t U⊥DV⊥ᵀ`
/// through `X` with velocity `G` at `t = 0`.
pub fn tangent_curve_gamma(
    point: &VarietyPoint,
    tangent: &TangentDecomposition,
    t: f64,
) -> Result<DenseMatrix> {
    require_nonzero(point, "the tangent curve")?;
    if !(t >= 0.0 && t.is_finite()) {
        return Err(Error::invalid(format!(
            "curve parameter must be a finite t >= 0, got {t}"
        )));
    }
    let u = point.u();
    let v = point.v();
    let inv = inverse_sigma(point);
    let left = u + scale_columns(&((&tangent.c_cols + u * &tangent.a * 0.5) * t), &inv);
    let right = v + scale_columns(
        &((tangent.b_rows.transpose() + v * tangent.a.transpose() * 0.5) * t),
        &inv,
    );
    Ok(scale_columns(&left, point.sigma()) * right.transpose() + &tangent.d_truncated * t)
}

/// `¼ [U U⊥] [A; 2C] Σ⁻¹ [A 2B] [V V⊥]ᵀ`, so that
/// `γ(t) = X + tG + t² · gamma_quadratic_term`.
pub fn gamma_quadratic_term(
    point: &VarietyPoint,
    tangent: &TangentDecomposition,
) -> Result<DenseMatrix> {
    require_nonzero(point, "the tangent curve")?;
    let u = point.u();
    let v = point.v();
    let left = u * &tangent.a + &tangent.c_cols * 2.0;
    let right = &tangent.a * v.transpose() + &tangent.b_rows * 2.0;
    Ok(scale_columns(&left, &inverse_sigma(point)) * right * 0.25)
}

/// Upper bound `(√r̲ / (2σ_min)) ‖G‖²` on the distance from `X + G` to the
/// variety for any tangent vector `G` at `X`.
pub fn tangent_line_distance_bound(point: &VarietyPoint, tangent_norm: f64) -> Result<f64> {
    require_nonzero(point, "the tangent-line distance bound")?;
    let sigma_min = point.sigma_min().expect("nonzero point");
    Ok((point.rank() as f64).sqrt() / (2.0 * sigma_min) * tangent_norm * tangent_norm)
}

/// The pair `(X, G)` showing the `1/σ_min` factor of the tangent-line bound
/// cannot be dropped: `X = σ diag(2I_{r−1}, 1, 0, …)`, `G = σ(E_{r,r+1} + E_{r+1,r})`
/// with `σ = 1/(4ε)`.
pub fn appendix_tightness_instance(
    r: usize,
    rows: usize,
    cols: usize,
    epsilon: f64,
) -> Result<(VarietyPoint, DenseMatrix)> {
    if r == 0 {
        return Err(Error::invalid("rank bound must be at least 1"));
    }
    if rows < r + 1 || cols < r + 1 {
        return Err(Error::invalid(format!(
            "a {rows}x{cols} shape is too small for rank bound {r}"
        )));
    }
    if !(epsilon > 0.0 && epsilon.is_finite()) {
        return Err(Error::invalid(format!(
            "epsilon must be positive, got {epsilon}"
        )));
    }
    let sigma = 1.0 / (4.0 * epsilon);
    let u = DenseMatrix::identity(rows, r);
    let v = DenseMatrix::identity(cols, r);
    let mut values = vec![2.0 * sigma; r];
    values[r - 1] = sigma;
    let point = VarietyPoint::from_factors(u, DVector::from_vec(values), v, r)?;
    let mut g = DenseMatrix::zeros(rows, cols);
    g[(r - 1, r)] = sigma;
    g[(r, r - 1)] = sigma;
    Ok((point, g))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::{distance_to_bounded_rank, numerical_rank, truncate_to_rank};
    use crate::problems::LowRankApproxProblem;
    use crate::sampling::{gaussian_matrix, random_point};
    use approx::assert_relative_eq;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn diag(values: &[f64]) -> DenseMatrix {
        DenseMatrix::from_diagonal(&DVector::from_row_slice(values))
    }

    /// Orthonormal complement of the columns of `q`, via a full QR of `[q | I]`.
    fn complement(q: &DenseMatrix) -> DenseMatrix {
        let (m, k) = q.shape();
        let mut aug = DenseMatrix::zeros(m, k + m);
        aug.columns_mut(0, k).copy_from(q);
        aug.columns_mut(k, m)
            .copy_from(&DenseMatrix::identity(m, m));
        let full = aug.qr().q();
        full.columns(k, m - k).into_owned()
    }

    /// Block-by-block projection with explicit complements.
    fn projection_oracle(point: &VarietyPoint, g: &DenseMatrix) -> DenseMatrix {
        let u = point.u();
        let v = point.v();
        let up = complement(u);
        let vp = complement(v);
        let a = u.transpose() * g * v;
        let b = u.transpose() * g * &vp;
        let c = up.transpose() * g * v;
        let d = up.transpose() * g * &vp;
        let (d_trunc, _) = truncate_to_rank(&d, point.rank_bound() - point.rank()).unwrap();
        u * a * v.transpose()
            + u * b * vp.transpose()
            + &up * c * v.transpose()
            + &up * d_trunc * vp.transpose()
    }

    #[test]
    fn point_from_matrix_examples() {
        let p = VarietyPoint::from_matrix(&diag(&[2.0, 1.0, 0.0]), 2).unwrap();
        assert_eq!(p.rank(), 2);
        assert_relative_eq!(p.sigma()[0], 2.0, epsilon = 1e-14);
        assert_relative_eq!(p.sigma()[1], 1.0, epsilon = 1e-14);

        let z = VarietyPoint::from_matrix(&DenseMatrix::zeros(3, 3), 2).unwrap();
        assert_eq!(z.rank(), 0);
        assert_eq!(z.u().shape(), (3, 0));

        let tiny = VarietyPoint::from_matrix(&diag(&[1.0, 1e-18, 0.0]), 2).unwrap();
        assert_eq!(tiny.rank(), 1);
    }

    #[test]
    fn point_from_matrix_rejects_high_rank() {
        let err = VarietyPoint::from_matrix(&diag(&[3.0, 2.0, 1.0]), 2).unwrap_err();
        assert!(matches!(err, Error::InfeasiblePoint { rank: 3, bound: 2 }));
        assert!(VarietyPoint::zero(3, 3, 3).is_err());
    }

    #[test]
    fn from_factors_validation() {
        let u = DenseMatrix::identity(3, 2);
        let v = DenseMatrix::identity(3, 2);
        assert!(VarietyPoint::from_factors(
            u.clone(),
            DVector::from_row_slice(&[1.0, 2.0]),
            v.clone(),
            2
        )
        .is_err());
        assert!(VarietyPoint::from_factors(
            u.clone() * 2.0,
            DVector::from_row_slice(&[2.0, 1.0]),
            v.clone(),
            2
        )
        .is_err());
        assert!(VarietyPoint::from_factors(u, DVector::from_row_slice(&[2.0, 0.0]), v, 2).is_err());
    }

    #[test]
    fn projection_with_rank_budget_one() {
        let p = VarietyPoint::from_matrix(&diag(&[1.0, 0.0, 0.0]), 2).unwrap();
        let proj = project_to_tangent_cone(&p, &diag(&[5.0, 2.0, 1.0])).unwrap();
        assert_relative_eq!(proj.projected, diag(&[5.0, 2.0, 0.0]), epsilon = 1e-13);
        assert_relative_eq!(proj.norm, 29f64.sqrt(), max_relative = 1e-13);
        assert_relative_eq!(
            proj.decomposition.d_residual_norm,
            1.0,
            max_relative = 1e-13
        );
    }

    #[test]
    fn projection_at_full_budget_drops_lower_block() {
        let p = VarietyPoint::from_matrix(&diag(&[1.0, 1.0, 0.0]), 2).unwrap();
        let proj = project_to_tangent_cone(&p, &diag(&[0.0, 0.0, 7.0])).unwrap();
        assert!(proj.projected.norm() < 1e-14);
        assert!(proj.norm < 1e-14);
        assert_relative_eq!(
            proj.decomposition.d_residual_norm,
            7.0,
            max_relative = 1e-14
        );
    }

    #[test]
    fn projection_at_zero_is_rank_truncation() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let g = gaussian_matrix(&mut rng, 6, 5);
        let p = VarietyPoint::zero(6, 5, 2).unwrap();
        let proj = project_to_tangent_cone(&p, &g).unwrap();
        let (expected, dist) = truncate_to_rank(&g, 2).unwrap();
        assert_relative_eq!(proj.projected, expected, epsilon = 1e-12);
        assert_relative_eq!(
            proj.decomposition.d_residual_norm,
            dist,
            max_relative = 1e-12
        );
    }

    #[test]
    fn projection_matches_block_oracle() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        for (m, n, k, r) in [(7, 5, 1, 3), (5, 8, 2, 2), (6, 6, 0, 2), (9, 4, 2, 3)] {
            let p = random_point(&mut rng, m, n, k, r, (0.5, 3.0)).unwrap();
            let g = gaussian_matrix(&mut rng, m, n);
            let proj = project_to_tangent_cone(&p, &g).unwrap();
            let oracle = projection_oracle(&p, &g);
            assert!(
                (&proj.projected - &oracle).norm() < 1e-10,
                "{m}x{n} k={k} r={r}"
            );
            assert_relative_eq!(proj.norm, oracle.norm(), max_relative = 1e-10);
            let rebuilt = proj.decomposition.to_matrix(&p);
            assert!((&rebuilt - &proj.projected).norm() < 1e-12);
            assert!(proj.decomposition.d_rank() <= r - k);
        }
    }

    #[test]
    fn projection_shape_mismatch() {
        let p = VarietyPoint::zero(3, 3, 1).unwrap();
        assert!(matches!(
            project_to_tangent_cone(&p, &DenseMatrix::zeros(3, 2)),
            Err(Error::ShapeMismatch { .. })
        ));
    }

    #[test]
    fn stationarity_examples() {
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        let target = gaussian_matrix(&mut rng, 8, 6);
        let problem = LowRankApproxProblem::new(target.clone()).unwrap();
        let r = 2;

        let (best, _) = truncate_to_rank(&target, r).unwrap();
        let p = VarietyPoint::from_matrix(&best, r).unwrap();
        let rep = stationarity_measure(&problem, &p).unwrap();
        assert!(rep.s_value <= 1e-9 * target.norm());

        let z = VarietyPoint::zero(8, 6, r).unwrap();
        let rep = stationarity_measure(&problem, &z).unwrap();
        let sigma = crate::linalg::singular_values(&target).unwrap();
        let head = (sigma[0] * sigma[0] + sigma[1] * sigma[1]).sqrt();
        assert_relative_eq!(rep.s_value, head, max_relative = 1e-12);
        assert_relative_eq!(
            rep.s_value.powi(2) + rep.residual_distance.powi(2),
            rep.gradient_norm.powi(2),
            max_relative = 1e-9
        );

        let at_target = LowRankApproxProblem::new(best.clone()).unwrap();
        let rep = stationarity_measure(&at_target, &p).unwrap();
        assert!(rep.s_value < 1e-12);
    }

    #[test]
    fn sandwich_examples() {
        let mut rng = ChaCha8Rng::seed_from_u64(13);
        let full = random_point(&mut rng, 6, 5, 3, 3, (0.5, 2.0)).unwrap();
        assert_eq!(sandwich_lower_factor(&full), 0.0);
        let z = VarietyPoint::zero(6, 5, 3).unwrap();
        assert_relative_eq!(sandwich_lower_factor(&z), (3.0f64 / 5.0).sqrt());
        let g = gaussian_matrix(&mut rng, 6, 5);
        for p in [&full, &z] {
            let proj = project_to_tangent_cone(p, &g).unwrap();
            let rep = StationarityReport::from_projection(&proj, g.norm());
            assert!(stationarity_sandwich_check(p, &rep));
        }
        let bad = StationarityReport {
            s_value: 0.1,
            gradient_norm: 1.0,
            residual_distance: 0.99,
        };
        assert!(!stationarity_sandwich_check(&z, &bad));
    }

    #[test]
    fn gamma_curve_properties() {
        let mut rng = ChaCha8Rng::seed_from_u64(17);
        let p = random_point(&mut rng, 7, 6, 2, 3, (0.5, 2.0)).unwrap();
        let g = gaussian_matrix(&mut rng, 7, 6);
        let proj = project_to_tangent_cone(&p, &g).unwrap();
        let x = p.to_matrix();
        let g0 = tangent_curve_gamma(&p, &proj.decomposition, 0.0).unwrap();
        assert!((&g0 - &x).norm() < 1e-14);
        let q = gamma_quadratic_term(&p, &proj.decomposition).unwrap();
        for t in [0.3, 1.0, 1.7] {
            let gamma = tangent_curve_gamma(&p, &proj.decomposition, t).unwrap();
            assert!(numerical_rank(&gamma).unwrap() <= 3);
            let expected = &x + &proj.projected * t + &q * (t * t);
            let scale = x.norm() + t * proj.norm + t * t * q.norm();
            assert!((&gamma - &expected).norm() <= 1e-9 * scale);
        }
        let gamma1 = tangent_curve_gamma(&p, &proj.decomposition, 1.0).unwrap();
        let sum = &x + &proj.projected;
        assert!((&sum - &gamma1).norm() + 1e-12 >= distance_to_bounded_rank(&sum, 3).unwrap());
    }

    #[test]
    fn gamma_rejects_zero_point() {
        let z = VarietyPoint::zero(3, 3, 1).unwrap();
        let proj = project_to_tangent_cone(&z, &diag(&[1.0, 0.0, 0.0])).unwrap();
        assert!(matches!(
            tangent_curve_gamma(&z, &proj.decomposition, 1.0),
            Err(Error::Domain(_))
        ));
        assert!(tangent_line_distance_bound(&z, 1.0).is_err());
    }

    #[test]
    fn distance_bound_zero_tangent() {
        let p = VarietyPoint::from_matrix(&diag(&[2.0, 1.0, 0.0]), 2).unwrap();
        assert_eq!(tangent_line_distance_bound(&p, 0.0).unwrap(), 0.0);
    }

    #[test]
    fn tightness_instance() {
        let (p, g) = appendix_tightness_instance(2, 3, 3, 0.25).unwrap();
        assert_relative_eq!(p.sigma_min().unwrap(), 1.0);
        assert_relative_eq!(g.norm_squared(), 2.0, epsilon = 1e-12);
        let d = distance_to_bounded_rank(&(p.to_matrix() + &g), 2).unwrap();
        let golden = (5f64.sqrt() - 1.0) / 2.0;
        assert_relative_eq!(d, golden, epsilon = 1e-10);
        let bound = tangent_line_distance_bound(&p, g.norm()).unwrap();
        assert!(d <= bound);
        assert!(d / g.norm_squared() >= 0.5 - 0.25);

        let (p, g) = appendix_tightness_instance(1, 2, 2, 0.25).unwrap();
        assert_eq!(p.to_matrix(), diag(&[1.0, 0.0]));
        assert_eq!(g, DenseMatrix::from_row_slice(2, 2, &[0.0, 1.0, 1.0, 0.0]));

        for eps in [0.01, 0.1, 2.0] {
            let (p, _) = appendix_tightness_instance(3, 5, 4, eps).unwrap();
            assert_relative_eq!(p.sigma_min().unwrap(), 1.0 / (4.0 * eps));
        }
        assert!(appendix_tightness_instance(3, 3, 5, 0.25).is_err());
        assert!(appendix_tightness_instance(0, 3, 3, 0.25).is_err());
    }
}
