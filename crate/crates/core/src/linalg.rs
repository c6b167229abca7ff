//! Dense matrix utilities: thin SVD, numerical rank, Δ-rank and
//! Eckart–Young truncation onto the set of matrices of rank at most `k`.
//!
//! All norms and distances are Frobenius.

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};

/// Real `m × n` matrix. Every public entry point rejects non-finite entries.
pub type DenseMatrix = DMatrix<f64>;

/// Thresholds that turn singular values into ranks.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RankParams {
    /// Δ of the Δ-rank, in the units of the singular values.
    pub delta: f64,
    /// Multiplier of `σ_max · max(m, n) · ε_mach` for the numerical rank.
    pub rank_rel_tol: f64,
}

impl RankParams {
    pub fn new(delta: f64, rank_rel_tol: f64) -> Result<Self> {
        let params = Self {
            delta,
            rank_rel_tol,
        };
        params.validate()?;
        Ok(params)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.delta > 0.0 && self.delta.is_finite()) {
            return Err(Error::invalid(format!(
                "delta must be positive, got {}",
                self.delta
            )));
        }
        if !(self.rank_rel_tol > 0.0 && self.rank_rel_tol.is_finite()) {
            return Err(Error::invalid(format!(
                "rank_rel_tol must be positive, got {}",
                self.rank_rel_tol
            )));
        }
        Ok(())
    }
}

impl Default for RankParams {
    fn default() -> Self {
        Self {
            delta: 1e-3,
            rank_rel_tol: 1.0,
        }
    }
}

/// Thin SVD `X = U diag(σ) Vᵀ` with `k = min(m, n)` triplets sorted by
/// nonincreasing singular value.
#[derive(Debug, Clone)]
pub struct SvdFactorization {
    pub u: DenseMatrix,
    pub sigma: DVector<f64>,
    pub v: DenseMatrix,
    /// Number of singular values strictly above `threshold`.
    pub numerical_rank: usize,
    /// The rank-detection threshold τ(X) the rank was computed with.
    pub threshold: f64,
}

impl SvdFactorization {
    pub fn rows(&self) -> usize {
        self.u.nrows()
    }

    pub fn cols(&self) -> usize {
        self.v.nrows()
    }

    /// Number of singular values strictly greater than `delta`, capped at the
    /// numerical rank.
    pub fn delta_rank(&self, delta: f64) -> usize {
        self.sigma
            .iter()
            .take(self.numerical_rank)
            .take_while(|&&s| s > delta)
            .count()
    }

    /// `√(Σ_{j>target} σ_j²)` over all computed singular values.
    pub fn tail_norm(&self, target: usize) -> f64 {
        self.sigma
            .iter()
            .skip(target)
            .map(|s| s * s)
            .sum::<f64>()
            .sqrt()
    }

    /// `U[:, ..k] diag(σ[..k]) V[:, ..k]ᵀ`.
    pub fn reconstruct_leading(&self, k: usize) -> DenseMatrix {
        let k = k.min(self.sigma.len());
        let mut us = self.u.columns(0, k).into_owned();
        for (j, mut col) in us.column_iter_mut().enumerate() {
            col *= self.sigma[j];
        }
        us * self.v.columns(0, k).transpose()
    }

    pub fn reconstruct(&self) -> DenseMatrix {
        self.reconstruct_leading(self.sigma.len())
    }
}

pub fn ensure_finite(x: &DenseMatrix, what: &'static str) -> Result<()> {
    if x.iter().all(|v| v.is_finite()) {
        Ok(())
    } else {
        Err(Error::NonFinite(what))
    }
}

pub fn ensure_shape(x: &DenseMatrix, expected: (usize, usize)) -> Result<()> {
    if x.shape() == expected {
        Ok(())
    } else {
        Err(Error::ShapeMismatch {
            expected,
            found: x.shape(),
        })
    }
}

/// τ(X) = rank_rel_tol · σ_max · max(m, n) · ε_mach.
pub fn rank_threshold(sigma_max: f64, rows: usize, cols: usize, rank_rel_tol: f64) -> f64 {
    rank_rel_tol * sigma_max * rows.max(cols) as f64 * f64::EPSILON
}

pub fn compute_svd(x: &DenseMatrix) -> Result<SvdFactorization> {
    compute_svd_with(x, RankParams::default().rank_rel_tol)
}

pub fn compute_svd_with(x: &DenseMatrix, rank_rel_tol: f64) -> Result<SvdFactorization> {
    ensure_finite(x, "matrix passed to SVD")?;
    let (m, n) = x.shape();
    // nalgebra's implicit-shift SVD can return inconsistent factors for
    // rank-deficient inputs, which are routine here; faer's is used instead.
    let svd = faer::Mat::<f64>::from_fn(m, n, |i, j| x[(i, j)])
        .thin_svd()
        .map_err(|_| Error::SvdNoConvergence { rows: m, cols: n })?;
    let (fu, fs, fv) = (svd.U(), svd.S().column_vector(), svd.V());
    let k = m.min(n);
    let u = DenseMatrix::from_fn(m, k, |i, j| fu[(i, j)]);
    let sigma = DVector::from_fn(k, |i, _| fs[i]);
    let v = DenseMatrix::from_fn(n, k, |i, j| fv[(i, j)]);
    let sigma_max = sigma.iter().copied().fold(0.0, f64::max);
    let threshold = rank_threshold(sigma_max, m, n, rank_rel_tol);
    let numerical_rank = sigma.iter().filter(|&&s| s > threshold).count();
    Ok(SvdFactorization {
        u,
        sigma,
        v,
        numerical_rank,
        threshold,
    })
}

pub fn singular_values(x: &DenseMatrix) -> Result<DVector<f64>> {
    Ok(compute_svd(x)?.sigma)
}

pub fn numerical_rank(x: &DenseMatrix) -> Result<usize> {
    Ok(compute_svd(x)?.numerical_rank)
}

/// Δ-rank: the number of singular values strictly above `delta`; zero for
/// the zero matrix and for matrices whose singular values are all `≤ delta`.
pub fn delta_rank(x: &DenseMatrix, delta: f64) -> Result<usize> {
    if !(delta > 0.0) {
        return Err(Error::invalid(format!(
            "delta must be positive, got {delta}"
        )));
    }
    Ok(compute_svd(x)?.delta_rank(delta))
}

fn check_target(x: &DenseMatrix, target: usize) -> Result<()> {
    let k = x.nrows().min(x.ncols());
    if target > k {
        return Err(Error::invalid(format!(
            "target rank {target} exceeds min(m, n) = {k}"
        )));
    }
    Ok(())
}

/// Returns an element of the projection of `x` onto matrices of rank at most
/// `target`, together with the distance `√(Σ_{j>target} σ_j²)`.
///
/// When the numerical rank of `x` is already `≤ target`, `x` is returned
/// unchanged. At ties `σ_target = σ_{target+1}` the leading triplets in SVD
/// order are kept.
pub fn truncate_to_rank(x: &DenseMatrix, target: usize) -> Result<(DenseMatrix, f64)> {
    check_target(x, target)?;
    let svd = compute_svd(x)?;
    let distance = svd.tail_norm(target);
    if svd.numerical_rank <= target {
        return Ok((x.clone(), distance));
    }
    Ok((svd.reconstruct_leading(target), distance))
}

pub fn distance_to_bounded_rank(x: &DenseMatrix, target: usize) -> Result<f64> {
    check_target(x, target)?;
    Ok(compute_svd(x)?.tail_norm(target))
}

pub fn frobenius_inner(a: &DenseMatrix, b: &DenseMatrix) -> f64 {
    a.iter().zip(b.iter()).map(|(x, y)| x * y).sum()
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    use crate::sampling::gaussian_matrix;

    fn diag(values: &[f64]) -> DenseMatrix {
        DenseMatrix::from_diagonal(&DVector::from_row_slice(values))
    }

    #[test]
    fn svd_of_diagonal() {
        let svd = compute_svd(&diag(&[3.0, 2.0, 1.0])).unwrap();
        assert_relative_eq!(
            svd.sigma,
            DVector::from_row_slice(&[3.0, 2.0, 1.0]),
            epsilon = 1e-14
        );
        assert_eq!(svd.numerical_rank, 3);
    }

    #[test]
    fn svd_of_zero() {
        let svd = compute_svd(&DenseMatrix::zeros(3, 3)).unwrap();
        assert!(svd.sigma.iter().all(|&s| s == 0.0));
        assert_eq!(svd.numerical_rank, 0);
    }

    #[test]
    fn svd_reconstructs_random_matrix() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        for (m, n) in [(8, 5), (5, 8), (1, 4), (6, 6)] {
            let x = gaussian_matrix(&mut rng, m, n);
            let svd = compute_svd(&x).unwrap();
            assert_eq!(svd.sigma.len(), m.min(n));
            assert!((svd.reconstruct() - &x).norm() <= 1e-12 * x.norm());
            let k = m.min(n);
            let eye = DenseMatrix::identity(k, k);
            assert!((svd.u.transpose() * &svd.u - &eye).norm() < 1e-12);
            assert!((svd.v.transpose() * &svd.v - &eye).norm() < 1e-12);
            assert!(svd.sigma.as_slice().windows(2).all(|w| w[0] >= w[1]));
        }
    }

    #[test]
    fn svd_rejects_nan() {
        let mut x = DenseMatrix::zeros(2, 2);
        x[(0, 1)] = f64::NAN;
        assert!(matches!(compute_svd(&x), Err(Error::NonFinite(_))));
    }

    #[test]
    fn delta_rank_examples() {
        assert_eq!(delta_rank(&DenseMatrix::zeros(3, 3), 0.1).unwrap(), 0);
        let x = diag(&[3.0, 1.0, 0.5]);
        assert_eq!(delta_rank(&x, 1.0).unwrap(), 1);
        assert_eq!(delta_rank(&x, 0.4).unwrap(), 3);
        // all singular values at or below delta
        assert_eq!(delta_rank(&x, 3.0).unwrap(), 0);
        assert!(delta_rank(&x, 0.0).is_err());
    }

    #[test]
    fn truncation_of_diagonal() {
        let (y, d) = truncate_to_rank(&diag(&[3.0, 2.0, 1.0]), 2).unwrap();
        assert_relative_eq!(y, diag(&[3.0, 2.0, 0.0]), epsilon = 1e-14);
        assert_relative_eq!(d, 1.0, epsilon = 1e-14);
    }

    #[test]
    fn truncation_keeps_low_rank_input() {
        let x = diag(&[3.0, 2.0, 0.0]);
        let (y, d) = truncate_to_rank(&x, 2).unwrap();
        assert_eq!(y, x);
        assert_eq!(d, 0.0);
    }

    #[test]
    fn truncation_distance_matches_tail() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let x = gaussian_matrix(&mut rng, 10, 7);
        let sigma = singular_values(&x).unwrap();
        let tail = (3..7).map(|j| sigma[j] * sigma[j]).sum::<f64>().sqrt();
        let (y, d) = truncate_to_rank(&x, 3).unwrap();
        assert_relative_eq!(d, tail, max_relative = 1e-10);
        assert_relative_eq!((&x - &y).norm(), tail, max_relative = 1e-10);
        assert_eq!(numerical_rank(&y).unwrap(), 3);
    }

    #[test]
    fn truncation_target_too_large() {
        let x = DenseMatrix::zeros(3, 2);
        assert!(matches!(
            truncate_to_rank(&x, 3),
            Err(Error::InvalidArgument(_))
        ));
        assert!(distance_to_bounded_rank(&x, 3).is_err());
    }

    #[test]
    fn distance_examples() {
        assert_relative_eq!(
            distance_to_bounded_rank(&diag(&[3.0, 2.0, 1.0]), 1).unwrap(),
            5f64.sqrt(),
            max_relative = 1e-14
        );
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let x = gaussian_matrix(&mut rng, 4, 6);
        assert_eq!(distance_to_bounded_rank(&x, 4).unwrap(), 0.0);
    }

    #[test]
    fn threshold_drops_tiny_singular_values() {
        let x = diag(&[1.0, 1e-18, 0.0]);
        let svd = compute_svd(&x).unwrap();
        assert_eq!(svd.numerical_rank, 1);
        assert_relative_eq!(svd.threshold, 3.0 * f64::EPSILON);
    }

    #[test]
    fn rank_params_validation() {
        assert!(RankParams::new(0.0, 1.0).is_err());
        assert!(RankParams::new(0.1, -1.0).is_err());
        assert!(RankParams::new(0.1, 1.0).is_ok());
    }

    #[test]
    fn low_rank_inputs_reconstruct() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        for t in 0..300 {
            let (m, n) = (3 + t % 9, 3 + (t / 9) % 9);
            let k = 1 + t % (m.min(n) - 1);
            let x = crate::sampling::gaussian_low_rank(&mut rng, m, n, k).unwrap();
            let svd = compute_svd(&x).unwrap();
            assert_eq!(svd.numerical_rank, k, "{m}x{n} rank {k}");
            assert!((svd.reconstruct_leading(k) - &x).norm() <= 1e-12 * x.norm());
        }
    }
}
