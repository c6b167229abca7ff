//! Seeded random matrices and variety points for experiments and property checks.

use nalgebra::DVector;
use rand::Rng;
use rand_distr::{Distribution, StandardNormal, Uniform};

use crate::error::Result;
use crate::linalg::{truncate_to_rank, DenseMatrix};
use crate::variety::VarietyPoint;

pub fn gaussian_matrix<R: Rng + ?Sized>(rng: &mut R, rows: usize, cols: usize) -> DenseMatrix {
    DenseMatrix::from_fn(rows, cols, |_, _| StandardNormal.sample(rng))
}

/// Matrix with `k` orthonormal columns, from the QR factor of a Gaussian matrix.
pub fn orthonormal_columns<R: Rng + ?Sized>(rng: &mut R, rows: usize, k: usize) -> DenseMatrix {
    if k == 0 {
        return DenseMatrix::zeros(rows, 0);
    }
    gaussian_matrix(rng, rows, k).qr().q()
}

/// Gaussian matrix truncated to rank `r`.
pub fn gaussian_low_rank<R: Rng + ?Sized>(
    rng: &mut R,
    rows: usize,
    cols: usize,
    r: usize,
) -> Result<DenseMatrix> {
    let g = gaussian_matrix(rng, rows, cols);
    Ok(truncate_to_rank(&g, r)?.0)
}

/// Point of exact rank `rank` with singular values drawn uniformly from
/// `[sigma_lo, sigma_hi]`, stored in a random orthonormal frame.
pub fn random_point<R: Rng + ?Sized>(
    rng: &mut R,
    rows: usize,
    cols: usize,
    rank: usize,
    rank_bound: usize,
    (sigma_lo, sigma_hi): (f64, f64),
) -> Result<VarietyPoint> {
    let u = orthonormal_columns(rng, rows, rank);
    let v = orthonormal_columns(rng, cols, rank);
    let dist = Uniform::new_inclusive(sigma_lo, sigma_hi).expect("valid sigma range");
    let mut sigma: Vec<f64> = (0..rank).map(|_| dist.sample(rng)).collect();
    sigma.sort_by(|a, b| b.total_cmp(a));
    VarietyPoint::from_factors(u, DVector::from_vec(sigma), v, rank_bound)
}
