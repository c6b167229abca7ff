//! Reference computations for integration tests. Nothing here calls the
//! library's SVD or tangent-cone code.

#![allow(dead_code)]

use nalgebra::DMatrix;

pub type Mat = DMatrix<f64>;

/// Singular values (nonincreasing) by one-sided Jacobi rotations.
pub fn jacobi_singular_values(x: &Mat) -> Vec<f64> {
    let mut a = if x.nrows() >= x.ncols() {
        x.clone()
    } else {
        x.transpose()
    };
    let n = a.ncols();
    for _sweep in 0..100 {
        let mut rotated = false;
        for p in 0..n {
            for q in p + 1..n {
                let alpha = a.column(p).norm_squared();
                let beta = a.column(q).norm_squared();
                let gamma = a.column(p).dot(&a.column(q));
                if gamma == 0.0 || gamma.abs() <= 1e-15 * (alpha * beta).sqrt() {
                    continue;
                }
                rotated = true;
                let zeta = (beta - alpha) / (2.0 * gamma);
                let t = zeta.signum() / (zeta.abs() + (1.0 + zeta * zeta).sqrt());
                let c = 1.0 / (1.0 + t * t).sqrt();
                let s = c * t;
                for i in 0..a.nrows() {
                    let (ap, aq) = (a[(i, p)], a[(i, q)]);
                    a[(i, p)] = c * ap - s * aq;
                    a[(i, q)] = s * ap + c * aq;
                }
            }
        }
        if !rotated {
            break;
        }
    }
    let mut sigma: Vec<f64> = (0..n).map(|j| a.column(j).norm()).collect();
    sigma.sort_by(|a, b| b.total_cmp(a));
    sigma
}

pub fn tail_norm(sigma: &[f64], k: usize) -> f64 {
    sigma.iter().skip(k).map(|s| s * s).sum::<f64>().sqrt()
}

/// Orthonormal basis of the complement of the columns of `q`.
pub fn complement(q: &Mat) -> Mat {
    let (m, k) = q.shape();
    let mut aug = Mat::zeros(m, k + m);
    aug.columns_mut(0, k).copy_from(q);
    aug.columns_mut(k, m).copy_from(&Mat::identity(m, m));
    aug.qr().q().columns(k, m - k).into_owned()
}

/// Norm of a projection of `g` onto the tangent cone at `U diag(σ) Vᵀ`
/// with rank budget `budget`, from explicit complements.
pub fn tangent_cone_projection_norm(u: &Mat, v: &Mat, budget: usize, g: &Mat) -> f64 {
    let (up, vp) = (complement(u), complement(v));
    let a = u.transpose() * g * v;
    let b = u.transpose() * g * &vp;
    let c = up.transpose() * g * v;
    let d = up.transpose() * g * &vp;
    let kept: f64 = if d.is_empty() {
        0.0
    } else {
        jacobi_singular_values(&d)
            .iter()
            .take(budget)
            .map(|s| s * s)
            .sum()
    };
    (a.norm_squared() + b.norm_squared() + c.norm_squared() + kept).sqrt()
}

pub fn diag(m: usize, n: usize, values: &[f64]) -> Mat {
    let mut x = Mat::zeros(m, n);
    for (i, v) in values.iter().enumerate() {
        x[(i, i)] = *v;
    }
    x
}
