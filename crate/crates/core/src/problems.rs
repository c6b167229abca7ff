//! Cost functions with analytic gradients, the built-in test problems and
//! their JSON definitions.

use nalgebra::DMatrix;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::io::MatrixDoc;
use crate::linalg::{ensure_finite, numerical_rank, DenseMatrix};
use crate::sampling::gaussian_matrix;

/// A differentiable `f : ℝ^{m×n} → ℝ` with locally Lipschitz gradient.
pub trait CostFunction: Send + Sync {
    fn shape(&self) -> (usize, usize);

    fn eval(&self, x: &DenseMatrix) -> f64;

    fn gradient(&self, x: &DenseMatrix) -> DenseMatrix;

    /// A global Lipschitz constant of the gradient, when one is known.
    fn lipschitz_hint(&self) -> Option<f64> {
        None
    }
}

impl<T: CostFunction + ?Sized> CostFunction for Box<T> {
    fn shape(&self) -> (usize, usize) {
        (**self).shape()
    }

    fn eval(&self, x: &DenseMatrix) -> f64 {
        (**self).eval(x)
    }

    fn gradient(&self, x: &DenseMatrix) -> DenseMatrix {
        (**self).gradient(x)
    }

    fn lipschitz_hint(&self) -> Option<f64> {
        (**self).lipschitz_hint()
    }
}

/// `f(X) = ½‖X − A‖²`.
#[derive(Debug, Clone)]
pub struct LowRankApproxProblem {
    target: DenseMatrix,
}

impl LowRankApproxProblem {
    pub fn new(target: DenseMatrix) -> Result<Self> {
        ensure_finite(&target, "low-rank approximation target")?;
        Ok(Self { target })
    }

    pub fn target(&self) -> &DenseMatrix {
        &self.target
    }
}

impl CostFunction for LowRankApproxProblem {
    fn shape(&self) -> (usize, usize) {
        self.target.shape()
    }

    fn eval(&self, x: &DenseMatrix) -> f64 {
        0.5 * x
            .iter()
            .zip(self.target.iter())
            .map(|(a, b)| (a - b) * (a - b))
            .sum::<f64>()
    }

    fn gradient(&self, x: &DenseMatrix) -> DenseMatrix {
        x - &self.target
    }

    fn lipschitz_hint(&self) -> Option<f64> {
        Some(1.0)
    }
}

/// `f(X) = ½‖Ω ⊙ (X − A)‖²` for a dense boolean observation mask `Ω`.
#[derive(Debug, Clone)]
pub struct MatrixCompletionProblem {
    target: DenseMatrix,
    mask: DMatrix<bool>,
}

impl MatrixCompletionProblem {
    pub fn new(target: DenseMatrix, mask: DMatrix<bool>) -> Result<Self> {
        ensure_finite(&target, "completion target")?;
        if mask.shape() != target.shape() {
            return Err(Error::ShapeMismatch {
                expected: target.shape(),
                found: mask.shape(),
            });
        }
        Ok(Self { target, mask })
    }

    pub fn target(&self) -> &DenseMatrix {
        &self.target
    }

    pub fn mask(&self) -> &DMatrix<bool> {
        &self.mask
    }

    pub fn observed_count(&self) -> usize {
        self.mask.iter().filter(|&&b| b).count()
    }
}

impl CostFunction for MatrixCompletionProblem {
    fn shape(&self) -> (usize, usize) {
        self.target.shape()
    }

    fn eval(&self, x: &DenseMatrix) -> f64 {
        0.5 * x
            .iter()
            .zip(self.target.iter())
            .zip(self.mask.iter())
            .filter(|(_, &observed)| observed)
            .map(|((a, b), _)| (a - b) * (a - b))
            .sum::<f64>()
    }

    fn gradient(&self, x: &DenseMatrix) -> DenseMatrix {
        DenseMatrix::from_fn(x.nrows(), x.ncols(), |i, j| {
            if self.mask[(i, j)] {
                x[(i, j)] - self.target[(i, j)]
            } else {
                0.0
            }
        })
    }

    fn lipschitz_hint(&self) -> Option<f64> {
        Some(1.0)
    }
}

pub const MAX_POLYNOMIAL_DEGREE: u32 = 4;

/// One term `coeff · Π x_{ij}^{p}` with distinct `(i, j)` per factor.
#[derive(Debug, Clone, PartialEq)]
pub struct Monomial {
    factors: Vec<(usize, usize, u32)>,
    coeff: f64,
}

impl Monomial {
    pub fn degree(&self) -> u32 {
        self.factors.iter().map(|f| f.2).sum()
    }

    pub fn factors(&self) -> &[(usize, usize, u32)] {
        &self.factors
    }

    pub fn coeff(&self) -> f64 {
        self.coeff
    }
}

/// Polynomial of degree at most four in the entries of `X`.
#[derive(Debug, Clone)]
pub struct UserPolynomialProblem {
    rows: usize,
    cols: usize,
    terms: Vec<Monomial>,
}

impl UserPolynomialProblem {
    /// `terms` pairs a list of `(row, col, power)` factors with a coefficient.
    /// Repeated entries inside a monomial have their powers added.
    pub fn new(
        rows: usize,
        cols: usize,
        terms: Vec<(Vec<(usize, usize, u32)>, f64)>,
    ) -> Result<Self> {
        if rows == 0 || cols == 0 {
            return Err(Error::invalid("polynomial shape must be positive"));
        }
        let mut out = Vec::with_capacity(terms.len());
        for (raw, coeff) in terms {
            if !coeff.is_finite() {
                return Err(Error::NonFinite("polynomial coefficient"));
            }
            let mut factors: Vec<(usize, usize, u32)> = Vec::new();
            for (i, j, p) in raw {
                if i >= rows || j >= cols {
                    return Err(Error::invalid(format!(
                        "monomial entry ({i}, {j}) outside a {rows}x{cols} matrix"
                    )));
                }
                if p == 0 {
                    continue;
                }
                match factors.iter_mut().find(|f| f.0 == i && f.1 == j) {
                    Some(f) => f.2 += p,
                    None => factors.push((i, j, p)),
                }
            }
            let term = Monomial { factors, coeff };
            if term.degree() > MAX_POLYNOMIAL_DEGREE {
                return Err(Error::invalid(format!(
                    "monomial degree {} exceeds {MAX_POLYNOMIAL_DEGREE}",
                    term.degree()
                )));
            }
            out.push(term);
        }
        Ok(Self {
            rows,
            cols,
            terms: out,
        })
    }

    pub fn terms(&self) -> &[Monomial] {
        &self.terms
    }
}

fn factor_product(x: &DenseMatrix, factors: &[(usize, usize, u32)], skip: Option<usize>) -> f64 {
    factors
        .iter()
        .enumerate()
        .filter(|(k, _)| Some(*k) != skip)
        .map(|(_, &(i, j, p))| x[(i, j)].powi(p as i32))
        .product()
}

impl CostFunction for UserPolynomialProblem {
    fn shape(&self) -> (usize, usize) {
        (self.rows, self.cols)
    }

    fn eval(&self, x: &DenseMatrix) -> f64 {
        self.terms
            .iter()
            .map(|t| t.coeff * factor_product(x, &t.factors, None))
            .sum()
    }

    fn gradient(&self, x: &DenseMatrix) -> DenseMatrix {
        let mut g = DenseMatrix::zeros(self.rows, self.cols);
        for term in &self.terms {
            for (k, &(i, j, p)) in term.factors.iter().enumerate() {
                let rest = factor_product(x, &term.factors, Some(k));
                g[(i, j)] += term.coeff * p as f64 * x[(i, j)].powi(p as i32 - 1) * rest;
            }
        }
        g
    }
}

/// Maximum discrepancy between central differences
/// `(f(x + h d) − f(x − h d)) / 2h` and `⟨∇f(x), d⟩` over a fixed set of
/// at least 20 directions: evenly spread coordinate directions plus seeded
/// unit-norm Gaussian ones.
pub fn finite_difference_check(problem: &dyn CostFunction, x: &DenseMatrix, h: f64) -> f64 {
    assert!(h > 0.0, "finite-difference step must be positive");
    let (m, n) = x.shape();
    let total = m * n;
    let basis_count = total.min(16);
    let random_count = 8.max(20usize.saturating_sub(basis_count));

    let mut directions: Vec<DenseMatrix> = (0..basis_count)
        .map(|k| {
            let idx = k * total / basis_count;
            let mut e = DenseMatrix::zeros(m, n);
            e[(idx / n, idx % n)] = 1.0;
            e
        })
        .collect();
    let mut rng = ChaCha8Rng::seed_from_u64(0x5eed);
    directions.extend((0..random_count).map(|_| {
        let d = gaussian_matrix(&mut rng, m, n);
        let norm = d.norm();
        d / norm
    }));

    let grad = problem.gradient(x);
    directions
        .iter()
        .map(|d| {
            let fd = (problem.eval(&(x + d * h)) - problem.eval(&(x - d * h))) / (2.0 * h);
            let exact: f64 = grad.iter().zip(d.iter()).map(|(a, b)| a * b).sum();
            (fd - exact).abs()
        })
        .fold(0.0, f64::max)
}

/// A user-supplied polynomial, starting point and rank bound, bundled for
/// the P²GD versus P²GDR comparison harness.
#[derive(Debug, Clone)]
pub struct ApocalypseCandidate {
    pub problem: UserPolynomialProblem,
    pub x0: DenseMatrix,
    pub rank_bound: usize,
}

pub fn make_apocalypse_candidate(
    problem: UserPolynomialProblem,
    x0: DenseMatrix,
    rank_bound: usize,
) -> Result<ApocalypseCandidate> {
    if x0.shape() != problem.shape() {
        return Err(Error::ShapeMismatch {
            expected: problem.shape(),
            found: x0.shape(),
        });
    }
    if rank_bound >= x0.nrows().min(x0.ncols()) {
        return Err(Error::invalid(format!(
            "rank bound {rank_bound} must be smaller than min(m, n)"
        )));
    }
    let rank = numerical_rank(&x0)?;
    if rank > rank_bound {
        return Err(Error::InfeasiblePoint {
            rank,
            bound: rank_bound,
        });
    }
    Ok(ApocalypseCandidate {
        problem,
        x0,
        rank_bound,
    })
}

// ---------------------------------------------------------------------------
// JSON definitions

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LowRankApproxPayload {
    pub target: MatrixDoc,
}

/// `mask` entries are 0/1; any nonzero entry counts as observed.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CompletionPayload {
    pub target: MatrixDoc,
    pub mask: MatrixDoc,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TermDoc {
    pub monomial: Vec<(usize, usize, u32)>,
    pub coeff: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum ProblemDoc {
    LowrankApprox {
        shape: (usize, usize),
        payload: LowRankApproxPayload,
    },
    Completion {
        shape: (usize, usize),
        payload: CompletionPayload,
    },
    Polynomial {
        shape: (usize, usize),
        payload: Vec<TermDoc>,
    },
}

fn check_doc_shape(declared: (usize, usize), x: &DenseMatrix, what: &str) -> Result<()> {
    if x.shape() != declared {
        return Err(Error::Format(format!(
            "{what} is {}x{} but the problem shape is {}x{}",
            x.nrows(),
            x.ncols(),
            declared.0,
            declared.1
        )));
    }
    Ok(())
}

impl ProblemDoc {
    pub fn shape(&self) -> (usize, usize) {
        match self {
            ProblemDoc::LowrankApprox { shape, .. }
            | ProblemDoc::Completion { shape, .. }
            | ProblemDoc::Polynomial { shape, .. } => *shape,
        }
    }

    pub fn build(&self) -> Result<Box<dyn CostFunction>> {
        match self {
            ProblemDoc::LowrankApprox { shape, payload } => {
                let target = payload.target.to_matrix()?;
                check_doc_shape(*shape, &target, "target")?;
                Ok(Box::new(LowRankApproxProblem::new(target)?))
            }
            ProblemDoc::Completion { shape, payload } => {
                let target = payload.target.to_matrix()?;
                check_doc_shape(*shape, &target, "target")?;
                let mask = payload.mask.to_matrix()?;
                check_doc_shape(*shape, &mask, "mask")?;
                if let Some(v) = mask.iter().find(|v| **v != 0.0 && **v != 1.0) {
                    return Err(Error::Format(format!(
                        "mask entries must be 0 or 1, found {v}"
                    )));
                }
                Ok(Box::new(MatrixCompletionProblem::new(
                    target,
                    mask.map(|v| v != 0.0),
                )?))
            }
            ProblemDoc::Polynomial { shape, payload } => {
                let terms = payload
                    .iter()
                    .map(|t| (t.monomial.clone(), t.coeff))
                    .collect();
                Ok(Box::new(UserPolynomialProblem::new(
                    shape.0, shape.1, terms,
                )?))
            }
        }
    }

    pub fn from_json(text: &str) -> Result<Self> {
        Ok(serde_json::from_str(text)?)
    }

    pub fn to_json_pretty(&self) -> String {
        serde_json::to_string_pretty(self).expect("problem serializes")
    }
}

pub fn load_problem(text: &str) -> Result<Box<dyn CostFunction>> {
    ProblemDoc::from_json(text)?.build()
}
