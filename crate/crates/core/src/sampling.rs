//! Gaussian test matrices for sketching, optionally preconditioned.
//!
//! Column `j` of every draw comes from its own ChaCha20 stream, so a draw is
//! a pure function of `(seed, j)` and columns can be generated in parallel.

use std::fmt;
use std::sync::Arc;

use rand::SeedableRng;
use rand_chacha::ChaCha20Rng;
use rand_distr::{Distribution, StandardNormal};
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::linalg;
use crate::matrix::DenseMatrix;
use crate::operators::SpdOp;

/// Recorded in experiment metadata.
pub const RNG_DESCRIPTION: &str =
    "ChaCha20 (rand_chacha 0.9) seeded by seed_from_u64, stream = column index; N(0,1) by ziggurat (rand_distr 0.5 StandardNormal)";

/// Default oversampling.
pub const DEFAULT_OVERSAMPLING: usize = 10;

/// A factor `L` with `LLᵀ ≈ T⁻¹`.
pub trait Preconditioner: Send + Sync {
    fn dim(&self) -> usize;
    fn apply_l(&self, x: &[f64]) -> Vec<f64>;
    fn apply_lt(&self, x: &[f64]) -> Vec<f64>;
    fn name(&self) -> &str;

    /// Dense `L`.
    fn materialize(&self) -> DenseMatrix {
        let n = self.dim();
        let cols: Vec<Vec<f64>> = (0..n)
            .map(|j| {
                let mut e = vec![0.0; n];
                e[j] = 1.0;
                self.apply_l(&e)
            })
            .collect();
        DenseMatrix::from_columns(n, &cols)
    }
}

/// `L = diag(d)`.
#[derive(Debug, Clone)]
pub struct DiagonalPreconditioner {
    d: Vec<f64>,
    name: String,
}

impl DiagonalPreconditioner {
    pub fn new(d: Vec<f64>, name: impl Into<String>) -> Self {
        DiagonalPreconditioner { d, name: name.into() }
    }

    pub fn identity(n: usize) -> Self {
        Self::new(vec![1.0; n], "identity")
    }

    pub fn diagonal(&self) -> &[f64] {
        &self.d
    }
}

impl Preconditioner for DiagonalPreconditioner {
    fn dim(&self) -> usize {
        self.d.len()
    }
    fn apply_l(&self, x: &[f64]) -> Vec<f64> {
        x.iter().zip(&self.d).map(|(a, b)| a * b).collect()
    }
    fn apply_lt(&self, x: &[f64]) -> Vec<f64> {
        self.apply_l(x)
    }
    fn name(&self) -> &str {
        &self.name
    }
}

/// `L = L_T⁻ᵀ` for the lower Cholesky factor `L_T` of `T`, so `LLᵀ = T⁻¹` and `LᵀTL = I`.
#[derive(Debug, Clone)]
pub struct CholeskyPreconditioner {
    lt: DenseMatrix,
}

impl Preconditioner for CholeskyPreconditioner {
    fn dim(&self) -> usize {
        self.lt.rows()
    }
    fn apply_l(&self, x: &[f64]) -> Vec<f64> {
        linalg::solve_lower_t(&self.lt, x)
    }
    fn apply_lt(&self, x: &[f64]) -> Vec<f64> {
        linalg::solve_lower(&self.lt, x)
    }
    fn name(&self) -> &str {
        "exact"
    }
}

/// User-supplied dense `L`.
#[derive(Debug, Clone)]
pub struct DensePreconditioner {
    l: DenseMatrix,
    name: String,
}

impl DensePreconditioner {
    pub fn new(l: DenseMatrix, name: impl Into<String>) -> Result<Self> {
        if l.rows() != l.cols() {
            return Err(Error::DimensionMismatch {
                context: "preconditioner (square)",
                expected: l.rows(),
                got: l.cols(),
            });
        }
        Ok(DensePreconditioner { l, name: name.into() })
    }
}

impl Preconditioner for DensePreconditioner {
    fn dim(&self) -> usize {
        self.l.rows()
    }
    fn apply_l(&self, x: &[f64]) -> Vec<f64> {
        self.l.matvec(x)
    }
    fn apply_lt(&self, x: &[f64]) -> Vec<f64> {
        self.l.t_matvec(x)
    }
    fn name(&self) -> &str {
        &self.name
    }
    fn materialize(&self) -> DenseMatrix {
        self.l.clone()
    }
}

/// How the sketching matrix is drawn.
#[derive(Clone)]
pub enum Sampler {
    Gaussian,
    Preconditioned(Arc<dyn Preconditioner>),
}

impl fmt::Debug for Sampler {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Sampler::Gaussian => write!(f, "Gaussian"),
            Sampler::Preconditioned(p) => write!(f, "Preconditioned({})", p.name()),
        }
    }
}

#[derive(Debug, Clone)]
pub struct SamplerSpec {
    pub sampler: Sampler,
    pub seed: u64,
}

impl SamplerSpec {
    pub fn gaussian(seed: u64) -> Self {
        SamplerSpec {
            sampler: Sampler::Gaussian,
            seed,
        }
    }

    pub fn preconditioned(precond: Arc<dyn Preconditioner>, seed: u64) -> Self {
        SamplerSpec {
            sampler: Sampler::Preconditioned(precond),
            seed,
        }
    }

    pub fn label(&self) -> String {
        match &self.sampler {
            Sampler::Gaussian => "gaussian".into(),
            Sampler::Preconditioned(p) => format!("preconditioned:{}", p.name()),
        }
    }

    /// Draws an `n x l` sketching matrix.
    pub fn draw(&self, n: usize, l: usize) -> Result<DenseMatrix> {
        match &self.sampler {
            Sampler::Gaussian => Ok(draw_gaussian(n, l, self.seed)),
            Sampler::Preconditioned(p) => draw_preconditioned(n, l, self.seed, p.as_ref()),
        }
    }
}

fn gaussian_column(n: usize, seed: u64, j: usize) -> Vec<f64> {
    let mut rng = ChaCha20Rng::seed_from_u64(seed);
    rng.set_stream(j as u64);
    (0..n).map(|_| StandardNormal.sample(&mut rng)).collect()
}

/// `n x l` matrix of independent standard normal draws.
pub fn draw_gaussian(n: usize, l: usize, seed: u64) -> DenseMatrix {
    let cols: Vec<Vec<f64>> = (0..l).into_par_iter().map(|j| gaussian_column(n, seed, j)).collect();
    DenseMatrix::from_columns(n, &cols)
}

/// `L G` with `G` the Gaussian draw for the same `(n, l, seed)`.
pub fn draw_preconditioned<P: Preconditioner + ?Sized>(
    n: usize,
    l: usize,
    seed: u64,
    precond: &P,
) -> Result<DenseMatrix> {
    if precond.dim() != n {
        return Err(Error::DimensionMismatch {
            context: "preconditioned draw",
            expected: n,
            got: precond.dim(),
        });
    }
    let cols: Vec<Vec<f64>> = (0..l)
        .into_par_iter()
        .map(|j| precond.apply_l(&gaussian_column(n, seed, j)))
        .collect();
    Ok(DenseMatrix::from_columns(n, &cols))
}

/// `L = diag(T)^{-1/2}`.
pub fn jacobi_preconditioner<T: SpdOp + ?Sized>(t: &T) -> Result<DiagonalPreconditioner> {
    let diag = t.materialize()?.diag();
    let mut d = Vec::with_capacity(diag.len());
    for (i, &v) in diag.iter().enumerate() {
        if !(v > 0.0) {
            return Err(Error::NotPositiveDefinite { pivot: i });
        }
        d.push(1.0 / v.sqrt());
    }
    Ok(DiagonalPreconditioner::new(d, "jacobi"))
}

/// `L = L_T⁻ᵀ` from a dense Cholesky factorization of `T`.
pub fn exact_preconditioner<T: SpdOp + ?Sized>(t: &T) -> Result<CholeskyPreconditioner> {
    Ok(CholeskyPreconditioner {
        lt: linalg::cholesky(&t.materialize()?)?,
    })
}
