//! Synthetic test problems: four matrices with different singular value
//! decay, the `minij` weight, and SPD matrices with a prescribed condition
//! number.

use std::fmt;
use std::str::FromStr;

use rand::seq::index::sample;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha20Rng;

use crate::error::{Error, Result};
use crate::linalg;
use crate::matrix::DenseMatrix;
use crate::sampling::draw_gaussian;

/// Nonzero fraction of the sparse factors in [`TestMatrixKind::ControlledGap`].
pub const SPARSE_DENSITY: f64 = 0.025;

/// Seed of the default `T` weight.
pub const DEFAULT_WEIGHT_SEED: u64 = 20_200_101;

/// Condition number of the default `T` weight.
pub const DEFAULT_WEIGHT_KAPPA: f64 = 1e4;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum TestMatrixKind {
    /// `Σ_{j≤r} (gap/j) x_j y_jᵀ + Σ_{j>r} (1/j) x_j y_jᵀ` with sparse nonnegative factors.
    ControlledGap,
    /// Rank-`r` block identity plus symmetric Gaussian noise.
    LowRankNoise,
    /// `diag(1, …, 1, 2^{-d}, 3^{-d}, …)` with `r` leading ones.
    LowRankDecay,
    /// `diag(base^1, …, base^n)`.
    Decay,
}

impl TestMatrixKind {
    pub const ALL: [TestMatrixKind; 4] = [
        TestMatrixKind::ControlledGap,
        TestMatrixKind::LowRankNoise,
        TestMatrixKind::LowRankDecay,
        TestMatrixKind::Decay,
    ];

    pub fn name(self) -> &'static str {
        match self {
            TestMatrixKind::ControlledGap => "controlled_gap",
            TestMatrixKind::LowRankNoise => "lowrank_noise",
            TestMatrixKind::LowRankDecay => "lowrank_decay",
            TestMatrixKind::Decay => "decay",
        }
    }
}

impl fmt::Display for TestMatrixKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for TestMatrixKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        TestMatrixKind::ALL
            .into_iter()
            .find(|k| k.name() == s)
            .ok_or_else(|| Error::InvalidConfig(format!("unknown test matrix '{s}'")))
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct TestMatrixSpec {
    pub kind: TestMatrixKind,
    pub n: usize,
    pub r: usize,
    pub seed: u64,
    pub gap: f64,
    pub noise: f64,
    pub d: f64,
    pub base: f64,
}

impl TestMatrixSpec {
    pub fn new(kind: TestMatrixKind, n: usize, seed: u64) -> Self {
        TestMatrixSpec {
            kind,
            n,
            r: 15,
            seed,
            gap: 10.0,
            noise: 1e-2,
            d: 1.0,
            base: 0.9,
        }
    }
}

fn sparse_factor(n: usize, nnz: usize, seed: u64, stream: u64) -> Vec<(usize, f64)> {
    let mut rng = ChaCha20Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    let mut idx = sample(&mut rng, n, nnz).into_vec();
    idx.sort_unstable();
    idx.into_iter().map(|i| (i, rng.random::<f64>())).collect()
}

pub fn make_test_matrix(spec: &TestMatrixSpec) -> Result<DenseMatrix> {
    let (n, r) = (spec.n, spec.r);
    if n < r || n == 0 {
        return Err(Error::InvalidConfig(format!(
            "test matrix size {n} must be positive and at least the rank parameter {r}"
        )));
    }
    Ok(match spec.kind {
        TestMatrixKind::ControlledGap => {
            let nnz = ((SPARSE_DENSITY * n as f64).round() as usize).clamp(1, n);
            let mut a = DenseMatrix::zeros(n, n);
            for j in 1..=n {
                let weight = if j <= r { spec.gap / j as f64 } else { 1.0 / j as f64 };
                let x = sparse_factor(n, nnz, spec.seed, 2 * j as u64);
                let y = sparse_factor(n, nnz, spec.seed, 2 * j as u64 + 1);
                for &(i, xi) in &x {
                    for &(k, yk) in &y {
                        a.set(i, k, a.get(i, k) + weight * xi * yk);
                    }
                }
            }
            a
        }
        TestMatrixKind::LowRankNoise => {
            let g = draw_gaussian(n, n, spec.seed);
            let scale = (spec.noise * r as f64 / (2.0 * (n * n) as f64)).sqrt();
            DenseMatrix::from_fn(n, n, |i, j| {
                let block = if i == j && i < r { 1.0 } else { 0.0 };
                block + scale * (g.get(i, j) + g.get(j, i))
            })
        }
        TestMatrixKind::LowRankDecay => {
            let d: Vec<f64> = (0..n)
                .map(|i| if i < r { 1.0 } else { ((i - r + 2) as f64).powf(-spec.d) })
                .collect();
            DenseMatrix::from_diag(&d)
        }
        TestMatrixKind::Decay => {
            let d: Vec<f64> = (1..=n).map(|i| spec.base.powi(i as i32)).collect();
            DenseMatrix::from_diag(&d)
        }
    })
}

/// `W_{ij} = min(i, j)` with 1-based indices.
pub fn make_minij(n: usize) -> DenseMatrix {
    DenseMatrix::from_fn(n, n, |i, j| (i.min(j) + 1) as f64)
}

/// Eigenvalue distribution for [`make_randsvd_spd`], all spanning `[1/κ, 1]`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SpectrumMode {
    /// One eigenvalue 1, the rest `1/κ`.
    OneLarge,
    /// One eigenvalue `1/κ`, the rest 1.
    OneSmall,
    /// Geometric progression.
    Geometric,
    /// Arithmetic progression.
    Arithmetic,
    /// Random with uniformly distributed logarithm; endpoints pinned so the
    /// condition number is exact.
    LogUniform,
}

impl FromStr for SpectrumMode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Ok(match s {
            "1" | "one_large" => SpectrumMode::OneLarge,
            "2" | "one_small" => SpectrumMode::OneSmall,
            "3" | "geometric" => SpectrumMode::Geometric,
            "4" | "arithmetic" => SpectrumMode::Arithmetic,
            "5" | "log_uniform" => SpectrumMode::LogUniform,
            other => return Err(Error::InvalidConfig(format!("unknown spectrum mode '{other}'"))),
        })
    }
}

fn spectrum(n: usize, kappa: f64, mode: SpectrumMode, seed: u64) -> Vec<f64> {
    let small = 1.0 / kappa;
    if n == 1 {
        return vec![1.0];
    }
    let last = (n - 1) as f64;
    match mode {
        SpectrumMode::OneLarge => (0..n).map(|i| if i == 0 { 1.0 } else { small }).collect(),
        SpectrumMode::OneSmall => (0..n).map(|i| if i == n - 1 { small } else { 1.0 }).collect(),
        SpectrumMode::Geometric => (0..n).map(|i| small.powf(i as f64 / last)).collect(),
        SpectrumMode::Arithmetic => (0..n).map(|i| 1.0 - (1.0 - small) * i as f64 / last).collect(),
        SpectrumMode::LogUniform => {
            let mut rng = ChaCha20Rng::seed_from_u64(seed);
            rng.set_stream(u64::MAX);
            let mut d: Vec<f64> = (0..n).map(|_| small.powf(rng.random::<f64>())).collect();
            d[0] = 1.0;
            d[n - 1] = small;
            d
        }
    }
}

/// `Q D Qᵀ` with Haar-distributed `Q` and eigenvalues in `[1/κ, 1]`.
/// Assembled so that the result is exactly symmetric.
pub fn make_randsvd_spd(n: usize, kappa: f64, mode: SpectrumMode, seed: u64) -> Result<DenseMatrix> {
    if !(kappa >= 1.0) || !kappa.is_finite() {
        return Err(Error::InvalidConfig(format!("condition number must be >= 1, got {kappa}")));
    }
    let d = spectrum(n, kappa, mode, seed);
    let (q, _) = linalg::qr_thin(&draw_gaussian(n, n, seed));
    let qd = q.scale_columns(&d);
    let full = qd.matmul_t(&q);
    Ok(DenseMatrix::from_fn(n, n, |i, j| if i <= j { full.get(i, j) } else { full.get(j, i) }))
}

/// `S = minij(n)` and a log-uniform `T` with condition number `kappa`.
pub fn default_weights(n: usize, kappa: f64, seed: u64) -> Result<(DenseMatrix, DenseMatrix)> {
    Ok((make_minij(n), make_randsvd_spd(n, kappa, SpectrumMode::LogUniform, seed)?))
}

/// Number of singular values above `max(m, n)·ε·s₁`.
pub fn numerical_rank(a: &DenseMatrix) -> usize {
    let s = linalg::singular_values(a);
    let top = s.first().copied().unwrap_or(0.0);
    let tol = a.rows().max(a.cols()) as f64 * f64::EPSILON * top;
    s.iter().filter(|&&x| x > tol).count()
}
