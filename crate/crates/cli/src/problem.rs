use std::sync::Arc;

use rgsvd::analysis::ErrorMeter;
use rgsvd::matrix_market;
use rgsvd::operators::{DenseOp, DenseSpd};
use rgsvd::testmatrices::{make_minij, make_randsvd_spd, make_test_matrix, SpectrumMode, TestMatrixSpec};
use rgsvd::{linalg, DenseMatrix};

use crate::config::{ExperimentConfig, MatrixSource, WeightSource};
use crate::CliError;

/// One `(A, S, T)` instance with its dense ground truth.
pub struct Problem {
    pub matrix: String,
    pub weights: String,
    pub a: DenseOp,
    pub s: DenseSpd,
    pub t: DenseSpd,
    pub kappa_t: f64,
    pub meter: ErrorMeter,
}

impl Problem {
    pub fn m(&self) -> usize {
        self.a.matrix().rows()
    }

    pub fn n(&self) -> usize {
        self.a.matrix().cols()
    }

    /// Fresh operator views so that counters start at zero.
    pub fn ops(&self) -> (DenseOp, DenseSpd, DenseSpd) {
        (self.a.share(), self.s.share(), self.t.share())
    }
}

pub fn load_matrix(src: &MatrixSource, cfg: &ExperimentConfig) -> Result<DenseMatrix, CliError> {
    match src {
        MatrixSource::Generated(kind) => {
            let mut spec = TestMatrixSpec::new(*kind, cfg.n, cfg.matrix_seed);
            spec.r = cfg.rank;
            make_test_matrix(&spec).map_err(|e| CliError::Usage(format!("--matrix {}: {e}", kind.name())))
        }
        MatrixSource::File(path) => {
            matrix_market::read(path).map_err(|e| CliError::Usage(format!("--matrix {}: {e}", path.display())))
        }
    }
}

/// `S` and `T` for an `m x n` matrix; `kappa` applies to the default `T`.
pub fn load_weights(
    cfg: &ExperimentConfig,
    m: usize,
    n: usize,
    kappa: f64,
) -> Result<(DenseMatrix, DenseMatrix), CliError> {
    match &cfg.weights {
        WeightSource::Default => {
            let t = make_randsvd_spd(n, kappa, SpectrumMode::LogUniform, cfg.weight_seed)
                .map_err(|e| CliError::Usage(format!("--kappa: {e}")))?;
            Ok((make_minij(m), t))
        }
        WeightSource::Identity => Ok((DenseMatrix::identity(m), DenseMatrix::identity(n))),
        WeightSource::Files { s, t } => {
            let read = |p: &std::path::Path| {
                matrix_market::read(p).map_err(|e| CliError::Usage(format!("--weights {}: {e}", p.display())))
            };
            Ok((read(s)?, read(t)?))
        }
    }
}

pub fn build_problem(
    src: &MatrixSource,
    cfg: &ExperimentConfig,
    kappa: f64,
) -> Result<Problem, CliError> {
    let a = load_matrix(src, cfg)?;
    let (m, n) = a.shape();
    let l = cfg.max_l();
    if l > m.min(n) {
        return Err(CliError::Usage(format!(
            "--k-grid/-p: k + p = {l} exceeds min(m, n) = {} for matrix {}",
            m.min(n),
            src.label()
        )));
    }
    let (s, t) = load_weights(cfg, m, n, kappa)?;
    if s.shape() != (m, m) || t.shape() != (n, n) {
        return Err(CliError::Usage(format!(
            "--weights: S must be {m}x{m} and T {n}x{n}, got {:?} and {:?}",
            s.shape(),
            t.shape()
        )));
    }
    let kappa_t = linalg::spd_condition_number(&t);
    let meter = ErrorMeter::new(&a, &s, &t)?;
    Ok(Problem {
        matrix: src.label(),
        weights: cfg.weights.label(),
        a: DenseOp::from_arc(Arc::new(a)),
        s: DenseSpd::new(s)?,
        t: DenseSpd::new(t)?,
        kappa_t,
        meter,
    })
}
