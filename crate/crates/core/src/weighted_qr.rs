//! Thin QR factorization in a weighted inner product.
//!
//! The factorization first orthonormalizes `Z` in the Euclidean inner product
//! and then runs Cholesky QR on the result, so the Gram matrix that gets
//! factored has the conditioning of `W` restricted to `range(Z)` rather than
//! that of `ZᵀWZ`.

use crate::error::{Error, Result};
use crate::linalg;
use crate::matrix::DenseMatrix;
use crate::operators::SpdOp;

/// Estimated `‖QᵀWQ − I‖₂` above which one refinement pass is run.
pub const REFINE_TRIGGER: f64 = 1e-8;

/// Output of [`weighted_cholqr`]: `Z = Q R` with `QᵀWQ = I`.
#[derive(Debug, Clone)]
pub struct WeightedQrResult {
    pub q: DenseMatrix,
    /// Upper triangular with nonnegative diagonal (positive when `Z` has full rank).
    pub r: DenseMatrix,
    /// `W Q`, assembled from products already computed.
    pub wq: Option<DenseMatrix>,
    /// Number of refinement passes performed (each costs `n` more applies of `W`).
    pub refinements: usize,
    /// Cheap estimate of the orthogonality residual of the last pass.
    pub residual_estimate: f64,
}

/// Weighted CholQR with a Euclidean pre-QR; refines once when the estimated
/// orthogonality residual exceeds [`REFINE_TRIGGER`].
pub fn weighted_cholqr<W: SpdOp + ?Sized>(
    z: &DenseMatrix,
    w: &W,
    want_wq: bool,
) -> Result<WeightedQrResult> {
    let first = single_pass(z, w, want_wq)?;
    if first.residual_estimate > REFINE_TRIGGER {
        log::debug!(
            "weighted CholQR refinement: estimated residual {:.2e}",
            first.residual_estimate
        );
        reorthogonalize(first, w)
    } else {
        Ok(first)
    }
}

/// Runs one more weighted CholQR pass on `res.q` and composes the factors.
pub fn reorthogonalize<W: SpdOp + ?Sized>(res: WeightedQrResult, w: &W) -> Result<WeightedQrResult> {
    let want_wq = res.wq.is_some();
    let second = single_pass(&res.q, w, want_wq)
        .map_err(|e| e.in_stage("reorthogonalization"))?;
    Ok(WeightedQrResult {
        q: second.q,
        r: second.r.matmul(&res.r),
        wq: second.wq,
        refinements: res.refinements + 1,
        residual_estimate: second.residual_estimate,
    })
}

fn single_pass<W: SpdOp + ?Sized>(z: &DenseMatrix, w: &W, want_wq: bool) -> Result<WeightedQrResult> {
    let (m, n) = z.shape();
    if m < n {
        return Err(Error::DimensionMismatch {
            context: "weighted CholQR needs rows >= cols",
            expected: n,
            got: m,
        });
    }
    if w.dim() != m {
        return Err(Error::DimensionMismatch {
            context: "weighted CholQR weight dimension",
            expected: m,
            got: w.dim(),
        });
    }
    let (qz, rz) = linalg::qr_thin(z);
    let qw = w.apply_block(&qz)?;
    let gram = qz.t_matmul(&qw).symmetrized();
    let lw = linalg::cholesky(&gram).map_err(|e| match e {
        Error::NotPositiveDefinite { pivot } => Error::RankDeficient {
            column: pivot,
            stage: "weighted CholQR Gram factorization".into(),
        },
        other => other,
    })?;
    let rw = lw.transpose();
    let q = linalg::right_solve_upper(&qz, &rw);
    let wq = want_wq.then(|| linalg::right_solve_upper(&qw, &rw));
    let residual_estimate = f64::EPSILON * linalg::spd_condition_number(&gram);
    Ok(WeightedQrResult {
        q,
        r: rw.matmul(&rz),
        wq,
        refinements: 0,
        residual_estimate,
    })
}

/// `‖QᵀWQ − I‖₂`, costing one application of `W` per column.
pub fn orthogonality_residual<W: SpdOp + ?Sized>(q: &DenseMatrix, w: &W) -> Result<f64> {
    let wq = w.apply_block(q)?;
    let g = q.t_matmul(&wq).symmetrized();
    Ok(linalg::spectral_norm(&g.sub(&DenseMatrix::identity(q.cols()))))
}
