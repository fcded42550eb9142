#![allow(dead_code)]

use rgsvd::linalg;
use rgsvd::sampling::draw_gaussian;
use rgsvd::testmatrices::{make_randsvd_spd, SpectrumMode};
use rgsvd::DenseMatrix;

pub fn gaussian(rows: usize, cols: usize, seed: u64) -> DenseMatrix {
    draw_gaussian(rows, cols, seed)
}

/// SPD matrix with geometric spectrum in `[1/kappa, 1]`.
pub fn spd(n: usize, kappa: f64, seed: u64) -> DenseMatrix {
    make_randsvd_spd(n, kappa, SpectrumMode::Geometric, seed).unwrap()
}

/// `U diag(s) Vᵀ` with Haar factors.
pub fn with_singular_values(m: usize, n: usize, s: &[f64], seed: u64) -> DenseMatrix {
    let (u, _) = linalg::qr_thin(&gaussian(m, s.len(), seed));
    let (v, _) = linalg::qr_thin(&gaussian(n, s.len(), seed ^ 0x9e37_79b9));
    u.scale_columns(s).matmul_t(&v)
}

pub fn rel_diff(a: f64, b: f64) -> f64 {
    (a - b).abs() / a.abs().max(b.abs()).max(f64::MIN_POSITIVE)
}

pub fn max_abs_diff(a: &DenseMatrix, b: &DenseMatrix) -> f64 {
    a.sub(b).max_abs()
}

/// `‖XᵀWX − I‖₂`.
pub fn w_orthogonality(x: &DenseMatrix, w: &DenseMatrix) -> f64 {
    let g = x.t_matmul(&w.matmul(x));
    linalg::spectral_norm(&g.sub(&DenseMatrix::identity(x.cols())))
}

pub fn median(mut v: Vec<f64>) -> f64 {
    v.sort_by(f64::total_cmp);
    let n = v.len();
    if n % 2 == 1 {
        v[n / 2]
    } else {
        0.5 * (v[n / 2 - 1] + v[n / 2])
    }
}
