//! Dense kernels: Householder QR, Cholesky, triangular solves, one-sided
//! Jacobi SVD and a symmetric eigensolver.
//!
//! The SVD is a Hestenes one-sided Jacobi iteration. It is slow compared with
//! bidiagonalization but delivers singular values with high relative accuracy,
//! which the small projected problems and the reference oracle rely on.
//! Symmetric eigenproblems go through `nalgebra`.

use crate::error::{Error, Result};
use crate::matrix::{dot, norm2, DenseMatrix};

/// Lower Cholesky factor `L` with `W = L Lᵀ`.
///
/// Fails with the index of the first nonpositive pivot.
pub fn cholesky(w: &DenseMatrix) -> Result<DenseMatrix> {
    let n = w.rows();
    if w.cols() != n {
        return Err(Error::DimensionMismatch {
            context: "cholesky (square input)",
            expected: n,
            got: w.cols(),
        });
    }
    let mut l = DenseMatrix::zeros(n, n);
    for j in 0..n {
        let lj = l.row(j)[..j].to_vec();
        let d = w.get(j, j) - dot(&lj, &lj);
        if !(d > 0.0) || !d.is_finite() {
            return Err(Error::NotPositiveDefinite { pivot: j });
        }
        let djj = d.sqrt();
        l.set(j, j, djj);
        for i in (j + 1)..n {
            let s = w.get(i, j) - dot(&l.row(i)[..j], &lj);
            l.set(i, j, s / djj);
        }
    }
    Ok(l)
}

/// Solves `L x = b` for lower-triangular `L`.
pub fn solve_lower(l: &DenseMatrix, b: &[f64]) -> Vec<f64> {
    let n = l.rows();
    let mut x = b.to_vec();
    for i in 0..n {
        let s = dot(&l.row(i)[..i], &x[..i]);
        x[i] = (x[i] - s) / l.get(i, i);
    }
    x
}

/// Solves `Lᵀ x = b` for lower-triangular `L`.
pub fn solve_lower_t(l: &DenseMatrix, b: &[f64]) -> Vec<f64> {
    let n = l.rows();
    let mut x = b.to_vec();
    for i in (0..n).rev() {
        x[i] /= l.get(i, i);
        let xi = x[i];
        for (k, lik) in l.row(i)[..i].iter().enumerate() {
            x[k] -= lik * xi;
        }
    }
    x
}

/// Solves `R x = b` for upper-triangular `R`.
pub fn solve_upper(r: &DenseMatrix, b: &[f64]) -> Vec<f64> {
    let n = r.rows();
    let mut x = b.to_vec();
    for i in (0..n).rev() {
        let s = dot(&r.row(i)[i + 1..], &x[i + 1..]);
        x[i] = (x[i] - s) / r.get(i, i);
    }
    x
}

/// `M R⁻¹` for upper-triangular `R`, computed row by row.
pub fn right_solve_upper(m: &DenseMatrix, r: &DenseMatrix) -> DenseMatrix {
    let n = r.rows();
    assert_eq!(m.cols(), n);
    let mut out = m.clone();
    for i in 0..m.rows() {
        // x R = m_i  <=>  Rᵀ xᵀ = m_iᵀ (forward substitution on columns of R)
        let row = out.row_mut(i);
        for j in 0..n {
            let mut s = row[j];
            for k in 0..j {
                s -= row[k] * r.get(k, j);
            }
            row[j] = s / r.get(j, j);
        }
    }
    out
}

/// `L⁻¹ M` for lower-triangular `L`, column by column.
pub fn left_solve_lower(l: &DenseMatrix, m: &DenseMatrix) -> DenseMatrix {
    let cols: Vec<Vec<f64>> = (0..m.cols()).map(|j| solve_lower(l, &m.col(j))).collect();
    DenseMatrix::from_columns(m.rows(), &cols)
}

/// `L⁻ᵀ M` for lower-triangular `L`.
pub fn left_solve_lower_t(l: &DenseMatrix, m: &DenseMatrix) -> DenseMatrix {
    let cols: Vec<Vec<f64>> = (0..m.cols()).map(|j| solve_lower_t(l, &m.col(j))).collect();
    DenseMatrix::from_columns(m.rows(), &cols)
}

/// Householder reflectors of a tall matrix, kept in column-major form.
struct Householder {
    m: usize,
    /// Reflector vectors, `vs[k]` acts on rows `k..m`.
    vs: Vec<Vec<f64>>,
    betas: Vec<f64>,
    r: DenseMatrix,
}

fn householder(z: &DenseMatrix) -> Householder {
    let (m, n) = z.shape();
    assert!(m >= n, "householder QR needs rows >= cols ({m} < {n})");
    let mut cols = z.columns();
    let mut vs = Vec::with_capacity(n);
    let mut betas = Vec::with_capacity(n);
    for k in 0..n {
        let x = &cols[k][k..];
        let xnorm = norm2(x);
        let mut v = x.to_vec();
        let alpha = if x[0] >= 0.0 { -xnorm } else { xnorm };
        v[0] -= alpha;
        let vnorm2 = dot(&v, &v);
        let beta = if vnorm2 == 0.0 { 0.0 } else { 2.0 / vnorm2 };
        if beta != 0.0 {
            for col in cols.iter_mut().skip(k) {
                let seg = &mut col[k..];
                let w = beta * dot(&v, seg);
                for (s, vi) in seg.iter_mut().zip(&v) {
                    *s -= w * vi;
                }
            }
        }
        vs.push(v);
        betas.push(beta);
    }
    let r = DenseMatrix::from_fn(n, n, |i, j| if i <= j { cols[j][i] } else { 0.0 });
    Householder { m, vs, betas, r }
}

impl Householder {
    /// Applies `Q = H_0 H_1 ... H_{n-1}` to the unit vectors `e_0..e_{ncols}`.
    fn form_q(&self, ncols: usize) -> Vec<Vec<f64>> {
        let mut out = Vec::with_capacity(ncols);
        for j in 0..ncols {
            let mut e = vec![0.0; self.m];
            e[j] = 1.0;
            for k in (0..self.vs.len()).rev() {
                let beta = self.betas[k];
                if beta == 0.0 {
                    continue;
                }
                let v = &self.vs[k];
                let seg = &mut e[k..];
                let w = beta * dot(v, seg);
                for (s, vi) in seg.iter_mut().zip(v) {
                    *s -= w * vi;
                }
            }
            out.push(e);
        }
        out
    }
}

/// Thin QR `Z = Q R` with `R` having a nonnegative diagonal.
pub fn qr_thin(z: &DenseMatrix) -> (DenseMatrix, DenseMatrix) {
    let (m, n) = z.shape();
    let h = householder(z);
    let mut q_cols = h.form_q(n);
    let mut r = h.r;
    for j in 0..n {
        if r.get(j, j) < 0.0 {
            for v in r.row_mut(j) {
                *v = -*v;
            }
            for v in q_cols[j].iter_mut() {
                *v = -*v;
            }
        }
    }
    (DenseMatrix::from_columns(m, &q_cols), r)
}

/// Extends `m x r` orthonormal columns to an `m x m` orthogonal matrix.
///
/// The first `r` columns of the result are the input columns.
pub fn complete_orthonormal(thin: &DenseMatrix) -> DenseMatrix {
    let (m, r) = thin.shape();
    if r == m {
        return thin.clone();
    }
    let h = householder(thin);
    let full = h.form_q(m);
    let mut cols = thin.columns();
    cols.extend(full.into_iter().skip(r));
    DenseMatrix::from_columns(m, &cols)
}

/// Thin SVD `M = U diag(s) Vᵀ` with `s` sorted nonincreasing.
#[derive(Debug, Clone)]
pub struct Svd {
    /// `m x r` with orthonormal columns, `r = min(m, n)`.
    pub u: DenseMatrix,
    pub s: Vec<f64>,
    /// `n x r` with orthonormal columns.
    pub v: DenseMatrix,
}

const JACOBI_MAX_SWEEPS: usize = 80;

/// One-sided Jacobi on the columns of a square-or-tall matrix held column-major.
/// Returns the rotated columns and, when requested, the accumulated rotations.
fn jacobi_columns(mut a: Vec<Vec<f64>>, accumulate: bool) -> (Vec<Vec<f64>>, Option<Vec<Vec<f64>>>) {
    let n = a.len();
    let mut v: Option<Vec<Vec<f64>>> = accumulate.then(|| {
        (0..n)
            .map(|j| {
                let mut e = vec![0.0; n];
                e[j] = 1.0;
                e
            })
            .collect()
    });
    let tol = f64::EPSILON;
    for _sweep in 0..JACOBI_MAX_SWEEPS {
        let mut rotated = false;
        for i in 0..n {
            for j in (i + 1)..n {
                let (alpha, beta, gamma) = {
                    let (ai, aj) = (&a[i], &a[j]);
                    (dot(ai, ai), dot(aj, aj), dot(ai, aj))
                };
                if gamma == 0.0 || gamma.abs() <= tol * (alpha * beta).sqrt() {
                    continue;
                }
                rotated = true;
                let zeta = (beta - alpha) / (2.0 * gamma);
                let t = zeta.signum() / (zeta.abs() + (1.0 + zeta * zeta).sqrt());
                let c = 1.0 / (1.0 + t * t).sqrt();
                let s = c * t;
                rotate_pair(&mut a, i, j, c, s);
                if let Some(v) = v.as_mut() {
                    rotate_pair(v, i, j, c, s);
                }
            }
        }
        if !rotated {
            break;
        }
    }
    (a, v)
}

#[inline]
fn rotate_pair(cols: &mut [Vec<f64>], i: usize, j: usize, c: f64, s: f64) {
    let (lo, hi) = cols.split_at_mut(j);
    let (ci, cj) = (&mut lo[i], &mut hi[0]);
    for (x, y) in ci.iter_mut().zip(cj.iter_mut()) {
        let (xi, yj) = (*x, *y);
        *x = c * xi - s * yj;
        *y = s * xi + c * yj;
    }
}

/// Columns of `R` (square upper factor) or of `M` itself, ready for Jacobi.
fn tall_reduce(m: &DenseMatrix) -> (Option<DenseMatrix>, Vec<Vec<f64>>) {
    let (rows, cols) = m.shape();
    if rows > cols {
        let (q, r) = qr_thin(m);
        (Some(q), r.columns())
    } else {
        (None, m.columns())
    }
}

/// Thin SVD by one-sided Jacobi.
pub fn svd(m: &DenseMatrix) -> Svd {
    let (rows, cols) = m.shape();
    if rows < cols {
        let t = svd(&m.transpose());
        return Svd {
            u: t.v,
            s: t.s,
            v: t.u,
        };
    }
    if cols == 0 {
        return Svd {
            u: DenseMatrix::zeros(rows, 0),
            s: Vec::new(),
            v: DenseMatrix::zeros(0, 0),
        };
    }
    let (q, a0) = tall_reduce(m);
    let inner_rows = a0[0].len();
    let (a, v) = jacobi_columns(a0, true);
    let v = v.expect("rotations accumulated");
    let norms: Vec<f64> = a.iter().map(|c| norm2(c)).collect();
    let mut order: Vec<usize> = (0..cols).collect();
    order.sort_by(|&x, &y| norms[y].total_cmp(&norms[x]).then(x.cmp(&y)));

    let s: Vec<f64> = order.iter().map(|&j| norms[j]).collect();
    let v_cols: Vec<Vec<f64>> = order.iter().map(|&j| v[j].clone()).collect();
    let nonzero = s.iter().take_while(|&&x| x > 0.0).count();
    let mut u_cols: Vec<Vec<f64>> = order
        .iter()
        .take(nonzero)
        .map(|&j| a[j].iter().map(|x| x / norms[j]).collect())
        .collect();
    if nonzero < cols {
        let partial = DenseMatrix::from_columns(inner_rows, &u_cols);
        let full = complete_orthonormal_padded(&partial, inner_rows);
        u_cols.extend(full.columns().into_iter().skip(nonzero).take(cols - nonzero));
    }
    let mut u = DenseMatrix::from_columns(inner_rows, &u_cols);
    if let Some(q) = q {
        u = q.matmul(&u);
    }
    Svd {
        u,
        s,
        v: DenseMatrix::from_columns(cols, &v_cols),
    }
}

/// Completion that also accepts zero input columns.
fn complete_orthonormal_padded(partial: &DenseMatrix, m: usize) -> DenseMatrix {
    if partial.cols() == 0 {
        return DenseMatrix::identity(m);
    }
    complete_orthonormal(partial)
}

/// Singular values only (nonincreasing).
pub fn singular_values(m: &DenseMatrix) -> Vec<f64> {
    let (rows, cols) = m.shape();
    if rows < cols {
        return singular_values(&m.transpose());
    }
    if cols == 0 {
        return Vec::new();
    }
    let (_, a0) = tall_reduce(m);
    let (a, _) = jacobi_columns(a0, false);
    let mut s: Vec<f64> = a.iter().map(|c| norm2(c)).collect();
    s.sort_by(|x, y| y.total_cmp(x));
    s
}

/// Largest singular value.
///
/// Uses a bidiagonalization SVD: absolute accuracy `O(ε‖M‖)` is all a norm
/// needs, and it is several times faster than the Jacobi sweep.
pub fn spectral_norm(m: &DenseMatrix) -> f64 {
    if m.rows() == 0 || m.cols() == 0 {
        return 0.0;
    }
    m.to_nalgebra().singular_values().max()
}

/// Eigen-decomposition of a symmetric matrix, eigenvalues nonincreasing and
/// eigenvectors as orthonormal columns.
pub fn sym_eigen(m: &DenseMatrix) -> (Vec<f64>, DenseMatrix) {
    let n = m.rows();
    assert_eq!(m.cols(), n, "sym_eigen needs a square matrix");
    if n == 0 {
        return (Vec::new(), DenseMatrix::zeros(0, 0));
    }
    let eig = nalgebra::SymmetricEigen::new(m.symmetrized().to_nalgebra());
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| eig.eigenvalues[b].total_cmp(&eig.eigenvalues[a]));
    let values = order.iter().map(|&j| eig.eigenvalues[j]).collect();
    let vectors = DenseMatrix::from_fn(n, n, |i, j| eig.eigenvectors[(i, order[j])]);
    (values, vectors)
}

/// Eigenvalues of a symmetric matrix, nonincreasing.
pub fn sym_eigenvalues(m: &DenseMatrix) -> Vec<f64> {
    let n = m.rows();
    if n == 0 {
        return Vec::new();
    }
    let mut vals: Vec<f64> = m.symmetrized().to_nalgebra().symmetric_eigenvalues().iter().copied().collect();
    vals.sort_by(|a, b| b.total_cmp(a));
    vals
}

/// Spectral condition number of a symmetric positive definite matrix.
pub fn spd_condition_number(m: &DenseMatrix) -> f64 {
    let vals = sym_eigenvalues(m);
    match (vals.first(), vals.last()) {
        (Some(&hi), Some(&lo)) if lo > 0.0 => hi / lo,
        _ => f64::INFINITY,
    }
}

/// Symmetric positive semidefinite square root via eigendecomposition.
pub fn sym_sqrt(m: &DenseMatrix) -> DenseMatrix {
    let (vals, vecs) = sym_eigen(m);
    let d: Vec<f64> = vals.iter().map(|v| v.max(0.0).sqrt()).collect();
    vecs.scale_columns(&d).matmul_t(&vecs)
}

/// Inverse square root of a symmetric positive definite matrix.
pub fn sym_inv_sqrt(m: &DenseMatrix) -> DenseMatrix {
    let (vals, vecs) = sym_eigen(m);
    let d: Vec<f64> = vals.iter().map(|v| 1.0 / v.sqrt()).collect();
    vecs.scale_columns(&d).matmul_t(&vecs)
}

/// Moore–Penrose pseudoinverse with singular values below `rel_tol * s_1`
/// treated as zero. Returns the pseudoinverse and the numerical rank.
pub fn pinv(m: &DenseMatrix, rel_tol: f64) -> (DenseMatrix, usize) {
    let f = svd(m);
    let cutoff = rel_tol * f.s.first().copied().unwrap_or(0.0);
    let rank = f.s.iter().filter(|&&x| x > cutoff && x > 0.0).count();
    let inv: Vec<f64> = f
        .s
        .iter()
        .enumerate()
        .map(|(i, &x)| if i < rank { 1.0 / x } else { 0.0 })
        .collect();
    (f.v.scale_columns(&inv).matmul_t(&f.u), rank)
}

/// `‖QᵀQ − I‖₂` for a matrix with (supposedly) orthonormal columns.
pub fn orthogonality_residual(q: &DenseMatrix) -> f64 {
    let g = q.t_matmul(q);
    spectral_norm(&g.sub(&DenseMatrix::identity(g.rows())))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn sample(rows: usize, cols: usize, seed: u64) -> DenseMatrix {
        // small LCG, good enough for shape tests
        let mut state = seed.wrapping_mul(6364136223846793005).wrapping_add(1442695040888963407);
        DenseMatrix::from_fn(rows, cols, |_, _| {
            state = state.wrapping_mul(6364136223846793005).wrapping_add(1442695040888963407);
            ((state >> 11) as f64 / (1u64 << 53) as f64) - 0.5
        })
    }

    #[test]
    fn cholesky_reports_pivot() {
        let w = DenseMatrix::from_rows(&[&[4.0, 2.0, 0.0], &[2.0, 1.0, 0.0], &[0.0, 0.0, 1.0]]);
        assert!(matches!(cholesky(&w), Err(Error::NotPositiveDefinite { pivot: 1 })));
        let w = DenseMatrix::from_rows(&[&[4.0, 2.0], &[2.0, 3.0]]);
        let l = cholesky(&w).unwrap();
        assert!(l.matmul_t(&l).sub(&w).max_abs() < 1e-15);
    }

    #[test]
    fn triangular_solves() {
        let w = DenseMatrix::from_rows(&[&[4.0, 2.0, 1.0], &[2.0, 5.0, 3.0], &[1.0, 3.0, 6.0]]);
        let l = cholesky(&w).unwrap();
        let b = [1.0, -2.0, 0.5];
        let x = solve_lower_t(&l, &solve_lower(&l, &b));
        let wb = w.matvec(&x);
        for (a, e) in wb.iter().zip(&b) {
            assert!((a - e).abs() < 1e-14);
        }
        let r = l.transpose();
        let y = solve_upper(&r, &b);
        let ry = r.matvec(&y);
        for (a, e) in ry.iter().zip(&b) {
            assert!((a - e).abs() < 1e-14);
        }
        let m = sample(4, 3, 3);
        let mr = right_solve_upper(&m, &r).matmul(&r);
        assert!(mr.sub(&m).max_abs() < 1e-14);
    }

    #[test]
    fn qr_thin_factorizes() {
        let z = sample(9, 4, 1);
        let (q, r) = qr_thin(&z);
        assert!(q.matmul(&r).sub(&z).frobenius_norm() < 1e-14 * z.frobenius_norm());
        assert!(orthogonality_residual(&q) < 1e-14);
        assert!(r.is_upper_triangular());
        assert!(r.diag().iter().all(|&d| d >= 0.0));
    }

    #[test]
    fn completion_is_orthogonal() {
        let (q, _) = qr_thin(&sample(7, 3, 5));
        let full = complete_orthonormal(&q);
        assert_eq!(full.shape(), (7, 7));
        assert!(orthogonality_residual(&full) < 1e-14);
        assert_eq!(full.columns_range(0..3), q);
    }

    #[test]
    fn svd_reconstructs_all_shapes() {
        for &(m, n) in &[(6, 6), (9, 4), (4, 9), (1, 5), (5, 1)] {
            let a = sample(m, n, (m * 31 + n) as u64);
            let f = svd(&a);
            let rec = f.u.scale_columns(&f.s).matmul_t(&f.v);
            assert!(rec.sub(&a).frobenius_norm() < 1e-14 * a.frobenius_norm().max(1.0), "{m}x{n}");
            assert!(orthogonality_residual(&f.u) < 1e-14);
            assert!(orthogonality_residual(&f.v) < 1e-14);
            assert!(f.s.windows(2).all(|w| w[0] >= w[1]));
        }
    }

    #[test]
    fn svd_of_rank_deficient_keeps_orthonormal_factors() {
        let x = sample(6, 2, 11);
        let a = x.matmul_t(&sample(5, 2, 12));
        let f = svd(&a);
        assert!(f.s[2] < 1e-15 * f.s[0]);
        assert!(orthogonality_residual(&f.u) < 1e-13);
        let z = DenseMatrix::zeros(4, 3);
        let f = svd(&z);
        assert_eq!(f.s, vec![0.0; 3]);
        assert!(orthogonality_residual(&f.u) < 1e-15);
    }

    #[test]
    fn svd_relative_accuracy_on_graded_diagonal() {
        let d = [1.0, 1e-5, 1e-10, 1e-15];
        let (q1, _) = qr_thin(&sample(4, 4, 21));
        let (q2, _) = qr_thin(&sample(4, 4, 22));
        let a = q1.scale_columns(&d).matmul_t(&q2);
        let s = singular_values(&a);
        assert!((s[0] - 1.0).abs() < 1e-14);
        assert!((s[1] - 1e-5).abs() < 1e-12 * 1e-5 * 1e5);
    }

    #[test]
    fn eigen_sorted_and_orthonormal() {
        let b = sample(5, 5, 9);
        let m = b.t_matmul(&b);
        let (vals, vecs) = sym_eigen(&m);
        assert!(vals.windows(2).all(|w| w[0] >= w[1]));
        let rec = vecs.scale_columns(&vals).matmul_t(&vecs);
        assert!(rec.sub(&m).max_abs() < 1e-13);
        let s = sym_sqrt(&m);
        assert!(s.matmul(&s).sub(&m).max_abs() < 1e-13);
    }

    #[test]
    fn pinv_of_wide_matrix() {
        let a = sample(3, 6, 4);
        let (p, rank) = pinv(&a, 1e-12);
        assert_eq!(rank, 3);
        assert!(a.matmul(&p).sub(&DenseMatrix::identity(3)).max_abs() < 1e-13);
    }
}
