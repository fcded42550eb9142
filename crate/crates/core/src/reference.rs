//! Exact dense GSVD through the Cholesky transform, used as ground truth.

use crate::error::{Error, Result};
use crate::linalg;
use crate::matrix::DenseMatrix;
use crate::operators::transformed;

/// Largest dimension the dense oracle accepts.
pub const ORACLE_LIMIT: usize = 2000;

/// Full GSVD `A = U Σ Vᵀ T` with `UᵀSU = I` (m x m) and `VᵀTV = I` (n x n).
#[derive(Debug, Clone)]
pub struct ExactGsvd {
    pub u: DenseMatrix,
    /// Nonincreasing, length `min(m, n)`.
    pub sigma: Vec<f64>,
    pub v: DenseMatrix,
    /// Lower Cholesky factors of `S` and `T`, reused by error measurements.
    pub ls: DenseMatrix,
    pub lt: DenseMatrix,
}

impl ExactGsvd {
    /// `σ_j` with the convention `σ_j = 0` past the end of the spectrum.
    pub fn sigma_at(&self, j: usize) -> f64 {
        self.sigma.get(j).copied().unwrap_or(0.0)
    }

    /// Leading `k` columns of `V`.
    pub fn v_k(&self, k: usize) -> DenseMatrix {
        self.v.columns_range(0..k)
    }

    /// Trailing columns of `V`.
    pub fn v_perp(&self, k: usize) -> DenseMatrix {
        self.v.columns_range(k..self.v.cols())
    }

    pub fn u_k(&self, k: usize) -> DenseMatrix {
        self.u.columns_range(0..k)
    }
}

fn check_size(rows: usize, cols: usize) -> Result<()> {
    if rows > ORACLE_LIMIT || cols > ORACLE_LIMIT {
        return Err(Error::OracleTooLarge {
            rows,
            cols,
            limit: ORACLE_LIMIT,
        });
    }
    Ok(())
}

fn check_weights(a: &DenseMatrix, s: &DenseMatrix, t: &DenseMatrix) -> Result<()> {
    let (m, n) = a.shape();
    if s.shape() != (m, m) {
        return Err(Error::DimensionMismatch {
            context: "oracle S dimension",
            expected: m,
            got: s.rows(),
        });
    }
    if t.shape() != (n, n) {
        return Err(Error::DimensionMismatch {
            context: "oracle T dimension",
            expected: n,
            got: t.rows(),
        });
    }
    Ok(())
}

/// Dense GSVD: SVD of `L_Sᵀ A L_T⁻ᵀ = W Σ Zᵀ`, then `U = L_S⁻ᵀ W`, `V = L_T⁻ᵀ Z`.
pub fn exact_gsvd(a: &DenseMatrix, s: &DenseMatrix, t: &DenseMatrix) -> Result<ExactGsvd> {
    let (m, n) = a.shape();
    check_size(m, n)?;
    check_weights(a, s, t)?;
    let ls = linalg::cholesky(&s.symmetrized())?;
    let lt = linalg::cholesky(&t.symmetrized())?;
    let f = linalg::svd(&transformed(a, &ls, &lt));
    let w = linalg::complete_orthonormal(&f.u);
    let z = linalg::complete_orthonormal(&f.v);
    Ok(ExactGsvd {
        u: linalg::left_solve_lower_t(&ls, &w),
        sigma: f.s,
        v: linalg::left_solve_lower_t(&lt, &z),
        ls,
        lt,
    })
}

/// Generalized singular values from `S^{1/2} A T^{-1/2}`, with both square
/// roots taken from symmetric eigendecompositions and the singular values
/// from a bidiagonalization SVD. Independent of [`exact_gsvd`]'s Cholesky
/// transform and Jacobi SVD.
pub fn sigma_via_square_roots(a: &DenseMatrix, s: &DenseMatrix, t: &DenseMatrix) -> Result<Vec<f64>> {
    check_size(a.rows(), a.cols())?;
    check_weights(a, s, t)?;
    let m = linalg::sym_sqrt(s).matmul(a).matmul(&linalg::sym_inv_sqrt(t));
    let mut vals: Vec<f64> = m.to_nalgebra().singular_values().iter().copied().collect();
    vals.sort_by(|x, y| y.total_cmp(x));
    Ok(vals)
}

/// Realized ratios of the two-sided inequality
/// `s_j(A)/√(‖S⁻¹‖‖T‖) ≤ σ_j ≤ √(‖S‖‖T⁻¹‖) s_j(A)`.
#[derive(Debug, Clone)]
pub struct SandwichReport {
    pub plain: Vec<f64>,
    pub sigma: Vec<f64>,
    pub lower: Vec<f64>,
    pub upper: Vec<f64>,
    /// Indices where either side fails beyond `1e-12·σ₁`.
    pub violations: Vec<usize>,
}

impl SandwichReport {
    pub fn holds(&self) -> bool {
        self.violations.is_empty()
    }
}

pub fn singular_value_sandwich_check(
    a: &DenseMatrix,
    s: &DenseMatrix,
    t: &DenseMatrix,
) -> Result<SandwichReport> {
    let truth = exact_gsvd(a, s, t)?;
    let plain = linalg::singular_values(a);
    let s_eig = linalg::sym_eigenvalues(s);
    let t_eig = linalg::sym_eigenvalues(t);
    let (s_max, s_min) = (s_eig[0], *s_eig.last().expect("nonempty"));
    let (t_max, t_min) = (t_eig[0], *t_eig.last().expect("nonempty"));
    let lo_factor = 1.0 / ((1.0 / s_min) * t_max).sqrt();
    let hi_factor = (s_max / t_min).sqrt();
    let slack = 1e-12 * truth.sigma_at(0);
    let lower: Vec<f64> = plain.iter().map(|x| x * lo_factor).collect();
    let upper: Vec<f64> = plain.iter().map(|x| x * hi_factor).collect();
    let violations = (0..truth.sigma.len())
        .filter(|&j| truth.sigma[j] < lower[j] - slack || truth.sigma[j] > upper[j] + slack)
        .collect();
    Ok(SandwichReport {
        plain,
        sigma: truth.sigma,
        lower,
        upper,
        violations,
    })
}

/// Symmetric-definite pencil `A x = λ B x`: eigenvalues nonincreasing and
/// `B`-orthonormal eigenvectors.
pub fn exact_gheig(a: &DenseMatrix, b: &DenseMatrix) -> Result<(Vec<f64>, DenseMatrix)> {
    let n = a.rows();
    check_size(n, n)?;
    if a.shape() != (n, n) || b.shape() != (n, n) {
        return Err(Error::DimensionMismatch {
            context: "pencil dimensions",
            expected: n,
            got: b.rows(),
        });
    }
    for m in [a, b] {
        let asymmetry = m.asymmetry();
        if asymmetry > 1e-10 {
            return Err(Error::NotSymmetric { asymmetry });
        }
    }
    let lb = linalg::cholesky(&b.symmetrized())?;
    // L⁻¹ A L⁻ᵀ
    let left = linalg::left_solve_lower(&lb, &a.symmetrized());
    let c = linalg::left_solve_lower(&lb, &left.transpose());
    let (vals, y) = linalg::sym_eigen(&c);
    Ok((vals, linalg::left_solve_lower_t(&lb, &y)))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn identity_weights_give_plain_svd() {
        let a = DenseMatrix::from_rows(&[&[3.0, 0.0], &[0.0, -2.0], &[0.0, 0.0]]);
        let i2 = DenseMatrix::identity(2);
        let i3 = DenseMatrix::identity(3);
        let g = exact_gsvd(&a, &i3, &i2).unwrap();
        assert!((g.sigma[0] - 3.0).abs() < 1e-15 && (g.sigma[1] - 2.0).abs() < 1e-15);
        assert_eq!(g.u.shape(), (3, 3));
        assert_eq!(g.v.shape(), (2, 2));
    }

    #[test]
    fn scaled_weight() {
        let a = DenseMatrix::identity(2);
        let s = DenseMatrix::from_diag(&[4.0, 4.0]);
        let g = exact_gsvd(&a, &s, &a).unwrap();
        assert!(g.sigma.iter().all(|&x| (x - 2.0).abs() < 1e-15));
    }

    #[test]
    fn gheig_small_cases() {
        let (vals, _) = exact_gheig(&DenseMatrix::from_diag(&[4.0, 1.0]), &DenseMatrix::identity(2)).unwrap();
        assert!((vals[0] - 4.0).abs() < 1e-15 && (vals[1] - 1.0).abs() < 1e-15);
        let b = DenseMatrix::from_rows(&[&[2.0, 1.0], &[1.0, 3.0]]);
        let (vals, _) = exact_gheig(&b, &b).unwrap();
        assert!(vals.iter().all(|&x| (x - 1.0).abs() < 1e-14));
    }

    #[test]
    fn oracle_refuses_huge_problems() {
        let a = DenseMatrix::zeros(ORACLE_LIMIT + 1, 1);
        let t = DenseMatrix::identity(1);
        assert!(matches!(
            exact_gsvd(&a, &DenseMatrix::zeros(1, 1), &t),
            Err(Error::OracleTooLarge { .. })
        ));
    }
}
