//! Small dense linear-algebra helpers shared by the operator modules.

use nalgebra::{DMatrix, DVector, SymmetricEigen, SVD};

use crate::{Error, Result};

/// `cos(pi * x)` with exact zeros at half-integers and exact ±1 at integers.
pub fn cos_pi(x: f64) -> f64 {
    // reduce to r in [0, 1] using evenness and 2-periodicity
    let r = (x - 2.0 * (0.5 * x).round()).abs();
    if r <= 0.25 {
        (std::f64::consts::PI * r).cos()
    } else if r <= 0.75 {
        (std::f64::consts::PI * (0.5 - r)).sin()
    } else {
        -(std::f64::consts::PI * (1.0 - r)).cos()
    }
}

/// `sin(pi * x)` with exact zeros at integers and exact ±1 at half-integers.
pub fn sin_pi(x: f64) -> f64 {
    let s = x - 2.0 * (0.5 * x).round();
    let (sign, r) = if s < 0.0 { (-1.0, -s) } else { (1.0, s) };
    let r = if r > 0.5 { 1.0 - r } else { r };
    let v = if r <= 0.25 {
        (std::f64::consts::PI * r).sin()
    } else {
        (std::f64::consts::PI * (0.5 - r)).cos()
    };
    sign * v
}

/// `(exp(s * t) - 1) / s`, i.e. the integral of `exp(s u)` over `[0, t]`.
pub fn exp_integral(s: f64, t: f64) -> f64 {
    if s == 0.0 {
        t
    } else {
        (s * t).exp_m1() / s
    }
}

// The bidiagonal iteration occasionally stops on a poor factorization when
// asked for machine-epsilon convergence; the result is checked and retried
// with a looser threshold.
fn checked_svd(mat: DMatrix<f64>, want_v: bool) -> Result<SVD<f64, nalgebra::Dyn, nalgebra::Dyn>> {
    let scale = mat.norm().max(f64::MIN_POSITIVE);
    for eps in [4.0 * f64::EPSILON, 64.0 * f64::EPSILON, 1e-13] {
        let Some(svd) = SVD::try_new(mat.clone(), true, true, eps, 100_000) else {
            continue;
        };
        let (u, vt) = (svd.u.as_ref().unwrap(), svd.v_t.as_ref().unwrap());
        let back = u * DMatrix::from_diagonal(&svd.singular_values) * vt;
        let err = (back - &mat).norm();
        if err <= 1e-11 * scale {
            let mut svd = svd;
            if !want_v {
                svd.v_t = None;
            }
            return Ok(svd);
        }
    }
    Err(Error::LinearSolve("SVD did not converge".into()))
}

/// Singular value decomposition with a full right factor.
///
/// Wide matrices are padded with zero rows so that `v` is square; the
/// returned singular values are sorted non-increasing.
pub struct FullSvd {
    pub u: DMatrix<f64>,
    pub singular_values: DVector<f64>,
    /// Columns are right singular vectors; the first `singular_values.len()`
    /// match the singular values, the rest span the remaining directions.
    pub v: DMatrix<f64>,
}

impl FullSvd {
    pub fn new(mat: &DMatrix<f64>) -> Result<Self> {
        let (rows, cols) = mat.shape();
        let padded = if rows < cols {
            let mut p = DMatrix::zeros(cols, cols);
            p.view_mut((0, 0), (rows, cols)).copy_from(mat);
            p
        } else {
            mat.clone()
        };
        let svd = checked_svd(padded, true)?;
        let u = svd.u.expect("requested u");
        let v = svd.v_t.expect("requested v").transpose();
        let k = rows.min(cols);
        Ok(Self {
            u: u.columns(0, k).into_owned(),
            singular_values: svd.singular_values.rows(0, k).into_owned(),
            v,
        })
    }

    /// Number of singular values above `tol`.
    pub fn rank(&self, tol: f64) -> usize {
        self.singular_values.iter().filter(|&&s| s > tol).count()
    }

    /// Right singular vectors spanning the numerical kernel.
    pub fn kernel(&self, tol: f64) -> DMatrix<f64> {
        let r = self.rank(tol);
        let n = self.v.ncols();
        self.v.columns(r, n - r).into_owned()
    }
}

/// Symmetric positive semidefinite square root; negative rounding noise in
/// the spectrum is clamped to zero.
pub fn psd_sqrt(mat: &DMatrix<f64>) -> DMatrix<f64> {
    let sym = 0.5 * (mat + mat.transpose());
    let eig = SymmetricEigen::new(sym);
    let root = eig.eigenvalues.map(|l| l.max(0.0).sqrt());
    &eig.eigenvectors * DMatrix::from_diagonal(&root) * eig.eigenvectors.transpose()
}

/// Eigen-decomposition of a symmetric matrix with eigenvalues sorted
/// non-increasing (eigenvectors permuted accordingly).
pub fn sorted_symmetric_eigen(mat: &DMatrix<f64>) -> (DVector<f64>, DMatrix<f64>) {
    let sym = 0.5 * (mat + mat.transpose());
    let eig = SymmetricEigen::new(sym);
    let mut order: Vec<usize> = (0..eig.eigenvalues.len()).collect();
    order.sort_by(|&a, &b| eig.eigenvalues[b].total_cmp(&eig.eigenvalues[a]));
    let values = DVector::from_iterator(order.len(), order.iter().map(|&i| eig.eigenvalues[i]));
    let vectors = DMatrix::from_columns(
        &order
            .iter()
            .map(|&i| eig.eigenvectors.column(i).into_owned())
            .collect::<Vec<_>>(),
    );
    (values, vectors)
}

/// Orthonormal basis of the column span of `mat`, dropping directions whose
/// singular value is at most `rel_tol` times the largest one.
pub fn orthonormal_span(mat: &DMatrix<f64>, rel_tol: f64) -> Result<DMatrix<f64>> {
    let n = mat.nrows();
    if mat.ncols() == 0 {
        return Ok(DMatrix::zeros(n, 0));
    }
    let svd = checked_svd(mat.clone(), false)?;
    let smax = svd.singular_values.max();
    if smax == 0.0 {
        return Ok(DMatrix::zeros(n, 0));
    }
    let u = svd.u.expect("requested u");
    let keep: Vec<_> = (0..svd.singular_values.len())
        .filter(|&i| svd.singular_values[i] > rel_tol * smax)
        .map(|i| u.column(i).into_owned())
        .collect();
    if keep.is_empty() {
        Ok(DMatrix::zeros(n, 0))
    } else {
        Ok(DMatrix::from_columns(&keep))
    }
}

/// Solves the symmetric positive definite system `a x = b` by Cholesky.
pub fn cholesky_solve(a: &DMatrix<f64>, b: &DVector<f64>) -> Option<DVector<f64>> {
    let sym = 0.5 * (a + a.transpose());
    sym.cholesky().map(|c| c.solve(b))
}
