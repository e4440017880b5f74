//! Dense kernels shared by the factorization and reduction code.

use nalgebra::{DMatrix, SymmetricEigen, SVD};

use crate::error::{DaeError, Result};
use crate::scalar::{lit, to_f64, Real};

/// Full SVD `F = U diag(s) Vᵀ` with square orthogonal `U` (m×m), `V` (n×n)
/// and singular values sorted in decreasing order.
pub struct FullSvd<T: Real> {
    pub u: DMatrix<T>,
    pub s: Vec<T>,
    pub v: DMatrix<T>,
}

pub fn full_svd<T: Real>(f: &DMatrix<T>) -> FullSvd<T> {
    let (m, n) = f.shape();
    if m == 0 || n == 0 {
        return FullSvd { u: DMatrix::identity(m, m), s: vec![], v: DMatrix::identity(n, n) };
    }
    let svd = SVD::new(f.clone(), true, true);
    let k = svd.singular_values.len();
    let mut idx: Vec<usize> = (0..k).collect();
    idx.sort_by(|&a, &b| {
        svd.singular_values[b]
            .partial_cmp(&svd.singular_values[a])
            .unwrap_or(std::cmp::Ordering::Equal)
    });
    let u_thin = svd.u.unwrap();
    let vt = svd.v_t.unwrap();
    let s: Vec<T> = idx.iter().map(|&i| svd.singular_values[i]).collect();
    let u1 = DMatrix::from_fn(m, k, |r, c| u_thin[(r, idx[c])]);
    let v1 = DMatrix::from_fn(n, k, |r, c| vt[(idx[c], r)]);
    FullSvd { u: complete_basis(&u1), s, v: complete_basis(&v1) }
}

/// Extends orthonormal columns `b` (m×k) to a square orthogonal matrix.
pub fn complete_basis<T: Real>(b: &DMatrix<T>) -> DMatrix<T> {
    let (m, k) = b.shape();
    if k >= m {
        return b.columns(0, m).into_owned();
    }
    let comp = orthonormal_complement(b);
    let mut out = DMatrix::zeros(m, m);
    out.columns_mut(0, k).copy_from(b);
    out.columns_mut(k, m - k).copy_from(&comp);
    out
}

/// Orthonormal basis of the orthogonal complement of `range(b)`, for `b`
/// with orthonormal columns.
pub fn orthonormal_complement<T: Real>(b: &DMatrix<T>) -> DMatrix<T> {
    let (m, k) = b.shape();
    if k == 0 {
        return DMatrix::identity(m, m);
    }
    let proj = DMatrix::identity(m, m) - b * b.transpose();
    let eig = sym_eigen_sorted(&proj);
    // Eigenvalues of the projector are 1 (m-k times) then 0 (k times).
    eig.vectors.columns(0, m - k).into_owned()
}

pub struct SortedEigen<T: Real> {
    /// Decreasing eigenvalues.
    pub values: Vec<T>,
    pub vectors: DMatrix<T>,
}

pub fn sym_eigen_sorted<T: Real>(a: &DMatrix<T>) -> SortedEigen<T> {
    let n = a.nrows();
    if n == 0 {
        return SortedEigen { values: vec![], vectors: DMatrix::zeros(0, 0) };
    }
    let sym = (a + a.transpose()) * lit::<T>(0.5);
    let eig = SymmetricEigen::new(sym);
    let mut idx: Vec<usize> = (0..n).collect();
    idx.sort_by(|&i, &j| {
        eig.eigenvalues[j]
            .partial_cmp(&eig.eigenvalues[i])
            .unwrap_or(std::cmp::Ordering::Equal)
    });
    SortedEigen {
        values: idx.iter().map(|&i| eig.eigenvalues[i]).collect(),
        vectors: DMatrix::from_fn(n, n, |r, c| eig.eigenvectors[(r, idx[c])]),
    }
}

/// Orthogonal polar factor of `m` (the orthogonal matrix closest to it).
pub fn polar_orthogonal<T: Real>(m: &DMatrix<T>) -> DMatrix<T> {
    let (r, c) = m.shape();
    if r == 0 || c == 0 {
        return DMatrix::identity(r, c);
    }
    let svd = SVD::new(m.clone(), true, true);
    svd.u.unwrap() * svd.v_t.unwrap()
}

/// Rotates the columns of `basis` within their span so that they are as
/// close as possible (Frobenius) to `reference`: returns `basis * R` with
/// `R = argmin ‖basis R − reference‖` over orthogonal `R`.
pub fn procrustes_align<T: Real>(basis: &DMatrix<T>, reference: &DMatrix<T>) -> DMatrix<T> {
    if basis.ncols() == 0 {
        return basis.clone();
    }
    let r = polar_orthogonal(&(basis.transpose() * reference));
    basis * r
}

/// Ratio of smallest to largest singular value (0 for the zero matrix).
pub fn inverse_condition<T: Real>(a: &DMatrix<T>) -> T {
    if a.nrows() == 0 || a.ncols() == 0 {
        return T::one();
    }
    let s = SVD::new(a.clone(), false, false).singular_values;
    let max = s.iter().fold(T::zero(), |acc, &x| acc.max(x));
    let min = s.iter().fold(T::max_value().unwrap(), |acc, &x| acc.min(x));
    if max == T::zero() {
        T::zero()
    } else {
        min / max
    }
}

/// Inverse of a square matrix, rejecting numerically singular inputs.
pub fn checked_inverse<T: Real>(a: &DMatrix<T>, what: &str, t: T, min_rcond: T) -> Result<DMatrix<T>> {
    let n = a.nrows();
    if n == 0 {
        return Ok(DMatrix::zeros(0, 0));
    }
    let rc = inverse_condition(a);
    if rc <= min_rcond {
        return Err(DaeError::Singular { what: what.to_string(), t: to_f64(t) });
    }
    a.clone()
        .lu()
        .try_inverse()
        .ok_or_else(|| DaeError::Singular { what: what.to_string(), t: to_f64(t) })
}

/// Solves `a x = b` by LU with partial pivoting.
pub fn solve<T: Real>(a: &DMatrix<T>, b: &DMatrix<T>) -> Option<DMatrix<T>> {
    if a.nrows() == 0 {
        return Some(DMatrix::zeros(0, b.ncols()));
    }
    a.clone().lu().solve(b)
}

/// Symmetric positive definite square root and its inverse.
pub fn spd_sqrt<T: Real>(a: &DMatrix<T>) -> Option<(DMatrix<T>, DMatrix<T>, SortedEigen<T>)> {
    let eig = sym_eigen_sorted(a);
    if eig.values.iter().any(|&l| l <= T::zero()) {
        return None;
    }
    let n = a.nrows();
    let mut root = DMatrix::zeros(n, n);
    let mut inv_root = DMatrix::zeros(n, n);
    for k in 0..n {
        let v = eig.vectors.column(k);
        let s = eig.values[k].sqrt();
        root += &v * v.transpose() * s;
        inv_root += &v * v.transpose() / s;
    }
    Some((root, inv_root, eig))
}

/// Derivative of the SPD square root `R = A^{1/2}`: solves `R Ṙ + Ṙ R = Ȧ`
/// in the eigenbasis of `A`.
pub fn spd_sqrt_derivative<T: Real>(eig: &SortedEigen<T>, a_dot: &DMatrix<T>) -> DMatrix<T> {
    let v = &eig.vectors;
    let n = v.nrows();
    let b = v.transpose() * a_dot * v;
    let x = DMatrix::from_fn(n, n, |i, j| b[(i, j)] / (eig.values[i].sqrt() + eig.values[j].sqrt()));
    v * x * v.transpose()
}

pub fn skew_part<T: Real>(a: &DMatrix<T>) -> DMatrix<T> {
    (a - a.transpose()) * lit::<T>(0.5)
}

pub fn sym_part<T: Real>(a: &DMatrix<T>) -> DMatrix<T> {
    (a + a.transpose()) * lit::<T>(0.5)
}

/// Writes `src` into `dst` at `(r0, c0)`.
pub fn put<T: Real>(dst: &mut DMatrix<T>, r0: usize, c0: usize, src: &DMatrix<T>) {
    dst.view_mut((r0, c0), src.shape()).copy_from(src);
}

pub fn sub<T: Real>(m: &DMatrix<T>, r0: usize, c0: usize, nr: usize, nc: usize) -> DMatrix<T> {
    m.view((r0, c0), (nr, nc)).into_owned()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn full_svd_of_tall_matrix() {
        let f = DMatrix::from_row_slice(3, 2, &[1.0, 2.0, 0.0, 1.0, 1.0, 0.0]);
        let svd = full_svd(&f);
        assert_eq!(svd.u.shape(), (3, 3));
        assert_eq!(svd.v.shape(), (2, 2));
        assert!((svd.u.transpose() * &svd.u - DMatrix::identity(3, 3)).norm() < 1e-13);
        let mut sig = DMatrix::zeros(3, 2);
        sig[(0, 0)] = svd.s[0];
        sig[(1, 1)] = svd.s[1];
        assert!((svd.u.transpose() * &f * &svd.v - sig).norm() < 1e-13);
        assert!(svd.s[0] >= svd.s[1]);
    }

    #[test]
    fn procrustes_recovers_rotation() {
        let (c, s) = (0.3f64.cos(), 0.3f64.sin());
        let reference = DMatrix::from_row_slice(3, 2, &[1.0, 0.0, 0.0, 1.0, 0.0, 0.0]);
        let rot = DMatrix::from_row_slice(2, 2, &[c, -s, s, c]);
        let rotated = &reference * rot;
        let aligned = procrustes_align(&rotated, &reference);
        assert!((aligned - reference).norm() < 1e-14);
    }

    #[test]
    fn sqrt_derivative_matches_finite_difference() {
        let a = |t: f64| DMatrix::from_row_slice(2, 2, &[2.0 + t, 0.3 * t, 0.3 * t, 1.0 + t * t]);
        let a_dot = |t: f64| DMatrix::from_row_slice(2, 2, &[1.0, 0.3, 0.3, 2.0 * t]);
        let t = 0.4;
        let h = 1e-5;
        let (_, _, eig) = spd_sqrt(&a(t)).unwrap();
        let analytic = spd_sqrt_derivative(&eig, &a_dot(t));
        let fd = (spd_sqrt(&a(t + h)).unwrap().0 - spd_sqrt(&a(t - h)).unwrap().0) / (2.0 * h);
        assert!((analytic - fd).norm() < 1e-8);
    }
}
