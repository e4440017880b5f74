//! Grid realizations of the smooth orthogonal factorizations.
//!
//! Each factorization is computed pointwise and then aligned to the previous
//! grid point subspace by subspace, so the sampled factors vary continuously.
//! Constant inputs are factored once and returned as constant functions.

use nalgebra::DMatrix;

use crate::error::{DaeError, Result};
use crate::linalg::{self, full_svd};
use crate::matfun::{Interp, MatrixFunction, TimeGrid};
use crate::scalar::{lit, to_f64, Real};

/// Default relative singular-value threshold separating the rank.
pub const DEFAULT_GAP_TOL: f64 = 1e-8;

/// Largest admissible sine of the angle between `kernel E` and `kernel Eᵀ`.
pub const KERNEL_ANGLE_TOL: f64 = 1e-8;

/// `Uᵀ F V = diag(Σ, 0)` with pointwise orthogonal `U`, `V`.
#[derive(Clone, Debug)]
pub struct RankSplit<T: Real> {
    pub u: MatrixFunction<T>,
    pub v: MatrixFunction<T>,
    pub sigma: MatrixFunction<T>,
    pub r: usize,
}

/// `Qᵀ E Q = diag(Σ, 0)` with a single pointwise orthogonal `Q`.
#[derive(Clone, Debug)]
pub struct SymRankSplit<T: Real> {
    pub q: MatrixFunction<T>,
    pub sigma: MatrixFunction<T>,
    pub r: usize,
}

/// `Wᵀ D W = diag(I_p, -I_q)`.
#[derive(Clone, Debug)]
pub struct InertiaSplit<T: Real> {
    pub w: MatrixFunction<T>,
    pub p: usize,
    pub q: usize,
}

impl<T: Real> InertiaSplit<T> {
    pub fn signature(&self) -> DMatrix<T> {
        signature(self.p, self.q)
    }
}

pub fn signature<T: Real>(p: usize, q: usize) -> DMatrix<T> {
    DMatrix::from_fn(p + q, p + q, |i, j| match (i == j, i < p) {
        (true, true) => T::one(),
        (true, false) => -T::one(),
        _ => T::zero(),
    })
}

/// `Uᵀ B = [B1; 0]` with `B1` square and nonsingular.
#[derive(Clone, Debug)]
pub struct RowRankNormalization<T: Real> {
    pub u: MatrixFunction<T>,
    pub b1: MatrixFunction<T>,
}

/// Numerical rank `#{σ_i > gap_tol σ_max}`; singular values within a decade
/// of the threshold make the decision ill-posed.
pub(crate) fn numerical_rank<T: Real>(s: &[T], gap_tol: T, t: T) -> Result<usize> {
    let smax = s.first().copied().unwrap_or(T::zero());
    if smax == T::zero() {
        return Ok(0);
    }
    let ten = lit::<T>(10.0);
    let (lo, hi) = (gap_tol / ten, gap_tol * ten);
    if let Some(&sig) = s.iter().find(|&&x| x / smax > lo && x / smax < hi) {
        return Err(DaeError::IllPosedRank { t: to_f64(t), sigma: to_f64(sig / smax) });
    }
    Ok(s.iter().filter(|&&x| x / smax > gap_tol).count())
}

fn check_gap<T: Real>(gap_tol: T) -> Result<()> {
    if gap_tol > T::zero() && gap_tol < T::one() {
        Ok(())
    } else {
        Err(DaeError::Parameter(format!("gap tolerance {} outside (0, 1)", to_f64(gap_tol))))
    }
}

/// Columns `[c0, c0 + k)` of `m`.
fn cols<T: Real>(m: &DMatrix<T>, c0: usize, k: usize) -> DMatrix<T> {
    m.columns(c0, k).into_owned()
}

fn hcat<T: Real>(a: &DMatrix<T>, b: &DMatrix<T>) -> DMatrix<T> {
    let mut out = DMatrix::zeros(a.nrows(), a.ncols() + b.ncols());
    linalg::put(&mut out, 0, 0, a);
    linalg::put(&mut out, 0, a.ncols(), b);
    out
}

/// Aligns each block of `blocks` to the matching block of `prev`.
fn align_blocks<T: Real>(blocks: Vec<DMatrix<T>>, prev: Option<&[DMatrix<T>]>) -> Vec<DMatrix<T>> {
    match prev {
        None => blocks,
        Some(p) => blocks
            .into_iter()
            .zip(p)
            .map(|(b, r)| linalg::procrustes_align(&b, r))
            .collect(),
    }
}

fn sample_points<T: Real>(f: &MatrixFunction<T>, grid: &TimeGrid<T>) -> Vec<T> {
    if f.is_constant() {
        vec![grid.t0()]
    } else {
        grid.points().to_vec()
    }
}

fn pack<T: Real>(grid: &TimeGrid<T>, mut values: Vec<DMatrix<T>>, constant: bool) -> Result<MatrixFunction<T>> {
    if constant {
        MatrixFunction::constant(values.swap_remove(0))
    } else {
        MatrixFunction::sampled(grid.clone(), values, Interp::Cubic)
    }
}

fn rank_drop<T: Real>(t0: T, r0: usize, t1: T, r1: usize) -> DaeError {
    DaeError::RankDrop { t0: to_f64(t0), r0, t1: to_f64(t1), r1 }
}

pub fn rank_split<T: Real>(f: &MatrixFunction<T>, grid: &TimeGrid<T>, gap_tol: T) -> Result<RankSplit<T>> {
    check_gap(gap_tol)?;
    let (m, n) = f.shape();
    let pts = sample_points(f, grid);
    let mut prev: Option<(T, usize, Vec<DMatrix<T>>)> = None;
    let (mut us, mut vs, mut ss) = (Vec::new(), Vec::new(), Vec::new());
    for &t in &pts {
        let ft = f.eval(t)?;
        let svd = full_svd(&ft);
        let r = numerical_rank(&svd.s, gap_tol, t)?;
        if let Some((tp, rp, _)) = &prev {
            if *rp != r {
                return Err(rank_drop(*tp, *rp, t, r));
            }
        }
        let blocks = vec![
            cols(&svd.u, 0, r),
            cols(&svd.u, r, m - r),
            cols(&svd.v, 0, r),
            cols(&svd.v, r, n - r),
        ];
        let blocks = align_blocks(blocks, prev.as_ref().map(|p| p.2.as_slice()));
        us.push(hcat(&blocks[0], &blocks[1]));
        vs.push(hcat(&blocks[2], &blocks[3]));
        ss.push(blocks[0].transpose() * &ft * &blocks[2]);
        prev = Some((t, r, blocks));
    }
    let r = prev.map(|p| p.1).unwrap_or(0);
    let c = f.is_constant();
    Ok(RankSplit { u: pack(grid, us, c)?, v: pack(grid, vs, c)?, sigma: pack(grid, ss, c)?, r })
}

pub fn sym_rank_split<T: Real>(e: &MatrixFunction<T>, grid: &TimeGrid<T>, gap_tol: T) -> Result<SymRankSplit<T>> {
    check_gap(gap_tol)?;
    let (m, n) = e.shape();
    if m != n {
        return Err(DaeError::Shape(format!("symmetric rank split of a {m}x{n} matrix")));
    }
    let pts = sample_points(e, grid);
    let mut prev: Option<(T, usize, Vec<DMatrix<T>>)> = None;
    let (mut qs, mut ss) = (Vec::new(), Vec::new());
    for &t in &pts {
        let et = e.eval(t)?;
        let svd = full_svd(&et);
        let r = numerical_rank(&svd.s, gap_tol, t)?;
        if let Some((tp, rp, _)) = &prev {
            if *rp != r {
                return Err(rank_drop(*tp, *rp, t, r));
            }
        }
        let u1 = cols(&svd.u, 0, r);
        let v2 = cols(&svd.v, r, n - r);
        let angle = (u1.transpose() * &v2).norm();
        if angle > lit::<T>(KERNEL_ANGLE_TOL) {
            return Err(DaeError::Structure {
                what: format!("kernel of E and kernel of Eᵀ differ at t = {}", to_f64(t)),
                residual: to_f64(angle),
            });
        }
        let blocks = align_blocks(vec![u1, cols(&svd.u, r, n - r)], prev.as_ref().map(|p| p.2.as_slice()));
        qs.push(hcat(&blocks[0], &blocks[1]));
        ss.push(blocks[0].transpose() * &et * &blocks[0]);
        prev = Some((t, r, blocks));
    }
    let r = prev.map(|p| p.1).unwrap_or(0);
    let c = e.is_constant();
    Ok(SymRankSplit { q: pack(grid, qs, c)?, sigma: pack(grid, ss, c)?, r })
}

/// Smooth Sylvester inertia: eigenvectors scaled by `|λ|^{-1/2}`, each sign
/// group aligned to the previous point.
pub fn smooth_inertia<T: Real>(d: &MatrixFunction<T>, grid: &TimeGrid<T>) -> Result<InertiaSplit<T>> {
    let (m, n) = d.shape();
    if m != n {
        return Err(DaeError::Shape(format!("inertia of a {m}x{n} matrix")));
    }
    let pts = sample_points(d, grid);
    let mut prev: Option<(T, usize, Vec<DMatrix<T>>)> = None;
    let mut ws = Vec::new();
    for &t in &pts {
        let dt = d.eval(t)?;
        let defect = (&dt - dt.transpose()).norm();
        if defect > lit::<T>(1e-12) * (T::one() + dt.norm()) {
            return Err(DaeError::Structure {
                what: format!("D is not symmetric at t = {}", to_f64(t)),
                residual: to_f64(defect),
            });
        }
        let eig = linalg::sym_eigen_sorted(&dt);
        let amax = eig.values.iter().fold(T::zero(), |a, &l| a.max(l.abs()));
        let amin = eig.values.iter().fold(amax, |a, &l| a.min(l.abs()));
        if n > 0 && (amax == T::zero() || amin <= lit::<T>(1e-12) * amax) {
            let cond = if amin == T::zero() { f64::INFINITY } else { to_f64(amax / amin) };
            return Err(DaeError::Conditioning { what: "D".into(), t: to_f64(t), cond });
        }
        let p = eig.values.iter().filter(|&&l| l > T::zero()).count();
        if let Some((tp, pp, _)) = &prev {
            if *pp != p {
                return Err(DaeError::InertiaChange { t0: to_f64(*tp), t1: to_f64(t) });
            }
        }
        let scaled = DMatrix::from_fn(n, n, |i, j| eig.vectors[(i, j)] / eig.values[j].abs().sqrt());
        let blocks = align_blocks(
            vec![cols(&scaled, 0, p), cols(&scaled, p, n - p)],
            prev.as_ref().map(|x| x.2.as_slice()),
        );
        ws.push(hcat(&blocks[0], &blocks[1]));
        prev = Some((t, p, blocks));
    }
    let p = prev.map(|x| x.1).unwrap_or(0);
    Ok(InertiaSplit { w: pack(grid, ws, d.is_constant())?, p, q: n - p })
}

pub fn row_rank_normalize<T: Real>(b: &MatrixFunction<T>, grid: &TimeGrid<T>) -> Result<RowRankNormalization<T>> {
    let (n, m) = b.shape();
    if m > n {
        return Err(DaeError::Shape(format!("a {n}x{m} matrix cannot have full column rank")));
    }
    let gap = lit::<T>(DEFAULT_GAP_TOL);
    let pts = sample_points(b, grid);
    let mut prev: Option<Vec<DMatrix<T>>> = None;
    let (mut us, mut b1s) = (Vec::new(), Vec::new());
    for &t in &pts {
        let bt = b.eval(t)?;
        let svd = full_svd(&bt);
        let r = numerical_rank(&svd.s, gap, t)?;
        if r < m {
            return Err(DaeError::Singular { what: format!("B (column rank {r} < {m})"), t: to_f64(t) });
        }
        let blocks = align_blocks(vec![cols(&svd.u, 0, m), cols(&svd.u, m, n - m)], prev.as_deref());
        us.push(hcat(&blocks[0], &blocks[1]));
        b1s.push(blocks[0].transpose() * &bt);
        prev = Some(blocks);
    }
    let c = b.is_constant();
    Ok(RowRankNormalization { u: pack(grid, us, c)?, b1: pack(grid, b1s, c)? })
}
