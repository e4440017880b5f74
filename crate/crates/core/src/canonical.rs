//! Global canonical forms under congruence and verifiers for the global and
//! local block layouts.
//!
//! The constructions follow the existence proofs literally: complete a
//! solution basis `Φ` to `Q = [Φ Φ']`, normalize the constant leading block,
//! normalize the coupling rows and eliminate the remaining off-diagonal
//! blocks. Every intermediate pair is checked for structure.

use nalgebra::DMatrix;

use crate::error::{DaeError, Result};
use crate::factor::{self, numerical_rank, signature};
use crate::linalg::{self, full_svd, put, sub};
use crate::matfun::{Interp, MatrixFunction, MatrixPair, TimeGrid};
use crate::scalar::{lit, to_f64, Real};
use crate::structure::{self, Adjointness, CongruenceTransform};

/// Relative tolerance for the structure and zero-pattern checks between steps.
pub const STAGE_TOL: f64 = 1e-8;

/// Shifts tried for the pencil `λ₀E - A`.
const SHIFTS: [f64; 6] = [0.7316, -1.2731, 1.9427, -2.6113, 3.3871, -4.1579];

/// `d` homogeneous solutions `Φ` (n×d) with derivatives.
#[derive(Clone, Debug)]
pub struct SolutionBasis<T: Real> {
    pub phi: MatrixFunction<T>,
    pub phidot: MatrixFunction<T>,
    pub d: usize,
}

/// `(E, A) ≡ ([[0, I, 0], [-I, 0, 0], [0, 0, E33]], [[0, 0, 0], [0, A22, A23], [0, A32, A33]])`.
#[derive(Clone, Debug)]
pub struct SelfAdjointGlobalForm<T: Real> {
    pub p: usize,
    pub e33: MatrixFunction<T>,
    pub a22: MatrixFunction<T>,
    pub a23: MatrixFunction<T>,
    pub a32: MatrixFunction<T>,
    pub a33: MatrixFunction<T>,
    /// Accumulated congruence.
    pub transform: CongruenceTransform<T>,
    /// The transformed pair.
    pub pair: MatrixPair<T>,
}

/// `(E, A) ≡ (diag(I_p, -I_q, E33), diag(0, 0, A33))`.
#[derive(Clone, Debug)]
pub struct SkewAdjointGlobalForm<T: Real> {
    pub p: usize,
    pub q: usize,
    pub e33: MatrixFunction<T>,
    pub a33: MatrixFunction<T>,
    pub transform: CongruenceTransform<T>,
    pub pair: MatrixPair<T>,
}

fn working_pair<T: Real>(pair: &MatrixPair<T>, grid: &TimeGrid<T>) -> Result<MatrixPair<T>> {
    pair.check_grid(grid)?;
    MatrixPair::new(pair.e.clone(), pair.a.clone(), grid.clone())
}

fn hcat<T: Real>(a: &DMatrix<T>, b: &DMatrix<T>) -> DMatrix<T> {
    let mut out = DMatrix::zeros(a.nrows(), a.ncols() + b.ncols());
    put(&mut out, 0, 0, a);
    put(&mut out, 0, a.ncols(), b);
    out
}

fn block_diag<T: Real>(a: &DMatrix<T>, b: &DMatrix<T>) -> DMatrix<T> {
    let mut out = DMatrix::zeros(a.nrows() + b.nrows(), a.ncols() + b.ncols());
    put(&mut out, 0, 0, a);
    put(&mut out, a.nrows(), a.ncols(), b);
    out
}

/// Transform sampled on `grid` from `(Q(t), Q̇(t))`.
fn sampled_transform<T: Real, F>(grid: &TimeGrid<T>, mut f: F) -> Result<CongruenceTransform<T>>
where
    F: FnMut(T) -> Result<(DMatrix<T>, DMatrix<T>)>,
{
    let mut qs = Vec::with_capacity(grid.len());
    let mut ds = Vec::with_capacity(grid.len());
    for &t in grid.points() {
        let (q, d) = f(t)?;
        qs.push(q);
        ds.push(d);
    }
    let q = MatrixFunction::hermite(grid.clone(), qs, ds.clone())?;
    let qdot = MatrixFunction::sampled(grid.clone(), ds, Interp::Cubic)?;
    CongruenceTransform::with_derivative(q, qdot)
}

fn scale_of<T: Real>(pair: &MatrixPair<T>, grid: &TimeGrid<T>) -> Result<T> {
    Ok(T::one() + pair.e.max_norm(grid)?.max(pair.a.max_norm(grid)?))
}

fn check_structure<T: Real>(pair: &MatrixPair<T>, grid: &TimeGrid<T>, kind: Adjointness) -> Result<()> {
    let tol = lit::<T>(STAGE_TOL) * scale_of(pair, grid)?;
    let rep = structure::residual(pair, grid, kind)?;
    if rep.passes(tol) {
        Ok(())
    } else {
        Err(DaeError::Structure {
            what: format!("{kind:?} residual of the intermediate pair"),
            residual: to_f64(rep.max_residual()),
        })
    }
}

/// Largest Frobenius norm of `f(t)[r0.., c0..]` minus `target` over the grid.
fn block_defect<T: Real>(
    f: &MatrixFunction<T>,
    grid: &TimeGrid<T>,
    (r0, c0, nr, nc): (usize, usize, usize, usize),
    target: &DMatrix<T>,
) -> Result<T> {
    let mut worst = T::zero();
    for &t in grid.points() {
        worst = worst.max((sub(&f.eval(t)?, r0, c0, nr, nc) - target).norm());
    }
    Ok(worst)
}

fn expect_block<T: Real>(
    f: &MatrixFunction<T>,
    grid: &TimeGrid<T>,
    at: (usize, usize, usize, usize),
    target: &DMatrix<T>,
    tol: T,
    what: &str,
) -> Result<()> {
    let r = block_defect(f, grid, at, target)?;
    if r <= tol {
        Ok(())
    } else {
        Err(DaeError::Consistency { what: what.to_string(), residual: to_f64(r) })
    }
}

fn staged<T>(step: &'static str, r: Result<T>) -> Result<T> {
    r.map_err(|e| e.at_stage(step))
}

/// Solutions of `Eẋ = Ax` for a constant regular pair, via the shifted pencil.
pub fn solution_basis_constant<T: Real>(pair: &MatrixPair<T>, grid: &TimeGrid<T>) -> Result<SolutionBasis<T>> {
    if !pair.is_constant() {
        return Err(DaeError::Unsupported("solution bases are only constructed for constant pairs".into()));
    }
    pair.check_grid(grid)?;
    let t0 = grid.t0();
    let (e, a) = pair.eval(t0)?;
    let n = e.nrows();
    let scale = T::one() + e.norm().max(a.norm());
    let min_rc = lit::<T>(1e-10);
    let (lambda, shifted) = SHIFTS
        .iter()
        .map(|&s| {
            let l = lit::<T>(s);
            (l, &e * l - &a)
        })
        .find(|(_, m)| linalg::inverse_condition(m) > min_rc)
        .ok_or(DaeError::Irregular)?;
    let ehat = linalg::solve(&shifted, &e).ok_or(DaeError::Irregular)?;

    // range(Ê^k) shrinks until it reaches the invariant subspace of the
    // nonzero eigenvalues.
    let gap = lit::<T>(factor::DEFAULT_GAP_TOL);
    let mut b = DMatrix::<T>::identity(n, n);
    loop {
        if b.ncols() == 0 {
            break;
        }
        let img = &ehat * &b;
        let svd = full_svd(&img);
        let r = numerical_rank(&svd.s, gap, t0)?;
        if r == b.ncols() {
            break;
        }
        b = svd.u.columns(0, r).into_owned();
    }
    let d = b.ncols();
    let ef = b.transpose() * &ehat * &b;
    let inv_res = (&ehat * &b - &b * &ef).norm();
    if inv_res > lit::<T>(STAGE_TOL) * (T::one() + ehat.norm()) {
        return Err(DaeError::Consistency { what: "invariant subspace of the shifted pencil".into(), residual: to_f64(inv_res) });
    }
    let ef_inv = linalg::checked_inverse(&ef, "finite part of the shifted pencil", t0, min_rc)?;
    let nmat = DMatrix::<T>::identity(d, d) * lambda - ef_inv;
    let bn = &b * &nmat;
    let bnn = &bn * &nmat;
    let expm = |t: T| (&nmat * (t - t0)).exp();
    let phi = MatrixFunction::from_grid_fn(grid, |t| {
        let x = expm(t);
        Ok((&b * &x, &bn * x))
    })?;
    let phidot = MatrixFunction::from_grid_fn(grid, |t| {
        let x = expm(t);
        Ok((&bn * &x, &bnn * x))
    })?;
    for &t in grid.points() {
        let (p, pd) = (phi.eval(t)?, phidot.eval(t)?);
        let res = (&e * &pd - &a * &p).norm();
        if res > lit::<T>(STAGE_TOL) * scale * (T::one() + p.norm()) {
            return Err(DaeError::Consistency { what: "E Φ̇ - A Φ".into(), residual: to_f64(res) });
        }
        if d > 0 && linalg::inverse_condition(&p) <= min_rc {
            return Err(DaeError::Consistency { what: "rank of Φ".into(), residual: to_f64(linalg::inverse_condition(&p)) });
        }
    }
    Ok(SolutionBasis { phi, phidot, d })
}

/// `Q = [Φ Φ']` with `Φ'` the orthonormal complement from a rank split of `Φ`.
fn completion<T: Real>(basis: &SolutionBasis<T>, grid: &TimeGrid<T>) -> Result<CongruenceTransform<T>> {
    let (n, d) = basis.phi.shape();
    let split = factor::rank_split(&basis.phi, grid, lit::<T>(factor::DEFAULT_GAP_TOL))?;
    if split.r != d {
        return Err(DaeError::RankDrop { t0: to_f64(grid.t0()), r0: d, t1: to_f64(grid.t0()), r1: split.r });
    }
    sampled_transform(grid, |t| {
        let u = split.u.eval(t)?;
        let ud = split.u.derivative(t)?;
        let q = hcat(&basis.phi.eval(t)?, &u.columns(d, n - d).into_owned());
        let qd = hcat(&basis.phidot.eval(t)?, &ud.columns(d, n - d).into_owned());
        Ok((q, qd))
    })
}

/// Orthogonal `U = [U1 U2]` whose first half spans an isotropic subspace of
/// the skew matrix `e11`, i.e. `U1ᵀ e11 U1 = 0`.
fn isotropic_split<T: Real>(e11: &DMatrix<T>) -> Result<DMatrix<T>> {
    let d = e11.nrows();
    let tol = lit::<T>(STAGE_TOL) * (T::one() + e11.norm());
    let mut basis = DMatrix::<T>::identity(d, d);
    let mut iso: Vec<DMatrix<T>> = Vec::new();
    let mut other: Vec<DMatrix<T>> = Vec::new();
    while basis.ncols() > 0 {
        let local = basis.transpose() * e11 * &basis;
        let eig = linalg::sym_eigen_sorted(&(local.transpose() * &local));
        if eig.values[0].sqrt() <= tol {
            break;
        }
        let u = &basis * eig.vectors.columns(0, 1);
        let eu = e11 * &u;
        let w = &eu / eu.norm();
        let span = hcat(&u, &w);
        let inside = basis.transpose() * span;
        basis = &basis * linalg::orthonormal_complement(&inside);
        iso.push(u);
        other.push(w);
    }
    let k = basis.ncols();
    if k % 2 == 1 {
        return Err(DaeError::Parity { d: k });
    }
    for j in 0..k / 2 {
        iso.push(basis.columns(j, 1).into_owned());
        other.push(basis.columns(k / 2 + j, 1).into_owned());
    }
    let mut out = DMatrix::zeros(d, d);
    for (j, c) in iso.iter().chain(other.iter()).enumerate() {
        out.set_column(j, &c.column(0));
    }
    Ok(out)
}

/// `diag(I_p, V)` with `[E12 E13] V = [I_p 0]`.
fn coupling_normalization<T: Real>(
    pair: &MatrixPair<T>,
    p: usize,
    grid: &TimeGrid<T>,
) -> Result<CongruenceTransform<T>> {
    let n = pair.n();
    let m = n - p;
    let rc = lit::<T>(1e-12);
    let f0 = sub(&pair.e.eval(grid.t0())?, 0, p, p, m);
    let svd = full_svd(&f0.transpose());
    let n0 = svd.u.columns(p, m - p).into_owned();
    sampled_transform(grid, |t| {
        let f = sub(&pair.e.eval(t)?, 0, p, p, m);
        let fd = sub(&pair.e.derivative(t)?, 0, p, p, m);
        let g = &f * f.transpose();
        let gd = &fd * f.transpose() + &f * fd.transpose();
        let gi = linalg::checked_inverse(&g, "[E12 E13][E12 E13]ᵀ", t, rc)?;
        let ftgi = f.transpose() * &gi;
        let v1 = ftgi.clone();
        let v1d = fd.transpose() * &gi - &ftgi * &gd * &gi;
        let proj = DMatrix::<T>::identity(m, m) - &ftgi * &f;
        let proj_d = -(fd.transpose() * &gi * &f + &ftgi * &fd - &ftgi * &gd * &gi * &f);
        let v = hcat(&v1, &(&proj * &n0));
        let vd = hcat(&v1d, &(proj_d * &n0));
        if linalg::inverse_condition(&v) <= rc {
            return Err(DaeError::Singular { what: "coupling normalization V".into(), t: to_f64(t) });
        }
        Ok((block_diag(&DMatrix::identity(p, p), &v), block_diag(&DMatrix::zeros(p, p), &vd)))
    })
}

/// Self-adjoint global form by the proof construction.
pub fn global_canonical_self<T: Real>(
    pair: &MatrixPair<T>,
    basis: &SolutionBasis<T>,
    grid: &TimeGrid<T>,
) -> Result<SelfAdjointGlobalForm<T>> {
    let work = working_pair(pair, grid)?;
    let n = work.n();
    let tol0 = structure::default_tolerance(&work, grid)?;
    let rep = structure::self_adjoint_residual(&work, grid)?;
    if !rep.passes(tol0) {
        return Err(DaeError::Precondition(format!(
            "pair is not self-adjoint (residual {:e})",
            to_f64(rep.max_residual())
        )));
    }
    if basis.phi.rows() != n || basis.phi.cols() != basis.d {
        return Err(DaeError::Shape(format!("basis {:?} for a pair of size {n}", basis.phi.shape())));
    }
    let d = basis.d;
    if d % 2 == 1 {
        return Err(DaeError::Parity { d });
    }
    let p = d / 2;
    let a = n - d;
    if d == 0 {
        return SelfAdjointGlobalForm::from_pair(0, work, CongruenceTransform::identity(n));
    }

    let t1 = staged("basis completion", completion(basis, grid))?;
    let p1 = staged("basis completion", structure::apply_congruence(&work, &t1))?;
    staged("basis completion", check_structure(&p1, grid, Adjointness::SelfAdjoint))?;
    let stol = lit::<T>(STAGE_TOL) * scale_of(&p1, grid)?;
    staged(
        "basis completion",
        expect_block(&p1.a, grid, (0, 0, n, d), &DMatrix::zeros(n, d), stol, "A Φ - E Φ̇ after completion"),
    )?;
    let e11 = linalg::skew_part(&sub(&p1.e.eval(grid.t0())?, 0, 0, d, d));
    staged("basis completion", expect_block(&p1.e, grid, (0, 0, d, d), &e11, stol, "constancy of E11"))?;

    let u = staged("isotropic reduction", isotropic_split(&e11))?;
    let t2 = CongruenceTransform::new(MatrixFunction::constant(block_diag(&u, &DMatrix::identity(a, a)))?)?;
    let p2 = staged("isotropic reduction", structure::apply_congruence(&p1, &t2))?;
    staged("isotropic reduction", check_structure(&p2, grid, Adjointness::SelfAdjoint))?;
    staged(
        "isotropic reduction",
        expect_block(&p2.e, grid, (0, 0, p, p), &DMatrix::zeros(p, p), stol, "isotropic leading block"),
    )?;

    let t3 = staged("coupling normalization", coupling_normalization(&p2, p, grid))?;
    let p3 = staged("coupling normalization", structure::apply_congruence(&p2, &t3))?;
    staged("coupling normalization", check_structure(&p3, grid, Adjointness::SelfAdjoint))?;
    let mut row = DMatrix::zeros(p, n);
    put(&mut row, 0, p, &DMatrix::identity(p, p));
    staged("coupling normalization", expect_block(&p3.e, grid, (0, 0, p, n), &row, stol, "[0 I 0] leading row"))?;

    let t4 = staged(
        "final elimination",
        sampled_transform(grid, |t| {
            let (e, ed) = (p3.e.eval(t)?, p3.e.derivative(t)?);
            let half = lit::<T>(0.5);
            let mut q = DMatrix::identity(n, n);
            let mut qd = DMatrix::zeros(n, n);
            put(&mut q, 0, p, &(sub(&e, p, p, p, p) * half));
            put(&mut q, 0, 2 * p, &sub(&e, p, 2 * p, p, a));
            put(&mut qd, 0, p, &(sub(&ed, p, p, p, p) * half));
            put(&mut qd, 0, 2 * p, &sub(&ed, p, 2 * p, p, a));
            Ok((q, qd))
        }),
    )?;
    let p4 = staged("final elimination", structure::apply_congruence(&p3, &t4))?;
    staged("final elimination", check_structure(&p4, grid, Adjointness::SelfAdjoint))?;

    let transform = structure::compose(&structure::compose(&structure::compose(&t1, &t2)?, &t3)?, &t4)?;
    let form = SelfAdjointGlobalForm::from_pair(p, p4, transform)?;
    let rep = verify_self_global_form(&form, grid, stol)?;
    if rep.pattern > stol {
        return Err(DaeError::Consistency { what: "canonical zero pattern".into(), residual: to_f64(rep.pattern) }
            .at_stage("final elimination"));
    }
    Ok(form)
}

impl<T: Real> SelfAdjointGlobalForm<T> {
    /// Reads the blocks of a pair already in the canonical layout.
    pub fn from_pair(p: usize, pair: MatrixPair<T>, transform: CongruenceTransform<T>) -> Result<Self> {
        let n = pair.n();
        if 2 * p > n {
            return Err(DaeError::Shape(format!("p = {p} for a pair of size {n}")));
        }
        let a = n - 2 * p;
        let (k, l) = (p, 2 * p);
        Ok(Self {
            p,
            e33: pair.e.block(l, l, a, a)?,
            a22: pair.a.block(k, k, p, p)?,
            a23: pair.a.block(k, l, p, a)?,
            a32: pair.a.block(l, k, a, p)?,
            a33: pair.a.block(l, l, a, a)?,
            transform,
            pair,
        })
    }

    /// Assembles the canonical pair from its blocks.
    pub fn from_blocks(
        p: usize,
        e33: MatrixFunction<T>,
        a22: MatrixFunction<T>,
        a23: MatrixFunction<T>,
        a32: MatrixFunction<T>,
        a33: MatrixFunction<T>,
        interval: TimeGrid<T>,
    ) -> Result<Self> {
        let a = e33.rows();
        let i = MatrixFunction::identity(p);
        let mi = i.scale(-T::one());
        let z = |r: usize, c: usize| MatrixFunction::<T>::zeros(r, c);
        let (zpp, zpa, zap) = (z(p, p), z(p, a), z(a, p));
        let e = MatrixFunction::assemble(&[
            vec![&zpp, &i, &zpa],
            vec![&mi, &zpp, &zpa],
            vec![&zap, &zap, &e33],
        ])?;
        let am = MatrixFunction::assemble(&[
            vec![&zpp, &zpp, &zpa],
            vec![&zpp, &a22, &a23],
            vec![&zap, &a32, &a33],
        ])?;
        let n = 2 * p + a;
        Self::from_pair(p, MatrixPair::new(e, am, interval)?, CongruenceTransform::identity(n))
    }
}

/// Skew-adjoint global form by the proof construction.
pub fn global_canonical_skew<T: Real>(
    pair: &MatrixPair<T>,
    basis: &SolutionBasis<T>,
    grid: &TimeGrid<T>,
) -> Result<SkewAdjointGlobalForm<T>> {
    let work = working_pair(pair, grid)?;
    let n = work.n();
    let tol0 = structure::default_tolerance(&work, grid)?;
    let rep = structure::skew_adjoint_residual(&work, grid)?;
    if !rep.passes(tol0) {
        return Err(DaeError::Precondition(format!(
            "pair is not skew-adjoint (residual {:e})",
            to_f64(rep.max_residual())
        )));
    }
    if basis.phi.rows() != n || basis.phi.cols() != basis.d {
        return Err(DaeError::Shape(format!("basis {:?} for a pair of size {n}", basis.phi.shape())));
    }
    let d = basis.d;
    let a = n - d;
    if d == 0 {
        return SkewAdjointGlobalForm::from_pair(0, 0, work, CongruenceTransform::identity(n));
    }

    let t1 = staged("basis completion", completion(basis, grid))?;
    let p1 = staged("basis completion", structure::apply_congruence(&work, &t1))?;
    staged("basis completion", check_structure(&p1, grid, Adjointness::SkewAdjoint))?;
    let stol = lit::<T>(STAGE_TOL) * scale_of(&p1, grid)?;
    staged(
        "basis completion",
        expect_block(&p1.a, grid, (0, 0, n, d), &DMatrix::zeros(n, d), stol, "A Φ - E Φ̇ after completion"),
    )?;
    let e11 = linalg::sym_part(&sub(&p1.e.eval(grid.t0())?, 0, 0, d, d));
    staged("basis completion", expect_block(&p1.e, grid, (0, 0, d, d), &e11, stol, "constancy of E11"))?;

    let eig = linalg::sym_eigen_sorted(&e11);
    let emax = eig.values.iter().fold(T::zero(), |m, &l| m.max(l.abs()));
    let r = eig.values.iter().filter(|&&l| l.abs() <= lit::<T>(1e-8) * emax).count();
    if r > 0 || emax == T::zero() {
        return Err(DaeError::BasisDeficiency { r: r.max(1) }.at_stage("inertia normalization"));
    }
    let inertia = staged(
        "inertia normalization",
        factor::smooth_inertia(&MatrixFunction::constant(e11)?, grid),
    )?;
    let (pp, qq) = (inertia.p, inertia.q);
    let w = inertia.w.eval(grid.t0())?;
    let t2 = CongruenceTransform::new(MatrixFunction::constant(block_diag(&w, &DMatrix::identity(a, a)))?)?;
    let p2 = staged("inertia normalization", structure::apply_congruence(&p1, &t2))?;
    staged("inertia normalization", check_structure(&p2, grid, Adjointness::SkewAdjoint))?;
    let s = signature::<T>(pp, qq);
    staged("inertia normalization", expect_block(&p2.e, grid, (0, 0, d, d), &s, stol, "signature block"))?;

    let t3 = staged(
        "final elimination",
        sampled_transform(grid, |t| {
            let (e, ed) = (p2.e.eval(t)?, p2.e.derivative(t)?);
            let mut q = DMatrix::identity(n, n);
            let mut qd = DMatrix::zeros(n, n);
            put(&mut q, 0, d, &-(&s * sub(&e, 0, d, d, a)));
            put(&mut qd, 0, d, &-(&s * sub(&ed, 0, d, d, a)));
            Ok((q, qd))
        }),
    )?;
    let p3 = staged("final elimination", structure::apply_congruence(&p2, &t3))?;
    staged("final elimination", check_structure(&p3, grid, Adjointness::SkewAdjoint))?;

    let transform = structure::compose(&structure::compose(&t1, &t2)?, &t3)?;
    let form = SkewAdjointGlobalForm::from_pair(pp, qq, p3, transform)?;
    let rep = verify_skew_global_form(&form, grid, stol)?;
    if rep.pattern > stol {
        return Err(DaeError::Consistency { what: "canonical zero pattern".into(), residual: to_f64(rep.pattern) }
            .at_stage("final elimination"));
    }
    Ok(form)
}

impl<T: Real> SkewAdjointGlobalForm<T> {
    pub fn from_pair(p: usize, q: usize, pair: MatrixPair<T>, transform: CongruenceTransform<T>) -> Result<Self> {
        let n = pair.n();
        if p + q > n {
            return Err(DaeError::Shape(format!("p + q = {} for a pair of size {n}", p + q)));
        }
        let d = p + q;
        let a = n - d;
        Ok(Self { p, q, e33: pair.e.block(d, d, a, a)?, a33: pair.a.block(d, d, a, a)?, transform, pair })
    }

    pub fn from_blocks(
        p: usize,
        q: usize,
        e33: MatrixFunction<T>,
        a33: MatrixFunction<T>,
        interval: TimeGrid<T>,
    ) -> Result<Self> {
        let s = MatrixFunction::constant(signature::<T>(p, q))?;
        let z = MatrixFunction::zeros(p + q, p + q);
        let e = MatrixFunction::block_diag(&[&s, &e33])?;
        let am = MatrixFunction::block_diag(&[&z, &a33])?;
        let n = p + q + e33.rows();
        Self::from_pair(p, q, MatrixPair::new(e, am, interval)?, CongruenceTransform::identity(n))
    }
}

/// Residuals of the self-adjoint global form.
#[derive(Clone, Debug, PartialEq)]
pub struct SelfGlobalReport<T> {
    /// `‖E33 + E33ᵀ‖`.
    pub e33_skew: T,
    /// `‖A22 - A22ᵀ‖`.
    pub a22_sym: T,
    /// `‖A32ᵀ - A23‖`.
    pub a23_a32: T,
    /// `‖A33ᵀ - A33 - Ė33‖`.
    pub a33: T,
    /// Defect of the canonical zero/identity pattern of the transformed pair.
    pub pattern: T,
    /// Nilpotency defect of the algebraic subsystem `(E33, A33)`.
    pub algebraic: T,
}

impl<T: Real> SelfGlobalReport<T> {
    pub fn max(&self) -> T {
        [self.e33_skew, self.a22_sym, self.a23_a32, self.a33, self.pattern, self.algebraic]
            .into_iter()
            .fold(T::zero(), |m, x| m.max(x))
    }

    pub fn passes(&self, tol: T) -> bool {
        self.max() <= tol
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct SkewGlobalReport<T> {
    /// `‖E33 - E33ᵀ‖`.
    pub e33_sym: T,
    /// `‖A33ᵀ + A33 + Ė33‖`.
    pub a33: T,
    pub pattern: T,
    pub algebraic: T,
}

impl<T: Real> SkewGlobalReport<T> {
    pub fn max(&self) -> T {
        [self.e33_sym, self.a33, self.pattern, self.algebraic]
            .into_iter()
            .fold(T::zero(), |m, x| m.max(x))
    }

    pub fn passes(&self, tol: T) -> bool {
        self.max() <= tol
    }
}

/// `‖(A33⁻¹E33)^a‖`, infinite when `A33` is singular. Zero exactly when the
/// constant subsystem has no finite dynamics.
fn algebraic_defect<T: Real>(e33: &DMatrix<T>, a33: &DMatrix<T>) -> T {
    let a = e33.nrows();
    if a == 0 {
        return T::zero();
    }
    if linalg::inverse_condition(a33) <= lit::<T>(1e-12) {
        return T::max_value().unwrap();
    }
    match linalg::solve(a33, e33) {
        None => T::max_value().unwrap(),
        Some(nmat) => {
            let mut pw = DMatrix::identity(a, a);
            for _ in 0..a {
                pw = &pw * &nmat;
            }
            pw.norm() / (T::one() + nmat.norm()).powi(a as i32)
        }
    }
}

fn pattern_defect<T: Real>(
    have: &MatrixPair<T>,
    want_e: &DMatrix<T>,
    want_a: &DMatrix<T>,
    t: T,
) -> Result<T> {
    let (e, a) = (have.e.eval(t)?, have.a.eval(t)?);
    Ok((e - want_e).norm().max((a - want_a).norm()))
}

pub fn verify_self_global_form<T: Real>(
    form: &SelfAdjointGlobalForm<T>,
    grid: &TimeGrid<T>,
    _tol: T,
) -> Result<SelfGlobalReport<T>> {
    let p = form.p;
    let n = form.pair.n();
    let a = n - 2 * p;
    let mut rep = SelfGlobalReport {
        e33_skew: T::zero(),
        a22_sym: T::zero(),
        a23_a32: T::zero(),
        a33: T::zero(),
        pattern: T::zero(),
        algebraic: T::zero(),
    };
    for &t in grid.points() {
        let e33 = form.e33.eval(t)?;
        let a22 = form.a22.eval(t)?;
        let a33 = form.a33.eval(t)?;
        rep.e33_skew = rep.e33_skew.max((&e33 + e33.transpose()).norm());
        rep.a22_sym = rep.a22_sym.max((&a22 - a22.transpose()).norm());
        rep.a23_a32 = rep.a23_a32.max((form.a32.eval(t)?.transpose() - form.a23.eval(t)?).norm());
        rep.a33 = rep.a33.max((a33.transpose() - &a33 - form.e33.derivative(t)?).norm());
        let mut we = DMatrix::zeros(n, n);
        put(&mut we, 0, p, &DMatrix::identity(p, p));
        put(&mut we, p, 0, &-DMatrix::<T>::identity(p, p));
        put(&mut we, 2 * p, 2 * p, &e33);
        let mut wa = DMatrix::zeros(n, n);
        put(&mut wa, p, p, &a22);
        put(&mut wa, p, 2 * p, &form.a23.eval(t)?);
        put(&mut wa, 2 * p, p, &form.a32.eval(t)?);
        put(&mut wa, 2 * p, 2 * p, &a33);
        rep.pattern = rep.pattern.max(pattern_defect(&form.pair, &we, &wa, t)?);
        if a > 0 {
            rep.algebraic = rep.algebraic.max(algebraic_defect(&e33, &a33));
        }
    }
    Ok(rep)
}

pub fn verify_skew_global_form<T: Real>(
    form: &SkewAdjointGlobalForm<T>,
    grid: &TimeGrid<T>,
    _tol: T,
) -> Result<SkewGlobalReport<T>> {
    let d = form.p + form.q;
    let n = form.pair.n();
    let s = signature::<T>(form.p, form.q);
    let mut rep = SkewGlobalReport { e33_sym: T::zero(), a33: T::zero(), pattern: T::zero(), algebraic: T::zero() };
    for &t in grid.points() {
        let e33 = form.e33.eval(t)?;
        let a33 = form.a33.eval(t)?;
        rep.e33_sym = rep.e33_sym.max((&e33 - e33.transpose()).norm());
        rep.a33 = rep.a33.max((a33.transpose() + &a33 + form.e33.derivative(t)?).norm());
        let mut we = DMatrix::zeros(n, n);
        put(&mut we, 0, 0, &s);
        put(&mut we, d, d, &e33);
        let mut wa = DMatrix::zeros(n, n);
        put(&mut wa, d, d, &a33);
        rep.pattern = rep.pattern.max(pattern_defect(&form.pair, &we, &wa, t)?);
        rep.algebraic = rep.algebraic.max(algebraic_defect(&e33, &a33));
    }
    Ok(rep)
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum LocalVariant {
    /// Orthogonal self-adjoint layout with `Δᵀ = -Δ`.
    SelfOrthogonal,
    /// Refined self-adjoint layout with the canonical `J` and symmetric `C`.
    SelfRefined,
    /// Orthogonal skew-adjoint layout with `Δᵀ = Δ`.
    SkewOrthogonal,
    /// Refined skew-adjoint layout with the signature `S` and skew `J`.
    SkewRefined,
}

impl LocalVariant {
    fn is_self(self) -> bool {
        matches!(self, LocalVariant::SelfOrthogonal | LocalVariant::SelfRefined)
    }

    fn is_refined(self) -> bool {
        matches!(self, LocalVariant::SelfRefined | LocalVariant::SkewRefined)
    }
}

/// A pair claimed to be in a local canonical layout with four block rows of
/// sizes `(m, middle, sigma22, m)`, `m = Σ chain`. Block 2 carries `Δ`, `J`
/// or `S`; block 3 carries `Σ22`; the chain sizes are those of `Γ_1, …, Γ_w`.
#[derive(Clone, Debug)]
pub struct LocalFormBlocks<T: Real> {
    pub variant: LocalVariant,
    pub pair: MatrixPair<T>,
    pub middle: usize,
    pub sigma22: usize,
    pub chain: Vec<usize>,
}

#[derive(Clone, Debug, PartialEq)]
pub struct LocalFormReport<T> {
    /// Largest defect among the variant's symmetry relations.
    pub relations: T,
    /// Largest defect of the required zero (and identity) blocks.
    pub pattern: T,
    /// Smallest `σ_min/σ_max` over `Δ`, `Σ22` and the `Γ_i`.
    pub min_rcond: T,
}

impl<T: Real> LocalFormReport<T> {
    pub fn passes(&self, tol: T) -> bool {
        self.relations <= tol && self.pattern <= tol && self.min_rcond > lit::<T>(1e-12)
    }
}

pub fn verify_local_form<T: Real>(
    blocks: &LocalFormBlocks<T>,
    grid: &TimeGrid<T>,
    _tol: T,
) -> Result<LocalFormReport<T>> {
    let m: usize = blocks.chain.iter().sum();
    let (k, s2) = (blocks.middle, blocks.sigma22);
    let n = blocks.pair.n();
    if 2 * m + k + s2 != n {
        return Err(DaeError::Shape(format!(
            "block sizes ({m}, {k}, {s2}, {m}) do not add up to {n}"
        )));
    }
    let variant = blocks.variant;
    if variant == LocalVariant::SelfRefined && k % 2 == 1 {
        return Err(DaeError::Shape(format!("J block of odd size {k}")));
    }
    let (o2, o3, o4) = (m, m + k, m + k + s2);
    let w = blocks.chain.len();
    // offsets of the chain blocks inside E14 / A14
    let col_off: Vec<usize> = blocks.chain.iter().scan(0, |acc, &s| { let o = *acc; *acc += s; Some(o) }).collect();
    // row block i holds Γ_{w-i}
    let row_sizes: Vec<usize> = (0..w).map(|i| blocks.chain[w - 1 - i]).collect();
    let row_off: Vec<usize> = row_sizes.iter().scan(0, |acc, &s| { let o = *acc; *acc += s; Some(o) }).collect();

    let sgn = if variant.is_self() { T::one() } else { -T::one() };
    let mut rep = LocalFormReport { relations: T::zero(), pattern: T::zero(), min_rcond: T::max_value().unwrap() };
    for &t in grid.points() {
        let (e, a) = blocks.pair.eval(t)?;
        let ed = blocks.pair.e.derivative(t)?;
        let z = |mm: &DMatrix<T>, r0, c0, nr, nc| sub(mm, r0, c0, nr, nc).norm();
        let mut pat = T::zero();
        for (r0, nr) in [(o2, k), (o3, s2), (o4, m)] {
            for (c0, nc) in [(o2, k), (o3, s2), (o4, m)] {
                if !(r0 == o2 && c0 == o2) {
                    pat = pat.max(z(&e, r0, c0, nr, nc));
                }
            }
        }
        for (r0, nr, c0, nc) in [(o2, k + s2, o4, m), (o4, m, o2, k + s2 + m)] {
            pat = pat.max(z(&a, r0, c0, nr, nc));
        }
        if variant.is_refined() {
            pat = pat.max(z(&a, o2, o3, k, s2)).max(z(&a, o3, o2, s2, k));
        }
        let e14 = sub(&e, 0, o4, m, m);
        let a14 = sub(&a, 0, o4, m, m);
        for i in 0..w {
            for j in 0..w {
                let (r0, nr, c0, nc) = (row_off[i], row_sizes[i], col_off[j], blocks.chain[j]);
                let anti = i + j + 1 == w;
                if i + j + 1 >= w {
                    pat = pat.max(z(&e14, r0, c0, nr, nc));
                }
                if i + j + 1 > w {
                    pat = pat.max(z(&a14, r0, c0, nr, nc));
                }
                if anti {
                    let g = sub(&a14, r0, c0, nr, nc);
                    rep.min_rcond = rep.min_rcond.min(linalg::inverse_condition(&g));
                    if variant.is_refined() {
                        pat = pat.max((g - DMatrix::identity(nr, nc)).norm());
                    }
                }
            }
        }
        rep.pattern = rep.pattern.max(pat);

        let mid = sub(&e, o2, o2, k, k);
        let mid_d = sub(&ed, o2, o2, k, k);
        let s11 = sub(&a, o2, o2, k, k);
        let s12 = sub(&a, o2, o3, k, s2);
        let s21 = sub(&a, o3, o2, s2, k);
        let s22 = sub(&a, o3, o3, s2, s2);
        let a41 = sub(&a, o4, 0, m, m);
        let e14d = sub(&ed, 0, o4, m, m);
        let e41 = sub(&e, o4, 0, m, m);
        let mut rel = (a41.transpose() - (&a14 + &e14d) * sgn).norm();
        rel = rel.max((e41 + e14.transpose() * sgn).norm());
        rel = rel.max((&s22.transpose() - &s22 * sgn).norm());
        match variant {
            LocalVariant::SelfOrthogonal | LocalVariant::SkewOrthogonal => {
                rel = rel.max((mid.transpose() + &mid * sgn).norm());
                rel = rel.max((s11.transpose() - (&s11 + &mid_d) * sgn).norm());
                rel = rel.max((s21.transpose() - &s12 * sgn).norm());
                rep.min_rcond = rep.min_rcond.min(linalg::inverse_condition(&mid));
            }
            LocalVariant::SelfRefined => {
                let h = k / 2;
                let mut j = DMatrix::zeros(k, k);
                put(&mut j, 0, h, &DMatrix::identity(h, h));
                put(&mut j, h, 0, &-DMatrix::<T>::identity(h, h));
                rel = rel.max((&mid - j).norm());
                rel = rel.max((s11.transpose() - &s11).norm());
            }
            LocalVariant::SkewRefined => {
                let p = (0..k).filter(|&i| mid[(i, i)] > T::zero()).count();
                rel = rel.max((&mid - signature::<T>(p, k - p)).norm());
                rel = rel.max((s11.transpose() + &s11).norm());
            }
        }
        if s2 > 0 {
            rep.min_rcond = rep.min_rcond.min(linalg::inverse_condition(&s22));
        }
        rep.relations = rep.relations.max(rel);
    }
    Ok(rep)
}
