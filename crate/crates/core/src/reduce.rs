//! Extraction of the dynamic core of a structured system, together with the
//! affine maps that recover the eliminated variables.

use nalgebra::{DMatrix, DVector};

use crate::canonical::SelfAdjointGlobalForm;
use crate::error::{DaeError, Result};
use crate::factor::{row_rank_normalize, sym_rank_split, DEFAULT_GAP_TOL};
use crate::linalg::{checked_inverse, put, spd_sqrt, spd_sqrt_derivative, sub, sym_eigen_sorted};
use crate::matfun::{Interp, MatrixFunction, MatrixPair, TimeGrid};
use crate::scalar::{lit, to_f64, Real};
use crate::structure::{apply_congruence, compose, default_tolerance, skew_adjoint_residual, CongruenceTransform};

/// Smallest admissible `σ_min/σ_max` of a block that is eliminated.
pub const REGULARITY_RCOND: f64 = 1e-12;

/// Quadratic form preserved by the flow of `ẋ = M x`.
#[derive(Clone, Debug, PartialEq)]
pub enum Certificate<T: Real> {
    /// `MᵀJ + JM = 0`.
    Symplectic(DMatrix<T>),
    /// `MᵀS + SM = 0`.
    IndefiniteOrthogonal(DMatrix<T>),
    /// `Mᵀ + M = 0`.
    Orthogonal,
}

impl<T: Real> Certificate<T> {
    pub fn name(&self) -> &'static str {
        match self {
            Certificate::Symplectic(_) => "symplectic",
            Certificate::IndefiniteOrthogonal(_) => "indefinite-orthogonal",
            Certificate::Orthogonal => "orthogonal",
        }
    }

    /// The matrix `B` of the invariant form on a space of dimension `n`.
    pub fn form(&self, n: usize) -> DMatrix<T> {
        match self {
            Certificate::Symplectic(b) | Certificate::IndefiniteOrthogonal(b) => b.clone(),
            Certificate::Orthogonal => DMatrix::identity(n, n),
        }
    }

    /// `‖MᵀB + BM‖_F`.
    pub fn lie_defect(&self, m: &DMatrix<T>) -> T {
        let b = self.form(m.nrows());
        (m.transpose() * &b + &b * m).norm()
    }
}

/// `y = X(t) x₂ + Σ_k F_k(t) f⁽ᵏ⁾(t)`; `forcing[k]` multiplies the k-th
/// derivative of the inhomogeneity.
#[derive(Clone, Debug)]
pub struct AffineMap<T: Real> {
    pub label: String,
    pub state: MatrixFunction<T>,
    pub forcing: Vec<MatrixFunction<T>>,
}

impl<T: Real> AffineMap<T> {
    pub fn rows(&self) -> usize {
        self.state.rows()
    }

    /// Highest derivative order of the inhomogeneity with a nonzero
    /// coefficient on `grid`.
    pub fn derivative_order(&self, grid: &TimeGrid<T>) -> Result<Option<usize>> {
        let mut order = None;
        for (k, f) in self.forcing.iter().enumerate() {
            if f.max_norm(grid)? > T::zero() {
                order = Some(k);
            }
        }
        Ok(order)
    }

    pub fn apply(&self, t: T, x: &DVector<T>, fs: &[DVector<T>]) -> Result<DVector<T>> {
        let mut y = self.state.eval(t)? * x;
        for (fk, v) in self.forcing.iter().zip(fs) {
            y += fk.eval(t)? * v;
        }
        Ok(y)
    }
}

/// `ẋ₂ = M(t) x₂ + g(t)` with `g = Σ_k G_k f⁽ᵏ⁾` and maps back to the
/// original variables.
#[derive(Clone, Debug)]
pub struct ReducedSystem<T: Real> {
    pub dynamic_dim: usize,
    pub m: MatrixFunction<T>,
    /// `input_map[k]` multiplies the k-th derivative of `forcing`.
    pub input_map: Vec<MatrixFunction<T>>,
    pub forcing: MatrixFunction<T>,
    /// Consecutive pieces of the original state vector.
    pub recovery: Vec<AffineMap<T>>,
    pub certificate: Certificate<T>,
    /// `E` of the original system, used for `H = ½xᵀEx`.
    pub energy: Option<MatrixFunction<T>>,
    pub grid: TimeGrid<T>,
}

impl<T: Real> ReducedSystem<T> {
    pub fn full_dim(&self) -> usize {
        self.recovery.iter().map(|r| r.rows()).sum()
    }

    /// `[f(t), ḟ(t), …]` up to the order the maps need.
    pub fn forcing_values(&self, t: T) -> Result<Vec<DVector<T>>> {
        let order = self
            .input_map
            .len()
            .max(self.recovery.iter().map(|r| r.forcing.len()).max().unwrap_or(0));
        let mut out = Vec::with_capacity(order);
        for k in 0..order {
            let v = match k {
                0 => self.forcing.eval(t)?,
                1 => self.forcing.derivative(t)?,
                _ => return Err(DaeError::Unsupported("forcing derivatives beyond the first".into())),
            };
            out.push(v.column(0).into_owned());
        }
        Ok(out)
    }

    pub fn rhs(&self, t: T) -> Result<DVector<T>> {
        let fs = self.forcing_values(t)?;
        let mut g = DVector::zeros(self.dynamic_dim);
        for (gk, v) in self.input_map.iter().zip(&fs) {
            g += gk.eval(t)? * v;
        }
        Ok(g)
    }

    pub fn reconstruct(&self, t: T, x: &DVector<T>) -> Result<DVector<T>> {
        let fs = self.forcing_values(t)?;
        let mut out = DVector::zeros(self.full_dim());
        let mut r0 = 0;
        for map in &self.recovery {
            let y = map.apply(t, x, &fs)?;
            out.rows_mut(r0, y.len()).copy_from(&y);
            r0 += y.len();
        }
        Ok(out)
    }

    /// Dynamic coordinates of a full state, in the least-squares sense when
    /// `x` is not consistent.
    pub fn initial_state(&self, t: T, x: &DVector<T>) -> Result<DVector<T>> {
        if x.len() != self.full_dim() {
            return Err(DaeError::Shape(format!("state of length {} for size {}", x.len(), self.full_dim())));
        }
        let offset = self.reconstruct(t, &DVector::zeros(self.dynamic_dim))?;
        let mut lift = DMatrix::zeros(self.full_dim(), self.dynamic_dim);
        let mut r0 = 0;
        for map in &self.recovery {
            let s = map.state.eval(t)?;
            put(&mut lift, r0, 0, &s);
            r0 += s.nrows();
        }
        if self.dynamic_dim == 0 {
            return Ok(DVector::zeros(0));
        }
        lift.svd(true, true)
            .solve(&(x - offset), lit(1e-14))
            .map_err(|e| DaeError::Consistency { what: e.to_string(), residual: f64::NAN })
    }

    /// Highest inhomogeneity derivative any recovery map uses.
    pub fn max_forcing_derivative(&self) -> Result<Option<usize>> {
        let mut order = None;
        for map in &self.recovery {
            order = order.max(map.derivative_order(&self.grid)?);
        }
        Ok(order)
    }

    /// Largest `‖MᵀB + BM‖_F` over `grid`.
    pub fn lie_defect(&self, grid: &TimeGrid<T>) -> Result<T> {
        let mut worst = T::zero();
        for &t in grid.points() {
            worst = worst.max(self.certificate.lie_defect(&self.m.eval(t)?));
        }
        Ok(worst)
    }
}

fn pack<T: Real>(grid: &TimeGrid<T>, mut values: Vec<DMatrix<T>>) -> Result<MatrixFunction<T>> {
    if values.len() == 1 {
        MatrixFunction::constant(values.swap_remove(0))
    } else {
        MatrixFunction::sampled(grid.clone(), values, Interp::Cubic)
    }
}

fn sample_times<T: Real>(grid: &TimeGrid<T>, constant: bool) -> Vec<T> {
    if constant {
        vec![grid.t0()]
    } else {
        grid.points().to_vec()
    }
}

fn vstack<T: Real>(parts: &[&DMatrix<T>]) -> DMatrix<T> {
    let cols = parts.first().map(|p| p.ncols()).unwrap_or(0);
    let rows = parts.iter().map(|p| p.nrows()).sum();
    let mut out = DMatrix::zeros(rows, cols);
    let mut r0 = 0;
    for p in parts {
        put(&mut out, r0, 0, p);
        r0 += p.nrows();
    }
    out
}

fn inv<T: Real>(a: &DMatrix<T>, what: &str, t: T) -> Result<DMatrix<T>> {
    checked_inverse(a, what, t, lit(REGULARITY_RCOND))
}

fn staged<X>(step: &'static str, r: Result<X>) -> Result<X> {
    r.map_err(|e| e.at_stage(step))
}

fn block_diag_fn<T: Real>(a: &MatrixFunction<T>, b: &MatrixFunction<T>) -> Result<MatrixFunction<T>> {
    MatrixFunction::block_diag(&[a, b])
}

/// Sizes of the layout `(w1, w2, z3, z4)` produced by the semidefinite
/// pipeline: `m` constrained, `d` dynamic, `s` skew-eliminated, `m` multipliers.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct SemidefiniteLayout {
    pub constrained: usize,
    pub dynamic: usize,
    pub skew: usize,
}

/// Reduction of a skew-adjoint system `E ẋ = A x + f` with pointwise
/// positive semidefinite `E` to an ODE with skew-symmetric coefficient.
pub fn semidefinite_skew_reduce<T: Real>(
    pair: &MatrixPair<T>,
    f: &MatrixFunction<T>,
    grid: &TimeGrid<T>,
) -> Result<ReducedSystem<T>> {
    semidefinite_skew_reduce_with_layout(pair, f, grid).map(|(sys, _)| sys)
}

pub fn semidefinite_skew_reduce_with_layout<T: Real>(
    pair: &MatrixPair<T>,
    f: &MatrixFunction<T>,
    grid: &TimeGrid<T>,
) -> Result<(ReducedSystem<T>, SemidefiniteLayout)> {
    pair.check_grid(grid)?;
    let n = pair.n();
    if f.shape() != (n, 1) {
        return Err(DaeError::Shape(format!("forcing {:?} for a system of size {n}", f.shape())));
    }
    let pair = MatrixPair::new(pair.e.clone(), pair.a.clone(), grid.clone())?;
    let tol = default_tolerance(&pair, grid)?;
    let res = skew_adjoint_residual(&pair, grid)?.max_residual();
    if res > tol {
        return Err(DaeError::Precondition(format!("pair is not skew-adjoint (residual {:e})", to_f64(res))));
    }
    let scale = pair.e.max_norm(grid)?.max(pair.a.max_norm(grid)?);
    let floor = lit::<T>(1e-12) * (T::one() + scale);
    for &t in grid.points() {
        let e = pair.e.eval(t)?;
        let low = sym_eigen_sorted(&e).values.last().copied().unwrap_or(T::zero());
        if low < -floor {
            return Err(DaeError::Precondition(format!(
                "E is indefinite at t = {} (eigenvalue {:e})",
                to_f64(t),
                to_f64(low)
            )));
        }
    }
    let gap = lit::<T>(DEFAULT_GAP_TOL);

    let split = staged("kernel split", sym_rank_split(&pair.e, grid, gap))?;
    let r = split.r;
    let k = n - r;
    let t1 = CongruenceTransform::new(split.q)?;
    let p1 = apply_congruence(&pair, &t1)?;

    let a22 = p1.a.block(r, r, k, k)?;
    let (z, s) = if k == 0 || a22.max_norm(grid)? <= floor {
        (MatrixFunction::identity(k), 0)
    } else {
        let zs = staged("algebraic split", sym_rank_split(&a22, grid, gap))?;
        (zs.q, zs.r)
    };
    let t2 = CongruenceTransform::new(block_diag_fn(&MatrixFunction::identity(r), &z)?)?;
    let p2 = apply_congruence(&p1, &t2)?;

    let mm = k - s;
    if mm > r {
        return Err(DaeError::Irregular);
    }
    let t3 = if mm == 0 {
        CongruenceTransform::identity(n)
    } else {
        let a14 = p2.a.block(0, r + s, r, mm)?;
        if a14.max_norm(grid)? <= floor {
            return Err(DaeError::Irregular);
        }
        let rr = staged("constraint normalization", row_rank_normalize(&a14, grid))?;
        CongruenceTransform::new(block_diag_fn(&rr.u, &MatrixFunction::identity(k))?)?
    };
    let p3 = apply_congruence(&p2, &t3)?;
    let total = compose(&compose(&t1, &t2)?, &t3)?;

    let b = r - mm;
    let (o2, o3, o4) = (mm, r, r + s);
    let times = sample_times(grid, pair.is_constant());

    let mut ms = Vec::new();
    let (mut g0s, mut g1s) = (Vec::new(), Vec::new());
    let (mut xs, mut f0s, mut f1s) = (Vec::new(), Vec::new(), Vec::new());
    for &t in &times {
        let e3 = p3.e.eval(t)?;
        let ed3 = p3.e.derivative(t)?;
        let a3 = p3.a.eval(t)?;
        let ad3 = p3.a.derivative(t)?;
        let tq = total.q.eval(t)?;
        let tqd = total.qdot.eval(t)?;
        let c = tq.transpose();
        let cd = tqd.transpose();
        let rows = |m: &DMatrix<T>, r0: usize, nr: usize| sub(m, r0, 0, nr, n);

        let s11 = sub(&e3, 0, 0, mm, mm);
        let s12 = sub(&e3, 0, o2, mm, b);
        let s21 = sub(&e3, o2, 0, b, mm);
        let s22 = sub(&e3, o2, o2, b, b);
        let s22d = sub(&ed3, o2, o2, b, b);
        let a11aa = sub(&a3, 0, 0, mm, mm);
        let a11ab = sub(&a3, 0, o2, mm, b);
        let a11ba = sub(&a3, o2, 0, b, mm);
        let a11bb = sub(&a3, o2, o2, b, b);
        let a13a = sub(&a3, 0, o3, mm, s);
        let a13b = sub(&a3, o2, o3, b, s);
        let a31a = sub(&a3, o3, 0, s, mm);
        let a31b = sub(&a3, o3, o2, s, b);
        let sig22 = sub(&a3, o3, o3, s, s);
        let b1 = sub(&a3, 0, o4, mm, mm);
        let a41 = sub(&a3, o4, 0, mm, mm);
        let a41d = sub(&ad3, o4, 0, mm, mm);

        let a41i = staged("constraint elimination", inv(&a41, "constraint block", t))?;
        let b1i = staged("multiplier elimination", inv(&b1, "multiplier block", t))?;
        let sig_i = staged("algebraic elimination", inv(&sig22, "skew algebraic block", t))?;
        let (_, root_inv, eig) = spd_sqrt(&s22).ok_or_else(|| {
            DaeError::Precondition(format!("dynamic mass block is not positive definite at t = {}", to_f64(t)))
        })?;
        let root_d = spd_sqrt_derivative(&eig, &s22d);
        let s22i = &root_inv * &root_inv;

        let c2 = rows(&c, o2, b);
        let c3 = rows(&c, o3, s);
        let c4 = rows(&c, o4, mm);
        let c1a = rows(&c, 0, mm);
        let cd4 = rows(&cd, o4, mm);

        // w1 = -A41⁻¹ f̃4
        let w1_0 = -(&a41i * &c4);
        let wd1_0 = &a41i * &a41d * &a41i * &c4 - &a41i * &cd4;
        let wd1_1 = -(&a41i * &c4);
        // z3 = -Σ22⁻¹ (A31 w + f̃3)
        let z3_x = -(&sig_i * &a31b);
        let z3_0 = -(&sig_i * (&a31a * &w1_0 + &c3));
        let kk = &a11bb + &a13b * &z3_x;
        let g0 = -(&s21 * &wd1_0) + &a11ba * &w1_0 + &a13b * &z3_0 + &c2;
        let g1 = -(&s21 * &wd1_1);
        // z4 from the first block row with ẇ2 substituted
        let z4_x = &b1i * (&s12 * &s22i * &kk - &a11ab - &a13a * &z3_x);
        let z4_0 = &b1i * (&s11 * &wd1_0 + &s12 * &s22i * &g0 - &a11aa * &w1_0 - &a13a * &z3_0 - &c1a);
        let z4_1 = &b1i * (&s11 * &wd1_1 + &s12 * &s22i * &g1);

        ms.push(&root_inv * &kk * &root_inv + &root_d * &root_inv);
        g0s.push(&root_inv * &g0);
        g1s.push(&root_inv * &g1);
        let zero_w = DMatrix::zeros(mm, b);
        xs.push(&tq * vstack(&[&zero_w, &root_inv, &(&z3_x * &root_inv), &(&z4_x * &root_inv)]));
        f0s.push(&tq * vstack(&[&w1_0, &DMatrix::zeros(b, n), &z3_0, &z4_0]));
        let zeros_f = DMatrix::zeros(mm, n);
        f1s.push(&tq * vstack(&[&zeros_f, &DMatrix::zeros(b, n), &DMatrix::zeros(s, n), &z4_1]));
    }
    let recovery = AffineMap { label: "x".into(), state: pack(grid, xs)?, forcing: vec![pack(grid, f0s)?, pack(grid, f1s)?] };
    let sys = ReducedSystem {
        dynamic_dim: b,
        m: pack(grid, ms)?,
        input_map: vec![pack(grid, g0s)?, pack(grid, g1s)?],
        forcing: f.clone(),
        recovery: vec![recovery],
        certificate: Certificate::Orthogonal,
        energy: Some(pair.e.clone()),
        grid: grid.clone(),
    };
    Ok((sys, SemidefiniteLayout { constrained: mm, dynamic: b, skew: s }))
}

/// Stokes-type system `diag(M, 0) [v̇; ṗ] = [[J, -B], [Bᵀ, 0]] [v; p] + [f; 0]`
/// with constant `M`, `B`.
pub fn stokes_reduce<T: Real>(
    mass: &DMatrix<T>,
    b: &DMatrix<T>,
    jfun: &MatrixFunction<T>,
    f: &MatrixFunction<T>,
    grid: &TimeGrid<T>,
) -> Result<ReducedSystem<T>> {
    let (nv, np) = b.shape();
    if mass.shape() != (nv, nv) || jfun.shape() != (nv, nv) || f.shape() != (nv, 1) {
        return Err(DaeError::Shape(format!(
            "M {:?}, B {:?}, J {:?}, f {:?}",
            mass.shape(),
            b.shape(),
            jfun.shape(),
            f.shape()
        )));
    }
    let sym = (mass - mass.transpose()).norm();
    if sym > lit::<T>(1e-12) * (T::one() + mass.norm()) || spd_sqrt(mass).is_none() {
        return Err(DaeError::Precondition("M is not symmetric positive definite".into()));
    }
    for &t in grid.points() {
        let j = jfun.eval(t)?;
        let d = (&j + j.transpose()).norm();
        if d > lit::<T>(1e-10) * (T::one() + j.norm()) {
            return Err(DaeError::Structure { what: format!("J is not skew at t = {}", to_f64(t)), residual: to_f64(d) });
        }
    }
    let bf = MatrixFunction::constant(b.clone())?;
    let rr = staged("gradient normalization", row_rank_normalize(&bf, grid))?;
    let t0 = grid.t0();
    let u = rr.u.eval(t0)?;
    let b1 = rr.b1.eval(t0)?;
    let dyn_dim = nv - np;
    let mt = u.transpose() * mass * &u;
    let m12 = sub(&mt, 0, np, np, dyn_dim);
    let m22 = sub(&mt, np, np, dyn_dim, dyn_dim);
    let (_, root_inv, _) = spd_sqrt(&m22)
        .ok_or_else(|| DaeError::Precondition("reduced mass block is not positive definite".into()))?;
    let m22i = &root_inv * &root_inv;
    let b1i = inv(&b1, "B1", t0)?;
    let u1t = u.columns(0, np).transpose();
    let u2t = u.columns(np, dyn_dim).transpose();
    let u2 = u.columns(np, dyn_dim).into_owned();

    let times = sample_times(grid, jfun.is_constant());
    let (mut ms, mut ps) = (Vec::new(), Vec::new());
    for &t in &times {
        let jt = u.transpose() * jfun.eval(t)? * &u;
        let j12 = sub(&jt, 0, np, np, dyn_dim);
        let j22 = sub(&jt, np, np, dyn_dim, dyn_dim);
        ms.push(&root_inv * &j22 * &root_inv);
        ps.push(&b1i * (&j12 - &m12 * &m22i * &j22) * &root_inv);
    }
    let p_forcing = &b1i * (&u1t - &m12 * &m22i * &u2t);
    let velocity = AffineMap {
        label: "v".into(),
        state: MatrixFunction::constant(&u2 * &root_inv)?,
        forcing: vec![MatrixFunction::zeros(nv, nv)],
    };
    let pressure = AffineMap {
        label: "p".into(),
        state: pack(grid, ps)?,
        forcing: vec![MatrixFunction::constant(p_forcing)?],
    };
    let mut e = DMatrix::zeros(nv + np, nv + np);
    put(&mut e, 0, 0, mass);
    Ok(ReducedSystem {
        dynamic_dim: dyn_dim,
        m: pack(grid, ms)?,
        input_map: vec![MatrixFunction::constant(&root_inv * u2t)?],
        forcing: f.clone(),
        recovery: vec![velocity, pressure],
        certificate: Certificate::Orthogonal,
        energy: Some(MatrixFunction::constant(e)?),
        grid: grid.clone(),
    })
}

/// `[[0, I_p], [-I_p, 0]]`.
pub fn canonical_j<T: Real>(p: usize) -> DMatrix<T> {
    let mut j = DMatrix::zeros(2 * p, 2 * p);
    for i in 0..p {
        j[(i, p + i)] = T::one();
        j[(p + i, i)] = -T::one();
    }
    j
}

/// Homogeneous core `J ẋ = C(t) x` with constant skew nonsingular `J` and
/// symmetric `C`.
pub fn hamiltonian_core<T: Real>(j: &DMatrix<T>, c: &MatrixFunction<T>, grid: &TimeGrid<T>) -> Result<ReducedSystem<T>> {
    let n = j.nrows();
    if j.shape() != (n, n) || c.shape() != (n, n) {
        return Err(DaeError::Shape(format!("J {:?} with C {:?}", j.shape(), c.shape())));
    }
    let ji = inv(j, "J", grid.t0())?;
    let times = sample_times(grid, c.is_constant());
    let mut ms = Vec::new();
    for &t in &times {
        let ct = c.eval(t)?;
        let d = (&ct - ct.transpose()).norm();
        if d > lit::<T>(1e-10) * (T::one() + ct.norm()) {
            return Err(DaeError::Structure { what: format!("C is not symmetric at t = {}", to_f64(t)), residual: to_f64(d) });
        }
        ms.push(&ji * ct);
    }
    Ok(ReducedSystem {
        dynamic_dim: n,
        m: pack(grid, ms)?,
        input_map: vec![],
        forcing: MatrixFunction::zeros(n, 1),
        recovery: vec![AffineMap { label: "x".into(), state: MatrixFunction::identity(n), forcing: vec![] }],
        certificate: Certificate::Symplectic(j.clone()),
        energy: None,
        grid: grid.clone(),
    })
}

/// Homogeneous core `S ẋ = J(t) x` with a signature matrix `S` and skew `J`.
pub fn indefinite_core<T: Real>(s: &DMatrix<T>, j: &MatrixFunction<T>, grid: &TimeGrid<T>) -> Result<ReducedSystem<T>> {
    let n = s.nrows();
    if s.shape() != (n, n) || j.shape() != (n, n) {
        return Err(DaeError::Shape(format!("S {:?} with J {:?}", s.shape(), j.shape())));
    }
    let si = inv(s, "S", grid.t0())?;
    let times = sample_times(grid, j.is_constant());
    let mut ms = Vec::new();
    for &t in &times {
        let jt = j.eval(t)?;
        let d = (&jt + jt.transpose()).norm();
        if d > lit::<T>(1e-10) * (T::one() + jt.norm()) {
            return Err(DaeError::Structure { what: format!("J is not skew at t = {}", to_f64(t)), residual: to_f64(d) });
        }
        ms.push(&si * jt);
    }
    Ok(ReducedSystem {
        dynamic_dim: n,
        m: pack(grid, ms)?,
        input_map: vec![],
        forcing: MatrixFunction::zeros(n, 1),
        recovery: vec![AffineMap { label: "x".into(), state: MatrixFunction::identity(n), forcing: vec![] }],
        certificate: Certificate::IndefiniteOrthogonal(s.clone()),
        energy: Some(MatrixFunction::constant(s.clone())?),
        grid: grid.clone(),
    })
}

fn is_constant_on<T: Real>(f: &MatrixFunction<T>, grid: &TimeGrid<T>) -> Result<bool> {
    if f.is_constant() {
        return Ok(true);
    }
    let f0 = f.eval(grid.t0())?;
    let tol = lit::<T>(1e-10) * (T::one() + f0.norm());
    for &t in grid.points() {
        if (f.eval(t)? - &f0).norm() > tol {
            return Ok(false);
        }
    }
    Ok(true)
}

/// Symplectic core of a self-adjoint global form. The algebraic part is
/// eliminated through `A33`, which needs `E33 ≡ 0` or constant blocks.
pub fn self_adjoint_dynamic_extract<T: Real>(
    form: &SelfAdjointGlobalForm<T>,
    grid: &TimeGrid<T>,
) -> Result<ReducedSystem<T>> {
    let p = form.p;
    let n3 = form.a33.rows();
    let n = 2 * p + n3;
    if n3 > 0 {
        let mut algebraic_constant = true;
        for f in [&form.e33, &form.a33, &form.a23, &form.a32] {
            algebraic_constant &= is_constant_on(f, grid)?;
        }
        if !algebraic_constant && form.e33.max_norm(grid)? > T::zero() {
            return Err(DaeError::Unsupported(
                "elimination of a time-varying algebraic part with nonzero E33".into(),
            ));
        }
    }
    let times = sample_times(grid, form.a22.is_constant() && (n3 == 0 || form.a33.is_constant()));
    let (mut cs, mut xs) = (Vec::new(), Vec::new());
    for &t in &times {
        let a22 = form.a22.eval(t)?;
        let mut c22 = a22.clone();
        let mut x3 = DMatrix::zeros(n3, p);
        if n3 > 0 {
            let a33i = inv(&form.a33.eval(t)?, "A33", t)?;
            let a32 = form.a32.eval(t)?;
            x3 = -(&a33i * &a32);
            c22 += form.a23.eval(t)? * &x3;
        }
        let mut c = DMatrix::zeros(2 * p, 2 * p);
        put(&mut c, p, p, &c22);
        cs.push(c);
        let mut lift = DMatrix::zeros(n, 2 * p);
        put(&mut lift, 0, 0, &DMatrix::identity(2 * p, 2 * p));
        put(&mut lift, 2 * p, p, &x3);
        xs.push(lift);
    }
    let c = pack(grid, cs)?;
    let mut sys = hamiltonian_core(&canonical_j(p), &c, grid)?;
    let lift = pack(grid, xs)?;
    let state = form.transform.q.mul(&lift)?;
    sys.forcing = MatrixFunction::zeros(n, 1);
    sys.recovery = vec![AffineMap { label: "x".into(), state, forcing: vec![] }];
    Ok(sys)
}
