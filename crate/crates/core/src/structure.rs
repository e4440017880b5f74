//! Self-/skew-adjoint structure checks and congruence transformations.
//!
//! A pair `(E, A)` is self-adjoint when `Eᵀ = -E` and `Aᵀ = A + Ė`, and
//! skew-adjoint when `Eᵀ = E` and `Aᵀ = -A - Ė`. Both properties are
//! preserved by congruence `(E, A) ↦ (QᵀEQ, QᵀAQ - QᵀEQ̇)`.
//!
//! The equalities are checked on an explicit grid: each report carries the
//! largest Frobenius defect over the grid points.

use nalgebra::DMatrix;

use crate::error::{DaeError, Result};
use crate::linalg;
use crate::matfun::{MatrixFunction, MatrixPair, TimeGrid};
use crate::scalar::{lit, to_f64, Real};

/// Smallest admissible `σ_min / σ_max` of a transformation matrix.
pub const TRANSFORM_RCOND: f64 = 1e-12;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Adjointness {
    SelfAdjoint,
    SkewAdjoint,
}

#[derive(Clone, Debug, PartialEq)]
pub struct StructureReport<T: Real> {
    pub kind_tested: Adjointness,
    /// `max ‖E ± Eᵀ‖_F` over the grid.
    pub e_residual: T,
    /// `max ‖Aᵀ ∓ A ∓ Ė‖_F` over the grid.
    pub a_residual: T,
    pub grid: TimeGrid<T>,
}

impl<T: Real> StructureReport<T> {
    pub fn max_residual(&self) -> T {
        self.e_residual.max(self.a_residual)
    }

    pub fn passes(&self, tol: T) -> bool {
        self.e_residual <= tol && self.a_residual <= tol
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Tag {
    SelfAdjoint,
    SkewAdjoint,
    Both,
    None,
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct StructureTag<T> {
    pub value: Tag,
    pub tolerance: T,
}

fn residuals<T: Real>(pair: &MatrixPair<T>, grid: &TimeGrid<T>, kind: Adjointness) -> Result<StructureReport<T>> {
    pair.check_grid(grid)?;
    let mut e_res = T::zero();
    let mut a_res = T::zero();
    for &t in grid.points() {
        let e = pair.e.eval(t)?;
        let a = pair.a.eval(t)?;
        let e_dot = pair.e.derivative(t)?;
        let (de, da) = match kind {
            Adjointness::SelfAdjoint => (&e + e.transpose(), a.transpose() - &a - &e_dot),
            Adjointness::SkewAdjoint => (&e - e.transpose(), a.transpose() + &a + &e_dot),
        };
        e_res = e_res.max(de.norm());
        a_res = a_res.max(da.norm());
    }
    Ok(StructureReport { kind_tested: kind, e_residual: e_res, a_residual: a_res, grid: grid.clone() })
}

/// Defects of `Eᵀ = -E` and `Aᵀ = A + Ė` over `grid`.
pub fn self_adjoint_residual<T: Real>(pair: &MatrixPair<T>, grid: &TimeGrid<T>) -> Result<StructureReport<T>> {
    residuals(pair, grid, Adjointness::SelfAdjoint)
}

/// Defects of `Eᵀ = E` and `Aᵀ = -A - Ė` over `grid`.
pub fn skew_adjoint_residual<T: Real>(pair: &MatrixPair<T>, grid: &TimeGrid<T>) -> Result<StructureReport<T>> {
    residuals(pair, grid, Adjointness::SkewAdjoint)
}

pub fn residual<T: Real>(pair: &MatrixPair<T>, grid: &TimeGrid<T>, kind: Adjointness) -> Result<StructureReport<T>> {
    residuals(pair, grid, kind)
}

/// `1e-10 · (1 + max_t max(‖E(t)‖_F, ‖A(t)‖_F))`.
pub fn default_tolerance<T: Real>(pair: &MatrixPair<T>, grid: &TimeGrid<T>) -> Result<T> {
    let scale = pair.e.max_norm(grid)?.max(pair.a.max_norm(grid)?);
    Ok(lit::<T>(1e-10) * (T::one() + scale))
}

pub fn classify<T: Real>(pair: &MatrixPair<T>, grid: &TimeGrid<T>, tol: T) -> Result<StructureTag<T>> {
    if !(tol > T::zero()) {
        return Err(DaeError::Parameter("tolerance must be positive".into()));
    }
    let is_self = self_adjoint_residual(pair, grid)?.passes(tol);
    let is_skew = skew_adjoint_residual(pair, grid)?.passes(tol);
    let value = match (is_self, is_skew) {
        (true, true) => Tag::Both,
        (true, false) => Tag::SelfAdjoint,
        (false, true) => Tag::SkewAdjoint,
        (false, false) => Tag::None,
    };
    Ok(StructureTag { value, tolerance: tol })
}

/// A pointwise nonsingular `Q(t)` together with its derivative.
#[derive(Clone, Debug, PartialEq)]
pub struct CongruenceTransform<T: Real> {
    pub q: MatrixFunction<T>,
    pub qdot: MatrixFunction<T>,
}

impl<T: Real> CongruenceTransform<T> {
    /// Derivative taken from `q` itself (exact for constant and polynomial kinds).
    pub fn new(q: MatrixFunction<T>) -> Result<Self> {
        let qdot = q.derivative_function()?;
        Self::with_derivative(q, qdot)
    }

    pub fn with_derivative(q: MatrixFunction<T>, qdot: MatrixFunction<T>) -> Result<Self> {
        if q.rows() != q.cols() || q.shape() != qdot.shape() {
            return Err(DaeError::Shape(format!(
                "transform {:?} with derivative {:?}",
                q.shape(),
                qdot.shape()
            )));
        }
        Ok(Self { q, qdot })
    }

    pub fn identity(n: usize) -> Self {
        Self { q: MatrixFunction::identity(n), qdot: MatrixFunction::zeros(n, n) }
    }

    pub fn n(&self) -> usize {
        self.q.rows()
    }

    /// Fails with the first grid time at which `Q` is numerically singular.
    pub fn check_nonsingular(&self, grid: &TimeGrid<T>) -> Result<()> {
        check_nonsingular(&self.q, grid, "congruence transform Q")
    }
}

fn check_nonsingular<T: Real>(q: &MatrixFunction<T>, grid: &TimeGrid<T>, what: &str) -> Result<()> {
    let tol = lit::<T>(TRANSFORM_RCOND);
    for &t in grid.points() {
        if linalg::inverse_condition(&q.eval(t)?) <= tol {
            return Err(DaeError::Singular { what: what.to_string(), t: to_f64(t) });
        }
    }
    Ok(())
}

fn sampled_grid<T: Real>(fs: &[&MatrixFunction<T>]) -> Option<TimeGrid<T>> {
    fs.iter().find_map(|f| f.grid().cloned())
}

/// Two-sided transformation `(PEQ, PAQ - PEQ̇)`; congruence is `P = Qᵀ`.
fn transform<T: Real>(
    pair: &MatrixPair<T>,
    p: &MatrixFunction<T>,
    tr: &CongruenceTransform<T>,
) -> Result<MatrixPair<T>> {
    let n = pair.n();
    if tr.n() != n || p.shape() != (n, n) {
        return Err(DaeError::Shape(format!(
            "pair of size {n} with transforms {:?}, {:?}",
            p.shape(),
            tr.q.shape()
        )));
    }
    check_nonsingular(p, &pair.interval, "left transform P")?;
    tr.check_nonsingular(&pair.interval)?;
    let ops = [&pair.e, &pair.a, p, &tr.q, &tr.qdot];
    match sampled_grid(&ops) {
        None => {
            let pe = p.mul(&pair.e)?;
            let e2 = pe.mul(&tr.q)?;
            let a2 = p.mul(&pair.a)?.mul(&tr.q)?.sub(&pe.mul(&tr.qdot)?)?;
            MatrixPair::new(e2, a2, pair.interval.clone())
        }
        Some(grid) => {
            let pointwise = |t: T| -> Result<[DMatrix<T>; 10]> {
                Ok([
                    pair.e.eval(t)?,
                    pair.e.derivative(t)?,
                    pair.a.eval(t)?,
                    pair.a.derivative(t)?,
                    p.eval(t)?,
                    p.derivative(t)?,
                    tr.q.eval(t)?,
                    tr.qdot.eval(t)?,
                    tr.qdot.derivative(t)?,
                    DMatrix::zeros(0, 0),
                ])
            };
            let e2 = MatrixFunction::from_grid_fn(&grid, |t| {
                let [e, ed, _, _, p, pd, q, qd, _, _] = pointwise(t)?;
                let val = &p * &e * &q;
                let slope = &pd * &e * &q + &p * &ed * &q + &p * &e * &qd;
                Ok((val, slope))
            })?;
            let a2 = MatrixFunction::from_grid_fn(&grid, |t| {
                let [e, ed, a, ad, p, pd, q, qd, qdd, _] = pointwise(t)?;
                let val = &p * &a * &q - &p * &e * &qd;
                let slope = &pd * &a * &q + &p * &ad * &q + &p * &a * &qd
                    - &pd * &e * &qd
                    - &p * &ed * &qd
                    - &p * &e * &qdd;
                Ok((val, slope))
            })?;
            MatrixPair::new(e2, a2, pair.interval.clone())
        }
    }
}

/// `(QᵀEQ, QᵀAQ - QᵀEQ̇)`.
pub fn apply_congruence<T: Real>(pair: &MatrixPair<T>, tr: &CongruenceTransform<T>) -> Result<MatrixPair<T>> {
    transform(pair, &tr.q.transpose(), tr)
}

/// `(PEQ, PAQ - PEQ̇)`.
pub fn apply_equivalence<T: Real>(
    pair: &MatrixPair<T>,
    p: &MatrixFunction<T>,
    tr: &CongruenceTransform<T>,
) -> Result<MatrixPair<T>> {
    transform(pair, p, tr)
}

/// `Q = Q1 Q2` with `Q̇ = Q̇1 Q2 + Q1 Q̇2`; applying the result equals
/// applying `T1` then `T2`.
pub fn compose<T: Real>(t1: &CongruenceTransform<T>, t2: &CongruenceTransform<T>) -> Result<CongruenceTransform<T>> {
    if t1.n() != t2.n() {
        return Err(DaeError::Shape(format!("cannot compose sizes {} and {}", t1.n(), t2.n())));
    }
    match sampled_grid(&[&t1.q, &t1.qdot, &t2.q, &t2.qdot]) {
        None => {
            let q = t1.q.mul(&t2.q)?;
            let qdot = t1.qdot.mul(&t2.q)?.add(&t1.q.mul(&t2.qdot)?)?;
            CongruenceTransform::with_derivative(q, qdot)
        }
        Some(grid) => {
            let q = MatrixFunction::from_grid_fn(&grid, |t| {
                let (q1, q2) = (t1.q.eval(t)?, t2.q.eval(t)?);
                let (d1, d2) = (t1.qdot.eval(t)?, t2.qdot.eval(t)?);
                Ok((&q1 * &q2, d1 * q2 + q1 * d2))
            })?;
            let qdot = MatrixFunction::from_grid_fn(&grid, |t| {
                let (q1, q2) = (t1.q.eval(t)?, t2.q.eval(t)?);
                let (d1, d2) = (t1.qdot.eval(t)?, t2.qdot.eval(t)?);
                let (dd1, dd2) = (t1.qdot.derivative(t)?, t2.qdot.derivative(t)?);
                let val = &d1 * &q2 + &q1 * &d2;
                let slope = dd1 * &q2 + (&d1 * &d2) * lit::<T>(2.0) + q1 * dd2;
                Ok((val, slope))
            })?;
            CongruenceTransform::with_derivative(q, qdot)
        }
    }
}

/// `Q⁻¹` sampled on `grid`, with derivative `-Q⁻¹Q̇Q⁻¹`.
pub fn invert<T: Real>(tr: &CongruenceTransform<T>, grid: &TimeGrid<T>) -> Result<CongruenceTransform<T>> {
    let rc = lit::<T>(TRANSFORM_RCOND);
    let inv_at = |t: T| -> Result<(DMatrix<T>, DMatrix<T>, DMatrix<T>)> {
        let qi = linalg::checked_inverse(&tr.q.eval(t)?, "congruence transform Q", t, rc)?;
        Ok((qi, tr.qdot.eval(t)?, tr.qdot.derivative(t)?))
    };
    let q = MatrixFunction::from_grid_fn(grid, |t| {
        let (qi, qd, _) = inv_at(t)?;
        let d = -(&qi * qd * &qi);
        Ok((qi, d))
    })?;
    let qdot = MatrixFunction::from_grid_fn(grid, |t| {
        let (qi, qd, qdd) = inv_at(t)?;
        let val = -(&qi * &qd * &qi);
        let slope = (&qi * &qd * &qi * &qd * &qi) * lit::<T>(2.0) - &qi * qdd * &qi;
        Ok((val, slope))
    })?;
    CongruenceTransform::with_derivative(q, qdot)
}

/// For a constant self-adjoint pair with invertible `E` and `A`, the
/// substitution `z = Ax` after left-multiplying by `E⁻¹` gives the
/// skew-adjoint constant pair `(A⁻¹, E⁻¹)`.
pub fn remark1_convert<T: Real>(pair: &MatrixPair<T>) -> Result<MatrixPair<T>> {
    if !pair.is_constant() {
        return Err(DaeError::Unsupported(
            "the inverse-swap conversion needs constant E and A".into(),
        ));
    }
    let grid = &pair.interval;
    let tol = default_tolerance(pair, grid)?;
    let report = self_adjoint_residual(pair, grid)?;
    if !report.passes(tol) {
        return Err(DaeError::Precondition(format!(
            "pair is not self-adjoint (residual {:e})",
            to_f64(report.max_residual())
        )));
    }
    let t0 = grid.t0();
    let (e, a) = pair.eval(t0)?;
    let rc = lit::<T>(TRANSFORM_RCOND);
    let e_inv = linalg::checked_inverse(&e, "E", t0, rc)?;
    let a_inv = linalg::checked_inverse(&a, "A", t0, rc)?;
    MatrixPair::new(
        MatrixFunction::constant(a_inv)?,
        MatrixFunction::constant(e_inv)?,
        grid.clone(),
    )
}
