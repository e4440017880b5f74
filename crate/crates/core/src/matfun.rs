//! Time-dependent matrices on a compact interval.
//!
//! A [`MatrixFunction`] is one of three concrete kinds: a constant matrix,
//! a matrix of polynomials in `t`, or samples on a [`TimeGrid`] joined by an
//! interpolant. Sampled functions interpolate piecewise linearly (order 1) or
//! with a not-a-knot cubic spline (order 3). When derivative samples are known
//! they are stored alongside the values and the interpolant becomes the cubic
//! Hermite spline through both, so `eval` and `derivative` reproduce the
//! samples exactly at the knots.
//!
//! Arithmetic between functions stays in the polynomial ring whenever every
//! operand is constant or polynomial. As soon as a sampled operand is
//! involved the result is sampled on that operand's grid, with knot slopes
//! obtained from the product rule.

use nalgebra::DMatrix;

use crate::error::{DaeError, Result};
use crate::scalar::{lit, to_f64, Real};

pub type Matrix<T> = DMatrix<T>;

/// Strictly increasing sample points covering `[t0, tf]`.
#[derive(Clone, Debug, PartialEq)]
pub struct TimeGrid<T> {
    points: Vec<T>,
}

impl<T: Real> TimeGrid<T> {
    pub fn new(points: Vec<T>) -> Result<Self> {
        if points.len() < 2 {
            return Err(DaeError::Grid("a grid needs at least two points".into()));
        }
        if points.iter().any(|p| !p.is_finite()) {
            return Err(DaeError::Grid("grid points must be finite".into()));
        }
        if let Some(k) = points.windows(2).position(|w| w[1] <= w[0]) {
            return Err(DaeError::Grid(format!(
                "grid is not strictly increasing at index {}",
                k + 1
            )));
        }
        Ok(Self { points })
    }

    /// `n_points` equispaced points from `t0` to `tf` inclusive.
    pub fn uniform(t0: T, tf: T, n_points: usize) -> Result<Self> {
        if n_points < 2 {
            return Err(DaeError::Grid("a grid needs at least two points".into()));
        }
        if !(t0 < tf) {
            return Err(DaeError::Grid(format!(
                "empty interval [{}, {}]",
                to_f64(t0),
                to_f64(tf)
            )));
        }
        let last = n_points - 1;
        let span = tf - t0;
        let mut points: Vec<T> = (0..n_points)
            .map(|i| t0 + span * crate::scalar::from_usize::<T>(i) / crate::scalar::from_usize::<T>(last))
            .collect();
        points[last] = tf;
        Self::new(points)
    }

    pub fn t0(&self) -> T {
        self.points[0]
    }

    pub fn tf(&self) -> T {
        *self.points.last().unwrap()
    }

    pub fn points(&self) -> &[T] {
        &self.points
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    /// Largest spacing between consecutive points.
    pub fn max_step(&self) -> T {
        self.points
            .windows(2)
            .map(|w| w[1] - w[0])
            .fold(T::zero(), |a, b| a.max(b))
    }

    /// Inserts the midpoint of every interval.
    pub fn refine(&self) -> Self {
        let mut points = Vec::with_capacity(2 * self.points.len() - 1);
        for w in self.points.windows(2) {
            points.push(w[0]);
            points.push((w[0] + w[1]) * lit::<T>(0.5));
        }
        points.push(self.tf());
        Self { points }
    }

    fn slack(&self) -> T {
        let scale = self.t0().abs().max(self.tf().abs()).max(T::one());
        T::default_epsilon() * lit::<T>(64.0) * scale
    }

    pub fn contains(&self, t: T) -> bool {
        let eps = self.slack();
        t.is_finite() && t >= self.t0() - eps && t <= self.tf() + eps
    }

    pub fn check(&self, t: T) -> Result<()> {
        if self.contains(t) {
            Ok(())
        } else {
            Err(DaeError::Domain {
                t: to_f64(t),
                t0: to_f64(self.t0()),
                tf: to_f64(self.tf()),
            })
        }
    }

    /// `true` when `other` lies inside this grid's interval.
    pub fn covers(&self, other: &TimeGrid<T>) -> bool {
        self.contains(other.t0()) && self.contains(other.tf())
    }

    /// Index `k` of the interval `[t_k, t_{k+1})` holding `t`; the last
    /// interval is closed on the right.
    pub fn locate(&self, t: T) -> usize {
        let n = self.points.len();
        match self
            .points
            .binary_search_by(|p| p.partial_cmp(&t).unwrap_or(std::cmp::Ordering::Less))
        {
            Ok(k) => k.min(n - 2),
            Err(0) => 0,
            Err(k) => (k - 1).min(n - 2),
        }
    }

    fn knot_index(&self, t: T) -> Option<usize> {
        self.points.iter().position(|&p| p == t)
    }
}

/// Interpolation order of a sampled function.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Interp {
    Linear,
    Cubic,
}

impl Interp {
    pub fn from_order(order: u32) -> Result<Self> {
        match order {
            1 => Ok(Interp::Linear),
            3 => Ok(Interp::Cubic),
            o => Err(DaeError::Parameter(format!("interpolation order must be 1 or 3, got {o}"))),
        }
    }

    pub fn order(self) -> u32 {
        match self {
            Interp::Linear => 1,
            Interp::Cubic => 3,
        }
    }
}

/// Samples of a matrix function with their piecewise interpolant.
#[derive(Clone, Debug, PartialEq)]
pub struct Samples<T: Real> {
    grid: TimeGrid<T>,
    values: Vec<DMatrix<T>>,
    /// Derivative samples supplied by the caller (Hermite data).
    slopes: Option<Vec<DMatrix<T>>>,
    order: Interp,
    /// Knot slopes of the interpolant (cubic only).
    knot_slopes: Option<Vec<DMatrix<T>>>,
    /// Per-interval coefficients `[c0, c1, c2, c3]` in powers of `t - t_k`.
    pieces: Vec<[DMatrix<T>; 4]>,
}

impl<T: Real> Samples<T> {
    pub fn grid(&self) -> &TimeGrid<T> {
        &self.grid
    }

    pub fn values(&self) -> &[DMatrix<T>] {
        &self.values
    }

    pub fn slopes(&self) -> Option<&[DMatrix<T>]> {
        self.slopes.as_deref()
    }

    pub fn order(&self) -> Interp {
        self.order
    }
}

#[derive(Clone, Debug, PartialEq)]
pub enum Kind<T: Real> {
    Constant(DMatrix<T>),
    /// Row-major coefficient lists, lowest degree first.
    Poly(Vec<Vec<T>>),
    Sampled(Samples<T>),
}

#[derive(Clone, Debug, PartialEq)]
pub struct MatrixFunction<T: Real> {
    rows: usize,
    cols: usize,
    kind: Kind<T>,
}

fn check_finite<T: Real>(m: &DMatrix<T>, what: &str) -> Result<()> {
    if m.iter().all(|x| x.is_finite()) {
        Ok(())
    } else {
        Err(DaeError::Parameter(format!("{what} has non-finite entries")))
    }
}

fn horner<T: Real>(c: &[T], t: T) -> T {
    c.iter().rev().fold(T::zero(), |acc, &a| acc * t + a)
}

fn horner_derivative<T: Real>(c: &[T], t: T) -> T {
    let mut acc = T::zero();
    for k in (1..c.len()).rev() {
        acc = acc * t + c[k] * crate::scalar::from_usize::<T>(k);
    }
    acc
}

fn poly_mul<T: Real>(a: &[T], b: &[T]) -> Vec<T> {
    if a.is_empty() || b.is_empty() {
        return vec![];
    }
    let mut out = vec![T::zero(); a.len() + b.len() - 1];
    for (i, &x) in a.iter().enumerate() {
        for (j, &y) in b.iter().enumerate() {
            out[i + j] += x * y;
        }
    }
    out
}

fn poly_add<T: Real>(a: &[T], b: &[T], sign: T) -> Vec<T> {
    let n = a.len().max(b.len());
    (0..n)
        .map(|k| a.get(k).copied().unwrap_or(T::zero()) + sign * b.get(k).copied().unwrap_or(T::zero()))
        .collect()
}

/// Knot slopes of the not-a-knot cubic spline through `(x_i, y_i)`.
fn not_a_knot_slopes<T: Real>(x: &[T], y: &[DMatrix<T>]) -> Vec<DMatrix<T>> {
    let n = x.len();
    let h: Vec<T> = x.windows(2).map(|w| w[1] - w[0]).collect();
    let delta: Vec<DMatrix<T>> = (0..n - 1).map(|i| (&y[i + 1] - &y[i]) / h[i]).collect();
    let two = lit::<T>(2.0);
    let three = lit::<T>(3.0);
    if n == 2 {
        return vec![delta[0].clone(), delta[0].clone()];
    }
    if n == 3 {
        // Not-a-knot on three points degenerates to the interpolating parabola.
        let d = x[2] - x[0];
        let curv = (&delta[1] - &delta[0]) / d;
        let s0 = &delta[0] - &curv * h[0];
        let s1 = &delta[0] + &curv * h[0];
        let s2 = &delta[1] + &curv * h[1];
        return vec![s0, s1, s2];
    }
    // Tridiagonal system with scalar coefficients and matrix right-hand sides.
    let mut lower = vec![T::zero(); n];
    let mut diag = vec![T::zero(); n];
    let mut upper = vec![T::zero(); n];
    let mut rhs: Vec<DMatrix<T>> = Vec::with_capacity(n);

    let d0 = x[2] - x[0];
    diag[0] = h[1];
    upper[0] = d0;
    rhs.push((&delta[0] * ((h[0] + two * d0) * h[1]) + &delta[1] * (h[0] * h[0])) / d0);
    for i in 1..n - 1 {
        lower[i] = h[i];
        diag[i] = two * (h[i - 1] + h[i]);
        upper[i] = h[i - 1];
        rhs.push((&delta[i - 1] * h[i] + &delta[i] * h[i - 1]) * three);
    }
    let dn = x[n - 1] - x[n - 3];
    lower[n - 1] = dn;
    diag[n - 1] = h[n - 3];
    rhs.push(
        (&delta[n - 3] * (h[n - 2] * h[n - 2]) + &delta[n - 2] * ((two * dn + h[n - 2]) * h[n - 3])) / dn,
    );

    // Thomas elimination.
    for i in 1..n {
        let w = lower[i] / diag[i - 1];
        diag[i] -= w * upper[i - 1];
        let prev = rhs[i - 1].clone();
        rhs[i] -= prev * w;
    }
    let mut s = rhs;
    let last = n - 1;
    s[last] /= diag[last];
    for i in (0..last).rev() {
        let next = s[i + 1].clone();
        s[i] = (&s[i] - next * upper[i]) / diag[i];
    }
    s
}

fn hermite_pieces<T: Real>(x: &[T], y: &[DMatrix<T>], m: &[DMatrix<T>]) -> Vec<[DMatrix<T>; 4]> {
    let two = lit::<T>(2.0);
    let three = lit::<T>(3.0);
    (0..x.len() - 1)
        .map(|k| {
            let h = x[k + 1] - x[k];
            let delta = (&y[k + 1] - &y[k]) / h;
            let c2 = (&delta * three - &m[k] * two - &m[k + 1]) / h;
            let c3 = (&m[k] + &m[k + 1] - &delta * two) / (h * h);
            [y[k].clone(), m[k].clone(), c2, c3]
        })
        .collect()
}

fn linear_pieces<T: Real>(x: &[T], y: &[DMatrix<T>]) -> Vec<[DMatrix<T>; 4]> {
    (0..x.len() - 1)
        .map(|k| {
            let h = x[k + 1] - x[k];
            let z = DMatrix::zeros(y[k].nrows(), y[k].ncols());
            [y[k].clone(), (&y[k + 1] - &y[k]) / h, z.clone(), z]
        })
        .collect()
}

impl<T: Real> MatrixFunction<T> {
    pub fn constant(m: DMatrix<T>) -> Result<Self> {
        check_finite(&m, "constant matrix")?;
        Ok(Self { rows: m.nrows(), cols: m.ncols(), kind: Kind::Constant(m) })
    }

    pub fn identity(n: usize) -> Self {
        Self { rows: n, cols: n, kind: Kind::Constant(DMatrix::identity(n, n)) }
    }

    pub fn zeros(rows: usize, cols: usize) -> Self {
        Self { rows, cols, kind: Kind::Constant(DMatrix::zeros(rows, cols)) }
    }

    /// Polynomial entries given row-major, each as coefficients lowest degree first.
    pub fn poly(rows: usize, cols: usize, coeffs: Vec<Vec<T>>) -> Result<Self> {
        if coeffs.len() != rows * cols {
            return Err(DaeError::Shape(format!(
                "{} coefficient lists for a {rows}x{cols} polynomial matrix",
                coeffs.len()
            )));
        }
        if coeffs.iter().flatten().any(|c| !c.is_finite()) {
            return Err(DaeError::Parameter("polynomial coefficients must be finite".into()));
        }
        Ok(Self { rows, cols, kind: Kind::Poly(coeffs) })
    }

    /// `M0 + t M1 + t^2 M2 + ...` from matrix coefficients.
    pub fn poly_from_matrices(terms: &[DMatrix<T>]) -> Result<Self> {
        let first = terms
            .first()
            .ok_or_else(|| DaeError::Shape("empty coefficient list".into()))?;
        let (rows, cols) = first.shape();
        if terms.iter().any(|m| m.shape() != (rows, cols)) {
            return Err(DaeError::Shape("coefficient matrices differ in shape".into()));
        }
        let coeffs = (0..rows)
            .flat_map(|i| (0..cols).map(move |j| (i, j)))
            .map(|(i, j)| terms.iter().map(|m| m[(i, j)]).collect())
            .collect();
        Self::poly(rows, cols, coeffs)
    }

    /// Samples joined by a linear or not-a-knot cubic interpolant.
    pub fn sampled(grid: TimeGrid<T>, values: Vec<DMatrix<T>>, order: Interp) -> Result<Self> {
        Self::build_sampled(grid, values, None, order)
    }

    /// Values and derivative samples joined by the cubic Hermite interpolant.
    pub fn hermite(grid: TimeGrid<T>, values: Vec<DMatrix<T>>, slopes: Vec<DMatrix<T>>) -> Result<Self> {
        Self::build_sampled(grid, values, Some(slopes), Interp::Cubic)
    }

    fn build_sampled(
        grid: TimeGrid<T>,
        values: Vec<DMatrix<T>>,
        slopes: Option<Vec<DMatrix<T>>>,
        order: Interp,
    ) -> Result<Self> {
        if values.len() != grid.len() {
            return Err(DaeError::Shape(format!(
                "{} samples for a grid of {} points",
                values.len(),
                grid.len()
            )));
        }
        let (rows, cols) = values[0].shape();
        if let Some(k) = values.iter().position(|v| v.shape() != (rows, cols)) {
            return Err(DaeError::Shape(format!(
                "sample {k} has shape {:?}, expected {:?}",
                values[k].shape(),
                (rows, cols)
            )));
        }
        for v in &values {
            check_finite(v, "sample")?;
        }
        if let Some(s) = &slopes {
            if s.len() != values.len() || s.iter().any(|m| m.shape() != (rows, cols)) {
                return Err(DaeError::Shape("derivative samples do not match the values".into()));
            }
            for m in s {
                check_finite(m, "derivative sample")?;
            }
            if order != Interp::Cubic {
                return Err(DaeError::Parameter("derivative samples require order 3".into()));
            }
        }
        let x = grid.points();
        let (pieces, knot_slopes) = match (&slopes, order) {
            (Some(s), _) => (hermite_pieces(x, &values, s), Some(s.clone())),
            (None, Interp::Cubic) => {
                let s = not_a_knot_slopes(x, &values);
                (hermite_pieces(x, &values, &s), Some(s))
            }
            (None, Interp::Linear) => (linear_pieces(x, &values), None),
        };
        Ok(Self {
            rows,
            cols,
            kind: Kind::Sampled(Samples { grid, values, slopes, order, knot_slopes, pieces }),
        })
    }

    /// Hermite-sampled function built from `(value, derivative)` at every grid point.
    pub fn from_grid_fn<F>(grid: &TimeGrid<T>, mut f: F) -> Result<Self>
    where
        F: FnMut(T) -> Result<(DMatrix<T>, DMatrix<T>)>,
    {
        let mut values = Vec::with_capacity(grid.len());
        let mut slopes = Vec::with_capacity(grid.len());
        for &t in grid.points() {
            let (v, s) = f(t)?;
            values.push(v);
            slopes.push(s);
        }
        Self::hermite(grid.clone(), values, slopes)
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn shape(&self) -> (usize, usize) {
        (self.rows, self.cols)
    }

    pub fn kind(&self) -> &Kind<T> {
        &self.kind
    }

    pub fn is_constant(&self) -> bool {
        matches!(self.kind, Kind::Constant(_))
    }

    /// `true` for constant and polynomial kinds.
    pub fn is_analytic(&self) -> bool {
        !matches!(self.kind, Kind::Sampled(_))
    }

    /// Grid of a sampled function.
    pub fn grid(&self) -> Option<&TimeGrid<T>> {
        match &self.kind {
            Kind::Sampled(s) => Some(&s.grid),
            _ => None,
        }
    }

    pub fn eval(&self, t: T) -> Result<DMatrix<T>> {
        match &self.kind {
            Kind::Constant(m) => Ok(m.clone()),
            Kind::Poly(c) => Ok(DMatrix::from_row_iterator(
                self.rows,
                self.cols,
                c.iter().map(|p| horner(p, t)),
            )),
            Kind::Sampled(s) => {
                s.grid.check(t)?;
                if let Some(k) = s.grid.knot_index(t) {
                    return Ok(s.values[k].clone());
                }
                let k = s.grid.locate(t);
                let x = t - s.grid.points()[k];
                let [c0, c1, c2, c3] = &s.pieces[k];
                Ok(c0 + (c1 + (c2 + c3 * x) * x) * x)
            }
        }
    }

    pub fn derivative(&self, t: T) -> Result<DMatrix<T>> {
        match &self.kind {
            Kind::Constant(_) => Ok(DMatrix::zeros(self.rows, self.cols)),
            Kind::Poly(c) => Ok(DMatrix::from_row_iterator(
                self.rows,
                self.cols,
                c.iter().map(|p| horner_derivative(p, t)),
            )),
            Kind::Sampled(s) => {
                s.grid.check(t)?;
                if let (Some(k), Some(ks)) = (s.grid.knot_index(t), &s.knot_slopes) {
                    return Ok(ks[k].clone());
                }
                let k = s.grid.locate(t);
                let x = t - s.grid.points()[k];
                let [_, c1, c2, c3] = &s.pieces[k];
                let two = lit::<T>(2.0);
                let three = lit::<T>(3.0);
                Ok(c1 + (c2 * two + c3 * (three * x)) * x)
            }
        }
    }

    /// The derivative as a matrix function of the same family.
    pub fn derivative_function(&self) -> Result<Self> {
        match &self.kind {
            Kind::Constant(_) => Ok(Self::zeros(self.rows, self.cols)),
            Kind::Poly(c) => {
                let d = c
                    .iter()
                    .map(|p| {
                        (1..p.len())
                            .map(|k| p[k] * crate::scalar::from_usize::<T>(k))
                            .collect()
                    })
                    .collect();
                Self::poly(self.rows, self.cols, d)
            }
            Kind::Sampled(s) => {
                let values = match &s.knot_slopes {
                    Some(ks) => ks.clone(),
                    None => s
                        .grid
                        .points()
                        .iter()
                        .map(|&t| self.derivative(t))
                        .collect::<Result<_>>()?,
                };
                Self::sampled(s.grid.clone(), values, s.order)
            }
        }
    }

    /// Samples on `grid`; the result agrees with `self` at every grid point.
    pub fn sample(&self, grid: &TimeGrid<T>, order: Interp) -> Result<Self> {
        let values = grid.points().iter().map(|&t| self.eval(t)).collect::<Result<_>>()?;
        Self::sampled(grid.clone(), values, order)
    }

    /// Samples values and derivatives on `grid` (cubic Hermite interpolant).
    pub fn sample_hermite(&self, grid: &TimeGrid<T>) -> Result<Self> {
        Self::from_grid_fn(grid, |t| Ok((self.eval(t)?, self.derivative(t)?)))
    }

    /// Grid on which a non-analytic combination must be sampled.
    fn shared_grid(operands: &[&Self]) -> Option<TimeGrid<T>> {
        operands.iter().find_map(|f| f.grid().cloned())
    }

    pub fn transpose(&self) -> Self {
        let kind = match &self.kind {
            Kind::Constant(m) => Kind::Constant(m.transpose()),
            Kind::Poly(c) => {
                let mut out = Vec::with_capacity(c.len());
                for j in 0..self.cols {
                    for i in 0..self.rows {
                        out.push(c[i * self.cols + j].clone());
                    }
                }
                Kind::Poly(out)
            }
            Kind::Sampled(s) => {
                let tr = |v: &Vec<DMatrix<T>>| v.iter().map(|m| m.transpose()).collect::<Vec<_>>();
                let out = MatrixFunction::build_sampled(
                    s.grid.clone(),
                    tr(&s.values),
                    s.slopes.as_ref().map(tr),
                    s.order,
                )
                .expect("transpose preserves validity");
                return out;
            }
        };
        Self { rows: self.cols, cols: self.rows, kind }
    }

    fn poly_coeffs(&self) -> Option<Vec<Vec<T>>> {
        match &self.kind {
            Kind::Constant(m) => Some(
                (0..self.rows)
                    .flat_map(|i| (0..self.cols).map(move |j| (i, j)))
                    .map(|(i, j)| vec![m[(i, j)]])
                    .collect(),
            ),
            Kind::Poly(c) => Some(c.clone()),
            Kind::Sampled(_) => None,
        }
    }

    pub fn scale(&self, c: T) -> Self {
        match &self.kind {
            Kind::Constant(m) => Self { rows: self.rows, cols: self.cols, kind: Kind::Constant(m * c) },
            Kind::Poly(p) => Self {
                rows: self.rows,
                cols: self.cols,
                kind: Kind::Poly(p.iter().map(|q| q.iter().map(|&a| a * c).collect()).collect()),
            },
            Kind::Sampled(s) => {
                let sc = |v: &Vec<DMatrix<T>>| v.iter().map(|m| m * c).collect::<Vec<_>>();
                MatrixFunction::build_sampled(s.grid.clone(), sc(&s.values), s.slopes.as_ref().map(sc), s.order)
                    .expect("scaling preserves validity")
            }
        }
    }

    fn combine_linear(&self, other: &Self, sign: T) -> Result<Self> {
        if self.shape() != other.shape() {
            return Err(DaeError::Shape(format!(
                "cannot add {:?} and {:?}",
                self.shape(),
                other.shape()
            )));
        }
        match (&self.kind, &other.kind) {
            (Kind::Constant(a), Kind::Constant(b)) => Self::constant(a + b * sign),
            _ => match (self.poly_coeffs(), other.poly_coeffs()) {
                (Some(a), Some(b)) => Self::poly(
                    self.rows,
                    self.cols,
                    a.iter().zip(&b).map(|(p, q)| poly_add(p, q, sign)).collect(),
                ),
                _ => {
                    let grid = Self::shared_grid(&[self, other]).unwrap();
                    Self::from_grid_fn(&grid, |t| {
                        Ok((
                            self.eval(t)? + other.eval(t)? * sign,
                            self.derivative(t)? + other.derivative(t)? * sign,
                        ))
                    })
                }
            },
        }
    }

    pub fn add(&self, other: &Self) -> Result<Self> {
        self.combine_linear(other, T::one())
    }

    pub fn sub(&self, other: &Self) -> Result<Self> {
        self.combine_linear(other, -T::one())
    }

    /// Product `self(t) * other(t)`.
    pub fn mul(&self, other: &Self) -> Result<Self> {
        if self.cols != other.rows {
            return Err(DaeError::Shape(format!(
                "cannot multiply {:?} by {:?}",
                self.shape(),
                other.shape()
            )));
        }
        match (&self.kind, &other.kind) {
            (Kind::Constant(a), Kind::Constant(b)) => Self::constant(a * b),
            _ => match (self.poly_coeffs(), other.poly_coeffs()) {
                (Some(a), Some(b)) => {
                    let (n, k, m) = (self.rows, self.cols, other.cols);
                    let mut out = Vec::with_capacity(n * m);
                    for i in 0..n {
                        for j in 0..m {
                            let mut acc: Vec<T> = vec![];
                            for l in 0..k {
                                acc = poly_add(&acc, &poly_mul(&a[i * k + l], &b[l * m + j]), T::one());
                            }
                            out.push(acc);
                        }
                    }
                    Self::poly(n, m, out)
                }
                _ => {
                    let grid = Self::shared_grid(&[self, other]).unwrap();
                    Self::from_grid_fn(&grid, |t| {
                        let (a, b) = (self.eval(t)?, other.eval(t)?);
                        let (da, db) = (self.derivative(t)?, other.derivative(t)?);
                        Ok((&a * &b, da * &b + a * db))
                    })
                }
            },
        }
    }

    /// Sub-block `rows r0..r0+nr`, `cols c0..c0+nc`.
    pub fn block(&self, r0: usize, c0: usize, nr: usize, nc: usize) -> Result<Self> {
        if r0 + nr > self.rows || c0 + nc > self.cols {
            return Err(DaeError::Shape(format!(
                "block ({r0},{c0})+({nr},{nc}) outside {:?}",
                self.shape()
            )));
        }
        match &self.kind {
            Kind::Constant(m) => Self::constant(m.view((r0, c0), (nr, nc)).into_owned()),
            Kind::Poly(c) => {
                let mut out = Vec::with_capacity(nr * nc);
                for i in r0..r0 + nr {
                    for j in c0..c0 + nc {
                        out.push(c[i * self.cols + j].clone());
                    }
                }
                Self::poly(nr, nc, out)
            }
            Kind::Sampled(s) => {
                let cut = |v: &Vec<DMatrix<T>>| {
                    v.iter()
                        .map(|m| m.view((r0, c0), (nr, nc)).into_owned())
                        .collect::<Vec<_>>()
                };
                Self::build_sampled(s.grid.clone(), cut(&s.values), s.slopes.as_ref().map(cut), s.order)
            }
        }
    }

    /// Assembles a block matrix function; `blocks[i][j]` must agree in
    /// rows along each block row and in columns along each block column.
    pub fn assemble(blocks: &[Vec<&Self>]) -> Result<Self> {
        let row_sizes: Vec<usize> = blocks
            .iter()
            .map(|r| r.first().map(|b| b.rows).unwrap_or(0))
            .collect();
        let col_sizes: Vec<usize> = blocks
            .first()
            .map(|r| r.iter().map(|b| b.cols).collect())
            .unwrap_or_default();
        for (i, r) in blocks.iter().enumerate() {
            if r.len() != col_sizes.len() {
                return Err(DaeError::Shape(format!("block row {i} has {} blocks", r.len())));
            }
            for (j, b) in r.iter().enumerate() {
                if b.rows != row_sizes[i] || b.cols != col_sizes[j] {
                    return Err(DaeError::Shape(format!("block ({i},{j}) has shape {:?}", b.shape())));
                }
            }
        }
        let rows: usize = row_sizes.iter().sum();
        let cols: usize = col_sizes.iter().sum();
        let all: Vec<&Self> = blocks.iter().flatten().copied().collect();
        let place = |get: &dyn Fn(&Self) -> Result<DMatrix<T>>| -> Result<DMatrix<T>> {
            let mut m = DMatrix::zeros(rows, cols);
            let mut r0 = 0;
            for (i, r) in blocks.iter().enumerate() {
                let mut c0 = 0;
                for (j, b) in r.iter().enumerate() {
                    m.view_mut((r0, c0), (row_sizes[i], col_sizes[j])).copy_from(&get(b)?);
                    c0 += col_sizes[j];
                }
                r0 += row_sizes[i];
            }
            Ok(m)
        };
        if all.iter().all(|b| b.is_constant()) {
            return Self::constant(place(&|b| b.eval(T::zero()))?);
        }
        if all.iter().all(|b| b.is_analytic()) {
            let mut coeffs = vec![vec![]; rows * cols];
            let mut r0 = 0;
            for (i, r) in blocks.iter().enumerate() {
                let mut c0 = 0;
                for (j, b) in r.iter().enumerate() {
                    let bc = b.poly_coeffs().unwrap();
                    for bi in 0..row_sizes[i] {
                        for bj in 0..col_sizes[j] {
                            coeffs[(r0 + bi) * cols + c0 + bj] = bc[bi * b.cols + bj].clone();
                        }
                    }
                    c0 += col_sizes[j];
                }
                r0 += row_sizes[i];
            }
            return Self::poly(rows, cols, coeffs);
        }
        let grid = Self::shared_grid(&all).unwrap();
        Self::from_grid_fn(&grid, |t| Ok((place(&|b| b.eval(t))?, place(&|b| b.derivative(t))?)))
    }

    /// `diag(blocks...)`.
    pub fn block_diag(blocks: &[&Self]) -> Result<Self> {
        let zeros: Vec<Vec<Self>> = blocks
            .iter()
            .map(|bi| blocks.iter().map(|bj| Self::zeros(bi.rows, bj.cols)).collect())
            .collect();
        let grid: Vec<Vec<&Self>> = (0..blocks.len())
            .map(|i| {
                (0..blocks.len())
                    .map(|j| if i == j { blocks[i] } else { &zeros[i][j] })
                    .collect()
            })
            .collect();
        Self::assemble(&grid)
    }

    /// Largest Frobenius norm over the grid points.
    pub fn max_norm(&self, grid: &TimeGrid<T>) -> Result<T> {
        let mut m = T::zero();
        for &t in grid.points() {
            m = m.max(self.eval(t)?.norm());
        }
        Ok(m)
    }
}

/// A pair `(E, A)` of square matrix functions on a common interval.
#[derive(Clone, Debug, PartialEq)]
pub struct MatrixPair<T: Real> {
    pub e: MatrixFunction<T>,
    pub a: MatrixFunction<T>,
    pub interval: TimeGrid<T>,
}

impl<T: Real> MatrixPair<T> {
    pub fn new(e: MatrixFunction<T>, a: MatrixFunction<T>, interval: TimeGrid<T>) -> Result<Self> {
        if e.rows != e.cols || a.rows != a.cols || e.rows != a.rows {
            return Err(DaeError::Shape(format!(
                "E is {:?} and A is {:?}; both must be n x n",
                e.shape(),
                a.shape()
            )));
        }
        for f in [&e, &a] {
            if let Some(g) = f.grid() {
                if !g.covers(&interval) {
                    return Err(DaeError::Domain {
                        t: to_f64(interval.tf()),
                        t0: to_f64(g.t0()),
                        tf: to_f64(g.tf()),
                    });
                }
            }
        }
        Ok(Self { e, a, interval })
    }

    pub fn n(&self) -> usize {
        self.e.rows
    }

    pub fn is_constant(&self) -> bool {
        self.e.is_constant() && self.a.is_constant()
    }

    /// `(E(t), A(t))`.
    pub fn eval(&self, t: T) -> Result<(DMatrix<T>, DMatrix<T>)> {
        self.interval.check(t)?;
        Ok((self.e.eval(t)?, self.a.eval(t)?))
    }

    /// Checks that `grid` lies inside the pair's interval.
    pub fn check_grid(&self, grid: &TimeGrid<T>) -> Result<()> {
        self.interval.check(grid.t0())?;
        self.interval.check(grid.tf())
    }
}
