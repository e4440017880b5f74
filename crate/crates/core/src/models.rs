//! Example systems: the RLC circuit, a Stokes surrogate, constrained
//! multibody dynamics and the linear-quadratic optimality system.

use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{DaeError, Result};
use crate::linalg::{full_svd, put, sym_eigen_sorted};
use crate::matfun::{MatrixFunction, MatrixPair, TimeGrid};
use crate::scalar::{lit, to_f64, Real};
use crate::structure::{apply_congruence, skew_adjoint_residual, CongruenceTransform};

/// `E ẋ + E K x = (J − R) x + (G − P) u`, `y = (G + P)ᵀ x + (S − N) u`.
#[derive(Clone, Debug)]
pub struct PHDAEModel<T: Real> {
    pub e: MatrixFunction<T>,
    pub j: MatrixFunction<T>,
    pub r: MatrixFunction<T>,
    pub k: MatrixFunction<T>,
    pub g: MatrixFunction<T>,
    pub p: MatrixFunction<T>,
    pub s: MatrixFunction<T>,
    pub n: MatrixFunction<T>,
}

/// Largest defects of the port-Hamiltonian conditions over a grid.
#[derive(Clone, Debug, PartialEq)]
pub struct ModelReport<T> {
    pub s_symmetry: T,
    pub n_skew: T,
    /// Smallest eigenvalue of `[[R, P], [Pᵀ, S]]`.
    pub dissipation_min_eig: T,
    /// Skew-adjoint residual of `(E, J − EK)`.
    pub skew_residual: T,
}

impl<T: Real> PHDAEModel<T> {
    pub fn states(&self) -> usize {
        self.e.rows()
    }

    pub fn inputs(&self) -> usize {
        self.g.cols()
    }

    /// `(E, J − R − EK)`.
    pub fn pair(&self, interval: &TimeGrid<T>) -> Result<MatrixPair<T>> {
        let a = self.j.sub(&self.r)?.sub(&self.e.mul(&self.k)?)?;
        MatrixPair::new(self.e.clone(), a, interval.clone())
    }

    /// The lossless part `(E, J − EK)`.
    pub fn skew_pair(&self, interval: &TimeGrid<T>) -> Result<MatrixPair<T>> {
        let a = self.j.sub(&self.e.mul(&self.k)?)?;
        MatrixPair::new(self.e.clone(), a, interval.clone())
    }

    /// `G − P`.
    pub fn input_matrix(&self) -> Result<MatrixFunction<T>> {
        self.g.sub(&self.p)
    }

    /// `(G − P) u` as a forcing term.
    pub fn forcing(&self, u: &MatrixFunction<T>) -> Result<MatrixFunction<T>> {
        self.input_matrix()?.mul(u)
    }

    pub fn output(&self, t: T, x: &DVector<T>, u: &DVector<T>) -> Result<DVector<T>> {
        let gp = self.g.eval(t)? + self.p.eval(t)?;
        let sn = self.s.eval(t)? - self.n.eval(t)?;
        Ok(gp.transpose() * x + sn * u)
    }

    pub fn report(&self, grid: &TimeGrid<T>) -> Result<ModelReport<T>> {
        let mut rep = ModelReport {
            s_symmetry: T::zero(),
            n_skew: T::zero(),
            dissipation_min_eig: T::max_value().unwrap(),
            skew_residual: skew_adjoint_residual(&self.skew_pair(grid)?, grid)?.max_residual(),
        };
        let (n, m) = (self.states(), self.inputs());
        for &t in grid.points() {
            let s = self.s.eval(t)?;
            let nn = self.n.eval(t)?;
            rep.s_symmetry = rep.s_symmetry.max((&s - s.transpose()).norm());
            rep.n_skew = rep.n_skew.max((&nn + nn.transpose()).norm());
            let p = self.p.eval(t)?;
            let mut w = DMatrix::zeros(n + m, n + m);
            put(&mut w, 0, 0, &self.r.eval(t)?);
            put(&mut w, 0, n, &p);
            put(&mut w, n, 0, &p.transpose());
            put(&mut w, n, n, &s);
            let low = sym_eigen_sorted(&w).values.last().copied().unwrap_or(T::zero());
            rep.dissipation_min_eig = rep.dissipation_min_eig.min(low);
        }
        Ok(rep)
    }

    /// Checks every port-Hamiltonian condition at tolerance `1e-10·(1 + scale)`.
    pub fn validate(&self, grid: &TimeGrid<T>) -> Result<()> {
        let rep = self.report(grid)?;
        let scale = [&self.e, &self.j, &self.r, &self.s]
            .iter()
            .map(|f| f.max_norm(grid))
            .collect::<Result<Vec<_>>>()?
            .into_iter()
            .fold(T::zero(), |a, b| a.max(b));
        let tol = lit::<T>(1e-10) * (T::one() + scale);
        let checks = [
            ("S is not symmetric", rep.s_symmetry),
            ("N is not skew-symmetric", rep.n_skew),
            ("(E, J - EK) is not skew-adjoint", rep.skew_residual),
            ("dissipation matrix is indefinite", -rep.dissipation_min_eig),
        ];
        for (what, r) in checks {
            if r > tol {
                return Err(DaeError::Structure { what: what.into(), residual: to_f64(r) });
            }
        }
        Ok(())
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct CircuitParams<T> {
    pub l: T,
    pub c1: T,
    pub c2: T,
    pub rl: T,
    pub rg: T,
    pub rr: T,
}

impl<T: Real> CircuitParams<T> {
    pub fn lossless(l: T, c1: T, c2: T) -> Self {
        Self { l, c1, c2, rl: T::zero(), rg: T::zero(), rr: T::zero() }
    }

    fn check(&self) -> Result<()> {
        if !(self.l > T::zero() && self.c1 > T::zero() && self.c2 > T::zero()) {
            return Err(DaeError::Parameter("L, C1 and C2 must be positive".into()));
        }
        if self.rl < T::zero() || self.rg < T::zero() || self.rr < T::zero() {
            return Err(DaeError::Parameter("resistances must be nonnegative".into()));
        }
        Ok(())
    }
}

fn constant<T: Real>(rows: usize, cols: usize, v: &[f64]) -> MatrixFunction<T> {
    MatrixFunction::constant(DMatrix::from_row_slice(rows, cols, &v.iter().map(|&x| lit::<T>(x)).collect::<Vec<_>>()))
        .expect("finite literal")
}

fn diag<T: Real>(v: &[T]) -> DMatrix<T> {
    DMatrix::from_diagonal(&DVector::from_column_slice(v))
}

/// State `(I, V₁, V₂, I_G, I_R)`, input the source voltage.
pub fn build_circuit<T: Real>(params: CircuitParams<T>) -> Result<PHDAEModel<T>> {
    params.check()?;
    let z = T::zero();
    let j = constant(5, 5, &[
        0.0, -1.0, 1.0, 0.0, 0.0, //
        1.0, 0.0, 0.0, -1.0, 0.0, //
        -1.0, 0.0, 0.0, 0.0, -1.0, //
        0.0, 1.0, 0.0, 0.0, 0.0, //
        0.0, 0.0, 1.0, 0.0, 0.0,
    ]);
    Ok(PHDAEModel {
        e: MatrixFunction::constant(diag(&[params.l, params.c1, params.c2, z, z]))?,
        j,
        r: MatrixFunction::constant(diag(&[params.rl, z, z, params.rg, params.rr]))?,
        k: MatrixFunction::zeros(5, 5),
        g: constant(5, 1, &[0.0, 0.0, 0.0, 1.0, 0.0]),
        p: MatrixFunction::zeros(5, 1),
        s: MatrixFunction::zeros(1, 1),
        n: MatrixFunction::zeros(1, 1),
    })
}

/// Permutation placing `(V₁, V₂, I, I_G, I_R)` first to last: `x = P x̂`.
pub fn circuit_permutation<T: Real>() -> DMatrix<T> {
    let order = [1usize, 2, 0, 3, 4];
    let mut p = DMatrix::zeros(5, 5);
    for (new, &old) in order.iter().enumerate() {
        p[(old, new)] = T::one();
    }
    p
}

/// The circuit pair in the variable order `(V₁, V₂, I, I_G, I_R)` with its
/// input column.
pub fn build_circuit_canonical<T: Real>(
    params: CircuitParams<T>,
    interval: &TimeGrid<T>,
) -> Result<(MatrixPair<T>, DMatrix<T>)> {
    let model = build_circuit(params)?;
    let p = circuit_permutation::<T>();
    let tr = CongruenceTransform::new(MatrixFunction::constant(p.clone())?)?;
    let pair = apply_congruence(&model.pair(interval)?, &tr)?;
    let g = p.transpose() * model.g.eval(interval.t0())?;
    Ok((pair, g))
}

/// Synthetic Stokes blocks with the structural properties of a mixed finite
/// element discretization.
#[derive(Clone, Debug)]
pub struct StokesModel<T: Real> {
    pub seed: u64,
    pub mass: DMatrix<T>,
    pub a_s: DMatrix<T>,
    pub a_h: DMatrix<T>,
    pub b: DMatrix<T>,
    pub c: DMatrix<T>,
}

impl<T: Real> StokesModel<T> {
    pub fn nv(&self) -> usize {
        self.b.nrows()
    }

    pub fn np(&self) -> usize {
        self.b.ncols()
    }

    /// `(diag(M, 0), [[A_S − A_H, −B], [Bᵀ, −C]])`; `lossless` drops `A_H`, `C`.
    pub fn pair(&self, interval: &TimeGrid<T>, lossless: bool) -> Result<MatrixPair<T>> {
        let model = self.model(lossless)?;
        model.pair(interval)
    }

    pub fn model(&self, lossless: bool) -> Result<PHDAEModel<T>> {
        let (nv, np) = (self.nv(), self.np());
        let n = nv + np;
        let mut e = DMatrix::zeros(n, n);
        put(&mut e, 0, 0, &self.mass);
        let mut j = DMatrix::zeros(n, n);
        put(&mut j, 0, 0, &self.a_s);
        put(&mut j, 0, nv, &(-&self.b));
        put(&mut j, nv, 0, &self.b.transpose());
        let mut r = DMatrix::zeros(n, n);
        if !lossless {
            put(&mut r, 0, 0, &self.a_h);
            put(&mut r, nv, nv, &self.c);
        }
        let mut g = DMatrix::zeros(n, nv);
        put(&mut g, 0, 0, &DMatrix::identity(nv, nv));
        Ok(PHDAEModel {
            e: MatrixFunction::constant(e)?,
            j: MatrixFunction::constant(j)?,
            r: MatrixFunction::constant(r)?,
            k: MatrixFunction::zeros(n, n),
            g: MatrixFunction::constant(g)?,
            p: MatrixFunction::zeros(n, nv),
            s: MatrixFunction::zeros(nv, nv),
            n: MatrixFunction::zeros(nv, nv),
        })
    }
}

fn random_matrix<T: Real>(rng: &mut ChaCha8Rng, rows: usize, cols: usize) -> DMatrix<T> {
    DMatrix::from_fn(rows, cols, |_, _| lit::<T>(rng.gen_range(-1.0..1.0)))
}

pub fn build_stokes<T: Real>(nv: usize, np: usize, seed: u64) -> Result<StokesModel<T>> {
    if np == 0 || nv <= np {
        return Err(DaeError::Parameter(format!("need nv > np >= 1, got nv = {nv}, np = {np}")));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let x = random_matrix::<T>(&mut rng, nv, nv);
    let mass = &x * x.transpose() + DMatrix::identity(nv, nv);
    let y = random_matrix::<T>(&mut rng, nv, nv);
    let a_s = &y - y.transpose();
    let z = random_matrix::<T>(&mut rng, nv, nv);
    let a_h = &z * z.transpose() * lit::<T>(0.1);
    let b = loop {
        let b = random_matrix::<T>(&mut rng, nv, np);
        let s = full_svd(&b).s;
        if s.last().copied().unwrap_or(T::zero()) > lit::<T>(1e-3) * s[0] {
            break b;
        }
    };
    let w = random_matrix::<T>(&mut rng, np, np);
    let c_raw = &w * w.transpose() + DMatrix::identity(np, np);
    let scale = mass.norm().max(a_s.norm());
    let c = &c_raw * (lit::<T>(1e-3) * scale / c_raw.norm());
    Ok(StokesModel { seed, mass, a_s, a_h, b, c })
}

fn is_spd<T: Real>(m: &DMatrix<T>) -> bool {
    let sym = (m - m.transpose()).norm() <= lit::<T>(1e-12) * (T::one() + m.norm());
    sym && sym_eigen_sorted(m).values.last().map_or(true, |&l| l > T::zero())
}

fn check_multibody<T: Real>(m: &DMatrix<T>, w: &DMatrix<T>, g: &DMatrix<T>) -> Result<()> {
    let n = m.nrows();
    if m.shape() != (n, n) || w.shape() != (n, n) || g.ncols() != n {
        return Err(DaeError::Shape(format!("M {:?}, W {:?}, G {:?}", m.shape(), w.shape(), g.shape())));
    }
    if !is_spd(m) {
        return Err(DaeError::Parameter("mass matrix M must be symmetric positive definite".into()));
    }
    if (w - w.transpose()).norm() > lit::<T>(1e-12) * (T::one() + w.norm()) {
        return Err(DaeError::Parameter("stiffness matrix W must be symmetric".into()));
    }
    let s = full_svd(g).s;
    if s.len() < g.nrows() || s.last().map_or(false, |&x| x <= lit::<T>(1e-12) * s[0]) {
        return Err(DaeError::Parameter("constraint matrix G must have full row rank".into()));
    }
    Ok(())
}

/// Self-adjoint form in `(q, p, λ)`:
/// `[[0, M, 0], [−M, 0, 0], [0, 0, 0]]`, `[[−W, 0, −Gᵀ], [0, −M, 0], [−G, 0, 0]]`.
pub fn build_multibody_self<T: Real>(
    m: &DMatrix<T>,
    w: &DMatrix<T>,
    g: &DMatrix<T>,
    interval: &TimeGrid<T>,
) -> Result<MatrixPair<T>> {
    check_multibody(m, w, g)?;
    let (n, k) = (m.nrows(), g.nrows());
    let size = 2 * n + k;
    let mut e = DMatrix::zeros(size, size);
    put(&mut e, 0, n, m);
    put(&mut e, n, 0, &(-m));
    let mut a = DMatrix::zeros(size, size);
    put(&mut a, 0, 0, &(-w));
    put(&mut a, 0, 2 * n, &(-g.transpose()));
    put(&mut a, n, n, &(-m));
    put(&mut a, 2 * n, 0, &(-g));
    MatrixPair::new(MatrixFunction::constant(e)?, MatrixFunction::constant(a)?, interval.clone())
}

/// Skew-adjoint form in `(q, p, λ)`:
/// `diag(W, M, 0)`, `[[0, W, 0], [−W, 0, −Gᵀ], [0, G, 0]]`.
pub fn build_multibody_skew<T: Real>(
    m: &DMatrix<T>,
    w: &DMatrix<T>,
    g: &DMatrix<T>,
    interval: &TimeGrid<T>,
) -> Result<MatrixPair<T>> {
    check_multibody(m, w, g)?;
    if !is_spd(w) {
        return Err(DaeError::Parameter("the skew-adjoint form needs W positive definite".into()));
    }
    let (n, k) = (m.nrows(), g.nrows());
    let size = 2 * n + k;
    let mut e = DMatrix::zeros(size, size);
    put(&mut e, 0, 0, w);
    put(&mut e, n, n, m);
    let mut a = DMatrix::zeros(size, size);
    put(&mut a, 0, n, w);
    put(&mut a, n, 0, &(-w));
    put(&mut a, n, 2 * n, &(-g.transpose()));
    put(&mut a, 2 * n, n, g);
    MatrixPair::new(MatrixFunction::constant(e)?, MatrixFunction::constant(a)?, interval.clone())
}

/// Both forms; fails when `W` is not positive definite.
pub fn build_multibody<T: Real>(
    m: &DMatrix<T>,
    w: &DMatrix<T>,
    g: &DMatrix<T>,
    interval: &TimeGrid<T>,
) -> Result<(MatrixPair<T>, MatrixPair<T>)> {
    Ok((build_multibody_self(m, w, g, interval)?, build_multibody_skew(m, w, g, interval)?))
}

/// Coefficients of the linear-quadratic control problem
/// `min ½x(t_f)ᵀM_f x(t_f) + ½∫ xᵀWx + 2xᵀSu + uᵀRu` subject to `Eẋ = Ax + Bu + f`.
#[derive(Clone, Debug)]
pub struct OptimalControlData<T: Real> {
    pub e: MatrixFunction<T>,
    pub a: MatrixFunction<T>,
    pub b: MatrixFunction<T>,
    pub w: MatrixFunction<T>,
    pub s: MatrixFunction<T>,
    pub r: MatrixFunction<T>,
    pub mf: DMatrix<T>,
}

fn check_symmetric_on<T: Real>(f: &MatrixFunction<T>, grid: &TimeGrid<T>, what: &str) -> Result<()> {
    for &t in grid.points() {
        let m = f.eval(t)?;
        let d = (&m - m.transpose()).norm();
        if d > lit::<T>(1e-12) * (T::one() + m.norm()) {
            return Err(DaeError::Parameter(format!("{what} is not symmetric at t = {}", to_f64(t))));
        }
    }
    Ok(())
}

/// Boundary-value pair in `(λ, x, u)`:
/// `[[0, E, 0], [−Eᵀ, 0, 0], [0, 0, 0]]`, `[[0, A, B], [Aᵀ + Ėᵀ, W, S], [Bᵀ, Sᵀ, R]]`.
pub fn build_optimal_control<T: Real>(data: &OptimalControlData<T>, interval: &TimeGrid<T>) -> Result<MatrixPair<T>> {
    let n = data.e.rows();
    let m = data.b.cols();
    let shapes_ok = data.e.shape() == (n, n)
        && data.a.shape() == (n, n)
        && data.b.shape() == (n, m)
        && data.w.shape() == (n, n)
        && data.s.shape() == (n, m)
        && data.r.shape() == (m, m)
        && data.mf.shape() == (n, n);
    if !shapes_ok {
        return Err(DaeError::Shape("inconsistent optimal control dimensions".into()));
    }
    check_symmetric_on(&data.w, interval, "W")?;
    check_symmetric_on(&data.r, interval, "R")?;
    if (&data.mf - data.mf.transpose()).norm() > lit::<T>(1e-12) * (T::one() + data.mf.norm()) {
        return Err(DaeError::Parameter("Mf is not symmetric".into()));
    }
    let zn = MatrixFunction::zeros(n, n);
    let znm = MatrixFunction::zeros(n, m);
    let zmn = MatrixFunction::zeros(m, n);
    let zm = MatrixFunction::zeros(m, m);
    let et = data.e.transpose();
    let minus_et = et.scale(-T::one());
    let big_e = MatrixFunction::assemble(&[
        vec![&zn, &data.e, &znm],
        vec![&minus_et, &zn, &znm],
        vec![&zmn, &zmn, &zm],
    ])?;
    let a21 = data.a.transpose().add(&data.e.derivative_function()?.transpose())?;
    let bt = data.b.transpose();
    let st = data.s.transpose();
    let big_a = MatrixFunction::assemble(&[
        vec![&zn, &data.a, &data.b],
        vec![&a21, &data.w, &data.s],
        vec![&bt, &st, &data.r],
    ])?;
    MatrixPair::new(big_e, big_a, interval.clone())
}
