//! Implicit midpoint integration of extracted cores and of full pairs, with
//! the flow and energy diagnostics the structure guarantees.

use nalgebra::{DMatrix, DVector};

use crate::error::{DaeError, Result};
use crate::linalg::inverse_condition;
use crate::matfun::{MatrixFunction, MatrixPair, TimeGrid};
use crate::models::PHDAEModel;
use crate::reduce::{Certificate, ReducedSystem};
use crate::scalar::{lit, to_f64, Real};

/// Smallest `σ_min/σ_max` accepted for a midpoint step matrix.
const STEP_RCOND: f64 = 1e-13;

#[derive(Clone, Debug)]
pub struct Trajectory<T: Real> {
    pub grid: TimeGrid<T>,
    /// Full states of the original system.
    pub states: Vec<DVector<T>>,
    /// Dynamic-core states (equal to `states` for direct integration).
    pub dynamic: Vec<DVector<T>>,
    /// `½xᵀE(t)x` per point; zero when no energy matrix is attached.
    pub hamiltonian: Vec<T>,
}

#[derive(Clone, Debug)]
pub struct FlowDiagnostics<T: Real> {
    pub kind: Certificate<T>,
    pub max_defect: T,
    pub fundamental: Vec<DMatrix<T>>,
}

fn lu_step<T: Real>(lhs: DMatrix<T>, rhs: &DMatrix<T>, t: T) -> Result<DMatrix<T>> {
    if inverse_condition(&lhs) <= lit::<T>(STEP_RCOND) {
        return Err(DaeError::StepSize { t: to_f64(t) });
    }
    lhs.lu().solve(rhs).ok_or(DaeError::StepSize { t: to_f64(t) })
}

/// `(I − h/2·M) X_{k+1} = (I + h/2·M) X_k + h·G` with `M`, `G` at the midpoint.
fn midpoint<T: Real, F>(m: &MatrixFunction<T>, x0: DMatrix<T>, grid: &TimeGrid<T>, mut forcing: F) -> Result<Vec<DMatrix<T>>>
where
    F: FnMut(T) -> Result<Option<DMatrix<T>>>,
{
    let n = m.rows();
    if m.cols() != n || x0.nrows() != n {
        return Err(DaeError::Shape(format!("M {:?} with initial value {:?}", m.shape(), x0.shape())));
    }
    let half = lit::<T>(0.5);
    let id = DMatrix::<T>::identity(n, n);
    let mut out = Vec::with_capacity(grid.len());
    out.push(x0);
    for w in grid.points().windows(2) {
        let h = w[1] - w[0];
        let tm = w[0] + h * half;
        let mm = m.eval(tm)? * (h * half);
        let prev = out.last().unwrap();
        let mut rhs = (&id + &mm) * prev;
        if let Some(g) = forcing(tm)? {
            rhs += g * h;
        }
        out.push(lu_step(&id - mm, &rhs, tm)?);
    }
    Ok(out)
}

/// `Φ̇ = M(t)Φ`, `Φ(t0) = I`, with its defect against the certificate form.
pub fn fundamental_solution<T: Real>(
    m: &MatrixFunction<T>,
    grid: &TimeGrid<T>,
    kind: &Certificate<T>,
) -> Result<FlowDiagnostics<T>> {
    let n = m.rows();
    let fundamental = midpoint(m, DMatrix::identity(n, n), grid, |_| Ok(None))?;
    let max_defect = flow_defect(&fundamental, kind);
    Ok(FlowDiagnostics { kind: kind.clone(), max_defect, fundamental })
}

/// `max_k ‖Φ_kᵀ B Φ_k − B‖_F`.
pub fn flow_defect<T: Real>(phi: &[DMatrix<T>], kind: &Certificate<T>) -> T {
    phi.iter()
        .map(|p| {
            let b = kind.form(p.nrows());
            (p.transpose() * &b * p - &b).norm()
        })
        .fold(T::zero(), |a, d| a.max(d))
}

/// `H_k = ½ x_kᵀ E(t_k) x_k`.
pub fn hamiltonian_series<T: Real>(e: &MatrixFunction<T>, traj: &Trajectory<T>) -> Result<Vec<T>> {
    traj.grid
        .points()
        .iter()
        .zip(&traj.states)
        .map(|(&t, x)| {
            if x.len() != e.rows() {
                return Err(DaeError::Shape(format!("state of length {} for E {:?}", x.len(), e.shape())));
            }
            Ok((x.transpose() * e.eval(t)? * x)[0] * lit::<T>(0.5))
        })
        .collect()
}

fn energies<T: Real>(e: Option<&MatrixFunction<T>>, grid: &TimeGrid<T>, states: &[DVector<T>]) -> Result<Vec<T>> {
    match e {
        None => Ok(vec![T::zero(); states.len()]),
        Some(e) => {
            let traj = Trajectory { grid: grid.clone(), states: states.to_vec(), dynamic: vec![], hamiltonian: vec![] };
            hamiltonian_series(e, &traj)
        }
    }
}

/// Integrates `ẋ = M x + g` and maps every point back to the full state.
pub fn integrate_reduced<T: Real>(sys: &ReducedSystem<T>, x0: &DVector<T>, grid: &TimeGrid<T>) -> Result<Trajectory<T>> {
    if x0.len() != sys.dynamic_dim {
        return Err(DaeError::Shape(format!("initial value of length {} for dimension {}", x0.len(), sys.dynamic_dim)));
    }
    let x0 = DMatrix::from_column_slice(x0.len(), 1, x0.as_slice());
    let xs = midpoint(&sys.m, x0, grid, |t| Ok(Some(DMatrix::from_column_slice(sys.dynamic_dim, 1, sys.rhs(t)?.as_slice()))))?;
    let dynamic: Vec<DVector<T>> = xs.into_iter().map(|x| x.column(0).into_owned()).collect();
    let states = grid
        .points()
        .iter()
        .zip(&dynamic)
        .map(|(&t, x)| sys.reconstruct(t, x))
        .collect::<Result<Vec<_>>>()?;
    let hamiltonian = energies(sys.energy.as_ref(), grid, &states)?;
    Ok(Trajectory { grid: grid.clone(), states, dynamic, hamiltonian })
}

/// Midpoint rule on `E ẋ = A x + f` directly:
/// `E_m (x_{k+1} − x_k)/h = A_m (x_k + x_{k+1})/2 + f_m`.
pub fn integrate_pair<T: Real>(
    pair: &MatrixPair<T>,
    f: &MatrixFunction<T>,
    x0: &DVector<T>,
    grid: &TimeGrid<T>,
) -> Result<Trajectory<T>> {
    let n = pair.n();
    if x0.len() != n || f.shape() != (n, 1) {
        return Err(DaeError::Shape(format!("x0 of length {}, forcing {:?} for size {n}", x0.len(), f.shape())));
    }
    let half = lit::<T>(0.5);
    let mut states = Vec::with_capacity(grid.len());
    states.push(x0.clone());
    for w in grid.points().windows(2) {
        let h = w[1] - w[0];
        let tm = w[0] + h * half;
        let (e, a) = pair.eval(tm)?;
        let e_h = e / h;
        let a_2 = a * half;
        let prev = states.last().unwrap();
        let rhs = (&e_h + &a_2) * prev + f.eval(tm)?.column(0);
        let rhs = DMatrix::from_column_slice(n, 1, rhs.as_slice());
        let next = lu_step(e_h - a_2, &rhs, tm)?;
        states.push(next.column(0).into_owned());
    }
    let hamiltonian = energies(Some(&pair.e), grid, &states)?;
    Ok(Trajectory { grid: grid.clone(), dynamic: states.clone(), states, hamiltonian })
}

#[derive(Clone, Debug, PartialEq)]
pub struct DissipationReport<T> {
    /// Largest `H_{k+1} − H_k − h·y_mᵀu_m` beyond the per-step tolerance.
    pub max_violation: T,
    pub hamiltonian: Vec<T>,
    pub holds: bool,
}

/// Discrete dissipation inequality `H_{k+1} ≤ H_k + h·y_mᵀu_m + tol_k`,
/// `tol_k = 1e-8·(1 + |H_k|)`.
pub fn dissipation_monitor<T: Real>(
    model: &PHDAEModel<T>,
    traj: &Trajectory<T>,
    u: &MatrixFunction<T>,
) -> Result<DissipationReport<T>> {
    let h_series = hamiltonian_series(&model.e, traj)?;
    let half = lit::<T>(0.5);
    let mut worst = T::zero();
    let mut holds = true;
    for (k, w) in traj.grid.points().windows(2).enumerate() {
        let h = w[1] - w[0];
        let tm = w[0] + h * half;
        let xm = (&traj.states[k] + &traj.states[k + 1]) * half;
        let um = u.eval(tm)?.column(0).into_owned();
        let y = model.output(tm, &xm, &um)?;
        let supply = y.dot(&um) * h;
        let excess = h_series[k + 1] - h_series[k] - supply;
        let tol = lit::<T>(1e-8) * (T::one() + h_series[k].abs());
        if excess > tol {
            holds = false;
        }
        worst = worst.max(excess - tol);
    }
    Ok(DissipationReport { max_violation: worst.max(T::zero()), hamiltonian: h_series, holds })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::models::{build_circuit, CircuitParams};
    use crate::reduce::{canonical_j, hamiltonian_core, indefinite_core};

    fn m(r: usize, c: usize, v: &[f64]) -> DMatrix<f64> {
        DMatrix::from_row_slice(r, c, v)
    }

    fn rot(a: f64) -> DMatrix<f64> {
        m(2, 2, &[a.cos(), a.sin(), -a.sin(), a.cos()])
    }

    #[test]
    fn zero_generator_gives_identity_flow() {
        let g = TimeGrid::uniform(0.0, 1.0, 11).unwrap();
        let d = fundamental_solution(&MatrixFunction::zeros(3, 3), &g, &Certificate::Orthogonal).unwrap();
        assert!(d.fundamental.iter().all(|p| *p == DMatrix::identity(3, 3)));
        assert_eq!(d.max_defect, 0.0);
    }

    #[test]
    fn rotation_matches_exponential() {
        let g = TimeGrid::uniform(0.0, std::f64::consts::FRAC_PI_2, 2001).unwrap();
        let gen = MatrixFunction::constant(m(2, 2, &[0.0, 1.0, -1.0, 0.0])).unwrap();
        let d = fundamental_solution(&gen, &g, &Certificate::Orthogonal).unwrap();
        let end = d.fundamental.last().unwrap();
        // exp([[0,1],[-1,0]]·π/2) = [[0,1],[-1,0]]
        assert!((end - m(2, 2, &[0.0, 1.0, -1.0, 0.0])).norm() < 1e-6);
        assert!(d.max_defect < 1e-12);
    }

    #[test]
    fn commuting_family_matches_closed_form() {
        let g = TimeGrid::uniform(0.0, 1.0, 2001).unwrap();
        let gen = MatrixFunction::poly(2, 2, vec![vec![], vec![0.0, 1.0], vec![0.0, -1.0], vec![]]).unwrap();
        let d = fundamental_solution(&gen, &g, &Certificate::Orthogonal).unwrap();
        for (&t, p) in g.points().iter().zip(&d.fundamental) {
            assert!((p - rot(t * t / 2.0)).norm() < 1e-6);
        }
    }

    #[test]
    fn defect_of_scaled_identity() {
        let j = canonical_j::<f64>(1);
        let phi = vec![DMatrix::identity(2, 2), DMatrix::identity(2, 2) * 2.0];
        let d = flow_defect(&phi, &Certificate::Symplectic(j));
        assert!((d - 3.0 * 2f64.sqrt()).abs() < 1e-14);
    }

    #[test]
    fn quadratic_invariants_survive_every_step_size() {
        let j = canonical_j::<f64>(2);
        let c = MatrixFunction::poly(
            4,
            4,
            (0..16)
                .map(|k| {
                    let (i, l) = (k / 4, k % 4);
                    let base = (i.min(l) + 1) as f64 * 0.3 + if i == l { 1.0 } else { 0.0 };
                    vec![base, 0.1 * (i + l) as f64]
                })
                .collect(),
        )
        .unwrap();
        let sys = hamiltonian_core(&j, &c, &TimeGrid::uniform(0.0, 2.0, 3).unwrap()).unwrap();
        for steps in [10, 100, 1000] {
            let g = TimeGrid::uniform(0.0, 2.0, steps + 1).unwrap();
            let d = fundamental_solution(&sys.m, &g, &sys.certificate).unwrap();
            assert!(d.max_defect < 1e-10, "steps {steps}: {}", d.max_defect);
        }
        let s = DMatrix::from_diagonal(&DVector::from_vec(vec![1.0, 1.0, -1.0]));
        let jf = MatrixFunction::constant(m(3, 3, &[0.0, 1.0, 2.0, -1.0, 0.0, -0.5, -2.0, 0.5, 0.0])).unwrap();
        let g = TimeGrid::uniform(0.0, 1.0, 101).unwrap();
        let sys = indefinite_core(&s, &jf, &g).unwrap();
        let d = fundamental_solution(&sys.m, &g, &sys.certificate).unwrap();
        assert!(d.max_defect < 1e-10);
    }

    #[test]
    fn midpoint_is_second_order() {
        let gen = MatrixFunction::constant(m(2, 2, &[0.0, 1.0, -1.0, 0.0])).unwrap();
        let err = |steps: usize| {
            let g = TimeGrid::uniform(0.0, 1.0, steps + 1).unwrap();
            let d = fundamental_solution(&gen, &g, &Certificate::Orthogonal).unwrap();
            (d.fundamental.last().unwrap() - rot(1.0)).norm()
        };
        let ratio = err(50) / err(100);
        assert!((3.6..=4.4).contains(&ratio), "{ratio}");
    }

    #[test]
    fn hamiltonian_of_circuit_state() {
        let model = build_circuit(CircuitParams::lossless(1.0, 1.0, 1.0)).unwrap();
        let g = TimeGrid::uniform(0.0, 1.0, 2).unwrap();
        let x = DVector::from_vec(vec![1.0, 1.0, 1.0, 0.0, 0.0]);
        let traj = Trajectory { grid: g.clone(), states: vec![x.clone(), DVector::zeros(5)], dynamic: vec![], hamiltonian: vec![] };
        assert_eq!(hamiltonian_series(&model.e, &traj).unwrap(), vec![1.5, 0.0]);
    }

    #[test]
    fn lossy_circuit_dissipates() {
        let model = build_circuit(CircuitParams { l: 1.0, c1: 1.0, c2: 1.0, rl: 1.0, rg: 1.0, rr: 1.0 }).unwrap();
        let g = TimeGrid::uniform(0.0, 10.0, 1001).unwrap();
        let pair = model.pair(&g).unwrap();
        let x0 = DVector::from_vec(vec![1.0, 0.0, 0.0, 0.0, 0.0]);
        let traj = integrate_pair(&pair, &MatrixFunction::zeros(5, 1), &x0, &g).unwrap();
        let rep = dissipation_monitor(&model, &traj, &MatrixFunction::zeros(1, 1)).unwrap();
        assert!(rep.holds);
        assert!(rep.hamiltonian.windows(2).all(|w| w[1] < w[0]));
    }

    #[test]
    fn lossless_circuit_conserves_energy() {
        let model = build_circuit(CircuitParams::lossless(1.0, 1.0, 1.0)).unwrap();
        let g = TimeGrid::uniform(0.0, 10.0, 1001).unwrap();
        let pair = model.pair(&g).unwrap();
        let x0 = DVector::from_vec(vec![1.0, 0.0, 0.0, 0.0, 0.0]);
        let traj = integrate_pair(&pair, &MatrixFunction::zeros(5, 1), &x0, &g).unwrap();
        let h0: f64 = traj.hamiltonian[0];
        assert!(traj.hamiltonian.iter().all(|&h: &f64| (h - h0).abs() <= 1e-10 * (1.0 + h0.abs())));
        let rep = dissipation_monitor(&model, &traj, &MatrixFunction::zeros(1, 1)).unwrap();
        assert!(rep.holds);
    }

    #[test]
    fn zero_state_stays_at_rest() {
        let model = build_circuit(CircuitParams { l: 1.0, c1: 1.0, c2: 1.0, rl: 1.0, rg: 1.0, rr: 1.0 }).unwrap();
        let g = TimeGrid::uniform(0.0, 1.0, 11).unwrap();
        let traj = integrate_pair(&model.pair(&g).unwrap(), &MatrixFunction::zeros(5, 1), &DVector::zeros(5), &g).unwrap();
        assert!(traj.hamiltonian.iter().all(|&h| h == 0.0));
    }

    #[test]
    fn constant_reduced_trajectory() {
        let sys = hamiltonian_core(&canonical_j::<f64>(1), &MatrixFunction::zeros(2, 2), &TimeGrid::uniform(0.0, 1.0, 3).unwrap())
            .unwrap();
        let g = TimeGrid::uniform(0.0, 1.0, 11).unwrap();
        let traj = integrate_reduced(&sys, &DVector::from_vec(vec![1.0, 0.0]), &g).unwrap();
        assert!(traj.states.iter().all(|x| *x == DVector::from_vec(vec![1.0, 0.0])));
    }

    #[test]
    fn singular_step_is_reported() {
        // h/2 · 2 = 1 makes I − h/2·M singular.
        let gen = MatrixFunction::constant(DMatrix::from_element(1, 1, 2.0)).unwrap();
        let g = TimeGrid::uniform(0.0, 1.0, 2).unwrap();
        let err = fundamental_solution(&gen, &g, &Certificate::Orthogonal).unwrap_err();
        assert!(matches!(err, DaeError::StepSize { .. }));
    }
}
