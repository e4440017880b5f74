use nalgebra::DMatrix;
use proptest::prelude::*;

use struct_dae_core::factor::signature;
use struct_dae_core::flow::fundamental_solution;
use struct_dae_core::reduce::{canonical_j, hamiltonian_core, indefinite_core};
use struct_dae_core::structure::{apply_congruence, self_adjoint_residual, skew_adjoint_residual};
use struct_dae_core::{CongruenceTransform, MatrixFunction, MatrixPair, TimeGrid};

fn mat(n: usize, v: &[f64]) -> DMatrix<f64> {
    DMatrix::from_column_slice(n, n, &v[..n * n])
}

fn entries(n: usize, terms: usize) -> impl Strategy<Value = Vec<f64>> {
    prop::collection::vec(-1.0..1.0f64, n * n * terms)
}

fn chunks(n: usize, v: &[f64]) -> Vec<DMatrix<f64>> {
    v.chunks(n * n).map(|c| mat(n, c)).collect()
}

/// Structured pair from raw polynomial coefficients: `E` symmetric for the
/// skew-adjoint case, skew otherwise, and `A = X − Ė/2` with `X` of the
/// opposite symmetry.
fn pair_from(n: usize, e_raw: &[f64], a_raw: &[f64], skew: bool, grid: &TimeGrid) -> MatrixPair {
    let sign = if skew { 1.0 } else { -1.0 };
    let e: Vec<_> = chunks(n, e_raw).iter().map(|m| m + m.transpose() * sign).collect();
    let mut a: Vec<_> = chunks(n, a_raw).iter().map(|m| m - m.transpose() * sign).collect();
    for k in 1..e.len() {
        a[k - 1] -= &e[k] * (0.5 * k as f64);
    }
    let ef = MatrixFunction::poly_from_matrices(&e).unwrap();
    let af = MatrixFunction::poly_from_matrices(&a).unwrap();
    MatrixPair::new(ef, af, grid.clone()).unwrap()
}

fn transform_from(n: usize, raw: &[f64]) -> CongruenceTransform {
    let mut q: Vec<_> = chunks(n, raw).into_iter().map(|m| m * 0.2).collect();
    q[0] += DMatrix::identity(n, n) * 2.0;
    CongruenceTransform::new(MatrixFunction::poly_from_matrices(&q).unwrap()).unwrap()
}

fn grid() -> TimeGrid {
    TimeGrid::uniform(0.0, 1.0, 9).unwrap()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn congruence_keeps_self_adjointness(e in entries(3, 3), a in entries(3, 3), q in entries(3, 2)) {
        let g = grid();
        let out = apply_congruence(&pair_from(3, &e, &a, false, &g), &transform_from(3, &q)).unwrap();
        let scale = 1.0 + out.a.max_norm(&g).unwrap();
        prop_assert!(self_adjoint_residual(&out, &g).unwrap().max_residual() <= 1e-10 * scale);
    }

    #[test]
    fn congruence_keeps_skew_adjointness(e in entries(3, 3), a in entries(3, 3), q in entries(3, 2)) {
        let g = grid();
        let out = apply_congruence(&pair_from(3, &e, &a, true, &g), &transform_from(3, &q)).unwrap();
        let scale = 1.0 + out.a.max_norm(&g).unwrap();
        prop_assert!(skew_adjoint_residual(&out, &g).unwrap().max_residual() <= 1e-10 * scale);
    }

    #[test]
    fn hamiltonian_generator_is_in_the_lie_algebra(c0 in entries(4, 1), c1 in entries(4, 1)) {
        let g = TimeGrid::uniform(0.0, 2.0, 41).unwrap();
        let sym = |m: DMatrix<f64>| &m + m.transpose();
        let c = MatrixFunction::poly_from_matrices(&[sym(mat(4, &c0)), sym(mat(4, &c1))]).unwrap();
        let sys = hamiltonian_core(&canonical_j(2), &c, &g).unwrap();
        prop_assert!(sys.lie_defect(&g).unwrap() <= 1e-10);
        let flow = fundamental_solution(&sys.m, &g, &sys.certificate).unwrap();
        let growth = flow.fundamental.iter().map(|p| p.norm()).fold(1.0, f64::max);
        prop_assert!(flow.max_defect <= 1e-9 * growth * growth);
    }

    #[test]
    fn indefinite_flow_preserves_signature(k0 in entries(3, 1), k1 in entries(3, 1), p in 0usize..=3) {
        let g = TimeGrid::uniform(0.0, 2.0, 41).unwrap();
        let skew = |m: DMatrix<f64>| &m - m.transpose();
        let j = MatrixFunction::poly_from_matrices(&[skew(mat(3, &k0)), skew(mat(3, &k1))]).unwrap();
        let sys = indefinite_core(&signature(p, 3 - p), &j, &g).unwrap();
        prop_assert!(sys.lie_defect(&g).unwrap() <= 1e-10);
        let flow = fundamental_solution(&sys.m, &g, &sys.certificate).unwrap();
        let growth = flow.fundamental.iter().map(|p| p.norm()).fold(1.0, f64::max);
        prop_assert!(flow.max_defect <= 1e-9 * growth * growth);
    }
}
