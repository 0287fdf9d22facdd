use nalgebra::DMatrix;
use proptest::prelude::*;
use rabi_nccm::nccm::*;
use rabi_nccm::observables;
use rabi_nccm::op_algebra::{
    project, reference_expectation, BasisIndex, Monomial, NormalOrderedPoly, SpinFactor,
};
use rabi_nccm::C64;

const H: f64 = 1e-6;

fn state_strategy() -> impl Strategy<Value = (ClusterState, f64)> {
    let coeffs = |n| prop::collection::vec((-0.3..0.3f64, -0.3..0.3f64), n);
    (2usize..=8).prop_flat_map(move |n| (coeffs(n), coeffs(n), coeffs(n), coeffs(n), 0.01..0.5f64)).prop_map(
        |(s1, s2, st1, st2, g)| {
            let c = |v: Vec<(f64, f64)>| v.into_iter().map(|(a, b)| C64::new(a, b)).collect();
            let n = s1.len();
            let mut s = ClusterState::vacuum(n, 0.0);
            s.s1 = c(s1);
            s.s2 = c(s2);
            s.st1 = c(st1);
            s.st2 = c(st2);
            (s, g)
        },
    )
}

fn sup(v: &[C64]) -> f64 {
    v.iter().map(|c| c.norm()).fold(0.0, f64::max)
}

fn sup_diff(a: &[C64], b: &[C64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y).norm()).fold(0.0, f64::max)
}

/// Central difference of `f` along every flat coordinate in `range`.
fn fd_gradient(state: &ClusterState, range: std::ops::Range<usize>, mut f: impl FnMut(&ClusterState) -> C64) -> Vec<C64> {
    let n = state.truncation();
    let y = state.to_flat();
    range
        .map(|i| {
            let mut yp = y.clone();
            let mut ym = y.clone();
            yp[i] += H;
            ym[i] -= H;
            (f(&ClusterState::from_flat(n, 0.0, &yp)) - f(&ClusterState::from_flat(n, 0.0, &ym))) / (2.0 * H)
        })
        .collect()
}

fn mono(k: u32, l: u32, spin: SpinFactor) -> NormalOrderedPoly {
    NormalOrderedPoly::from_monomial(Monomial::new(1.0, k, l, spin))
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(100))]

    #[test]
    fn energy_gradients_match_finite_differences((state, g) in state_strategy()) {
        let n = state.truncation();
        let params = RabiParams::resonant(g);
        let mut plan = EomPlan::new(params, ClusterConfig::sub(n));
        let (d_bra, d_ket) = plan.gradients(&state);
        let fd_ket = fd_gradient(&state, 0..2 * n, |s| plan.energy(s));
        let fd_bra = fd_gradient(&state, 2 * n..4 * n, |s| plan.energy(s));
        prop_assert!(sup_diff(&fd_ket, &d_ket) <= 1e-6 * sup(&d_ket));
        prop_assert!(sup_diff(&fd_bra, &d_bra) <= 1e-6 * sup(&d_bra));
    }

    #[test]
    fn residuals_are_projections_of_transformed_hamiltonian((state, g) in state_strategy()) {
        let n = state.truncation();
        let params = RabiParams::resonant(g);
        let ht = transformed_hamiltonian(params, &state).unwrap();
        let mut plan = EomPlan::new(params, ClusterConfig::sub(n));
        let r = plan.ket_residuals(&state.s1, &state.s2);
        for m in 1..=n {
            prop_assert!((project(BasisIndex::boson(m as u32), &ht) - r[m - 1]).norm() < 1e-12);
            prop_assert!((project(BasisIndex::spin_flip(m as u32), &ht) - r[n + m - 1]).norm() < 1e-12);
        }
        prop_assert!((reference_expectation(&ht) - plan.reference_energy(&state.s1, &state.s2)).norm() < 1e-12);
    }

    #[test]
    fn observables_agree_with_algebra((state, g) in state_strategy()) {
        let alg = |p: &NormalOrderedPoly| expectation_by_algebra(p, &state).unwrap();
        let close = |a: C64, b: C64| (a - b).norm() <= 1e-11 * (1.0 + a.norm());
        prop_assert!(close(alg(&mono(0, 0, SpinFactor::Z)), observables::atomic_inversion(&state)));
        prop_assert!(close(alg(&mono(1, 1, SpinFactor::Identity)), observables::photon_number(&state)));
        prop_assert!(close(alg(&mono(2, 2, SpinFactor::Identity)), observables::bdbdbb(&state)));
        prop_assert!(close(alg(&mono(0, 1, SpinFactor::Identity)), observables::expect_b(&state)));
        prop_assert!(close(alg(&mono(0, 2, SpinFactor::Identity)), observables::expect_b2(&state)));
        let params = RabiParams::resonant(g);
        prop_assert!(close(alg(&hamiltonian_poly(params)), energy_functional(&state, params).unwrap()));
    }

    #[test]
    fn rates_follow_from_energy((state, g) in state_strategy()) {
        let n = state.truncation();
        let params = RabiParams::resonant(g);
        let mut plan = EomPlan::new(params, ClusterConfig::sub(n));
        let (d_bra, d_ket) = plan.gradients(&state);
        let rates = eom_rhs(&state, params, ClusterConfig::sub(n)).unwrap();
        let i = C64::new(0.0, 1.0);
        for m in 0..n {
            prop_assert!((rates.s1[m] + i * d_bra[m] / plan.norm(m)).norm() < 1e-12);
            prop_assert!((rates.s2[m] + i * d_bra[n + m] / plan.norm(n + m)).norm() < 1e-12);
            prop_assert!((rates.st1[m] - i * d_ket[m] / plan.norm(m)).norm() < 1e-12);
            prop_assert!((rates.st2[m] - i * d_ket[n + m] / plan.norm(n + m)).norm() < 1e-12);
        }
    }

    #[test]
    fn jacobian_and_hessian_match_finite_differences((state, g) in state_strategy()) {
        let n = state.truncation();
        let params = RabiParams::resonant(g);
        let mut plan = EomPlan::new(params, ClusterConfig::sub(n));
        let a = plan.ket_jacobian(&state.s1, &state.s2);
        let c = plan.ket_hessian(&state);
        let mut fd_a = DMatrix::<C64>::zeros(2 * n, 2 * n);
        let mut fd_c = DMatrix::<C64>::zeros(2 * n, 2 * n);
        let y = state.to_flat();
        for j in 0..2 * n {
            let mut yp = y.clone();
            let mut ym = y.clone();
            yp[j] += H;
            ym[j] -= H;
            let (sp, sm) = (ClusterState::from_flat(n, 0.0, &yp), ClusterState::from_flat(n, 0.0, &ym));
            let rp = plan.ket_residuals(&sp.s1, &sp.s2);
            let rm = plan.ket_residuals(&sm.s1, &sm.s2);
            let gp = plan.gradients(&sp).1;
            let gm = plan.gradients(&sm).1;
            for i in 0..2 * n {
                fd_a[(i, j)] = (rp[i] - rm[i]) / (2.0 * H);
                fd_c[(i, j)] = (gp[i] - gm[i]) / (2.0 * H);
            }
        }
        let scale = |m: &DMatrix<C64>| m.iter().map(|c| c.norm()).fold(0.0, f64::max);
        prop_assert!(scale(&(&fd_a - &a)) <= 1e-6 * scale(&a));
        prop_assert!(scale(&(&fd_c - &c)) <= 1e-6 * scale(&c).max(1e-12));
    }
}

#[test]
fn vacuum_energy_is_reference_energy() {
    let params = RabiParams::resonant(0.3);
    let e = energy_functional(&ClusterState::vacuum(5, 0.0), params).unwrap();
    assert_eq!(e, C64::new(-0.5, 0.0));
}

#[test]
fn hessian_is_symmetric() {
    let mut s = ClusterState::vacuum(4, 0.0);
    for m in 0..4 {
        s.s1[m] = C64::new(0.1 / (m + 1) as f64, 0.02);
        s.s2[m] = C64::new(-0.05, 0.01 * m as f64);
        s.st1[m] = C64::new(0.03, -0.01);
        s.st2[m] = C64::new(0.07, 0.0);
    }
    let c = EomPlan::new(RabiParams::resonant(0.2), ClusterConfig::sub(4)).ket_hessian(&s);
    assert!((&c - c.transpose()).iter().all(|x| x.norm() < 1e-14));
}
