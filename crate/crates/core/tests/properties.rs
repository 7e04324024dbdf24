mod common;

use common::*;
use gyro_core::linalg::{c64, fro, to_complex, CMatrix, CVector, RMatrix, C64};
use gyro_core::spectral::identity_suite_with;
use gyro_core::timedomain::integrate;
use gyro_core::{Analyzer, CanonicalOperator, LagrangianSystem};
use proptest::prelude::*;
use rand::Rng;

fn system_from(seed: u64, n: usize, n_r: usize, eta_pd: bool) -> LagrangianSystem {
    random_system(&mut rng(seed), n, n_r.clamp(1, n), eta_pd)
}

fn random_complex(r: &mut rand::rngs::StdRng, n: usize) -> CVector {
    CVector::from_fn(n, |_, _| c64(r.random_range(-1.0..1.0), r.random_range(-1.0..1.0)))
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn determinant_factorization(seed in any::<u64>(), n in 1usize..5, n_r in 1usize..5, eta_pd in any::<bool>(), beta in 0.0f64..20.0) {
        let sys = system_from(seed, n, n_r, eta_pd);
        let canon = CanonicalOperator::new(&sys).unwrap();
        let a = canon.a(beta);
        let det_alpha = sys.alpha().determinant();
        let mut r = rng(seed ^ 0x5a5a);
        for _ in 0..20 {
            let zeta = c64(r.random_range(-3.0..3.0), r.random_range(-3.0..3.0));
            let lhs = (CMatrix::identity(2 * n, 2 * n) * zeta - &a).determinant() * det_alpha;
            let rhs = sys.pencil(zeta, beta).determinant();
            prop_assert!((lhs - rhs).norm() <= 1e-8 * lhs.norm().max(rhs.norm()).max(1.0));
        }
    }

    #[test]
    fn energy_identity(seed in any::<u64>(), n in 1usize..6, n_r in 1usize..6, eta_pd in any::<bool>()) {
        let sys = system_from(seed, n, n_r, eta_pd);
        let canon = CanonicalOperator::new(&sys).unwrap();
        let mut r = rng(seed ^ 7);
        let q = RMatrix::from_fn(n, 1, |_, _| r.random_range(-1.0..1.0));
        let qdot = RMatrix::from_fn(n, 1, |_, _| r.random_range(-1.0..1.0));
        let p = sys.alpha() * &qdot + sys.theta() * &q;
        let mut u = RMatrix::zeros(2 * n, 1);
        u.view_mut((0, 0), (n, 1)).copy_from(&p);
        u.view_mut((n, 0), (n, 1)).copy_from(&q);
        let v = canon.k() * u;
        let h = sys
            .hamiltonian(&to_complex(&q).column(0).into_owned(), &to_complex(&qdot).column(0).into_owned())
            .unwrap();
        let half = 0.5 * v.norm_squared();
        prop_assert!((half - h).abs() <= 1e-12 * h.max(1e-300) + 1e-15);
    }

    #[test]
    fn operator_structure(seed in any::<u64>(), n in 1usize..6, n_r in 1usize..6, eta_pd in any::<bool>(), beta in 0.0f64..50.0) {
        let sys = system_from(seed, n, n_r, eta_pd);
        let canon = CanonicalOperator::new(&sys).unwrap();
        let a = canon.a(beta);
        let scale = fro(&a).max(1.0);
        prop_assert!(fro(&(a.adjoint() + a.transpose())) <= 1e-12 * scale);
        let omega = canon.omega();
        prop_assert!(fro(&(omega.adjoint() - &omega)) <= 1e-12 * fro(&omega).max(1.0));
        let bvals = canon.b().clone().symmetric_eigenvalues();
        let bmax = bvals.iter().cloned().fold(0.0, f64::max);
        prop_assert!(bvals.iter().all(|&x| x >= -1e-12 * bmax.max(1.0)));
        let rank = bvals.iter().filter(|&&x| x > 1e-10 * bmax).count();
        prop_assert_eq!(rank, sys.n_r());
        let d = canon.loss_decomposition().unwrap();
        prop_assert_eq!(d.dim_ran(), sys.n_r());
        prop_assert!(fro(&(d.reassemble_omega() - &omega)) <= 1e-12 * fro(&omega).max(1.0));
        let p_sum = &d.p_b + &d.p_b_perp;
        prop_assert!((p_sum - RMatrix::identity(2 * n, 2 * n)).norm() <= 1e-12);
    }

    #[test]
    fn spectrum_symmetry_and_nonzero(seed in any::<u64>(), n in 1usize..6, n_r in 1usize..6, beta in 0.0f64..50.0) {
        let sys = system_from(seed, n, n_r, true);
        let an = Analyzer::new(&sys).unwrap();
        let modes = an.spectrum(beta).unwrap().modes;
        let z: Vec<C64> = modes.iter().map(|m| m.zeta).collect();
        let mirrored: Vec<C64> = z.iter().map(|x| -x.conj()).collect();
        prop_assert!(rel_matched(&z, &mirrored) <= 1e-9);
        let scale = fro(&an.canonical().a(beta));
        prop_assert!(z.iter().all(|x| x.norm() > 1e-10 * scale));
        prop_assert!(z.iter().all(|x| x.im <= 1e-12 * scale));
    }

    #[test]
    fn pencil_state_round_trip(seed in any::<u64>(), n in 1usize..5, n_r in 1usize..5, eta_pd in any::<bool>(), beta in 0.0f64..10.0) {
        let sys = system_from(seed, n, n_r, eta_pd);
        let an = Analyzer::new(&sys).unwrap();
        let canon = an.canonical();
        let a = canon.a(beta);
        for m in an.spectrum(beta).unwrap().modes {
            if m.zeta.norm() < 1e-6 {
                continue;
            }
            let q = canon.state_to_pencil_vector(m.zeta, beta, &m.w).unwrap();
            prop_assert!(canon.pencil_residual(m.zeta, beta, &q) <= 1e-8);
            let w = canon.pencil_to_state_vector(m.zeta, beta, &q).unwrap();
            let res = (&a * &w - &w * m.zeta).norm() / (fro(&a).max(1.0) * w.norm());
            prop_assert!(res <= 1e-9);
            let overlap = w.dotc(&m.w).norm() / (w.norm() * m.w.norm());
            prop_assert!(overlap >= 1.0 - 1e-8);
        }
    }

    #[test]
    fn identity_suite_holds(seed in any::<u64>(), n in 1usize..5, n_r in 1usize..5, eta_pd in any::<bool>(), beta in prop_oneof![Just(0.0), Just(1.0), Just(10.0)]) {
        let sys = system_from(seed, n, n_r, eta_pd);
        let an = Analyzer::new(&sys).unwrap();
        let rep = identity_suite_with(&an, beta).unwrap();
        prop_assert!(rep.max_residual() <= 1e-7, "{:?}", rep);
    }

    #[test]
    fn dynamics_superposition_and_decay(seed in any::<u64>(), n in 1usize..4, beta in 0.0f64..3.0) {
        let sys = system_from(seed, n, n, true);
        let mut r = rng(seed ^ 11);
        let (a0, a1, b0, b1) = (random_complex(&mut r, n), random_complex(&mut r, n), random_complex(&mut r, n), random_complex(&mut r, n));
        let tol = 1e-11;
        let t1 = integrate(&sys, beta, &a0, &a1, 5.0, tol, 21).unwrap();
        let t2 = integrate(&sys, beta, &b0, &b1, 5.0, tol, 21).unwrap();
        let ts = integrate(&sys, beta, &(&a0 + &b0), &(&a1 + &b1), 5.0, tol, 21).unwrap();
        for k in 0..ts.len() {
            let diff = (&ts.q[k] - &t1.q[k] - &t2.q[k]).norm();
            prop_assert!(diff <= 1e-8 * (1.0 + ts.q[k].norm()));
        }
        prop_assert!(ts.max_energy_increase() <= 1e-9);
    }
}
