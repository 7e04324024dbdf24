mod common;

use common::*;
use gyro_core::linalg::{c64, CVector, C64};
use gyro_core::timedomain::{energy_balance_residual, integrate, integrate_at, integrate_many, sample_times};
use gyro_core::{classify, spectrum, ModeClass};
use rand::Rng;

fn real(v: &[f64]) -> CVector {
    CVector::from_iterator(v.len(), v.iter().map(|&x| c64(x, 0.0)))
}

fn random_real(r: &mut rand::rngs::StdRng, n: usize) -> CVector {
    CVector::from_fn(n, |_, _| c64(r.random_range(-1.0..1.0), 0.0))
}

#[test]
fn conservative_circuit_keeps_energy() {
    let sys = circuit();
    let mut r = rng(21);
    for _ in 0..3 {
        let tr = integrate(&sys, 0.0, &random_real(&mut r, 2), &random_real(&mut r, 2), 100.0, 1e-11, 2001).unwrap();
        assert!(tr.energy_drift() <= 1e-8, "drift {:e}", tr.energy_drift());
        assert!(tr.dissipation.iter().all(|&p| p == 0.0));
    }
}

#[test]
fn spring_mass_damper_two_exponentials() {
    let sys = smd(1.0, 1.0, 1.0);
    let s5 = 5f64.sqrt();
    let (r1, r2) = ((3.0 - s5) / 2.0, (3.0 + s5) / 2.0);
    let (c1, c2) = (r2 / (r2 - r1), -r1 / (r2 - r1));
    let tr = integrate(&sys, 3.0, &real(&[1.0]), &real(&[0.0]), 20.0, 1e-11, 401).unwrap();
    for (t, q) in tr.times.iter().zip(&tr.q) {
        let exact = c1 * (-r1 * t).exp() + c2 * (-r2 * t).exp();
        assert!((q[0].re - exact).abs() <= 1e-7, "t={t}");
        assert!(q[0].im == 0.0);
    }
}

#[test]
fn eigenmode_follows_its_frequency() {
    let sys = circuit();
    let beta = 10.0;
    let mut modes = spectrum(&sys, beta).unwrap();
    classify(&sys, beta, &mut modes).unwrap();
    let an = gyro_core::Analyzer::new(&sys).unwrap();
    let canon = an.canonical();
    for m in modes.iter().filter(|m| m.klass == ModeClass::LowLossHighQ) {
        let zeta: C64 = m.zeta;
        let mut q = canon.state_to_pencil_vector(zeta, beta, &m.w).unwrap();
        q /= c64(q.norm(), 0.0);
        let qdot = &q * (c64(0.0, -1.0) * zeta);
        let t_end = 5.0 / m.damping;
        let tr = integrate(&sys, beta, &q, &qdot, t_end, 1e-11, 201).unwrap();
        for (t, got) in tr.times.iter().zip(&tr.q) {
            let want = &q * (c64(0.0, -1.0) * zeta * *t).exp();
            let err = (got - want).norm();
            assert!(err <= 1e-6, "t={t}: {err:e}");
        }
    }
}

#[test]
fn energy_balance_by_centered_differences() {
    let sys = circuit();
    let mut r = rng(22);
    let times = sample_times(20.0, 20001);
    let tr = integrate_at(&sys, 1.0, &random_real(&mut r, 2), &random_real(&mut r, 2), &times, 1e-11).unwrap();
    let res = energy_balance_residual(&tr, &sys, 1.0).unwrap();
    assert!(res <= 1e-4, "{res:e}");
    assert!(tr.max_energy_increase() <= 1e-10);
}

#[test]
fn overdamped_mode_loses_energy_monotonically() {
    let sys = circuit();
    let beta = 10.0;
    let mut modes = spectrum(&sys, beta).unwrap();
    classify(&sys, beta, &mut modes).unwrap();
    let an = gyro_core::Analyzer::new(&sys).unwrap();
    let m = modes.iter().find(|m| m.klass == ModeClass::LowLossLowQ).unwrap();
    assert_eq!(m.zeta.re, 0.0);
    let q = an.canonical().state_to_pencil_vector(m.zeta, beta, &m.w).unwrap();
    let qdot = &q * (c64(0.0, -1.0) * m.zeta);
    let tr = integrate(&sys, beta, &q, &qdot, 50.0, 1e-10, 501).unwrap();
    for w in tr.energy.windows(2) {
        assert!(w[1] <= w[0] * (1.0 + 1e-12));
    }
}

#[test]
fn long_time_decay_matches_slowest_mode() {
    let sys = circuit();
    let beta = 1.0;
    let slowest = spectrum(&sys, beta).unwrap().iter().map(|m| m.damping).fold(f64::INFINITY, f64::min);
    let t1 = 400.0;
    let t2 = t1 + 10f64.ln() / slowest;
    let tr = integrate_at(&sys, beta, &real(&[1.0, 0.5]), &real(&[0.0, 0.0]), &[0.0, t1, t2], 1e-11).unwrap();
    let norm = |k: usize| (tr.q[k].norm_squared() + tr.qdot[k].norm_squared()).sqrt();
    let rate = (norm(1) / norm(2)).ln() / (t2 - t1);
    assert!((rate - slowest).abs() <= 0.05 * slowest, "rate {rate} vs {slowest}");
}

#[test]
fn concurrent_batch_equals_serial() {
    let sys = circuit();
    let mut r = rng(23);
    let init: Vec<(CVector, CVector)> = (0..4).map(|_| (random_real(&mut r, 2), random_real(&mut r, 2))).collect();
    let batch = integrate_many(&sys, 1.0, &init, 10.0, 1e-10, 11);
    for ((q0, qd0), b) in init.iter().zip(batch) {
        let serial = integrate(&sys, 1.0, q0, qd0, 10.0, 1e-10, 11).unwrap();
        assert_eq!(serial.q, b.unwrap().q);
    }
}
