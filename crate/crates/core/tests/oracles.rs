mod common;

use common::*;
use gyro_core::asymptotics::expansion_coefficients;
use gyro_core::linalg::{c64, RMatrix, C64};
use gyro_core::spectral::limiting_frequencies;
use gyro_core::{characteristic_scalars, classify, overdamping_thresholds, spectrum, LagrangianSystem, ModeClass};
use rand::Rng;

fn zetas(sys: &LagrangianSystem, beta: f64) -> Vec<C64> {
    spectrum(sys, beta).unwrap().iter().map(|m| m.zeta).collect()
}

/// `alpha = eta = R = 1` with `i theta` having eigenvalues `lambdas`.
fn gyro_oscillator(rng: &mut rand::rngs::StdRng, lambdas: &[f64]) -> LagrangianSystem {
    let n = lambdas.len();
    let mut blocks = RMatrix::zeros(n, n);
    let mut k = 0;
    while k + 1 < n {
        // eigenvalues of i [[0, -l], [l, 0]] are +l and -l
        blocks[(k, k + 1)] = -lambdas[k];
        blocks[(k + 1, k)] = lambdas[k];
        k += 2;
    }
    let q = orthogonal(rng, n);
    let theta = &q * blocks * q.transpose();
    let theta = (&theta - theta.transpose()) * 0.5;
    let id = RMatrix::identity(n, n);
    LagrangianSystem::new(id.clone(), id.clone(), theta, id).unwrap()
}

fn oscillator_closed_form(lambdas: &[f64], beta: f64) -> Vec<C64> {
    let mut out = Vec::new();
    for &l in lambdas {
        let s = c64(2.0 * l, beta) / 2.0;
        let root = (s * s + 1.0).sqrt();
        out.push(-s + root);
        out.push(-s - root);
    }
    out
}

#[test]
fn oscillator_matches_closed_form() {
    let mut r = rng(11);
    for trial in 0..30 {
        let n = 1 + trial % 3;
        let l = r.random_range(1..6) as f64;
        let lambdas: Vec<f64> = match n {
            1 => vec![0.0],
            2 => vec![l, -l],
            _ => vec![l, -l, 0.0],
        };
        let sys = gyro_oscillator(&mut r, &lambdas);
        for beta in [0.5, 1.0, 2.0, 5.0, 50.0] {
            let got = zetas(&sys, beta);
            let want = oscillator_closed_form(&lambdas, beta);
            let err = rel_matched(&got, &want);
            assert!(err < 1e-9, "n={n} lambda={l} beta={beta} err={err:e}");
        }
    }
}

#[test]
fn oscillator_high_loss_limit_is_not_overdamped() {
    let mut r = rng(12);
    for l in [1.0, 2.0, 3.0] {
        let sys = gyro_oscillator(&mut r, &[l, -l]);
        let beta = 1e3;
        let modes = spectrum(&sys, beta).unwrap();
        for lam in [l, -l] {
            // zeta_- ~ -(2 lambda + i beta)
            let target = c64(-2.0 * lam, -beta);
            let m = modes
                .iter()
                .min_by(|a, b| (a.zeta - target).norm().total_cmp(&(b.zeta - target).norm()))
                .unwrap();
            assert!((m.zeta.re + 2.0 * lam).abs() < 1e-5, "lambda={lam}: {}", m.zeta);
        }
        // zeta_+ ~ 1 / (2 lambda + i beta) keeps a small nonzero real part
        for m in &modes {
            assert!(m.zeta.re.abs() > 1e-9 * m.zeta.norm().max(1.0), "underdamped: {}", m.zeta);
        }
        let rep = overdamping_thresholds(&sys).unwrap();
        assert!(!rep.generic);
        assert!(rep.beta0.is_none());
    }
}

#[test]
fn oscillator_scalar_values() {
    let sys = smd(1.0, 1.0, 1.0);
    let got = zetas(&sys, 3.0);
    let s5 = 5f64.sqrt();
    let want = [c64(0.0, -(3.0 + s5) / 2.0), c64(0.0, -(3.0 - s5) / 2.0)];
    assert!(rel_matched(&got, &want) < 1e-12);
    assert!(got.iter().all(|z| z.re == 0.0));
}

#[test]
fn spring_mass_damper_closed_form() {
    let mut r = rng(13);
    for _ in 0..20 {
        let (mass, k, rr) = (r.random_range(0.2..5.0), r.random_range(0.2..5.0), r.random_range(0.2..5.0));
        let sys = smd(mass, k, rr);
        for beta in [0.5, 1.0, 2.0, 5.0, 50.0] {
            let g = beta * rr / (2.0 * mass);
            let root = c64(k / mass - g * g, 0.0).sqrt();
            let want = [c64(0.0, -g) - root, c64(0.0, -g) + root];
            let got = zetas(&sys, beta);
            assert!(rel_matched(&got, &want) < 1e-9, "m={mass} k={k} R={rr} beta={beta}");
            let crit = 2.0 * (mass * k).sqrt() / rr;
            if beta > crit * 1.001 {
                assert!(got.iter().all(|z| z.re.abs() < 1e-12));
            }
        }
    }
}

#[test]
fn random_systems_match_companion_spectrum() {
    let mut r = rng(14);
    for trial in 0..60 {
        let n = 1 + trial % 5;
        let n_r = r.random_range(1..=n);
        let sys = random_system(&mut r, n, n_r, trial % 2 == 0);
        // the companion form is defective at zeta = 0 when eta is singular
        let tol = if trial % 2 == 0 { 1e-9 } else { 1e-6 };
        for beta in [0.0, 0.7, 10.0] {
            let err = rel_matched(&zetas(&sys, beta), &companion_spectrum(&sys, beta));
            assert!(err < tol, "trial {trial} beta {beta}: {err:e}");
        }
    }
}

#[test]
fn circuit_reference_numbers() {
    let sys = circuit();
    let rep = overdamping_thresholds(&sys).unwrap();
    let rel = |a: f64, b: f64| (a - b).abs() / b.abs();
    assert!(rel(rep.beta0.unwrap(), 0.1258803552) < 1e-8);
    assert!(rel(rep.beta1.unwrap(), 0.3723591130) < 1e-8);
    assert!(rel(rep.beta2.unwrap(), 2.631331413) < 1e-8);

    let sc = characteristic_scalars(&sys).unwrap();
    assert!(rel(sc.b_min, 20.0) < 1e-12);
    assert!(rel(sc.b_min_dual.unwrap(), 1000.0 / 7.0) < 1e-12);

    let lf = limiting_frequencies(&sys).unwrap();
    assert!(rel(lf.rho_max, 0.016f64.sqrt()) < 1e-12);

    let model = expansion_coefficients(&sys).unwrap();
    assert!(rel(model.b_coeffs[0], 20.0) < 1e-10);
    assert!(rel(model.dual_slopes.as_ref().unwrap()[0], 0.007) < 1e-10);
    let mut d = model.d_coeffs.clone();
    d.sort_by(f64::total_cmp);
    assert!(rel(d[0], 0.007) < 1e-10);
    assert!(rel(d[1], 0.03575) < 1e-10);
    assert!(rel(d[2], 0.03575) < 1e-10);
}

#[test]
fn circuit_static_frequencies() {
    let got = zetas(&circuit(), 0.0);
    assert!(got.iter().all(|z| z.im.abs() < 1e-14));
    let mut w: Vec<f64> = got.iter().map(|z| z.re.abs()).collect();
    w.sort_by(f64::total_cmp);
    // omega_max = beta_0 b_min / 2
    assert!((w[3] - 0.1258803552 * 10.0).abs() < 1e-9);
    // omega_min omega_max = sqrt(det eta / det alpha)
    assert!((w[0] * w[3] - (0.0112f64 / 5.0).sqrt()).abs() < 1e-12);
    assert!((w[0] - 0.0376024).abs() < 1e-5);
}

#[test]
fn circuit_classes_at_ten() {
    let sys = circuit();
    let mut modes = spectrum(&sys, 10.0).unwrap();
    classify(&sys, 10.0, &mut modes).unwrap();
    let count = |k: ModeClass| modes.iter().filter(|m| m.klass == k).count();
    assert_eq!(count(ModeClass::HighLoss), 1);
    assert_eq!(count(ModeClass::LowLossLowQ), 1);
    assert_eq!(count(ModeClass::LowLossHighQ), 2);
}

#[test]
fn complete_overdamping_without_gyration() {
    let mut r = rng(15);
    for trial in 0..25 {
        let n = 1 + trial % 4;
        let alpha = spd(&mut r, n);
        let eta = spd(&mut r, n);
        let rr = spd(&mut r, n);
        let sys = LagrangianSystem::new(alpha, eta, RMatrix::zeros(n, n), rr).unwrap();
        let sc = characteristic_scalars(&sys).unwrap();
        let beta = 2.01 * sc.omega_max / sc.b_min;
        for z in zetas(&sys, beta) {
            assert!(z.re.abs() < 1e-9, "trial {trial}: {z}");
        }
    }
}
