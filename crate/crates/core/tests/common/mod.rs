#![allow(dead_code)]

use gyro_core::linalg::{c64, matched_distance, RMatrix, C64};
use gyro_core::LagrangianSystem;
use rand::rngs::StdRng;
use rand::{Rng, SeedableRng};

pub fn rng(seed: u64) -> StdRng {
    StdRng::seed_from_u64(seed)
}

pub fn m(n: usize, v: &[f64]) -> RMatrix {
    RMatrix::from_row_slice(n, n, v)
}

pub fn circuit() -> LagrangianSystem {
    LagrangianSystem::new(
        m(2, &[10.0, 0.0, 0.0, 0.5]),
        m(2, &[0.16, -0.12, -0.12, 0.16]),
        m(2, &[0.0, -1.25, 1.25, 0.0]),
        m(2, &[0.0, 0.0, 0.0, 10.0]),
    )
    .unwrap()
}

pub fn smd(mass: f64, k: f64, r: f64) -> LagrangianSystem {
    LagrangianSystem::new(m(1, &[mass]), m(1, &[k]), m(1, &[0.0]), m(1, &[r])).unwrap()
}

fn gaussianish(rng: &mut StdRng, rows: usize, cols: usize) -> RMatrix {
    RMatrix::from_fn(rows, cols, |_, _| rng.random_range(-1.0..1.0))
}

/// Random orthogonal matrix from QR of a random matrix.
pub fn orthogonal(rng: &mut StdRng, n: usize) -> RMatrix {
    gaussianish(rng, n, n).qr().q()
}

pub fn spd(rng: &mut StdRng, n: usize) -> RMatrix {
    let g = gaussianish(rng, n, n);
    &g * g.transpose() + RMatrix::identity(n, n) * rng.random_range(0.2..1.5)
}

/// PSD with the given rank.
pub fn psd_rank(rng: &mut StdRng, n: usize, rank: usize) -> RMatrix {
    let q = orthogonal(rng, n);
    let mut d = RMatrix::zeros(n, n);
    for i in 0..rank {
        d[(i, i)] = rng.random_range(0.3..3.0);
    }
    &q * d * q.transpose()
}

pub fn skew(rng: &mut StdRng, n: usize, scale: f64) -> RMatrix {
    let g = gaussianish(rng, n, n) * scale;
    &g - g.transpose()
}

/// Random valid system with `n_r = rank R`; `eta_pd` chooses between
/// positive definite and rank-deficient `eta`.
pub fn random_system(rng: &mut StdRng, n: usize, n_r: usize, eta_pd: bool) -> LagrangianSystem {
    let alpha = spd(rng, n);
    let eta = if eta_pd { spd(rng, n) } else { psd_rank(rng, n, n.saturating_sub(1).max(1).min(n)) };
    let theta = skew(rng, n, 0.7);
    let r = psd_rank(rng, n, n_r);
    LagrangianSystem::new(alpha, eta, theta, r).unwrap()
}

/// `zeta = i lambda` for eigenvalues `lambda` of the real first-order
/// generator of `(q, q')`.
pub fn companion_spectrum(sys: &LagrangianSystem, beta: f64) -> Vec<C64> {
    let n = sys.n();
    let ainv = sys.alpha().clone().try_inverse().unwrap();
    let mut g = RMatrix::zeros(2 * n, 2 * n);
    g.view_mut((0, n), (n, n)).copy_from(&RMatrix::identity(n, n));
    g.view_mut((n, 0), (n, n)).copy_from(&(-&ainv * sys.eta()));
    g.view_mut((n, n), (n, n)).copy_from(&(-&ainv * (sys.theta() * 2.0 + sys.r() * beta)));
    g.complex_eigenvalues().iter().map(|l| c64(0.0, 1.0) * l).collect()
}

pub fn rel_matched(a: &[C64], b: &[C64]) -> f64 {
    matched_distance(a, b, |x, y| (x - y).norm() / x.norm().max(y.norm()).max(1.0))
}
