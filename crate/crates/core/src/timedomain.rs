//! Time integration of `alpha q'' + (2 theta + beta R) q' + eta q = 0`.
//!
//! Dormand–Prince 5(4) with its fourth-order continuous extension, run on
//! the complex first-order state `(q, q')`.

use nalgebra::DMatrix;

use crate::error::{Error, Result};
use crate::linalg::{to_complex, CMatrix, CVector, C64};
use crate::model::LagrangianSystem;

pub const TOL_RANGE: (f64, f64) = (1e-12, 1e-4);
pub const BETA_CAP: f64 = 1e6;
/// Above this the explicit scheme gets slow.
pub const BETA_STIFF: f64 = 1e4;
const MAX_STEPS: usize = 20_000_000;

#[derive(Debug, Clone)]
pub struct Trajectory {
    pub times: Vec<f64>,
    pub q: Vec<CVector>,
    pub qdot: Vec<CVector>,
    /// `H(t)`.
    pub energy: Vec<f64>,
    /// Dissipated power `2 R(t)`.
    pub dissipation: Vec<f64>,
    pub steps: usize,
    pub rejected: usize,
}

impl Trajectory {
    pub fn len(&self) -> usize {
        self.times.len()
    }

    pub fn is_empty(&self) -> bool {
        self.times.is_empty()
    }

    /// Largest `(H[k+1] - H[k]) / H[0]` over consecutive samples; positive means growth.
    pub fn max_energy_increase(&self) -> f64 {
        let scale = self.energy.first().copied().unwrap_or(0.0).max(f64::MIN_POSITIVE);
        self.energy
            .windows(2)
            .map(|w| (w[1] - w[0]) / scale)
            .fold(f64::NEG_INFINITY, f64::max)
    }

    /// `max |H(t) - H(0)| / H(0)`.
    pub fn energy_drift(&self) -> f64 {
        let h0 = self.energy.first().copied().unwrap_or(0.0).max(f64::MIN_POSITIVE);
        self.energy.iter().map(|h| (h - self.energy[0]).abs() / h0).fold(0.0, f64::max)
    }
}

/// Message for loss parameters where the explicit integrator becomes expensive.
pub fn stiffness_warning(beta: f64) -> Option<String> {
    (beta > BETA_STIFF).then(|| {
        format!("beta = {beta} makes the system stiff; the explicit integrator will take many small steps")
    })
}

// Dormand–Prince tableau.
const A21: f64 = 1.0 / 5.0;
const A31: f64 = 3.0 / 40.0;
const A32: f64 = 9.0 / 40.0;
const A41: f64 = 44.0 / 45.0;
const A42: f64 = -56.0 / 15.0;
const A43: f64 = 32.0 / 9.0;
const A51: f64 = 19372.0 / 6561.0;
const A52: f64 = -25360.0 / 2187.0;
const A53: f64 = 64448.0 / 6561.0;
const A54: f64 = -212.0 / 729.0;
const A61: f64 = 9017.0 / 3168.0;
const A62: f64 = -355.0 / 33.0;
const A63: f64 = 46732.0 / 5247.0;
const A64: f64 = 49.0 / 176.0;
const A65: f64 = -5103.0 / 18656.0;
const A71: f64 = 35.0 / 384.0;
const A73: f64 = 500.0 / 1113.0;
const A74: f64 = 125.0 / 192.0;
const A75: f64 = -2187.0 / 6784.0;
const A76: f64 = 11.0 / 84.0;
const E1: f64 = 71.0 / 57600.0;
const E3: f64 = -71.0 / 16695.0;
const E4: f64 = 71.0 / 1920.0;
const E5: f64 = -17253.0 / 339200.0;
const E6: f64 = 22.0 / 525.0;
const E7: f64 = -1.0 / 40.0;
const D1: f64 = -12715105075.0 / 11282082432.0;
const D3: f64 = 87487479700.0 / 32700410799.0;
const D4: f64 = -10690763975.0 / 1880347072.0;
const D5: f64 = 701980252875.0 / 199316789632.0;
const D6: f64 = -1453857185.0 / 822651844.0;
const D7: f64 = 69997945.0 / 29380423.0;

/// First-order generator `y' = M y` with `y = (q, q')`.
fn generator(sys: &LagrangianSystem, beta: f64) -> Result<CMatrix> {
    let n = sys.n();
    let alpha_inv = sys
        .alpha()
        .clone()
        .try_inverse()
        .ok_or_else(|| Error::InvalidArgument("alpha is singular".into()))?;
    let damping = sys.theta() * 2.0 + sys.r() * beta;
    let mut m = DMatrix::<f64>::zeros(2 * n, 2 * n);
    for i in 0..n {
        m[(i, n + i)] = 1.0;
    }
    m.view_mut((n, 0), (n, n)).copy_from(&(-&alpha_inv * sys.eta()));
    m.view_mut((n, n), (n, n)).copy_from(&(-&alpha_inv * damping));
    Ok(to_complex(&m))
}

fn err_norm(err: &CVector, y0: &CVector, y1: &CVector, tol: f64) -> f64 {
    let n = err.len().max(1) as f64;
    let s: f64 = err
        .iter()
        .zip(y0.iter().zip(y1.iter()))
        .map(|(e, (a, b))| {
            let sc = tol * (1.0 + a.norm().max(b.norm()));
            (e.norm() / sc).powi(2)
        })
        .sum();
    (s / n).sqrt()
}

/// Integrates from `t = 0` and reports the state at `times` (nondecreasing, `>= 0`).
pub fn integrate_at(
    sys: &LagrangianSystem,
    beta: f64,
    q0: &CVector,
    qdot0: &CVector,
    times: &[f64],
    tol: f64,
) -> Result<Trajectory> {
    let n = sys.n();
    if q0.len() != n || qdot0.len() != n {
        return Err(Error::DimensionMismatch(format!(
            "initial data has lengths ({}, {}), expected {n}",
            q0.len(),
            qdot0.len()
        )));
    }
    if !(tol >= TOL_RANGE.0 && tol <= TOL_RANGE.1) {
        return Err(Error::InvalidArgument(format!(
            "tol must lie in [{:e}, {:e}], got {tol}",
            TOL_RANGE.0, TOL_RANGE.1
        )));
    }
    if !(0.0..=BETA_CAP).contains(&beta) {
        return Err(Error::InvalidArgument(format!("beta must lie in [0, {BETA_CAP:e}], got {beta}")));
    }
    if times.is_empty() || times.iter().any(|t| !t.is_finite() || *t < 0.0) || times.windows(2).any(|w| w[1] < w[0]) {
        return Err(Error::InvalidArgument("sample times must be finite, nonnegative and nondecreasing".into()));
    }
    if q0.iter().chain(qdot0.iter()).any(|z| !z.re.is_finite() || !z.im.is_finite()) {
        return Err(Error::NonFinite);
    }

    let m = generator(sys, beta)?;
    let f = |y: &CVector| -> CVector { &m * y };
    let mut y = CVector::zeros(2 * n);
    y.rows_mut(0, n).copy_from(q0);
    y.rows_mut(n, n).copy_from(qdot0);

    let mut traj = Trajectory {
        times: Vec::with_capacity(times.len()),
        q: Vec::with_capacity(times.len()),
        qdot: Vec::with_capacity(times.len()),
        energy: Vec::with_capacity(times.len()),
        dissipation: Vec::with_capacity(times.len()),
        steps: 0,
        rejected: 0,
    };
    let record = |traj: &mut Trajectory, t: f64, y: &CVector| -> Result<()> {
        let q = y.rows(0, n).into_owned();
        let qd = y.rows(n, n).into_owned();
        traj.energy.push(sys.hamiltonian(&q, &qd)?);
        traj.dissipation.push(2.0 * sys.rayleigh_power(&qd, beta)?);
        traj.times.push(t);
        traj.q.push(q);
        traj.qdot.push(qd);
        Ok(())
    };

    let t_end = *times.last().unwrap();
    let mut next = 0;
    while next < times.len() && times[next] <= 0.0 {
        record(&mut traj, times[next], &y)?;
        next += 1;
    }
    if next == times.len() {
        return Ok(traj);
    }

    let mut t = 0.0;
    let mut k1 = f(&y);
    let mut h = (0.1 * tol.powf(0.2) / m.norm().max(1e-300)).clamp(1e-12 * t_end, t_end);
    let mut rejected_in_row = 0usize;

    while next < times.len() {
        if traj.steps + traj.rejected > MAX_STEPS {
            return Err(Error::StepFailure { t });
        }
        let h_min = 16.0 * f64::EPSILON * t.abs().max(1.0);
        if h < h_min {
            return Err(Error::StepFailure { t });
        }
        let h_use = h.min(t_end - t);
        let hc = C64::from(h_use);
        let k2 = f(&(&y + &k1 * (hc * A21)));
        let k3 = f(&(&y + &k1 * (hc * A31) + &k2 * (hc * A32)));
        let k4 = f(&(&y + &k1 * (hc * A41) + &k2 * (hc * A42) + &k3 * (hc * A43)));
        let k5 = f(&(&y + &k1 * (hc * A51) + &k2 * (hc * A52) + &k3 * (hc * A53) + &k4 * (hc * A54)));
        let k6 = f(&(&y + &k1 * (hc * A61) + &k2 * (hc * A62) + &k3 * (hc * A63) + &k4 * (hc * A64) + &k5 * (hc * A65)));
        let y_new = &y + &k1 * (hc * A71) + &k3 * (hc * A73) + &k4 * (hc * A74) + &k5 * (hc * A75) + &k6 * (hc * A76);
        let k7 = f(&y_new);
        let err = (&k1 * C64::from(E1) + &k3 * C64::from(E3) + &k4 * C64::from(E4) + &k5 * C64::from(E5) + &k6 * C64::from(E6) + &k7 * C64::from(E7)) * hc;
        let e = err_norm(&err, &y, &y_new, tol);
        if !e.is_finite() {
            traj.rejected += 1;
            h *= 0.1;
            continue;
        }
        if e <= 1.0 {
            let t_new = if h_use == t_end - t { t_end } else { t + h_use };
            // continuous extension
            let ydiff = &y_new - &y;
            let bspl = &k1 * hc - &ydiff;
            let r4 = &ydiff - &k7 * hc - &bspl;
            let r5 = (&k1 * C64::from(D1) + &k3 * C64::from(D3) + &k4 * C64::from(D4) + &k5 * C64::from(D5) + &k6 * C64::from(D6) + &k7 * C64::from(D7)) * hc;
            while next < times.len() && times[next] <= t_new {
                let s = ((times[next] - t) / h_use).clamp(0.0, 1.0);
                let s1 = 1.0 - s;
                let ys = if times[next] == t_new {
                    y_new.clone()
                } else {
                    &y + (&ydiff + (&bspl + (&r4 + &r5 * C64::from(s1)) * C64::from(s)) * C64::from(s1)) * C64::from(s)
                };
                record(&mut traj, times[next], &ys)?;
                next += 1;
            }
            t = t_new;
            y = y_new;
            k1 = k7;
            traj.steps += 1;
            let fac = if e == 0.0 { 5.0 } else { (0.9 * e.powf(-0.2)).clamp(0.2, 5.0) };
            h = if rejected_in_row > 0 { h_use * fac.min(1.0) } else { h_use * fac };
            rejected_in_row = 0;
        } else {
            traj.rejected += 1;
            rejected_in_row += 1;
            h = h_use * (0.9 * e.powf(-0.2)).clamp(0.1, 1.0);
        }
    }
    Ok(traj)
}

/// `samples` evenly spaced times on `[0, t_end]`, endpoints included.
pub fn sample_times(t_end: f64, samples: usize) -> Vec<f64> {
    match samples {
        0 => Vec::new(),
        1 => vec![t_end],
        _ => (0..samples)
            .map(|k| if k + 1 == samples { t_end } else { t_end * k as f64 / (samples - 1) as f64 })
            .collect(),
    }
}

/// Integrates on `[0, t_end]` with `samples` evenly spaced outputs.
pub fn integrate(
    sys: &LagrangianSystem,
    beta: f64,
    q0: &CVector,
    qdot0: &CVector,
    t_end: f64,
    tol: f64,
    samples: usize,
) -> Result<Trajectory> {
    if !(t_end > 0.0 && t_end.is_finite()) {
        return Err(Error::InvalidArgument(format!("t_end must be positive, got {t_end}")));
    }
    if samples < 2 {
        return Err(Error::InvalidArgument("at least two samples are required".into()));
    }
    integrate_at(sys, beta, q0, qdot0, &sample_times(t_end, samples), tol)
}

/// Integrates several initial conditions on separate threads.
pub fn integrate_many(
    sys: &LagrangianSystem,
    beta: f64,
    initial: &[(CVector, CVector)],
    t_end: f64,
    tol: f64,
    samples: usize,
) -> Vec<Result<Trajectory>> {
    std::thread::scope(|scope| {
        let handles: Vec<_> = initial
            .iter()
            .map(|(q0, qd0)| scope.spawn(move || integrate(sys, beta, q0, qd0, t_end, tol, samples)))
            .collect();
        handles
            .into_iter()
            .map(|h| h.join().unwrap_or(Err(Error::StepFailure { t: f64::NAN })))
            .collect()
    })
}

/// `max |dH/dt + 2R| / max(1, |2R|)` over interior samples, with `dH/dt` by three-point differences (centered on uniform grids).
pub fn energy_balance_residual(traj: &Trajectory, sys: &LagrangianSystem, beta: f64) -> Result<f64> {
    if traj.len() < 3 {
        return Err(Error::TooFewSamples);
    }
    let mut worst = 0.0f64;
    for k in 1..traj.len() - 1 {
        let h1 = traj.times[k] - traj.times[k - 1];
        let h2 = traj.times[k + 1] - traj.times[k];
        if !(h1 > 0.0 && h2 > 0.0) {
            return Err(Error::InvalidArgument("sample times must be strictly increasing".into()));
        }
        // three-point stencil, second order on uneven grids
        let (e0, e1, e2) = (traj.energy[k - 1], traj.energy[k], traj.energy[k + 1]);
        let dh = if h1 == h2 {
            (e2 - e0) / (h1 + h2)
        } else {
            (-h2 / (h1 * (h1 + h2))) * e0 + ((h2 - h1) / (h1 * h2)) * e1 + (h1 / (h2 * (h1 + h2))) * e2
        };
        let p = 2.0 * sys.rayleigh_power(&traj.qdot[k], beta)?;
        worst = worst.max((dh + p).abs() / p.abs().max(1.0));
    }
    Ok(worst)
}
