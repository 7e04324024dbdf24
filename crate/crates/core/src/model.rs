//! Gyroscopic-dissipative Lagrangian systems
//! `alpha q'' + (2 theta + beta R) q' + eta q = 0`.

use serde::Serialize;

use crate::error::{Error, Result};
use crate::linalg::{c64, eig_symmetric, real_kernel_basis, to_complex, CMatrix, CVector, RMatrix, C64};
use crate::tolerance::Tolerances;

/// The quadruple `(alpha, eta, theta, R)`. Immutable once validated.
#[derive(Debug, Clone, PartialEq)]
pub struct LagrangianSystem {
    alpha: RMatrix,
    eta: RMatrix,
    theta: RMatrix,
    r: RMatrix,
    conservative: bool,
    tol: Tolerances,
    n_r: usize,
    duality_ok: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ValidationReport {
    pub n: usize,
    pub n_r: usize,
    pub alpha_symmetry_residual: f64,
    pub eta_symmetry_residual: f64,
    pub theta_skew_residual: f64,
    pub r_symmetry_residual: f64,
    pub alpha_min_eig: f64,
    pub eta_min_eig: f64,
    pub r_min_eig: f64,
    pub duality_ok: bool,
    /// `(N_R, N)`.
    pub loss_fraction: (usize, usize),
    pub conservative: bool,
}

impl ValidationReport {
    pub fn loss_fraction_value(&self) -> f64 {
        self.loss_fraction.0 as f64 / self.loss_fraction.1 as f64
    }
}

fn rel_residual(a: &RMatrix, b: &RMatrix) -> f64 {
    let norm = a.norm();
    if norm == 0.0 {
        0.0
    } else {
        b.norm() / norm
    }
}

fn check_shapes(alpha: &RMatrix, eta: &RMatrix, theta: &RMatrix, r: &RMatrix) -> Result<usize> {
    let n = alpha.nrows();
    for (name, m) in [("alpha", alpha), ("eta", eta), ("theta", theta), ("R", r)] {
        if m.nrows() != n || m.ncols() != n {
            return Err(Error::DimensionMismatch(format!(
                "{name} is {}x{}, expected {n}x{n}",
                m.nrows(),
                m.ncols()
            )));
        }
        if m.iter().any(|x| !x.is_finite()) {
            return Err(Error::NonFinite);
        }
    }
    if n == 0 {
        return Err(Error::DimensionMismatch("system has no degrees of freedom".into()));
    }
    Ok(n)
}

fn validate_parts(
    alpha: &RMatrix,
    eta: &RMatrix,
    theta: &RMatrix,
    r: &RMatrix,
    conservative: bool,
    tol: &Tolerances,
) -> Result<ValidationReport> {
    let n = check_shapes(alpha, eta, theta, r)?;
    let alpha_sym = rel_residual(alpha, &(alpha - alpha.transpose()));
    let eta_sym = rel_residual(eta, &(eta - eta.transpose()));
    let r_sym = rel_residual(r, &(r - r.transpose()));
    let theta_skew = rel_residual(theta, &(theta + theta.transpose()));
    if theta_skew > tol.herm {
        return Err(Error::ThetaNotSkew { residual: theta_skew });
    }

    let (a_vals, _) = eig_symmetric(alpha, tol.herm)?;
    let a_max = a_vals.iter().fold(0.0f64, |m, x| m.max(x.abs()));
    let alpha_min = a_vals[0];
    if alpha_min.is_nan() || alpha_min <= tol.rank * a_max {
        return Err(Error::AlphaNotPositiveDefinite { min_eig: alpha_min });
    }

    let (e_vals, _) = eig_symmetric(eta, tol.herm)?;
    let e_max = e_vals.iter().fold(0.0f64, |m, x| m.max(x.abs()));
    let eta_min = e_vals[0];
    if eta_min < -tol.rank * e_max {
        return Err(Error::EtaNotPsd { min_eig: eta_min });
    }

    let (r_vals, _) = eig_symmetric(r, tol.herm)?;
    let r_max = r_vals.iter().fold(0.0f64, |m, x| m.max(x.abs()));
    let r_min = r_vals[0];
    if r_min < -tol.rank * r_max {
        return Err(Error::RNotPsd { min_eig: r_min });
    }
    let n_r = r_vals.iter().filter(|&&x| x > tol.rank * r_max).count();
    if n_r == 0 && !conservative {
        return Err(Error::RZero);
    }

    Ok(ValidationReport {
        n,
        n_r,
        alpha_symmetry_residual: alpha_sym,
        eta_symmetry_residual: eta_sym,
        theta_skew_residual: theta_skew,
        r_symmetry_residual: r_sym,
        alpha_min_eig: alpha_min,
        eta_min_eig: eta_min,
        r_min_eig: r_min,
        duality_ok: e_max > 0.0 && eta_min > tol.rank * e_max,
        loss_fraction: (n_r, n),
        conservative,
    })
}

impl LagrangianSystem {
    /// Builds and validates a dissipative system with default tolerances.
    pub fn new(alpha: RMatrix, eta: RMatrix, theta: RMatrix, r: RMatrix) -> Result<Self> {
        Self::with_tolerances(alpha, eta, theta, r, Tolerances::default())
    }

    pub fn with_tolerances(
        alpha: RMatrix,
        eta: RMatrix,
        theta: RMatrix,
        r: RMatrix,
        tol: Tolerances,
    ) -> Result<Self> {
        Self::build(alpha, eta, theta, r, false, tol)
    }

    /// A lossless system (`R = 0` allowed).
    pub fn conservative(alpha: RMatrix, eta: RMatrix, theta: RMatrix, tol: Tolerances) -> Result<Self> {
        let n = alpha.nrows();
        Self::build(alpha, eta, theta, RMatrix::zeros(n, n), true, tol)
    }

    fn build(
        alpha: RMatrix,
        eta: RMatrix,
        theta: RMatrix,
        r: RMatrix,
        conservative: bool,
        tol: Tolerances,
    ) -> Result<Self> {
        let report = validate_parts(&alpha, &eta, &theta, &r, conservative, &tol)?;
        Ok(LagrangianSystem {
            alpha,
            eta,
            theta,
            r,
            conservative,
            tol,
            n_r: report.n_r,
            duality_ok: report.duality_ok,
        })
    }

    pub fn n(&self) -> usize {
        self.alpha.nrows()
    }
    pub fn n_r(&self) -> usize {
        self.n_r
    }
    pub fn alpha(&self) -> &RMatrix {
        &self.alpha
    }
    pub fn eta(&self) -> &RMatrix {
        &self.eta
    }
    pub fn theta(&self) -> &RMatrix {
        &self.theta
    }
    pub fn r(&self) -> &RMatrix {
        &self.r
    }
    pub fn is_conservative(&self) -> bool {
        self.conservative
    }
    pub fn duality_ok(&self) -> bool {
        self.duality_ok
    }
    pub fn tolerances(&self) -> &Tolerances {
        &self.tol
    }

    /// Same system with different tolerances (revalidated).
    pub fn retolerance(&self, tol: Tolerances) -> Result<Self> {
        Self::build(
            self.alpha.clone(),
            self.eta.clone(),
            self.theta.clone(),
            self.r.clone(),
            self.conservative,
            tol,
        )
    }

    /// The system with `alpha` and `eta` interchanged.
    pub fn dual(&self) -> Result<Self> {
        if !self.duality_ok {
            return Err(Error::DualityUnavailable);
        }
        Ok(LagrangianSystem {
            alpha: self.eta.clone(),
            eta: self.alpha.clone(),
            theta: self.theta.clone(),
            r: self.r.clone(),
            conservative: self.conservative,
            tol: self.tol,
            n_r: self.n_r,
            duality_ok: true,
        })
    }

    /// `C(zeta, beta) = zeta^2 alpha + (2 theta + beta R) i zeta - eta`.
    pub fn pencil(&self, zeta: C64, beta: f64) -> CMatrix {
        let iz = c64(0.0, 1.0) * zeta;
        let damping = &self.theta * 2.0 + &self.r * beta;
        to_complex(&self.alpha) * (zeta * zeta) + to_complex(&damping) * iz - to_complex(&self.eta)
    }

    fn check_len(&self, v: &CVector, what: &str) -> Result<()> {
        if v.len() != self.n() {
            return Err(Error::DimensionMismatch(format!(
                "{what} has length {}, expected {}",
                v.len(),
                self.n()
            )));
        }
        Ok(())
    }

    /// `H = (q', alpha q')/2 + (q, eta q)/2`.
    pub fn hamiltonian(&self, q: &CVector, qdot: &CVector) -> Result<f64> {
        self.check_len(q, "q")?;
        self.check_len(qdot, "qdot")?;
        let kinetic = qdot.dotc(&(to_complex(&self.alpha) * qdot)).re;
        let potential = q.dotc(&(to_complex(&self.eta) * q)).re;
        Ok((0.5 * (kinetic + potential)).max(0.0))
    }

    /// Rayleigh function `beta (q', R q')/2`; the dissipated power is twice this.
    pub fn rayleigh_power(&self, qdot: &CVector, beta: f64) -> Result<f64> {
        self.check_len(qdot, "qdot")?;
        if beta.is_nan() || beta < 0.0 {
            return Err(Error::InvalidArgument(format!("beta must be nonnegative, got {beta}")));
        }
        let form = qdot.dotc(&(to_complex(&self.r) * qdot)).re;
        Ok((0.5 * beta * form).max(0.0))
    }

    /// Real orthonormal basis of `Ker R` as columns.
    pub fn ker_r_basis(&self) -> Result<RMatrix> {
        real_kernel_basis(&self.r, self.tol.rank)
    }

    /// The lossless system obtained by restricting `alpha`, `eta`, `theta`
    /// to `Ker R`.
    pub fn kernel_reduced_system(&self) -> Result<Self> {
        if self.n_r == self.n() {
            return Err(Error::FullRankDissipation);
        }
        let v = self.ker_r_basis()?;
        let vt = v.transpose();
        let sym = |m: &RMatrix| {
            let x = &vt * m * &v;
            (&x + x.transpose()) * 0.5
        };
        let skew = |m: &RMatrix| {
            let x = &vt * m * &v;
            (&x - x.transpose()) * 0.5
        };
        Self::conservative(sym(&self.alpha), sym(&self.eta), skew(&self.theta), self.tol)
    }
}

/// Re-validates a system and reports all residuals.
pub fn validate(sys: &LagrangianSystem) -> Result<ValidationReport> {
    validate_parts(&sys.alpha, &sys.eta, &sys.theta, &sys.r, sys.conservative, &sys.tol)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn m(n: usize, v: &[f64]) -> RMatrix {
        RMatrix::from_row_slice(n, n, v)
    }

    fn circuit() -> LagrangianSystem {
        LagrangianSystem::new(
            m(2, &[10.0, 0.0, 0.0, 0.5]),
            m(2, &[0.16, -0.12, -0.12, 0.16]),
            m(2, &[0.0, -1.25, 1.25, 0.0]),
            m(2, &[0.0, 0.0, 0.0, 10.0]),
        )
        .unwrap()
    }

    fn scalar(a: f64, e: f64, r: f64) -> Result<LagrangianSystem> {
        LagrangianSystem::new(m(1, &[a]), m(1, &[e]), m(1, &[0.0]), m(1, &[r]))
    }

    #[test]
    fn validate_circuit() {
        let rep = validate(&circuit()).unwrap();
        assert!(rep.duality_ok);
        assert_eq!(rep.loss_fraction, (1, 2));
        assert_eq!(rep.loss_fraction_value(), 0.5);
    }

    #[test]
    fn validate_errors() {
        assert!(matches!(scalar(-1.0, 1.0, 1.0), Err(Error::AlphaNotPositiveDefinite { .. })));
        assert!(matches!(scalar(1.0, -1.0, 1.0), Err(Error::EtaNotPsd { .. })));
        assert!(matches!(scalar(1.0, 1.0, -1.0), Err(Error::RNotPsd { .. })));
        assert!(matches!(scalar(1.0, 1.0, 0.0), Err(Error::RZero)));
        let bad_theta = LagrangianSystem::new(m(1, &[1.0]), m(1, &[1.0]), m(1, &[1.0]), m(1, &[1.0]));
        assert!(matches!(bad_theta, Err(Error::ThetaNotSkew { .. })));
        let mismatch = LagrangianSystem::new(m(1, &[1.0]), m(2, &[1.0; 4]), m(1, &[0.0]), m(1, &[1.0]));
        assert!(matches!(mismatch, Err(Error::DimensionMismatch(_))));
        let rep = validate(&scalar(1.0, 1.0, 1.0).unwrap()).unwrap();
        assert_eq!(rep.n_r, 1);
        assert_eq!(rep.loss_fraction_value(), 1.0);
    }

    #[test]
    fn dual_behaviour() {
        let c = circuit();
        let d = c.dual().unwrap();
        assert_eq!(d.alpha(), c.eta());
        assert_eq!(d.eta(), c.alpha());
        assert_eq!(d.dual().unwrap(), c);
        let selfdual = scalar(2.0, 2.0, 1.0).unwrap();
        assert_eq!(selfdual.dual().unwrap(), selfdual);
        let singular = LagrangianSystem::new(
            RMatrix::identity(2, 2),
            m(2, &[1.0, 0.0, 0.0, 0.0]),
            RMatrix::zeros(2, 2),
            RMatrix::identity(2, 2),
        )
        .unwrap();
        assert!(matches!(singular.dual(), Err(Error::DualityUnavailable)));
    }

    #[test]
    fn pencil_values() {
        let c = circuit();
        assert_eq!(c.pencil(c64(0.0, 0.0), 3.0), -to_complex(c.eta()));
        let s = scalar(1.0, 1.0, 1.0).unwrap();
        assert_eq!(s.pencil(c64(0.0, 1.0), 2.0)[(0, 0)], c64(-4.0, 0.0));
    }

    #[test]
    fn energies() {
        let s = LagrangianSystem::new(m(1, &[2.0]), m(1, &[3.0]), m(1, &[0.0]), m(1, &[1.0])).unwrap();
        let one = CVector::from_element(1, c64(1.0, 0.0));
        assert_eq!(s.hamiltonian(&one, &one).unwrap(), 2.5);
        let zero = CVector::zeros(1);
        assert_eq!(s.hamiltonian(&zero, &zero).unwrap(), 0.0);

        let c = circuit();
        let e1 = CVector::from_vec(vec![c64(1.0, 0.0), c64(0.0, 0.0)]);
        let e2 = CVector::from_vec(vec![c64(0.0, 0.0), c64(1.0, 0.0)]);
        assert_eq!(c.rayleigh_power(&e1, 7.0).unwrap(), 0.0);
        assert_eq!(c.rayleigh_power(&e2, 1.0).unwrap(), 5.0);
        assert_eq!(c.rayleigh_power(&e2, 0.0).unwrap(), 0.0);
        assert!(c.rayleigh_power(&e2, -1.0).is_err());
        assert!(c.hamiltonian(&one, &e2).is_err());
    }

    #[test]
    fn reduced_system() {
        let red = circuit().kernel_reduced_system().unwrap();
        assert_eq!(red.n(), 1);
        assert!(red.is_conservative());
        assert_eq!(red.alpha()[(0, 0)], 10.0);
        assert!((red.eta()[(0, 0)] - 0.16).abs() < 1e-15);
        assert_eq!(red.theta()[(0, 0)], 0.0);
        assert!(validate(&red).is_ok());

        let full = scalar(1.0, 1.0, 1.0).unwrap();
        assert!(matches!(full.kernel_reduced_system(), Err(Error::FullRankDissipation)));

        let mut alpha = RMatrix::zeros(3, 3);
        alpha[(0, 0)] = 2.0;
        alpha[(0, 1)] = 0.5;
        alpha[(1, 0)] = 0.5;
        alpha[(1, 1)] = 3.0;
        alpha[(2, 2)] = 4.0;
        let mut r = RMatrix::zeros(3, 3);
        r[(2, 2)] = 1.0;
        let s = LagrangianSystem::new(alpha.clone(), RMatrix::identity(3, 3), RMatrix::zeros(3, 3), r).unwrap();
        let red = s.kernel_reduced_system().unwrap();
        assert_eq!(red.alpha(), &alpha.view((0, 0), (2, 2)).into_owned());
    }

    mod props {
        use super::*;
        use proptest::prelude::*;

        fn system() -> impl Strategy<Value = LagrangianSystem> {
            (1usize..5)
                .prop_flat_map(|n| (Just(n), proptest::collection::vec(-1.0f64..1.0, 4 * n * n)))
                .prop_map(|(n, v)| {
                    let g = |k: usize| RMatrix::from_fn(n, n, |i, j| v[k * n * n + i * n + j]);
                    let a = g(0);
                    let alpha = &a * a.transpose() + RMatrix::identity(n, n);
                    let e = g(1);
                    let eta = &e * e.transpose() + RMatrix::identity(n, n) * 0.1;
                    let t = g(2);
                    let theta = &t - t.transpose();
                    let rr = g(3).columns(0, 1).into_owned();
                    let r = &rr * rr.transpose() + RMatrix::from_fn(n, n, |i, j| if i == j && i == 0 { 0.5 } else { 0.0 });
                    LagrangianSystem::new(alpha, eta, theta, r).unwrap()
                })
        }

        proptest! {
            #[test]
            fn dual_is_involution(s in system()) {
                prop_assert_eq!(s.dual().unwrap().dual().unwrap(), s);
            }

            #[test]
            fn pencil_duality(s in system(), re in -3.0f64..3.0, im in -3.0f64..3.0, beta in 0.0f64..10.0) {
                let z = c64(re, im);
                prop_assume!(z.norm() > 1e-3);
                let lhs = s.pencil(z, beta);
                let rhs = s.dual().unwrap().pencil(-z.inv(), beta) * (-z * z);
                let scale = crate::linalg::fro(&lhs).max(1.0);
                prop_assert!(crate::linalg::fro(&(lhs - rhs)) <= 1e-12 * scale);
            }

            #[test]
            fn hamiltonian_is_quadratic(s in system(), lam in -3.0f64..3.0, lim in -3.0f64..3.0, seed in proptest::collection::vec(-1.0f64..1.0, 16)) {
                let n = s.n();
                let q = CVector::from_fn(n, |i, _| c64(seed[i], seed[i + 4]));
                let qd = CVector::from_fn(n, |i, _| c64(seed[i + 8], seed[i + 12]));
                let l = c64(lam, lim);
                let h = s.hamiltonian(&q, &qd).unwrap();
                let hl = s.hamiltonian(&(&q * l), &(&qd * l)).unwrap();
                prop_assert!(h >= 0.0);
                prop_assert!((hl - l.norm_sqr() * h).abs() <= 1e-12 * (1.0 + hl.abs()));
            }

            #[test]
            fn rayleigh_linear_in_beta(s in system(), b1 in 0.0f64..5.0, b2 in 0.0f64..5.0, seed in proptest::collection::vec(-1.0f64..1.0, 8)) {
                let n = s.n();
                let qd = CVector::from_fn(n, |i, _| c64(seed[i], seed[i + 4]));
                let p = |b| s.rayleigh_power(&qd, b).unwrap();
                prop_assert!((p(b1 + b2) - p(b1) - p(b2)).abs() <= 1e-12 * (1.0 + p(b1 + b2)));
                let ker = s.ker_r_basis().unwrap();
                for c in 0..ker.ncols() {
                    let v: CVector = ker.column(c).map(|x| c64(x, 0.0));
                    prop_assert!(s.rayleigh_power(&v, 3.0).unwrap() <= 1e-12);
                }
            }

            #[test]
            fn reduced_system_validates(s in system()) {
                if s.n_r() < s.n() {
                    let red = s.kernel_reduced_system().unwrap();
                    prop_assert_eq!(red.n(), s.n() - s.n_r());
                    prop_assert!(validate(&red).is_ok());
                    prop_assert!(red.r().iter().all(|&x| x == 0.0));
                }
            }
        }
    }
}
