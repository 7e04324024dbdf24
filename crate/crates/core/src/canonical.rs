//! First-order canonical form `d/dt v = -i A(beta) v` with
//! `A(beta) = Omega - i beta B`.
//!
//! With `K_p = alpha^{-1/2}`, `K_q = eta^{1/2}` and `Phi = K_q K_p`,
//!
//! ```text
//! Omega = [[-2i K_p theta K_p, -i Phi^T], [i Phi, 0]],   B = [[K_p R K_p, 0], [0, 0]].
//! ```
//!
//! `Omega = i S` for a real skew-symmetric `S`, so `A(beta) = i (S - beta B)`
//! and everything can be stored as real matrices.

use crate::error::{Error, Result};
use crate::linalg::{c64, eig_symmetric, fro, real_kernel_basis, to_complex, CMatrix, CVector, RMatrix, C64};
use crate::model::LagrangianSystem;

const PAIR_TOL: f64 = 1e-8;

/// Square root of a symmetric PSD matrix, clamping tiny or negative
/// eigenvalues to zero.
pub fn psd_sqrt(m: &RMatrix, tol_rank: f64) -> Result<RMatrix> {
    let (vals, vecs) = eig_symmetric(m, 1e-12)?;
    let top = vals.iter().fold(0.0f64, |a, x| a.max(x.abs()));
    let roots: Vec<f64> = vals
        .iter()
        .map(|&x| if x <= tol_rank * top { 0.0 } else { x.sqrt() })
        .collect();
    Ok(&vecs * RMatrix::from_diagonal(&nalgebra::DVector::from_vec(roots)) * vecs.transpose())
}

/// Inverse square root of a symmetric positive definite matrix.
pub fn spd_inv_sqrt(m: &RMatrix) -> Result<RMatrix> {
    let (vals, vecs) = eig_symmetric(m, 1e-12)?;
    if vals.iter().any(|&x| x <= 0.0) {
        return Err(Error::AlphaNotPositiveDefinite { min_eig: vals[0] });
    }
    let inv: Vec<f64> = vals.iter().map(|&x| 1.0 / x.sqrt()).collect();
    Ok(&vecs * RMatrix::from_diagonal(&nalgebra::DVector::from_vec(inv)) * vecs.transpose())
}

fn symmetrize(m: RMatrix) -> RMatrix {
    (&m + m.transpose()) * 0.5
}

#[derive(Debug, Clone)]
pub struct CanonicalOperator {
    sys: LagrangianSystem,
    s: RMatrix,
    b: RMatrix,
    k: RMatrix,
    k_p: RMatrix,
    sqrt_alpha: RMatrix,
    sqrt_eta: RMatrix,
    n_r: usize,
}

impl CanonicalOperator {
    pub fn new(sys: &LagrangianSystem) -> Result<Self> {
        let n = sys.n();
        let tol = sys.tolerances();
        let k_p = symmetrize(spd_inv_sqrt(sys.alpha())?);
        let sqrt_alpha = symmetrize(psd_sqrt(sys.alpha(), tol.rank)?);
        let k_q = symmetrize(psd_sqrt(sys.eta(), tol.rank)?);
        let phi = &k_q * &k_p;
        let gyro = &k_p * sys.theta() * &k_p;
        let gyro = (&gyro - gyro.transpose()) * 0.5;
        let r_tilde = symmetrize(&k_p * sys.r() * &k_p);

        let mut s = RMatrix::zeros(2 * n, 2 * n);
        s.view_mut((0, 0), (n, n)).copy_from(&(gyro * -2.0));
        s.view_mut((0, n), (n, n)).copy_from(&(-phi.transpose()));
        s.view_mut((n, 0), (n, n)).copy_from(&phi);

        let mut b = RMatrix::zeros(2 * n, 2 * n);
        b.view_mut((0, 0), (n, n)).copy_from(&r_tilde);

        let mut k = RMatrix::zeros(2 * n, 2 * n);
        k.view_mut((0, 0), (n, n)).copy_from(&k_p);
        k.view_mut((0, n), (n, n)).copy_from(&(-(&k_p * sys.theta())));
        k.view_mut((n, n), (n, n)).copy_from(&k_q);

        Ok(CanonicalOperator {
            sys: sys.clone(),
            s,
            b,
            k,
            k_p,
            sqrt_alpha,
            sqrt_eta: k_q,
            n_r: sys.n_r(),
        })
    }

    pub fn system(&self) -> &LagrangianSystem {
        &self.sys
    }
    pub fn n(&self) -> usize {
        self.sys.n()
    }
    pub fn n_r(&self) -> usize {
        self.n_r
    }
    /// Real skew matrix `S` with `Omega = i S`.
    pub fn s(&self) -> &RMatrix {
        &self.s
    }
    pub fn b(&self) -> &RMatrix {
        &self.b
    }
    /// Change of variables `v = K u`, `u = [P; Q]`, `P = alpha Q' + theta Q`.
    pub fn k(&self) -> &RMatrix {
        &self.k
    }
    pub fn k_inv(&self) -> Option<RMatrix> {
        self.k.clone().try_inverse()
    }
    pub fn k_p(&self) -> &RMatrix {
        &self.k_p
    }
    pub fn sqrt_alpha(&self) -> &RMatrix {
        &self.sqrt_alpha
    }
    pub fn sqrt_eta(&self) -> &RMatrix {
        &self.sqrt_eta
    }

    pub fn omega(&self) -> CMatrix {
        self.s.map(|x| c64(0.0, x))
    }

    /// Real matrix `X(beta) = S - beta B`, so that `A(beta) = i X(beta)`.
    pub fn x(&self, beta: f64) -> RMatrix {
        &self.s - &self.b * beta
    }

    /// `A(beta) = Omega - i beta B`.
    pub fn a(&self, beta: f64) -> CMatrix {
        self.x(beta).map(|x| c64(0.0, x))
    }

    /// State vector `[-i zeta sqrt(alpha) q; sqrt(eta) q]` of a pencil
    /// eigenvector (not normalized).
    pub fn pencil_to_state_vector(&self, zeta: C64, beta: f64, q: &CVector) -> Result<CVector> {
        let n = self.n();
        if q.len() != n {
            return Err(Error::DimensionMismatch(format!("q has length {}, expected {n}", q.len())));
        }
        if zeta.norm() == 0.0 {
            return Err(Error::ZeroFrequency);
        }
        let qn = q.norm();
        if qn == 0.0 {
            return Err(Error::NotAnEigenpair { residual: f64::INFINITY });
        }
        let residual = self.pencil_residual(zeta, beta, q);
        if residual > PAIR_TOL {
            return Err(Error::NotAnEigenpair { residual });
        }
        let upper = to_complex(&self.sqrt_alpha) * q * (c64(0.0, -1.0) * zeta);
        let lower = to_complex(&self.sqrt_eta) * q;
        let mut w = CVector::zeros(2 * n);
        w.rows_mut(0, n).copy_from(&upper);
        w.rows_mut(n, n).copy_from(&lower);
        Ok(w)
    }

    /// Pencil eigenvector recovered from a state eigenvector (not normalized).
    pub fn state_to_pencil_vector(&self, zeta: C64, beta: f64, w: &CVector) -> Result<CVector> {
        let n = self.n();
        if w.len() != 2 * n {
            return Err(Error::DimensionMismatch(format!("w has length {}, expected {}", w.len(), 2 * n)));
        }
        if zeta.norm() == 0.0 {
            return Err(Error::ZeroFrequency);
        }
        let a = self.a(beta);
        let wn = w.norm();
        if wn == 0.0 {
            return Err(Error::NotAnEigenpair { residual: f64::INFINITY });
        }
        let state_res = (&a * w - w * zeta).norm() / ((fro(&a) + zeta.norm()) * wn);
        if state_res > PAIR_TOL {
            return Err(Error::NotAnEigenpair { residual: state_res });
        }
        let q = if self.sys.duality_ok() {
            let inv = spd_inv_sqrt(self.sys.eta())?;
            to_complex(&inv) * w.rows(n, n)
        } else {
            to_complex(&self.k_p) * w.rows(0, n) / (c64(0.0, -1.0) * zeta)
        };
        if q.norm() <= 1e-12 * wn {
            return Err(Error::NotAnEigenpair { residual: 1.0 });
        }
        let residual = self.pencil_residual(zeta, beta, &q);
        if residual > PAIR_TOL {
            return Err(Error::NotAnEigenpair { residual });
        }
        Ok(q)
    }

    /// `|C(zeta, beta) q|` relative to the size of the pencil terms.
    pub fn pencil_residual(&self, zeta: C64, beta: f64, q: &CVector) -> f64 {
        let c = self.sys.pencil(zeta, beta);
        let damping = to_complex(&(self.sys.theta() * 2.0 + self.sys.r() * beta));
        let scale = zeta.norm_sqr() * fro(&to_complex(self.sys.alpha()))
            + zeta.norm() * fro(&damping)
            + fro(&to_complex(self.sys.eta()));
        (&c * q).norm() / (scale.max(f64::MIN_POSITIVE) * q.norm())
    }

    /// Splitting of the state space into `Ran B` and `Ker B`.
    pub fn loss_decomposition(&self) -> Result<LossDecomposition> {
        let dim = 2 * self.n();
        let tol = self.sys.tolerances();
        let (vals, vecs) = eig_symmetric(&self.b, tol.herm)?;
        let top = vals.iter().fold(0.0f64, |a, x| a.max(x.abs()));
        // Ran B ordered by increasing eigenvalue of B.
        let ran: Vec<usize> = (0..dim).filter(|&i| vals[i] > tol.rank * top).collect();
        let mut u2 = RMatrix::zeros(dim, ran.len());
        for (c, &i) in ran.iter().enumerate() {
            u2.set_column(c, &vecs.column(i));
        }
        let u1 = real_kernel_basis(&self.b, tol.rank)?;
        if u1.ncols() + u2.ncols() != dim {
            return Err(Error::DimensionMismatch("Ran B and Ker B do not span the state space".into()));
        }
        let b2 = symmetrize(u2.transpose() * &self.b * &u2);
        let s2 = u2.transpose() * &self.s * &u2;
        let s21 = u2.transpose() * &self.s * &u1;
        let s1 = u1.transpose() * &self.s * &u1;
        Ok(LossDecomposition {
            p_b: &u2 * u2.transpose(),
            p_b_perp: &u1 * u1.transpose(),
            ran_basis: u2,
            ker_basis: u1,
            b2,
            s2: (&s2 - s2.transpose()) * 0.5,
            s_theta: s21,
            s1: (&s1 - s1.transpose()) * 0.5,
        })
    }
}

/// Blocks of `Omega` and `B` with respect to `Ran B (+) Ker B`. Omega blocks
/// are stored through their real skew counterparts (`Omega_k = i S_k`).
#[derive(Debug, Clone)]
pub struct LossDecomposition {
    pub p_b: RMatrix,
    pub p_b_perp: RMatrix,
    /// Orthonormal columns spanning `Ran B`.
    pub ran_basis: RMatrix,
    /// Orthonormal columns spanning `Ker B`.
    pub ker_basis: RMatrix,
    pub b2: RMatrix,
    pub s2: RMatrix,
    pub s_theta: RMatrix,
    pub s1: RMatrix,
}

impl LossDecomposition {
    pub fn omega2(&self) -> CMatrix {
        self.s2.map(|x| c64(0.0, x))
    }
    pub fn theta_block(&self) -> CMatrix {
        self.s_theta.map(|x| c64(0.0, x))
    }
    pub fn omega1(&self) -> CMatrix {
        self.s1.map(|x| c64(0.0, x))
    }
    pub fn dim_ran(&self) -> usize {
        self.ran_basis.ncols()
    }
    pub fn dim_ker(&self) -> usize {
        self.ker_basis.ncols()
    }

    /// `Omega` rebuilt from its four blocks.
    pub fn reassemble_omega(&self) -> CMatrix {
        let u2 = &self.ran_basis;
        let u1 = &self.ker_basis;
        let s = u2 * &self.s2 * u2.transpose()
            + u2 * &self.s_theta * u1.transpose()
            + u1 * (-self.s_theta.transpose()) * u2.transpose()
            + u1 * &self.s1 * u1.transpose();
        s.map(|x| c64(0.0, x))
    }
}
