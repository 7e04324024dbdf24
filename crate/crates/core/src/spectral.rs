//! Spectra of `A(beta)`, characteristic scalars, thresholds, mode
//! classification and numerical identity checks.

use serde::Serialize;

use crate::canonical::{CanonicalOperator, LossDecomposition};
use crate::error::{Error, Result};
use crate::linalg::{c64, eig_general, eig_hermitian, eig_symmetric, fro, matched_distance, to_complex, CMatrix, CVector, RMatrix, C64};
use crate::model::LagrangianSystem;
use crate::tolerance::Tolerances;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum ModeClass {
    HighLoss,
    LowLossLowQ,
    LowLossHighQ,
    Unclassified,
}

impl ModeClass {
    pub fn as_str(self) -> &'static str {
        match self {
            ModeClass::HighLoss => "high_loss",
            ModeClass::LowLossLowQ => "low_loss_low_q",
            ModeClass::LowLossHighQ => "low_loss_high_q",
            ModeClass::Unclassified => "unclassified",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        Some(match s {
            "high_loss" => ModeClass::HighLoss,
            "low_loss_low_q" => ModeClass::LowLossLowQ,
            "low_loss_high_q" => ModeClass::LowLossHighQ,
            "unclassified" => ModeClass::Unclassified,
            _ => return None,
        })
    }
}

/// One eigenpair of `A(beta)`.
#[derive(Debug, Clone)]
pub struct Mode {
    pub beta: f64,
    pub zeta: C64,
    /// Unit-norm state eigenvector.
    pub w: CVector,
    /// `Re zeta`.
    pub frequency: f64,
    /// `-Im zeta`.
    pub damping: f64,
    /// May be `f64::INFINITY`.
    pub q_factor: f64,
    pub klass: ModeClass,
}

/// `Q = |Re zeta| / (2 (-Im zeta))`, with `Q = inf` for undamped oscillation
/// and `Q = 0` at `zeta = 0`.
pub fn q_factor(zeta: C64) -> Result<f64> {
    let tol = 1e-9 * zeta.norm().max(1.0);
    if zeta.im > tol {
        return Err(Error::GrowingMode { im: zeta.im });
    }
    if zeta.re == 0.0 && zeta.im == 0.0 {
        return Ok(0.0);
    }
    let gamma = -zeta.im;
    if gamma <= 0.0 {
        return Ok(f64::INFINITY);
    }
    Ok(0.5 * zeta.re.abs() / gamma)
}

#[derive(Debug, Clone)]
pub struct Spectrum {
    pub beta: f64,
    pub modes: Vec<Mode>,
    pub near_defective: bool,
    pub min_vector_separation: f64,
}

/// Cached operator data for repeated spectral evaluations of one system.
#[derive(Debug, Clone)]
pub struct Analyzer {
    canon: CanonicalOperator,
    decomp: LossDecomposition,
    omega_spectrum: Vec<f64>,
    omega_max: f64,
    tol: Tolerances,
}

fn sort_modes(modes: &mut [Mode]) {
    modes.sort_by(|a, b| {
        b.damping
            .total_cmp(&a.damping)
            .then(a.frequency.total_cmp(&b.frequency))
    });
}

fn positive_min(values: &[f64], floor: f64) -> Option<f64> {
    values.iter().copied().filter(|&x| x > floor).fold(None, |m, x| Some(m.map_or(x, |m: f64| m.min(x))))
}

impl Analyzer {
    pub fn new(sys: &LagrangianSystem) -> Result<Self> {
        let canon = CanonicalOperator::new(sys)?;
        let decomp = canon.loss_decomposition()?;
        let tol = *sys.tolerances();
        let omega_spectrum: Vec<f64> = eig_hermitian(&canon.omega(), tol.herm)?.values.iter().map(|z| z.re).collect();
        let omega_max = omega_spectrum.iter().fold(0.0f64, |m, x| m.max(x.abs()));
        Ok(Analyzer {
            canon,
            decomp,
            omega_spectrum,
            omega_max,
            tol,
        })
    }

    pub fn system(&self) -> &LagrangianSystem {
        self.canon.system()
    }
    pub fn canonical(&self) -> &CanonicalOperator {
        &self.canon
    }
    pub fn decomposition(&self) -> &LossDecomposition {
        &self.decomp
    }
    /// Ascending eigenvalues of `Omega`.
    pub fn omega_spectrum(&self) -> &[f64] {
        &self.omega_spectrum
    }
    pub fn omega_max(&self) -> f64 {
        self.omega_max
    }

    /// All `2N` modes at `beta`, sorted by damping (descending) then frequency.
    pub fn spectrum(&self, beta: f64) -> Result<Spectrum> {
        if !(beta >= 0.0 && beta.is_finite()) {
            return Err(Error::InvalidArgument(format!("beta must be finite and nonnegative, got {beta}")));
        }
        let a = self.canon.a(beta);
        let eig = eig_general(&a)?;
        let mut xs: Vec<C64> = eig.values.iter().map(|z| z * c64(0.0, -1.0)).collect();
        if beta > 0.0 && self.decomp.dim_ran() > 0 {
            self.refine(&mut xs, beta);
        }
        merge_defective(&mut xs, &eig.vectors, fro(&a));
        let mut modes = Vec::with_capacity(xs.len());
        for (x, w) in xs.iter().zip(eig.vectors) {
            let zeta = *x * c64(0.0, 1.0);
            let q = q_factor(zeta)?;
            modes.push(Mode {
                beta,
                zeta,
                w,
                frequency: zeta.re,
                damping: -zeta.im,
                q_factor: q,
                klass: ModeClass::Unclassified,
            });
        }
        sort_modes(&mut modes);
        Ok(Spectrum {
            beta,
            modes,
            near_defective: eig.near_defective,
            min_vector_separation: eig.min_vector_separation,
        })
    }

    /// Polishes low-loss eigenvalues `x` of `X = S - beta B` through the
    /// Schur complement on `Ker B`:
    /// `x in sigma(S_1 + S_12 (x - S_2 + beta B_2)^{-1} S_21)`.
    /// Conjugate partners are kept exactly conjugate, real values stay real.
    fn refine(&self, xs: &mut [C64], beta: f64) {
        let b2 = &self.decomp.b2;
        let (b_vals, _) = match eig_symmetric(b2, 1.0) {
            Ok(v) => v,
            Err(_) => return,
        };
        let radius = 2.0 * self.omega_max;
        let mut done = vec![false; xs.len()];
        for k in 0..xs.len() {
            if done[k] {
                continue;
            }
            let x = xs[k];
            let far = b_vals.iter().all(|&b| (x + c64(beta * b, 0.0)).norm() > radius.max(1e-300) + 1e-12);
            if !far {
                continue;
            }
            if x.im < 0.0 && xs.iter().any(|&y| y == x.conj()) {
                // handled through its partner with positive imaginary part
                continue;
            }
            if let Some(better) = self.refine_one(x, beta) {
                xs[k] = better;
                done[k] = true;
                if x.im > 0.0 {
                    if let Some(j) = (0..xs.len()).find(|&j| j != k && !done[j] && xs[j] == x.conj()) {
                        xs[j] = better.conj();
                        done[j] = true;
                    }
                }
            }
        }
    }

    fn refine_one(&self, x0: C64, beta: f64) -> Option<C64> {
        let d = &self.decomp;
        let nr = d.dim_ran();
        let real = x0.im == 0.0;
        let s1 = to_complex(&d.s1);
        let s21 = to_complex(&d.s_theta);
        let s12 = to_complex(&(-d.s_theta.transpose()));
        let base = to_complex(&(&d.b2 * beta - &d.s2));
        let mut x = x0;
        let mut converged = false;
        let mut gap = 0.0;
        for _ in 0..40 {
            let shifted = &base + CMatrix::identity(nr, nr) * x;
            let solved = shifted.lu().solve(&s21)?;
            let m = &s1 + &s12 * solved;
            let eig = eig_general(&m).ok()?;
            let (idx, mu) = eig
                .values
                .iter()
                .enumerate()
                .min_by(|a, b| (a.1 - x).norm().total_cmp(&(b.1 - x).norm()))
                .map(|(i, v)| (i, *v))?;
            if real && mu.im != 0.0 {
                return None;
            }
            gap = eig
                .values
                .iter()
                .enumerate()
                .filter(|(i, _)| *i != idx)
                .map(|(_, v)| (v - mu).norm())
                .fold(f64::INFINITY, f64::min);
            let step = (mu - x).norm();
            x = if real { c64(mu.re, 0.0) } else { mu };
            if step <= 4.0 * f64::EPSILON * x.norm().max(1.0) {
                converged = true;
                break;
            }
        }
        let shift = (x - x0).norm();
        if converged && shift <= 1e-6 * x0.norm().max(1.0) && gap > 100.0 * shift {
            Some(x)
        } else {
            None
        }
    }
}

/// Replaces clusters of nearly equal eigenvalues with nearly parallel
/// eigenvectors (a split Jordan block) by their mean, which is accurate to
/// rounding where the individual values are only accurate to its square root.
fn merge_defective(xs: &mut [C64], vectors: &[CVector], norm_a: f64) {
    let n = xs.len();
    let close = 1e-6 * norm_a.max(1.0);
    let mut parent: Vec<usize> = (0..n).collect();
    fn root(p: &mut [usize], mut i: usize) -> usize {
        while p[i] != i {
            p[i] = p[p[i]];
            i = p[i];
        }
        i
    }
    for i in 0..n {
        for j in (i + 1)..n {
            if (xs[i] - xs[j]).norm() <= close && vectors[i].dotc(&vectors[j]).norm() >= 1.0 - 1e-6 {
                let (a, b) = (root(&mut parent, i), root(&mut parent, j));
                parent[a] = b;
            }
        }
    }
    for r in 0..n {
        let members: Vec<usize> = (0..n).filter(|&i| root(&mut parent, i) == r).collect();
        if members.len() < 2 {
            continue;
        }
        let mut mean = members.iter().map(|&i| xs[i]).sum::<C64>() / members.len() as f64;
        if members.iter().all(|&i| members.iter().any(|&j| xs[j] == xs[i].conj())) {
            mean.im = 0.0;
        }
        for &i in &members {
            xs[i] = mean;
        }
    }
}

/// All `2N` modes of `A(beta)`; classes are left `Unclassified`.
pub fn spectrum(sys: &LagrangianSystem, beta: f64) -> Result<Vec<Mode>> {
    Ok(Analyzer::new(sys)?.spectrum(beta)?.modes)
}

/// Which expression attains the maximum in the definition of `beta_2`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Beta2Branch {
    /// `c^{-1}(rho_min / 2)`
    Primal,
    /// `(c_dual)^{-1}(rho_min_dual / 2)`
    Dual,
    /// `2 omega_max / b_min`
    PrimalThreshold,
    /// `2 omega_max_dual / b_min_dual`
    DualThreshold,
}

/// Characteristic scalars and overdamping thresholds of a system.
#[derive(Debug, Clone, Serialize)]
pub struct DichotomyReport {
    pub n: usize,
    pub n_r: usize,
    /// Ascending eigenvalues of `Omega`.
    pub omega_spectrum: Vec<f64>,
    pub omega_max: f64,
    pub omega_min: f64,
    /// Nonzero eigenvalues of `alpha^{-1} R`, ascending.
    pub b_values: Vec<f64>,
    pub b_min: f64,
    pub d_gap: f64,
    pub generic: bool,
    pub omega_max_dual: Option<f64>,
    pub b_values_dual: Option<Vec<f64>>,
    pub b_min_dual: Option<f64>,
    pub d_gap_dual: Option<f64>,
    pub generic_dual: Option<bool>,
    /// Eigenvalues of `Omega_1` (present when `N_R < N`).
    pub rho_spectrum: Option<Vec<f64>>,
    pub rho_min: Option<f64>,
    pub rho_max: Option<f64>,
    pub rho_min_dual: Option<f64>,
    pub rho_max_dual: Option<f64>,
    pub beta0: Option<f64>,
    pub beta1: Option<f64>,
    pub beta2: Option<f64>,
    pub beta2_branch: Option<Beta2Branch>,
    /// Reasons for absent fields, keyed by field name.
    pub absent: Vec<(String, String)>,
}

impl DichotomyReport {
    /// `2 omega_max / b_min`: the high/low loss split exists above it.
    pub fn high_loss_threshold(&self) -> f64 {
        2.0 * self.omega_max / self.b_min
    }

    /// `2 omega_max_dual / b_min_dual`.
    pub fn dual_threshold(&self) -> Option<f64> {
        Some(2.0 * self.omega_max_dual? / self.b_min_dual?)
    }

    /// Threshold above which the three-way classification applies.
    pub fn three_way_threshold(&self) -> Option<f64> {
        Some(self.high_loss_threshold().max(self.dual_threshold()?))
    }

    fn c_generic(om: f64, b: f64, beta: f64) -> Option<f64> {
        let t = 2.0 * om / b;
        if beta > t {
            Some((2.0 * om * om / b) / (beta - t))
        } else {
            None
        }
    }

    fn c_inv_generic(om: f64, b: f64, y: f64) -> Option<f64> {
        if y > 0.0 {
            Some((2.0 * om * om / b) / y + 2.0 * om / b)
        } else {
            None
        }
    }

    /// `c(beta) = (2 omega_max^2 / b_min) / (beta - 2 omega_max / b_min)`.
    pub fn c(&self, beta: f64) -> Option<f64> {
        Self::c_generic(self.omega_max, self.b_min, beta)
    }
    pub fn c_inv(&self, y: f64) -> Option<f64> {
        Self::c_inv_generic(self.omega_max, self.b_min, y)
    }
    pub fn c_dual(&self, beta: f64) -> Option<f64> {
        Self::c_generic(self.omega_max_dual?, self.b_min_dual?, beta)
    }
    pub fn c_dual_inv(&self, y: f64) -> Option<f64> {
        Self::c_inv_generic(self.omega_max_dual?, self.b_min_dual?, y)
    }

    /// Expected class counts (high loss, low-Q, high-Q).
    pub fn expected_counts(&self) -> (usize, usize, usize) {
        (self.n_r, self.n_r, 2 * self.n - 2 * self.n_r)
    }
}

/// Nonzero eigenvalues of a symmetric PSD matrix, ascending.
fn nonzero_eigs(m: &RMatrix, tol: &Tolerances) -> Result<Vec<f64>> {
    let (vals, _) = eig_symmetric(m, tol.herm)?;
    let top = vals.iter().fold(0.0f64, |a, x| a.max(x.abs()));
    Ok(vals.into_iter().filter(|&x| x > tol.rank * top).collect())
}

/// `min |b_i - b_j|` over distinct indices of `{0, b_1, ..., b_k}`, and
/// whether all `b_j` are simple.
fn gap_and_generic(b: &[f64]) -> (f64, bool) {
    let mut all = vec![0.0];
    all.extend_from_slice(b);
    let top = b.iter().fold(0.0f64, |a, x| a.max(*x));
    let mut d = f64::INFINITY;
    let mut generic = true;
    for i in 0..all.len() {
        for j in (i + 1)..all.len() {
            let g = (all[i] - all[j]).abs();
            d = d.min(g);
            if i > 0 && g <= 1e-8 * top {
                generic = false;
            }
        }
    }
    (if generic { d } else { 0.0 }, generic)
}

/// Eigenvalues of `alpha^{-1} R` through the similar matrix `K_p R K_p`.
fn loss_rates(canon: &CanonicalOperator, tol: &Tolerances) -> Result<Vec<f64>> {
    let kp = canon.k_p();
    let rt = kp * canon.system().r() * kp;
    nonzero_eigs(&((&rt + rt.transpose()) * 0.5), tol)
}

/// Frequency and damping scalars: `omega_max`, `omega_min`, `b_min` and,
/// when `eta` is positive definite, their duals. Thresholds are left absent.
pub fn characteristic_scalars(sys: &LagrangianSystem) -> Result<DichotomyReport> {
    let an = Analyzer::new(sys)?;
    scalars_from(&an)
}

fn scalars_from(an: &Analyzer) -> Result<DichotomyReport> {
    let sys = an.system();
    let tol = *sys.tolerances();
    let omega_max = an.omega_max;
    if omega_max == 0.0 {
        return Err(Error::ZeroOmega);
    }
    let omega_min = positive_min(&an.omega_spectrum, tol.rank * omega_max).ok_or(Error::ZeroOmega)?;
    let b_values = loss_rates(&an.canon, &tol)?;
    let b_min = *b_values.first().ok_or(Error::RZero)?;
    let (d_gap, generic) = gap_and_generic(&b_values);
    let mut absent = Vec::new();

    let (omega_max_dual, b_values_dual, b_min_dual, d_gap_dual, generic_dual) = if sys.duality_ok() {
        let dual = sys.dual()?;
        let dual_canon = CanonicalOperator::new(&dual)?;
        let bd = loss_rates(&dual_canon, &tol)?;
        let (dd, gd) = gap_and_generic(&bd);
        (Some(1.0 / omega_min), Some(bd.clone()), bd.first().copied(), Some(dd), Some(gd))
    } else {
        for f in ["omega_max_dual", "b_min_dual", "d_gap_dual", "generic_dual"] {
            absent.push((f.to_string(), "unavailable (eta is singular)".to_string()));
        }
        (None, None, None, None, None)
    };

    Ok(DichotomyReport {
        n: sys.n(),
        n_r: sys.n_r(),
        omega_spectrum: an.omega_spectrum.clone(),
        omega_max,
        omega_min,
        b_values,
        b_min,
        d_gap,
        generic,
        omega_max_dual,
        b_values_dual,
        b_min_dual,
        d_gap_dual,
        generic_dual,
        rho_spectrum: None,
        rho_min: None,
        rho_max: None,
        rho_min_dual: None,
        rho_max_dual: None,
        beta0: None,
        beta1: None,
        beta2: None,
        beta2_branch: None,
        absent,
    })
}

#[derive(Debug, Clone, Serialize)]
pub struct LimitingFrequencies {
    /// Ascending eigenvalues of `Omega_1`.
    pub spectrum: Vec<f64>,
    pub rho_min: f64,
    pub rho_max: f64,
    pub rho_min_dual: Option<f64>,
    pub rho_max_dual: Option<f64>,
    pub zero_multiplicity: usize,
}

fn omega1_spectrum(an: &Analyzer) -> Result<Vec<f64>> {
    let tol = an.tol;
    Ok(eig_hermitian(&an.decomp.omega1(), tol.herm)?.values.iter().map(|z| z.re).collect())
}

/// Spectrum of `Omega_1` and the limiting frequencies `rho_min`, `rho_max`.
pub fn limiting_frequencies(sys: &LagrangianSystem) -> Result<LimitingFrequencies> {
    limiting_from(&Analyzer::new(sys)?)
}

fn limiting_from(an: &Analyzer) -> Result<LimitingFrequencies> {
    let sys = an.system();
    if sys.n_r() == sys.n() {
        return Err(Error::FullRankDissipation);
    }
    let tol = an.tol;
    let spectrum = omega1_spectrum(an)?;
    let floor = tol.rank * an.omega_max.max(f64::MIN_POSITIVE);
    let rho_min = positive_min(&spectrum, floor).ok_or(Error::NoPositiveLimit)?;
    let rho_max = spectrum.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let zero_multiplicity = spectrum.iter().filter(|x| x.abs() <= floor).count();
    let (rho_min_dual, rho_max_dual) = if sys.duality_ok() {
        (Some(1.0 / rho_max), Some(1.0 / rho_min))
    } else {
        (None, None)
    };
    Ok(LimitingFrequencies {
        spectrum,
        rho_min,
        rho_max,
        rho_min_dual,
        rho_max_dual,
        zero_multiplicity,
    })
}

/// Complete report including `beta_0`, `beta_1`, `beta_2`.
pub fn overdamping_thresholds(sys: &LagrangianSystem) -> Result<DichotomyReport> {
    thresholds_from(&Analyzer::new(sys)?)
}

pub fn thresholds_from(an: &Analyzer) -> Result<DichotomyReport> {
    let mut rep = scalars_from(an)?;
    let sys = an.system();

    if rep.generic {
        rep.beta0 = Some(2.0 * rep.omega_max / rep.d_gap);
    } else {
        rep.absent.push(("beta0".into(), "nongeneric (repeated eigenvalue of alpha^-1 R)".into()));
    }

    match (rep.beta0, rep.omega_max_dual, rep.d_gap_dual, rep.generic_dual) {
        (Some(b0), Some(omd), Some(dd), Some(true)) => rep.beta1 = Some(b0.max(2.0 * omd / dd)),
        (_, None, _, _) => rep.absent.push(("beta1".into(), "unavailable (eta is singular)".into())),
        _ => rep.absent.push(("beta1".into(), "nongeneric".into())),
    }

    if sys.n_r() == sys.n() {
        rep.absent.push(("beta2".into(), "absent (N_R = N)".into()));
        rep.absent.push(("rho_min".into(), "absent (N_R = N)".into()));
    } else {
        match limiting_from(an) {
            Ok(lim) => {
                rep.rho_spectrum = Some(lim.spectrum.clone());
                rep.rho_min = Some(lim.rho_min);
                rep.rho_max = Some(lim.rho_max);
                rep.rho_min_dual = lim.rho_min_dual;
                rep.rho_max_dual = lim.rho_max_dual;
                if let (Some(rmd), Some(cd_thr)) = (lim.rho_min_dual, rep.dual_threshold()) {
                    let primal = rep.c_inv(lim.rho_min / 2.0).unwrap_or(f64::INFINITY);
                    let dual = rep.c_dual_inv(rmd / 2.0).unwrap_or(f64::INFINITY);
                    let candidates = [
                        (primal.min(dual), if primal <= dual { Beta2Branch::Primal } else { Beta2Branch::Dual }),
                        (rep.high_loss_threshold(), Beta2Branch::PrimalThreshold),
                        (cd_thr, Beta2Branch::DualThreshold),
                    ];
                    let (value, branch) = candidates
                        .iter()
                        .copied()
                        .fold((f64::NEG_INFINITY, Beta2Branch::Primal), |acc, c| if c.0 > acc.0 { c } else { acc });
                    rep.beta2 = Some(value);
                    rep.beta2_branch = Some(branch);
                } else {
                    rep.absent.push(("beta2".into(), "unavailable (eta is singular)".into()));
                }
            }
            Err(Error::NoPositiveLimit) => {
                rep.rho_spectrum = Some(omega1_spectrum(an)?);
                rep.absent.push(("rho_min".into(), "absent (Omega_1 has no positive eigenvalue)".into()));
                rep.absent.push(("beta2".into(), "absent (Omega_1 has no positive eigenvalue)".into()));
            }
            Err(e) => return Err(e),
        }
    }
    Ok(rep)
}

fn counts(modes: &[Mode]) -> (usize, usize, usize) {
    let mut c = (0, 0, 0);
    for m in modes {
        match m.klass {
            ModeClass::HighLoss => c.0 += 1,
            ModeClass::LowLossLowQ => c.1 += 1,
            ModeClass::LowLossHighQ => c.2 += 1,
            ModeClass::Unclassified => {}
        }
    }
    c
}

/// Assigns classes by the `|zeta|` bands. Below `2 omega_max / b_min` every
/// mode stays `Unclassified`.
pub fn classify_with(rep: &DichotomyReport, beta: f64, modes: &mut [Mode]) -> Result<()> {
    for m in modes.iter_mut() {
        m.klass = ModeClass::Unclassified;
    }
    if beta <= rep.high_loss_threshold() {
        return Ok(());
    }
    let expected = rep.expected_counts();
    if let Some(t3) = rep.three_way_threshold() {
        if beta > t3 {
            for m in modes.iter_mut() {
                let r = m.zeta.norm();
                m.klass = if r > rep.omega_max {
                    ModeClass::HighLoss
                } else if r < rep.omega_min {
                    ModeClass::LowLossLowQ
                } else {
                    ModeClass::LowLossHighQ
                };
            }
            let found = counts(modes);
            if found != expected {
                return Err(Error::CountMismatch { beta, found, expected });
            }
            return Ok(());
        }
    }

    // High/low split only, refined by the rho_min / 2 band when available.
    let split = match (rep.rho_min, rep.rho_spectrum.as_ref()) {
        (Some(rho_min), Some(rho)) => rep.c_inv(rho_min / 2.0).filter(|&t| beta > t).map(|_| {
            let floor = 1e-10 * rep.omega_max;
            (rho_min, rho.iter().filter(|x| x.abs() > floor).count())
        }),
        _ => None,
    };
    let full_rank = rep.n_r == rep.n;
    for m in modes.iter_mut() {
        m.klass = if m.zeta.norm() > rep.omega_max {
            ModeClass::HighLoss
        } else if full_rank {
            ModeClass::LowLossLowQ
        } else if let Some((rho_min, _)) = split {
            if m.zeta.re.abs() < rho_min / 2.0 {
                ModeClass::LowLossLowQ
            } else {
                ModeClass::LowLossHighQ
            }
        } else {
            ModeClass::Unclassified
        };
    }
    let found = counts(modes);
    let expected_partial = if full_rank {
        (rep.n_r, rep.n_r, 0)
    } else if let Some((_, high_q)) = split {
        (rep.n_r, 2 * rep.n - rep.n_r - high_q, high_q)
    } else {
        (rep.n_r, 0, 0)
    };
    if found != expected_partial {
        return Err(Error::CountMismatch {
            beta,
            found,
            expected: expected_partial,
        });
    }
    Ok(())
}

/// Classifies `modes` of `sys` at `beta`.
pub fn classify(sys: &LagrangianSystem, beta: f64, modes: &mut [Mode]) -> Result<()> {
    let rep = overdamping_thresholds(sys)?;
    classify_with(&rep, beta, modes)
}

/// Numerical residuals of the spectral identities at one `beta`.
#[derive(Debug, Clone, Serialize)]
pub struct IdentityReport {
    pub beta: f64,
    /// Matched distance between `sigma(A)` and `-conj sigma(A)`.
    pub symmetry: f64,
    /// Matched distance between `sigma(A)` and `-1 / sigma(A_dual)`.
    pub duality: Option<f64>,
    /// Largest excess of an eigenvalue beyond the union of discs of radius
    /// `omega_max` around `-i beta b_j`, relative to `max(1, omega_max)`.
    pub disc_excess: f64,
    /// Largest Rayleigh-quotient mismatch for `Re zeta` and `-Im zeta`.
    pub rayleigh: f64,
    /// Largest eigenpair residual `|A w - zeta w| / |A|_F`.
    pub eigen_residual: f64,
    /// `det(zeta - A) det(alpha)` against `det C(zeta, beta)`.
    pub determinant: f64,
    /// `det(rho - Omega_1)` against the reduced-pencil formula.
    pub omega1_determinant: Option<f64>,
    pub band_counts: Option<(usize, usize, usize)>,
    pub expected_counts: (usize, usize, usize),
    pub near_defective: bool,
}

impl IdentityReport {
    pub fn max_residual(&self) -> f64 {
        [
            Some(self.symmetry),
            self.duality,
            Some(self.disc_excess),
            Some(self.rayleigh),
            Some(self.eigen_residual),
            Some(self.determinant),
            self.omega1_determinant,
        ]
        .into_iter()
        .flatten()
        .fold(0.0, f64::max)
    }

    pub fn bands_ok(&self) -> bool {
        self.band_counts.is_none_or(|c| c == self.expected_counts)
    }
}

fn rel_dist(x: C64, y: C64) -> f64 {
    (x - y).norm() / x.norm().max(y.norm()).max(1.0)
}

fn rel_diff(a: C64, b: C64) -> f64 {
    let scale = a.norm().max(b.norm());
    if scale == 0.0 {
        0.0
    } else {
        (a - b).norm() / scale
    }
}

/// Deterministic sample points in the complex plane.
fn sample_points(count: usize, radius: f64) -> Vec<C64> {
    (0..count)
        .map(|k| {
            let r = radius * (0.35 + 0.9 * ((k as f64 * 0.618_033_988_75).fract()));
            let phi = 2.399_963_229_728_653 * k as f64 + 0.3;
            c64(r * phi.cos(), r * phi.sin())
        })
        .collect()
}

/// Checks the spectral identities of `sys` at `beta`.
pub fn identity_suite(sys: &LagrangianSystem, beta: f64) -> Result<IdentityReport> {
    let an = Analyzer::new(sys)?;
    identity_suite_with(&an, beta)
}

pub fn identity_suite_with(an: &Analyzer, beta: f64) -> Result<IdentityReport> {
    let sys = an.system();
    let spec = an.spectrum(beta)?;
    let zetas: Vec<C64> = spec.modes.iter().map(|m| m.zeta).collect();

    let mirrored: Vec<C64> = zetas.iter().map(|z| -z.conj()).collect();
    let symmetry = matched_distance(&zetas, &mirrored, rel_dist);

    let duality = if sys.duality_ok() {
        let dual = Analyzer::new(&sys.dual()?)?;
        let dz: Vec<C64> = dual.spectrum(beta)?.modes.iter().map(|m| -m.zeta.inv()).collect();
        Some(matched_distance(&zetas, &dz, rel_dist))
    } else {
        None
    };

    let (b_all, _) = eig_symmetric(an.canon.b(), sys.tolerances().herm)?;
    let om = an.omega_max;
    let disc_excess = zetas
        .iter()
        .map(|z| {
            let dmin = b_all
                .iter()
                .map(|&b| (z - c64(0.0, -beta * b)).norm())
                .fold(f64::INFINITY, f64::min);
            (dmin - om).max(0.0) / om.max(1.0)
        })
        .fold(0.0, f64::max);

    let omega = an.canon.omega();
    let bmat = to_complex(an.canon.b());
    let a = an.canon.a(beta);
    let a_norm = fro(&a).max(f64::MIN_POSITIVE);
    let mut rayleigh: f64 = 0.0;
    let mut eigen_residual: f64 = 0.0;
    for m in &spec.modes {
        let ww = m.w.dotc(&m.w).re;
        let re_q = m.w.dotc(&(&omega * &m.w)).re / ww;
        let im_q = beta * m.w.dotc(&(&bmat * &m.w)).re / ww;
        let scale = m.zeta.norm().max(1.0);
        rayleigh = rayleigh.max((m.zeta.re - re_q).abs() / scale).max((m.damping - im_q).abs() / scale);
        eigen_residual = eigen_residual.max((&a * &m.w - &m.w * m.zeta).norm() / a_norm);
    }

    let det_alpha = sys.alpha().determinant();
    let dim = 2 * sys.n();
    let radius = zetas.iter().map(|z| z.norm()).fold(1.0, f64::max);
    let mut determinant: f64 = 0.0;
    for z in sample_points(20, radius) {
        let lhs = (CMatrix::identity(dim, dim) * z - &a).determinant() * det_alpha;
        let rhs = sys.pencil(z, beta).determinant();
        determinant = determinant.max(rel_diff(lhs, rhs));
    }

    let omega1_determinant = if sys.n_r() < sys.n() {
        let omega1 = an.decomp.omega1();
        let k = omega1.nrows();
        let v = to_complex(&sys.ker_r_basis()?);
        let va = v.adjoint() * to_complex(sys.alpha()) * &v;
        let det_va = va.determinant();
        let top = an.omega_max.max(1e-3);
        let mut worst: f64 = 0.0;
        for j in 0..10 {
            let rho = top * (0.13 + 0.21 * j as f64) * if j % 2 == 0 { 1.0 } else { -1.0 };
            let lhs = (CMatrix::identity(k, k) * c64(rho, 0.0) - &omega1).determinant();
            let reduced = v.adjoint() * sys.pencil(c64(rho, 0.0), 0.0) * &v;
            let rhs = c64(rho, 0.0).powi(sys.n_r() as i32) * reduced.determinant() / det_va;
            worst = worst.max(rel_diff(lhs, rhs));
        }
        Some(worst)
    } else {
        None
    };

    let expected_counts = (sys.n_r(), sys.n_r(), 2 * sys.n() - 2 * sys.n_r());
    let band_counts = match thresholds_from(an) {
        Ok(rep) => match rep.three_way_threshold() {
            Some(t) if beta > t => {
                let mut modes = spec.modes.clone();
                match classify_with(&rep, beta, &mut modes) {
                    Ok(()) => Some(counts(&modes)),
                    Err(Error::CountMismatch { found, .. }) => Some(found),
                    Err(e) => return Err(e),
                }
            }
            _ => None,
        },
        Err(Error::ZeroOmega) => None,
        Err(e) => return Err(e),
    };

    Ok(IdentityReport {
        beta,
        symmetry,
        duality,
        disc_excess,
        rayleigh,
        eigen_residual,
        determinant,
        omega1_determinant,
        band_counts,
        expected_counts,
        near_defective: spec.near_defective,
    })
}
