//! Large-`beta` expansions of the eigenvalue branches and branch tracking
//! across a `beta` grid.
//!
//! High-loss branches behave like `rho_j - i b_j beta`, low-loss branches
//! like `rho_j - i d_j / beta`.

use serde::Serialize;

use crate::error::{Error, Result};
use crate::linalg::{c64, eig_hermitian, eig_symmetric, CMatrix, CVector, RMatrix, C64};
use crate::model::LagrangianSystem;
use crate::spectral::{thresholds_from, Analyzer, DichotomyReport, Mode, ModeClass};

const DEGENERATE: f64 = 1e-9;

#[derive(Debug, Clone, Serialize)]
pub struct AsymptoticModel {
    /// Nonzero eigenvalues of `alpha^{-1} R`, ascending.
    pub b_coeffs: Vec<f64>,
    /// `(w_j, Omega w_j)` for the high-loss eigenvectors of `B_2`.
    pub rho_highloss: Vec<f64>,
    /// Eigenvalues of `Omega_1`, ascending.
    pub rho_lowloss: Vec<f64>,
    /// `(w_j, Theta* B_2^{-1} Theta w_j)`, aligned with `rho_lowloss`.
    pub d_coeffs: Vec<f64>,
    /// `1 / b_j` for the dual system, ascending in `b_j`.
    pub dual_slopes: Option<Vec<f64>>,
    pub omega_max: f64,
    pub b_min: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum BranchKind {
    HighLoss,
    LowLoss,
}

impl AsymptoticModel {
    /// Leading-order predictions at `beta`: `(kind, index into the
    /// coefficient lists, zeta)`.
    pub fn predictions(&self, beta: f64) -> Vec<(BranchKind, usize, C64)> {
        let mut out = Vec::with_capacity(self.b_coeffs.len() + self.rho_lowloss.len());
        for (j, (&b, &rho)) in self.b_coeffs.iter().zip(&self.rho_highloss).enumerate() {
            out.push((BranchKind::HighLoss, j, c64(rho, -b * beta)));
        }
        for (j, (&rho, &d)) in self.rho_lowloss.iter().zip(&self.d_coeffs).enumerate() {
            out.push((BranchKind::LowLoss, j, c64(rho, -d / beta)));
        }
        out
    }
}

/// Eigenpairs of a Hermitian matrix, refined inside clusters of (nearly)
/// equal eigenvalues by diagonalizing `g` restricted to each cluster.
/// Returns `(eigenvalue, (w, g w))` pairs.
fn split_degenerate(h: &CMatrix, g: &CMatrix, scale: f64, tol_herm: f64) -> Result<Vec<(f64, f64)>> {
    let eig = eig_hermitian(h, tol_herm)?;
    let vals: Vec<f64> = eig.values.iter().map(|z| z.re).collect();
    let mut out = Vec::with_capacity(vals.len());
    let mut i = 0;
    while i < vals.len() {
        let mut j = i + 1;
        while j < vals.len() && (vals[j] - vals[j - 1]).abs() <= DEGENERATE * scale {
            j += 1;
        }
        let cluster: Vec<CVector> = eig.vectors[i..j].to_vec();
        let k = cluster.len();
        let gram = CMatrix::from_fn(k, k, |a, b| cluster[a].dotc(&(g * &cluster[b])));
        let gram = (&gram + gram.adjoint()).map(|z| z * 0.5);
        let inner = eig_hermitian(&gram, 1e-8)?;
        let mean = vals[i..j].iter().sum::<f64>() / k as f64;
        for d in inner.values {
            out.push((if k == 1 { vals[i] } else { mean }, d.re.max(0.0)));
        }
        i = j;
    }
    Ok(out)
}

/// Expansion coefficients of all `2N` branches.
pub fn expansion_coefficients(sys: &LagrangianSystem) -> Result<AsymptoticModel> {
    model_from(&Analyzer::new(sys)?)
}

pub fn model_from(an: &Analyzer) -> Result<AsymptoticModel> {
    let sys = an.system();
    let tol = *sys.tolerances();
    let d = an.decomposition();
    let omega_max = an.omega_max();

    let (b_vals, b_vecs) = eig_symmetric(&d.b2, tol.herm)?;
    let omega2 = d.omega2();
    let rho_highloss = (0..b_vals.len())
        .map(|j| {
            let v: CVector = b_vecs.column(j).map(|x| c64(x, 0.0));
            v.dotc(&(&omega2 * &v)).re
        })
        .collect();

    let b2_inv = d
        .b2
        .clone()
        .try_inverse()
        .ok_or_else(|| Error::DimensionMismatch("B_2 is singular".into()))?;
    let g_real: RMatrix = d.s_theta.transpose() * b2_inv * &d.s_theta;
    let g = g_real.map(|x| c64(x, 0.0));
    let pairs = split_degenerate(&d.omega1(), &g, omega_max.max(1.0), tol.herm)?;
    let rho_lowloss = pairs.iter().map(|p| p.0).collect();
    let d_coeffs = pairs.iter().map(|p| p.1).collect();

    let dual_slopes = if sys.duality_ok() {
        let dual = Analyzer::new(&sys.dual()?)?;
        let (bd, _) = eig_symmetric(&dual.decomposition().b2, tol.herm)?;
        Some(bd.iter().map(|b| 1.0 / b).collect())
    } else {
        None
    };

    Ok(AsymptoticModel {
        b_min: b_vals.first().copied().unwrap_or(f64::NAN),
        b_coeffs: b_vals,
        rho_highloss,
        rho_lowloss,
        d_coeffs,
        dual_slopes,
        omega_max,
    })
}

/// Branches of the spectrum tracked across a `beta` grid.
#[derive(Debug, Clone)]
pub struct SweepResult {
    pub beta_grid: Vec<f64>,
    /// `branches[j][k]` is branch `j` at `beta_grid[k]`.
    pub branches: Vec<Vec<Mode>>,
    /// Smallest eigenvector overlap between adjacent grid points, per branch.
    pub continuity_score: Vec<f64>,
    /// Grid points whose eigenvector matrix is nearly singular.
    pub near_defective: Vec<f64>,
    pub report: Option<DichotomyReport>,
}

impl SweepResult {
    pub fn branch_count(&self) -> usize {
        self.branches.len()
    }
}

/// `count` points from `lo` to `hi`, linear or logarithmic. A single point
/// (or `lo == hi`) yields `[lo]`.
pub fn make_grid(lo: f64, hi: f64, count: usize, log: bool) -> Result<Vec<f64>> {
    if !(lo.is_finite() && hi.is_finite()) || lo < 0.0 || hi < lo {
        return Err(Error::InvalidGrid(format!("bad range [{lo}, {hi}]")));
    }
    if count == 0 {
        return Err(Error::InvalidGrid("need at least one point".into()));
    }
    if count == 1 || lo == hi {
        return Ok(vec![lo]);
    }
    if log && lo <= 0.0 {
        return Err(Error::InvalidGrid("logarithmic grid needs a positive lower bound".into()));
    }
    let last = (count - 1) as f64;
    let mut grid: Vec<f64> = (0..count)
        .map(|k| {
            let t = k as f64 / last;
            if log {
                (lo.ln() + t * (hi.ln() - lo.ln())).exp()
            } else {
                lo + t * (hi - lo)
            }
        })
        .collect();
    grid[0] = lo;
    grid[count - 1] = hi;
    Ok(grid)
}

fn check_grid(grid: &[f64]) -> Result<()> {
    if grid.is_empty() {
        return Err(Error::InvalidGrid("empty grid".into()));
    }
    if grid.iter().any(|b| !b.is_finite() || *b < 0.0) {
        return Err(Error::InvalidGrid("grid values must be finite and nonnegative".into()));
    }
    if grid.windows(2).any(|w| w[1] <= w[0]) {
        return Err(Error::InvalidGrid("grid must be strictly increasing".into()));
    }
    Ok(())
}

fn class_rank(c: ModeClass) -> u8 {
    match c {
        ModeClass::HighLoss => 0,
        ModeClass::LowLossLowQ => 1,
        ModeClass::LowLossHighQ => 2,
        ModeClass::Unclassified => 3,
    }
}

/// Computes the spectrum at every grid point and links eigenvalues into
/// continuous branches. Branches are numbered by their class at the last
/// grid point (high loss, low-Q, high-Q), then by damping and frequency.
pub fn sweep(sys: &LagrangianSystem, beta_grid: &[f64]) -> Result<SweepResult> {
    sweep_with(&Analyzer::new(sys)?, beta_grid)
}

pub fn sweep_with(an: &Analyzer, beta_grid: &[f64]) -> Result<SweepResult> {
    check_grid(beta_grid)?;
    let report = match thresholds_from(an) {
        Ok(r) => Some(r),
        Err(Error::ZeroOmega) => None,
        Err(e) => return Err(e),
    };
    let mut branches: Vec<Vec<Mode>> = Vec::new();
    let mut continuity: Vec<f64> = Vec::new();
    let mut near_defective = Vec::new();

    for (step, &beta) in beta_grid.iter().enumerate() {
        let spec = an.spectrum(beta)?;
        if spec.near_defective {
            near_defective.push(beta);
        }
        let mut modes = spec.modes;
        if let Some(rep) = &report {
            crate::spectral::classify_with(rep, beta, &mut modes)?;
        }
        if step == 0 {
            continuity = vec![1.0; modes.len()];
            branches = modes.into_iter().map(|m| vec![m]).collect();
            continue;
        }
        let assignment = assign(&branches, &modes, beta)?;
        for (j, k) in assignment.into_iter().enumerate() {
            let prev = branches[j].last().expect("nonempty branch");
            let overlap = prev.w.dotc(&modes[k].w).norm();
            continuity[j] = continuity[j].min(overlap);
            branches[j].push(modes[k].clone());
        }
    }

    let mut order: Vec<usize> = (0..branches.len()).collect();
    order.sort_by(|&a, &b| {
        let (ma, mb) = (branches[a].last().unwrap(), branches[b].last().unwrap());
        class_rank(ma.klass)
            .cmp(&class_rank(mb.klass))
            .then(mb.damping.total_cmp(&ma.damping))
            .then(mb.frequency.total_cmp(&ma.frequency))
    });
    let branches = order.iter().map(|&i| branches[i].clone()).collect();
    let continuity_score = order.iter().map(|&i| continuity[i].max(f64::MIN_POSITIVE)).collect();
    Ok(SweepResult {
        beta_grid: beta_grid.to_vec(),
        branches,
        continuity_score,
        near_defective,
        report,
    })
}

/// Bijection from existing branches to the new modes: nearest predicted
/// eigenvalue first, eigenvector overlap as tie breaker.
fn assign(branches: &[Vec<Mode>], modes: &[Mode], beta: f64) -> Result<Vec<usize>> {
    let n = modes.len();
    let predicted: Vec<C64> = branches
        .iter()
        .map(|b| {
            let last = &b[b.len() - 1];
            if b.len() >= 2 {
                let prev = &b[b.len() - 2];
                let h = last.beta - prev.beta;
                if h > 0.0 {
                    return last.zeta + (last.zeta - prev.zeta) * ((beta - last.beta) / h);
                }
            }
            last.zeta
        })
        .collect();
    let scale = modes.iter().map(|m| m.zeta.norm()).fold(1.0, f64::max);
    let mut cost = vec![vec![0.0; n]; n];
    let mut overlap = vec![vec![0.0; n]; n];
    for j in 0..n {
        let w_prev = &branches[j][branches[j].len() - 1].w;
        for k in 0..n {
            cost[j][k] = (predicted[j] - modes[k].zeta).norm() / scale;
            overlap[j][k] = w_prev.dotc(&modes[k].w).norm();
        }
    }
    let mut pairs: Vec<(usize, usize)> = (0..n).flat_map(|j| (0..n).map(move |k| (j, k))).collect();
    pairs.sort_by(|&(j1, k1), &(j2, k2)| {
        cost[j1][k1]
            .total_cmp(&cost[j2][k2])
            .then(overlap[j2][k2].total_cmp(&overlap[j1][k1]))
    });
    let mut result = vec![usize::MAX; n];
    let mut taken = vec![false; n];
    for (j, k) in pairs {
        if result[j] != usize::MAX || taken[k] {
            continue;
        }
        result[j] = k;
        taken[k] = true;
    }

    // Ambiguity: a competing mode with a genuinely different eigenvalue is
    // as close to the prediction and no better separated by eigenvectors.
    // Ties produced by the mirror symmetry zeta -> -conj(zeta) (branches
    // meeting on or leaving the imaginary axis) are resolved deterministically.
    for j in 0..n {
        let k = result[j];
        let mirrored = (0..n).any(|j2| j2 != j && (predicted[j2] + predicted[j].conj()).norm() <= 1e-6 * scale);
        if mirrored {
            continue;
        }
        for k2 in 0..n {
            if k2 == k {
                continue;
            }
            let distinct = (modes[k].zeta - modes[k2].zeta).norm() > 1e-8 * scale;
            let mirror_pair = (modes[k].zeta + modes[k2].zeta.conj()).norm() <= 1e-8 * scale;
            let tied = (cost[j][k2] - cost[j][k]).abs() <= 1e-6 * cost[j][k].max(1e-12);
            let weak = (overlap[j][k] - overlap[j][k2]).abs() < 0.1;
            if distinct && !mirror_pair && tied && weak {
                return Err(Error::TrackingAmbiguity { beta });
            }
        }
    }
    Ok(result)
}

/// How an error sequence decays with `beta`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
#[serde(tag = "kind", content = "value", rename_all = "snake_case")]
pub enum DecayFit {
    /// Fitted exponent `p` in `err ~ beta^{-p}`.
    Exponent(f64),
    /// Error identically zero on the window.
    Exact,
    /// Too few points above the rounding floor to fit.
    Floor,
}

impl DecayFit {
    pub fn meets(self, required: f64) -> bool {
        match self {
            DecayFit::Exponent(p) => p >= required,
            DecayFit::Exact | DecayFit::Floor => true,
        }
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct BranchAsymptotics {
    /// 1-based branch number as in the sweep.
    pub branch: usize,
    pub kind: BranchKind,
    pub rho: f64,
    /// `b_j` for high-loss branches, `d_j` for low-loss branches.
    pub slope: f64,
    pub frequency_fit: DecayFit,
    pub frequency_order: u32,
    pub damping_fit: Option<DecayFit>,
    pub damping_order: u32,
    /// Least-squares coefficient of `beta^{-1}` in `Re zeta`.
    pub odd_coefficient: f64,
    /// `-Im zeta * beta` (low loss) or `-Im zeta / beta` (high loss) at the top of the grid.
    pub scaled_damping: f64,
    /// Whether `|Re zeta|` vanishes at the top of the grid.
    pub overdamped: bool,
    /// Sign of the Q-factor trend over the window: -1, 0 (mixed) or 1.
    pub q_trend: i8,
    pub pass: bool,
}

#[derive(Debug, Clone, Serialize)]
pub struct AsymptoticTable {
    pub window: (f64, f64),
    pub branches: Vec<BranchAsymptotics>,
}

impl AsymptoticTable {
    pub fn all_pass(&self) -> bool {
        self.branches.iter().all(|b| b.pass)
    }
}

/// Minimum accepted exponent for a given theoretical order.
pub fn required_exponent(order: u32) -> f64 {
    match order {
        1 => 0.8,
        2 => 1.8,
        _ => 2.5,
    }
}

/// Least-squares slope of `ln err` against `ln beta`, skipping values at or
/// below `floor`.
pub fn fit_decay(betas: &[f64], errors: &[f64], floors: &[f64]) -> DecayFit {
    if errors.iter().all(|&e| e == 0.0) {
        return DecayFit::Exact;
    }
    let pts: Vec<(f64, f64)> = betas
        .iter()
        .zip(errors)
        .zip(floors)
        .filter(|((_, &e), &f)| e > f)
        .map(|((&b, &e), _)| (b.ln(), e.ln()))
        .collect();
    if pts.len() < 3 {
        return DecayFit::Floor;
    }
    let n = pts.len() as f64;
    let mx = pts.iter().map(|p| p.0).sum::<f64>() / n;
    let my = pts.iter().map(|p| p.1).sum::<f64>() / n;
    let sxx: f64 = pts.iter().map(|p| (p.0 - mx).powi(2)).sum();
    let sxy: f64 = pts.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
    if sxx == 0.0 {
        return DecayFit::Floor;
    }
    DecayFit::Exponent(-sxy / sxx)
}

/// Least-squares fit `y = c0 + c1 t + c2 t^2` with `t = 1 / beta`; returns `c1`.
fn odd_coefficient(betas: &[f64], ys: &[f64]) -> f64 {
    if betas.len() < 3 {
        return 0.0;
    }
    let mut ata = nalgebra::Matrix3::<f64>::zeros();
    let mut aty = nalgebra::Vector3::<f64>::zeros();
    let t0 = betas.iter().map(|b| 1.0 / b).fold(0.0, f64::max);
    for (&b, &y) in betas.iter().zip(ys) {
        let t = (1.0 / b) / t0;
        let row = nalgebra::Vector3::new(1.0, t, t * t);
        ata += row * row.transpose();
        aty += row * y;
    }
    match ata.try_inverse() {
        Some(inv) => (inv * aty)[1] / t0,
        None => 0.0,
    }
}

/// Fits the decay of each branch's deviation from its expansion over
/// `window` (default: the top decade of the grid).
pub fn asymptotic_residuals(
    sweep: &SweepResult,
    model: &AsymptoticModel,
    window: Option<(f64, f64)>,
) -> Result<AsymptoticTable> {
    let top = *sweep.beta_grid.last().ok_or(Error::InvalidGrid("empty grid".into()))?;
    let required = 1e3 * (2.0 * model.omega_max / model.b_min).max(1.0);
    if top < required * (1.0 - 1e-12) {
        return Err(Error::InsufficientRange { top, required });
    }
    let (lo, hi) = window.unwrap_or((top / 10.0, top));
    let idx: Vec<usize> = (0..sweep.beta_grid.len())
        .filter(|&k| sweep.beta_grid[k] >= lo * (1.0 - 1e-12) && sweep.beta_grid[k] <= hi * (1.0 + 1e-12))
        .collect();
    if idx.len() < 3 {
        return Err(Error::InvalidGrid("fewer than 3 grid points in the fit window".into()));
    }
    let k_top = *idx.last().unwrap();
    let beta_top = sweep.beta_grid[k_top];

    // Match branches to predictions at the top of the window.
    let preds = model.predictions(beta_top);
    let nb = sweep.branches.len();
    let mut pairs: Vec<(usize, usize, f64)> = Vec::with_capacity(nb * preds.len());
    for j in 0..nb {
        let z = sweep.branches[j][k_top].zeta;
        for (p, pred) in preds.iter().enumerate() {
            pairs.push((j, p, (z - pred.2).norm()));
        }
    }
    pairs.sort_by(|a, b| a.2.total_cmp(&b.2));
    let mut match_of = vec![usize::MAX; nb];
    let mut used = vec![false; preds.len()];
    for (j, p, _) in pairs {
        if match_of[j] == usize::MAX && !used[p] {
            match_of[j] = p;
            used[p] = true;
        }
    }

    let betas: Vec<f64> = idx.iter().map(|&k| sweep.beta_grid[k]).collect();
    let mut rows = Vec::with_capacity(nb);
    for j in 0..nb {
        let (kind, ci, _) = preds[match_of[j]];
        let (rho, slope) = match kind {
            BranchKind::HighLoss => (model.rho_highloss[ci], model.b_coeffs[ci]),
            BranchKind::LowLoss => (model.rho_lowloss[ci], model.d_coeffs[ci]),
        };
        let modes: Vec<&Mode> = idx.iter().map(|&k| &sweep.branches[j][k]).collect();
        let floors: Vec<f64> = modes.iter().map(|m| 4.0 * f64::EPSILON * m.zeta.norm().max(1e-300)).collect();
        let re_err: Vec<f64> = modes.iter().map(|m| (m.zeta.re - rho).abs()).collect();
        let frequency_fit = fit_decay(&betas, &re_err, &floors);
        let (damping_order, damping_fit) = match kind {
            BranchKind::HighLoss => {
                let err: Vec<f64> = modes.iter().map(|m| (m.damping - slope * m.beta).abs()).collect();
                (1, Some(fit_decay(&betas, &err, &floors)))
            }
            BranchKind::LowLoss if slope > 0.0 => {
                let err: Vec<f64> = modes.iter().map(|m| (m.damping - slope / m.beta).abs()).collect();
                (3, Some(fit_decay(&betas, &err, &floors)))
            }
            BranchKind::LowLoss => (3, None),
        };
        let res: Vec<f64> = modes.iter().map(|m| m.frequency).collect();
        let odd = odd_coefficient(&betas, &res);
        let last = modes[modes.len() - 1];
        let scaled_damping = match kind {
            BranchKind::HighLoss => last.damping / last.beta,
            BranchKind::LowLoss => last.damping * last.beta,
        };
        let qs: Vec<f64> = modes.iter().map(|m| m.q_factor).collect();
        let q_trend = if qs.windows(2).all(|w| w[1] <= w[0]) {
            -1
        } else if qs.windows(2).all(|w| w[1] >= w[0]) {
            1
        } else {
            0
        };
        let overdamped = last.frequency.abs() < 1e-9 * last.zeta.norm().max(1.0);
        let pass = frequency_fit.meets(required_exponent(2))
            && damping_fit.is_none_or(|f| f.meets(required_exponent(damping_order)));
        rows.push(BranchAsymptotics {
            branch: j + 1,
            kind,
            rho,
            slope,
            frequency_fit,
            frequency_order: 2,
            damping_fit,
            damping_order,
            odd_coefficient: odd,
            scaled_damping,
            overdamped,
            q_trend,
            pass,
        });
    }
    Ok(AsymptoticTable {
        window: (lo, hi),
        branches: rows,
    })
}

/// Maximal runs of grid points at which every branch has zero frequency.
pub fn fully_overdamped_intervals(sweep: &SweepResult, tol_re: f64) -> Vec<(f64, f64)> {
    let mut out = Vec::new();
    let mut start: Option<f64> = None;
    let mut last = 0.0;
    for (k, &beta) in sweep.beta_grid.iter().enumerate() {
        let all = sweep
            .branches
            .iter()
            .all(|b| b[k].frequency.abs() < tol_re * b[k].zeta.norm().max(1.0));
        match (all, start) {
            (true, None) => start = Some(beta),
            (false, Some(s)) => {
                out.push((s, last));
                start = None;
            }
            _ => {}
        }
        last = beta;
    }
    if let Some(s) = start {
        out.push((s, last));
    }
    out
}
