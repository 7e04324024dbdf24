//! Dense complex matrix utilities and eigensolvers.
//!
//! Everything downstream works with small dense matrices (a few dozen rows at
//! most), so the routines here favour accuracy and determinism over speed.
//! General eigenproblems go through a Schur reduction followed by
//! back-substitution on the (quasi-)triangular factor. When the input is purely
//! real or purely imaginary the real Schur form is used instead, which keeps
//! conjugate-symmetric spectra exactly symmetric and real eigenvalues exactly
//! real.

use nalgebra::{Complex, DMatrix, DVector, Schur, SymmetricEigen, SVD};

use crate::error::{Error, Result};

pub type C64 = Complex<f64>;
pub type CMatrix = DMatrix<C64>;
pub type CVector = DVector<C64>;
pub type RMatrix = DMatrix<f64>;

/// Relative Hermitian-symmetry tolerance.
pub const TOL_HERM: f64 = 1e-12;
/// Relative threshold below which an eigenvalue counts as zero.
pub const TOL_RANK: f64 = 1e-10;
/// Relative eigenpair residual bound, scaled by the Frobenius norm.
pub const TOL_EIG: f64 = 1e-10;
/// Eigenvector matrices with smallest singular value below this are flagged.
pub const NEAR_DEFECTIVE: f64 = 1e-8;

const SCHUR_ITER_PER_DIM: usize = 200;

pub fn c64(re: f64, im: f64) -> C64 {
    Complex::new(re, im)
}

pub fn to_complex(m: &RMatrix) -> CMatrix {
    m.map(|x| c64(x, 0.0))
}

pub fn is_finite(m: &CMatrix) -> bool {
    m.iter().all(|z| z.re.is_finite() && z.im.is_finite())
}

/// Frobenius norm.
pub fn fro(m: &CMatrix) -> f64 {
    m.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt()
}

#[derive(Debug, Clone)]
pub struct EigenDecomposition {
    pub values: Vec<C64>,
    /// Unit-norm eigenvectors, aligned with `values`.
    pub vectors: Vec<CVector>,
    pub near_defective: bool,
    /// Smallest singular value of the matrix whose columns are `vectors`.
    pub min_vector_separation: f64,
}

impl EigenDecomposition {
    /// Largest relative residual `|M v - lambda v| / |M|_F` over all pairs.
    pub fn max_residual(&self, m: &CMatrix) -> f64 {
        let scale = fro(m).max(f64::MIN_POSITIVE);
        self.values
            .iter()
            .zip(&self.vectors)
            .map(|(&lam, v)| (m * v - v * lam).norm() / scale)
            .fold(0.0, f64::max)
    }
}

fn check_square(m: &CMatrix) -> Result<()> {
    if m.nrows() != m.ncols() {
        return Err(Error::DimensionMismatch(format!(
            "expected a square matrix, got {}x{}",
            m.nrows(),
            m.ncols()
        )));
    }
    if !is_finite(m) {
        return Err(Error::NonFinite);
    }
    Ok(())
}

/// Relative residual `|M - M*|_F / |M|_F` (zero for the zero matrix).
pub fn hermitian_residual(m: &CMatrix) -> f64 {
    let norm = fro(m);
    if norm == 0.0 {
        return 0.0;
    }
    fro(&(m - m.adjoint())) / norm
}

/// Eigendecomposition of a Hermitian matrix; values ascending.
pub fn eig_hermitian(m: &CMatrix, tol_herm: f64) -> Result<EigenDecomposition> {
    check_square(m)?;
    let residual = hermitian_residual(m);
    if residual > tol_herm {
        return Err(Error::NotHermitian { residual });
    }
    let n = m.nrows();
    if n == 0 {
        return Ok(EigenDecomposition {
            values: vec![],
            vectors: vec![],
            near_defective: false,
            min_vector_separation: 1.0,
        });
    }
    let h = (m + m.adjoint()).map(|z| z * 0.5);
    let eig = SymmetricEigen::try_new(h, f64::EPSILON, SCHUR_ITER_PER_DIM * n)
        .ok_or(Error::ConvergenceFailure)?;
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| eig.eigenvalues[a].total_cmp(&eig.eigenvalues[b]));
    let values = order.iter().map(|&i| c64(eig.eigenvalues[i], 0.0)).collect();
    let vectors = order
        .iter()
        .map(|&i| {
            let v = eig.eigenvectors.column(i).into_owned();
            let norm = v.norm();
            v / c64(norm, 0.0)
        })
        .collect();
    Ok(EigenDecomposition {
        values,
        vectors,
        near_defective: false,
        min_vector_separation: 1.0,
    })
}

/// Real symmetric eigendecomposition: ascending values and matching
/// orthonormal eigenvector columns.
pub fn eig_symmetric(m: &RMatrix, tol_herm: f64) -> Result<(Vec<f64>, RMatrix)> {
    let n = m.nrows();
    if n != m.ncols() {
        return Err(Error::DimensionMismatch(format!(
            "expected a square matrix, got {}x{}",
            n,
            m.ncols()
        )));
    }
    if m.iter().any(|x| !x.is_finite()) {
        return Err(Error::NonFinite);
    }
    let norm = m.norm();
    if norm > 0.0 {
        let residual = (m - m.transpose()).norm() / norm;
        if residual > tol_herm {
            return Err(Error::NotHermitian { residual });
        }
    }
    if n == 0 {
        return Ok((vec![], RMatrix::zeros(0, 0)));
    }
    let h = (m + m.transpose()) * 0.5;
    let eig = SymmetricEigen::try_new(h, f64::EPSILON, SCHUR_ITER_PER_DIM * n)
        .ok_or(Error::ConvergenceFailure)?;
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| eig.eigenvalues[a].total_cmp(&eig.eigenvalues[b]));
    let values = order.iter().map(|&i| eig.eigenvalues[i]).collect();
    let mut vectors = RMatrix::zeros(n, n);
    for (k, &i) in order.iter().enumerate() {
        let col = eig.eigenvectors.column(i);
        let col = col / col.norm();
        vectors.set_column(k, &col);
    }
    Ok((values, vectors))
}

#[derive(Debug, Clone, Copy)]
struct Block {
    start: usize,
    size: usize,
}

fn blocks_of(t: &CMatrix) -> Vec<Block> {
    let n = t.nrows();
    let mut blocks = Vec::new();
    let mut i = 0;
    while i < n {
        if i + 1 < n && t[(i + 1, i)] != c64(0.0, 0.0) {
            blocks.push(Block { start: i, size: 2 });
            i += 2;
        } else {
            blocks.push(Block { start: i, size: 1 });
            i += 1;
        }
    }
    blocks
}

fn block_eigenvalues(t: &CMatrix, b: Block) -> Vec<C64> {
    if b.size == 1 {
        return vec![t[(b.start, b.start)]];
    }
    let p = b.start;
    let (a, bb, c, d) = (t[(p, p)], t[(p, p + 1)], t[(p + 1, p)], t[(p + 1, p + 1)]);
    let mean = (a + d) * 0.5;
    let half = (a - d) * 0.5;
    let disc = half * half + bb * c;
    // Real 2x2 block with a complex pair: build the pair explicitly so that it
    // is exactly conjugate-symmetric.
    if a.im == 0.0 && bb.im == 0.0 && c.im == 0.0 && d.im == 0.0 && disc.re < 0.0 {
        let im = (-disc.re).sqrt();
        return vec![c64(mean.re, im), c64(mean.re, -im)];
    }
    let s = disc.sqrt();
    vec![mean + s, mean - s]
}

/// Solves `(T - lambda) y = 0` on a quasi-upper-triangular `T` with the
/// eigenvalue located in block `k`.
fn triangular_eigenvector(t: &CMatrix, blocks: &[Block], k: usize, lambda: C64) -> CVector {
    let n = t.nrows();
    let smallnum = f64::EPSILON * fro(t).max(f64::MIN_POSITIVE);
    let mut y = CVector::zeros(n);
    let bk = blocks[k];
    if bk.size == 1 {
        y[bk.start] = c64(1.0, 0.0);
    } else {
        let p = bk.start;
        let (a, b, c, d) = (t[(p, p)], t[(p, p + 1)], t[(p + 1, p)], t[(p + 1, p + 1)]);
        let v1 = (b, lambda - a);
        let v2 = (lambda - d, c);
        let (x0, x1) = if v1.0.norm_sqr() + v1.1.norm_sqr() >= v2.0.norm_sqr() + v2.1.norm_sqr() {
            v1
        } else {
            v2
        };
        let s = (x0.norm_sqr() + x1.norm_sqr()).sqrt();
        y[p] = x0 / s;
        y[p + 1] = x1 / s;
    }
    let end = bk.start + bk.size;
    for j in (0..k).rev() {
        let bj = blocks[j];
        let p = bj.start;
        let mut rhs = [c64(0.0, 0.0); 2];
        for (r, slot) in rhs.iter_mut().enumerate().take(bj.size) {
            let mut acc = c64(0.0, 0.0);
            for l in (p + bj.size)..end {
                acc += t[(p + r, l)] * y[l];
            }
            *slot = -acc;
        }
        if bj.size == 1 {
            let mut denom = t[(p, p)] - lambda;
            if denom.norm() < smallnum {
                denom = c64(smallnum, 0.0);
            }
            y[p] = rhs[0] / denom;
        } else {
            let mut m00 = t[(p, p)] - lambda;
            let m01 = t[(p, p + 1)];
            let m10 = t[(p + 1, p)];
            let mut m11 = t[(p + 1, p + 1)] - lambda;
            let mut det = m00 * m11 - m01 * m10;
            if det.norm() < smallnum * smallnum.max(1e-300) || det.norm() == 0.0 {
                m00 += smallnum;
                m11 += smallnum;
                det = m00 * m11 - m01 * m10;
                if det.norm() == 0.0 {
                    det = c64(smallnum, 0.0);
                }
            }
            y[p] = (rhs[0] * m11 - m01 * rhs[1]) / det;
            y[p + 1] = (m00 * rhs[1] - m10 * rhs[0]) / det;
        }
        let big = y.iter().map(|z| z.norm()).fold(0.0, f64::max);
        if big > 1e150 {
            y /= c64(big, 0.0);
        }
    }
    y
}

fn schur_eigen(q: &CMatrix, t: &CMatrix) -> (Vec<C64>, Vec<CVector>) {
    let blocks = blocks_of(t);
    let mut values = Vec::with_capacity(t.nrows());
    let mut vectors = Vec::with_capacity(t.nrows());
    for (k, &b) in blocks.iter().enumerate() {
        for lambda in block_eigenvalues(t, b) {
            let y = triangular_eigenvector(t, &blocks, k, lambda);
            let v = q * y;
            let norm = v.norm();
            values.push(lambda);
            vectors.push(v / c64(norm, 0.0));
        }
    }
    (values, vectors)
}

fn real_schur(x: &RMatrix) -> Result<(CMatrix, CMatrix)> {
    let n = x.nrows();
    let schur = Schur::try_new(x.clone(), f64::EPSILON, SCHUR_ITER_PER_DIM * n.max(1))
        .ok_or(Error::ConvergenceFailure)?;
    let (q, t) = schur.unpack();
    Ok((to_complex(&q), to_complex(&t)))
}

/// One or two steps of shifted inverse iteration for a poorly resolved pair.
fn polish(m: &CMatrix, lambda: C64, v: &CVector) -> CVector {
    let n = m.nrows();
    let shift = lambda + c64(f64::EPSILON * fro(m).max(1.0), 0.0);
    let shifted = m - CMatrix::identity(n, n) * shift;
    let lu = shifted.lu();
    let mut x = v.clone();
    for _ in 0..2 {
        match lu.solve(&x) {
            Some(next) if next.iter().all(|z| z.re.is_finite() && z.im.is_finite()) => {
                let norm = next.norm();
                if norm == 0.0 {
                    break;
                }
                x = next / c64(norm, 0.0);
            }
            _ => break,
        }
    }
    x
}

/// Smallest singular value of the matrix with the given columns.
pub fn min_singular_value(columns: &[CVector]) -> f64 {
    if columns.is_empty() {
        return 1.0;
    }
    let n = columns[0].len();
    let v = CMatrix::from_columns(columns);
    if v.nrows() != n {
        return 0.0;
    }
    let svd = SVD::new(v, false, false);
    svd.singular_values.iter().copied().fold(f64::INFINITY, f64::min)
}

/// General eigendecomposition of a square complex matrix.
pub fn eig_general(m: &CMatrix) -> Result<EigenDecomposition> {
    check_square(m)?;
    let n = m.nrows();
    if n == 0 {
        return Ok(EigenDecomposition {
            values: vec![],
            vectors: vec![],
            near_defective: false,
            min_vector_separation: 1.0,
        });
    }
    let (mut values, mut vectors) = if m.iter().all(|z| z.re == 0.0) {
        // m = i X with X real: eigenvalues are i times those of X.
        let x = m.map(|z| z.im);
        let (q, t) = real_schur(&x)?;
        let (vals, vecs) = schur_eigen(&q, &t);
        (vals.into_iter().map(|z| z * c64(0.0, 1.0)).collect(), vecs)
    } else if m.iter().all(|z| z.im == 0.0) {
        let x = m.map(|z| z.re);
        let (q, t) = real_schur(&x)?;
        schur_eigen(&q, &t)
    } else {
        let schur = Schur::try_new(m.clone(), f64::EPSILON, SCHUR_ITER_PER_DIM * n)
            .ok_or(Error::ConvergenceFailure)?;
        let (q, t) = schur.unpack();
        schur_eigen(&q, &t)
    };

    let scale = fro(m);
    for (lambda, v) in values.iter_mut().zip(vectors.iter_mut()) {
        let res = (m * &*v - &*v * *lambda).norm();
        if res > TOL_EIG * scale {
            let better = polish(m, *lambda, v);
            let res_better = (m * &better - &better * *lambda).norm();
            if res_better < res {
                *v = better;
            }
        }
    }
    // Deterministic phase: largest component real and positive.
    for v in vectors.iter_mut() {
        normalize_phase(v);
    }
    let sep = min_singular_value(&vectors);
    // Keep eigenvalues bitwise as computed; only tidy signed zeros.
    for z in values.iter_mut() {
        if z.re == 0.0 {
            z.re = 0.0;
        }
        if z.im == 0.0 {
            z.im = 0.0;
        }
    }
    Ok(EigenDecomposition {
        values,
        vectors,
        near_defective: sep < NEAR_DEFECTIVE,
        min_vector_separation: sep,
    })
}

/// Rotates `v` so that its largest-magnitude entry is real and positive.
/// Purely real or purely imaginary vectors stay in their class.
pub fn normalize_phase(v: &mut CVector) {
    let mut best = 0;
    let mut best_norm = -1.0;
    for (i, z) in v.iter().enumerate() {
        let nz = z.norm();
        if nz > best_norm * (1.0 + 1e-12) {
            best = i;
            best_norm = nz;
        }
    }
    if best_norm <= 0.0 {
        return;
    }
    let z = v[best];
    let phase = z.conj() / c64(z.norm(), 0.0);
    for x in v.iter_mut() {
        *x *= phase;
    }
    v[best] = c64(v[best].norm(), 0.0);
}

/// Orthonormal basis spanning the same subspace as `vectors`, chosen
/// canonically (pivoted Gram-Schmidt on the columns of the orthogonal
/// projector) and ordered by pivot index.
pub fn canonical_basis(vectors: &[CVector], n: usize) -> Vec<CVector> {
    let k = vectors.len();
    if k == 0 {
        return vec![];
    }
    let mut proj = CMatrix::zeros(n, n);
    for v in vectors {
        proj += v * v.adjoint();
    }
    let mut chosen: Vec<(usize, CVector)> = Vec::with_capacity(k);
    let mut residuals: Vec<CVector> = (0..n).map(|i| proj.column(i).into_owned()).collect();
    for _ in 0..k {
        let mut best = None;
        let mut best_norm = 0.0;
        for (i, r) in residuals.iter().enumerate() {
            if chosen.iter().any(|(j, _)| *j == i) {
                continue;
            }
            let nr = r.norm();
            if nr > best_norm * (1.0 + 1e-9) {
                best_norm = nr;
                best = Some(i);
            }
        }
        let Some(i) = best else { break };
        if best_norm <= 1e-12 {
            break;
        }
        let u = &residuals[i] / c64(best_norm, 0.0);
        for r in residuals.iter_mut() {
            let c = u.dotc(r);
            *r -= &u * c;
        }
        chosen.push((i, u));
    }
    chosen.sort_by_key(|(i, _)| *i);
    chosen.into_iter().map(|(_, u)| u).collect()
}

/// Orthonormal basis of the numerical kernel of a Hermitian positive
/// semidefinite matrix.
pub fn kernel_basis(m: &CMatrix, tol_rank: f64) -> Result<Vec<CVector>> {
    let eig = eig_hermitian(m, TOL_HERM)?;
    let lam_max = eig.values.iter().map(|z| z.re.abs()).fold(0.0, f64::max);
    let kernel: Vec<CVector> = eig
        .values
        .iter()
        .zip(&eig.vectors)
        .filter(|(z, _)| z.re <= tol_rank * lam_max)
        .map(|(_, v)| v.clone())
        .collect();
    Ok(canonical_basis(&kernel, m.nrows()))
}

/// Real orthonormal basis (as columns) of the numerical kernel of a real
/// symmetric positive semidefinite matrix, chosen canonically as in
/// [`canonical_basis`].
pub fn real_kernel_basis(m: &RMatrix, tol_rank: f64) -> Result<RMatrix> {
    let n = m.nrows();
    let (values, vectors) = eig_symmetric(m, TOL_HERM)?;
    let lam_max = values.iter().map(|x| x.abs()).fold(0.0, f64::max);
    let kernel: Vec<usize> = (0..n).filter(|&i| values[i] <= tol_rank * lam_max).collect();
    let k = kernel.len();
    let mut proj = RMatrix::zeros(n, n);
    for &i in &kernel {
        let v = vectors.column(i);
        proj += v * v.transpose();
    }
    let mut residuals: Vec<DVector<f64>> = (0..n).map(|i| proj.column(i).into_owned()).collect();
    let mut chosen: Vec<(usize, DVector<f64>)> = Vec::with_capacity(k);
    for _ in 0..k {
        let mut best = None;
        let mut best_norm = 0.0;
        for (i, r) in residuals.iter().enumerate() {
            if chosen.iter().any(|(j, _)| *j == i) {
                continue;
            }
            let nr = r.norm();
            if nr > best_norm * (1.0 + 1e-9) {
                best_norm = nr;
                best = Some(i);
            }
        }
        let Some(i) = best else { break };
        if best_norm <= 1e-12 {
            break;
        }
        let u = &residuals[i] / best_norm;
        for r in residuals.iter_mut() {
            let c = u.dot(r);
            *r -= &u * c;
        }
        chosen.push((i, u));
    }
    chosen.sort_by_key(|(i, _)| *i);
    let mut out = RMatrix::zeros(n, chosen.len());
    for (c, (_, u)) in chosen.iter().enumerate() {
        out.set_column(c, u);
    }
    Ok(out)
}

/// Numerical rank of a Hermitian positive semidefinite matrix.
pub fn psd_rank(m: &CMatrix, tol_rank: f64) -> Result<usize> {
    Ok(m.nrows() - kernel_basis(m, tol_rank)?.len())
}

/// The k x k matrix with entries `(b_i, M b_j)`.
pub fn restrict(m: &CMatrix, basis: &[CVector]) -> Result<CMatrix> {
    if m.nrows() != m.ncols() {
        return Err(Error::DimensionMismatch("restrict needs a square matrix".into()));
    }
    if let Some(b) = basis.iter().find(|b| b.len() != m.nrows()) {
        return Err(Error::DimensionMismatch(format!(
            "basis vector of length {} for a {}x{} matrix",
            b.len(),
            m.nrows(),
            m.ncols()
        )));
    }
    let k = basis.len();
    let images: Vec<CVector> = basis.iter().map(|b| m * b).collect();
    Ok(CMatrix::from_fn(k, k, |i, j| basis[i].dotc(&images[j])))
}

/// Matrix whose columns are the given vectors (n x k).
pub fn columns(vectors: &[CVector], n: usize) -> CMatrix {
    if vectors.is_empty() {
        return CMatrix::zeros(n, 0);
    }
    CMatrix::from_columns(vectors)
}

/// Hausdorff-type distance between two spectra of equal cardinality, using
/// greedy nearest-neighbour matching under the metric `dist`.
pub fn matched_distance<F>(a: &[C64], b: &[C64], dist: F) -> f64
where
    F: Fn(C64, C64) -> f64,
{
    if a.len() != b.len() {
        return f64::INFINITY;
    }
    let mut used = vec![false; b.len()];
    let mut worst: f64 = 0.0;
    // Match the most isolated points first so that clusters do not steal
    // partners from them.
    let mut pairs: Vec<(usize, usize, f64)> = Vec::with_capacity(a.len() * b.len());
    for (i, &x) in a.iter().enumerate() {
        for (j, &y) in b.iter().enumerate() {
            pairs.push((i, j, dist(x, y)));
        }
    }
    pairs.sort_by(|p, q| p.2.total_cmp(&q.2));
    let mut matched_a = vec![false; a.len()];
    for (i, j, d) in pairs {
        if matched_a[i] || used[j] {
            continue;
        }
        matched_a[i] = true;
        used[j] = true;
        worst = worst.max(d);
    }
    worst
}
