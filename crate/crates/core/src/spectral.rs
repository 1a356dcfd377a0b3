//! Ordered singular value frames and the elementary matrix operators built on them.
//!
//! A frame of `X` (size `m × n`, `m ≤ n`) is `X = U [Diag(σ) 0] Vᵀ` with `σ`
//! nonincreasing. Indices split into `a` (nonzero singular values), `b` (zero
//! singular values) and `c` (the trailing `n − m` columns of `V`). Nonzero
//! singular values that agree up to `group_tol` form groups; `b` is appended
//! as the final group when nonempty.

use std::ops::Range;

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};
use crate::scalar::{lit, Real};

/// Relative tolerance used to classify a singular value as zero.
pub const ZERO_REL_TOL: f64 = 1e-9;
/// Relative tolerance used to merge nearly equal singular values.
pub const GROUP_REL_TOL: f64 = 1e-8;

/// Ordered SVD with index bookkeeping.
#[derive(Debug, Clone)]
pub struct SvdFrame<T: Real> {
    /// `m × m` orthogonal left factor.
    pub u: DMatrix<T>,
    /// `n × n` orthogonal right factor `[V₁ V₂]`.
    pub v: DMatrix<T>,
    /// Singular values, nonincreasing. Values inside a group are replaced by
    /// the group mean and values in `b` by exact zeros.
    pub sigma: DVector<T>,
    /// Singular values as returned by the decomposition, sorted.
    pub sigma_raw: DVector<T>,
    /// Indices with nonzero singular value, as a range `0..|a|`.
    pub a: Range<usize>,
    /// Indices with zero singular value.
    pub b: Range<usize>,
    /// Trailing column indices `m..n` of `V`.
    pub c: Range<usize>,
    /// Groups of equal singular values; the last entry is `b` when nonempty.
    pub groups: Vec<Range<usize>>,
    /// Distinct nonzero singular values, one per nonzero group.
    pub nu: Vec<T>,
    pub zero_tol: T,
    pub group_tol: T,
}

impl<T: Real> SvdFrame<T> {
    /// Frames `x` with the default relative tolerances.
    pub fn new(x: &DMatrix<T>) -> Result<Self> {
        let s1 = largest_singular_value(x)?;
        let (zt, gt) = default_tolerances(s1);
        svd_frame(x, zt, gt)
    }

    pub fn m(&self) -> usize {
        self.u.nrows()
    }

    pub fn n(&self) -> usize {
        self.v.nrows()
    }

    /// `Uᵀ Z V`.
    pub fn to_frame(&self, z: &DMatrix<T>) -> DMatrix<T> {
        self.u.transpose() * z * &self.v
    }

    /// `U Z Vᵀ`.
    pub fn from_frame(&self, z: &DMatrix<T>) -> DMatrix<T> {
        &self.u * z * self.v.transpose()
    }

    /// `U [Diag(s) 0] Vᵀ`.
    pub fn redress(&self, s: &DVector<T>) -> DMatrix<T> {
        let (m, n) = (self.m(), self.n());
        let mut d = DMatrix::zeros(m, n);
        for i in 0..m {
            d[(i, i)] = s[i];
        }
        self.from_frame(&d)
    }

    /// Number of nonzero groups (`r`).
    pub fn r(&self) -> usize {
        self.nu.len()
    }
}

/// Default absolute tolerances `(zero_tol, group_tol)` for a matrix with largest singular value `s1`.
pub fn default_tolerances<T: Real>(s1: T) -> (T, T) {
    (lit::<T>(ZERO_REL_TOL) * s1, lit::<T>(GROUP_REL_TOL) * s1.max(T::one()))
}

fn largest_singular_value<T: Real>(x: &DMatrix<T>) -> Result<T> {
    check_finite(x)?;
    let sv = singular_values(x);
    Ok(sv.iter().copied().fold(T::zero(), |a, b| a.max(b)))
}

/// Singular values of any matrix, nonincreasing, via one-sided Jacobi.
pub fn singular_values<T: Real>(x: &DMatrix<T>) -> DVector<T> {
    let (mut sv, _, _) = if x.nrows() <= x.ncols() { jacobi_svd(x) } else { jacobi_svd(&x.transpose()) };
    sv.as_mut_slice().sort_by(|a, b| b.partial_cmp(a).unwrap_or(std::cmp::Ordering::Equal));
    sv
}

fn check_finite<T: Real>(x: &DMatrix<T>) -> Result<()> {
    if x.iter().any(|v| !v.is_finite()) {
        return Err(Error::InvalidInput("matrix has non-finite entries".into()));
    }
    Ok(())
}

/// Ordered SVD of `x` (`m ≤ n`) with absolute tolerances for zero detection and grouping.
pub fn svd_frame<T: Real>(x: &DMatrix<T>, zero_tol: T, group_tol: T) -> Result<SvdFrame<T>> {
    check_finite(x)?;
    let (m, n) = x.shape();
    if m > n {
        return Err(Error::Dimension(format!("frame requires m <= n, got {m}x{n}")));
    }
    if m == 0 {
        return Err(Error::Dimension("frame requires at least one row".into()));
    }
    if !(zero_tol >= T::zero()) || !(group_tol > T::zero()) {
        return Err(Error::InvalidInput("tolerances must be nonnegative/positive".into()));
    }
    let (sv, u_raw, v_raw) = jacobi_svd(x);
    let vt_raw = v_raw.transpose();

    let mut order: Vec<usize> = (0..m).collect();
    order.sort_by(|&i, &j| sv[j].partial_cmp(&sv[i]).unwrap_or(std::cmp::Ordering::Equal));

    let mut u = DMatrix::zeros(m, m);
    let mut v1 = DMatrix::zeros(n, m);
    let mut sigma_raw = DVector::zeros(m);
    for (dst, &src) in order.iter().enumerate() {
        sigma_raw[dst] = sv[src].max(T::zero());
        let mut col = u_raw.column(src).clone_owned();
        let mut row = vt_raw.row(src).transpose();
        if needs_flip(&col) {
            col.neg_mut();
            row.neg_mut();
        }
        u.set_column(dst, &col);
        v1.set_column(dst, &row);
    }
    let v = complete_orthonormal(&v1);

    let n_a = sigma_raw.iter().filter(|&&s| s > zero_tol).count();
    let mut groups = Vec::new();
    let mut nu = Vec::new();
    let mut sigma = sigma_raw.clone();
    let mut start = 0;
    while start < n_a {
        let mut end = start + 1;
        while end < n_a && sigma_raw[end - 1] - sigma_raw[end] <= group_tol {
            end += 1;
        }
        let mut mean = T::zero();
        for i in start..end {
            mean += sigma_raw[i];
        }
        mean /= T::from_usize(end - start).unwrap();
        for i in start..end {
            sigma[i] = mean;
        }
        groups.push(start..end);
        nu.push(mean);
        start = end;
    }
    for i in n_a..m {
        sigma[i] = T::zero();
    }
    if n_a < m {
        groups.push(n_a..m);
    }
    Ok(SvdFrame { u, v, sigma, sigma_raw, a: 0..n_a, b: n_a..m, c: m..n, groups, nu, zero_tol, group_tol })
}

/// One-sided Jacobi SVD of `x` (`m ≤ n`): returns `(σ, U, V₁)` with `x = U diag(σ) V₁ᵀ`, unordered.
///
/// Orthogonalizes the columns of `xᵀ` by plane rotations; accurate to working
/// precision even for nearly rank-deficient inputs.
fn jacobi_svd<T: Real>(x: &DMatrix<T>) -> (DVector<T>, DMatrix<T>, DMatrix<T>) {
    let (m, n) = x.shape();
    let mut a = x.transpose();
    let mut j = DMatrix::<T>::identity(m, m);
    let eps = T::default_epsilon();
    for _sweep in 0..80 {
        let mut rotated = false;
        for p in 0..m {
            for q in p + 1..m {
                let (mut alpha, mut beta, mut gamma) = (T::zero(), T::zero(), T::zero());
                for r in 0..n {
                    alpha += a[(r, p)] * a[(r, p)];
                    beta += a[(r, q)] * a[(r, q)];
                    gamma += a[(r, p)] * a[(r, q)];
                }
                if gamma.abs() <= eps * (alpha * beta).sqrt() || gamma == T::zero() {
                    continue;
                }
                rotated = true;
                let zeta = (beta - alpha) / (gamma * lit::<T>(2.0));
                let t = zeta.signum() / (zeta.abs() + (T::one() + zeta * zeta).sqrt());
                let t = if zeta == T::zero() { T::one() } else { t };
                let c = T::one() / (T::one() + t * t).sqrt();
                let s = c * t;
                for r in 0..n {
                    let (ap, aq) = (a[(r, p)], a[(r, q)]);
                    a[(r, p)] = c * ap - s * aq;
                    a[(r, q)] = s * ap + c * aq;
                }
                for r in 0..m {
                    let (jp, jq) = (j[(r, p)], j[(r, q)]);
                    j[(r, p)] = c * jp - s * jq;
                    j[(r, q)] = s * jp + c * jq;
                }
            }
        }
        if !rotated {
            break;
        }
    }
    let mut sigma = DVector::zeros(m);
    let mut v1 = DMatrix::zeros(n, m);
    let mut missing = Vec::new();
    let scale = a.norm();
    for p in 0..m {
        let nr = a.column(p).norm();
        sigma[p] = nr;
        if nr > scale * eps * lit::<T>(1e-3) && nr > T::zero() {
            v1.set_column(p, &(a.column(p) / nr));
        } else {
            missing.push(p);
        }
    }
    if !missing.is_empty() {
        let known: Vec<usize> = (0..m).filter(|p| !missing.contains(p)).collect();
        let full = if known.is_empty() {
            DMatrix::identity(n, n)
        } else {
            let cols: Vec<DVector<T>> = known.iter().map(|&p| v1.column(p).clone_owned()).collect();
            complete_orthonormal(&DMatrix::from_columns(&cols))
        };
        for (q, &p) in missing.iter().enumerate() {
            v1.set_column(p, &full.column(known.len() + q));
        }
    }
    (sigma, j, v1)
}

/// Sign rule: the entry of largest magnitude must be nonnegative (first such entry on ties).
fn needs_flip<T: Real>(col: &DVector<T>) -> bool {
    let mut best = 0;
    for i in 1..col.len() {
        if col[i].abs() > col[best].abs() {
            best = i;
        }
    }
    !col.is_empty() && col[best] < T::zero()
}

/// Extends the orthonormal columns of `v1` (`n × m`) to an `n × n` orthogonal matrix.
pub(crate) fn complete_orthonormal<T: Real>(v1: &DMatrix<T>) -> DMatrix<T> {
    let (n, m) = v1.shape();
    let mut basis: Vec<DVector<T>> = (0..m).map(|j| v1.column(j).clone_owned()).collect();
    while basis.len() < n {
        let mut best: Option<(T, DVector<T>)> = None;
        for j in 0..n {
            let mut e = DVector::zeros(n);
            e[j] = T::one();
            for _ in 0..2 {
                for q in &basis {
                    let c = q.dot(&e);
                    e.axpy(-c, q, T::one());
                }
            }
            let nr = e.norm();
            if best.as_ref().is_none_or(|(b, _)| nr > *b) {
                best = Some((nr, e));
            }
        }
        let (nr, e) = best.expect("n > 0");
        basis.push(e / nr);
    }
    DMatrix::from_columns(&basis)
}

/// Symmetric part `(Z + Zᵀ)/2`.
pub fn sym_part<T: Real>(z: &DMatrix<T>) -> Result<DMatrix<T>> {
    square(z)?;
    Ok((z + z.transpose()) * lit::<T>(0.5))
}

/// Skew part `(Z − Zᵀ)/2`.
pub fn skew_part<T: Real>(z: &DMatrix<T>) -> Result<DMatrix<T>> {
    square(z)?;
    Ok((z - z.transpose()) * lit::<T>(0.5))
}

fn square<T: Real>(z: &DMatrix<T>) -> Result<()> {
    if z.nrows() != z.ncols() {
        return Err(Error::Dimension(format!("expected square matrix, got {}x{}", z.nrows(), z.ncols())));
    }
    Ok(())
}

pub(crate) fn sym<T: Real>(z: &DMatrix<T>) -> DMatrix<T> {
    (z + z.transpose()) * lit::<T>(0.5)
}

pub(crate) fn skew<T: Real>(z: &DMatrix<T>) -> DMatrix<T> {
    (z - z.transpose()) * lit::<T>(0.5)
}

/// Divided-difference coefficients of the spectral map `σ ↦ σ̄`.
#[derive(Debug, Clone, PartialEq)]
pub struct HadamardCoefficients<T: Real> {
    /// `(σ̄_i − σ̄_j)/(σ_i − σ_j)` where `σ_i ≠ σ_j`, else 0.
    pub e1: DMatrix<T>,
    /// `(σ̄_i + σ̄_j)/(σ_i + σ_j)` where `σ_i + σ_j ≠ 0`, else 0.
    pub e2: DMatrix<T>,
    /// `σ̄_i/σ_i` where `σ_i ≠ 0`, else 0; `m × (n − m)`.
    pub f: DMatrix<T>,
}

/// Builds the coefficient matrices for `n` columns; denominators at most `denom_tol` give 0.
pub fn hadamard_coeffs<T: Real>(
    sigma_bar: &DVector<T>,
    sigma: &DVector<T>,
    n: usize,
    denom_tol: T,
) -> Result<HadamardCoefficients<T>> {
    let m = sigma.len();
    if sigma_bar.len() != m {
        return Err(Error::Dimension(format!("sigma_bar has length {}, sigma has length {m}", sigma_bar.len())));
    }
    if n < m {
        return Err(Error::Dimension(format!("column count {n} below row count {m}")));
    }
    let e1 = DMatrix::from_fn(m, m, |i, j| {
        let den = sigma[i] - sigma[j];
        if den.abs() > denom_tol {
            (sigma_bar[i] - sigma_bar[j]) / den
        } else {
            T::zero()
        }
    });
    let e2 = DMatrix::from_fn(m, m, |i, j| {
        let den = sigma[i] + sigma[j];
        if den.abs() > denom_tol {
            (sigma_bar[i] + sigma_bar[j]) / den
        } else {
            T::zero()
        }
    });
    let f =
        DMatrix::from_fn(m, n - m, |i, _| if sigma[i].abs() > denom_tol { sigma_bar[i] / sigma[i] } else { T::zero() });
    Ok(HadamardCoefficients { e1, e2, f })
}

/// `[[0, Z], [Zᵀ, 0]]`.
pub fn b_operator<T: Real>(z: &DMatrix<T>) -> DMatrix<T> {
    let (m, n) = z.shape();
    let mut out = DMatrix::zeros(m + n, m + n);
    out.view_mut((0, m), (m, n)).copy_from(z);
    out.view_mut((m, 0), (n, m)).copy_from(&z.transpose());
    out
}

/// Orthogonal eigenbasis of `[[0, X], [Xᵀ, 0]]` built from a frame of `X`.
///
/// Columns are ordered so that the eigenvalues read
/// `(σ_a, σ_b, 0_c, −σ_b, −σ_a reversed)`, i.e. nonincreasing.
pub fn build_pbar<T: Real>(frame: &SvdFrame<T>) -> DMatrix<T> {
    let (m, n) = (frame.m(), frame.n());
    let s = lit::<T>(std::f64::consts::FRAC_1_SQRT_2);
    let mut p = DMatrix::zeros(m + n, m + n);
    let na = frame.a.len();
    for i in 0..m {
        for r in 0..m {
            p[(r, i)] = frame.u[(r, i)] * s;
        }
        for r in 0..n {
            p[(m + r, i)] = frame.v[(r, i)] * s;
        }
    }
    for (q, j) in frame.c.clone().enumerate() {
        for r in 0..n {
            p[(m + r, m + q)] = frame.v[(r, j)];
        }
    }
    let off = m + (n - m);
    for (q, i) in frame.b.clone().enumerate() {
        for r in 0..m {
            p[(r, off + q)] = frame.u[(r, i)] * s;
        }
        for r in 0..n {
            p[(m + r, off + q)] = -frame.v[(r, i)] * s;
        }
    }
    let off = off + frame.b.len();
    for q in 0..na {
        let i = na - 1 - q;
        for r in 0..m {
            p[(r, off + q)] = frame.u[(r, i)] * s;
        }
        for r in 0..n {
            p[(m + r, off + q)] = -frame.v[(r, i)] * s;
        }
    }
    p
}

/// Eigenvalues of `[[0, X], [Xᵀ, 0]]` in the column order of [`build_pbar`], for singular values `s`.
pub fn pbar_eigenvalues<T: Real>(s: &DVector<T>, frame: &SvdFrame<T>) -> DVector<T> {
    let (m, n) = (frame.m(), frame.n());
    let na = frame.a.len();
    let mut ev = DVector::zeros(m + n);
    for i in 0..m {
        ev[i] = s[i];
    }
    let off = n;
    for (q, i) in frame.b.clone().enumerate() {
        ev[off + q] = -s[i];
    }
    let off = off + frame.b.len();
    for q in 0..na {
        ev[off + q] = -s[na - 1 - q];
    }
    ev
}

/// Symmetric eigendecomposition with eigenvalues nonincreasing and the frame sign rule on eigenvectors.
pub fn sym_eigen<T: Real>(w: &DMatrix<T>) -> (DVector<T>, DMatrix<T>) {
    let q = w.nrows();
    if q == 0 {
        return (DVector::zeros(0), DMatrix::zeros(0, 0));
    }
    let eig = nalgebra::SymmetricEigen::new(sym(w));
    let mut order: Vec<usize> = (0..q).collect();
    order.sort_by(|&i, &j| eig.eigenvalues[j].partial_cmp(&eig.eigenvalues[i]).unwrap_or(std::cmp::Ordering::Equal));
    let mut vals = DVector::zeros(q);
    let mut vecs = DMatrix::zeros(q, q);
    for (dst, &src) in order.iter().enumerate() {
        vals[dst] = eig.eigenvalues[src];
        let mut col = eig.eigenvectors.column(src).clone_owned();
        if needs_flip(&col) {
            col.neg_mut();
        }
        vecs.set_column(dst, &col);
    }
    (vals, vecs)
}

/// Thin SVD of a `p × q` matrix with `p ≤ q`: singular values nonincreasing and factors
/// `U` (`p × p`), `V₁` (`q × p`) following the frame sign rule.
pub fn thin_svd<T: Real>(w: &DMatrix<T>) -> (DVector<T>, DMatrix<T>, DMatrix<T>) {
    let (p, q) = w.shape();
    if p == 0 {
        return (DVector::zeros(0), DMatrix::zeros(0, 0), DMatrix::zeros(q, 0));
    }
    let f = svd_frame(w, T::zero(), T::one()).expect("finite block");
    let v1 = f.v.columns(0, p).clone_owned();
    (f.sigma_raw, f.u, v1)
}
