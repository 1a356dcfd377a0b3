//! Reduced spaces `𝕎 = ℝ × 𝕊^{q₁} × … × ℝ^{p×q}` and the closed convex cones that
//! describe the critical cone of `K` in spectral coordinates.

use nalgebra::{DMatrix, DVector};

use crate::epigraph::{project_anchored, project_epigraph, topk, Anchor, TopK};
use crate::error::{Error, Result};
use crate::scalar::{lit, Real};
use crate::spectral::{sym_eigen, thin_svd};

pub use crate::epigraph::{topk_abs, topk_sum};

/// A point of the reduced space: a scalar and a list of blocks.
///
/// Blocks are ordered as the `α` symmetric blocks, then the `β` symmetric
/// blocks, then the optional rectangular block.
#[derive(Debug, Clone, PartialEq)]
pub struct ReducedPoint<T: Real> {
    pub zeta: T,
    pub blocks: Vec<DMatrix<T>>,
}

impl<T: Real> ReducedPoint<T> {
    pub fn dot(&self, other: &Self) -> T {
        self.blocks.iter().zip(&other.blocks).fold(self.zeta * other.zeta, |s, (a, b)| s + a.dot(b))
    }

    pub fn norm(&self) -> T {
        self.dot(self).sqrt()
    }

    pub fn sub(&self, other: &Self) -> Self {
        Self {
            zeta: self.zeta - other.zeta,
            blocks: self.blocks.iter().zip(&other.blocks).map(|(a, b)| a - b).collect(),
        }
    }

    pub fn scale(&self, s: T) -> Self {
        Self { zeta: self.zeta * s, blocks: self.blocks.iter().map(|b| b * s).collect() }
    }
}

/// Orthogonal factors that diagonalize one block.
#[derive(Debug, Clone)]
pub enum BlockFactor<T: Real> {
    /// Eigenvectors of a symmetric block, columns matching nonincreasing eigenvalues.
    Sym(DMatrix<T>),
    /// Left factor and thin right factor of a rectangular block.
    Rect(DMatrix<T>, DMatrix<T>),
}

/// Spectral coordinates `κ(W)` of a reduced point with the factors used to re-dress them.
#[derive(Debug, Clone)]
pub struct SpectralVector<T: Real> {
    pub kappa_alpha: Vec<T>,
    pub kappa_beta: Vec<T>,
    pub factors: Vec<BlockFactor<T>>,
}

/// The cone `{(ζ, W) : Σ tr(W_α) + g(κ_β(W)) ≤ ζ}`, optionally intersected with
/// `{Σ tr(W_α) + ⟨u, κ_β(W)⟩ = ζ}`.
///
/// `g` is the top-`j` sum for [`TopK::Signed`] and the top-`j` absolute sum for
/// [`TopK::Absolute`]; the latter is used when a rectangular block is present.
#[derive(Debug, Clone)]
pub struct ReducedCone<T: Real> {
    pub kind: TopK,
    pub alpha_sizes: Vec<usize>,
    pub beta_sizes: Vec<usize>,
    /// Shape of the rectangular block, rows not exceeding columns.
    pub rect: Option<(usize, usize)>,
    pub j: usize,
    /// Weights on the flattened `κ_β`; `None` drops the equality.
    pub anchor: Option<Vec<T>>,
}

impl<T: Real> ReducedCone<T> {
    pub fn new(
        kind: TopK,
        alpha_sizes: Vec<usize>,
        beta_sizes: Vec<usize>,
        rect: Option<(usize, usize)>,
        j: usize,
        anchor: Option<Vec<T>>,
    ) -> Result<Self> {
        let rect = rect.filter(|&(p, _)| p > 0);
        if let Some((p, q)) = rect {
            if p > q {
                return Err(Error::Dimension(format!("rectangular block {p}x{q} is taller than wide")));
            }
        }
        let nb = beta_sizes.iter().sum::<usize>() + rect.map_or(0, |r| r.0);
        if j == 0 || j > nb {
            return Err(Error::InvalidInput(format!("top-j parameter {j} outside 1..={nb}")));
        }
        if let Some(u) = &anchor {
            if u.len() != nb {
                return Err(Error::Dimension(format!("anchor has {} weights, expected {nb}", u.len())));
            }
        }
        Ok(Self { kind, alpha_sizes, beta_sizes, rect, j, anchor })
    }

    /// Number of entries in `κ_β`.
    pub fn beta_len(&self) -> usize {
        self.beta_sizes.iter().sum::<usize>() + self.rect.map_or(0, |r| r.0)
    }

    fn block_count(&self) -> usize {
        self.alpha_sizes.len() + self.beta_sizes.len() + usize::from(self.rect.is_some())
    }

    /// The origin of the reduced space.
    pub fn zero_point(&self) -> ReducedPoint<T> {
        let mut blocks: Vec<DMatrix<T>> =
            self.alpha_sizes.iter().chain(&self.beta_sizes).map(|&q| DMatrix::zeros(q, q)).collect();
        if let Some((p, q)) = self.rect {
            blocks.push(DMatrix::zeros(p, q));
        }
        ReducedPoint { zeta: T::zero(), blocks }
    }

    pub fn check(&self, p: &ReducedPoint<T>) -> Result<()> {
        if p.blocks.len() != self.block_count() {
            return Err(Error::Dimension(format!(
                "reduced point has {} blocks, expected {}",
                p.blocks.len(),
                self.block_count()
            )));
        }
        for (blk, &q) in p.blocks.iter().zip(self.alpha_sizes.iter().chain(&self.beta_sizes)) {
            if blk.shape() != (q, q) {
                return Err(Error::Dimension(format!("block {:?} expected {q}x{q}", blk.shape())));
            }
        }
        if let Some(r) = self.rect {
            let last = p.blocks.last().expect("nonempty");
            if last.shape() != r {
                return Err(Error::Dimension(format!("rectangular block {:?} expected {r:?}", last.shape())));
            }
        }
        Ok(())
    }

    /// Eigenvalues and singular values of the blocks, with the diagonalizing factors.
    pub fn kappa(&self, p: &ReducedPoint<T>) -> Result<SpectralVector<T>> {
        self.check(p)?;
        let na = self.alpha_sizes.len();
        let ns = na + self.beta_sizes.len();
        let mut out = SpectralVector { kappa_alpha: vec![], kappa_beta: vec![], factors: vec![] };
        for (idx, blk) in p.blocks.iter().enumerate() {
            if idx < ns {
                let (vals, vecs) = sym_eigen(blk);
                if idx < na {
                    out.kappa_alpha.extend(vals.iter().copied());
                } else {
                    out.kappa_beta.extend(vals.iter().copied());
                }
                out.factors.push(BlockFactor::Sym(vecs));
            } else {
                let (s, u, v1) = thin_svd(blk);
                out.kappa_beta.extend(s.iter().copied());
                out.factors.push(BlockFactor::Rect(u, v1));
            }
        }
        Ok(out)
    }

    /// Rebuilds blocks from new spectral values and stored factors.
    pub fn redress(&self, zeta: T, d_alpha: &[T], d_beta: &[T], sv: &SpectralVector<T>) -> ReducedPoint<T> {
        let mut vals = d_alpha.iter().chain(d_beta).copied();
        let blocks = sv
            .factors
            .iter()
            .map(|f| match f {
                BlockFactor::Sym(r) => {
                    let d = DVector::from_iterator(r.ncols(), vals.by_ref().take(r.ncols()));
                    r * DMatrix::from_diagonal(&d) * r.transpose()
                }
                BlockFactor::Rect(u, v1) => {
                    let d = DVector::from_iterator(u.ncols(), vals.by_ref().take(u.ncols()));
                    u * DMatrix::from_diagonal(&d) * v1.transpose()
                }
            })
            .collect();
        ReducedPoint { zeta, blocks }
    }

    fn lhs(&self, sv: &SpectralVector<T>) -> (T, T) {
        let tr = sv.kappa_alpha.iter().fold(T::zero(), |s, &v| s + v);
        let g = topk(self.kind, &sv.kappa_beta, self.j);
        let lin = self
            .anchor
            .as_ref()
            .map_or(T::zero(), |u| u.iter().zip(&sv.kappa_beta).fold(T::zero(), |s, (&a, &b)| s + a * b));
        (tr + g, tr + lin)
    }

    /// Membership with absolute tolerance `tol`.
    pub fn contains(&self, p: &ReducedPoint<T>, tol: T) -> Result<bool> {
        let sv = self.kappa(p)?;
        let (ineq, eq) = self.lhs(&sv);
        let ok = ineq <= p.zeta + tol && (self.anchor.is_none() || (eq - p.zeta).abs() <= tol);
        Ok(ok)
    }

    /// Euclidean projection onto the cone.
    pub fn project(&self, p: &ReducedPoint<T>) -> Result<ReducedPoint<T>> {
        let sv = self.kappa(p)?;
        let sol = match &self.anchor {
            None => project_epigraph(self.kind, p.zeta, &sv.kappa_alpha, &sv.kappa_beta, self.j)?,
            Some(u) => project_anchored(
                self.kind,
                p.zeta,
                &sv.kappa_alpha,
                &sv.kappa_beta,
                self.j,
                &Anchor { u: u.clone(), tol: lit(1e-12) },
            )?,
        };
        Ok(self.redress(sol.eta, &sol.d_alpha, &sol.d_beta, &sv))
    }

    /// Polar membership: the projection onto the cone vanishes.
    pub fn contains_polar(&self, p: &ReducedPoint<T>, tol: T) -> Result<bool> {
        Ok(self.project(p)?.norm() <= tol)
    }
}

/// Membership in the reduced cone.
pub fn in_c<T: Real>(cone: &ReducedCone<T>, p: &ReducedPoint<T>, tol: T) -> Result<bool> {
    cone.contains(p, tol)
}

/// Projection onto the reduced cone.
pub fn project_c<T: Real>(cone: &ReducedCone<T>, p: &ReducedPoint<T>) -> Result<ReducedPoint<T>> {
    cone.project(p)
}

/// Membership in the negative polar of the reduced cone.
pub fn in_c_polar<T: Real>(cone: &ReducedCone<T>, p: &ReducedPoint<T>, tol: T) -> Result<bool> {
    cone.contains_polar(p, tol)
}
