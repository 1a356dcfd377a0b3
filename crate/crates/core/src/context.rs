//! Structural data at a point `𝒳 = (t̄, X̄) + (ζ̄, Γ̄)` shared by the derivative,
//! critical cone, and sigma term computations.

use std::ops::Range;

use nalgebra::DMatrix;

use crate::cone::{KyFanCone, ProjectionResult, Regime};
use crate::epigraph::TopK;
use crate::error::Result;
use crate::point::ConePoint;
use crate::reduced::{ReducedCone, ReducedPoint};
use crate::scalar::{lit, Real};
use crate::spectral::{hadamard_coeffs, skew, sym, HadamardCoefficients, SvdFrame};

/// Index blocks and reduced cone at a point of the ambient space.
///
/// `α = 0..k₀` and `β` come from the projection; the frame groups of `X` are
/// refined at the `α/β/γ` cuts. In the zero regime the rows of `b` form the
/// rectangular block and `γ` is empty.
#[derive(Debug, Clone)]
pub struct CriticalConeContext<T: Real> {
    pub cone: KyFanCone,
    pub point: ConePoint<T>,
    pub proj: ProjectionResult<T>,
    pub coeffs: HadamardCoefficients<T>,
    pub alpha_groups: Vec<Range<usize>>,
    /// Symmetric groups of `β` (nonzero singular values of `X` in the zero regime).
    pub beta_groups: Vec<Range<usize>>,
    pub gamma_groups: Vec<Range<usize>>,
    /// Rows of `b` in the zero regime.
    pub rect: Option<Range<usize>>,
    /// Reduced cone on boundary regimes.
    pub reduced: Option<ReducedCone<T>>,
}

fn refine(groups: &[Range<usize>], cuts: &[usize]) -> Vec<Range<usize>> {
    let mut out = Vec::new();
    for g in groups {
        let mut start = g.start;
        for &c in cuts {
            if c > start && c < g.end {
                out.push(start..c);
                start = c;
            }
        }
        out.push(start..g.end);
    }
    out
}

impl<T: Real> CriticalConeContext<T> {
    /// Projects `point` and derives the structure; `tol` is the boundary tolerance.
    pub fn new(cone: KyFanCone, point: &ConePoint<T>, tol: T) -> Result<Self> {
        let proj = cone.project_k(point, tol)?;
        Self::from_projection(cone, point.clone(), proj)
    }

    pub fn from_projection(cone: KyFanCone, point: ConePoint<T>, proj: ProjectionResult<T>) -> Result<Self> {
        let frame = &proj.frame;
        let m = frame.m();
        let denom = frame.group_tol * lit(0.5);
        let coeffs = hadamard_coeffs(&proj.sigma_bar, &frame.sigma, frame.n(), denom)?;
        let (k0, k1) = (proj.k0, proj.k1);
        let mut ctx = Self {
            cone,
            point,
            coeffs,
            alpha_groups: vec![],
            beta_groups: vec![],
            gamma_groups: vec![],
            rect: None,
            reduced: None,
            proj,
        };
        let frame = &ctx.proj.frame;
        match ctx.proj.regime {
            Regime::InteriorK | Regime::InteriorKpolar => {}
            Regime::BoundaryPos => {
                for g in refine(&frame.groups, &[k0, k1]) {
                    if g.end <= k0 {
                        ctx.alpha_groups.push(g);
                    } else if g.end <= k1 {
                        ctx.beta_groups.push(g);
                    } else {
                        ctx.gamma_groups.push(g);
                    }
                }
            }
            Regime::BoundaryZero => {
                let bstart = frame.b.start.max(k0);
                for g in refine(&frame.groups, &[k0, bstart]) {
                    if g.end <= k0 {
                        ctx.alpha_groups.push(g);
                    } else if g.end <= bstart {
                        ctx.beta_groups.push(g);
                    }
                }
                if bstart < m {
                    ctx.rect = Some(bstart..m);
                }
            }
        }
        if ctx.proj.regime.is_boundary() {
            let kind = if ctx.proj.regime == Regime::BoundaryPos { TopK::Signed } else { TopK::Absolute };
            let n = ctx.proj.frame.n();
            let rect_shape = ctx.rect.as_ref().map(|r| (r.len(), r.len() + (n - m)));
            let anchor = if ctx.proj.on_boundary_k {
                None
            } else {
                let mut u: Vec<T> = ctx.beta_groups.iter().flat_map(|g| g.clone()).map(|i| ctx.proj.u_bar[i]).collect();
                if let Some(r) = &ctx.rect {
                    u.extend(r.clone().map(|i| ctx.proj.u_bar[i]));
                }
                Some(u)
            };
            ctx.reduced = Some(ReducedCone::new(
                kind,
                ctx.alpha_groups.iter().map(|g| g.len()).collect(),
                ctx.beta_groups.iter().map(|g| g.len()).collect(),
                rect_shape,
                cone.k - k0,
                anchor,
            )?);
        }
        Ok(ctx)
    }

    pub fn regime(&self) -> Regime {
        self.proj.regime
    }

    pub fn frame(&self) -> &SvdFrame<T> {
        &self.proj.frame
    }

    pub fn m(&self) -> usize {
        self.cone.m
    }

    pub fn n(&self) -> usize {
        self.cone.n
    }

    pub fn theta(&self) -> T {
        self.proj.theta
    }

    pub fn alpha(&self) -> Range<usize> {
        0..self.proj.k0
    }

    pub fn beta(&self) -> Range<usize> {
        self.proj.k0..self.proj.k1
    }

    pub fn gamma(&self) -> Range<usize> {
        if self.regime() == Regime::BoundaryPos {
            self.proj.k1..self.m()
        } else {
            self.m()..self.m()
        }
    }

    /// All symmetric groups (`α` then `β`).
    pub fn sym_groups(&self) -> impl Iterator<Item = &Range<usize>> {
        self.alpha_groups.iter().chain(&self.beta_groups)
    }

    /// `Ũᵀ Z Ṽ`.
    pub fn to_frame(&self, z: &DMatrix<T>) -> DMatrix<T> {
        self.frame().to_frame(z)
    }

    /// `Ū Z Ṽᵀ`.
    pub fn from_frame(&self, z: &DMatrix<T>) -> DMatrix<T> {
        self.frame().from_frame(z)
    }

    /// The block embedding `𝐃` of a frame-coordinate matrix, paired with `τ`.
    pub fn d_embed(&self, tau: T, zt: &DMatrix<T>) -> ReducedPoint<T> {
        let m = self.m();
        let mut blocks: Vec<DMatrix<T>> =
            self.sym_groups().map(|g| sym(&zt.view((g.start, g.start), (g.len(), g.len())).clone_owned())).collect();
        if let Some(r) = &self.rect {
            let cols = self.n() - m + r.len();
            let mut w = DMatrix::zeros(r.len(), cols);
            w.view_mut((0, 0), (r.len(), r.len())).copy_from(&zt.view((r.start, r.start), (r.len(), r.len())));
            w.view_mut((0, r.len()), (r.len(), self.n() - m))
                .copy_from(&zt.view((r.start, m), (r.len(), self.n() - m)));
            blocks.push(w);
        }
        ReducedPoint { zeta: tau, blocks }
    }

    /// Writes the blocks of a reduced point back into a frame-coordinate matrix.
    ///
    /// Symmetric blocks replace the symmetric part of the diagonal blocks; the
    /// rectangular block replaces rows `b`, columns `b ∪ c`.
    pub fn write_reduced(&self, zt: &mut DMatrix<T>, w: &ReducedPoint<T>) {
        let m = self.m();
        let mut it = w.blocks.iter();
        for g in self.sym_groups() {
            let blk = it.next().expect("block count");
            let mut view = zt.view_mut((g.start, g.start), (g.len(), g.len()));
            let h = skew(&view.clone_owned());
            view.copy_from(&(blk + h));
        }
        if let Some(r) = &self.rect {
            let blk = it.next().expect("rectangular block");
            zt.view_mut((r.start, r.start), (r.len(), r.len())).copy_from(&blk.view((0, 0), (r.len(), r.len())));
            zt.view_mut((r.start, m), (r.len(), self.n() - m))
                .copy_from(&blk.view((0, r.len()), (r.len(), self.n() - m)));
        }
    }

    /// The Hadamard map `𝐓(Z) = [E₁∘𝒢(Z₁) + E₂∘ℋ(Z₁)   F∘Z₂]`.
    pub fn t_map(&self, zt: &DMatrix<T>) -> DMatrix<T> {
        let m = self.m();
        let n = self.n();
        let z1 = zt.columns(0, m).clone_owned();
        let g = sym(&z1);
        let h = skew(&z1);
        let mut out = DMatrix::zeros(m, n);
        out.columns_mut(0, m).copy_from(&(self.coeffs.e1.component_mul(&g) + self.coeffs.e2.component_mul(&h)));
        out.columns_mut(m, n - m).copy_from(&self.coeffs.f.component_mul(&zt.columns(m, n - m)));
        out
    }

    /// Entries of a frame-coordinate direction that must vanish in the critical cone,
    /// beyond what the reduced cone sees. Returns a matrix with those entries kept.
    pub fn structural_part(&self, zt: &DMatrix<T>) -> DMatrix<T> {
        let (m, n) = (self.m(), self.n());
        let mut out = DMatrix::zeros(m, n);
        if self.proj.on_boundary_k {
            return out;
        }
        match self.regime() {
            Regime::BoundaryPos => {
                // symmetric coupling between distinct β groups
                for (x, gx) in self.beta_groups.iter().enumerate() {
                    for gy in self.beta_groups.iter().skip(x + 1) {
                        for i in gx.clone() {
                            for j in gy.clone() {
                                let s = (zt[(i, j)] + zt[(j, i)]) * lit(0.5);
                                out[(i, j)] = s;
                                out[(j, i)] = s;
                            }
                        }
                    }
                }
            }
            Regime::BoundaryZero => {
                let mut groups: Vec<Range<usize>> = self.beta_groups.clone();
                if let Some(r) = &self.rect {
                    groups.push(r.clone());
                }
                for (x, gx) in groups.iter().enumerate() {
                    for (y, gy) in groups.iter().enumerate() {
                        if x == y {
                            continue;
                        }
                        for i in gx.clone() {
                            for j in gy.clone() {
                                out[(i, j)] = zt[(i, j)];
                            }
                        }
                    }
                }
                for g in &self.beta_groups {
                    for i in g.clone() {
                        for j in m..n {
                            out[(i, j)] = zt[(i, j)];
                        }
                        for j in g.clone() {
                            out[(i, j)] = (zt[(i, j)] - zt[(j, i)]) * lit(0.5);
                        }
                    }
                }
            }
            _ => {}
        }
        out
    }
}
