//! Directional derivative of the projection onto `K` and the block equations
//! characterizing pairs in the graph of that derivative.

use std::ops::Range;

use nalgebra::DMatrix;

use crate::cone::Regime;
use crate::context::CriticalConeContext;
use crate::error::Result;
use crate::gph::DerivativePair;
use crate::point::ConePoint;
use crate::reduced::ReducedPoint;
use crate::scalar::{to_f64, Real};
use crate::spectral::{skew, sym};

/// Reduced projection `Φ = Π_C(τ, 𝐃(H̃))` shared by the derivative and the block equations.
fn reduced_image<T: Real>(ctx: &CriticalConeContext<T>, tau: T, ht: &DMatrix<T>) -> Result<ReducedPoint<T>> {
    let red = ctx.reduced.as_ref().expect("boundary context has a reduced cone");
    red.project(&ctx.d_embed(tau, ht))
}

/// `Π′_K(𝒳; H)` for a direction `H = (τ, H)`.
pub fn pi_k_dirderiv<T: Real>(ctx: &CriticalConeContext<T>, dir: &ConePoint<T>) -> Result<ConePoint<T>> {
    dir.check_shape(ctx.m(), ctx.n())?;
    match ctx.regime() {
        Regime::InteriorK => return Ok(dir.clone()),
        Regime::InteriorKpolar => return Ok(ConePoint::zeros(ctx.m(), ctx.n())),
        _ => {}
    }
    let (m, n) = (ctx.m(), ctx.n());
    let ht = ctx.to_frame(&dir.x);
    let phi = reduced_image(ctx, dir.t, &ht)?;
    let mut xi = ctx.t_map(&ht);
    let mut blocks = phi.blocks.iter();
    for g in ctx.sym_groups() {
        let blk = blocks.next().expect("block count");
        let mut view = xi.view_mut((g.start, g.start), (g.len(), g.len()));
        let cur = view.clone_owned();
        view.copy_from(&(cur + blk));
    }
    match ctx.regime() {
        Regime::BoundaryPos => {
            for i in ctx.gamma() {
                for j in ctx.gamma().chain(m..n) {
                    xi[(i, j)] = ht[(i, j)];
                }
            }
        }
        _ => {
            if let (Some(r), Some(blk)) = (&ctx.rect, blocks.next()) {
                xi.view_mut((r.start, r.start), (r.len(), r.len())).copy_from(&blk.view((0, 0), (r.len(), r.len())));
                xi.view_mut((r.start, m), (r.len(), n - m)).copy_from(&blk.view((0, r.len()), (r.len(), n - m)));
            }
        }
    }
    Ok(ConePoint::new(phi.zeta, ctx.from_frame(&xi)))
}

/// Result of checking `Π′(𝒳; sH) = s Π′(𝒳; H)` over a set of scales.
#[derive(Debug, Clone)]
pub struct HomogeneityReport {
    pub max_rel_error: f64,
    pub ok: bool,
}

/// Checks positive homogeneity of the directional derivative.
pub fn positive_homogeneity_check<T: Real>(
    ctx: &CriticalConeContext<T>,
    dir: &ConePoint<T>,
    scales: &[T],
    tol: T,
) -> Result<HomogeneityReport> {
    let base = pi_k_dirderiv(ctx, dir)?;
    let mut worst = T::zero();
    for &s in scales {
        let lhs = pi_k_dirderiv(ctx, &dir.scale(s))?;
        let err = lhs.sub(&base.scale(s)).norm() / (s.abs() * base.norm()).max(T::one());
        worst = worst.max(err);
    }
    Ok(HomogeneityReport { max_rel_error: to_f64(worst), ok: worst <= tol })
}

/// Named residuals of the block equations describing a graph pair.
#[derive(Debug, Clone)]
pub struct BlockEquationReport {
    pub residuals: Vec<(&'static str, f64)>,
    pub holds: bool,
}

impl BlockEquationReport {
    pub fn max_residual(&self) -> f64 {
        self.residuals.iter().map(|r| r.1).fold(0.0, f64::max)
    }
}

fn block_norm<T: Real>(z: &DMatrix<T>, rows: Range<usize>, cols: Range<usize>) -> T {
    let mut s = T::zero();
    for i in rows {
        for j in cols.clone() {
            s += z[(i, j)] * z[(i, j)];
        }
    }
    s.sqrt()
}

fn off_group_norm<T: Real>(z: &DMatrix<T>, groups: &[Range<usize>]) -> T {
    let mut s = T::zero();
    for (x, gx) in groups.iter().enumerate() {
        for (y, gy) in groups.iter().enumerate() {
            if x != y {
                let b = block_norm(z, gx.clone(), gy.clone());
                s += b * b;
            }
        }
    }
    s.sqrt()
}

/// Frame-coordinate block equations for `(Δ1, Δ2)` with `Δ1 = (Δt, ΔX)` and `Δ2 = (Δζ, ΔΓ)`.
///
/// Each residual is the norm of one block relation. The pair lies in the graph
/// of the directional derivative iff all residuals vanish.
pub fn block_equation_residuals<T: Real>(
    ctx: &CriticalConeContext<T>,
    pair: &DerivativePair<T>,
    tol: T,
) -> Result<BlockEquationReport> {
    let (m, n) = (ctx.m(), ctx.n());
    let scale = pair.norm().max(T::one());
    if !ctx.regime().is_boundary() {
        let d = pi_k_dirderiv(ctx, &pair.delta1.add(&pair.delta2))?.sub(&pair.delta2).norm();
        return Ok(BlockEquationReport { residuals: vec![("interior", to_f64(d))], holds: d <= tol * scale });
    }
    let xt = ctx.to_frame(&pair.delta1.x);
    let gt = ctx.to_frame(&pair.delta2.x);
    let ht = &xt + &gt;
    let phi = reduced_image(ctx, pair.delta1.t + pair.delta2.t, &ht)?;
    let x1 = xt.columns(0, m).clone_owned();
    let g1 = gt.columns(0, m).clone_owned();
    let (gx, hx) = (sym(&x1), skew(&x1));
    let (gg, hg) = (sym(&g1), skew(&g1));
    let c = &ctx.coeffs;
    // 𝒢(ΔΓ̃) − E₁∘(𝒢(ΔΓ̃) + 𝒢(ΔX̃)) and the analogous ℋ and F relations
    let rel_g = &gg - c.e1.component_mul(&(&gg + &gx));
    let rel_h = &hg - c.e2.component_mul(&(&hg + &hx));
    let mut rel_f = DMatrix::zeros(m, n);
    for i in 0..m {
        for j in m..n {
            rel_f[(i, j)] = gt[(i, j)] - c.f[(i, j - m)] * ht[(i, j)];
        }
    }
    let e0 = (pair.delta2.t - phi.zeta).abs();
    let mut diag_err = T::zero();
    for (g, blk) in ctx.sym_groups().zip(&phi.blocks) {
        let d = gg.view((g.start, g.start), (g.len(), g.len())) - blk;
        diag_err += d.norm_squared();
    }
    let diag_err = diag_err.sqrt();
    let (al, be, ga) = (ctx.alpha(), ctx.beta(), ctx.gamma());
    let mut res: Vec<(&'static str, T)> = vec![("eta", e0)];
    match ctx.regime() {
        Regime::BoundaryPos => {
            res.push(("sym_diag", diag_err));
            res.push(("alpha_offgroup", off_group_norm(&gx, &ctx.alpha_groups)));
            res.push(("beta_offgroup", off_group_norm(&gg, &ctx.beta_groups)));
            res.push(("sym_alpha_beta", block_norm(&rel_g, al.clone(), be.clone())));
            res.push(("sym_alpha_gamma", block_norm(&rel_g, al.clone(), ga.clone())));
            res.push(("sym_beta_gamma", block_norm(&rel_g, be.clone(), ga.clone())));
            let mut h = rel_h.clone();
            for i in ga.clone() {
                for j in ga.clone() {
                    h[(i, j)] = T::zero();
                }
            }
            res.push(("skew", h.norm()));
            res.push(("cols_c", block_norm(&rel_f, 0..ga.start, m..n)));
            let mut gamma_x = block_norm(&xt, ga.clone(), ga.clone());
            gamma_x = (gamma_x * gamma_x + block_norm(&xt, ga.clone(), m..n).powi(2)).sqrt();
            res.push(("gamma_rows", gamma_x));
        }
        _ => {
            let mut rect_err = T::zero();
            if let (Some(r), Some(blk)) = (&ctx.rect, phi.blocks.last()) {
                let mut w = DMatrix::zeros(r.len(), r.len() + n - m);
                w.view_mut((0, 0), (r.len(), r.len())).copy_from(&gt.view((r.start, r.start), (r.len(), r.len())));
                w.view_mut((0, r.len()), (r.len(), n - m)).copy_from(&gt.view((r.start, m), (r.len(), n - m)));
                rect_err = (w - blk).norm();
            }
            res.push(("rect", rect_err));
            res.push(("sym_diag", diag_err));
            res.push(("alpha_offgroup", off_group_norm(&gx, &ctx.alpha_groups)));
            let mut groups = ctx.beta_groups.clone();
            if let Some(r) = &ctx.rect {
                groups.push(r.clone());
            }
            res.push(("beta_offgroup", off_group_norm(&gt, &groups)));
            res.push(("sym_alpha_beta", block_norm(&rel_g, al.clone(), be.clone())));
            let mut beta_c = T::zero();
            let mut beta_skew = T::zero();
            for g in &ctx.beta_groups {
                beta_c += block_norm(&gt, g.clone(), m..n).powi(2);
                beta_skew += block_norm(&hg, g.clone(), g.clone()).powi(2);
            }
            res.push(("beta_cols_c", beta_c.sqrt()));
            res.push(("beta_skew", beta_skew.sqrt()));
            res.push(("skew_alpha_alpha", block_norm(&rel_h, al.clone(), al.clone())));
            res.push(("skew_alpha_beta", block_norm(&rel_h, al.clone(), be.clone())));
            res.push(("alpha_cols_c", block_norm(&rel_f, al.clone(), m..n)));
        }
    }
    let thr = tol * scale;
    let holds = res.iter().all(|r| r.1 <= thr);
    Ok(BlockEquationReport { residuals: res.into_iter().map(|(k, v)| (k, to_f64(v))).collect(), holds })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::cone::KyFanCone;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn diag(m: usize, n: usize, d: &[f64]) -> DMatrix<f64> {
        let mut x = DMatrix::zeros(m, n);
        for (i, v) in d.iter().enumerate() {
            x[(i, i)] = *v;
        }
        x
    }

    fn rot(m: usize, seed: u64) -> DMatrix<f64> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        DMatrix::from_fn(m, m, |_, _| rng.gen_range(-1.0..1.0)).qr().q()
    }

    fn points() -> Vec<(KyFanCone, ConePoint<f64>)> {
        let mk = |m, n, k, t, d: &[f64], seed| {
            let x = rot(m, seed) * diag(m, n, d) * rot(n, seed + 100).transpose();
            (KyFanCone::new(m, n, k).unwrap(), ConePoint::new(t, x))
        };
        vec![
            mk(3, 4, 1, 1.0, &[3.0, 1.0, 0.5], 1),
            mk(4, 5, 2, 5.0, &[5.0, 3.0, 2.5, 1.0], 2),
            mk(3, 4, 2, -1.0, &[3.0, 0.4, 0.0], 3),
            mk(2, 3, 2, -1.0, &[3.0, 0.0], 4),
            mk(3, 3, 2, 5.0, &[3.0, 2.0, 2.0], 5),
            mk(3, 4, 2, 3.0, &[2.0, 1.0, 0.5], 6),
            mk(3, 4, 2, -5.0, &[1.0, 0.5, 0.2], 7),
            mk(3, 4, 2, 10.0, &[1.0, 0.5, 0.2], 8),
        ]
    }

    #[test]
    fn matches_finite_differences() {
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        for (cone, p) in points() {
            let ctx = CriticalConeContext::new(cone, &p, 1e-12).unwrap();
            let (m, n) = (cone.m, cone.n);
            for _ in 0..10 {
                let h =
                    ConePoint::new(rng.gen_range(-1.0..1.0), DMatrix::from_fn(m, n, |_, _| rng.gen_range(-1.0..1.0)));
                let d = pi_k_dirderiv(&ctx, &h).unwrap();
                let eps = 1e-6;
                let base = cone.project_k(&p, 1e-12).unwrap().onto_k;
                let fwd = cone.project_k(&p.axpy(eps, &h), 1e-12).unwrap().onto_k;
                let fd = fwd.sub(&base).scale(1.0 / eps);
                assert!(fd.sub(&d).norm() <= 1e-4 * (1.0 + h.norm()), "{:?} err {}", ctx.regime(), fd.sub(&d).norm());
            }
        }
    }

    #[test]
    fn homogeneity_and_block_equations() {
        let mut rng = ChaCha8Rng::seed_from_u64(10);
        for (cone, p) in points() {
            let ctx = CriticalConeContext::new(cone, &p, 1e-12).unwrap();
            let (m, n) = (cone.m, cone.n);
            for _ in 0..10 {
                let w =
                    ConePoint::new(rng.gen_range(-1.0..1.0), DMatrix::from_fn(m, n, |_, _| rng.gen_range(-1.0..1.0)));
                let rep = positive_homogeneity_check(&ctx, &w, &[0.1, 2.0, 7.5], 1e-10).unwrap();
                assert!(rep.ok, "{}", rep.max_rel_error);
                let d2 = pi_k_dirderiv(&ctx, &w).unwrap();
                let pair = DerivativePair { delta1: w.sub(&d2), delta2: d2 };
                let r = block_equation_residuals(&ctx, &pair, 1e-9).unwrap();
                assert!(r.holds, "{:?} {:?}", ctx.regime(), r.residuals);
            }
        }
    }
}
