//! The curvature term `Υ` of the projection at `𝒳`, evaluated two ways: through the
//! eigenbasis of `ℬ(X̄)`, and entrywise in frame coordinates.

use nalgebra::DMatrix;

use crate::cone::Regime;
use crate::context::CriticalConeContext;
use crate::point::ConePoint;
use crate::scalar::{lit, Real};
use crate::spectral::{b_operator, build_pbar, pbar_eigenvalues, skew, sym};
use crate::tangent_critical::frak_x;

/// `Σ_p Y_ip² / (λ_p − ν)` over eigenvalues away from `ν`.
fn resolvent_row<T: Real>(y: &DMatrix<T>, i: usize, lam: &[T], nu: T, tol: T) -> T {
    let mut s = T::zero();
    for (p, &l) in lam.iter().enumerate() {
        let d = l - nu;
        if d.abs() > tol {
            s += y[(i, p)] * y[(i, p)] / d;
        }
    }
    s
}

/// `Υ(ΔΓ)` for the matrix part of `dir`. Vanishes away from the boundary regimes.
pub fn upsilon<T: Real>(ctx: &CriticalConeContext<T>, dir: &ConePoint<T>) -> T {
    if !ctx.regime().is_boundary() {
        return T::zero();
    }
    let frame = ctx.frame();
    let sb = &ctx.proj.sigma_bar;
    let theta = ctx.theta();
    let ub = &ctx.proj.u_bar;
    let two = lit::<T>(2.0);
    let pbar = build_pbar(frame);
    let lam = pbar_eigenvalues(sb, frame);
    let lam = lam.as_slice();
    let scale = lam.iter().fold(T::one(), |a, &b| a.max(b.abs()));
    let tol = lit::<T>(1e-10) * scale;
    let y = pbar.transpose() * b_operator(&dir.x) * &pbar;
    let mut total = T::zero();
    for g in &ctx.alpha_groups {
        let nu = sb[g.start];
        for i in g.clone() {
            total += two * theta * resolvent_row(&y, i, lam, nu, tol);
        }
    }
    match ctx.regime() {
        Regime::BoundaryPos => {
            let nu = sb[ctx.proj.k0];
            for i in ctx.beta() {
                total += two * theta * ub[i] * resolvent_row(&y, i, lam, nu, tol);
            }
        }
        _ => {
            let ht = ctx.to_frame(&dir.x);
            for i in ctx.beta() {
                let mut s = T::zero();
                for p in ctx.alpha() {
                    s += ht[(i, p)] * ht[(p, i)] / sb[p];
                }
                total += two * theta * ub[i] * s;
            }
        }
    }
    total
}

/// Entrywise frame-coordinate form of `−Υ(ΔΓ)`, nonnegative on the critical cone.
pub fn upsilon_expanded<T: Real>(ctx: &CriticalConeContext<T>, dir: &ConePoint<T>) -> T {
    if !ctx.regime().is_boundary() {
        return T::zero();
    }
    let (m, n) = (ctx.m(), ctx.n());
    let a = ctx.to_frame(&dir.x);
    let a1 = a.columns(0, m).clone_owned();
    let (g, h) = (sym(&a1), skew(&a1));
    let sb = &ctx.proj.sigma_bar;
    let ub = &ctx.proj.u_bar;
    let th = ctx.theta();
    let two = lit::<T>(2.0);
    let row_c = |i: usize| (m..n).fold(T::zero(), |s, j| s + a[(i, j)] * a[(i, j)]);
    let (al, be) = (ctx.alpha(), ctx.beta());
    let mut s = T::zero();
    match ctx.regime() {
        Regime::BoundaryPos => {
            let nu = sb[ctx.proj.k0];
            for i in al.clone() {
                for q in 0..m {
                    s += two * th / (sb[i] + sb[q]) * h[(i, q)].powi(2);
                    if !al.contains(&q) {
                        s -= two * th / (sb[q] - sb[i]) * g[(i, q)].powi(2);
                    }
                }
                s += th / sb[i] * row_c(i);
            }
            for i in be.clone() {
                let w = th * ub[i];
                for q in 0..m {
                    s += two * w / (sb[q] + nu) * h[(i, q)].powi(2);
                }
                s += w / nu * row_c(i);
                for q in al.clone() {
                    s -= two * w / (sb[q] - nu) * g[(i, q)].powi(2);
                }
                for q in ctx.gamma() {
                    s += two * w / (nu - sb[q]) * g[(i, q)].powi(2);
                }
            }
        }
        _ => {
            for i in al.clone() {
                for q in be.clone() {
                    s += two * th * (T::one() - ub[q]) / sb[i] * g[(i, q)].powi(2);
                    s += two * th * (T::one() + ub[q]) / sb[i] * h[(i, q)].powi(2);
                }
                for q in al.clone() {
                    s += two * th / (sb[i] + sb[q]) * h[(i, q)].powi(2);
                }
                s += th / sb[i] * row_c(i);
            }
        }
    }
    s
}

/// `⟨𝔛(ΔΓ̃), ΔΓ̃⟩` in frame coordinates.
pub fn frak_x_quadratic<T: Real>(ctx: &CriticalConeContext<T>, dir: &ConePoint<T>) -> T {
    let a = ctx.to_frame(&dir.x);
    frak_x(ctx, &a).dot(&a)
}
