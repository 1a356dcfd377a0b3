//! Tangent cone of `K`, the critical cone `𝒯_K(t̄, X̄) ∩ (ζ̄, Γ̄)^⊥`, its polar, and
//! the curvature operator `𝔛` that shifts the polar test.

use nalgebra::DMatrix;

use crate::cone::Regime;
use crate::context::CriticalConeContext;
use crate::epigraph::{topk_abs, topk_sum};
use crate::error::Result;
use crate::gph::DerivativePair;
use crate::point::ConePoint;
use crate::scalar::{lit, Real};
use crate::spectral::{skew, sym, sym_eigen};

/// Coefficients below this magnitude are treated as structurally zero.
const COEFF_TOL: f64 = 1e-12;

fn scaled<T: Real>(tol: T, p: &ConePoint<T>) -> T {
    tol * p.norm().max(T::one())
}

/// Membership in the tangent cone of `K` at the projection `(t̄, X̄)`.
pub fn in_tangent_k<T: Real>(ctx: &CriticalConeContext<T>, dir: &ConePoint<T>, tol: T) -> bool {
    let tol = scaled(tol, dir);
    match ctx.regime() {
        Regime::InteriorK => true,
        Regime::InteriorKpolar => ctx.cone.in_k(dir, tol),
        Regime::BoundaryPos => {
            let zt = ctx.to_frame(&dir.x);
            let al = ctx.alpha();
            let be = ctx.beta();
            let tr = al.clone().fold(T::zero(), |s, i| s + zt[(i, i)]);
            let blk = zt.view((be.start, be.start), (be.len(), be.len())).clone_owned();
            let (ev, _) = sym_eigen(&blk);
            tr + topk_sum(ev.as_slice(), ctx.cone.k - al.len()) <= dir.t + tol
        }
        Regime::BoundaryZero => {
            let zt = ctx.to_frame(&dir.x);
            let al = ctx.alpha();
            let m = ctx.m();
            let tr = al.clone().fold(T::zero(), |s, i| s + zt[(i, i)]);
            let blk = zt.view((al.end, al.end), (m - al.end, ctx.n() - al.end)).clone_owned();
            let sv = crate::spectral::singular_values(&blk);
            tr + topk_abs(sv.as_slice(), ctx.cone.k - al.len()) <= dir.t + tol
        }
    }
}

/// Membership in the critical cone.
pub fn in_critical_cone<T: Real>(ctx: &CriticalConeContext<T>, dir: &ConePoint<T>, tol: T) -> Result<bool> {
    let stol = scaled(tol, dir);
    match ctx.regime() {
        Regime::InteriorK => Ok(true),
        Regime::InteriorKpolar => Ok(dir.norm() <= stol),
        _ => {
            let zt = ctx.to_frame(&dir.x);
            let red = ctx.reduced.as_ref().expect("boundary context has a reduced cone");
            if ctx.structural_part(&zt).norm() > stol {
                return Ok(false);
            }
            red.contains(&ctx.d_embed(dir.t, &zt), stol)
        }
    }
}

/// Euclidean projection onto the critical cone.
///
/// In frame coordinates the cone is the reduced cone on the diagonal blocks,
/// zero on the structural entries, and free elsewhere.
pub fn project_critical<T: Real>(ctx: &CriticalConeContext<T>, v: &ConePoint<T>) -> Result<ConePoint<T>> {
    match ctx.regime() {
        Regime::InteriorK => Ok(v.clone()),
        Regime::InteriorKpolar => Ok(ConePoint::zeros(ctx.m(), ctx.n())),
        _ => {
            let zt = ctx.to_frame(&v.x);
            let red = ctx.reduced.as_ref().expect("boundary context has a reduced cone");
            let w = red.project(&ctx.d_embed(v.t, &zt))?;
            let mut out = &zt - ctx.structural_part(&zt);
            ctx.write_reduced(&mut out, &w);
            Ok(ConePoint::new(w.zeta, ctx.from_frame(&out)))
        }
    }
}

/// Membership in the negative polar of the critical cone.
pub fn in_critical_polar<T: Real>(ctx: &CriticalConeContext<T>, v: &ConePoint<T>, tol: T) -> Result<bool> {
    Ok(project_critical(ctx, v)?.norm() <= scaled(tol, v))
}

fn theta_of<T: Real>(e: T) -> T {
    if e.abs() > lit(COEFF_TOL) {
        (T::one() - e) / e
    } else {
        T::zero()
    }
}

/// The curvature operator `𝔛` applied to a frame-coordinate matrix `A`.
///
/// `𝔛(A) = [Θ₁∘𝒢(A₁) + Θ₂∘ℋ(A₁)   F̂∘A₂]` with `Θ = (1 − E) ⊘ E` and zero where
/// `E` vanishes. In the positive regime rows `γ` vanish on columns `γ ∪ c`; in
/// the zero regime rows `β` vanish on columns `β ∪ c`. Interior regimes give 0.
pub fn frak_x<T: Real>(ctx: &CriticalConeContext<T>, a: &DMatrix<T>) -> DMatrix<T> {
    let (m, n) = (ctx.m(), ctx.n());
    let mut out = DMatrix::zeros(m, n);
    if !ctx.regime().is_boundary() {
        return out;
    }
    let a1 = a.columns(0, m).clone_owned();
    let g = sym(&a1);
    let h = skew(&a1);
    let c = &ctx.coeffs;
    for i in 0..m {
        for j in 0..m {
            out[(i, j)] = theta_of(c.e1[(i, j)]) * g[(i, j)] + theta_of(c.e2[(i, j)]) * h[(i, j)];
        }
        for j in m..n {
            out[(i, j)] = theta_of(c.f[(i, j - m)]) * a[(i, j)];
        }
    }
    let (rows, cols) = match ctx.regime() {
        Regime::BoundaryPos => (ctx.gamma(), ctx.gamma()),
        _ => (ctx.beta(), ctx.beta()),
    };
    for i in rows {
        for j in cols.clone().chain(m..n) {
            out[(i, j)] = T::zero();
        }
    }
    // within a symmetric group the coupling is carried only by the skew part
    for gr in ctx.sym_groups() {
        for i in gr.clone() {
            for j in gr.clone() {
                out[(i, j)] = theta_of(c.e2[(i, j)]) * h[(i, j)];
            }
        }
    }
    out
}

/// `(Δt, ΔX) − (0, Ū 𝔛(Ūᵀ ΔΓ V̄) V̄ᵀ) ∈ [𝒞_K]°`.
pub fn in_critical_polar_shifted<T: Real>(
    ctx: &CriticalConeContext<T>,
    pair: &DerivativePair<T>,
    tol: T,
) -> Result<bool> {
    let v = shifted_polar_candidate(ctx, pair);
    Ok(project_critical(ctx, &v)?.norm() <= tol * pair.norm().max(T::one()))
}

/// The shifted vector whose polar membership is tested.
pub fn shifted_polar_candidate<T: Real>(ctx: &CriticalConeContext<T>, pair: &DerivativePair<T>) -> ConePoint<T> {
    let shift = ctx.from_frame(&frak_x(ctx, &ctx.to_frame(&pair.delta2.x)));
    ConePoint::new(pair.delta1.t, &pair.delta1.x - shift)
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

    fn contexts() -> Vec<CriticalConeContext<f64>> {
        let mk = |m, n, k, t, d: &[f64]| {
            let cone = KyFanCone::new(m, n, k).unwrap();
            CriticalConeContext::new(cone, &ConePoint::new(t, diag(m, n, d)), 1e-12).unwrap()
        };
        vec![
            mk(3, 4, 1, 1.0, &[3.0, 1.0, 0.5]),
            mk(4, 5, 2, 5.0, &[5.0, 3.0, 2.5, 1.0]),
            mk(3, 4, 2, -1.0, &[3.0, 0.4, 0.0]),
            mk(2, 3, 2, -1.0, &[3.0, 0.0]),
            mk(3, 3, 2, 5.0, &[3.0, 2.0, 2.0]),
        ]
    }

    #[test]
    fn trivial_members() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        for ctx in contexts() {
            let (m, n) = (ctx.m(), ctx.n());
            assert!(in_tangent_k(&ctx, &ConePoint::new(1.0, DMatrix::zeros(m, n)), 1e-12));
            let back = ctx.proj.onto_k.scale(-1.0);
            assert!(in_tangent_k(&ctx, &back, 1e-10));
            assert!(in_critical_cone(&ctx, &ConePoint::zeros(m, n), 1e-12).unwrap());
            // projections land in the cone and leave a polar residual
            for _ in 0..50 {
                let v =
                    ConePoint::new(rng.gen_range(-1.0..1.0), DMatrix::from_fn(m, n, |_, _| rng.gen_range(-1.0..1.0)));
                let p = project_critical(&ctx, &v).unwrap();
                assert!(in_critical_cone(&ctx, &p, 1e-9).unwrap());
                assert!(in_tangent_k(&ctx, &p, 1e-9));
                assert!(p.dot(&ctx.proj.onto_kpolar).abs() <= 1e-9);
                assert!(in_critical_polar(&ctx, &v.sub(&p), 1e-8).unwrap());
            }
        }
    }

    #[test]
    fn frak_x_masks_and_linearity() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        for ctx in contexts() {
            let (m, n) = (ctx.m(), ctx.n());
            assert!(frak_x(&ctx, &DMatrix::zeros(m, n)).norm() == 0.0);
            let a = DMatrix::from_fn(m, n, |_, _| rng.gen_range(-1.0..1.0));
            let b = DMatrix::from_fn(m, n, |_, _| rng.gen_range(-1.0..1.0));
            let lhs = frak_x(&ctx, &(&a * 2.5 + &b));
            let rhs = frak_x(&ctx, &a) * 2.5 + frak_x(&ctx, &b);
            assert!((lhs - rhs).norm() <= 1e-10);
            if ctx.regime() == Regime::BoundaryPos {
                let mut g = DMatrix::zeros(m, n);
                for i in ctx.gamma() {
                    for j in ctx.gamma().chain(m..n) {
                        g[(i, j)] = 1.0;
                    }
                }
                assert!(frak_x(&ctx, &g).norm() == 0.0);
            }
        }
    }
}
