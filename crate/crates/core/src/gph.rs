//! Membership in the graph of the directional derivative of the projection.

use crate::context::CriticalConeContext;
use crate::dirderiv::pi_k_dirderiv;
use crate::error::Result;
use crate::point::ConePoint;
use crate::scalar::{to_f64, Real};
use crate::sigma::upsilon;
use crate::tangent_critical::{in_critical_cone, in_critical_polar_shifted};

/// A candidate `(Δ1, Δ2)` with `Δ1 = (Δt, ΔX)` on the polar side and `Δ2 = (Δζ, ΔΓ)` on the cone side.
#[derive(Debug, Clone, PartialEq)]
pub struct DerivativePair<T: Real> {
    pub delta1: ConePoint<T>,
    pub delta2: ConePoint<T>,
}

impl<T: Real> DerivativePair<T> {
    pub fn norm(&self) -> T {
        (self.delta1.norm().powi(2) + self.delta2.norm().powi(2)).sqrt()
    }
}

/// Outcome of a membership test with the residual that decided it.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Membership {
    pub member: bool,
    pub residual: f64,
}

/// `Π′(𝒳; Δ1 + Δ2) = Δ2` up to `tol · max(1, ‖pair‖)`.
pub fn member_via_dirderiv<T: Real>(
    ctx: &CriticalConeContext<T>,
    pair: &DerivativePair<T>,
    tol: T,
) -> Result<Membership> {
    let d = pi_k_dirderiv(ctx, &pair.delta1.add(&pair.delta2))?.sub(&pair.delta2).norm();
    Ok(Membership { member: d <= tol * pair.norm().max(T::one()), residual: to_f64(d) })
}

/// Membership through the critical cone, the shifted polar, and the curvature identity
/// `⟨Δ1, Δ2⟩ = −Υ(Δ2)`.
pub fn member_via_conditions<T: Real>(
    ctx: &CriticalConeContext<T>,
    pair: &DerivativePair<T>,
    tol: T,
) -> Result<Membership> {
    let crit = in_critical_cone(ctx, &pair.delta2, tol)?;
    let polar = in_critical_polar_shifted(ctx, pair, tol)?;
    let gap = (pair.delta1.dot(&pair.delta2) + upsilon(ctx, &pair.delta2)).abs();
    let ok = gap <= tol * pair.norm().powi(2).max(T::one());
    Ok(Membership { member: crit && polar && ok, residual: to_f64(gap) })
}

/// A graph pair generated from `w`: `Δ2 = Π′(𝒳; w)` and `Δ1 = w − Δ2`.
pub fn generate_member_pair<T: Real>(ctx: &CriticalConeContext<T>, w: &ConePoint<T>) -> Result<DerivativePair<T>> {
    let d2 = pi_k_dirderiv(ctx, w)?;
    Ok(DerivativePair { delta1: w.sub(&d2), delta2: d2 })
}
