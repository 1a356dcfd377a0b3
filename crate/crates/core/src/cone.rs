//! The Ky Fan k-norm epigraph cone `K = {(t, X) : ‖σ(X)‖_(k) ≤ t}` and its negative polar.

use nalgebra::DVector;

use crate::epigraph::{project_epigraph, topk_abs, TopK};
use crate::error::{Error, Result};
use crate::point::ConePoint;
use crate::scalar::{from_usize, lit, Real};
use crate::spectral::SvdFrame;

/// Default relative tolerance for boundary classification.
pub const BOUNDARY_TOL: f64 = 1e-12;

/// Shape and norm parameter of the cone.
#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
pub struct KyFanCone {
    pub m: usize,
    pub n: usize,
    pub k: usize,
}

/// Where a point sits relative to `K` and `K°`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Regime {
    /// Strictly inside `K`.
    InteriorK,
    /// Strictly inside `K°`.
    InteriorKpolar,
    /// The projection has `σ_k > 0`.
    BoundaryPos,
    /// The projection has `σ_k = 0`.
    BoundaryZero,
}

impl Regime {
    pub fn is_boundary(self) -> bool {
        matches!(self, Regime::BoundaryPos | Regime::BoundaryZero)
    }
}

/// Moreau decomposition of a point together with the structure of the projection.
///
/// On boundary regimes `σ̄ = σ − θū`, where `ū` equals 1 on the first `k₀`
/// entries. In the positive regime `β = k₀..k₁` carries the tied value
/// `σ̄_k`; in the zero regime `β = k₀..m` carries zeros.
#[derive(Debug, Clone)]
pub struct ProjectionResult<T: Real> {
    pub onto_k: ConePoint<T>,
    pub onto_kpolar: ConePoint<T>,
    pub theta: T,
    pub u_bar: DVector<T>,
    pub sigma_bar: DVector<T>,
    pub k0: usize,
    /// End of `β` (exclusive); equals `m` in the zero regime.
    pub k1: usize,
    pub regime: Regime,
    /// The input itself lies on the boundary of `K` (so `θ = 0`).
    pub on_boundary_k: bool,
    /// Indices of `β` with `ū = 1`, `0 < ū < 1`, and `ū = 0`.
    pub beta_split: (Vec<usize>, Vec<usize>, Vec<usize>),
    /// Frame of the input matrix, shared by both components.
    pub frame: SvdFrame<T>,
}

impl KyFanCone {
    pub fn new(m: usize, n: usize, k: usize) -> Result<Self> {
        if m == 0 || m > n {
            return Err(Error::Dimension(format!("need 1 <= m <= n, got m={m}, n={n}")));
        }
        if k == 0 || k > m {
            return Err(Error::InvalidInput(format!("k={k} outside 1..={m}")));
        }
        Ok(Self { m, n, k })
    }

    fn check<T: Real>(&self, p: &ConePoint<T>) -> Result<()> {
        p.check_shape(self.m, self.n)?;
        if !p.is_finite() {
            return Err(Error::InvalidInput("point has non-finite entries".into()));
        }
        Ok(())
    }

    /// `‖σ(X)‖_(k)`.
    pub fn norm_of<T: Real>(&self, x: &nalgebra::DMatrix<T>) -> T {
        let s = crate::spectral::singular_values(x);
        topk_abs(s.as_slice(), self.k)
    }

    /// Dual norm `max(σ₁(Y), ‖σ(Y)‖₁ / k)`.
    pub fn dual_norm_of<T: Real>(&self, y: &nalgebra::DMatrix<T>) -> T {
        let s = crate::spectral::singular_values(y);
        let s1 = s.iter().copied().fold(T::zero(), |a, b| a.max(b));
        let total = s.iter().copied().fold(T::zero(), |a, b| a + b);
        s1.max(total / from_usize::<T>(self.k))
    }

    pub fn in_k<T: Real>(&self, p: &ConePoint<T>, tol: T) -> bool {
        self.norm_of(&p.x) <= p.t + tol
    }

    pub fn in_kpolar<T: Real>(&self, p: &ConePoint<T>, tol: T) -> bool {
        p.t <= tol && self.dual_norm_of(&p.x) <= -p.t + tol
    }

    /// Projection onto `K`; `tol` is relative to `max(1, ‖p‖)`.
    pub fn project_k<T: Real>(&self, p: &ConePoint<T>, tol: T) -> Result<ProjectionResult<T>> {
        self.check(p)?;
        let frame = SvdFrame::new(&p.x)?;
        self.project_with_frame(p, frame, tol)
    }

    /// Projection onto `K°`; returns the same decomposition (`Π_{K°} = id − Π_K`).
    pub fn project_kpolar<T: Real>(&self, p: &ConePoint<T>, tol: T) -> Result<ProjectionResult<T>> {
        self.project_k(p, tol)
    }

    /// Projection using a precomputed frame of `p.x`.
    pub fn project_with_frame<T: Real>(
        &self,
        p: &ConePoint<T>,
        frame: SvdFrame<T>,
        tol: T,
    ) -> Result<ProjectionResult<T>> {
        let m = self.m;
        let k = self.k;
        let sigma = frame.sigma.clone();
        let scale = p.norm().max(T::one());
        let btol = tol * scale;
        let nrm = topk_abs(sigma.as_slice(), k);
        let total = sigma.iter().copied().fold(T::zero(), |a, b| a + b);
        let dual = sigma[0].max(total / from_usize::<T>(k));
        let zt = frame.zero_tol.max(T::default_epsilon() * scale);
        let gt = frame.group_tol;

        if nrm <= p.t - btol {
            return Ok(self.trivial(p, frame, Regime::InteriorK, T::zero()));
        }
        if nrm <= p.t + btol {
            return Ok(self.on_boundary(p, frame, gt));
        }
        if dual < -p.t - btol {
            return Ok(self.trivial(p, frame, Regime::InteriorKpolar, -p.t));
        }

        let sol = project_epigraph(TopK::Absolute, p.t, &[], sigma.as_slice(), k)?;
        let theta = sol.multiplier;
        let mut sbar = DVector::from_vec(sol.d_beta);
        for v in sbar.iter_mut() {
            if *v <= zt {
                *v = T::zero();
            }
        }
        let nubar = sbar[k - 1];
        let mut ubar = DVector::zeros(m);
        let (regime, k0, k1) = if nubar > zt {
            let k0 = sbar.iter().filter(|&&v| v > nubar + gt).count();
            let k1 = sbar.iter().filter(|&&v| v >= nubar - gt).count();
            for i in k0..k1 {
                sbar[i] = nubar;
            }
            (Regime::BoundaryPos, k0, k1)
        } else {
            let k0 = sbar.iter().filter(|&&v| v > zt).count();
            (Regime::BoundaryZero, k0, m)
        };
        for i in 0..k0 {
            ubar[i] = T::one();
        }
        for i in k0..k1 {
            ubar[i] = ((sigma[i] - sbar[i]) / theta).max(T::zero()).min(T::one());
        }
        let utol = (gt / theta).max(lit(1e-12));
        for i in k0..k1 {
            if ubar[i] <= utol {
                ubar[i] = T::zero();
            } else if ubar[i] >= T::one() - utol {
                ubar[i] = T::one();
            }
        }
        let split = split_beta(&ubar, k0, k1);
        let xbar = frame.redress(&sbar);
        let onto_k = ConePoint::new(p.t + theta, xbar);
        let onto_kpolar = p.sub(&onto_k);
        Ok(ProjectionResult {
            onto_k,
            onto_kpolar,
            theta,
            u_bar: ubar,
            sigma_bar: sbar,
            k0,
            k1,
            regime,
            on_boundary_k: false,
            beta_split: split,
            frame,
        })
    }

    fn trivial<T: Real>(&self, p: &ConePoint<T>, frame: SvdFrame<T>, regime: Regime, theta: T) -> ProjectionResult<T> {
        let m = self.m;
        let (onto_k, onto_kpolar, sbar) = match regime {
            Regime::InteriorK => (p.clone(), ConePoint::zeros(m, self.n), frame.sigma.clone()),
            _ => (ConePoint::zeros(m, self.n), p.clone(), DVector::zeros(m)),
        };
        ProjectionResult {
            onto_k,
            onto_kpolar,
            theta,
            u_bar: DVector::zeros(m),
            sigma_bar: sbar,
            k0: 0,
            k1: 0,
            regime,
            on_boundary_k: false,
            beta_split: (vec![], vec![], vec![]),
            frame,
        }
    }

    fn on_boundary<T: Real>(&self, p: &ConePoint<T>, frame: SvdFrame<T>, gt: T) -> ProjectionResult<T> {
        let m = self.m;
        let k = self.k;
        let sigma = frame.sigma.clone();
        let sk = sigma[k - 1];
        let mut ubar = DVector::zeros(m);
        let (regime, k0, k1) = if sk > T::zero() {
            let k0 = sigma.iter().filter(|&&v| v > sk + gt).count();
            let k1 = sigma.iter().filter(|&&v| v >= sk - gt).count();
            let share = from_usize::<T>(k - k0) / from_usize::<T>(k1 - k0);
            for i in k0..k1 {
                ubar[i] = share;
            }
            (Regime::BoundaryPos, k0, k1)
        } else {
            (Regime::BoundaryZero, frame.a.len(), m)
        };
        for i in 0..k0 {
            ubar[i] = T::one();
        }
        let split = split_beta(&ubar, k0, k1);
        ProjectionResult {
            onto_k: p.clone(),
            onto_kpolar: ConePoint::zeros(m, self.n),
            theta: T::zero(),
            u_bar: ubar,
            sigma_bar: sigma,
            k0,
            k1,
            regime,
            on_boundary_k: true,
            beta_split: split,
            frame,
        }
    }
}

fn split_beta<T: Real>(u: &DVector<T>, k0: usize, k1: usize) -> (Vec<usize>, Vec<usize>, Vec<usize>) {
    let (mut b1, mut b2, mut b3) = (vec![], vec![], vec![]);
    for i in k0..k1 {
        if u[i] >= T::one() {
            b1.push(i);
        } else if u[i] <= T::zero() {
            b3.push(i);
        } else {
            b2.push(i);
        }
    }
    (b1, b2, b3)
}

/// Vector Ky Fan `k`-norm: sum of the `k` largest absolute entries.
pub fn kyfan_norm<T: Real>(x: &[T], k: usize) -> Result<T> {
    if k == 0 || k > x.len() {
        return Err(Error::InvalidInput(format!("k={k} outside 1..={}", x.len())));
    }
    Ok(topk_abs(x, k))
}

#[cfg(test)]
mod tests {
    use super::*;
    use nalgebra::DMatrix;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn diag(m: usize, n: usize, d: &[f64]) -> DMatrix<f64> {
        let mut x = DMatrix::zeros(m, n);
        for (i, v) in d.iter().enumerate() {
            x[(i, i)] = *v;
        }
        x
    }

    #[test]
    fn kyfan_examples() {
        assert_eq!(kyfan_norm(&[3.0, 2.0, 1.0], 2).unwrap(), 5.0);
        assert_eq!(kyfan_norm(&[3.0, 2.0, 1.0], 1).unwrap(), 3.0);
        assert_eq!(kyfan_norm(&[-3.0, 2.0], 2).unwrap(), 5.0);
        assert!(kyfan_norm(&[1.0], 2).is_err());
    }

    #[test]
    fn membership_examples() {
        let c = KyFanCone::new(3, 3, 2).unwrap();
        assert!(c.in_k(&ConePoint::new(5.0, diag(3, 3, &[3.0, 2.0, 1.0])), 1e-12));
        let z = ConePoint::zeros(3, 3);
        assert!(c.in_k(&z, 0.0) && c.in_kpolar(&z, 0.0));
    }

    #[test]
    fn planar_cone() {
        let c = KyFanCone::new(1, 1, 1).unwrap();
        let r = c.project_k(&ConePoint::new(0.0f64, DMatrix::from_element(1, 1, 2.0)), 1e-12).unwrap();
        assert_eq!(r.regime, Regime::BoundaryPos);
        assert!((r.onto_k.t - 1.0).abs() < 1e-14 && (r.onto_k.x[(0, 0)] - 1.0).abs() < 1e-14);
        assert!((r.onto_kpolar.t + 1.0).abs() < 1e-14 && (r.onto_kpolar.x[(0, 0)] - 1.0).abs() < 1e-14);
        assert!((r.theta - 1.0).abs() < 1e-14 && r.u_bar[0] == 1.0);
    }

    #[test]
    fn two_by_two_k1() {
        let c = KyFanCone::new(2, 2, 1).unwrap();
        let r = c.project_k(&ConePoint::new(1.0, diag(2, 2, &[2.0, 0.0])), 1e-12).unwrap();
        assert!((r.onto_k.t - 1.5).abs() < 1e-14);
        assert!((r.onto_k.x - diag(2, 2, &[1.5, 0.0])).norm() < 1e-14);
        assert!((r.theta - 0.5).abs() < 1e-14);
        assert_eq!(r.u_bar.as_slice(), &[1.0, 0.0]);
    }

    #[test]
    fn interior_cases() {
        let c = KyFanCone::new(2, 3, 1).unwrap();
        let p = ConePoint::new(10.0, diag(2, 3, &[1.0, 0.5]));
        let r = c.project_k(&p, 1e-12).unwrap();
        assert_eq!(r.regime, Regime::InteriorK);
        assert_eq!(r.onto_k, p);
        let q = ConePoint::new(-10.0, diag(2, 3, &[1.0, 0.5]));
        let r = c.project_k(&q, 1e-12).unwrap();
        assert_eq!(r.regime, Regime::InteriorKpolar);
        assert_eq!(r.onto_kpolar, q);
        let r = c.project_k(&ConePoint::zeros(2, 3), 1e-12).unwrap();
        assert!(r.onto_k.norm() == 0.0 && r.onto_kpolar.norm() == 0.0);
    }

    #[test]
    fn moreau_on_random_points() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        for _ in 0..300 {
            let m = rng.gen_range(1..5);
            let n = rng.gen_range(m..6);
            let k = rng.gen_range(1..=m);
            let c = KyFanCone::new(m, n, k).unwrap();
            let p =
                ConePoint::new(rng.gen_range(-3.0f64..3.0), DMatrix::from_fn(m, n, |_, _| rng.gen_range(-1.0..1.0)));
            let r = c.project_k(&p, 1e-12).unwrap();
            let s = p.norm().max(1.0);
            assert!((r.onto_k.add(&r.onto_kpolar).sub(&p)).norm() <= 1e-10 * s);
            assert!(r.onto_k.dot(&r.onto_kpolar).abs() <= 1e-9 * s * s);
            assert!(c.in_k(&r.onto_k, 1e-9 * s));
            assert!(c.in_kpolar(&r.onto_kpolar, 1e-9 * s));
        }
    }

    #[test]
    fn f32_projection_works() {
        let c = KyFanCone::new(1, 1, 1).unwrap();
        let r = c.project_k(&ConePoint::new(0.0f32, DMatrix::from_element(1, 1, 2.0f32)), 1e-6).unwrap();
        assert!((r.onto_k.t - 1.0).abs() < 1e-5);
    }
}
