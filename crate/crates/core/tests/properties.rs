//! Property tests over random shapes, points and directions.

use kyfan::gph::{generate_member_pair, member_via_conditions, member_via_dirderiv};
use kyfan::kkt::fixtures::random_nls;
use kyfan::kkt::{psi_residual, psi_tilde_residual, KktTriple, Perturbation, ProblemInstance};
use kyfan::sigma::upsilon;
use kyfan::tangent_critical::{in_critical_cone, in_tangent_k, project_critical};
use kyfan::{pi_k_dirderiv, ConePoint, CriticalConeContext, KyFanCone, Regime};
use kyfan_oracles::gen::{orthogonal, planted, Case};
use nalgebra::{DMatrix, DVector};
use proptest::prelude::*;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

const TOL: f64 = 1e-12;

/// `(m, n, k)` with `1 ≤ k ≤ m ≤ n ≤ 5`.
fn shape() -> impl Strategy<Value = (usize, usize, usize)> {
    (1usize..=5).prop_flat_map(|m| (Just(m), m..=5usize, 1..=m))
}

fn point(m: usize, n: usize) -> impl Strategy<Value = ConePoint<f64>> {
    (-5.0f64..5.0, prop::collection::vec(-3.0f64..3.0, m * n))
        .prop_map(move |(t, v)| ConePoint::new(t, DMatrix::from_row_slice(m, n, &v)))
}

fn shaped_point() -> impl Strategy<Value = (KyFanCone, ConePoint<f64>)> {
    shape().prop_flat_map(|(m, n, k)| (Just(KyFanCone::new(m, n, k).unwrap()), point(m, n)))
}

fn shaped_pair() -> impl Strategy<Value = (KyFanCone, ConePoint<f64>, ConePoint<f64>)> {
    shape().prop_flat_map(|(m, n, k)| (Just(KyFanCone::new(m, n, k).unwrap()), point(m, n), point(m, n)))
}

/// A planted base point of any structure with a random direction.
fn planted_base() -> impl Strategy<Value = (KyFanCone, ConePoint<f64>, ConePoint<f64>)> {
    (shape(), 0usize..4, any::<u64>()).prop_flat_map(|((m, n, k), c, seed)| {
        let case = [Case::InteriorK, Case::InteriorPolar, Case::BoundaryPos, Case::BoundaryZero][c];
        let case = if case == Case::BoundaryZero && k < 2 { Case::BoundaryPos } else { case };
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let p = planted(&mut rng, m, n, k, case);
        (Just(KyFanCone::new(m, n, k).unwrap()), Just(ConePoint::new(p.t, p.x)), point(m, n))
    })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(200))]

    #[test]
    fn moreau_decomposition((cone, p) in shaped_point()) {
        let r = cone.project_k(&p, TOL).unwrap();
        let scale = p.norm().max(1.0);
        prop_assert!(r.onto_k.add(&r.onto_kpolar).sub(&p).norm() <= 1e-10 * scale);
        prop_assert!(r.onto_k.dot(&r.onto_kpolar).abs() <= 1e-9 * scale * scale);
        prop_assert!(cone.in_k(&r.onto_k, 1e-9 * scale));
        prop_assert!(cone.in_kpolar(&r.onto_kpolar, 1e-9 * scale));
    }

    #[test]
    fn projection_is_idempotent_and_nonexpansive((cone, p, q) in shaped_pair()) {
        let pp = cone.project_k(&p, TOL).unwrap().onto_k;
        let pq = cone.project_k(&q, TOL).unwrap().onto_k;
        let again = cone.project_k(&pp, TOL).unwrap().onto_k;
        prop_assert!(again.sub(&pp).norm() <= 1e-9 * pp.norm().max(1.0));
        prop_assert!(pp.sub(&pq).norm() <= p.sub(&q).norm() * (1.0 + 1e-10) + 1e-12);
        // firm nonexpansiveness
        prop_assert!(pp.sub(&pq).norm().powi(2) <= pp.sub(&pq).dot(&p.sub(&q)) + 1e-9 * p.sub(&q).norm().max(1.0));
    }

    #[test]
    fn projection_is_basis_independent((cone, p) in shaped_point(), seed in any::<u64>()) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let u = orthogonal(&mut rng, cone.m);
        let v = orthogonal(&mut rng, cone.n);
        let rotated = ConePoint::new(p.t, &u * &p.x * v.transpose());
        let a = cone.project_k(&p, TOL).unwrap().onto_k;
        let b = cone.project_k(&rotated, TOL).unwrap().onto_k;
        let back = ConePoint::new(b.t, u.transpose() * &b.x * &v);
        prop_assert!(a.sub(&back).norm() <= 1e-9 * p.norm().max(1.0));
    }

    #[test]
    fn derivative_is_basis_independent((cone, base, h) in planted_base(), seed in any::<u64>()) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let u = orthogonal(&mut rng, cone.m);
        let v = orthogonal(&mut rng, cone.n);
        let rot = |p: &ConePoint<f64>| ConePoint::new(p.t, &u * &p.x * v.transpose());
        let c1 = CriticalConeContext::new(cone, &base, TOL).unwrap();
        let c2 = CriticalConeContext::new(cone, &rot(&base), TOL).unwrap();
        let d1 = pi_k_dirderiv(&c1, &h).unwrap();
        let d2 = pi_k_dirderiv(&c2, &rot(&h)).unwrap();
        prop_assert!(rot(&d1).sub(&d2).norm() <= 1e-8 * (1.0 + h.norm()));
    }

    #[test]
    fn secant_error_is_superlinear((cone, base, h) in planted_base()) {
        let ctx = CriticalConeContext::new(cone, &base, TOL).unwrap();
        let h = h.scale(1.0 / h.norm().max(1e-300));
        let d = pi_k_dirderiv(&ctx, &h).unwrap();
        let p0 = cone.project_k(&base, TOL).unwrap().onto_k;
        let err = |s: f64| cone.project_k(&base.axpy(s, &h), TOL).unwrap().onto_k.sub(&p0).sub(&d.scale(s)).norm() / s;
        let (e1, e2) = (err(1e-3), err(1e-5));
        prop_assert!(e2 <= 1e-4 || e2 <= 0.5 * e1, "secant errors {e1} {e2}");
    }

    #[test]
    fn derivative_is_homogeneous_and_bounded((cone, base, h) in planted_base(), s in 0.01f64..100.0) {
        let ctx = CriticalConeContext::new(cone, &base, TOL).unwrap();
        let d = pi_k_dirderiv(&ctx, &h).unwrap();
        let ds = pi_k_dirderiv(&ctx, &h.scale(s)).unwrap();
        prop_assert!(ds.sub(&d.scale(s)).norm() <= 1e-9 * s * (1.0 + d.norm()));
        // Π′ is nonexpansive and lands in the critical cone
        prop_assert!(d.norm() <= h.norm() * (1.0 + 1e-9) + 1e-12);
        prop_assert!(in_critical_cone(&ctx, &d, 1e-8).unwrap());
        if ctx.regime() == Regime::InteriorK {
            prop_assert!(d.sub(&h).norm() <= 1e-12 * (1.0 + h.norm()));
        }
    }

    #[test]
    fn critical_projection_is_a_projection((cone, base, w) in planted_base()) {
        let ctx = CriticalConeContext::new(cone, &base, TOL).unwrap();
        let p = project_critical(&ctx, &w).unwrap();
        prop_assert!(in_critical_cone(&ctx, &p, 1e-9).unwrap());
        prop_assert!(in_tangent_k(&ctx, &p, 1e-9));
        // the residual is orthogonal to the projection for a cone
        prop_assert!(w.sub(&p).dot(&p).abs() <= 1e-9 * (1.0 + w.norm() * w.norm()));
        prop_assert!(upsilon(&ctx, &p) <= 1e-12 * (1.0 + p.norm() * p.norm()));
    }

    #[test]
    fn generated_pairs_are_graph_members((cone, base, w) in planted_base()) {
        let ctx = CriticalConeContext::new(cone, &base, TOL).unwrap();
        let pair = generate_member_pair(&ctx, &w).unwrap();
        prop_assert!(member_via_dirderiv(&ctx, &pair, 1e-9).unwrap().member);
        prop_assert!(member_via_conditions(&ctx, &pair, 1e-8).unwrap().member);
    }

    #[test]
    fn zero_perturbation_reduces_exactly(seed in 0u64..20, v in prop::collection::vec(-2.0f64..2.0, 32)) {
        let f = random_nls(seed);
        let (m, n) = (f.qp.m, f.qp.n);
        let nn = 1 + m * n;
        let vx = DVector::from_iterator(nn, v.iter().cycle().take(nn).copied());
        let vy = DVector::from_iterator(nn, v.iter().rev().cycle().take(nn).copied());
        let tr = KktTriple {
            x: ConePoint::from_vector(&vx, m, n).unwrap(),
            lambda: DVector::from_element(f.triple.lambda.len(), v[0]),
            y: ConePoint::from_vector(&vy, m, n).unwrap(),
        };
        let a = psi_residual(&f.qp, &tr).unwrap();
        let b = psi_tilde_residual(&f.qp, &Perturbation::zeros(f.qp.dims()), &tr).unwrap();
        prop_assert_eq!(a, b);
    }
}
