//! Random generators for points with a prescribed projection structure.

use nalgebra::DMatrix;
use rand::Rng;
use rand_distr::StandardNormal;

/// Haar-distributed orthogonal matrix.
pub fn orthogonal<R: Rng>(rng: &mut R, n: usize) -> DMatrix<f64> {
    let a = DMatrix::from_fn(n, n, |_, _| rng.sample::<f64, _>(StandardNormal));
    let qr = a.qr();
    let (q, r) = (qr.q(), qr.r());
    let mut q = q;
    for j in 0..n {
        if r[(j, j)] < 0.0 {
            q.column_mut(j).neg_mut();
        }
    }
    q
}

/// Gaussian matrix.
pub fn gaussian<R: Rng>(rng: &mut R, m: usize, n: usize) -> DMatrix<f64> {
    DMatrix::from_fn(m, n, |_, _| rng.sample::<f64, _>(StandardNormal))
}

/// `U [diag(s) 0] Vᵀ` with random orthogonal factors.
pub fn with_singular_values<R: Rng>(rng: &mut R, m: usize, n: usize, s: &[f64]) -> DMatrix<f64> {
    let u = orthogonal(rng, m);
    let v = orthogonal(rng, n);
    let mut d = DMatrix::zeros(m, n);
    for (i, &x) in s.iter().enumerate() {
        d[(i, i)] = x;
    }
    u * d * v.transpose()
}

/// Structure of a generated base point.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Case {
    /// Strictly inside the cone.
    InteriorK,
    /// Strictly inside the negative polar.
    InteriorPolar,
    /// Projection with `σ̄_k > 0`.
    BoundaryPos,
    /// Projection with `σ̄_k = 0`.
    BoundaryZero,
}

/// A point `(t, X)` and its exact projection `(t̄, X̄)` built inversely.
#[derive(Debug, Clone)]
pub struct Planted {
    pub t: f64,
    pub x: DMatrix<f64>,
    pub t_bar: f64,
    pub x_bar: DMatrix<f64>,
}

fn sorted_desc(v: &mut [f64]) {
    v.sort_by(|a, b| b.partial_cmp(a).unwrap());
}

/// Builds `(t̄, X̄) + (ζ̄, Γ̄)` with `(t̄, X̄) ∈ K`, `(ζ̄, Γ̄) ∈ K°` complementary,
/// sharing singular vectors, with the requested case. Needs `1 ≤ k ≤ m ≤ n`;
/// the zero case needs `k ≥ 2`, since with `k = 1` a zero projection forces the
/// point into the polar.
pub fn planted<R: Rng>(rng: &mut R, m: usize, n: usize, k: usize, case: Case) -> Planted {
    let u = orthogonal(rng, m);
    let v = orthogonal(rng, n);
    let embed = |d: &[f64]| {
        let mut z = DMatrix::zeros(m, n);
        for (i, &x) in d.iter().enumerate() {
            z[(i, i)] = x;
        }
        &u * z * v.transpose()
    };
    match case {
        Case::InteriorK => {
            let mut s: Vec<f64> = (0..m).map(|_| rng.gen_range(0.1..2.0)).collect();
            sorted_desc(&mut s);
            let norm: f64 = s.iter().take(k).sum();
            let t = norm + rng.gen_range(0.1..1.0);
            Planted { t, x: embed(&s), t_bar: t, x_bar: embed(&s) }
        }
        Case::InteriorPolar => {
            let mut s: Vec<f64> = (0..m).map(|_| rng.gen_range(0.1..2.0)).collect();
            sorted_desc(&mut s);
            let dual = s[0].max(s.iter().sum::<f64>() / k as f64);
            let t = -dual - rng.gen_range(0.1..1.0);
            Planted { t, x: embed(&s), t_bar: 0.0, x_bar: DMatrix::zeros(m, n) }
        }
        Case::BoundaryPos => {
            // α = 0..k0, β = k0..k1 tied at ν > 0, γ below ν
            let k0 = rng.gen_range(0..k);
            let k1 = rng.gen_range(k..=m);
            let nu = rng.gen_range(0.5..1.5);
            let mut sb = vec![0.0; m];
            for i in 0..k0 {
                sb[i] = nu + rng.gen_range(0.2..2.0);
            }
            for i in k0..k1 {
                sb[i] = nu;
            }
            for i in k1..m {
                sb[i] = if rng.gen_bool(0.3) { 0.0 } else { rng.gen_range(0.0..nu - 0.2) };
            }
            sorted_desc(&mut sb[..k0]);
            sorted_desc(&mut sb[k1..]);
            let theta = rng.gen_range(0.2..1.5);
            // ū on β: in (0, 1), summing to k − k0
            let nb = k1 - k0;
            let mut ub = vec![0.0; nb];
            let target = (k - k0) as f64;
            if nb == k - k0 {
                ub.iter_mut().for_each(|x| *x = 1.0);
            } else {
                let raw: Vec<f64> = (0..nb).map(|_| rng.gen_range(0.2..1.0)).collect();
                // scale into the capped simplex by bisection on a shift
                let (mut lo, mut hi) = (-2.0, 2.0);
                for _ in 0..200 {
                    let mid = 0.5 * (lo + hi);
                    let s: f64 = raw.iter().map(|r| (r + mid).clamp(0.0, 1.0)).sum();
                    if s < target {
                        lo = mid;
                    } else {
                        hi = mid;
                    }
                }
                for (o, r) in ub.iter_mut().zip(&raw) {
                    *o = (r + 0.5 * (lo + hi)).clamp(0.0, 1.0);
                }
            }
            let mut g = vec![0.0; m];
            for i in 0..k0 {
                g[i] = theta;
            }
            for i in k0..k1 {
                g[i] = theta * ub[i - k0];
            }
            let t_bar: f64 = sb[..k0].iter().sum::<f64>() + nu * (k - k0) as f64;
            let s: Vec<f64> = sb.iter().zip(&g).map(|(a, b)| a + b).collect();
            Planted { t: t_bar - theta, x: embed(&s), t_bar, x_bar: embed(&sb) }
        }
        Case::BoundaryZero => {
            assert!(k >= 2, "the zero case needs k >= 2");
            let r = rng.gen_range(1..k);
            let mut sb = vec![0.0; m];
            for i in 0..r {
                sb[i] = rng.gen_range(0.3..2.0);
            }
            sorted_desc(&mut sb[..r]);
            let theta = rng.gen_range(0.2..1.5);
            let mut g = vec![0.0; m];
            for i in 0..r {
                g[i] = theta;
            }
            // ū on the zero block: entries in [0, 1], sum at most k − r
            let budget = (k - r) as f64;
            let mut ub: Vec<f64> = (r..m).map(|_| rng.gen_range(0.0..1.0)).collect();
            let tot: f64 = ub.iter().sum();
            if tot > budget {
                ub.iter_mut().for_each(|x| *x *= budget / tot);
            }
            for i in r..m {
                g[i] = theta * ub[i - r];
            }
            let t_bar: f64 = sb.iter().sum();
            let mut s: Vec<f64> = sb.iter().zip(&g).map(|(a, b)| a + b).collect();
            // keep the nonzero block ordered above the zero block
            sorted_desc(&mut s[r..]);
            let mut sbs = sb.clone();
            sorted_desc(&mut sbs);
            Planted { t: t_bar - theta, x: embed(&s), t_bar, x_bar: embed(&sbs) }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::qp::project_epigraph_qp;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn planted_projections_match_qp() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        for case in [Case::InteriorK, Case::InteriorPolar, Case::BoundaryPos, Case::BoundaryZero] {
            for _ in 0..20 {
                let (m, n) = (rng.gen_range(1..4), 0);
                let n = m + n + rng.gen_range(0..2);
                let k = rng.gen_range(1..=m);
                if case == Case::BoundaryZero && k < 2 {
                    continue;
                }
                let p = planted(&mut rng, m, n, k, case);
                let (t, x) = project_epigraph_qp(p.t, &p.x, k);
                assert!((t - p.t_bar).abs() < 1e-6, "{case:?} {t} {}", p.t_bar);
                assert!((x - &p.x_bar).norm() < 1e-6, "{case:?}");
            }
        }
    }
}
