//! Vector kernels: projections onto epigraphs of top-`j` sums.
//!
//! Two norms appear: the signed top-`j` sum `s_j(z)` (sum of the `j` largest
//! entries) and the Ky Fan norm `‖z‖_(j)` (sum of the `j` largest absolute
//! entries). The epigraph problems handled here are
//!
//! ```text
//! min ½(η − ζ)² + ½‖d − κ‖²   s.t.  Σ d_α + g(d_β) ≤ η            (plain)
//! min ½(η − ζ)² + ½‖d − κ‖²   s.t.  Σ d_α + g(d_β) ≤ η,
//!                                   Σ d_α + ⟨u, d_β⟩ = η          (anchored)
//! ```
//!
//! where `g` is one of the two norms above. Both reduce to monotone scalar
//! equations whose pieces are linear, so they are solved by bracketing
//! followed by interpolation on the final piece.

use crate::error::{Error, Result};
use crate::scalar::{from_usize, lit, Real};

/// Which top-`j` function constrains the `β` block.
#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
pub enum TopK {
    /// Sum of the `j` largest entries.
    Signed,
    /// Sum of the `j` largest absolute values.
    Absolute,
}

/// Sum of the `j` largest entries of `z`.
pub fn topk_sum<T: Real>(z: &[T], j: usize) -> T {
    let mut v = z.to_vec();
    v.sort_by(|a, b| b.partial_cmp(a).unwrap_or(std::cmp::Ordering::Equal));
    v.iter().take(j).fold(T::zero(), |s, &x| s + x)
}

/// Sum of the `j` largest absolute values of `z`.
pub fn topk_abs<T: Real>(z: &[T], j: usize) -> T {
    let a: Vec<T> = z.iter().map(|x| x.abs()).collect();
    topk_sum(&a, j)
}

/// Evaluates the chosen top-`j` function.
pub fn topk<T: Real>(kind: TopK, z: &[T], j: usize) -> T {
    match kind {
        TopK::Signed => topk_sum(z, j),
        TopK::Absolute => topk_abs(z, j),
    }
}

fn clip01<T: Real>(x: T) -> T {
    x.max(T::zero()).min(T::one())
}

/// Root of a continuous nondecreasing piecewise-linear function with the given kinks.
///
/// Returns a point where `f` vanishes; if `f` vanishes on an interval, the
/// smallest kink in that interval (or the extrapolated end point) is returned.
fn pwl_root<T: Real>(kinks: &mut Vec<T>, f: impl Fn(T) -> T) -> T {
    kinks.sort_by(|a, b| a.partial_cmp(b).unwrap_or(std::cmp::Ordering::Equal));
    kinks.dedup();
    let vals: Vec<T> = kinks.iter().map(|&k| f(k)).collect();
    let first = kinks[0];
    if vals[0] >= T::zero() {
        let left = f(first - T::one());
        let slope = vals[0] - left;
        return if vals[0] > T::zero() && slope > T::zero() { first - vals[0] / slope } else { first };
    }
    for i in 1..kinks.len() {
        if vals[i] >= T::zero() {
            let (x0, x1, f0, f1) = (kinks[i - 1], kinks[i], vals[i - 1], vals[i]);
            return x0 + (x1 - x0) * (-f0) / (f1 - f0);
        }
    }
    let last = *kinks.last().unwrap();
    let fl = *vals.last().unwrap();
    let slope = f(last + T::one()) - fl;
    if slope > T::zero() {
        last - fl / slope
    } else {
        last
    }
}

/// Projection of `x` onto `{0 ≤ u ≤ 1, Σu = j}` (signed) or `{|u| ≤ 1, Σ|u| ≤ j}` (absolute).
pub fn project_capped_simplex<T: Real>(kind: TopK, x: &[T], j: usize) -> Vec<T> {
    let jt = from_usize::<T>(j);
    match kind {
        TopK::Signed => {
            if x.is_empty() {
                return Vec::new();
            }
            let mut kinks: Vec<T> = x.iter().flat_map(|&v| [v, v - T::one()]).collect();
            let mu = pwl_root(&mut kinks, |mu| jt - x.iter().fold(T::zero(), |s, &v| s + clip01(v - mu)));
            x.iter().map(|&v| clip01(v - mu)).collect()
        }
        TopK::Absolute => {
            let base: T = x.iter().fold(T::zero(), |s, &v| s + v.abs().min(T::one()));
            if base <= jt {
                return x.iter().map(|&v| v.max(-T::one()).min(T::one())).collect();
            }
            let mut kinks: Vec<T> = x.iter().flat_map(|&v| [v.abs(), v.abs() - T::one()]).collect();
            kinks.push(T::zero());
            let mu = pwl_root(&mut kinks, |mu| jt - x.iter().fold(T::zero(), |s, &v| s + clip01(v.abs() - mu)));
            let mu = mu.max(T::zero());
            x.iter().map(|&v| clip01(v.abs() - mu) * v.signum()).collect()
        }
    }
}

/// Proximal point of `λ·g` at `y`, where `g` is the chosen top-`j` function.
///
/// Returns `(d, u)` with `d = y − λu` and `u` a subgradient of `g` at `d`.
/// Entries with fractional `u` share the same magnitude exactly.
pub fn prox_topk<T: Real>(kind: TopK, y: &[T], j: usize, lambda: T) -> (Vec<T>, Vec<T>) {
    if lambda <= T::zero() {
        let u = subgradient_at(kind, y, j);
        return (y.to_vec(), u);
    }
    let scaled: Vec<T> = y.iter().map(|&v| v / lambda).collect();
    let u = project_capped_simplex(kind, &scaled, j);
    let mut level: Option<T> = None;
    let mut d = vec![T::zero(); y.len()];
    for i in 0..y.len() {
        let ua = u[i].abs();
        if ua > T::zero() && ua < T::one() {
            let lv = *level.get_or_insert_with(|| match kind {
                TopK::Signed => y[i] - lambda * u[i],
                TopK::Absolute => y[i].abs() - lambda * ua,
            });
            d[i] = match kind {
                TopK::Signed => lv,
                TopK::Absolute => lv * y[i].signum(),
            };
        } else {
            d[i] = y[i] - lambda * u[i];
        }
    }
    (d, u)
}

/// A canonical subgradient of the top-`j` function at `y` (used when `λ = 0`).
fn subgradient_at<T: Real>(kind: TopK, y: &[T], j: usize) -> Vec<T> {
    let n = y.len();
    let mut idx: Vec<usize> = (0..n).collect();
    let key = |i: usize| if kind == TopK::Absolute { y[i].abs() } else { y[i] };
    idx.sort_by(|&a, &b| key(b).partial_cmp(&key(a)).unwrap_or(std::cmp::Ordering::Equal));
    let mut u = vec![T::zero(); n];
    for &i in idx.iter().take(j) {
        u[i] = if kind == TopK::Absolute && y[i] < T::zero() { -T::one() } else { T::one() };
    }
    u
}

/// Structural description of the anchored constraint on the `β` block.
#[derive(Debug, Clone)]
pub struct Anchor<T: Real> {
    /// Weights `u_β`, one per `β` entry, in `[0, 1]`.
    pub u: Vec<T>,
    /// Tolerance used to classify `u` entries as 0, fractional, or 1.
    pub tol: T,
}

/// Result of an epigraph projection.
#[derive(Debug, Clone)]
pub struct EpiProjection<T: Real> {
    pub eta: T,
    pub d_alpha: Vec<T>,
    pub d_beta: Vec<T>,
    /// Multiplier of the inequality (plain) or of the equality (anchored).
    pub multiplier: T,
    /// Subgradient of `g` at `d_β` certifying optimality (plain problem only).
    pub u_beta: Vec<T>,
    pub iterations: usize,
}

const MAX_BISECT: usize = 400;

/// Solves `φ(x) = 0` for a continuous increasing piecewise-linear `φ`, given `φ(lo) ≤ 0 ≤ φ(hi)`.
fn increasing_root<T: Real>(mut lo: T, mut hi: T, phi: impl Fn(T) -> T) -> (T, usize) {
    let mut flo = phi(lo);
    let mut fhi = phi(hi);
    if flo >= T::zero() {
        return (lo, 0);
    }
    if fhi <= T::zero() {
        return (hi, 0);
    }
    let eps = T::default_epsilon();
    let mut it = 0;
    while it < MAX_BISECT {
        it += 1;
        // A secant step is exact once both ends lie on the same linear piece.
        let sec = lo - flo * (hi - lo) / (fhi - flo);
        if sec > lo && sec < hi {
            let fs = phi(sec);
            if fs.abs() <= eps * (T::one() + sec.abs()) {
                return (sec, it);
            }
            if fs < T::zero() {
                lo = sec;
                flo = fs;
            } else {
                hi = sec;
                fhi = fs;
            }
        }
        let mid = (lo + hi) * lit::<T>(0.5);
        if mid <= lo || mid >= hi {
            break;
        }
        let fm = phi(mid);
        if fm < T::zero() {
            lo = mid;
            flo = fm;
        } else {
            hi = mid;
            fhi = fm;
        }
        if hi - lo <= eps * (T::one() + hi.abs()) {
            break;
        }
    }
    (lo - flo * (hi - lo) / (fhi - flo), it)
}

/// Projection onto `{(η, d): Σ d_α + g(d_β) ≤ η}`.
pub fn project_epigraph<T: Real>(
    kind: TopK,
    zeta: T,
    kappa_alpha: &[T],
    kappa_beta: &[T],
    j: usize,
) -> Result<EpiProjection<T>> {
    if j == 0 || j > kappa_beta.len() {
        return Err(Error::InvalidInput(format!("top-j parameter {j} outside 1..={}", kappa_beta.len())));
    }
    let na = from_usize::<T>(kappa_alpha.len());
    let sum_alpha = kappa_alpha.iter().fold(T::zero(), |s, &v| s + v);
    let value = |lam: T| {
        let (d, _) = prox_topk(kind, kappa_beta, j, lam);
        zeta + lam - (sum_alpha - na * lam + topk(kind, &d, j))
    };
    let f0 = value(T::zero());
    let (lam, iterations) = if f0 >= T::zero() {
        (T::zero(), 0)
    } else {
        let hi = (-f0) / (T::one() + na) * lit::<T>(1.0 + 1e-12) + T::default_epsilon();
        increasing_root(T::zero(), hi, value)
    };
    let (d_beta, u_beta) = prox_topk(kind, kappa_beta, j, lam);
    let d_alpha: Vec<T> = kappa_alpha.iter().map(|&v| v - lam).collect();
    Ok(EpiProjection { eta: zeta + lam, d_alpha, d_beta, multiplier: lam, u_beta, iterations })
}

/// Index classes of anchor weights.
struct AnchorClasses {
    ones: Vec<usize>,
    fractional: Vec<usize>,
    zeros: Vec<usize>,
}

fn classify<T: Real>(a: &Anchor<T>) -> AnchorClasses {
    let mut c = AnchorClasses { ones: vec![], fractional: vec![], zeros: vec![] };
    for (i, &u) in a.u.iter().enumerate() {
        if u >= T::one() - a.tol {
            c.ones.push(i);
        } else if u <= a.tol {
            c.zeros.push(i);
        } else {
            c.fractional.push(i);
        }
    }
    c
}

/// Projection of `y` onto the set of `d` for which `u` attains the top-`j` function,
/// i.e. `⟨u, d⟩ = g(d)`.
fn project_anchor_cone<T: Real>(kind: TopK, y: &[T], cls: &AnchorClasses, forced_zero: bool) -> Vec<T> {
    let deriv = |mu: T| {
        let mut s = T::zero();
        for &i in &cls.ones {
            s += (mu - y[i]).max(T::zero());
        }
        for &i in &cls.fractional {
            s += mu - y[i];
        }
        for &i in &cls.zeros {
            let yi = if kind == TopK::Absolute { y[i].abs() } else { y[i] };
            s -= (yi - mu).max(T::zero());
        }
        s
    };
    let mu = if forced_zero {
        T::zero()
    } else {
        let mut kinks: Vec<T> = Vec::with_capacity(y.len() + 1);
        for &i in cls.ones.iter().chain(&cls.fractional) {
            kinks.push(y[i]);
        }
        for &i in &cls.zeros {
            kinks.push(if kind == TopK::Absolute { y[i].abs() } else { y[i] });
        }
        match kind {
            TopK::Signed => {
                if kinks.is_empty() {
                    T::zero()
                } else {
                    pwl_root(&mut kinks, deriv)
                }
            }
            TopK::Absolute => {
                if deriv(T::zero()) >= T::zero() {
                    T::zero()
                } else {
                    kinks.retain(|&k| k > T::zero());
                    kinks.push(T::zero());
                    pwl_root(&mut kinks, deriv).max(T::zero())
                }
            }
        }
    };
    let mut d = y.to_vec();
    for &i in &cls.ones {
        d[i] = y[i].max(mu);
    }
    for &i in &cls.fractional {
        d[i] = mu;
    }
    for &i in &cls.zeros {
        d[i] = match kind {
            TopK::Signed => y[i].min(mu),
            TopK::Absolute => y[i].max(-mu).min(mu),
        };
    }
    d
}

/// Projection onto `{(η, d): Σ d_α + g(d_β) ≤ η, Σ d_α + ⟨u, d_β⟩ = η}`.
///
/// The weights `u` must be a maximizer of `⟨·, d⟩` over the unit ball of the
/// dual of `g` for some `d`, which makes the feasible set the cone of points
/// where `u` is active.
pub fn project_anchored<T: Real>(
    kind: TopK,
    zeta: T,
    kappa_alpha: &[T],
    kappa_beta: &[T],
    j: usize,
    anchor: &Anchor<T>,
) -> Result<EpiProjection<T>> {
    if anchor.u.len() != kappa_beta.len() {
        return Err(Error::Dimension(format!(
            "anchor has {} weights for a block of length {}",
            anchor.u.len(),
            kappa_beta.len()
        )));
    }
    let cls = classify(anchor);
    let usum = anchor.u.iter().fold(T::zero(), |s, &v| s + v);
    let forced_zero = kind == TopK::Absolute && usum < from_usize::<T>(j) - anchor.tol;
    let na = from_usize::<T>(kappa_alpha.len());
    let sum_alpha = kappa_alpha.iter().fold(T::zero(), |s, &v| s + v);
    let ell = |rho: T| -> (T, Vec<T>) {
        let shifted: Vec<T> = kappa_beta.iter().zip(&anchor.u).map(|(&k, &u)| k - rho * u).collect();
        let d = project_anchor_cone(kind, &shifted, &cls, forced_zero);
        let s = d.iter().zip(&anchor.u).fold(T::zero(), |s, (&x, &u)| s + x * u);
        (sum_alpha - na * rho + s, d)
    };
    let psi = |rho: T| zeta + rho - ell(rho).0;
    let p0 = psi(T::zero());
    let widen = lit::<T>(1.0 + 1e-12);
    let (rho, iterations) = if p0 == T::zero() {
        (T::zero(), 0)
    } else if p0 < T::zero() {
        increasing_root(T::zero(), -p0 * widen + T::default_epsilon(), psi)
    } else {
        increasing_root(-p0 * widen - T::default_epsilon(), T::zero(), psi)
    };
    let (lv, d_beta) = ell(rho);
    let d_alpha: Vec<T> = kappa_alpha.iter().map(|&v| v - rho).collect();
    let _ = lv;
    let eta = d_alpha.iter().fold(T::zero(), |s, &v| s + v)
        + d_beta.iter().zip(&anchor.u).fold(T::zero(), |s, (&x, &u)| s + x * u);
    Ok(EpiProjection { eta, d_alpha, d_beta, multiplier: rho, u_beta: anchor.u.clone(), iterations })
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn topk_examples() {
        assert_eq!(topk_sum(&[1.0, 3.0, 2.0], 2), 5.0);
        assert_eq!(topk_abs(&[1.0, 3.0, 2.0], 2), 5.0);
        assert_eq!(topk_sum(&[-4.0, 1.0], 1), 1.0);
        assert_eq!(topk_abs(&[-4.0, 1.0], 1), 4.0);
        assert_eq!(topk_sum(&[-4.0, 1.0], 2), -3.0);
        assert_eq!(topk_abs(&[-4.0, 1.0], 2), 5.0);
    }

    #[test]
    fn capped_simplex_is_feasible_and_optimal() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        for _ in 0..500 {
            let n = rng.gen_range(1..7);
            let j = rng.gen_range(1..=n);
            let x: Vec<f64> = (0..n).map(|_| rng.gen_range(-2.0..2.0)).collect();
            for kind in [TopK::Signed, TopK::Absolute] {
                let u = project_capped_simplex(kind, &x, j);
                let s: f64 = u.iter().map(|v| v.abs()).sum();
                assert!(u.iter().all(|v| v.abs() <= 1.0 + 1e-12));
                match kind {
                    TopK::Signed => assert!((s - j as f64).abs() < 1e-10 && u.iter().all(|&v| v >= -1e-12)),
                    TopK::Absolute => assert!(s <= j as f64 + 1e-10),
                }
                // variational inequality against random feasible points
                for _ in 0..20 {
                    let w =
                        project_capped_simplex(kind, &(0..n).map(|_| rng.gen_range(-2.0..2.0)).collect::<Vec<_>>(), j);
                    let vi: f64 = (0..n).map(|i| (x[i] - u[i]) * (w[i] - u[i])).sum();
                    assert!(vi <= 1e-10);
                }
            }
        }
    }

    #[test]
    fn epigraph_scalar_cone() {
        let r = project_epigraph(TopK::Absolute, 0.0f64, &[], &[2.0], 1).unwrap();
        assert!((r.eta - 1.0).abs() < 1e-14 && (r.d_beta[0] - 1.0).abs() < 1e-14);
        assert!((r.multiplier - 1.0).abs() < 1e-14);
        let r = project_epigraph(TopK::Absolute, 1.0f64, &[], &[2.0, 0.0], 1).unwrap();
        assert!((r.eta - 1.5).abs() < 1e-14 && (r.d_beta[0] - 1.5).abs() < 1e-14 && r.d_beta[1] == 0.0);
    }

    #[test]
    fn epigraph_output_feasible_and_orthogonal() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        for _ in 0..500 {
            let na = rng.gen_range(0..3);
            let nb = rng.gen_range(1..6);
            let j = rng.gen_range(1..=nb);
            let ka: Vec<f64> = (0..na).map(|_| rng.gen_range(-2.0..2.0)).collect();
            let kb: Vec<f64> = (0..nb).map(|_| rng.gen_range(-2.0..2.0)).collect();
            let zeta = rng.gen_range(-3.0..3.0);
            for kind in [TopK::Signed, TopK::Absolute] {
                let r = project_epigraph(kind, zeta, &ka, &kb, j).unwrap();
                let lhs: f64 = r.d_alpha.iter().sum::<f64>() + topk(kind, &r.d_beta, j);
                assert!(lhs <= r.eta + 1e-10);
                // residual must be orthogonal to the projection
                let mut ip = (zeta - r.eta) * r.eta;
                for i in 0..na {
                    ip += (ka[i] - r.d_alpha[i]) * r.d_alpha[i];
                }
                for i in 0..nb {
                    ip += (kb[i] - r.d_beta[i]) * r.d_beta[i];
                }
                assert!(ip.abs() < 1e-9, "{ip}");
            }
        }
    }
}
