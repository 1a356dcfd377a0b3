//! Dense primal-dual interior-point method for small convex QPs and the
//! epigraph projection built on it.

use nalgebra::{DMatrix, DVector};

/// Solution of `min ½yᵀPy + qᵀy  s.t.  Gy ≤ h`.
#[derive(Debug, Clone)]
pub struct QpSolution {
    pub y: DVector<f64>,
    pub z: DVector<f64>,
    pub iterations: usize,
    pub residual: f64,
}

fn max_step(v: &DVector<f64>, dv: &DVector<f64>) -> f64 {
    let mut a = 1.0f64;
    for i in 0..v.len() {
        if dv[i] < 0.0 {
            a = a.min(-v[i] / dv[i]);
        }
    }
    a
}

/// Mehrotra predictor-corrector on the inequality-form QP.
pub fn solve_qp(p: &DMatrix<f64>, q: &DVector<f64>, g: &DMatrix<f64>, h: &DVector<f64>) -> QpSolution {
    let (nc, nv) = g.shape();
    let mut y = DVector::zeros(nv);
    let mut s = DVector::from_fn(nc, |i, _| (h[i]).max(1.0));
    let mut z = DVector::from_element(nc, 1.0);
    let scale = 1.0 + q.amax().max(h.amax());
    let mut it = 0;
    // iterates drift once the residual reaches rounding level; keep the best one
    let mut best = (y.clone(), z.clone(), 0, f64::INFINITY);
    while it < 200 {
        it += 1;
        let rd = p * &y + q + g.transpose() * &z;
        let rp = g * &y + &s - h;
        let mu = s.dot(&z) / nc as f64;
        let res = rd.amax().max(rp.amax()).max(mu);
        if res < best.3 {
            best = (y.clone(), z.clone(), it, res);
        }
        // degenerate problems have primal error of order √μ, so push μ to rounding level
        if !(res > 1e-15 * scale) || it > best.2 + 5 {
            break;
        }
        // augmented system [P Gᵀ; G −Z⁻¹S][dy; dz] = [−rd; −rp + Z⁻¹rc], ds = −Z⁻¹(rc + S dz)
        let mut kkt = DMatrix::zeros(nv + nc, nv + nc);
        kkt.view_mut((0, 0), (nv, nv)).copy_from(p);
        kkt.view_mut((0, nv), (nv, nc)).copy_from(&g.transpose());
        kkt.view_mut((nv, 0), (nc, nv)).copy_from(g);
        for i in 0..nc {
            kkt[(nv + i, nv + i)] = -s[i] / z[i];
        }
        let lu = kkt.full_piv_lu();
        let solve = |rc: &DVector<f64>| {
            let mut rhs = DVector::zeros(nv + nc);
            rhs.rows_mut(0, nv).copy_from(&-&rd);
            rhs.rows_mut(nv, nc).copy_from(&(-&rp + rc.component_div(&z)));
            let sol = lu.solve(&rhs).unwrap_or_else(|| DVector::from_element(nv + nc, f64::NAN));
            let dy = sol.rows(0, nv).clone_owned();
            let dz = sol.rows(nv, nc).clone_owned();
            let ds = -(rc + s.component_mul(&dz)).component_div(&z);
            (dy, ds, dz)
        };
        let rc_aff = s.component_mul(&z);
        let (_, ds_a, dz_a) = solve(&rc_aff);
        let a_aff = max_step(&s, &ds_a).min(max_step(&z, &dz_a));
        let mu_aff = (&s + &ds_a * a_aff).dot(&(&z + &dz_a * a_aff)) / nc as f64;
        let sigma = (mu_aff / mu).powi(3);
        let rc = &rc_aff + ds_a.component_mul(&dz_a) - DVector::from_element(nc, sigma * mu);
        let (dy, ds, dz) = solve(&rc);
        if dy.iter().chain(ds.iter()).chain(dz.iter()).any(|v| !v.is_finite()) {
            break;
        }
        let a = (0.99 * max_step(&s, &ds).min(max_step(&z, &dz))).min(1.0);
        y += &dy * a;
        s += &ds * a;
        z += &dz * a;
    }
    QpSolution { y: best.0, z: best.1, iterations: best.2, residual: best.3 }
}

/// Projection of `(t0, x0)` onto `{(t, x): sum of the k largest |x_i| ≤ t}`.
///
/// Uses the representation `‖x‖_(k) ≤ t ⟺ ∃ s, w ≥ 0: k s + Σw ≤ t, |x_i| ≤ s + w_i`.
/// Variables are ordered `(t, x, s, w)`.
pub fn project_vector_epigraph_qp(t0: f64, x0: &[f64], k: usize) -> (f64, Vec<f64>) {
    let m = x0.len();
    let nv = 2 * m + 2;
    let nc = 1 + 3 * m;
    let mut p = DMatrix::zeros(nv, nv);
    let mut q = DVector::zeros(nv);
    for i in 0..=m {
        p[(i, i)] = 1.0;
    }
    q[0] = -t0;
    for i in 0..m {
        q[1 + i] = -x0[i];
    }
    let (is, iw) = (m + 1, m + 2);
    let mut g = DMatrix::zeros(nc, nv);
    let h = DVector::zeros(nc);
    g[(0, 0)] = -1.0;
    g[(0, is)] = k as f64;
    for i in 0..m {
        g[(0, iw + i)] = 1.0;
        g[(1 + i, 1 + i)] = 1.0;
        g[(1 + i, is)] = -1.0;
        g[(1 + i, iw + i)] = -1.0;
        g[(1 + m + i, 1 + i)] = -1.0;
        g[(1 + m + i, is)] = -1.0;
        g[(1 + m + i, iw + i)] = -1.0;
        g[(1 + 2 * m + i, iw + i)] = -1.0;
    }
    let sol = solve_qp(&p, &q, &g, &h);
    (sol.y[0], (0..m).map(|i| sol.y[1 + i]).collect())
}

/// Projection of `(t0, X0)` (`m ≤ n`) onto the Ky Fan `k`-norm epigraph.
///
/// Singular values come from the eigenvalues of `X0 X0ᵀ`, and the projected
/// matrix is `U diag(x̄/σ) Uᵀ X0`, so no right singular vectors are needed.
pub fn project_epigraph_qp(t0: f64, x0: &DMatrix<f64>, k: usize) -> (f64, DMatrix<f64>) {
    let eig = nalgebra::SymmetricEigen::new(x0 * x0.transpose());
    let sig: Vec<f64> = eig.eigenvalues.iter().map(|&l| l.max(0.0).sqrt()).collect();
    let (t, xb) = project_vector_epigraph_qp(t0, &sig, k);
    let smax = sig.iter().cloned().fold(0.0, f64::max);
    let ratio = DVector::from_fn(sig.len(), |i, _| {
        if sig[i] > 1e-14 * smax.max(1.0) {
            (xb[i] / sig[i]).clamp(0.0, 1.0)
        } else {
            0.0
        }
    });
    let u = &eig.eigenvectors;
    (t, u * DMatrix::from_diagonal(&ratio) * u.transpose() * x0)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn planar_and_scalar_cases() {
        let (t, x) = project_vector_epigraph_qp(0.0, &[2.0], 1);
        assert!((t - 1.0).abs() < 1e-8 && (x[0] - 1.0).abs() < 1e-8);
        let (t, x) = project_vector_epigraph_qp(5.0, &[1.0, 2.0], 1);
        assert!((t - 5.0).abs() < 1e-8 && (x[1] - 2.0).abs() < 1e-8);
        let (t, x) = project_vector_epigraph_qp(-5.0, &[1.0, 2.0], 2);
        assert!(t.abs() < 1e-8 && x.iter().all(|v| v.abs() < 1e-8));
    }

    #[test]
    fn nuclear_projection_of_rank_one() {
        // k = m: the nuclear norm epigraph; (0, diag(2, 0)) projects to (1, diag(1, 0))
        let x = DMatrix::from_row_slice(2, 3, &[2.0, 0.0, 0.0, 0.0, 0.0, 0.0]);
        let (t, p) = project_epigraph_qp(0.0, &x, 2);
        assert!((t - 1.0).abs() < 1e-8);
        assert!((p[(0, 0)] - 1.0).abs() < 1e-8 && p.norm() < 1.0 + 1e-8);
    }
}
