//! Problem instances, the Lagrangian, the KKT residual maps `Ψ` and `Ψ̃`, the
//! directional derivative of `Ψ̃`, and sampled second-order and constraint
//! qualification checks.
//!
//! The problem is `min f(𝒳)  s.t.  h(𝒳) = 0,  G(𝒳) ∈ K` over `𝕏 = ℝ × ℝ^{m×n}`.

use nalgebra::{DMatrix, DVector};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::Serialize;

use crate::cone::KyFanCone;
use crate::context::CriticalConeContext;
use crate::dirderiv::pi_k_dirderiv;
use crate::error::{Error, Result};
use crate::point::ConePoint;
use crate::scalar::{lit, to_f64, Real};
use crate::sigma::upsilon;
use crate::spectral::sym_eigen;
use crate::tangent_critical::{in_critical_cone, project_critical};

/// Problem dimensions: matrix shape, number of equality constraints, and `k`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub struct Dims {
    pub m: usize,
    pub n: usize,
    pub p: usize,
    pub k: usize,
}

impl Dims {
    /// Dimension of `𝕏`.
    pub fn space(&self) -> usize {
        1 + self.m * self.n
    }
}

/// Callbacks describing `f`, `h` and `G`.
///
/// `G` defaults to the identity. Second-derivative callbacks return the
/// contraction with the multiplier applied to a direction.
pub trait ProblemInstance<T: Real>: Sync {
    fn dims(&self) -> Dims;
    fn tag(&self) -> &str {
        "instance"
    }
    fn f_value(&self, x: &ConePoint<T>) -> T;
    fn f_grad(&self, x: &ConePoint<T>) -> ConePoint<T>;
    fn f_hess_vec(&self, x: &ConePoint<T>, v: &ConePoint<T>) -> ConePoint<T>;
    fn h_value(&self, x: &ConePoint<T>) -> DVector<T>;
    fn h_jac(&self, x: &ConePoint<T>, v: &ConePoint<T>) -> DVector<T>;
    fn h_adjoint(&self, x: &ConePoint<T>, u: &DVector<T>) -> ConePoint<T>;
    /// `Σ λ_i ∇²h_i(𝒳) v`.
    fn h_second(&self, x: &ConePoint<T>, _lambda: &DVector<T>, _v: &ConePoint<T>) -> ConePoint<T> {
        ConePoint::zeros(x.m(), x.n())
    }
    fn g_value(&self, x: &ConePoint<T>) -> ConePoint<T> {
        x.clone()
    }
    fn g_jac(&self, _x: &ConePoint<T>, v: &ConePoint<T>) -> ConePoint<T> {
        v.clone()
    }
    fn g_adjoint(&self, _x: &ConePoint<T>, y: &ConePoint<T>) -> ConePoint<T> {
        y.clone()
    }
    /// `⟨𝒴, ∇²G(𝒳)(v, ·)⟩`.
    fn g_second(&self, x: &ConePoint<T>, _y: &ConePoint<T>, _v: &ConePoint<T>) -> ConePoint<T> {
        ConePoint::zeros(x.m(), x.n())
    }
    /// Whether `G` is the identity, which enables exact critical-cone sampling.
    fn g_is_identity(&self) -> bool {
        true
    }
}

/// Quadratic objective `½⟨v, Qv⟩ + ⟨c, v⟩` on `v = [t, X row-major]`,
/// affine equalities `E v = d`, and `G` the identity.
#[derive(Debug, Clone)]
pub struct QpData<T: Real> {
    pub m: usize,
    pub n: usize,
    pub k: usize,
    pub q: DMatrix<T>,
    pub c: DVector<T>,
    pub e: DMatrix<T>,
    pub d: DVector<T>,
    pub tag: String,
}

impl<T: Real> QpData<T> {
    pub fn new(
        m: usize,
        n: usize,
        k: usize,
        q: DMatrix<T>,
        c: DVector<T>,
        e: DMatrix<T>,
        d: DVector<T>,
    ) -> Result<Self> {
        let nn = 1 + m * n;
        if m == 0 || m > n || k == 0 || k > m {
            return Err(Error::InvalidInput(format!("need 1 <= k <= m <= n, got m={m} n={n} k={k}")));
        }
        if q.shape() != (nn, nn) || c.len() != nn || e.ncols() != nn || e.nrows() != d.len() {
            return Err(Error::Dimension(format!(
                "Q {:?}, c {}, E {:?}, d {} inconsistent with space dimension {nn}",
                q.shape(),
                c.len(),
                e.shape(),
                d.len()
            )));
        }
        if (&q - q.transpose()).amax() > lit::<T>(1e-10) * q.amax().max(T::one()) {
            return Err(Error::InvalidInput("Q must be symmetric".into()));
        }
        Ok(Self { m, n, k, q, c, e, d, tag: "quadratic".into() })
    }

    fn vec(&self, x: &ConePoint<T>) -> DVector<T> {
        x.to_vector()
    }

    fn unvec(&self, v: &DVector<T>) -> ConePoint<T> {
        ConePoint::from_vector(v, self.m, self.n).expect("shape fixed by construction")
    }
}

impl<T: Real> ProblemInstance<T> for QpData<T> {
    fn dims(&self) -> Dims {
        Dims { m: self.m, n: self.n, p: self.e.nrows(), k: self.k }
    }
    fn tag(&self) -> &str {
        &self.tag
    }
    fn f_value(&self, x: &ConePoint<T>) -> T {
        let v = self.vec(x);
        (&self.q * &v).dot(&v) * lit::<T>(0.5) + self.c.dot(&v)
    }
    fn f_grad(&self, x: &ConePoint<T>) -> ConePoint<T> {
        self.unvec(&(&self.q * self.vec(x) + &self.c))
    }
    fn f_hess_vec(&self, _x: &ConePoint<T>, v: &ConePoint<T>) -> ConePoint<T> {
        self.unvec(&(&self.q * self.vec(v)))
    }
    fn h_value(&self, x: &ConePoint<T>) -> DVector<T> {
        &self.e * self.vec(x) - &self.d
    }
    fn h_jac(&self, _x: &ConePoint<T>, v: &ConePoint<T>) -> DVector<T> {
        &self.e * self.vec(v)
    }
    fn h_adjoint(&self, _x: &ConePoint<T>, u: &DVector<T>) -> ConePoint<T> {
        self.unvec(&(self.e.transpose() * u))
    }
}

/// Nuclear-norm regularized least squares `min ½‖A vec(X) − b‖² + ρ‖X‖_*  s.t.  E vec(X) = d`,
/// written over the cone with `k = m` as `f(𝒳) = ½‖A vec(X) − b‖² + ρt`.
#[derive(Debug, Clone)]
pub struct NlsInstance<T: Real> {
    pub m: usize,
    pub n: usize,
    pub a: DMatrix<T>,
    pub b: DVector<T>,
    pub rho: T,
    pub e: DMatrix<T>,
    pub d: DVector<T>,
}

impl<T: Real> NlsInstance<T> {
    /// The equivalent quadratic instance.
    pub fn to_qp(&self) -> Result<QpData<T>> {
        let mn = self.m * self.n;
        if self.a.ncols() != mn
            || self.a.nrows() != self.b.len()
            || self.e.ncols() != mn
            || self.e.nrows() != self.d.len()
        {
            return Err(Error::Dimension("A, b, E, d inconsistent with the matrix shape".into()));
        }
        if !(self.rho > T::zero()) {
            return Err(Error::InvalidInput("rho must be positive".into()));
        }
        let nn = 1 + mn;
        let mut q = DMatrix::zeros(nn, nn);
        q.view_mut((1, 1), (mn, mn)).copy_from(&(self.a.transpose() * &self.a));
        let mut c = DVector::zeros(nn);
        c[0] = self.rho;
        c.rows_mut(1, mn).copy_from(&(-(self.a.transpose() * &self.b)));
        let mut e = DMatrix::zeros(self.e.nrows(), nn);
        e.view_mut((0, 1), (self.e.nrows(), mn)).copy_from(&self.e);
        let mut qp = QpData::new(self.m, self.n, self.m, q, c, e, self.d.clone())?;
        qp.tag = "nls".into();
        Ok(qp)
    }
}

/// A primal-dual triple `(𝒳, λ, 𝒴)`.
#[derive(Debug, Clone, PartialEq)]
pub struct KktTriple<T: Real> {
    pub x: ConePoint<T>,
    pub lambda: DVector<T>,
    pub y: ConePoint<T>,
}

impl<T: Real> KktTriple<T> {
    pub fn zeros(d: Dims) -> Self {
        Self { x: ConePoint::zeros(d.m, d.n), lambda: DVector::zeros(d.p), y: ConePoint::zeros(d.m, d.n) }
    }

    pub fn norm(&self) -> T {
        (self.x.norm().powi(2) + self.lambda.norm_squared() + self.y.norm().powi(2)).sqrt()
    }

    pub fn sub(&self, o: &Self) -> Self {
        Self { x: self.x.sub(&o.x), lambda: &self.lambda - &o.lambda, y: self.y.sub(&o.y) }
    }

    pub fn axpy(&self, s: T, o: &Self) -> Self {
        Self { x: self.x.axpy(s, &o.x), lambda: &self.lambda + &o.lambda * s, y: self.y.axpy(s, &o.y) }
    }

    pub fn is_finite(&self) -> bool {
        self.x.is_finite() && self.y.is_finite() && self.lambda.iter().all(|v| v.is_finite())
    }

    fn check(&self, d: Dims) -> Result<()> {
        self.x.check_shape(d.m, d.n)?;
        self.y.check_shape(d.m, d.n)?;
        if self.lambda.len() != d.p {
            return Err(Error::Dimension(format!("expected {} multipliers, got {}", d.p, self.lambda.len())));
        }
        if !self.is_finite() {
            return Err(Error::InvalidInput("triple has non-finite entries".into()));
        }
        Ok(())
    }
}

/// Perturbation `δ = (δ_f, δ_h, δ_G) ∈ 𝕏 × ℝ^p × 𝕏`.
#[derive(Debug, Clone, PartialEq)]
pub struct Perturbation<T: Real> {
    pub f: ConePoint<T>,
    pub h: DVector<T>,
    pub g: ConePoint<T>,
}

impl<T: Real> Perturbation<T> {
    pub fn zeros(d: Dims) -> Self {
        Self { f: ConePoint::zeros(d.m, d.n), h: DVector::zeros(d.p), g: ConePoint::zeros(d.m, d.n) }
    }

    pub fn norm(&self) -> T {
        (self.f.norm().powi(2) + self.h.norm_squared() + self.g.norm().powi(2)).sqrt()
    }
}

/// The three blocks of `Ψ` or `Ψ̃`.
#[derive(Debug, Clone, PartialEq)]
pub struct PsiValue<T: Real> {
    pub grad: ConePoint<T>,
    pub feas: DVector<T>,
    pub proj: ConePoint<T>,
}

impl<T: Real> PsiValue<T> {
    pub fn norm(&self) -> T {
        (self.grad.norm().powi(2) + self.feas.norm_squared() + self.proj.norm().powi(2)).sqrt()
    }

    pub fn sub(&self, o: &Self) -> Self {
        Self { grad: self.grad.sub(&o.grad), feas: &self.feas - &o.feas, proj: self.proj.sub(&o.proj) }
    }

    pub fn to_vector(&self) -> DVector<T> {
        let a = self.grad.to_vector();
        let c = self.proj.to_vector();
        DVector::from_iterator(
            a.len() + self.feas.len() + c.len(),
            a.iter().chain(self.feas.iter()).chain(c.iter()).copied(),
        )
    }
}

fn cone_of<T: Real, P: ProblemInstance<T> + ?Sized>(inst: &P) -> Result<KyFanCone> {
    let d = inst.dims();
    KyFanCone::new(d.m, d.n, d.k)
}

/// `∇f(𝒳) + h′(𝒳)*λ + G′(𝒳)*𝒴`.
pub fn lagrangian_grad<T: Real, P: ProblemInstance<T> + ?Sized>(inst: &P, tr: &KktTriple<T>) -> Result<ConePoint<T>> {
    tr.check(inst.dims())?;
    Ok(inst.f_grad(&tr.x).add(&inst.h_adjoint(&tr.x, &tr.lambda)).add(&inst.g_adjoint(&tr.x, &tr.y)))
}

/// `∇²_{𝒳𝒳}L(𝒳, λ, 𝒴) v`.
pub fn lagrangian_hess_vec<T: Real, P: ProblemInstance<T> + ?Sized>(
    inst: &P,
    tr: &KktTriple<T>,
    v: &ConePoint<T>,
) -> ConePoint<T> {
    inst.f_hess_vec(&tr.x, v).add(&inst.h_second(&tr.x, &tr.lambda, v)).add(&inst.g_second(&tr.x, &tr.y, v))
}

/// `Ψ(𝒳, λ, 𝒴) = (∇_𝒳 L, h(𝒳), G(𝒳) − Π_K(G(𝒳) + 𝒴))`.
pub fn psi_residual<T: Real, P: ProblemInstance<T> + ?Sized>(inst: &P, tr: &KktTriple<T>) -> Result<PsiValue<T>> {
    psi_tilde_residual(inst, &Perturbation::zeros(inst.dims()), tr)
}

/// `Ψ̃(δ, 𝒳, λ, 𝒴) = (∇_𝒳 L − δ_f, h(𝒳) − δ_h, G(𝒳) − δ_G − Π_K(G(𝒳) − δ_G + 𝒴))`.
pub fn psi_tilde_residual<T: Real, P: ProblemInstance<T> + ?Sized>(
    inst: &P,
    delta: &Perturbation<T>,
    tr: &KktTriple<T>,
) -> Result<PsiValue<T>> {
    let cone = cone_of(inst)?;
    let grad = lagrangian_grad(inst, tr)?.sub(&delta.f);
    let feas = inst.h_value(&tr.x) - &delta.h;
    let g = inst.g_value(&tr.x).sub(&delta.g);
    let proj = g.sub(&cone.project_k(&g.add(&tr.y), lit(crate::cone::BOUNDARY_TOL))?.onto_k);
    Ok(PsiValue { grad, feas, proj })
}

/// Independent check of `𝒴 ∈ 𝒩_K(G)`: `G ∈ K`, `𝒴 ∈ K°`, `⟨G, 𝒴⟩ = 0`.
pub fn normal_cone_holds<T: Real>(cone: &KyFanCone, g: &ConePoint<T>, y: &ConePoint<T>, tol: T) -> bool {
    let s = tol * (g.norm() + y.norm()).max(T::one());
    cone.in_k(g, s) && cone.in_kpolar(y, s) && g.dot(y).abs() <= s * (g.norm() + y.norm()).max(T::one())
}

/// `Ψ̃′((δ, 𝒳, λ, 𝒴); (Δδ, Δ𝒳, Δλ, Δ𝒴))`.
pub fn psi_tilde_dirderiv<T: Real, P: ProblemInstance<T> + ?Sized>(
    inst: &P,
    delta: &Perturbation<T>,
    tr: &KktTriple<T>,
    ddelta: &Perturbation<T>,
    dir: &KktTriple<T>,
) -> Result<PsiValue<T>> {
    let cone = cone_of(inst)?;
    dir.check(inst.dims())?;
    let grad = lagrangian_hess_vec(inst, tr, &dir.x)
        .add(&inst.h_adjoint(&tr.x, &dir.lambda))
        .add(&inst.g_adjoint(&tr.x, &dir.y))
        .sub(&ddelta.f);
    let feas = inst.h_jac(&tr.x, &dir.x) - &ddelta.h;
    let base = inst.g_value(&tr.x).sub(&delta.g).add(&tr.y);
    let ctx = CriticalConeContext::new(cone, &base, lit(crate::cone::BOUNDARY_TOL))?;
    let dg = inst.g_jac(&tr.x, &dir.x).sub(&ddelta.g);
    let proj = dg.sub(&pi_k_dirderiv(&ctx, &dg.add(&dir.y))?);
    Ok(PsiValue { grad, feas, proj })
}

/// Multipliers recovered at a primal point together with the stationarity residual.
#[derive(Debug, Clone)]
pub struct MultiplierEstimate<T: Real> {
    pub lambda: DVector<T>,
    pub y: ConePoint<T>,
    /// `‖∇f + h′*λ + 𝒴‖`.
    pub residual: T,
}

/// Least-squares multipliers at `𝒳̄` for instances with affine `h` and `G` the identity.
///
/// `𝒴` is found by cyclic Dykstra projections onto the stationarity set
/// `{𝒴 : −∇f − 𝒴 ∈ range h′*}`, `K°` and `𝒳̄^⊥` (whose intersection with `K°`
/// is `𝒩_K(𝒳̄)`); `λ` then solves the stationarity equation in least squares.
pub fn estimate_multipliers<T: Real, P: ProblemInstance<T> + ?Sized>(
    inst: &P,
    xbar: &ConePoint<T>,
    iters: usize,
) -> Result<MultiplierEstimate<T>> {
    if !inst.g_is_identity() {
        return Err(Error::InvalidInput("multiplier recovery needs G to be the identity".into()));
    }
    let d = inst.dims();
    xbar.check_shape(d.m, d.n)?;
    let cone = cone_of(inst)?;
    let jac = h_jacobian(inst, xbar);
    let jt = jac.transpose();
    // orthogonal projector onto range h′*
    let (ev, q) = sym_eigen(&(&jt * &jac));
    let top = ev.iter().fold(T::zero(), |a, &b| a.max(b.abs()));
    let cols: Vec<DVector<T>> = (0..ev.len())
        .filter(|&i| ev[i] > lit::<T>(1e-12) * top.max(T::one()))
        .map(|i| q.column(i).clone_owned())
        .collect();
    let range = if cols.is_empty() { DMatrix::zeros(d.space(), 0) } else { DMatrix::from_columns(&cols) };
    let g = inst.f_grad(xbar).to_vector();
    let onto_affine = |y: &DVector<T>| {
        // remove the part of −g − y outside range h′*
        let r = -&g - y;
        let r_perp = &r - &range * (range.transpose() * &r);
        y + r_perp
    };
    let xv = xbar.to_vector();
    let xn2 = xv.norm_squared();
    let onto_plane = |y: &DVector<T>| if xn2 > T::zero() { y - &xv * (xv.dot(y) / xn2) } else { y.clone() };
    let onto_polar = |y: &DVector<T>| -> Result<DVector<T>> {
        let p = ConePoint::from_vector(y, d.m, d.n)?;
        Ok(cone.project_k(&p, lit(crate::cone::BOUNDARY_TOL))?.onto_kpolar.to_vector())
    };
    let mut y = onto_affine(&DVector::zeros(d.space()));
    let mut inc = [DVector::zeros(d.space()), DVector::zeros(d.space()), DVector::zeros(d.space())];
    for _ in 0..iters {
        let prev = y.clone();
        for (j, c) in inc.iter_mut().enumerate() {
            let w = &y + &*c;
            let p = match j {
                0 => onto_affine(&w),
                1 => onto_polar(&w)?,
                _ => onto_plane(&w),
            };
            *c = &w - &p;
            y = p;
        }
        if (&y - &prev).norm() <= lit::<T>(1e-15) * y.norm().max(T::one()) {
            break;
        }
    }
    let y = onto_polar(&y)?;
    let rhs = -&g - &y;
    let lambda = if d.p == 0 {
        DVector::zeros(0)
    } else {
        let (ev, q) = sym_eigen(&(&jac * &jt));
        let top = ev.iter().fold(T::zero(), |a, &b| a.max(b.abs()));
        let inv = DVector::from_iterator(
            ev.len(),
            ev.iter().map(|&v| if v > lit::<T>(1e-12) * top.max(T::one()) { T::one() / v } else { T::zero() }),
        );
        &q * DMatrix::from_diagonal(&inv) * q.transpose() * (&jac * rhs)
    };
    let y = ConePoint::from_vector(&y, d.m, d.n)?;
    let tr = KktTriple { x: xbar.clone(), lambda, y };
    let residual = lagrangian_grad(inst, &tr)?.norm();
    Ok(MultiplierEstimate { lambda: tr.lambda, y: tr.y, residual })
}

/// Verdict of a sampled second-order check.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum SoscVerdict {
    /// Every sampled critical direction had a positive form.
    HoldsSampled,
    Violated,
}

#[derive(Debug, Clone, Serialize)]
pub struct SoscReport {
    pub verdict: SoscVerdict,
    /// Smallest sampled value of the maximized form on unit critical directions.
    pub min_value: f64,
    /// Direction attaining `min_value`, as `[t, X row-major]`.
    pub witness: Option<Vec<f64>>,
    pub samples_used: usize,
    /// The critical cone appeared to be `{0}`.
    pub vacuous: bool,
}

/// Orthonormal basis of the kernel of `m` (columns), via the eigenvectors of `mᵀm`.
fn kernel_basis<T: Real>(m: &DMatrix<T>) -> DMatrix<T> {
    let nc = m.ncols();
    if m.nrows() == 0 {
        return DMatrix::identity(nc, nc);
    }
    let (ev, vecs) = sym_eigen(&(m.transpose() * m));
    let top = ev.iter().fold(T::zero(), |a, &b| a.max(b.abs()));
    let cut = lit::<T>(1e-12) * top.max(T::one());
    let cols: Vec<DVector<T>> = (0..nc).filter(|&i| ev[i] <= cut).map(|i| vecs.column(i).clone_owned()).collect();
    if cols.is_empty() {
        DMatrix::zeros(nc, 0)
    } else {
        DMatrix::from_columns(&cols)
    }
}

/// Dense matrix of `h′(𝒳)` on `[t, X row-major]`.
fn h_jacobian<T: Real, P: ProblemInstance<T> + ?Sized>(inst: &P, x: &ConePoint<T>) -> DMatrix<T> {
    let d = inst.dims();
    let nn = d.space();
    let mut jm = DMatrix::zeros(d.p, nn);
    for j in 0..nn {
        let mut e = DVector::zeros(nn);
        e[j] = T::one();
        let col = inst.h_jac(x, &ConePoint::from_vector(&e, d.m, d.n).expect("shape"));
        jm.set_column(j, &col);
    }
    jm
}

fn gaussian_point<T: Real>(rng: &mut ChaCha8Rng, m: usize, n: usize) -> ConePoint<T> {
    let mut g = || lit::<T>(StandardNormal.sample(rng));
    let t = g();
    ConePoint::new(t, DMatrix::from_fn(m, n, |_, _| g()))
}

/// Projection onto `{Z : h′Z = 0, Z ∈ 𝒞}` by Dykstra's alternating projections
/// (`G` the identity).
fn project_problem_critical<T: Real>(
    ctx: &CriticalConeContext<T>,
    kernel: &DMatrix<T>,
    z0: &ConePoint<T>,
    iters: usize,
) -> Result<ConePoint<T>> {
    let (m, n) = (ctx.m(), ctx.n());
    let onto_ker = |z: &ConePoint<T>| {
        let v = z.to_vector();
        ConePoint::from_vector(&(kernel * (kernel.transpose() * v)), m, n).expect("shape")
    };
    let mut x = z0.clone();
    let mut p = ConePoint::zeros(m, n);
    let mut q = ConePoint::zeros(m, n);
    for _ in 0..iters {
        let y = onto_ker(&x.add(&p));
        p = x.add(&p).sub(&y);
        let xn = project_critical(ctx, &y.add(&q))?;
        q = y.add(&q).sub(&xn);
        let moved = xn.sub(&x).norm();
        x = xn;
        if moved <= lit::<T>(1e-14) * x.norm().max(T::one()) {
            break;
        }
    }
    Ok(onto_ker(&x))
}

/// Membership of `Z` in the critical cone of the problem at `𝒳̄` with multiplier `𝒴̄`:
/// `h′Z = 0` and `G′Z ∈ 𝒞_K(G(𝒳̄) + 𝒴̄)`.
pub fn problem_critical_cone_member<T: Real, P: ProblemInstance<T> + ?Sized>(
    inst: &P,
    xbar: &ConePoint<T>,
    ybar: &ConePoint<T>,
    z: &ConePoint<T>,
    tol: T,
) -> Result<bool> {
    let ctx = CriticalConeContext::new(cone_of(inst)?, &inst.g_value(xbar).add(ybar), lit(crate::cone::BOUNDARY_TOL))?;
    let s = tol * z.norm().max(T::one());
    Ok(inst.h_jac(xbar, z).norm() <= s && in_critical_cone(&ctx, &inst.g_jac(xbar, z), tol)?)
}

/// Sampled second-order sufficient condition at `𝒳̄`.
///
/// Samples unit directions `Z` in the critical cone and evaluates
/// `max over multipliers of ⟨Z, ∇²L Z⟩ − Υ(G′Z)`. The verdict is a semi-decision.
pub fn sosc_check<T: Real, P: ProblemInstance<T> + ?Sized>(
    inst: &P,
    xbar: &ConePoint<T>,
    multipliers: &[(DVector<T>, ConePoint<T>)],
    n_samples: usize,
    tol: T,
    seed: u64,
) -> Result<SoscReport> {
    let (_, y0) = multipliers.first().ok_or_else(|| Error::InvalidInput("multiplier list is empty".into()))?;
    let d = inst.dims();
    let cone = cone_of(inst)?;
    let btol = lit::<T>(crate::cone::BOUNDARY_TOL);
    let ctxs: Vec<CriticalConeContext<T>> = multipliers
        .iter()
        .map(|(_, y)| CriticalConeContext::new(cone, &inst.g_value(xbar).add(y), btol))
        .collect::<Result<_>>()?;
    let kernel = kernel_basis(&h_jacobian(inst, xbar));
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut best: Option<(T, ConePoint<T>)> = None;
    let mut used = 0;
    for _ in 0..n_samples {
        let w = gaussian_point::<T>(&mut rng, d.m, d.n);
        let z = if inst.g_is_identity() {
            project_problem_critical(&ctxs[0], &kernel, &w, 500)?
        } else {
            let v = w.to_vector();
            let z = ConePoint::from_vector(&(&kernel * (kernel.transpose() * v)), d.m, d.n)?;
            if !problem_critical_cone_member(inst, xbar, y0, &z, lit(1e-8))? {
                continue;
            }
            z
        };
        let nz = z.norm();
        if nz <= lit::<T>(1e-8) * w.norm() {
            continue;
        }
        let z = z.scale(T::one() / nz);
        used += 1;
        let mut val: Option<T> = None;
        for ((lam, y), ctx) in multipliers.iter().zip(&ctxs) {
            let tr = KktTriple { x: xbar.clone(), lambda: lam.clone(), y: y.clone() };
            let q = z.dot(&lagrangian_hess_vec(inst, &tr, &z)) - upsilon(ctx, &inst.g_jac(xbar, &z));
            val = Some(val.map_or(q, |v: T| v.max(q)));
        }
        let v = val.expect("at least one multiplier");
        if best.as_ref().is_none_or(|(b, _)| v < *b) {
            best = Some((v, z));
        }
    }
    Ok(match best {
        None => SoscReport {
            verdict: SoscVerdict::HoldsSampled,
            min_value: f64::INFINITY,
            witness: None,
            samples_used: 0,
            vacuous: true,
        },
        Some((v, z)) => SoscReport {
            verdict: if v > tol { SoscVerdict::HoldsSampled } else { SoscVerdict::Violated },
            min_value: to_f64(v),
            witness: Some(z.to_vector().iter().map(|&a| to_f64(a)).collect()),
            samples_used: used,
            vacuous: false,
        },
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum SrcqVerdict {
    /// No dual certificate was found.
    HoldsNoCertificate,
    Fails,
}

#[derive(Debug, Clone, Serialize)]
pub struct SrcqReport {
    pub verdict: SrcqVerdict,
    /// Smallest residual of the certificate conditions on the unit sphere.
    pub min_residual: f64,
    /// `(λ̂, 𝒴̂ as [t, X row-major])` when the condition fails.
    pub certificate: Option<(Vec<f64>, Vec<f64>)>,
    pub starts: usize,
}

/// Searches for a unit `(λ̂, 𝒴̂)` with `h′*λ̂ + G′*𝒴̂ = 0` and `𝒴̂` in the polar of
/// `𝒯_K(G(𝒳̄)) ∩ 𝒴̄^⊥`; finding one refutes the strict constraint qualification.
pub fn srcq_check<T: Real, P: ProblemInstance<T> + ?Sized>(
    inst: &P,
    xbar: &ConePoint<T>,
    multiplier: &(DVector<T>, ConePoint<T>),
    n_starts: usize,
    tol: T,
    seed: u64,
) -> Result<SrcqReport> {
    let d = inst.dims();
    let nn = d.space();
    let ctx = CriticalConeContext::new(
        cone_of(inst)?,
        &inst.g_value(xbar).add(&multiplier.1),
        lit(crate::cone::BOUNDARY_TOL),
    )?;
    // M(λ, 𝒴) = h′*λ + G′*𝒴 as a dense matrix
    let mut mm = DMatrix::zeros(nn, d.p + nn);
    for j in 0..d.p {
        let mut e = DVector::zeros(d.p);
        e[j] = T::one();
        mm.set_column(j, &inst.h_adjoint(xbar, &e).to_vector());
    }
    for j in 0..nn {
        let mut e = DVector::zeros(nn);
        e[j] = T::one();
        let y = ConePoint::from_vector(&e, d.m, d.n)?;
        mm.set_column(d.p + j, &inst.g_adjoint(xbar, &y).to_vector());
    }
    let kernel = kernel_basis(&mm);
    if kernel.ncols() == 0 {
        return Ok(SrcqReport {
            verdict: SrcqVerdict::HoldsNoCertificate,
            min_residual: f64::INFINITY,
            certificate: None,
            starts: 0,
        });
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut best: Option<(T, DVector<T>)> = None;
    for _ in 0..n_starts {
        // random unit vector in the kernel, then alternate with the cone ℝ^p × 𝒞°
        let c = DVector::from_fn(kernel.ncols(), |_, _| lit::<T>(StandardNormal.sample(&mut rng)));
        let mut v = &kernel * c;
        for _ in 0..300 {
            v = &kernel * (kernel.transpose() * &v);
            let y = ConePoint::from_vector(&v.rows(d.p, nn).clone_owned(), d.m, d.n)?;
            let yp = y.sub(&project_critical(&ctx, &y)?);
            v.rows_mut(d.p, nn).copy_from(&yp.to_vector());
            let nv = v.norm();
            if nv <= lit::<T>(1e-300) {
                break;
            }
            v /= nv;
        }
        let nv = v.norm();
        if nv <= T::zero() {
            continue;
        }
        let res = (&mm * &v).norm() / nv;
        if best.as_ref().is_none_or(|(b, _)| res < *b) {
            best = Some((res, v / nv));
        }
    }
    let (res, v) = best.expect("at least one start with a nonzero iterate");
    let fails = res <= tol;
    Ok(SrcqReport {
        verdict: if fails { SrcqVerdict::Fails } else { SrcqVerdict::HoldsNoCertificate },
        min_residual: to_f64(res),
        certificate: fails.then(|| {
            (v.rows(0, d.p).iter().map(|&a| to_f64(a)).collect(), v.rows(d.p, nn).iter().map(|&a| to_f64(a)).collect())
        }),
        starts: n_starts,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum CalmnessVerdict {
    /// No nonzero direction with vanishing derivative was found.
    OnlyZeroSampled,
    Witness,
}

#[derive(Debug, Clone, Serialize)]
pub struct CalmnessReport {
    pub verdict: CalmnessVerdict,
    /// Smallest `‖Ψ̃′(base; (0, Δ))‖` over unit `Δ` found.
    pub min_norm: f64,
    /// The minimizing `Δ = (Δ𝒳, Δλ, Δ𝒴)` stacked, when it is a witness.
    pub witness: Option<Vec<f64>>,
    pub starts: usize,
}

fn split_dir<T: Real>(v: &DVector<T>, d: Dims) -> KktTriple<T> {
    let nn = d.space();
    KktTriple {
        x: ConePoint::from_vector(&v.rows(0, nn).clone_owned(), d.m, d.n).expect("shape"),
        lambda: v.rows(nn, d.p).clone_owned(),
        y: ConePoint::from_vector(&v.rows(nn + d.p, nn).clone_owned(), d.m, d.n).expect("shape"),
    }
}

/// Multi-start search for a unit `Δ` with `Ψ̃′((0, 𝒳̄, λ̄, 𝒴̄); (0, Δ)) = 0`.
///
/// Each start linearizes the piecewise-linear map by finite differences around
/// the current direction and moves to the smallest right singular vector.
pub fn kkt_isolated_calmness_probe<T: Real, P: ProblemInstance<T> + ?Sized>(
    inst: &P,
    tr: &KktTriple<T>,
    n_starts: usize,
    tol: T,
    seed: u64,
) -> Result<CalmnessReport> {
    let d = inst.dims();
    let dim = 2 * d.space() + d.p;
    let zero = Perturbation::zeros(d);
    let eval = |v: &DVector<T>| -> Result<DVector<T>> {
        Ok(psi_tilde_dirderiv(inst, &zero, tr, &zero, &split_dir(v, d))?.to_vector())
    };
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut best: Option<(T, DVector<T>)> = None;
    let h = lit::<T>(1e-7);
    for _ in 0..n_starts {
        let mut v = DVector::from_fn(dim, |_, _| lit::<T>(StandardNormal.sample(&mut rng)));
        v /= v.norm();
        for _ in 0..8 {
            let f0 = eval(&v)?;
            let r0 = f0.norm();
            if best.as_ref().is_none_or(|(b, _)| r0 < *b) {
                best = Some((r0, v.clone()));
            }
            let mut jac = DMatrix::zeros(f0.len(), dim);
            for j in 0..dim {
                let mut w = v.clone();
                w[j] += h;
                jac.set_column(j, &((eval(&w)? - &f0) / h));
            }
            let (_, vecs) = sym_eigen(&(jac.transpose() * &jac));
            let mut next = vecs.column(dim - 1).clone_owned();
            if next.dot(&v) < T::zero() {
                next = -next;
            }
            if (&next - &v).norm() <= lit::<T>(1e-12) {
                break;
            }
            v = next;
        }
        let r = eval(&v)?.norm();
        if best.as_ref().is_none_or(|(b, _)| r < *b) {
            best = Some((r, v.clone()));
        }
    }
    let (r, v) = best.ok_or_else(|| Error::InvalidInput("calmness probe needs at least one start".into()))?;
    let hit = r <= tol;
    Ok(CalmnessReport {
        verdict: if hit { CalmnessVerdict::Witness } else { CalmnessVerdict::OnlyZeroSampled },
        min_norm: to_f64(r),
        witness: hit.then(|| v.iter().map(|&a| to_f64(a)).collect()),
        starts: n_starts,
    })
}

/// Instances with known KKT points.
pub mod fixtures {
    use super::*;
    use rand::Rng;

    /// An instance together with a reference KKT triple.
    #[derive(Debug, Clone)]
    pub struct Fixture {
        pub name: String,
        pub nls: NlsInstance<f64>,
        pub qp: QpData<f64>,
        pub triple: KktTriple<f64>,
    }

    fn scalar_point(t: f64, x: f64) -> ConePoint<f64> {
        ConePoint::new(t, DMatrix::from_element(1, 1, x))
    }

    /// `min ½(x − 3)² + |x|`: solution `x = t = 2`, multiplier `𝒴 = (−1, 1)`.
    pub fn scalar_nls() -> Fixture {
        let nls = NlsInstance {
            m: 1,
            n: 1,
            a: DMatrix::from_element(1, 1, 1.0),
            b: DVector::from_element(1, 3.0),
            rho: 1.0,
            e: DMatrix::zeros(0, 1),
            d: DVector::zeros(0),
        };
        let qp = nls.to_qp().expect("valid fixture");
        let triple = KktTriple { x: scalar_point(2.0, 2.0), lambda: DVector::zeros(0), y: scalar_point(-1.0, 1.0) };
        Fixture { name: "scalar-nls".into(), nls, qp, triple }
    }

    /// The scalar problem with the constraint `x = 2` stated twice; multipliers are not unique.
    pub fn rank_deficient() -> Fixture {
        let nls = NlsInstance {
            m: 1,
            n: 1,
            a: DMatrix::from_element(1, 1, 1.0),
            b: DVector::from_element(1, 3.0),
            rho: 1.0,
            e: DMatrix::from_element(2, 1, 1.0),
            d: DVector::from_element(2, 2.0),
        };
        let qp = nls.to_qp().expect("valid fixture");
        let triple = KktTriple { x: scalar_point(2.0, 2.0), lambda: DVector::zeros(2), y: scalar_point(-1.0, 1.0) };
        Fixture { name: "rank-deficient".into(), nls, qp, triple }
    }

    /// A random `2 × n` instance built backwards from a planted KKT triple.
    ///
    /// `𝒳* = Π_K(W)`, `𝒴* = Π_{K°}(W)` for `W` outside both cones; `A` has full
    /// column rank and `b` is chosen so that stationarity holds with a random `λ*`.
    pub fn random_nls(seed: u64) -> Fixture {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let m = 2;
        let n = rng.gen_range(2..=3);
        let mn = m * n;
        let cone = KyFanCone::new(m, n, m).expect("valid cone");
        let mut g = || -> f64 { StandardNormal.sample(&mut rng) };
        let x0 = DMatrix::from_fn(m, n, |_, _| g());
        let nuc = cone.norm_of(&x0);
        let w = ConePoint::new(nuc * 0.5, x0);
        let pr = cone.project_k(&w, crate::cone::BOUNDARY_TOL).expect("finite point");
        let (xs, ys) = (pr.onto_k, pr.onto_kpolar);
        let pa = mn + 2;
        let a = DMatrix::from_fn(pa, mn, |_, _| g());
        let e = DMatrix::from_fn(1, mn, |_, _| g());
        let lam = DVector::from_fn(1, |_, _| g());
        let xv = xs.to_vector().rows(1, mn).clone_owned();
        let yv = ys.to_vector().rows(1, mn).clone_owned();
        let target = e.transpose() * &lam + yv;
        let ata = a.transpose() * &a;
        let r = -(&a * ata.lu().solve(&target).expect("full column rank"));
        let b = &a * &xv - r;
        let d = &e * &xv;
        let nls = NlsInstance { m, n, a, b, rho: -ys.t, e, d };
        let qp = nls.to_qp().expect("valid fixture");
        let triple = KktTriple { x: xs, lambda: lam, y: ys };
        Fixture { name: format!("random-nls-{seed}"), nls, qp, triple }
    }
}

#[cfg(test)]
mod tests {
    use super::fixtures::*;
    use super::*;

    #[test]
    fn fixtures_are_kkt_points() {
        for f in [scalar_nls(), rank_deficient(), random_nls(1), random_nls(2)] {
            let r = psi_residual(&f.qp, &f.triple).unwrap();
            assert!(r.norm() <= 1e-9, "{} {}", f.name, r.norm());
            let cone = KyFanCone::new(f.qp.m, f.qp.n, f.qp.k).unwrap();
            assert!(normal_cone_holds(&cone, &f.triple.x, &f.triple.y, 1e-9));
        }
    }

    #[test]
    fn scalar_lagrangian_gradient() {
        let f = scalar_nls();
        let g = lagrangian_grad(&f.qp, &f.triple).unwrap();
        assert!(g.norm() <= 1e-14);
        let z = KktTriple { x: f.triple.x.clone(), lambda: DVector::zeros(0), y: ConePoint::zeros(1, 1) };
        let g = lagrangian_grad(&f.qp, &z).unwrap();
        assert_eq!((g.t, g.x[(0, 0)]), (1.0, -1.0));
    }

    #[test]
    fn scalar_checks() {
        let f = scalar_nls();
        let mult = (f.triple.lambda.clone(), f.triple.y.clone());
        let s = sosc_check(&f.qp, &f.triple.x, std::slice::from_ref(&mult), 50, 1e-8, 1).unwrap();
        assert_eq!(s.verdict, SoscVerdict::HoldsSampled);
        assert!((s.min_value - 0.5).abs() < 1e-8, "{}", s.min_value);
        let q = srcq_check(&f.qp, &f.triple.x, &mult, 20, 1e-8, 1).unwrap();
        assert_eq!(q.verdict, SrcqVerdict::HoldsNoCertificate);
        let c = kkt_isolated_calmness_probe(&f.qp, &f.triple, 20, 1e-6, 1).unwrap();
        assert_eq!(c.verdict, CalmnessVerdict::OnlyZeroSampled);
    }

    #[test]
    fn rank_deficient_checks() {
        let f = rank_deficient();
        let mult = (f.triple.lambda.clone(), f.triple.y.clone());
        let q = srcq_check(&f.qp, &f.triple.x, &mult, 20, 1e-8, 1).unwrap();
        assert_eq!(q.verdict, SrcqVerdict::Fails);
        let c = kkt_isolated_calmness_probe(&f.qp, &f.triple, 20, 1e-6, 1).unwrap();
        assert_eq!(c.verdict, CalmnessVerdict::Witness);
    }

    #[test]
    fn recovered_multipliers_are_stationary() {
        for f in [scalar_nls(), rank_deficient(), random_nls(5), random_nls(6)] {
            let est = estimate_multipliers(&f.qp, &f.triple.x, 5000).unwrap();
            assert!(est.residual <= 1e-8, "{} {}", f.name, est.residual);
            let tr = KktTriple { x: f.triple.x.clone(), lambda: est.lambda, y: est.y };
            assert!(psi_residual(&f.qp, &tr).unwrap().norm() <= 1e-8);
        }
    }

    #[test]
    fn degenerate_objective_violates_sosc() {
        // f ≡ 0, no constraints, boundary point (1, [1]) with multiplier 0
        let qp = QpData::new(1, 1, 1, DMatrix::zeros(2, 2), DVector::zeros(2), DMatrix::zeros(0, 2), DVector::zeros(0))
            .unwrap();
        let x = ConePoint::new(1.0, DMatrix::from_element(1, 1, 1.0));
        let s = sosc_check(&qp, &x, &[(DVector::zeros(0), ConePoint::zeros(1, 1))], 20, 1e-8, 3).unwrap();
        assert_eq!(s.verdict, SoscVerdict::Violated);
    }

    #[test]
    fn dirderiv_matches_finite_differences() {
        let f = random_nls(3);
        let d = f.qp.dims();
        let zero = Perturbation::zeros(d);
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        for _ in 0..5 {
            let dir = KktTriple {
                x: gaussian_point(&mut rng, d.m, d.n),
                lambda: DVector::from_fn(d.p, |_, _| StandardNormal.sample(&mut rng)),
                y: gaussian_point(&mut rng, d.m, d.n),
            };
            let an = psi_tilde_dirderiv(&f.qp, &zero, &f.triple, &zero, &dir).unwrap();
            let s = 1e-7;
            let fd =
                psi_residual(&f.qp, &f.triple.axpy(s, &dir)).unwrap().sub(&psi_residual(&f.qp, &f.triple).unwrap());
            let fd = fd.to_vector() / s;
            assert!((fd - an.to_vector()).norm() <= 1e-5 * (1.0 + dir.norm()));
        }
    }
}
