//! Subcommand implementations. Each returns a JSON report, a verdict flag and a
//! one-line human summary.

use std::collections::BTreeMap;

use kyfan::dirderiv::{block_equation_residuals, positive_homogeneity_check};
use kyfan::gph::{generate_member_pair, member_via_conditions, member_via_dirderiv};
use kyfan::harness::{run_error_bound_experiment, solve_perturbed, ExperimentConfig, ExperimentOutput, SampleMode};
use kyfan::kkt::{
    estimate_multipliers, kkt_isolated_calmness_probe, normal_cone_holds, psi_residual, sosc_check, srcq_check,
    CalmnessReport, CalmnessVerdict, Dims, KktTriple, Perturbation, ProblemInstance, SoscReport, SoscVerdict,
    SrcqReport, SrcqVerdict,
};
use kyfan::sigma::upsilon;
use kyfan::{pi_k_dirderiv, ConePoint, CriticalConeContext, DerivativePair, KyFanCone, Regime};
use nalgebra::DMatrix;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use crate::json::{ConfigEcho, Loaded, PointJson, TripleJson};
use crate::CliError;

pub struct Report {
    pub json: serde_json::Value,
    /// False when the verdict is negative.
    pub positive: bool,
    pub summary: String,
}

fn to_value<S: Serialize>(s: &S) -> serde_json::Value {
    serde_json::to_value(s).expect("report types serialize")
}

#[derive(Serialize)]
struct ProjectionOut {
    cone: KyFanCone,
    regime: Regime,
    onto_k: PointJson,
    onto_kpolar: PointJson,
    theta: f64,
    u_bar: Vec<f64>,
    sigma_bar: Vec<f64>,
    k0: usize,
    k1: usize,
    on_boundary_k: bool,
}

pub fn project(cone: KyFanCone, p: &ConePoint<f64>, tol: f64) -> Result<Report, CliError> {
    let r = cone.project_k(p, tol)?;
    let out = ProjectionOut {
        cone,
        regime: r.regime,
        onto_k: PointJson::from_point(&r.onto_k),
        onto_kpolar: PointJson::from_point(&r.onto_kpolar),
        theta: r.theta,
        u_bar: r.u_bar.iter().copied().collect(),
        sigma_bar: r.sigma_bar.iter().copied().collect(),
        k0: r.k0,
        k1: r.k1,
        on_boundary_k: r.on_boundary_k,
    };
    let summary = format!("regime {:?}, theta {:.6e}, |onto_k| {:.6e}", r.regime, r.theta, r.onto_k.norm());
    Ok(Report { json: to_value(&out), positive: true, summary })
}

#[derive(Serialize)]
struct Homogeneity {
    max_rel_error: f64,
    ok: bool,
}

#[derive(Serialize)]
struct BlockEquations {
    residuals: BTreeMap<String, f64>,
    holds: bool,
}

#[derive(Serialize)]
struct DirderivOut {
    cone: KyFanCone,
    regime: Regime,
    derivative: PointJson,
    homogeneity: Homogeneity,
    block_equations: BlockEquations,
}

pub fn dirderiv(cone: KyFanCone, base: &ConePoint<f64>, dir: &ConePoint<f64>, tol: f64) -> Result<Report, CliError> {
    let ctx = CriticalConeContext::new(cone, base, kyfan::cone::BOUNDARY_TOL)?;
    dir.x
        .shape()
        .eq(&(cone.m, cone.n))
        .then_some(())
        .ok_or_else(|| CliError::Usage(format!("direction must be {}x{}", cone.m, cone.n)))?;
    let d = pi_k_dirderiv(&ctx, dir)?;
    let h = positive_homogeneity_check(&ctx, dir, &[0.5, 2.0, 10.0], tol)?;
    let pair = DerivativePair { delta1: dir.sub(&d), delta2: d.clone() };
    let b = block_equation_residuals(&ctx, &pair, tol)?;
    let out = DirderivOut {
        cone,
        regime: ctx.regime(),
        derivative: PointJson::from_point(&d),
        homogeneity: Homogeneity { max_rel_error: h.max_rel_error, ok: h.ok },
        block_equations: BlockEquations {
            residuals: b.residuals.iter().map(|(k, v)| (k.to_string(), *v)).collect(),
            holds: b.holds,
        },
    };
    let summary = format!(
        "regime {:?}, |derivative| {:.6e}, homogeneity {}, block equations {}",
        ctx.regime(),
        d.norm(),
        if h.ok { "ok" } else { "FAILED" },
        if b.holds { "hold" } else { "FAIL" }
    );
    Ok(Report { json: to_value(&out), positive: h.ok && b.holds, summary })
}

#[derive(Serialize)]
struct GphOut {
    cone: KyFanCone,
    samples: usize,
    member_agreements: usize,
    nonmember_agreements: usize,
    agreements: usize,
    disagreements: usize,
    max_curvature_gap: f64,
    regimes: BTreeMap<String, usize>,
}

fn uniform_point(rng: &mut ChaCha8Rng, m: usize, n: usize, scale: f64) -> ConePoint<f64> {
    ConePoint::new(rng.gen_range(-scale..scale), DMatrix::from_fn(m, n, |_, _| rng.gen_range(-1.0..1.0)))
}

/// Compares the two graph-membership tests on generated members and bumped non-members.
pub fn gph_check(
    cone: KyFanCone,
    base: Option<&ConePoint<f64>>,
    samples: usize,
    tol: f64,
    seed: u64,
) -> Result<Report, CliError> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let (mut member_ok, mut nonmember_ok, mut gap) = (0, 0, 0.0f64);
    let mut regimes: BTreeMap<String, usize> = BTreeMap::new();
    let fixed = base.map(|b| CriticalConeContext::new(cone, b, kyfan::cone::BOUNDARY_TOL)).transpose()?;
    for _ in 0..samples {
        let owned;
        let ctx = match &fixed {
            Some(c) => c,
            None => {
                let p = uniform_point(&mut rng, cone.m, cone.n, 2.0 * (cone.k as f64));
                owned = CriticalConeContext::new(cone, &p, kyfan::cone::BOUNDARY_TOL)?;
                &owned
            }
        };
        *regimes.entry(regime_name(ctx.regime())).or_default() += 1;
        let w = uniform_point(&mut rng, cone.m, cone.n, 1.0);
        let pair = generate_member_pair(ctx, &w)?;
        let a = member_via_dirderiv(ctx, &pair, tol)?.member;
        let b = member_via_conditions(ctx, &pair, tol.max(1e-8))?.member;
        member_ok += usize::from(a && b);
        let scale = pair.norm().powi(2).max(1.0);
        gap = gap.max((pair.delta1.dot(&pair.delta2) + upsilon(ctx, &pair.delta2)).abs() / scale);
        let bump = uniform_point(&mut rng, cone.m, cone.n, 1.0);
        let bad = DerivativePair { delta1: pair.delta1.clone(), delta2: pair.delta2.add(&bump) };
        let a = member_via_dirderiv(ctx, &bad, tol)?.member;
        let b = member_via_conditions(ctx, &bad, tol.max(1e-8))?.member;
        nonmember_ok += usize::from(a == b);
    }
    let agreements = member_ok + nonmember_ok;
    let out = GphOut {
        cone,
        samples,
        member_agreements: member_ok,
        nonmember_agreements: nonmember_ok,
        agreements,
        disagreements: 2 * samples - agreements,
        max_curvature_gap: gap,
        regimes,
    };
    let summary = format!(
        "{member_ok}/{samples} member agreements, {nonmember_ok}/{samples} non-member agreements, max curvature gap {gap:.2e}"
    );
    Ok(Report { json: to_value(&out), positive: out.disagreements == 0, summary })
}

/// Where the triple used by a KKT command came from.
#[derive(Serialize, Clone, Copy)]
#[serde(rename_all = "kebab-case")]
pub enum TripleSource {
    Given,
    Fixture,
    Solved,
    Recovered,
}

/// Chooses the triple: given, the fixture reference, or a solve.
pub fn resolve_triple(
    inst: &Loaded,
    given: Option<KktTriple<f64>>,
) -> Result<(KktTriple<f64>, TripleSource), CliError> {
    if let Some(t) = given {
        return Ok((t, TripleSource::Given));
    }
    if let Some(t) = &inst.reference {
        return Ok((t.clone(), TripleSource::Fixture));
    }
    let s = kyfan::harness::SolverSettings { stop_tol: 1e-11, ..Default::default() };
    let r = solve_perturbed(&inst.qp, &Perturbation::zeros(inst.qp.dims()), &s)?;
    if !r.converged {
        return Err(CliError::Numeric(format!(
            "solver stopped at residual {:.3e} after {} iterations",
            r.residual, r.iterations
        )));
    }
    Ok((r.triple, TripleSource::Solved))
}

/// Multipliers for a primal point: those of the triple, refined by recovery when only `x` is trusted.
pub fn resolve_multipliers(
    inst: &Loaded,
    given: Option<KktTriple<f64>>,
) -> Result<(KktTriple<f64>, TripleSource), CliError> {
    let (t, src) = resolve_triple(inst, given)?;
    if matches!(src, TripleSource::Solved) {
        let est = estimate_multipliers(&inst.qp, &t.x, 5000)?;
        return Ok((KktTriple { x: t.x, lambda: est.lambda, y: est.y }, TripleSource::Recovered));
    }
    Ok((t, src))
}

#[derive(Serialize)]
struct PsiBlocks {
    grad: f64,
    feas: f64,
    proj: f64,
    total: f64,
}

#[derive(Serialize)]
struct KktOut {
    instance: String,
    dims: Dims,
    triple_source: TripleSource,
    triple: TripleJson,
    psi: PsiBlocks,
    normal_cone_holds: bool,
    is_kkt: bool,
    objective: f64,
}

pub fn kkt(inst: &Loaded, given: Option<KktTriple<f64>>, tol: f64) -> Result<Report, CliError> {
    let (t, src) = resolve_triple(inst, given)?;
    let d = inst.qp.dims();
    let psi = psi_residual(&inst.qp, &t)?;
    let cone = KyFanCone::new(d.m, d.n, d.k)?;
    let total = psi.norm();
    let nc = normal_cone_holds(&cone, &t.x, &t.y, tol.max(1e-9));
    let is_kkt = total <= tol * t.norm().max(1.0);
    let out = KktOut {
        instance: inst.name.clone(),
        dims: d,
        triple_source: src,
        triple: TripleJson::from_triple(&t),
        psi: PsiBlocks { grad: psi.grad.norm(), feas: psi.feas.norm(), proj: psi.proj.norm(), total },
        normal_cone_holds: nc,
        is_kkt,
        objective: inst.qp.f_value(&t.x) + inst.nls.as_ref().map_or(0.0, |n| 0.5 * n.b.norm_squared()),
    };
    let summary = format!("{}: |Psi| = {total:.3e}, KKT point: {is_kkt}, normal cone condition: {nc}", inst.name);
    Ok(Report { json: to_value(&out), positive: is_kkt, summary })
}

#[derive(Serialize)]
struct SoscOut<'a> {
    instance: String,
    multiplier_source: TripleSource,
    semi_decision: bool,
    #[serde(flatten)]
    report: &'a SoscReport,
}

pub fn sosc(
    inst: &Loaded,
    given: Option<KktTriple<f64>>,
    samples: usize,
    tol: f64,
    seed: u64,
) -> Result<Report, CliError> {
    let (t, src) = resolve_multipliers(inst, given)?;
    let r = sosc_check(&inst.qp, &t.x, &[(t.lambda.clone(), t.y.clone())], samples, tol, seed)?;
    let positive = r.verdict == SoscVerdict::HoldsSampled;
    let summary = format!(
        "{}: second-order condition {} over {} sampled critical directions (min value {:.6e}{})",
        inst.name,
        if positive { "holds" } else { "VIOLATED" },
        r.samples_used,
        r.min_value,
        if r.vacuous { ", critical cone appears trivial" } else { "" }
    );
    let out = SoscOut { instance: inst.name.clone(), multiplier_source: src, semi_decision: true, report: &r };
    Ok(Report { json: to_value(&out), positive, summary })
}

#[derive(Serialize)]
struct SrcqOut<'a> {
    instance: String,
    multiplier_source: TripleSource,
    semi_decision: bool,
    #[serde(flatten)]
    report: &'a SrcqReport,
}

pub fn srcq(
    inst: &Loaded,
    given: Option<KktTriple<f64>>,
    starts: usize,
    tol: f64,
    seed: u64,
) -> Result<Report, CliError> {
    let (t, src) = resolve_multipliers(inst, given)?;
    let r = srcq_check(&inst.qp, &t.x, &(t.lambda.clone(), t.y.clone()), starts, tol, seed)?;
    let positive = r.verdict == SrcqVerdict::HoldsNoCertificate;
    let summary = format!(
        "{}: strict constraint qualification {} (min certificate residual {:.3e} over {} starts)",
        inst.name,
        if positive { "holds, no certificate found" } else { "FAILS, certificate found" },
        r.min_residual,
        r.starts
    );
    let out = SrcqOut { instance: inst.name.clone(), multiplier_source: src, semi_decision: true, report: &r };
    Ok(Report { json: to_value(&out), positive, summary })
}

#[derive(Serialize)]
struct CalmnessOut<'a> {
    instance: String,
    triple_source: TripleSource,
    semi_decision: bool,
    #[serde(flatten)]
    report: &'a CalmnessReport,
}

pub fn calmness(
    inst: &Loaded,
    given: Option<KktTriple<f64>>,
    starts: usize,
    tol: f64,
    seed: u64,
) -> Result<Report, CliError> {
    let (t, src) = resolve_multipliers(inst, given)?;
    let r = kkt_isolated_calmness_probe(&inst.qp, &t, starts, tol, seed)?;
    let positive = r.verdict == CalmnessVerdict::OnlyZeroSampled;
    let summary = format!(
        "{}: {} (min derivative norm {:.3e} over {} starts)",
        inst.name,
        if positive { "only the zero direction found" } else { "NONZERO WITNESS found" },
        r.min_norm,
        r.starts
    );
    let out = CalmnessOut { instance: inst.name.clone(), triple_source: src, semi_decision: true, report: &r };
    Ok(Report { json: to_value(&out), positive, summary })
}

#[derive(Serialize)]
struct ErrorBoundOut<'a> {
    instance: String,
    config: ConfigEcho,
    #[serde(flatten)]
    summary: &'a kyfan::harness::ExperimentSummary,
}

pub struct ErrorBoundRun {
    pub output: ExperimentOutput,
    pub report: Report,
}

pub fn error_bound(
    inst: &Loaded,
    scales: Vec<f64>,
    samples: usize,
    mode: SampleMode,
    seed: u64,
    stop_tol: f64,
) -> Result<ErrorBoundRun, CliError> {
    let nls =
        inst.nls.clone().ok_or_else(|| CliError::Usage("error-bound needs a least-squares (nls) instance".into()))?;
    let mut cfg = ExperimentConfig::new(nls, scales, samples, seed);
    cfg.reference = inst.reference.clone();
    cfg.mode = mode;
    cfg.solver.stop_tol = stop_tol;
    let output = run_error_bound_experiment(&cfg)?;
    let s = &output.summary;
    let summary = format!(
        "{}: modulus {}, trend {}, calm evidence {}",
        inst.name,
        s.modulus.map_or("n/a".into(), |v| format!("{v:.4}")),
        s.trend.map_or("n/a".into(), |v| format!("{v:.3}")),
        s.calm_evidence
    );
    let json = to_value(&ErrorBoundOut { instance: inst.name.clone(), config: ConfigEcho::of(&cfg), summary: s });
    let positive = s.calm_evidence;
    Ok(ErrorBoundRun { output, report: Report { json, positive, summary } })
}

fn regime_name(r: Regime) -> String {
    to_value(&r).as_str().unwrap_or_default().to_string()
}
