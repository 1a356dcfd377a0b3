//! Error-bound experiments on nuclear-norm regularized least squares: a
//! splitting solver for perturbed instances, perturbation sampling, and
//! distance-versus-residual statistics.

use std::io::Write;

use nalgebra::{DMatrix, DVector};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::cone::{KyFanCone, BOUNDARY_TOL};
use crate::error::{Error, Result};
use crate::kkt::{psi_residual, psi_tilde_residual, KktTriple, NlsInstance, Perturbation, ProblemInstance, QpData};
use crate::point::ConePoint;
use crate::spectral::sym_eigen;

/// Settings of the splitting solver.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SolverSettings {
    pub max_iter: usize,
    /// Stop when the perturbed KKT residual drops below this value.
    pub stop_tol: f64,
    /// Penalty parameter.
    pub sigma: f64,
    /// Over-relaxation parameter in `(0, 2)`.
    pub alpha: f64,
}

impl Default for SolverSettings {
    fn default() -> Self {
        Self { max_iter: 50_000, stop_tol: 1e-9, sigma: 1.0, alpha: 1.6 }
    }
}

/// Outcome of a solve.
#[derive(Debug, Clone)]
pub struct SolveResult {
    pub triple: KktTriple<f64>,
    pub iterations: usize,
    /// Final residual of the perturbed KKT system.
    pub residual: f64,
    pub converged: bool,
}

/// Symmetric pseudo-inverse through the eigendecomposition.
fn sym_pinv(a: &DMatrix<f64>) -> DMatrix<f64> {
    let (ev, q) = sym_eigen(a);
    let top = ev.iter().fold(0.0f64, |s, v| s.max(v.abs()));
    let cut = 1e-12 * top.max(1.0);
    let inv = DVector::from_iterator(ev.len(), ev.iter().map(|&v| if v.abs() > cut { 1.0 / v } else { 0.0 }));
    &q * DMatrix::from_diagonal(&inv) * q.transpose()
}

/// Solves the perturbed instance
/// `min f(𝒳) − ⟨δ_f, 𝒳⟩  s.t.  h(𝒳) = δ_h,  𝒳 − δ_G ∈ K`
/// by over-relaxed alternating direction steps with `Π_K` as the proximal kernel.
pub fn solve_perturbed(qp: &QpData<f64>, delta: &Perturbation<f64>, s: &SolverSettings) -> Result<SolveResult> {
    if !(s.sigma > 0.0) || !(s.alpha > 0.0 && s.alpha < 2.0) || !(s.stop_tol > 0.0) {
        return Err(Error::InvalidInput("need sigma > 0, 0 < alpha < 2, stop_tol > 0".into()));
    }
    let d = qp.dims();
    let (m, n, nn, p) = (d.m, d.n, d.space(), d.p);
    let cone = KyFanCone::new(m, n, d.k)?;
    let mut kkt = DMatrix::zeros(nn + p, nn + p);
    kkt.view_mut((0, 0), (nn, nn)).copy_from(&(&qp.q + DMatrix::identity(nn, nn) * s.sigma));
    kkt.view_mut((nn, 0), (p, nn)).copy_from(&qp.e);
    kkt.view_mut((0, nn), (nn, p)).copy_from(&qp.e.transpose());
    let kinv = sym_pinv(&kkt);
    let c = &qp.c - delta.f.to_vector();
    let rhs_eq = &qp.d + &delta.h;
    let dg = delta.g.to_vector();

    let mut z = DVector::<f64>::zeros(nn);
    let mut u = DVector::<f64>::zeros(nn);
    let mut v = DVector::<f64>::zeros(nn);
    let mut mu = DVector::<f64>::zeros(p);
    let mut residual = f64::INFINITY;
    let mut it = 0;
    let to_point = |w: &DVector<f64>| ConePoint::from_vector(w, m, n).expect("shape fixed");
    let triple_of = |v: &DVector<f64>, mu: &DVector<f64>, u: &DVector<f64>| KktTriple {
        x: to_point(v),
        lambda: mu.clone(),
        y: to_point(&(u * s.sigma)),
    };
    while it < s.max_iter {
        it += 1;
        let mut rhs = DVector::zeros(nn + p);
        rhs.rows_mut(0, nn).copy_from(&(-&c + (&z + &dg - &u) * s.sigma));
        rhs.rows_mut(nn, p).copy_from(&rhs_eq);
        let sol = &kinv * rhs;
        v = sol.rows(0, nn).clone_owned();
        mu = sol.rows(nn, p).clone_owned();
        let vhat = &v * s.alpha + (&z + &dg) * (1.0 - s.alpha);
        let znew = cone.project_k(&to_point(&(&vhat - &dg + &u)), BOUNDARY_TOL)?.onto_k.to_vector();
        u += &vhat - &dg - &znew;
        z = znew;
        if !u.iter().chain(z.iter()).all(|a| a.is_finite()) {
            return Ok(SolveResult {
                triple: triple_of(&v, &mu, &u),
                iterations: it,
                residual: f64::NAN,
                converged: false,
            });
        }
        if it % 10 == 0 || it == s.max_iter {
            residual = psi_tilde_residual(qp, delta, &triple_of(&v, &mu, &u))?.norm();
            if residual <= s.stop_tol {
                break;
            }
        }
    }
    Ok(SolveResult { triple: triple_of(&v, &mu, &u), iterations: it, residual, converged: residual <= s.stop_tol })
}

/// Solves an unperturbed instance.
pub fn solve_nls(inst: &NlsInstance<f64>, s: &SolverSettings) -> Result<SolveResult> {
    let qp = inst.to_qp()?;
    solve_perturbed(&qp, &Perturbation::zeros(qp.dims()), s)
}

/// How sample points near the reference are produced.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum SampleMode {
    /// Exact solutions of randomly perturbed instances.
    Perturbed,
    /// The reference triple moved by a random vector of the given length.
    Jitter,
}

#[derive(Debug, Clone)]
pub struct ExperimentConfig {
    pub instance: NlsInstance<f64>,
    /// Reference KKT triple; solved to `reference_tol` when absent.
    pub reference: Option<KktTriple<f64>>,
    pub reference_tol: f64,
    pub delta_max: f64,
    pub n_samples: usize,
    pub seed: u64,
    /// Perturbation norms, ascending.
    pub scales: Vec<f64>,
    pub mode: SampleMode,
    pub solver: SolverSettings,
}

impl ExperimentConfig {
    pub fn new(instance: NlsInstance<f64>, scales: Vec<f64>, n_samples: usize, seed: u64) -> Self {
        let delta_max = scales.iter().fold(0.0f64, |a, &b| a.max(b));
        Self {
            instance,
            reference: None,
            reference_tol: 1e-11,
            delta_max,
            n_samples,
            seed,
            scales,
            mode: SampleMode::Perturbed,
            solver: SolverSettings { stop_tol: 1e-12, ..SolverSettings::default() },
        }
    }

    fn validate(&self) -> Result<()> {
        if !(self.delta_max > 0.0) {
            return Err(Error::InvalidInput("delta_max must be positive".into()));
        }
        if self.scales.is_empty() || self.scales.windows(2).any(|w| w[0] > w[1]) {
            return Err(Error::InvalidInput("scales must be nonempty and ascending".into()));
        }
        if self.scales.iter().any(|&s| !(s >= 0.0) || s > self.delta_max) {
            return Err(Error::InvalidInput("scales must lie in [0, delta_max]".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum RecordFlag {
    Ok,
    /// Zero residual; the ratio is undefined.
    ZeroResidual,
    Diverged,
}

#[derive(Debug, Clone)]
pub struct ErrorBoundRecord {
    pub sample_id: usize,
    pub scale: f64,
    pub delta_norm: f64,
    pub triple: KktTriple<f64>,
    /// `‖Ψ‖` of the unperturbed instance at the sample.
    pub psi_norm: f64,
    /// `‖Π_K(𝒴)‖` at the sample.
    pub pik_y_norm: f64,
    /// Distance to the reference triple, an upper bound on the distance to the solution set.
    pub distance: f64,
    /// `distance / (psi_norm + pik_y_norm)` when defined.
    pub ratio: Option<f64>,
    pub solver_iters: usize,
    pub flag: RecordFlag,
}

#[derive(Debug, Serialize)]
struct CsvRow {
    sample_id: usize,
    scale: f64,
    delta_norm: f64,
    psi_norm: f64,
    #[serde(rename = "piK_Y_norm")]
    pik_y_norm: f64,
    distance: f64,
    ratio: Option<f64>,
    solver_iters: usize,
    flag: RecordFlag,
}

/// Per-scale statistics.
#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
pub struct ScaleSummary {
    pub scale: f64,
    pub max_ratio: Option<f64>,
    pub mean_ratio: Option<f64>,
    pub n_ok: usize,
    pub n_diverged: usize,
}

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
pub struct ExperimentSummary {
    pub scales: Vec<ScaleSummary>,
    /// Empirical modulus at the smallest scale.
    pub modulus: Option<f64>,
    /// Ratio of the max ratios at the two smallest scales.
    pub trend: Option<f64>,
    /// The max ratio varies by less than 10× across the two smallest scales.
    pub calm_evidence: bool,
    pub reference_residual: f64,
}

#[derive(Debug, Clone)]
pub struct ExperimentOutput {
    pub records: Vec<ErrorBoundRecord>,
    pub summary: ExperimentSummary,
}

fn sphere_point(
    rng: &mut ChaCha8Rng,
    d: crate::kkt::Dims,
    radius: f64,
) -> (ConePoint<f64>, DVector<f64>, ConePoint<f64>) {
    let nn = d.space();
    let len = 2 * nn + d.p;
    let mut w = DVector::from_fn(len, |_, _| StandardNormal.sample(&mut *rng));
    let nw = w.norm();
    if nw > 0.0 {
        w *= radius / nw;
    }
    let a = ConePoint::from_vector(&w.rows(0, nn).clone_owned(), d.m, d.n).expect("shape");
    let b = w.rows(nn, d.p).clone_owned();
    let c = ConePoint::from_vector(&w.rows(nn + d.p, nn).clone_owned(), d.m, d.n).expect("shape");
    (a, b, c)
}

fn distance(a: &KktTriple<f64>, b: &KktTriple<f64>) -> f64 {
    a.sub(b).norm()
}

/// Runs the experiment. Samples are independent and seeded by `(seed, index)`,
/// so the output does not depend on the thread schedule.
pub fn run_error_bound_experiment(cfg: &ExperimentConfig) -> Result<ExperimentOutput> {
    cfg.validate()?;
    let qp = cfg.instance.to_qp()?;
    let d = qp.dims();
    let cone = KyFanCone::new(d.m, d.n, d.k)?;
    let reference = match &cfg.reference {
        Some(r) => r.clone(),
        None => {
            let s = SolverSettings { stop_tol: cfg.reference_tol, ..cfg.solver };
            let r = solve_perturbed(&qp, &Perturbation::zeros(d), &s)?;
            if !r.converged {
                return Err(Error::NoConvergence {
                    what: "reference solve",
                    iters: r.iterations,
                    residual: r.residual,
                });
            }
            r.triple
        }
    };
    let reference_residual = psi_residual(&qp, &reference)?.norm();
    let jobs: Vec<(usize, f64)> =
        cfg.scales.iter().flat_map(|&s| std::iter::repeat_n(s, cfg.n_samples)).enumerate().collect();
    let records: Vec<Result<ErrorBoundRecord>> = jobs
        .par_iter()
        .map(|&(id, scale)| {
            let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
            rng.set_stream(id as u64);
            let (a, b, c) = sphere_point(&mut rng, d, scale);
            let (triple, iters, diverged, delta_norm) = match cfg.mode {
                SampleMode::Perturbed => {
                    let delta = Perturbation { f: a, h: b, g: c };
                    let r = solve_perturbed(&qp, &delta, &cfg.solver)?;
                    (r.triple, r.iterations, !r.converged, delta.norm())
                }
                SampleMode::Jitter => {
                    let step = KktTriple { x: a, lambda: b, y: c };
                    let nrm = step.norm();
                    (reference.axpy(1.0, &step), 0, false, nrm)
                }
            };
            let psi_norm = psi_residual(&qp, &triple)?.norm();
            let pik_y_norm = cone.project_k(&triple.y, BOUNDARY_TOL)?.onto_k.norm();
            let dist = distance(&triple, &reference);
            let res = psi_norm + pik_y_norm;
            let (ratio, flag) = if diverged || !triple.is_finite() {
                (None, RecordFlag::Diverged)
            } else if res == 0.0 {
                (None, RecordFlag::ZeroResidual)
            } else {
                (Some(dist / res), RecordFlag::Ok)
            };
            Ok(ErrorBoundRecord {
                sample_id: id,
                scale,
                delta_norm,
                triple,
                psi_norm,
                pik_y_norm,
                distance: dist,
                ratio,
                solver_iters: iters,
                flag,
            })
        })
        .collect();
    let records = records.into_iter().collect::<Result<Vec<_>>>()?;
    let summary = summarize(&cfg.scales, &records, reference_residual);
    Ok(ExperimentOutput { records, summary })
}

fn summarize(scales: &[f64], records: &[ErrorBoundRecord], reference_residual: f64) -> ExperimentSummary {
    let mut uniq: Vec<f64> = scales.to_vec();
    uniq.dedup();
    let per: Vec<ScaleSummary> = uniq
        .iter()
        .map(|&s| {
            let band: Vec<&ErrorBoundRecord> = records.iter().filter(|r| r.scale == s).collect();
            let ratios: Vec<f64> = band.iter().filter_map(|r| r.ratio).collect();
            ScaleSummary {
                scale: s,
                max_ratio: ratios.iter().copied().reduce(f64::max),
                mean_ratio: (!ratios.is_empty()).then(|| ratios.iter().sum::<f64>() / ratios.len() as f64),
                n_ok: band.iter().filter(|r| r.flag == RecordFlag::Ok).count(),
                n_diverged: band.iter().filter(|r| r.flag == RecordFlag::Diverged).count(),
            }
        })
        .collect();
    let modulus = per.first().and_then(|s| s.max_ratio);
    let trend = match (per.first().and_then(|s| s.max_ratio), per.get(1).and_then(|s| s.max_ratio)) {
        (Some(a), Some(b)) if b > 0.0 => Some(a / b),
        _ => None,
    };
    let calm_evidence = modulus.is_some_and(f64::is_finite) && trend.is_some_and(|t| t < 10.0 && t > 0.1);
    ExperimentSummary { scales: per, modulus, trend, calm_evidence, reference_residual }
}

/// Largest `distance / residual` over the records at the smallest scale with a defined ratio.
pub fn estimate_modulus(records: &[ErrorBoundRecord]) -> Result<f64> {
    let smallest = records
        .iter()
        .filter(|r| r.ratio.is_some())
        .map(|r| r.scale)
        .reduce(f64::min)
        .ok_or_else(|| Error::InvalidInput("no record with a positive residual".into()))?;
    Ok(records.iter().filter(|r| r.scale == smallest).filter_map(|r| r.ratio).fold(f64::NEG_INFINITY, f64::max))
}

/// Writes the records as CSV.
pub fn write_csv<W: Write>(records: &[ErrorBoundRecord], out: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    for r in records {
        w.serialize(CsvRow {
            sample_id: r.sample_id,
            scale: r.scale,
            delta_norm: r.delta_norm,
            psi_norm: r.psi_norm,
            pik_y_norm: r.pik_y_norm,
            distance: r.distance,
            ratio: r.ratio,
            solver_iters: r.solver_iters,
            flag: r.flag,
        })
        .map_err(|e| Error::InvalidInput(format!("csv: {e}")))?;
    }
    w.flush().map_err(|e| Error::InvalidInput(format!("csv: {e}")))?;
    Ok(())
}

/// CSV as a string.
pub fn csv_string(records: &[ErrorBoundRecord]) -> Result<String> {
    let mut buf = Vec::new();
    write_csv(records, &mut buf)?;
    Ok(String::from_utf8(buf).expect("csv output is utf-8"))
}
