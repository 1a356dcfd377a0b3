//! Wire formats for points, matrices, instances and triples.

use kyfan::harness::ExperimentConfig;
use kyfan::kkt::fixtures::{random_nls, rank_deficient, scalar_nls, Fixture};
use kyfan::kkt::{KktTriple, NlsInstance, QpData};
use kyfan::ConePoint;
use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::CliError;

/// Row-major dense matrix.
#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
#[serde(deny_unknown_fields)]
pub struct MatrixJson {
    pub rows: usize,
    pub cols: usize,
    pub data: Vec<f64>,
}

impl MatrixJson {
    pub fn to_matrix(&self, what: &str) -> Result<DMatrix<f64>, CliError> {
        if self.rows * self.cols != self.data.len() {
            return Err(CliError::Usage(format!(
                "{what}: rows*cols = {} but data has {} entries",
                self.rows * self.cols,
                self.data.len()
            )));
        }
        if self.data.iter().any(|v| !v.is_finite()) {
            return Err(CliError::Usage(format!("{what}: entries must be finite")));
        }
        Ok(DMatrix::from_row_slice(self.rows, self.cols, &self.data))
    }

    pub fn from_matrix(m: &DMatrix<f64>) -> Self {
        let data = (0..m.nrows()).flat_map(|i| (0..m.ncols()).map(move |j| m[(i, j)])).collect();
        Self { rows: m.nrows(), cols: m.ncols(), data }
    }
}

/// A point `(t, X)` of `ℝ × ℝ^{m×n}`.
#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
#[serde(deny_unknown_fields)]
pub struct PointJson {
    pub t: f64,
    pub x: MatrixJson,
}

impl PointJson {
    pub fn to_point(&self, what: &str) -> Result<ConePoint<f64>, CliError> {
        if !self.t.is_finite() {
            return Err(CliError::Usage(format!("{what}: t must be finite")));
        }
        Ok(ConePoint::new(self.t, self.x.to_matrix(what)?))
    }

    pub fn from_point(p: &ConePoint<f64>) -> Self {
        Self { t: p.t, x: MatrixJson::from_matrix(&p.x) }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
#[serde(deny_unknown_fields)]
pub struct TripleJson {
    pub x: PointJson,
    pub lambda: Vec<f64>,
    pub y: PointJson,
}

impl TripleJson {
    pub fn to_triple(&self) -> Result<KktTriple<f64>, CliError> {
        if self.lambda.iter().any(|v| !v.is_finite()) {
            return Err(CliError::Usage("triple: lambda must be finite".into()));
        }
        Ok(KktTriple {
            x: self.x.to_point("triple.x")?,
            lambda: DVector::from_vec(self.lambda.clone()),
            y: self.y.to_point("triple.y")?,
        })
    }

    pub fn from_triple(t: &KktTriple<f64>) -> Self {
        Self {
            x: PointJson::from_point(&t.x),
            lambda: t.lambda.iter().copied().collect(),
            y: PointJson::from_point(&t.y),
        }
    }
}

/// Problem data. `A` and `E` act on `vec(X)` in row-major order; for the
/// quadratic kind they act on `[t, vec(X)]`.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case", deny_unknown_fields)]
pub enum InstanceJson {
    Nls {
        m: usize,
        n: usize,
        #[serde(default)]
        k: Option<usize>,
        /// Number of equality constraints, checked when present.
        #[serde(default)]
        p: Option<usize>,
        /// Number of rows of `A`, checked when present.
        #[serde(default)]
        q: Option<usize>,
        #[serde(rename = "A")]
        a: MatrixJson,
        b: Vec<f64>,
        rho: f64,
        #[serde(rename = "E", default)]
        e: Option<MatrixJson>,
        #[serde(default)]
        d: Option<Vec<f64>>,
    },
    Quadratic {
        m: usize,
        n: usize,
        k: usize,
        #[serde(default)]
        p: Option<usize>,
        #[serde(rename = "Q")]
        q: MatrixJson,
        c: Vec<f64>,
        #[serde(rename = "E", default)]
        e: Option<MatrixJson>,
        #[serde(default)]
        d: Option<Vec<f64>>,
    },
}

/// A loaded instance: the quadratic form always, the least-squares data when available.
pub struct Loaded {
    pub name: String,
    pub qp: QpData<f64>,
    pub nls: Option<NlsInstance<f64>>,
    pub reference: Option<KktTriple<f64>>,
}

fn equalities(
    e: &Option<MatrixJson>,
    d: &Option<Vec<f64>>,
    cols: usize,
) -> Result<(DMatrix<f64>, DVector<f64>), CliError> {
    match (e, d) {
        (None, None) => Ok((DMatrix::zeros(0, cols), DVector::zeros(0))),
        (Some(e), Some(d)) => Ok((e.to_matrix("E")?, DVector::from_vec(d.clone()))),
        _ => Err(CliError::Usage("E and d must be given together".into())),
    }
}

fn check_dim(what: &str, want: Option<usize>, got: usize) -> Result<(), CliError> {
    match want {
        Some(w) if w != got => Err(CliError::Usage(format!("{what} = {w} but the data implies {got}"))),
        _ => Ok(()),
    }
}

impl InstanceJson {
    pub fn load(&self) -> Result<Loaded, CliError> {
        match self {
            InstanceJson::Nls { m, n, k, p, q, a, b, rho, e, d } => {
                if let Some(k) = k {
                    if k != m {
                        return Err(CliError::Usage(format!("nls instances use k = m = {m}, got k = {k}")));
                    }
                }
                let (e, d) = equalities(e, d, m * n)?;
                check_dim("p", *p, e.nrows())?;
                check_dim("q", *q, a.rows)?;
                let nls = NlsInstance {
                    m: *m,
                    n: *n,
                    a: a.to_matrix("A")?,
                    b: DVector::from_vec(b.clone()),
                    rho: *rho,
                    e,
                    d,
                };
                let qp = nls.to_qp()?;
                Ok(Loaded { name: "nls".into(), qp, nls: Some(nls), reference: None })
            }
            InstanceJson::Quadratic { m, n, k, p, q, c, e, d } => {
                let (e, d) = equalities(e, d, 1 + m * n)?;
                check_dim("p", *p, e.nrows())?;
                let qp = QpData::new(*m, *n, *k, q.to_matrix("Q")?, DVector::from_vec(c.clone()), e, d)?;
                Ok(Loaded { name: "quadratic".into(), qp, nls: None, reference: None })
            }
        }
    }
}

/// Built-in fixtures: `scalar-nls`, `rank-deficient`, `random-nls:<seed>`.
pub fn fixture(name: &str) -> Result<Loaded, CliError> {
    let f: Fixture = match name {
        "scalar-nls" => scalar_nls(),
        "rank-deficient" => rank_deficient(),
        _ => match name.strip_prefix("random-nls:").map(str::parse::<u64>) {
            Some(Ok(seed)) => random_nls(seed),
            _ => {
                return Err(CliError::Usage(format!(
                    "unknown fixture '{name}' (expected scalar-nls, rank-deficient or random-nls:<seed>)"
                )))
            }
        },
    };
    Ok(Loaded { name: f.name, qp: f.qp, nls: Some(f.nls), reference: Some(f.triple) })
}

/// Experiment configuration echoed in the summary.
#[derive(Debug, Serialize)]
pub struct ConfigEcho {
    pub seed: u64,
    pub n_samples: usize,
    pub scales: Vec<f64>,
    pub mode: kyfan::harness::SampleMode,
    pub stop_tol: f64,
    pub max_iter: usize,
}

impl ConfigEcho {
    pub fn of(cfg: &ExperimentConfig) -> Self {
        Self {
            seed: cfg.seed,
            n_samples: cfg.n_samples,
            scales: cfg.scales.clone(),
            mode: cfg.mode,
            stop_tol: cfg.solver.stop_tol,
            max_iter: cfg.solver.max_iter,
        }
    }
}
