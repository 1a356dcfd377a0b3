//! Variational analysis of the Ky Fan k-norm epigraph cone.

pub mod cone;
pub mod context;
pub mod dirderiv;
pub mod epigraph;
pub mod error;
pub mod gph;
pub mod harness;
pub mod kkt;
pub mod point;
pub mod reduced;
pub mod scalar;
pub mod sigma;
pub mod spectral;
pub mod tangent_critical;

pub use cone::{kyfan_norm, KyFanCone, ProjectionResult, Regime};
pub use context::CriticalConeContext;
pub use dirderiv::pi_k_dirderiv;
pub use epigraph::TopK;
pub use error::{Error, Result};
pub use gph::DerivativePair;
pub use point::ConePoint;
pub use reduced::{ReducedCone, ReducedPoint};
pub use scalar::Real;
pub use spectral::SvdFrame;

pub type ConePointF64 = ConePoint<f64>;
pub type ProjectionResultF64 = ProjectionResult<f64>;
pub type SvdFrameF64 = SvdFrame<f64>;
