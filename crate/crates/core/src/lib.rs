//! Numerical laboratory for the mean curvature flow of graphs of maps
//! `f: R^2 -> R^2`.
//!
//! The evolving map is stored as `f(x) = M x + p(x)` with a constant linear
//! part `M` and a perturbation `p` that is periodic on a square torus. The
//! crate provides
//!
//! * [`fields`]: grid storage, fourth-order periodic differentiation, snapshots;
//! * [`geometry`]: pointwise geometry of the graph (singular values, induced
//!   metric, `tr(s)`, second fundamental form, mean curvature, Gauss equation);
//! * [`flow`]: explicit RK4 integration of the non-parametric flow, parabolic
//!   rescaling, soliton residuals;
//! * [`analysis`]: diagnostics, decay fits and checks of the trace evolution
//!   identities;
//! * [`init`]: reproducible initial perturbations.

#![allow(clippy::neg_cmp_op_on_partial_ord, clippy::needless_range_loop)]

pub mod analysis;
pub mod error;
pub mod fields;
pub mod flow;
pub mod geometry;
pub mod init;
pub mod linalg;

pub use analysis::{
    AlgebraicState, DecayClaim, DecayFit, DiagnosticsRecord, Gauge, InvariantReport,
};
pub use error::{Error, Result};
pub use fields::{Grid, JetPoint, MapField, SupNorm};
pub use flow::{FlowState, RescaleSpec, RunAbort, RunOutput, RunParams, TranslatorSpec};
pub use geometry::{FrameCoefficients, GeomPoint, SingularData};
pub use init::Perturbation;
pub use linalg::{Mat2, Vec2, Vec4};
