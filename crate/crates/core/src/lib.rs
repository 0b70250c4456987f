//! Dyadic harmonic analysis toolkit: grids, Haar calculus, Lorentz norms,
//! Muckenhoupt weights, bilinear dyadic operators and compactness diagnostics.

pub mod config;
pub mod diagnostics;
pub mod dyadic;
pub mod error;
pub mod grid;
pub mod haar;
pub mod io;
pub mod lorentz;
pub mod mesh;
pub mod operators;
pub mod weights;

pub use diagnostics::{compactness_report, opnorm_lower, CompactnessReport, Decay, DecayCurve, Exponents, ReportConfig};
pub use dyadic::Dyadic;
pub use error::{Error, Result};
pub use grid::{make_grid, relative_distance, DyadicCube, GoodnessReport, GridSpec};
pub use haar::{expand, haar_eval, project, reconstruct, Expansion, HaarCoeffs, MeanData};
pub use lorentz::{lorentz_norm, MeasureSpec, NormResult};
pub use mesh::MeshFunction;
pub use weights::{ap_constant, multilinear_ap_constant, ApReport, Weight};
pub use operators::{BilinearOperator, CoeffSequence, ShiftTensor};
