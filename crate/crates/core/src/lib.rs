//! Spatially adaptive combination of first-order total variation and the
//! Hessian-Schatten norm for image restoration.
//!
//! The numeric core is generic over [`Real`] (`f32` or `f64`); the aliases at the
//! crate root fix the scalar to `f64`, which is what the command-line tool uses.

// `!(x > 0)` style checks are deliberate: they also reject NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod admm;
pub mod bcd;
pub mod diff;
pub mod error;
pub mod fft;
pub mod forward;
pub mod grid;
pub mod metrics;
pub mod multires;
pub mod phantom;
pub mod prox;
pub mod resample;
pub mod scalar;
pub mod weight;

pub use admm::{admm_solve, AdmmConfig, AdmmReport, CostBreakdown, SplitState};
pub use bcd::{bcd_solve, BcdConfig, BcdOutcome, TraceRow};
pub use error::{Error, Result};
pub use forward::{DataOperator, ForwardModel, MaskKind, Measurement, NoiseSpec};
pub use grid::{ComplexGrid, ImageGrid, StencilKernel, VectorField};
pub use multires::{multires_init, BetaPolicy, LevelReport, MultiresOutcome, PyramidSchedule};
pub use prox::SchattenOrder;
pub use scalar::Real;
pub use weight::{TauMap, WeightMap};

pub type Image = ImageGrid<f64>;
pub type ComplexImage = ComplexGrid<f64>;
pub type Field = VectorField<f64>;
pub type Kernel = StencilKernel<f64>;
pub type Model = ForwardModel<f64>;
pub type Weights = WeightMap<f64>;
pub type Taus = TauMap<f64>;
pub type Config = AdmmConfig<f64>;
