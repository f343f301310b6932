//! Finite-volume simulator and diagnostics for a two-dimensional
//! chemotaxis-consumption system with singular (logarithmic) sensitivity.

// `!(x > 0.0)` style checks are meant to reject NaN as well.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod diagnostics;
pub mod error;
pub mod experiment;
pub mod grid;
pub mod linsolve;
pub mod model;
pub mod snapshot;
pub mod solver;

pub use error::{Error, Result};
pub use grid::{FaceAverage, FluxField, Grid, ScalarField};
pub use model::{Consumption, ConsumptionTable, Params, ThresholdReport};
