//! Optimal dividend payments when cash flows are discounted at a rate driven
//! by a Cox–Ingersoll–Ross short rate.
//!
//! The crate computes the value `U(r, z)` of the auxiliary optimal stopping
//! problem on a tensor grid through a penalised elliptic equation, extracts the
//! free boundary `r ↦ b(r)`, integrates `U` in `z` to obtain the dividend value
//! `V`, and cross-checks every one of those objects with Monte Carlo
//! simulation of the underlying processes and closed-form constant-rate
//! solutions.
//!
//! All numerical code is generic over [`Real`]; the `*64` aliases at the crate
//! root fix the scalar to `f64`, which is what the CLI and the test-suite use.

pub mod cir;
pub mod config;
pub mod error;
pub mod fbsolve;
pub mod grid;
pub mod linalg;
pub mod model;
pub mod oracle1d;
pub mod quad;
pub mod rng;
pub mod simulate;

use std::fmt::{Debug, Display, LowerExp};
use std::iter::Sum;

use num_traits::{Float, FromPrimitive, ToPrimitive};

pub use error::{Error, Result};

/// Floating point scalar used throughout the crate.
pub trait Real:
    Float
    + FromPrimitive
    + ToPrimitive
    + Debug
    + Display
    + LowerExp
    + Sum
    + Default
    + Send
    + Sync
    + 'static
{
    /// Lossy conversion from an `f64` literal.
    #[inline]
    fn lit(x: f64) -> Self {
        Self::from_f64(x).expect("f64 literal representable")
    }

    #[inline]
    fn as_f64(self) -> f64 {
        self.to_f64().expect("scalar convertible to f64")
    }

    #[inline]
    fn from_usize_lossy(n: usize) -> Self {
        Self::from_usize(n).expect("usize representable")
    }
}

impl Real for f32 {}
impl Real for f64 {}

pub use cir::LaplaceCoefficients;
pub use fbsolve::{
    Boundary, BoundaryExtraction, FarBoundary, LevelRule, PenalizedSolution, ResidualReport,
    RmaxCondition, RminCondition, SolverConfig, VrrDiagnostic,
};
pub use grid::{Grid2D, ScalarField};
pub use model::{DiscountKind, DiscountSpec, ModelParams, ValidationReport};
pub use oracle1d::ConstantRateSolution;
pub use simulate::{McEstimate, PathConfig, RateScheme};

pub type ModelParams64 = ModelParams<f64>;
pub type DiscountSpec64 = DiscountSpec<f64>;
pub type Grid2D64 = Grid2D<f64>;
pub type ScalarField64 = ScalarField<f64>;
pub type Boundary64 = Boundary<f64>;
pub type SolverConfig64 = SolverConfig<f64>;
pub type PathConfig64 = PathConfig<f64>;
pub type McEstimate64 = McEstimate<f64>;
pub type ConstantRateSolution64 = ConstantRateSolution<f64>;
