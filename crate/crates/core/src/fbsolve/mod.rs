//! Penalised finite-difference solver for the stopping value `U`, free
//! boundary extraction, reconstruction of the dividend value `V = ∫U dz` and
//! residual diagnostics.

mod boundary;
mod diagnostics;
pub mod invariants;
mod operator;
mod solve;
mod value;

use serde::{Deserialize, Serialize};

pub use boundary::{extract_boundary, isotonic_nonincreasing, Boundary, BoundaryExtraction, LevelRule};
pub use diagnostics::{hjb_residual, vrr_diagnostic, NodeValue, ResidualReport, VrrDiagnostic};
pub use operator::{assemble_operator, Operator, Stencil};
pub use solve::{far_value, solve_penalized, BoundaryData, PenalizedSolution};
pub use value::integrate_value;

use crate::{Error, Real, Result};

/// First-order drift discretisation.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DriftScheme {
    /// One-sided differences in the direction of the drift at every node.
    Upwind,
    /// Central differences wherever they keep the off-diagonals nonnegative,
    /// upwind elsewhere.
    Hybrid,
    /// Central differences everywhere; assembly fails where the grid is too
    /// coarse for the drift.
    Central,
}

/// Condition on the lower rate edge `r = r_min`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RminCondition {
    /// Dirichlet data `(1 − 1/(1 + z − α))·u(z)` with `u` the constant-rate
    /// marginal value at `ρ(0)`.
    Profile,
    /// Reflecting ghost node, `U_r = 0`.
    ZeroFlux,
}

/// Condition on the upper rate edge `r = r_max`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RmaxCondition {
    /// Stopping-region value (see [`FarBoundary`]).
    Dirichlet,
    /// Reflecting ghost node, `U_r = 0`.
    ZeroFlux,
}

/// Value imposed on the far Dirichlet edges `z = z_max` and `r = r_max`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FarBoundary {
    /// `U = 1`, the obstacle itself.
    Unit,
    /// The `z`-independent solution of the penalised equation on the
    /// `z_max` row, which is close to `1/(1 + δρ(r))`; `1/(1 + δρ(r_max))`
    /// on the `r_max` edge.
    PenaltyConsistent,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SolverConfig<T> {
    /// Penalty parameter `δ`.
    pub delta: T,
    pub max_outer_iters: usize,
    /// Sup-norm change between outer iterates at which to stop.
    pub tol_outer: T,
    /// Relative residual accepted from each linear solve.
    pub linear_solver_tol: T,
    /// Relaxation of the outer update; 1 is the plain active-set iteration.
    pub damping: T,
    pub scheme: DriftScheme,
    pub rmin: RminCondition,
    pub rmax: RmaxCondition,
    pub far: FarBoundary,
}

impl<T: Real> Default for SolverConfig<T> {
    fn default() -> Self {
        Self {
            delta: T::lit(0.01),
            max_outer_iters: 100,
            tol_outer: T::lit(1e-10),
            linear_solver_tol: T::lit(1e-9),
            damping: T::one(),
            scheme: DriftScheme::Hybrid,
            rmin: RminCondition::ZeroFlux,
            rmax: RmaxCondition::Dirichlet,
            far: FarBoundary::PenaltyConsistent,
        }
    }
}

impl<T: Real> SolverConfig<T> {
    /// Rate columns that carry Dirichlet data on a grid with `n_r` rate nodes.
    pub fn fixed_columns(&self, n_r: usize) -> Vec<usize> {
        let mut out = Vec::new();
        if self.rmin == RminCondition::Profile {
            out.push(0);
        }
        if self.rmax == RmaxCondition::Dirichlet {
            out.push(n_r - 1);
        }
        out
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.delta > T::zero()) {
            return Err(Error::Config(format!("delta must be positive, got {}", self.delta)));
        }
        if !(self.tol_outer > T::zero()) {
            return Err(Error::Config(format!("tol_outer must be positive, got {}", self.tol_outer)));
        }
        if !(self.linear_solver_tol > T::zero()) {
            return Err(Error::Config("linear_solver_tol must be positive".into()));
        }
        if !(self.damping > T::zero() && self.damping <= T::one()) {
            return Err(Error::Config(format!("damping must lie in (0, 1], got {}", self.damping)));
        }
        if self.max_outer_iters == 0 {
            return Err(Error::Config("max_outer_iters must be at least 1".into()));
        }
        Ok(())
    }
}
