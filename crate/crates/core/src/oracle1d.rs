//! Closed-form solution of the dividend problem with a constant discount rate.
//!
//! With `ρ ≡ ρ0` the value solves `(σ²/2)V'' + μV' − ρ0 V = 0` below a barrier
//! `z*` and `V' = 1` above it. Writing `θ1 > 0 > θ2` for the roots of
//! `(σ²/2)θ² + μθ − ρ0 = 0` and `s = z − α`,
//!
//! ```text
//! V0(z) = (e^{θ1 s} − e^{θ2 s}) / (θ1 e^{θ1 s*} − θ2 e^{θ2 s*}),   s ≤ s*
//! s*    = ln(θ2²/θ1²) / (θ1 − θ2)
//! ```
//!
//! where `s*` is pinned by `V0''(z*) = 0`, and the normalisation gives
//! `V0'(z*) = 1`.

use serde::Serialize;

use crate::model::ModelParams;
use crate::{Error, Real, Result};

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ConstantRateSolution<T> {
    pub rho0: T,
    pub theta1: T,
    pub theta2: T,
    pub z_star: T,
    pub alpha: T,
    /// `θ1 e^{θ1 s*} − θ2 e^{θ2 s*}`.
    #[serde(skip)]
    norm: T,
}

/// `θ1,2 = (−μ ± √(μ² + 2σ²ρ0)) / σ²`.
pub fn characteristic_roots<T: Real>(params: &ModelParams<T>, rho0: T) -> Result<(T, T)> {
    if !(rho0 > T::zero()) || !(params.mu > T::zero()) {
        return Err(Error::Domain(format!(
            "characteristic roots need rho0 > 0 and mu > 0 (rho0 = {}, mu = {})",
            rho0, params.mu
        )));
    }
    let s2 = params.sigma * params.sigma;
    let disc = (params.mu * params.mu + T::lit(2.0) * s2 * rho0).sqrt();
    // θ1 = 2ρ0 / (μ + disc) avoids cancellation for small ρ0.
    let theta1 = T::lit(2.0) * rho0 / (params.mu + disc);
    let theta2 = (-params.mu - disc) / s2;
    Ok((theta1, theta2))
}

impl<T: Real> ConstantRateSolution<T> {
    pub fn new(params: &ModelParams<T>, rho0: T) -> Result<Self> {
        let (theta1, theta2) = characteristic_roots(params, rho0)?;
        let s_star = (theta2 * theta2 / (theta1 * theta1)).ln() / (theta1 - theta2);
        let norm = theta1 * (theta1 * s_star).exp() - theta2 * (theta2 * s_star).exp();
        Ok(Self { rho0, theta1, theta2, z_star: params.alpha + s_star, alpha: params.alpha, norm })
    }

    /// Optimal barrier `z*`.
    pub fn barrier(&self) -> T {
        self.z_star
    }

    /// `(V0(z), V0'(z))` for `z ≥ α`.
    pub fn value_and_derivative(&self, z: T) -> (T, T) {
        let s = (z - self.alpha).max(T::zero());
        let s_star = self.z_star - self.alpha;
        if s <= s_star {
            let (e1, e2) = ((self.theta1 * s).exp(), (self.theta2 * s).exp());
            ((e1 - e2) / self.norm, (self.theta1 * e1 - self.theta2 * e2) / self.norm)
        } else {
            let (v_star, _) = self.value_and_derivative(self.z_star);
            (v_star + (s - s_star), T::one())
        }
    }

    /// `V0''(z)`; zero above the barrier.
    pub fn second_derivative(&self, z: T) -> T {
        let s = (z - self.alpha).max(T::zero());
        if s > self.z_star - self.alpha {
            return T::zero();
        }
        let (t1, t2) = (self.theta1, self.theta2);
        (t1 * t1 * (t1 * s).exp() - t2 * t2 * (t2 * s).exp()) / self.norm
    }

    /// `V0'(z)`, which is also the constant-rate stopping value.
    pub fn derivative(&self, z: T) -> T {
        self.value_and_derivative(z).1
    }

    /// Dirichlet data at the lower rate edge: `(1 − 1/(1 + z − α))·V0'(z)`.
    pub fn rmin_profile(&self, z: T) -> T {
        let s = (z - self.alpha).max(T::zero());
        (T::one() - T::one() / (T::one() + s)) * self.derivative(z)
    }
}
