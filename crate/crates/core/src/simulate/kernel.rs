use rand::Rng;
use rayon::prelude::*;

use crate::cir::{sample_transition, EulerStep};
use crate::model::{DiscountSpec, ModelParams};
use crate::simulate::{normal, PathConfig, RateScheme};
use crate::Real;

/// Advances `(R, I = ∫ρ(R))` by one step.
pub(crate) struct RateStepper<'a, T> {
    params: &'a ModelParams<T>,
    disc: &'a DiscountSpec<T>,
    scheme: RateScheme,
    dt: T,
    euler: EulerStep<T>,
    /// The discount does not depend on the rate and nobody reads `R`.
    frozen: bool,
}

impl<'a, T: Real> RateStepper<'a, T> {
    pub fn new(params: &'a ModelParams<T>, disc: &'a DiscountSpec<T>, cfg: &PathConfig<T>, rate_needed: bool) -> Self {
        Self {
            params,
            disc,
            scheme: cfg.rate_scheme,
            dt: cfg.dt,
            euler: EulerStep::new(params, cfg.dt),
            frozen: disc.is_constant() && !rate_needed,
        }
    }

    #[inline]
    pub fn rho(&self, r: T) -> T {
        self.disc.rho(r)
    }

    /// Returns the new rate and its discount rate, and adds the trapezoid
    /// increment to `integral`.
    #[inline]
    pub fn step<R: Rng>(&self, r: T, rho: T, integral: &mut T, rng: &mut R) -> (T, T) {
        if self.frozen {
            *integral = *integral + rho * self.dt;
            return (r, rho);
        }
        let next = match self.scheme {
            RateScheme::Euler => self.euler.advance(r, normal(rng)),
            RateScheme::Exact => sample_transition(self.params, r, self.dt, rng),
        };
        let rho_next = self.disc.rho(next);
        *integral = *integral + self.dt * (rho + rho_next) / T::lit(2.0);
        (next, rho_next)
    }
}

/// Runs `f` over path indices in parallel and returns the results in path
/// order.
pub(crate) fn map_paths<T: Send, F>(n_paths: usize, f: F) -> Vec<T>
where
    F: Fn(u64) -> T + Sync + Send,
{
    (0..n_paths as u64).into_par_iter().map(f).collect()
}
