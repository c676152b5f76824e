//! Monte Carlo for the controlled surplus, the reflected process `K` and the
//! short rate.
//!
//! Every path draws from its own pair of counter-based streams (see
//! [`crate::rng`]), results are collected in path order and summed
//! sequentially, so an estimate depends only on the seed and the inputs,
//! never on the number of worker threads.

mod dividend;
mod kernel;
mod laplace;
mod stopping;
mod trace;

use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

pub use dividend::{run_dividend_policy, suboptimality_sweep, SweepRow, SweepTable};
pub use laplace::{laplace_monte_carlo, running_max_tail, LaplaceEstimate, TailEstimate};
pub use stopping::{estimate_uz, run_stopping_value, stopping_estimates, StoppingEstimates};
pub use trace::{trace_path, write_trace_csv, TraceRow};

use crate::fbsolve::Boundary;
use crate::{Error, Real, Result};

/// How the short rate is advanced between grid times.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RateScheme {
    /// Exact noncentral χ² transitions.
    Exact,
    /// Moment-matched full-truncation Euler steps.
    Euler,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct PathConfig<T> {
    pub dt: T,
    /// Horizon at which unfinished paths are cut off.
    pub t_max: T,
    pub n_paths: usize,
    pub seed: u64,
    /// Sample within-step extrema and crossings from the Brownian bridge.
    pub bridge_max: bool,
    pub rate_scheme: RateScheme,
    /// Russian roulette on the discount factor of dividend paths: whenever it
    /// falls below this level the path survives with probability ½ and its
    /// weight doubles. Zero disables it.
    pub roulette: T,
    /// Exponent `η ∈ [0, 1]` of the change of measure used for the stopping
    /// problem: paths of `Y` are drawn with drift `μ(2η − 1)` and reweighted
    /// by the martingale `exp(−ηλY_t − λμη(1−η)t)`. `η = 0` samples the
    /// plain payoff, whose second moment is infinite once the barrier sits
    /// far above `α`; `η = 1` makes the payoff bounded by `e^{λ(b − z0)}`.
    pub tilt: T,
}

impl<T: Real> Default for PathConfig<T> {
    fn default() -> Self {
        Self {
            dt: T::lit(1e-3),
            t_max: T::lit(200.0),
            n_paths: 10_000,
            seed: 0x5eed,
            bridge_max: true,
            rate_scheme: RateScheme::Euler,
            roulette: T::lit(0.25),
            tilt: T::lit(0.75),
        }
    }
}

impl<T: Real> PathConfig<T> {
    pub fn validate(&self) -> Result<()> {
        if !(self.dt > T::zero()) {
            return Err(Error::Config(format!("dt must be positive, got {}", self.dt)));
        }
        if !(self.t_max >= self.dt) {
            return Err(Error::Config(format!("t_max must be at least dt, got {}", self.t_max)));
        }
        if self.n_paths == 0 {
            return Err(Error::Config("n_paths must be at least 1".into()));
        }
        if !(self.roulette >= T::zero() && self.roulette < T::one()) {
            return Err(Error::Config(format!("roulette level must lie in [0, 1), got {}", self.roulette)));
        }
        if !(self.tilt >= T::zero() && self.tilt <= T::one()) {
            return Err(Error::Config(format!("tilt must lie in [0, 1], got {}", self.tilt)));
        }
        Ok(())
    }

    pub(crate) fn n_steps(&self) -> usize {
        (self.t_max / self.dt).ceil().to_usize().unwrap_or(usize::MAX)
    }
}

/// Share of truncated paths above which an estimate carries a warning.
pub const TRUNCATION_WARNING: f64 = 0.05;

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct McEstimate<T> {
    pub mean: T,
    /// Sample standard deviation over `√n_paths`.
    pub std_error: T,
    pub n_paths: usize,
    pub seed: u64,
    /// Share of paths still running at `t_max`.
    pub truncation_fraction: T,
    #[serde(skip_serializing_if = "Vec::is_empty")]
    pub warnings: Vec<String>,
}

impl<T: Real> McEstimate<T> {
    /// Builds an estimate from per-path samples, summed in order.
    pub fn from_samples(samples: &[T], truncated: usize, seed: u64) -> Self {
        let n = samples.len();
        let nf = T::from_usize_lossy(n.max(1));
        let degenerate = samples.iter().all(|&x| x == samples[0]);
        let mean = if n > 0 && degenerate {
            samples[0]
        } else {
            samples.iter().fold(T::zero(), |a, &x| a + x) / nf
        };
        let var = if n > 1 && !degenerate {
            samples.iter().fold(T::zero(), |a, &x| a + (x - mean) * (x - mean)) / T::from_usize_lossy(n - 1)
        } else {
            T::zero()
        };
        let truncation_fraction = T::from_usize_lossy(truncated) / nf;
        let mut warnings = Vec::new();
        if truncation_fraction.as_f64() > TRUNCATION_WARNING {
            let w = format!(
                "{:.1}% of paths reached t_max; raise t_max",
                100.0 * truncation_fraction.as_f64()
            );
            log::warn!("{w}");
            warnings.push(w);
        }
        Self { mean, std_error: (var / nf).sqrt(), n_paths: n, seed, truncation_fraction, warnings }
    }

    /// Whether `value` lies within `k` standard errors plus `slack` of the
    /// mean.
    pub fn agrees_with(&self, value: T, k: T, slack: T) -> bool {
        (self.mean - value).abs() <= k * self.std_error + slack
    }
}

/// Dividend or stopping barrier as a function of the short rate.
pub trait Barrier<T>: Sync {
    fn level(&self, r: T) -> T;

    /// True when the level does not depend on `r`.
    fn rate_free(&self) -> bool {
        false
    }
}

impl<T: Real> Barrier<T> for Boundary<T> {
    fn level(&self, r: T) -> T {
        self.eval(r)
    }
}

/// Barrier independent of the rate; `+∞` means never.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ConstantBarrier<T>(pub T);

impl<T: Real> Barrier<T> for ConstantBarrier<T> {
    fn level(&self, _r: T) -> T {
        self.0
    }

    fn rate_free(&self) -> bool {
        true
    }
}

#[inline]
pub(crate) fn normal<T: Real, R: Rng>(rng: &mut R) -> T {
    let x: f64 = rng.sample(StandardNormal);
    T::lit(x)
}

#[inline]
pub(crate) fn uniform_open<T: Real, R: Rng>(rng: &mut R) -> T {
    // (0, 1]: safe for logarithms.
    let u: f64 = 1.0 - rng.random::<f64>();
    T::lit(u)
}

/// Maximum of a Brownian bridge from `a` to `b` with variance `s2dt` over the
/// step, given a uniform `u ∈ (0, 1]`.
#[inline]
pub(crate) fn bridge_max<T: Real>(a: T, b: T, s2dt: T, u: T) -> T {
    let d = b - a;
    (a + b + (d * d - T::lit(2.0) * s2dt * u.ln()).sqrt()) / T::lit(2.0)
}

/// Probability that a Brownian bridge from `a` to `b` (both above `level`)
/// dips to `level`.
#[inline]
pub(crate) fn bridge_hit_below<T: Real>(a: T, b: T, level: T, s2dt: T) -> T {
    let x = T::lit(2.0) * (a - level) * (b - level) / s2dt;
    if x > T::lit(50.0) {
        T::zero()
    } else {
        (-x).exp()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::{PathStreams, StreamTag};

    #[test]
    fn estimate_statistics() {
        let e = McEstimate::from_samples(&[1.0, 2.0, 3.0, 4.0], 1, 9);
        assert_eq!(e.mean, 2.5);
        assert!((e.std_error - (5.0f64 / 3.0 / 4.0).sqrt()).abs() < 1e-15);
        assert_eq!(e.truncation_fraction, 0.25);
        assert_eq!(e.warnings.len(), 1);
        let c = McEstimate::from_samples(&[0.1; 10], 0, 9);
        assert_eq!(c.mean, 0.1);
        assert_eq!(c.std_error, 0.0);
        assert!(c.warnings.is_empty());
    }

    #[test]
    fn config_validation() {
        assert!(PathConfig::<f64>::default().validate().is_ok());
        assert!(PathConfig { dt: 0.0, ..PathConfig::<f64>::default() }.validate().is_err());
        assert!(PathConfig { n_paths: 0, ..PathConfig::<f64>::default() }.validate().is_err());
        assert!(PathConfig { t_max: 1e-4, ..PathConfig::<f64>::default() }.validate().is_err());
    }

    #[test]
    fn bridge_max_law() {
        // P(max > c) = exp(−2(c − a)(c − b)/s2dt) for c above both ends.
        let mut rng = PathStreams::new(3).stream(0, StreamTag::Surplus);
        let (a, b, s2dt, c) = (0.0, 0.1, 0.04, 0.3);
        let n = 200_000;
        let hits = (0..n).filter(|_| bridge_max(a, b, s2dt, uniform_open::<f64, _>(&mut rng)) > c).count();
        let p = (-2.0 * (c - a) * (c - b) / s2dt).exp();
        let se = (p * (1.0 - p) / n as f64).sqrt();
        assert!(((hits as f64 / n as f64) - p).abs() < 4.0 * se);
        assert_eq!(bridge_hit_below(1.0, 1.0, 0.0, 1e-3), 0.0);
        assert!((bridge_hit_below(0.3, 0.1, 0.0, 0.04) - (-2.0 * 0.3 * 0.1 / 0.04f64).exp()).abs() < 1e-15);
    }
}
