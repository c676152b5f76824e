//! Monte Carlo checks of two closed forms: the Laplace transform of the
//! integrated CIR rate and the exponential law of `sup_t (−μt − σB_t)`.

use serde::Serialize;

use crate::cir::{laplace_integrated_cir, sample_transition, EulerStep};
use crate::model::{lambda, ModelParams};
use crate::rng::{PathStreams, StreamTag};
use crate::simulate::kernel::map_paths;
use crate::simulate::{bridge_max, normal, uniform_open, McEstimate, PathConfig, RateScheme};
use crate::{Error, Real, Result};

#[derive(Debug, Clone, Serialize)]
pub struct LaplaceEstimate<T> {
    pub beta: T,
    pub t: T,
    pub r: T,
    pub estimate: McEstimate<T>,
    pub exact: T,
}

/// Estimates `E_r[exp(−β ∫₀ᵗ R du)]` for every `(β, t)` pair from one set
/// of paths started at `r`. Times are rounded to the step grid.
pub fn laplace_monte_carlo<T: Real>(
    params: &ModelParams<T>,
    betas: &[T],
    times: &[T],
    r: T,
    cfg: &PathConfig<T>,
) -> Result<Vec<LaplaceEstimate<T>>> {
    cfg.validate()?;
    if times.iter().any(|&t| !(t > T::zero())) || betas.iter().any(|&b| !(b > T::zero())) {
        return Err(Error::Domain("times and betas must be positive".into()));
    }
    let steps: Vec<usize> = times.iter().map(|&t| (t / cfg.dt).round().to_usize().unwrap_or(0).max(1)).collect();
    let n_max = *steps.iter().max().unwrap_or(&1);
    let euler = EulerStep::new(params, cfg.dt);
    let streams = PathStreams::new(cfg.seed);
    let half = cfg.dt / T::lit(2.0);
    let integrals: Vec<Vec<T>> = map_paths(cfg.n_paths, |p| {
        let mut rng = streams.stream(p, StreamTag::Rate);
        let mut out = vec![T::zero(); steps.len()];
        let (mut x, mut acc) = (r, T::zero());
        for n in 1..=n_max {
            let next = match cfg.rate_scheme {
                RateScheme::Euler => euler.advance(x, normal(&mut rng)),
                RateScheme::Exact => sample_transition(params, x, cfg.dt, &mut rng),
            };
            acc = acc + half * (x.max(T::zero()) + next.max(T::zero()));
            x = next;
            for (o, &s) in out.iter_mut().zip(&steps) {
                if s == n {
                    *o = acc;
                }
            }
        }
        out
    });
    let mut out = Vec::new();
    for &beta in betas {
        for (k, &s) in steps.iter().enumerate() {
            let t = T::from_usize_lossy(s) * cfg.dt;
            let samples: Vec<T> = integrals.iter().map(|v| (-beta * v[k]).exp()).collect();
            out.push(LaplaceEstimate {
                beta,
                t,
                r,
                estimate: McEstimate::from_samples(&samples, 0, cfg.seed),
                exact: laplace_integrated_cir(params, beta, t, r),
            });
        }
    }
    Ok(out)
}

#[derive(Debug, Clone, Serialize)]
pub struct TailEstimate {
    pub x: Vec<f64>,
    /// Empirical `P(S > x)`.
    pub survival: Vec<f64>,
    /// `e^{−λx}`.
    pub law: Vec<f64>,
    /// `sup_x |F_n(x) − (1 − e^{−λx})|` over the whole sample.
    pub ks_distance: f64,
    /// Asymptotic Kolmogorov–Smirnov critical value at level 1%,
    /// `1.6276/√n`.
    pub ks_band: f64,
    pub n_paths: usize,
}

/// Kolmogorov 99% quantile.
const KS_99: f64 = 1.6276;

/// Samples `S = sup_{t ≤ t_max} (−μt − σB_t)` with the bridge maximum in
/// every step and compares its survival function with `e^{−λx}`.
///
/// A path stops early once it sits so far below its maximum that a new
/// maximum has probability below `e^{−30}`.
pub fn running_max_tail<T: Real>(params: &ModelParams<T>, xs: &[f64], cfg: &PathConfig<T>) -> Result<TailEstimate> {
    cfg.validate()?;
    let lam = lambda(params)?;
    let sqdt = cfg.dt.sqrt();
    let s2dt = params.sigma * params.sigma * cfg.dt;
    let gap = T::lit(30.0) / lam;
    let streams = PathStreams::new(cfg.seed);
    let mut maxima: Vec<f64> = map_paths(cfg.n_paths, |p| {
        let mut rng = streams.stream(p, StreamTag::Surplus);
        let (mut y, mut s) = (T::zero(), T::zero());
        for _ in 0..cfg.n_steps() {
            let y_next = y - params.mu * cfg.dt - params.sigma * sqdt * normal::<T, _>(&mut rng);
            let top = if cfg.bridge_max {
                bridge_max(y, y_next, s2dt, uniform_open(&mut rng))
            } else {
                y.max(y_next)
            };
            s = s.max(top);
            y = y_next;
            if s - y > gap {
                break;
            }
        }
        s.as_f64()
    });
    let n = maxima.len();
    maxima.sort_by(f64::total_cmp);
    let lam = lam.as_f64();
    let cdf = |x: f64| 1.0 - (-lam * x.max(0.0)).exp();
    let mut ks = 0.0f64;
    for (i, &m) in maxima.iter().enumerate() {
        let f = cdf(m);
        ks = ks.max((f - i as f64 / n as f64).abs()).max(((i + 1) as f64 / n as f64 - f).abs());
    }
    let survival = xs
        .iter()
        .map(|&x| (n - maxima.partition_point(|&m| m <= x)) as f64 / n as f64)
        .collect();
    Ok(TailEstimate {
        x: xs.to_vec(),
        survival,
        law: xs.iter().map(|&x| (-lam * x).exp()).collect(),
        ks_distance: ks,
        ks_band: KS_99 / (n as f64).sqrt(),
        n_paths: n,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn laplace_small_lattice() {
        let p = ModelParams::reference();
        let cfg = PathConfig { n_paths: 4000, dt: 5e-3, ..PathConfig::default() };
        let est = laplace_monte_carlo(&p, &[1.0], &[0.5, 1.0], 0.15, &cfg).unwrap();
        assert_eq!(est.len(), 2);
        for e in &est {
            assert!(e.estimate.agrees_with(e.exact, 4.0, 0.0), "{e:?}");
        }
    }

    #[test]
    fn tail_law_small_sample() {
        let p = ModelParams::reference();
        let cfg = PathConfig { n_paths: 4000, dt: 1e-2, t_max: 50.0, ..PathConfig::default() };
        let t = running_max_tail(&p, &[0.5, 1.0], &cfg).unwrap();
        assert!(t.ks_distance < t.ks_band, "{t:?}");
    }
}
