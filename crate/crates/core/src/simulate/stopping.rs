//! The stopping problem behind `U`: the reflected process
//! `K = (z − α) ∨ S − Y + α` with `Y = −μt − σB` and `S` its running
//! maximum, stopped when `K` reaches `b(R)`.

use serde::Serialize;

use crate::model::{lambda, DiscountSpec, ModelParams};
use crate::rng::{PathStreams, StreamTag};
use crate::simulate::kernel::{map_paths, RateStepper};
use crate::simulate::{bridge_hit_below, bridge_max, normal, uniform_open, Barrier, McEstimate, PathConfig};
use crate::{Error, Real, Result};

/// Per-path contributions to `U` and to `U_z`.
struct StoppingPath<T> {
    u: T,
    uz: T,
    truncated: bool,
}

/// One path, simulated under the measure with density
/// `exp(ηλY_t + λμη(1 − η)t)`, under which `Y` drifts at `μ(2η − 1)`.
///
/// Returns the conditional expectation, given the grid path, of the
/// reweighted payoff
/// `e^{λ((z0−α)∨S_τ − (z0−α)) − ηλY_τ − λμη(1−η)τ − I_τ}` and of the `U_z`
/// integrand. With the bridge correction each step contributes its in-step
/// hitting probability times the payoff at the crossing level.
fn stopping_path<T: Real>(
    params: &ModelParams<T>,
    disc: &DiscountSpec<T>,
    lam: T,
    z0: T,
    r0: T,
    barrier: &dyn Barrier<T>,
    cfg: &PathConfig<T>,
    streams: PathStreams,
    path: u64,
) -> StoppingPath<T> {
    let alpha = params.alpha;
    let x0 = z0 - alpha;
    if z0 >= barrier.level(r0) {
        return StoppingPath { u: T::one(), uz: T::zero(), truncated: false };
    }
    let stepper = RateStepper::new(params, disc, cfg, !barrier.rate_free());
    let mut rng_b = streams.stream(path, StreamTag::Surplus);
    let mut rng_w = streams.stream(path, StreamTag::Rate);
    let sqdt = cfg.dt.sqrt();
    let s2dt = params.sigma * params.sigma * cfg.dt;
    let reach = T::lit(8.0) * params.sigma * sqdt;
    let eta = cfg.tilt;
    let drift = params.mu * (T::lit(2.0) * eta - T::one()) * cfg.dt;
    let tilt_rate = lam * params.mu * eta * (T::one() - eta);

    let (mut r, mut rho) = (r0, stepper.rho(r0));
    let mut integral = T::zero();
    let (mut y, mut s) = (T::zero(), T::zero());
    let mut mass = T::one();
    let (mut u, mut uz) = (T::zero(), T::zero());
    let payoff = |s: T, y_tau: T, t: T, integral: T| -> (T, T) {
        let top = x0.max(s);
        let value = (lam * (top - x0) - eta * lam * y_tau - tilt_rate * t - integral).exp();
        (value, if s > x0 { value } else { T::zero() })
    };

    for n in 1..=cfg.n_steps() {
        let xi: T = normal(&mut rng_b);
        let y_next = y + drift - params.sigma * sqdt * xi;
        let (r_next, rho_next) = stepper.step(r, rho, &mut integral, &mut rng_w);
        let end_max = y.max(y_next);
        let step_max = if cfg.bridge_max && end_max + reach > s {
            bridge_max(y, y_next, s2dt, uniform_open(&mut rng_b))
        } else {
            end_max
        };
        s = s.max(step_max);
        r = r_next;
        rho = rho_next;
        let t = T::from_usize_lossy(n) * cfg.dt;

        // K ≥ b  ⇔  Y ≤ (z0 − α) ∨ S + α − b.
        let level = x0.max(s) + alpha - barrier.level(r);
        if y_next <= level {
            let y_tau = if cfg.bridge_max { level } else { y_next };
            let (value, grad) = payoff(s, y_tau, t, integral);
            u = u + mass * value;
            uz = uz + mass * grad;
            return StoppingPath { u, uz: -lam * uz, truncated: false };
        }
        if cfg.bridge_max && y > level {
            let p = bridge_hit_below(y, y_next, level, s2dt);
            if p > T::zero() {
                let (value, grad) = payoff(s, level, t, integral);
                u = u + mass * p * value;
                uz = uz + mass * p * grad;
                mass = mass * (T::one() - p);
            }
        }
        y = y_next;
    }
    StoppingPath { u, uz: -lam * uz, truncated: true }
}

/// Estimates of `U(r0, z0)` and `U_z(r0, z0)` from the same paths.
#[derive(Debug, Clone, Serialize)]
pub struct StoppingEstimates<T> {
    pub u: McEstimate<T>,
    pub uz: McEstimate<T>,
}

/// Simulates the stopping rule `τ = inf{t : K_t ≥ b(R_t)}` from `(r0, z0)`.
pub fn stopping_estimates<T: Real>(
    params: &ModelParams<T>,
    disc: &DiscountSpec<T>,
    z0: T,
    r0: T,
    barrier: &dyn Barrier<T>,
    cfg: &PathConfig<T>,
) -> Result<StoppingEstimates<T>> {
    cfg.validate()?;
    let lam = lambda(params)?;
    if !(z0 >= params.alpha) {
        return Err(Error::Domain(format!("z0 = {z0} lies below alpha = {}", params.alpha)));
    }
    let streams = PathStreams::new(cfg.seed);
    let paths = map_paths(cfg.n_paths, |p| stopping_path(params, disc, lam, z0, r0, barrier, cfg, streams, p));
    let truncated = paths.iter().filter(|p| p.truncated).count();
    let u: Vec<T> = paths.iter().map(|p| p.u).collect();
    let uz: Vec<T> = paths.iter().map(|p| p.uz).collect();
    Ok(StoppingEstimates {
        u: McEstimate::from_samples(&u, truncated, cfg.seed),
        uz: McEstimate::from_samples(&uz, truncated, cfg.seed),
    })
}

/// Monte Carlo estimate of `U(r0, z0)` under the stopping boundary `b`.
pub fn run_stopping_value<T: Real>(
    params: &ModelParams<T>,
    disc: &DiscountSpec<T>,
    z0: T,
    r0: T,
    barrier: &dyn Barrier<T>,
    cfg: &PathConfig<T>,
) -> Result<McEstimate<T>> {
    Ok(stopping_estimates(params, disc, z0, r0, barrier, cfg)?.u)
}

/// Monte Carlo estimate of
/// `U_z(r0, z0) = −λ E[1{S_τ > z0−α} e^{λ(S_τ − (z0−α)) − I_τ}]`.
pub fn estimate_uz<T: Real>(
    params: &ModelParams<T>,
    disc: &DiscountSpec<T>,
    z0: T,
    r0: T,
    barrier: &dyn Barrier<T>,
    cfg: &PathConfig<T>,
) -> Result<McEstimate<T>> {
    if !(z0 > params.alpha) {
        return Err(Error::Domain(format!("U_z needs z0 > alpha, got z0 = {z0}")));
    }
    Ok(stopping_estimates(params, disc, z0, r0, barrier, cfg)?.uz)
}
