//! Barrier dividend strategies: `D*_t = sup_{s≤t} (Z⁰_s − b(R_s))⁺`, paid
//! until the controlled surplus reaches `α`.

use serde::Serialize;

use crate::model::{DiscountSpec, ModelParams};
use crate::rng::{PathStreams, StreamTag};
use crate::simulate::kernel::{map_paths, RateStepper};
use crate::simulate::{bridge_hit_below, bridge_max, normal, uniform_open, Barrier, McEstimate, PathConfig};
use crate::{Error, Real, Result};

struct PolicyState<T> {
    dstar: T,
    alive: bool,
    /// Probability of no in-step ruin so far, given the grid path.
    survival: T,
    payoff: T,
}

pub(crate) struct DividendPath<T> {
    pub payoffs: Vec<T>,
    pub truncated: bool,
}

/// Barrier `b` followed by `b + Δ` for every shift, clamped to `[lo, hi]`.
pub(crate) struct BarrierFamily<'a, T> {
    pub base: &'a dyn Barrier<T>,
    pub shifts: &'a [T],
    pub lo: T,
    pub hi: T,
}

impl<T: Real> BarrierFamily<'_, T> {
    fn single<'a>(base: &'a dyn Barrier<T>) -> BarrierFamily<'a, T> {
        BarrierFamily { base, shifts: &[], lo: T::neg_infinity(), hi: T::infinity() }
    }

    fn levels(&self, r: T, out: &mut [T]) {
        let b = self.base.level(r);
        out[0] = b;
        for (o, &shift) in out[1..].iter_mut().zip(self.shifts) {
            *o = (b + shift).max(self.lo).min(self.hi);
        }
    }
}

/// Simulates one path of `(R, Z⁰)` and evaluates every barrier on it.
///
/// Dividends paid during a step are discounted at the left end point. With
/// the bridge correction the step maximum of `Z⁰` is sampled from the bridge
/// law, and in-step ruin is accounted for by multiplying later payments by
/// the bridge survival probability instead of killing the path.
pub(crate) fn dividend_path<T: Real>(
    params: &ModelParams<T>,
    disc: &DiscountSpec<T>,
    z0: T,
    r0: T,
    family: &BarrierFamily<'_, T>,
    cfg: &PathConfig<T>,
    streams: PathStreams,
    path: u64,
) -> DividendPath<T> {
    let rate_needed = !family.base.rate_free();
    let stepper = RateStepper::new(params, disc, cfg, rate_needed);
    let mut rng_b = streams.stream(path, StreamTag::Surplus);
    let mut rng_w = streams.stream(path, StreamTag::Rate);
    let alpha = params.alpha;
    let sqdt = cfg.dt.sqrt();
    let s2dt = params.sigma * params.sigma * cfg.dt;
    let reach = T::lit(8.0) * params.sigma * sqdt;

    let mut levels = vec![T::zero(); family.shifts.len() + 1];
    family.levels(r0, &mut levels);
    let mut states: Vec<PolicyState<T>> = levels
        .iter()
        .map(|&lv| {
            let post = z0.min(lv);
            let dstar = z0 - post;
            PolicyState { dstar, alive: post > alpha, survival: T::one(), payoff: dstar }
        })
        .collect();

    let (mut r, mut rho) = (r0, stepper.rho(r0));
    let mut integral = T::zero();
    let mut weight = T::one();
    // Roulette fires once I exceeds ln(weight / level).
    let roulette_on = cfg.roulette > T::zero();
    let mut roulette_at = if roulette_on { -cfg.roulette.ln() } else { T::infinity() };
    let mut zu = z0;
    let n_steps = cfg.n_steps();
    let mut truncated = false;

    for step in 0..n_steps {
        if !states.iter().any(|s| s.alive) {
            break;
        }
        if step + 1 == n_steps {
            truncated = true;
        }
        let xi: T = normal(&mut rng_b);
        let zu_next = zu + params.mu * cfg.dt + params.sigma * sqdt * xi;
        let u_bridge: T = if cfg.bridge_max { uniform_open(&mut rng_b) } else { T::one() };
        let discount = (-integral).exp() * weight;
        let (r_next, rho_next) = stepper.step(r, rho, &mut integral, &mut rng_w);

        family.levels(r_next, &mut levels);
        let trigger = states
            .iter()
            .zip(&levels)
            .filter(|(s, _)| s.alive)
            .fold(T::infinity(), |m, (s, &lv)| m.min(lv + s.dstar));
        let end_max = zu.max(zu_next);
        let top = if cfg.bridge_max && end_max + reach > trigger {
            bridge_max(zu, zu_next, s2dt, u_bridge)
        } else {
            end_max
        };
        for (s, &lv) in states.iter_mut().zip(&levels) {
            if !s.alive {
                continue;
            }
            let excess = top - lv;
            if excess > s.dstar {
                s.payoff = s.payoff + discount * s.survival * (excess - s.dstar);
                s.dstar = excess;
            }
            let (za, zb) = (zu - s.dstar, zu_next - s.dstar);
            if zb <= alpha {
                s.alive = false;
            } else if cfg.bridge_max {
                s.survival = s.survival * (T::one() - bridge_hit_below(za.max(alpha), zb, alpha, s2dt));
            }
        }
        zu = zu_next;
        r = r_next;
        rho = rho_next;
        if integral > roulette_at {
            let u: T = uniform_open(&mut rng_b);
            if u > T::lit(0.5) {
                for s in &mut states {
                    s.alive = false;
                }
                break;
            }
            weight = weight * T::lit(2.0);
            roulette_at = roulette_at + T::lit(2.0).ln();
        }
    }
    DividendPath { payoffs: states.into_iter().map(|s| s.payoff).collect(), truncated }
}

fn check_inputs<T: Real>(params: &ModelParams<T>, z0: T, r0: T, cfg: &PathConfig<T>) -> Result<()> {
    cfg.validate()?;
    if !(z0 >= params.alpha) {
        return Err(Error::Domain(format!("z0 = {z0} lies below alpha = {}", params.alpha)));
    }
    if !(r0 >= T::zero()) {
        return Err(Error::Domain(format!("r0 must be nonnegative, got {r0}")));
    }
    Ok(())
}

/// Expected discounted dividends of the barrier strategy `b` from
/// `(r0, z0)`.
pub fn run_dividend_policy<T: Real>(
    params: &ModelParams<T>,
    disc: &DiscountSpec<T>,
    z0: T,
    r0: T,
    barrier: &dyn Barrier<T>,
    cfg: &PathConfig<T>,
) -> Result<McEstimate<T>> {
    check_inputs(params, z0, r0, cfg)?;
    let streams = PathStreams::new(cfg.seed);
    let family = BarrierFamily::single(barrier);
    let paths = map_paths(cfg.n_paths, |p| dividend_path(params, disc, z0, r0, &family, cfg, streams, p));
    let samples: Vec<T> = paths.iter().map(|p| p.payoffs[0]).collect();
    let truncated = paths.iter().filter(|p| p.truncated).count();
    Ok(McEstimate::from_samples(&samples, truncated, cfg.seed))
}

#[derive(Debug, Clone, Serialize)]
pub struct SweepRow<T> {
    pub shift: T,
    pub estimate: McEstimate<T>,
    /// Per-path `payoff(b + shift) − payoff(b)`.
    pub difference: McEstimate<T>,
}

#[derive(Debug, Clone, Serialize)]
pub struct SweepTable<T> {
    pub base: McEstimate<T>,
    pub rows: Vec<SweepRow<T>>,
}

impl<T: Real> SweepTable<T> {
    /// Rows whose shifted barrier beats the base by more than `k` standard
    /// errors of the paired difference.
    pub fn violations(&self, k: T) -> Vec<&SweepRow<T>> {
        self.rows
            .iter()
            .filter(|row| row.difference.mean > k * row.difference.std_error)
            .collect()
    }
}

/// Runs the barrier `b` and the shifted barriers `b + Δ`, clamped to
/// `[α, z_cap]`, on common paths.
pub fn suboptimality_sweep<T: Real>(
    params: &ModelParams<T>,
    disc: &DiscountSpec<T>,
    z0: T,
    r0: T,
    barrier: &dyn Barrier<T>,
    shifts: &[T],
    z_cap: T,
    cfg: &PathConfig<T>,
) -> Result<SweepTable<T>> {
    check_inputs(params, z0, r0, cfg)?;
    let family = BarrierFamily { base: barrier, shifts, lo: params.alpha, hi: z_cap };
    let streams = PathStreams::new(cfg.seed);
    let paths = map_paths(cfg.n_paths, |p| dividend_path(params, disc, z0, r0, &family, cfg, streams, p));
    let truncated = paths.iter().filter(|p| p.truncated).count();
    let column = |k: usize| -> Vec<T> { paths.iter().map(|p| p.payoffs[k]).collect() };
    let base_samples = column(0);
    let base = McEstimate::from_samples(&base_samples, truncated, cfg.seed);
    let rows = shifts
        .iter()
        .enumerate()
        .map(|(k, &shift)| {
            let samples = column(k + 1);
            let diffs: Vec<T> = samples.iter().zip(&base_samples).map(|(a, b)| *a - *b).collect();
            SweepRow {
                shift,
                estimate: McEstimate::from_samples(&samples, truncated, cfg.seed),
                difference: McEstimate::from_samples(&diffs, truncated, cfg.seed),
            }
        })
        .collect();
    Ok(SweepTable { base, rows })
}
