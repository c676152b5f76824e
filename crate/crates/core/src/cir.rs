//! CIR short rate: Laplace transform of the integrated rate, conditional
//! moments and path simulation.

use rand::Rng;
use rand_distr::{ChiSquared, Distribution, Poisson, StandardNormal};

use crate::model::{DiscountSpec, ModelParams};
use crate::Real;

/// `A_β(t)`, `G_β(t)` and `η_β = √(k² + 2γ²β)` in
/// `E_r[exp(−β ∫₀ᵗ R du)] = exp(−A_β(t) − r G_β(t))`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LaplaceCoefficients<T> {
    pub a: T,
    pub g: T,
    pub eta: T,
}

/// Evaluates `A_β(t)` and `G_β(t)`.
///
/// Both are written in terms of `e^{−ηt}` so that no intermediate overflows
/// for large `t`.
pub fn laplace_coefficients<T: Real>(params: &ModelParams<T>, beta: T, t: T) -> LaplaceCoefficients<T> {
    let (k, theta, gamma) = (params.k, params.theta, params.gamma);
    let two = T::lit(2.0);
    let eta = (k * k + two * gamma * gamma * beta).sqrt();
    let decay = (-eta * t).exp();
    let grown = -(-eta * t).exp_m1();
    let g = two * beta * grown / (eta * (T::one() + decay) + k * grown);
    let log_ratio =
        (two * eta).ln() + (k - eta) * t / two - ((eta + k) * grown + two * eta * decay).ln();
    let a = -(two * k * theta / (gamma * gamma)) * log_ratio;
    LaplaceCoefficients { a, g, eta }
}

/// Slope and offset of the affine lower bound `A_β(t) ≥ slope·t − offset`,
/// which is also the large-`t` asymptote.
pub fn laplace_a_asymptote<T: Real>(params: &ModelParams<T>, beta: T) -> (T, T) {
    let (k, theta, gamma) = (params.k, params.theta, params.gamma);
    let two = T::lit(2.0);
    let eta = (k * k + two * gamma * gamma * beta).sqrt();
    let slope = k * theta / (gamma * gamma) * (eta - k);
    let offset = two * k * theta / (gamma * gamma) * (two * eta / (eta + k)).ln();
    (slope, offset)
}

/// `E_r[exp(−β ∫₀ᵗ R_u du)]`.
pub fn laplace_integrated_cir<T: Real>(params: &ModelParams<T>, beta: T, t: T, r: T) -> T {
    let c = laplace_coefficients(params, beta, t);
    (-c.a - r * c.g).exp()
}

/// Conditional mean and variance of `R_t` given `R_0 = r`.
pub fn cir_mean_var<T: Real>(params: &ModelParams<T>, r: T, t: T) -> (T, T) {
    let (k, theta, gamma) = (params.k, params.theta, params.gamma);
    let e = (-k * t).exp();
    let one_minus = -(-k * t).exp_m1();
    let mean = r * e + theta * one_minus;
    let g2 = gamma * gamma;
    let var = r * g2 / k * e * one_minus + theta * g2 / (T::lit(2.0) * k) * one_minus * one_minus;
    (mean, var)
}

/// Draws `R_{t+dt}` given `R_t = r` from the exact transition law: a scaled
/// noncentral χ² with `4kθ/γ²` degrees of freedom.
pub fn sample_transition<T: Real, R: Rng + ?Sized>(params: &ModelParams<T>, r: T, dt: T, rng: &mut R) -> T {
    let k = params.k.as_f64();
    let gamma = params.gamma.as_f64();
    let dt = dt.as_f64();
    let scale = gamma * gamma * (-(-k * dt).exp_m1()) / (4.0 * k);
    let df = params.cir_degrees_of_freedom().as_f64();
    let nc = r.as_f64().max(0.0) * (-k * dt).exp() / scale;
    let x = noncentral_chi_squared(df, nc, rng);
    T::lit(scale * x)
}

fn noncentral_chi_squared<R: Rng + ?Sized>(df: f64, nc: f64, rng: &mut R) -> f64 {
    if df > 1.0 {
        let z: f64 = StandardNormal.sample(rng);
        let central = ChiSquared::new(df - 1.0).expect("df > 1").sample(rng);
        (z + nc.sqrt()).powi(2) + central
    } else {
        let n = if nc > 0.0 {
            Poisson::new(nc / 2.0).expect("positive mean").sample(rng)
        } else {
            0.0
        };
        ChiSquared::new(df + 2.0 * n).expect("positive df").sample(rng)
    }
}

/// Precomputed coefficients for the moment-matched full-truncation Euler step
/// `R' = θ + (R⁺ − θ)e^{−kΔ} + γ √(R⁺) √((1 − e^{−2kΔ})/(2k)) ξ`.
///
/// The conditional mean is exact; only the variance carries an `O(Δ)` error.
#[derive(Debug, Clone, Copy)]
pub struct EulerStep<T> {
    theta: T,
    decay: T,
    vol: T,
}

impl<T: Real> EulerStep<T> {
    pub fn new(params: &ModelParams<T>, dt: T) -> Self {
        let k = params.k;
        let decay = (-k * dt).exp();
        let var_factor = -(-T::lit(2.0) * k * dt).exp_m1() / (T::lit(2.0) * k);
        Self { theta: params.theta, decay, vol: params.gamma * var_factor.sqrt() }
    }

    /// Advances with the standard normal `xi`. The state may dip below zero;
    /// every consumer uses its positive part.
    #[inline]
    pub fn advance(&self, r: T, xi: T) -> T {
        let rp = r.max(T::zero());
        self.theta + (rp - self.theta) * self.decay + self.vol * rp.sqrt() * xi
    }
}

/// Cumulative trapezoidal integral of `ρ(R)` along a path sampled every
/// `dt`; the first entry is zero.
pub fn integrated_rate_increment<T: Real>(path: &[T], dt: T, rho: &DiscountSpec<T>) -> Vec<T> {
    let mut out = Vec::with_capacity(path.len());
    if path.is_empty() {
        return out;
    }
    let half = dt / T::lit(2.0);
    let mut acc = T::zero();
    let mut prev = rho.rho(path[0]);
    out.push(acc);
    for &r in &path[1..] {
        let cur = rho.rho(r);
        acc = acc + half * (prev + cur);
        out.push(acc);
        prev = cur;
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn defaults() -> ModelParams<f64> {
        ModelParams::reference()
    }

    #[test]
    fn transform_is_one_at_time_zero() {
        for &(beta, r) in &[(0.05, 0.0), (1.0, 0.15), (7.0, 3.0)] {
            assert_eq!(laplace_integrated_cir(&defaults(), beta, 0.0, r), 1.0);
        }
    }

    #[test]
    fn transform_decreases_in_rate() {
        let p = defaults();
        assert!(laplace_integrated_cir(&p, 1.0, 1.0, 0.5) < laplace_integrated_cir(&p, 1.0, 1.0, 0.1));
    }

    #[test]
    fn transform_stable_for_huge_times() {
        let v = laplace_integrated_cir(&defaults(), 2.0, 5000.0, 0.3);
        assert!(v.is_finite() && (0.0..1e-50).contains(&v));
        let c = laplace_coefficients(&defaults(), 2.0, 5000.0);
        assert!(c.a.is_finite() && c.g.is_finite());
    }

    /// Independent route: A and G solve the Riccati system
    /// G' = β − kG − γ²G²/2, A' = kθG with zero initial data.
    #[test]
    fn coefficients_match_riccati_integration() {
        let p = defaults();
        let beta = 0.7;
        let n = 20_000;
        let t_end = 3.0;
        let h = t_end / n as f64;
        let rhs = |g: f64| beta - p.k * g - 0.5 * p.gamma * p.gamma * g * g;
        let (mut g, mut a) = (0.0f64, 0.0f64);
        for _ in 0..n {
            let k1 = rhs(g);
            let k2 = rhs(g + 0.5 * h * k1);
            let k3 = rhs(g + 0.5 * h * k2);
            let k4 = rhs(g + h * k3);
            let (ga, gb, gc) = (g, g + 0.5 * h * k2, g + h * k3);
            a += h * p.k * p.theta * (ga + 4.0 * gb + gc) / 6.0;
            g += h * (k1 + 2.0 * k2 + 2.0 * k3 + k4) / 6.0;
        }
        let c = laplace_coefficients(&p, beta, t_end);
        assert_relative_eq!(c.g, g, max_relative = 1e-9);
        assert_relative_eq!(c.a, a, max_relative = 1e-6);
    }

    #[test]
    fn mean_var_degenerate_cases() {
        let p = defaults();
        for &t in &[0.1, 1.0, 30.0] {
            assert_relative_eq!(cir_mean_var(&p, p.theta, t).0, p.theta, max_relative = 1e-14);
        }
        let (m, v) = cir_mean_var(&p, 0.4, 0.0);
        assert_eq!((m, v), (0.4, 0.0));
    }

    #[test]
    fn transition_is_reproducible() {
        let p = defaults();
        let mut a = ChaCha8Rng::seed_from_u64(9);
        let mut b = ChaCha8Rng::seed_from_u64(9);
        for _ in 0..100 {
            assert_eq!(sample_transition(&p, 0.15, 0.1, &mut a), sample_transition(&p, 0.15, 0.1, &mut b));
        }
    }

    #[test]
    fn small_df_branch_matches_mean() {
        // 4kθ/γ² = 0.8 < 1 exercises the Poisson mixture.
        let p = ModelParams { theta: 0.02, gamma: 0.2, ..defaults() };
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let n = 100_000;
        let xs: Vec<f64> = (0..n).map(|_| sample_transition(&p, 0.05, 0.5, &mut rng)).collect();
        let mean = xs.iter().sum::<f64>() / n as f64;
        let var = xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1) as f64;
        let (m, v) = cir_mean_var(&p, 0.05, 0.5);
        assert!((mean - m).abs() < 3.0 * (v / n as f64).sqrt(), "{mean} vs {m}");
        assert!((var - v).abs() / v < 0.05);
    }

    #[test]
    fn euler_step_has_exact_mean_map() {
        let p = defaults();
        let step = EulerStep::new(&p, 0.25);
        let (m, _) = cir_mean_var(&p, 0.4, 0.25);
        assert_relative_eq!(step.advance(0.4, 0.0), m, max_relative = 1e-14);
    }

    #[test]
    fn trapezoid_on_constant_path() {
        let d = DiscountSpec::constant(0.07);
        let path = vec![0.15; 101];
        let acc = integrated_rate_increment(&path, 0.01, &d);
        assert_eq!(acc[0], 0.0);
        assert_relative_eq!(acc[100], 0.07, max_relative = 1e-13);
        assert!(acc.windows(2).all(|w| w[1] >= w[0]));
    }

    #[test]
    fn trapezoid_uses_positive_part() {
        let d = DiscountSpec::linear_shift(0.0);
        let acc = integrated_rate_increment(&[-0.1, -0.1], 1.0, &d);
        assert_eq!(acc[1], 0.0);
    }
}
