//! Model inputs: surplus and short-rate coefficients, the discount-rate
//! function, validation and the analytic bound on the stopping value.

use serde::{Deserialize, Serialize};

use crate::cir;
use crate::quad::adaptive_simpson;
use crate::{Error, Real, Result};

/// Surplus drift/volatility, solvency level and CIR coefficients.
///
/// Surplus: `dZ = μ dt + σ dB − dD`. Short rate: `dR = k(θ − R) dt + γ √R dW`
/// with `B` and `W` independent.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ModelParams<T> {
    pub mu: T,
    pub sigma: T,
    pub alpha: T,
    pub k: T,
    pub theta: T,
    pub gamma: T,
}

impl<T: Real> ModelParams<T> {
    /// α=0, σ=μ=1, θ=0.15, k=0.5, γ=0.3.
    pub fn reference() -> Self {
        Self {
            mu: T::one(),
            sigma: T::one(),
            alpha: T::zero(),
            k: T::lit(0.5),
            theta: T::lit(0.15),
            gamma: T::lit(0.3),
        }
    }

    /// `2kθ ≥ γ²`.
    pub fn feller_holds(&self) -> bool {
        T::lit(2.0) * self.k * self.theta >= self.gamma * self.gamma
    }

    /// Degrees of freedom `4kθ/γ²` of the CIR transition law.
    pub fn cir_degrees_of_freedom(&self) -> T {
        T::lit(4.0) * self.k * self.theta / (self.gamma * self.gamma)
    }
}

/// Shape of the discount-rate function `ρ`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum DiscountKind<T> {
    /// `ρ(r) = ρ0`.
    Constant { rho0: T },
    /// `ρ(r) = r0 + r`.
    LinearShift { r0: T },
    /// `ρ(r) = √(r0 + r)`.
    SqrtShift { r0: T },
    /// Piecewise linear through `(r, ρ)` samples, constant outside them.
    Tabulated { samples: Vec<(T, T)> },
}

/// Discount-rate function together with the constants of its growth
/// assumptions: `ρ(r) ≥ c1 + c2·r` and
/// `ρ(r1) − ρ(r2) ≤ c3 (1 + r1^q)(√r1 − √r2)`.
#[derive(Debug, Clone, PartialEq)]
pub struct DiscountSpec<T> {
    pub kind: DiscountKind<T>,
    pub c1: T,
    pub c2: T,
    pub c3: T,
    pub q: u32,
}

impl<T: Real> DiscountSpec<T> {
    pub fn constant(rho0: T) -> Self {
        Self { kind: DiscountKind::Constant { rho0 }, c1: rho0, c2: T::zero(), c3: T::one(), q: 0 }
    }

    pub fn linear_shift(r0: T) -> Self {
        // r1 − r2 = (√r1 + √r2)(√r1 − √r2) ≤ (1 + r1)(√r1 − √r2)
        Self { kind: DiscountKind::LinearShift { r0 }, c1: r0, c2: T::one(), c3: T::one(), q: 1 }
    }

    pub fn sqrt_shift(r0: T) -> Self {
        // √(r0+r1) − √(r0+r2) ≤ √r1 − √r2
        Self {
            kind: DiscountKind::SqrtShift { r0 },
            c1: r0.max(T::zero()).sqrt(),
            c2: T::zero(),
            c3: T::one(),
            q: 0,
        }
    }

    /// Piecewise-linear rate through the given samples (sorted by `r`).
    ///
    /// `c1` is the value at the first sample, `c2 = 0` because the rate is
    /// flat beyond the last sample, and `c3` is the steepest slope (valid with
    /// `q = 1`).
    pub fn tabulated(samples: Vec<(T, T)>) -> Self {
        let c1 = samples.first().map(|s| s.1).unwrap_or_else(T::zero);
        let c3 = samples
            .windows(2)
            .map(|w| (w[1].1 - w[0].1) / (w[1].0 - w[0].0))
            .fold(T::zero(), |acc, s| if s > acc { s } else { acc });
        Self {
            kind: DiscountKind::Tabulated { samples },
            c1,
            c2: T::zero(),
            c3: if c3 > T::zero() { c3 } else { T::one() },
            q: 1,
        }
    }

    /// Evaluates `ρ(r)`; negative arguments are treated as zero.
    #[inline]
    pub fn rho(&self, r: T) -> T {
        let r = r.max(T::zero());
        match &self.kind {
            DiscountKind::Constant { rho0 } => *rho0,
            DiscountKind::LinearShift { r0 } => *r0 + r,
            DiscountKind::SqrtShift { r0 } => (*r0 + r).sqrt(),
            DiscountKind::Tabulated { samples } => interpolate_flat(samples, r),
        }
    }

    /// Whether `ρ` does not depend on `r`.
    pub fn is_constant(&self) -> bool {
        match &self.kind {
            DiscountKind::Constant { .. } => true,
            DiscountKind::Tabulated { samples } => samples.windows(2).all(|w| w[0].1 == w[1].1),
            _ => false,
        }
    }
}

fn interpolate_flat<T: Real>(samples: &[(T, T)], r: T) -> T {
    match samples {
        [] => T::zero(),
        [only] => only.1,
        _ => {
            let first = samples[0];
            let last = samples[samples.len() - 1];
            if r <= first.0 {
                return first.1;
            }
            if r >= last.0 {
                return last.1;
            }
            let idx = samples.partition_point(|s| s.0 <= r);
            let (r0, y0) = samples[idx - 1];
            let (r1, y1) = samples[idx];
            y0 + (y1 - y0) * (r - r0) / (r1 - r0)
        }
    }
}

/// One named validation check.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Check {
    pub name: &'static str,
    pub passed: bool,
    pub detail: String,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ValidationReport {
    pub checks: Vec<Check>,
}

impl ValidationReport {
    pub fn passed(&self) -> bool {
        self.checks.iter().all(|c| c.passed)
    }

    pub fn failures(&self) -> impl Iterator<Item = &Check> {
        self.checks.iter().filter(|c| !c.passed)
    }

    pub fn check(&self, name: &str) -> Option<&Check> {
        self.checks.iter().find(|c| c.name == name)
    }

    /// Converts a failing report into a configuration error.
    pub fn into_result(self) -> Result<()> {
        if self.passed() {
            return Ok(());
        }
        let msg = self
            .failures()
            .map(|c| format!("{}: {}", c.name, c.detail))
            .collect::<Vec<_>>()
            .join("; ");
        Err(Error::Config(msg))
    }
}

/// Checks every model and discount-rate invariant; never fails, the report
/// carries the verdicts.
pub fn validate<T: Real>(params: &ModelParams<T>, disc: &DiscountSpec<T>) -> ValidationReport {
    let mut checks = Vec::new();
    let mut push = |name: &'static str, passed: bool, detail: String| {
        checks.push(Check { name, passed, detail });
    };
    let p = params;
    let all_finite = [p.mu, p.sigma, p.alpha, p.k, p.theta, p.gamma].iter().all(|v| v.is_finite());
    push("finite_parameters", all_finite, "all coefficients finite".into());
    push("sigma_positive", p.sigma > T::zero(), format!("sigma = {}", p.sigma));
    push("gamma_positive", p.gamma > T::zero(), format!("gamma = {}", p.gamma));
    push("k_positive", p.k > T::zero(), format!("k = {}", p.k));
    push("theta_positive", p.theta > T::zero(), format!("theta = {}", p.theta));
    push("alpha_nonnegative", p.alpha >= T::zero(), format!("alpha = {}", p.alpha));
    push(
        "feller",
        p.feller_holds(),
        format!(
            "2·k·theta = {} vs gamma² = {}",
            T::lit(2.0) * p.k * p.theta,
            p.gamma * p.gamma
        ),
    );
    push(
        "mu_positive",
        p.mu > T::zero(),
        format!("mu = {} (mu ≤ 0 means immediate liquidation is optimal)", p.mu),
    );

    let d = disc;
    push("c1_nonnegative", d.c1 >= T::zero(), format!("c1 = {}", d.c1));
    push("c2_nonnegative", d.c2 >= T::zero(), format!("c2 = {}", d.c2));
    push(
        "c1_plus_c2_positive",
        d.c1 + d.c2 > T::zero(),
        format!("c1 + c2 = {}", d.c1 + d.c2),
    );
    push(
        "growth_constant",
        d.c3 > T::zero(),
        format!("c3 = {}, q = {} (metadata only)", d.c3, d.q),
    );
    let (shape_ok, shape_detail) = discount_shape(d);
    push("rho_nondecreasing_nonnegative", shape_ok, shape_detail);
    let (lb_ok, lb_detail) = lower_bound_holds(d);
    push("rho_lower_bound", lb_ok, lb_detail);
    ValidationReport { checks }
}

fn discount_shape<T: Real>(d: &DiscountSpec<T>) -> (bool, String) {
    match &d.kind {
        DiscountKind::Constant { rho0 } => (
            rho0.is_finite() && *rho0 >= T::zero(),
            format!("rho0 = {rho0}"),
        ),
        DiscountKind::LinearShift { r0 } | DiscountKind::SqrtShift { r0 } => (
            r0.is_finite() && *r0 >= T::zero(),
            format!("r0 = {r0}"),
        ),
        DiscountKind::Tabulated { samples } => {
            if samples.is_empty() {
                return (false, "no samples".into());
            }
            if samples[0].0 < T::zero() {
                return (false, "first sample has r < 0".into());
            }
            for (i, w) in samples.windows(2).enumerate() {
                if !(w[1].0 > w[0].0) {
                    return (false, format!("sample {} does not increase in r", i + 1));
                }
                if w[1].1 < w[0].1 {
                    return (false, format!("rho decreases between samples {} and {}", i, i + 1));
                }
            }
            if let Some((i, _)) =
                samples.iter().enumerate().find(|(_, s)| !(s.1 >= T::zero()) || !s.1.is_finite())
            {
                return (false, format!("sample {i} has a negative or non-finite rate"));
            }
            (true, format!("{} samples verified", samples.len()))
        }
    }
}

fn lower_bound_holds<T: Real>(d: &DiscountSpec<T>) -> (bool, String) {
    let slack = T::lit(1e-12);
    match &d.kind {
        DiscountKind::Tabulated { samples } => {
            if d.c2 > T::zero() {
                return (false, "tabulated rates are flat beyond the last sample, so c2 must be 0".into());
            }
            let mut probes: Vec<T> = samples.iter().map(|s| s.0).collect();
            probes.push(T::zero());
            let bad = probes.into_iter().find(|&r| d.rho(r) + slack < d.c1 + d.c2 * r);
            match bad {
                Some(r) => (false, format!("rho({r}) < c1 + c2·r")),
                None => (true, "rho(r) ≥ c1 + c2·r at all samples".into()),
            }
        }
        _ => {
            // Built-in kinds are concave or affine in r, so checking a
            // geometric sweep is enough to catch inconsistent c1/c2.
            let mut r = T::zero();
            for i in 0..40 {
                if d.rho(r) + slack < d.c1 + d.c2 * r {
                    return (false, format!("rho({r}) < c1 + c2·r"));
                }
                r = T::lit(1e-4) * T::lit(2.0).powi(i);
            }
            (true, "rho(r) ≥ c1 + c2·r".into())
        }
    }
}

/// `λ = 2μ/σ²`.
pub fn lambda<T: Real>(params: &ModelParams<T>) -> Result<T> {
    if !(params.mu > T::zero()) {
        return Err(Error::Domain(format!("lambda requires mu > 0, got {}", params.mu)));
    }
    Ok(T::lit(2.0) * params.mu / (params.sigma * params.sigma))
}

/// Value of the dividend problem when `μ ≤ 0`: pay out everything at once.
pub fn liquidation_value<T: Real>(params: &ModelParams<T>, z: T) -> T {
    (z - params.alpha).max(T::zero())
}

/// Upper bound `h0` with `1 ≤ U ≤ h0` on the whole domain.
///
/// With `c1 > 0` the bound is `E[exp(λσ S^p)] = 2pμ/(c1σ)` where
/// `p = μ/σ + c1σ/(2μ)`. Otherwise it is
/// `1 + ∫₀^∞ exp(−A_{c2}(t)) (2μ²/σ² + 3μ/(σ√t)) dt`, integrated numerically
/// after the substitution `t = s²` that removes the `1/√t` singularity.
pub fn h0_bound<T: Real>(params: &ModelParams<T>, disc: &DiscountSpec<T>) -> Result<T> {
    lambda(params)?;
    let (mu, sigma) = (params.mu, params.sigma);
    if disc.c1 > T::zero() {
        let p = mu / sigma + disc.c1 * sigma / (T::lit(2.0) * mu);
        return Ok(T::lit(2.0) * p * mu / (disc.c1 * sigma));
    }
    if !(disc.c2 > T::zero()) {
        return Err(Error::Domain("h0_bound requires c1 + c2 > 0".into()));
    }
    let beta = disc.c2;
    let a_coef = T::lit(2.0) * mu * mu / (sigma * sigma);
    let b_coef = T::lit(3.0) * mu / sigma;
    let (slope, offset) = cir::laplace_a_asymptote(params, beta);
    // Tail beyond T_end is below e^{offset}(a + b)e^{−slope·T_end}/slope.
    let tail_target = T::lit(1e-12);
    let mut t_end = T::one();
    while offset.exp() * (a_coef + b_coef / t_end.sqrt()) * (-slope * t_end).exp() / slope
        > tail_target
    {
        t_end = t_end * T::lit(1.5);
        if t_end > T::lit(1e7) {
            return Err(Error::Numerical(format!(
                "h0 integrand decays too slowly (asymptotic slope {:.3e})",
                slope.as_f64()
            )));
        }
    }
    let integrand = |s: T| {
        let t = s * s;
        let disc_factor = (-cir::laplace_coefficients(params, beta, t).a).exp();
        disc_factor * (T::lit(2.0) * s * a_coef + T::lit(2.0) * b_coef)
    };
    let q = adaptive_simpson(integrand, T::zero(), t_end.sqrt(), T::lit(1e-10), 50)
        .map_err(|e| Error::Numerical(format!("h0 quadrature (c2 = {}): {e}", beta)))?;
    Ok(T::one() + q.value)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    fn defaults() -> ModelParams<f64> {
        ModelParams::reference()
    }

    #[test]
    fn reference_parameters_validate() {
        let rep = validate(&defaults(), &DiscountSpec::linear_shift(0.05));
        assert!(rep.passed(), "{rep:?}");
        assert!(rep.check("feller").unwrap().passed);
    }

    #[test]
    fn feller_violation_is_reported() {
        let p = ModelParams { k: 0.5, theta: 0.05, gamma: 0.5, ..defaults() };
        let rep = validate(&p, &DiscountSpec::constant(0.05));
        assert!(!rep.passed());
        assert!(!rep.check("feller").unwrap().passed);
        assert_eq!(rep.failures().count(), 1);
    }

    #[test]
    fn zero_discount_constants_fail() {
        let mut d = DiscountSpec::linear_shift(0.05);
        d.c1 = 0.0;
        d.c2 = 0.0;
        let rep = validate(&defaults(), &d);
        assert!(!rep.check("c1_plus_c2_positive").unwrap().passed);
        assert!(rep.clone().into_result().is_err());
    }

    #[test]
    fn validation_is_pure() {
        let d = DiscountSpec::sqrt_shift(0.05);
        assert_eq!(validate(&defaults(), &d), validate(&defaults(), &d));
    }

    #[test]
    fn tabulated_checks_each_sample() {
        let good = DiscountSpec::tabulated(vec![(0.0, 0.05), (0.5, 0.3), (1.0, 0.6)]);
        assert!(validate(&defaults(), &good).passed());
        let bad = DiscountSpec::tabulated(vec![(0.0, 0.05), (0.5, 0.3), (1.0, 0.2)]);
        assert!(!validate(&defaults(), &bad).check("rho_nondecreasing_nonnegative").unwrap().passed);
        let zero = DiscountSpec::tabulated(vec![(0.0, 0.0), (1.0, 0.0)]);
        assert!(!validate(&defaults(), &zero).check("c1_plus_c2_positive").unwrap().passed);
    }

    #[test]
    fn tabulated_interpolates_and_flattens() {
        let d = DiscountSpec::tabulated(vec![(0.1, 0.1), (0.3, 0.5)]);
        assert_relative_eq!(d.rho(0.0), 0.1);
        assert_relative_eq!(d.rho(0.2), 0.3, epsilon = 1e-15);
        assert_relative_eq!(d.rho(5.0), 0.5);
    }

    #[test]
    fn builtin_constants() {
        let d = DiscountSpec::<f64>::sqrt_shift(0.05);
        assert_relative_eq!(d.c1, 0.05f64.sqrt());
        assert_eq!(d.c2, 0.0);
        let d = DiscountSpec::<f64>::linear_shift(0.05);
        assert_eq!((d.c1, d.c2), (0.05, 1.0));
        let d = DiscountSpec::<f64>::constant(0.2);
        assert_eq!((d.c1, d.c2), (0.2, 0.0));
    }

    #[test]
    fn lambda_values() {
        let p = |mu, sigma| ModelParams { mu, sigma, ..defaults() };
        assert_eq!(lambda(&p(1.0, 1.0)).unwrap(), 2.0);
        assert_eq!(lambda(&p(1.0, 2.0)).unwrap(), 0.5);
        assert_eq!(lambda(&p(0.5, 1.0)).unwrap(), 1.0);
        assert!(matches!(lambda(&p(0.0, 1.0)), Err(Error::Domain(_))));
        assert!(matches!(lambda(&p(-1.0, 1.0)), Err(Error::Domain(_))));
    }

    #[test]
    fn h0_closed_form_branch() {
        // 2p ∫₀^∞ exp(−(c1σ/μ) y) dy = 2pμ/(c1σ)
        let h = h0_bound(&defaults(), &DiscountSpec::constant(0.05)).unwrap();
        assert_relative_eq!(h, 41.0, max_relative = 1e-12);
        let h = h0_bound(&defaults(), &DiscountSpec::constant(1.0)).unwrap();
        assert_relative_eq!(h, 3.0, max_relative = 1e-12);
    }

    #[test]
    fn h0_quadrature_branch_is_finite() {
        let mut d = DiscountSpec::linear_shift(0.0);
        d.c1 = 0.0;
        let h = h0_bound(&defaults(), &d).unwrap();
        assert!(h.is_finite() && h > 1.0, "h0 = {h}");
    }

    #[test]
    fn liquidation_is_distance_to_alpha() {
        let p = ModelParams { mu: -0.2, alpha: 0.5, ..defaults() };
        assert_eq!(liquidation_value(&p, 2.0), 1.5);
        assert_eq!(liquidation_value(&p, 0.5), 0.0);
    }

    #[test]
    fn generic_over_f32() {
        let p = ModelParams::<f32>::reference();
        let h = h0_bound(&p, &DiscountSpec::constant(1.0f32)).unwrap();
        assert!((h - 3.0).abs() < 1e-5);
    }
}
