//! Residuals of the free-boundary system and the `V_rr` continuity check.

use serde::Serialize;

use crate::fbsolve::boundary::Boundary;
use crate::grid::{Grid2D, ScalarField};
use crate::model::{lambda, DiscountSpec, ModelParams};
use crate::{Real, Result};

/// A value and the node where it was attained.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct NodeValue {
    pub value: f64,
    pub r: f64,
    pub z: f64,
}

impl NodeValue {
    fn empty() -> Self {
        Self { value: f64::NAN, r: f64::NAN, z: f64::NAN }
    }

    fn keep_max(&mut self, value: f64, r: f64, z: f64) {
        if self.value.is_nan() || value > self.value {
            *self = Self { value, r, z };
        }
    }

    fn keep_min(&mut self, value: f64, r: f64, z: f64) {
        if self.value.is_nan() || value < self.value {
            *self = Self { value, r, z };
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ResidualReport {
    /// `max |(L − ρ)U|` at least two cells inside the continuation region,
    /// over nodes where the penalty is inactive (`U ≥ 1`).
    pub continuation_residual: NodeValue,
    /// `max |(L − ρ)U + ρ|` at least two cells inside the stopping region.
    /// For a penalized solution this stays of order `ρ` inside a layer of
    /// width about `σ√δ` above `b`, where `(1 − U)/δ` takes the place of `ρ`.
    pub stopping_residual: NodeValue,
    /// `max ((L − ρ)V)⁺` over interior nodes.
    pub value_positive_part: NodeValue,
    /// `max |(L − ρ)V|` at least two cells inside the continuation region.
    pub value_continuation_residual: NodeValue,
    /// `min (V_z − 1)` over interior nodes.
    pub gradient_min: NodeValue,
    /// `max_r |(U_1 − U_0)/h + λU_0|` on the row `z = α`, over the same
    /// columns as the other residuals.
    pub neumann_residual: NodeValue,
    /// Isotonic projection displacement supplied by the caller.
    pub isotonic_displacement: f64,
    pub continuation_nodes: usize,
    pub stopping_nodes: usize,
}

/// Central-difference `(L − ρ)f` at an interior node.
pub(crate) fn central_generator<T: Real>(
    f: &ScalarField<T>,
    params: &ModelParams<T>,
    disc: &DiscountSpec<T>,
    i: usize,
    j: usize,
) -> T {
    let g = &f.grid;
    let (rs, zs) = (g.r_nodes(), g.z_nodes());
    let two = T::lit(2.0);
    let r = rs[i];
    let (fz, fzz) = derivatives(zs, |jj| f.at(i, jj), j);
    let (fr, frr) = derivatives(rs, |ii| f.at(ii, j), i);
    params.sigma * params.sigma / two * fzz
        + params.mu * fz
        + params.gamma * params.gamma * r / two * frr
        + params.k * (params.theta - r) * fr
        - disc.rho(r) * f.at(i, j)
}

/// Three-point first and second derivatives at an interior index of a
/// nonuniform axis.
fn derivatives<T: Real>(x: &[T], f: impl Fn(usize) -> T, k: usize) -> (T, T) {
    let (hm, hp) = (x[k] - x[k - 1], x[k + 1] - x[k]);
    let (fm, f0, fp) = (f(k - 1), f(k), f(k + 1));
    let d1 = (fp * hm * hm - fm * hp * hp + f0 * (hp * hp - hm * hm)) / (hm * hp * (hm + hp));
    let d2 = T::lit(2.0) * (fp * hm - f0 * (hm + hp) + fm * hp) / (hm * hp * (hm + hp));
    (d1, d2)
}

/// Derivative along an axis: central inside, one-sided at the ends.
fn gradient<T: Real>(x: &[T], f: impl Fn(usize) -> T, k: usize) -> T {
    let n = x.len();
    if k == 0 {
        (f(1) - f(0)) / (x[1] - x[0])
    } else if k + 1 == n {
        (f(n - 1) - f(n - 2)) / (x[n - 1] - x[n - 2])
    } else {
        derivatives(x, f, k).0
    }
}

enum Region {
    Continuation,
    Stopping,
    Band,
}

fn classify<T: Real>(grid: &Grid2D<T>, boundary: &Boundary<T>, i: usize, j: usize) -> Region {
    let n_r = grid.n_r();
    let margin = T::lit(2.0) * grid.h_z();
    let lo = i.saturating_sub(2);
    let hi = (i + 2).min(n_r - 1);
    let window = &boundary.b[lo..=hi];
    let b_min = window.iter().copied().fold(T::infinity(), T::min);
    let b_max = window.iter().copied().fold(T::neg_infinity(), T::max);
    let z = grid.z_nodes()[j];
    if z + margin <= b_min {
        Region::Continuation
    } else if z - margin >= b_max {
        Region::Stopping
    } else {
        Region::Band
    }
}

/// Share of the rate range next to a Dirichlet column left out of the
/// diagnostics.
pub const EDGE_LAYER: f64 = 0.05;

/// Whether column `i` lies within two cells, or within [`EDGE_LAYER`] of the
/// rate range, of a column carrying Dirichlet data.
pub(crate) fn near_fixed<T: Real>(rs: &[T], i: usize, fixed_columns: &[usize]) -> bool {
    let width = T::lit(EDGE_LAYER) * (rs[rs.len() - 1] - rs[0]);
    fixed_columns.iter().any(|&f| f.abs_diff(i) <= 2 || (rs[f] - rs[i]).abs() <= width)
}

/// Residuals of the free-boundary problem for `U` and of the variational
/// inequality for `V`, evaluated with central differences at interior
/// nodes. Columns within two cells or [`EDGE_LAYER`] of `fixed_columns` are
/// skipped.
/// `boundary` must be sampled on the grid's rate nodes.
pub fn hjb_residual<T: Real>(
    params: &ModelParams<T>,
    disc: &DiscountSpec<T>,
    u: &ScalarField<T>,
    v: &ScalarField<T>,
    boundary: &Boundary<T>,
    isotonic_displacement: T,
    fixed_columns: &[usize],
) -> Result<ResidualReport> {
    let grid = &u.grid;
    let lam = lambda(params)?;
    let (n_r, n_z) = (grid.n_r(), grid.n_z());
    let (rs, zs) = (grid.r_nodes(), grid.z_nodes());
    let mut report = ResidualReport {
        continuation_residual: NodeValue::empty(),
        stopping_residual: NodeValue::empty(),
        value_positive_part: NodeValue::empty(),
        value_continuation_residual: NodeValue::empty(),
        gradient_min: NodeValue::empty(),
        neumann_residual: NodeValue::empty(),
        isotonic_displacement: isotonic_displacement.as_f64(),
        continuation_nodes: 0,
        stopping_nodes: 0,
    };
    for i in 1..n_r - 1 {
        if near_fixed(rs, i, fixed_columns) {
            continue;
        }
        let r = rs[i].as_f64();
        for j in 1..n_z - 1 {
            let z = zs[j].as_f64();
            let lu = central_generator(u, params, disc, i, j).as_f64();
            let lv = central_generator(v, params, disc, i, j).as_f64();
            report.value_positive_part.keep_max(lv.max(0.0), r, z);
            let vz = derivatives(zs, |jj| v.at(i, jj), j).0.as_f64();
            report.gradient_min.keep_min(vz - 1.0, r, z);
            match classify(grid, boundary, i, j) {
                Region::Continuation => {
                    report.continuation_nodes += 1;
                    if u.at(i, j) >= T::one() {
                        report.continuation_residual.keep_max(lu.abs(), r, z);
                    }
                    report.value_continuation_residual.keep_max(lv.abs(), r, z);
                }
                Region::Stopping => {
                    report.stopping_nodes += 1;
                    let rho = disc.rho(rs[i]).as_f64();
                    report.stopping_residual.keep_max((lu + rho).abs(), r, z);
                }
                Region::Band => {}
            }
        }
    }
    let h = (zs[1] - zs[0]).as_f64();
    for (i, &r) in rs.iter().enumerate() {
        if near_fixed(rs, i, fixed_columns) {
            continue;
        }
        let (u0, u1) = (u.at(i, 0).as_f64(), u.at(i, 1).as_f64());
        report.neumann_residual.keep_max(((u1 - u0) / h + lam.as_f64() * u0).abs(), r.as_f64(), zs[0].as_f64());
    }
    Ok(report)
}

#[derive(Debug, Clone, Serialize)]
pub struct VrrDiagnostic<T> {
    /// Closed-form `V_rr` at every node, with the upper integration limit
    /// clamped at `b(r)`.
    #[serde(skip)]
    pub field: ScalarField<T>,
    /// Largest change of the closed form between `z`-neighbours within two
    /// cells of the boundary.
    pub max_jump: NodeValue,
    /// `max |V_rr(closed form) − V_rr(finite difference)|` at least two cells
    /// inside the continuation region.
    pub fd_mismatch: NodeValue,
}

/// Evaluates
/// `V_rr = (2/(γ² r)) ∫_α^{z∧b} (ρU − μU_z − k(θ−r)U_r) dy − (σ²/(γ² r))(U_z(z∧b) − U_z(α))`
/// with finite-difference `U_z`, `U_r` and trapezoidal integration.
pub fn vrr_diagnostic<T: Real>(
    params: &ModelParams<T>,
    disc: &DiscountSpec<T>,
    u: &ScalarField<T>,
    boundary: &Boundary<T>,
) -> VrrDiagnostic<T> {
    let grid = &u.grid;
    let (n_r, n_z) = (grid.n_r(), grid.n_z());
    let (rs, zs) = (grid.r_nodes(), grid.z_nodes());
    let g2 = params.gamma * params.gamma;
    let s2 = params.sigma * params.sigma;
    let half = T::lit(0.5);
    let mut values = Vec::with_capacity(grid.len());
    for i in 0..n_r {
        let r = rs[i];
        let rho = disc.rho(r);
        let drift = params.k * (params.theta - r);
        let uz: Vec<T> = (0..n_z).map(|j| gradient(zs, |jj| u.at(i, jj), j)).collect();
        let integrand: Vec<T> = (0..n_z)
            .map(|j| rho * u.at(i, j) - params.mu * uz[j] - drift * gradient(rs, |ii| u.at(ii, j), i))
            .collect();
        let b = boundary.b[i];
        let mut acc = T::zero();
        let mut clamped: Option<T> = None;
        for j in 0..n_z {
            if j > 0 && clamped.is_none() {
                let (z0, z1) = (zs[j - 1], zs[j]);
                if z1 <= b {
                    acc = acc + half * (z1 - z0) * (integrand[j] + integrand[j - 1]);
                } else {
                    // Partial cell up to b, integrand interpolated linearly.
                    let w = ((b - z0) / (z1 - z0)).max(T::zero());
                    let fb = integrand[j - 1] + w * (integrand[j] - integrand[j - 1]);
                    acc = acc + half * (b - z0).max(T::zero()) * (integrand[j - 1] + fb);
                    let uz_b = uz[j - 1] + w * (uz[j] - uz[j - 1]);
                    clamped = Some(T::lit(2.0) / (g2 * r) * acc - s2 / (g2 * r) * (uz_b - uz[0]));
                }
            }
            values.push(match clamped {
                Some(c) => c,
                None => T::lit(2.0) / (g2 * r) * acc - s2 / (g2 * r) * (uz[j] - uz[0]),
            });
        }
    }
    let field = ScalarField { grid: grid.clone(), values };

    let mut max_jump = NodeValue::empty();
    let mut fd_mismatch = NodeValue::empty();
    let band = T::lit(2.0) * grid.h_z();
    for i in 0..n_r {
        let b = boundary.b[i];
        for j in 0..n_z - 1 {
            let (z0, z1) = (zs[j], zs[j + 1]);
            if z1 >= b - band && z0 <= b + band {
                let jump = (field.at(i, j + 1) - field.at(i, j)).abs().as_f64();
                max_jump.keep_max(jump, rs[i].as_f64(), z0.as_f64());
            }
        }
    }
    if n_r > 2 {
        let v = crate::fbsolve::value::integrate_value(u);
        for i in 1..n_r - 1 {
            for j in 1..n_z - 1 {
                if let Region::Continuation = classify(grid, boundary, i, j) {
                    let (_, vrr) = derivatives(rs, |ii| v.at(ii, j), i);
                    let diff = (vrr - field.at(i, j)).abs().as_f64();
                    fd_mismatch.keep_max(diff, rs[i].as_f64(), zs[j].as_f64());
                }
            }
        }
    }
    VrrDiagnostic { field, max_jump, fd_mismatch }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn grid() -> Grid2D<f64> {
        Grid2D::uniform(0.05, 1.0, 20, 0.0, 2.0, 41).unwrap()
    }

    #[test]
    fn central_generator_on_polynomials() {
        let p = ModelParams::reference();
        let d = DiscountSpec::linear_shift(0.05);
        let f = ScalarField::from_fn(grid(), |r, z| z * z + r * r);
        let (i, j) = (7, 13);
        let (r, z) = (f.grid.r_nodes()[i], f.grid.z_nodes()[j]);
        let exact = p.sigma * p.sigma + p.mu * 2.0 * z + p.gamma * p.gamma * r + p.k * (p.theta - r) * 2.0 * r
            - d.rho(r) * (z * z + r * r);
        assert!((central_generator(&f, &p, &d, i, j) - exact).abs() < 1e-10);
    }

    #[test]
    fn unit_field_vrr_reduces_to_rate_term() {
        let p = ModelParams::reference();
        let d = DiscountSpec::linear_shift(0.05);
        let u = ScalarField::from_fn(grid(), |_, _| 1.0);
        let b = Boundary::new(grid().r_nodes().to_vec(), vec![1.234; 20]).unwrap();
        let diag = vrr_diagnostic(&p, &d, &u, &b);
        for (i, &r) in grid().r_nodes().iter().enumerate() {
            for (j, &z) in grid().z_nodes().iter().enumerate() {
                let expect = 2.0 / (p.gamma * p.gamma) * d.rho(r) * z.min(1.234) / r;
                assert!((diag.field.at(i, j) - expect).abs() < 1e-12, "{r} {z}");
            }
        }
    }

    #[test]
    fn report_is_complete() {
        let p = ModelParams::reference();
        let d = DiscountSpec::linear_shift(0.05);
        let u = ScalarField::from_fn(grid(), |_, z| (1.5 - z).max(0.0) + 1.0);
        let v = crate::fbsolve::value::integrate_value(&u);
        let b = Boundary::new(grid().r_nodes().to_vec(), vec![1.5; 20]).unwrap();
        let rep = hjb_residual(&p, &d, &u, &v, &b, 0.0, &[]).unwrap();
        let json = serde_json::to_value(&rep).unwrap();
        for key in ["continuation_residual", "stopping_residual", "gradient_min", "neumann_residual", "isotonic_displacement"] {
            assert!(json.get(key).is_some(), "{key}");
        }
        assert!(rep.continuation_residual.value.is_finite());
        assert!(rep.stopping_residual.value.is_finite());
        assert!(rep.continuation_nodes > 0 && rep.stopping_nodes > 0);
        // (L − ρ)1 + ρ = 0 in the stopping region.
        assert!(rep.stopping_residual.value < 1e-12);
        assert!((rep.gradient_min.value - 0.0).abs() < 1e-12);
    }
}
