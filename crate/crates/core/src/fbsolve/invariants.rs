//! Structural checks on a solved stopping value and its boundary.

use serde::Serialize;

use crate::fbsolve::boundary::Boundary;
use crate::fbsolve::diagnostics::near_fixed;
use crate::grid::ScalarField;
use crate::model::{h0_bound, lambda, DiscountSpec, ModelParams};
use crate::oracle1d::ConstantRateSolution;
use crate::{Real, Result};

/// One named check. `value` is the measured quantity and `limit` the bound it
/// is compared with; `margin` is positive when the check passes.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct InvariantCheck {
    pub name: String,
    pub passed: bool,
    pub value: f64,
    pub limit: f64,
    pub margin: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub location: Option<(f64, f64)>,
}

impl InvariantCheck {
    /// Passes when `value ≤ limit`.
    pub fn at_most(name: &str, value: f64, limit: f64) -> Self {
        Self { name: name.into(), passed: value <= limit, value, limit, margin: limit - value, location: None }
    }

    /// Passes when `value ≥ limit`.
    pub fn at_least(name: &str, value: f64, limit: f64) -> Self {
        Self { name: name.into(), passed: value >= limit, value, limit, margin: value - limit, location: None }
    }

    /// Passes iff the value is finite.
    fn with_finite(mut self) -> Self {
        self.passed = self.value.is_finite();
        self
    }

    pub fn at(mut self, r: f64, z: f64) -> Self {
        self.location = Some((r, z));
        self
    }
}

/// Tolerances of the field checks.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Tolerances {
    pub monotone: f64,
    pub convex: f64,
    pub lipschitz: f64,
    /// Lower bound `1 − lower_slack·δ`.
    pub lower_slack: f64,
}

impl Default for Tolerances {
    fn default() -> Self {
        Self { monotone: 1e-8, convex: 1e-6, lipschitz: 1e-6, lower_slack: 10.0 }
    }
}

fn loc<T: Real>(u: &ScalarField<T>, i: usize, j: usize) -> (f64, f64) {
    (u.grid.r_nodes()[i].as_f64(), u.grid.z_nodes()[j].as_f64())
}

/// Bounds, monotonicity in both variables, convexity in `z`, the Lipschitz
/// estimate in `z` and the elastic condition at `α`.
///
/// The elastic check reports `C = max_r |(U_1 − U_0)/h + λU_0| / h` over
/// columns away from those in `fixed_columns` (see `EDGE_LAYER`); it passes whenever `C` is finite,
/// stability under refinement is for the caller to judge.
pub fn field_checks<T: Real>(
    params: &ModelParams<T>,
    disc: &DiscountSpec<T>,
    u: &ScalarField<T>,
    delta: T,
    tol: &Tolerances,
    fixed_columns: &[usize],
) -> Result<Vec<InvariantCheck>> {
    let g = &u.grid;
    let (n_r, n_z) = (g.n_r(), g.n_z());
    let zs = g.z_nodes();
    let h0 = h0_bound(params, disc)?.as_f64();
    let lam = lambda(params)?.as_f64();
    let alpha = g.alpha().as_f64();
    let mut out = Vec::new();

    let (mut min, mut max) = ((f64::INFINITY, 0, 0), (f64::NEG_INFINITY, 0, 0));
    let (mut inc_z, mut inc_r) = ((f64::NEG_INFINITY, 0, 0), (f64::NEG_INFINITY, 0, 0));
    let mut conv = (f64::INFINITY, 0, 0);
    for i in 0..n_r {
        for j in 0..n_z {
            let v = u.at(i, j).as_f64();
            if v < min.0 {
                min = (v, i, j);
            }
            if v > max.0 {
                max = (v, i, j);
            }
            if j + 1 < n_z {
                let d = u.at(i, j + 1).as_f64() - v;
                if d > inc_z.0 {
                    inc_z = (d, i, j);
                }
            }
            if i + 1 < n_r {
                let d = u.at(i + 1, j).as_f64() - v;
                if d > inc_r.0 {
                    inc_r = (d, i, j);
                }
            }
            if j > 0 && j + 1 < n_z {
                let d = u.at(i, j + 1).as_f64() - 2.0 * v + u.at(i, j - 1).as_f64();
                if d < conv.0 {
                    conv = (d, i, j);
                }
            }
        }
    }
    let lower = 1.0 - tol.lower_slack * delta.as_f64();
    let push = |out: &mut Vec<InvariantCheck>, c: InvariantCheck, (_, i, j): (f64, usize, usize)| {
        let (r, z) = loc(u, i, j);
        out.push(c.at(r, z));
    };
    push(&mut out, InvariantCheck::at_least("lower_bound", min.0, lower), min);
    push(&mut out, InvariantCheck::at_most("upper_bound", max.0, h0), max);
    push(&mut out, InvariantCheck::at_most("monotone_z", inc_z.0, tol.monotone), inc_z);
    push(&mut out, InvariantCheck::at_most("monotone_r", inc_r.0, tol.monotone), inc_r);
    push(&mut out, InvariantCheck::at_least("convex_z", conv.0, -tol.convex), conv);

    // U(z1) − U(z2) ≤ h0 (e^{−λ(z1−α)} − e^{−λ(z2−α)}) for z1 < z2.
    let decay: Vec<f64> = zs.iter().map(|&z| (-lam * (z.as_f64() - alpha)).exp()).collect();
    let mut lip = (f64::NEG_INFINITY, 0, 0);
    for i in 0..n_r {
        let col: Vec<f64> = u.column(i).iter().map(|v| v.as_f64()).collect();
        for a in 0..n_z {
            for b in a + 1..n_z {
                let excess = (col[a] - col[b]) - h0 * (decay[a] - decay[b]);
                if excess > lip.0 {
                    lip = (excess, i, a);
                }
            }
        }
    }
    push(&mut out, InvariantCheck::at_most("lipschitz_z", lip.0, tol.lipschitz), lip);

    let h = (zs[1] - zs[0]).as_f64();
    let rs = u.grid.r_nodes();
    let mut elastic = (0.0f64, 0, 0);
    for i in (0..n_r).filter(|&i| !near_fixed(rs, i, fixed_columns)) {
        let (u0, u1) = (u.at(i, 0).as_f64(), u.at(i, 1).as_f64());
        let c = ((u1 - u0) / h + lam * u0).abs() / h;
        if c > elastic.0 {
            elastic = (c, i, 0);
        }
    }
    push(&mut out, InvariantCheck::at_most("elastic_constant", elastic.0, f64::INFINITY).with_finite(), elastic);
    Ok(out)
}

/// Shape of the boundary: nonincreasing, strictly above `α`, below the
/// constant-rate barrier at `c1` when `c1 > 0`, and flattening out at
/// `r_max` (within `3·h_z` of its minimum) when `c2 > 0`.
pub fn boundary_checks<T: Real>(
    params: &ModelParams<T>,
    disc: &DiscountSpec<T>,
    boundary: &Boundary<T>,
    h_z: T,
) -> Result<Vec<InvariantCheck>> {
    let mut out = Vec::new();
    let rise = boundary.max_increase().as_f64();
    out.push(InvariantCheck::at_most("boundary_nonincreasing", rise, 0.0));
    let alpha = params.alpha.as_f64();
    let (min, max) = (boundary.min().as_f64(), boundary.max().as_f64());
    let mut above = InvariantCheck::at_least("boundary_above_alpha", min, alpha);
    above.passed = min > alpha;
    out.push(above);
    if disc.c1 > T::zero() {
        let z_star = ConstantRateSolution::new(params, disc.c1)?.barrier().as_f64();
        out.push(InvariantCheck::at_most("boundary_below_c1_barrier", max, z_star));
    }
    if disc.c2 > T::zero() {
        let last = *boundary.b.last().expect("boundary is nonempty");
        let gap = (last - boundary.min()).as_f64();
        out.push(InvariantCheck::at_most("boundary_flat_at_rmax", gap, 3.0 * h_z.as_f64()));
    }
    Ok(out)
}
