//! Grid and penalty refinement on the reference parameters with the linear
//! discount, on grids coarse enough to run in seconds.

use std::sync::OnceLock;

use cirdiv::fbsolve::{
    extract_boundary, hjb_residual, integrate_value, solve_penalized, vrr_diagnostic, BoundaryData,
};
use cirdiv::{
    BoundaryExtraction, DiscountSpec64, Grid2D64, LevelRule, ModelParams64, PenalizedSolution, ResidualReport,
    ScalarField64, SolverConfig64,
};

const DELTA: f64 = 0.01;

// Residuals measured on the 128 grid with the default solver settings; the
// pass thresholds below are three times these.
const V_CONTINUATION_128: f64 = 4.44e-3;
const NEUMANN_128: f64 = 0.454;
const VRR_JUMP_128: f64 = 2.09;

struct Run {
    sol: PenalizedSolution<f64>,
    ex: BoundaryExtraction<f64>,
    v: ScalarField64,
    res: ResidualReport,
}

fn disc() -> DiscountSpec64 {
    DiscountSpec64::linear_shift(0.05)
}

fn run(n: usize, delta: f64) -> Run {
    let p = ModelParams64::reference();
    let cfg = SolverConfig64 { delta, ..SolverConfig64::default() };
    let grid = Grid2D64::uniform(0.005, 1.1, n, 0.0, 2.5, n).unwrap();
    let data = BoundaryData::for_config(&cfg, &grid, &p, &disc()).unwrap();
    let sol = solve_penalized(&cfg, &grid, &p, &disc(), &data).unwrap();
    let ex = extract_boundary(&sol.field, LevelRule::Midpoint, &sol.fixed_columns).unwrap();
    let v = integrate_value(&sol.field);
    let res = hjb_residual(&p, &disc(), &sol.field, &v, &ex.boundary, ex.displacement, &sol.fixed_columns).unwrap();
    Run { sol, ex, v, res }
}

fn coarse() -> &'static Run {
    static R: OnceLock<Run> = OnceLock::new();
    R.get_or_init(|| run(64, DELTA))
}

fn fine() -> &'static Run {
    static R: OnceLock<Run> = OnceLock::new();
    R.get_or_init(|| run(128, DELTA))
}

#[test]
fn residuals_within_calibrated_thresholds() {
    let (c, f) = (&coarse().res, &fine().res);
    for r in [c, f] {
        assert!(r.continuation_residual.value < 1e-9, "{:?}", r.continuation_residual);
        assert!(r.continuation_nodes > 0 && r.stopping_nodes > 0);
        assert!(r.stopping_residual.value.is_finite());
    }
    assert!(f.value_continuation_residual.value <= 3.0 * V_CONTINUATION_128);
    assert!(f.neumann_residual.value <= 3.0 * NEUMANN_128);
    assert!(f.value_continuation_residual.value < c.value_continuation_residual.value);
    assert!(f.neumann_residual.value < c.neumann_residual.value);
}

#[test]
fn gradient_constraint_holds_up_to_penalty_error() {
    for r in [coarse(), fine()] {
        assert!(r.res.gradient_min.value >= -10.0 * DELTA, "{:?}", r.res.gradient_min);
        assert!(r.sol.kappa <= 10.0);
    }
}

#[test]
fn vrr_jump_shrinks_under_refinement() {
    let p = ModelParams64::reference();
    let jump = |r: &Run| vrr_diagnostic(&p, &disc(), &r.sol.field, &r.ex.boundary).max_jump.value;
    let (c, f) = (jump(coarse()), jump(fine()));
    assert!(f < c, "{c} -> {f}");
    assert!(f <= 3.0 * VRR_JUMP_128);
}

#[test]
fn value_grows_at_unit_slope_above_the_boundary() {
    let r = fine();
    let g = &r.v.grid;
    let (rs, zs, h) = (g.r_nodes(), g.z_nodes(), g.h_z());
    let mut checked = 0;
    for (i, &rate) in rs.iter().enumerate() {
        if r.sol.fixed_columns.contains(&i) {
            continue;
        }
        let b = r.ex.boundary.eval(rate);
        let vb = r.v.interpolate(rate, b);
        for (j, &z) in zs.iter().enumerate() {
            if z < b + 2.0 * h {
                continue;
            }
            let gap = (r.v.at(i, j) - vb - (z - b)).abs();
            assert!(gap <= 10.0 * DELTA * (z - b), "r={rate} z={z}: {gap}");
            checked += 1;
        }
    }
    assert!(checked > 100);
}

#[test]
fn penalty_refinement_converges() {
    let fields: Vec<ScalarField64> = [0.04, 0.02, 0.01, 0.005].map(|d| run(64, d).sol.field).into();
    let change: Vec<f64> = fields
        .windows(2)
        .map(|w| w[0].values.iter().zip(&w[1].values).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max))
        .collect();
    assert!(change.iter().all(|c| c.is_finite() && *c < 0.1), "{change:?}");
    assert!(change.windows(2).all(|w| w[1] < w[0]), "{change:?}");
}
