//! `cirdiv verify`: invariants of the stored grids and boundary, then Monte
//! Carlo checks against closed forms and the stored values.

use std::fs::File;
use std::io::BufReader;
use std::path::Path;

use anyhow::Context;
use serde::Serialize;
use serde_json::json;

use cirdiv::fbsolve::integrate_value;
use cirdiv::fbsolve::invariants::{boundary_checks, field_checks, InvariantCheck, Tolerances};
use cirdiv::simulate::{laplace_monte_carlo, run_stopping_value, suboptimality_sweep};
use cirdiv::{Error, ScalarField};

use crate::{manifest, read_boundary, write_json, Failure, Loaded, Outcome};

const LAPLACE_BETAS: [f64; 2] = [0.05, 1.0];
const LAPLACE_TIMES: [f64; 3] = [0.5, 1.0, 5.0];

#[derive(Debug, Serialize)]
struct Row {
    group: &'static str,
    name: String,
    passed: bool,
    value: f64,
    limit: f64,
    /// Distance to failure; negative when failed.
    margin: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    location: Option<(f64, f64)>,
}

impl Row {
    fn invariant(group: &'static str, c: InvariantCheck) -> Self {
        Row { group, name: c.name, passed: c.passed, value: c.value, limit: c.limit, margin: c.margin, location: c.location }
    }

    /// Passes when `|mc − reference| ≤ k·SE + slack`.
    fn agreement(name: String, mc: f64, se: f64, reference: f64, k: f64, slack: f64) -> Self {
        let value = (mc - reference).abs();
        let limit = k * se + slack;
        Row { group: "monte_carlo", name, passed: value <= limit, value, limit, margin: limit - value, location: None }
    }
}

fn read_field(path: &Path) -> Outcome<ScalarField<f64>> {
    let f = File::open(path).with_context(|| format!("cannot open {}; run `cirdiv solve` first", path.display()))?;
    Ok(ScalarField::read_csv(BufReader::new(f))?)
}

pub(crate) fn cmd_verify(loaded: &Loaded, boundary_path: &Path) -> Outcome<()> {
    let cfg = &loaded.cfg;
    if cfg.mc.n_paths < cfg.probe.min_paths {
        return Err(Failure::Input(anyhow::anyhow!(
            "mc.n_paths = {} is below probe.min_paths = {}; standard errors would be too large to judge",
            cfg.mc.n_paths,
            cfg.probe.min_paths
        )));
    }
    let (params, disc) = (cfg.model.params(), cfg.model.discount());
    let dir = loaded.out_dir();
    let u = read_field(&dir.join("ugrid.csv"))?;
    let boundary = read_boundary(boundary_path)?;
    let v = integrate_value(&u);
    let numerical = |e: Error| Failure::Numerical(e.into());

    let mut rows = Vec::new();
    let fixed = cfg.solver.fixed_columns(u.grid.n_r());
    for c in field_checks(&params, &disc, &u, cfg.solver.delta, &Tolerances::default(), &fixed)? {
        rows.push(Row::invariant("field", c));
    }
    for c in boundary_checks(&params, &disc, &boundary, u.grid.h_z())? {
        rows.push(Row::invariant("boundary", c));
    }

    for &r in &cfg.probe.rates {
        let est = laplace_monte_carlo(&params, &LAPLACE_BETAS, &LAPLACE_TIMES, r, &cfg.mc).map_err(numerical)?;
        for e in est {
            let name = format!("laplace(beta={}, t={}, r={})", e.beta, e.t, e.r);
            rows.push(Row::agreement(name, e.estimate.mean, e.estimate.std_error, e.exact, 3.0, 0.0));
        }
    }

    let z_cap = u.grid.z_max();
    for &r in &cfg.probe.rates {
        for &z in &cfg.probe.levels {
            let est = run_stopping_value(&params, &disc, z, r, &boundary, &cfg.mc).map_err(numerical)?;
            rows.push(Row::agreement(format!("U(r={r}, z={z})"), est.mean, est.std_error, u.interpolate(r, z), 3.0, 0.01));
            let sweep = suboptimality_sweep(&params, &disc, z, r, &boundary, &cfg.probe.shifts, z_cap, &cfg.mc)
                .map_err(numerical)?;
            let b = &sweep.base;
            rows.push(Row::agreement(format!("V(r={r}, z={z})"), b.mean, b.std_error, v.interpolate(r, z), 3.0, 0.02));
            for row in &sweep.rows {
                let d = &row.difference;
                let limit = 3.0 * d.std_error;
                rows.push(Row {
                    group: "sweep",
                    name: format!("shift {:+} at (r={r}, z={z})", row.shift),
                    passed: d.mean <= limit,
                    value: d.mean,
                    limit,
                    margin: limit - d.mean,
                    location: Some((r, z)),
                });
            }
        }
    }

    let failed: Vec<&Row> = rows.iter().filter(|r| !r.passed).collect();
    let passed = failed.is_empty();
    let report = json!({
        "passed": passed,
        "n_checks": rows.len(),
        "n_failed": failed.len(),
        "checks": rows,
        "manifest": manifest(loaded, "verify", &[boundary_path])?,
    });
    write_json(&dir.join("verify.json"), &report)?;
    for r in &failed {
        log::warn!("{} {}: value {:.4e}, limit {:.4e}", r.group, r.name, r.value, r.limit);
    }
    log::info!("{} of {} checks passed", rows.len() - failed.len(), rows.len());
    if passed {
        Ok(())
    } else {
        let names: Vec<&str> = failed.iter().map(|r| r.name.as_str()).collect();
        Err(Failure::Verification(names.join(", ")))
    }
}
