//! JSON run configuration shared by the command-line driver and the tests.
//!
//! ```json
//! {
//!   "model": {"mu": 1, "sigma": 1, "alpha": 0, "k": 0.5, "theta": 0.15, "gamma": 0.3,
//!             "discount": {"kind": "linear_shift", "r0": 0.05}},
//!   "grid": {"n_r": 256, "n_z": 256},
//!   "solver": {"delta": 0.01},
//!   "mc": {"n_paths": 20000, "dt": 0.001},
//!   "outputs": "out"
//! }
//! ```
//!
//! Every section except `model` is optional and every field inside the
//! optional sections has a default. Unknown keys are rejected.

use serde::{Deserialize, Serialize};
use serde_json::Value;

use crate::fbsolve::{LevelRule, SolverConfig};
use crate::grid::Grid2D;
use crate::model::{validate, DiscountKind, DiscountSpec, ModelParams};
use crate::simulate::PathConfig;
use crate::{Error, Real, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ModelDoc<T> {
    pub mu: T,
    pub sigma: T,
    pub alpha: T,
    pub k: T,
    pub theta: T,
    pub gamma: T,
    pub discount: DiscountKind<T>,
}

impl<T: Real> ModelDoc<T> {
    pub fn params(&self) -> ModelParams<T> {
        ModelParams { mu: self.mu, sigma: self.sigma, alpha: self.alpha, k: self.k, theta: self.theta, gamma: self.gamma }
    }

    pub fn discount(&self) -> DiscountSpec<T> {
        match &self.discount {
            DiscountKind::Constant { rho0 } => DiscountSpec::constant(*rho0),
            DiscountKind::LinearShift { r0 } => DiscountSpec::linear_shift(*r0),
            DiscountKind::SqrtShift { r0 } => DiscountSpec::sqrt_shift(*r0),
            DiscountKind::Tabulated { samples } => DiscountSpec::tabulated(samples.clone()),
        }
    }
}

/// Uniform grid on `[r_min, r_max] × [α, z_max]`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct GridDoc<T> {
    pub r_min: T,
    pub r_max: T,
    pub n_r: usize,
    pub z_max: T,
    pub n_z: usize,
}

impl<T: Real> Default for GridDoc<T> {
    fn default() -> Self {
        Self { r_min: T::lit(0.005), r_max: T::lit(1.1), n_r: 256, z_max: T::lit(2.5), n_z: 256 }
    }
}

impl<T: Real> GridDoc<T> {
    pub fn build(&self, alpha: T) -> Result<Grid2D<T>> {
        Grid2D::uniform(self.r_min, self.r_max, self.n_r, alpha, self.z_max, self.n_z)
    }
}

/// Starting point for `simulate` and `trace`, and the sample points and
/// barrier shifts used by `verify`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ProbeDoc<T> {
    pub r0: T,
    pub z0: T,
    /// Path recorded by `trace`.
    pub trace_path: u64,
    pub rates: Vec<T>,
    pub levels: Vec<T>,
    pub shifts: Vec<T>,
    /// Smallest `mc.n_paths` that `verify` accepts.
    pub min_paths: usize,
}

impl<T: Real> Default for ProbeDoc<T> {
    fn default() -> Self {
        Self {
            r0: T::lit(0.15),
            z0: T::lit(1.0),
            trace_path: 0,
            rates: vec![T::lit(0.05), T::lit(0.15), T::lit(0.5)],
            levels: vec![T::lit(0.2), T::lit(0.5), T::lit(1.0)],
            shifts: vec![T::lit(-0.3), T::lit(-0.1), T::lit(0.1), T::lit(0.3)],
            min_paths: 1000,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, bound(deserialize = "T: Real + Deserialize<'de>"))]
pub struct RunConfig<T> {
    pub model: ModelDoc<T>,
    #[serde(default)]
    pub grid: GridDoc<T>,
    #[serde(default)]
    pub solver: SolverConfig<T>,
    /// Contact-set threshold for boundary extraction.
    #[serde(default)]
    pub level: LevelRule<T>,
    #[serde(default)]
    pub mc: PathConfig<T>,
    #[serde(default)]
    pub probe: ProbeDoc<T>,
    #[serde(default = "default_outputs")]
    pub outputs: String,
}

fn default_outputs() -> String {
    "out".into()
}

impl<T: Real + for<'de> Deserialize<'de>> RunConfig<T> {
    /// Parses a configuration after applying `key.path=value` overrides.
    pub fn from_json_with_overrides(text: &str, overrides: &[String]) -> Result<Self> {
        let mut doc: Value = serde_json::from_str(text).map_err(|e| Error::Config(e.to_string()))?;
        for o in overrides {
            apply_override(&mut doc, o)?;
        }
        serde_json::from_value(doc).map_err(|e| Error::Config(e.to_string()))
    }

    pub fn from_json(text: &str) -> Result<Self> {
        Self::from_json_with_overrides(text, &[])
    }
}

impl<T: Real> RunConfig<T> {
    /// Runs every section's validator.
    pub fn validate(&self) -> Result<()> {
        let params = self.model.params();
        validate(&params, &self.model.discount()).into_result()?;
        if !(params.mu > T::zero()) {
            return Err(Error::Config(format!(
                "mu = {} ≤ 0: liquidation is optimal and there is nothing to solve",
                params.mu
            )));
        }
        self.grid.build(params.alpha)?;
        self.solver.validate()?;
        if let LevelRule::Offset(t) = self.level {
            if !(t >= T::zero()) {
                return Err(Error::Config(format!("level offset must be nonnegative, got {t}")));
            }
        }
        self.mc.validate()?;
        if !(self.probe.z0 >= params.alpha) || !(self.probe.r0 >= T::zero()) {
            return Err(Error::Config("probe point must satisfy z0 ≥ alpha and r0 ≥ 0".into()));
        }
        if self.outputs.is_empty() {
            return Err(Error::Config("outputs must name a directory".into()));
        }
        Ok(())
    }
}

/// Sets the value at a dot-separated path, e.g. `solver.delta=0.005`. The
/// right-hand side is read as JSON when it parses and as a string otherwise;
/// missing intermediate objects are created.
pub fn apply_override(doc: &mut Value, assignment: &str) -> Result<()> {
    let (path, raw) = assignment
        .split_once('=')
        .ok_or_else(|| Error::Config(format!("override `{assignment}` is not of the form key.path=value")))?;
    let value = serde_json::from_str(raw).unwrap_or_else(|_| Value::String(raw.to_string()));
    let keys: Vec<&str> = path.split('.').collect();
    if keys.iter().any(|k| k.is_empty()) {
        return Err(Error::Config(format!("override path `{path}` has an empty segment")));
    }
    let mut node = doc;
    for key in &keys[..keys.len() - 1] {
        let obj = node
            .as_object_mut()
            .ok_or_else(|| Error::Config(format!("override path `{path}` crosses a non-object")))?;
        node = obj.entry(key.to_string()).or_insert_with(|| Value::Object(Default::default()));
    }
    let obj = node
        .as_object_mut()
        .ok_or_else(|| Error::Config(format!("override path `{path}` crosses a non-object")))?;
    obj.insert(keys[keys.len() - 1].to_string(), value);
    Ok(())
}
