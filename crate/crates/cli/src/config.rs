use std::path::Path;

use heatlab::mesh::{SpaceGrid, SpaceMask, TimeGrid, TimeSet};
use heatlab::potential::Potential;
use serde::{Deserialize, Serialize};

use crate::error::{CliError, CliResult};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "snake_case")]
pub enum Task {
    Solve,
    Hum,
    Regctl,
    Obscost,
    Carleman,
    Spectral,
    Sweep,
}

impl Task {
    pub fn name(self) -> &'static str {
        match self {
            Task::Solve => "solve",
            Task::Hum => "hum",
            Task::Regctl => "regctl",
            Task::Obscost => "obscost",
            Task::Carleman => "carleman",
            Task::Spectral => "spectral",
            Task::Sweep => "sweep",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Domain {
    pub a: f64,
    pub b: f64,
    pub n: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Time {
    #[serde(rename = "T")]
    pub t_final: f64,
    pub steps: usize,
}

/// Initial datum `y0`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum Initial {
    /// `amplitude · sin(kπ(x − a)/(b − a))`
    Sine {
        #[serde(default = "one_usize")]
        k: usize,
        #[serde(default = "one")]
        amplitude: f64,
    },
    /// Gaussian coefficients on the first `modes` sine modes, decaying as `1/k`.
    Random {
        #[serde(default = "default_modes")]
        modes: usize,
    },
    Samples {
        values: Vec<f64>,
    },
}

fn one() -> f64 {
    1.0
}
fn one_usize() -> usize {
    1
}
fn default_modes() -> usize {
    8
}

impl Default for Initial {
    fn default() -> Self {
        Initial::Sine {
            k: 1,
            amplitude: 1.0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct HumParams {
    pub eps: f64,
    pub cg_tol: f64,
    pub max_iter: usize,
}

impl Default for HumParams {
    fn default() -> Self {
        Self {
            eps: 1e-10,
            cg_tol: 1e-10,
            max_iter: 500,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RegctlParams {
    pub ramp_fraction: f64,
    pub alpha: f64,
    pub holder_radius: (usize, usize),
    pub preroll: Option<f64>,
}

impl Default for RegctlParams {
    fn default() -> Self {
        Self {
            ramp_fraction: 0.25,
            alpha: 0.5,
            holder_radius: (8, 8),
            preroll: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ObscostParams {
    /// Constant `C` in the bound formulas.
    pub c: f64,
    pub eps: Option<f64>,
    pub tol: f64,
    pub max_iter: usize,
    pub oversample: usize,
}

impl Default for ObscostParams {
    fn default() -> Self {
        Self {
            c: 1.0,
            eps: None,
            tol: 1e-10,
            max_iter: 200,
            oversample: 4,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct CarlemanConfig {
    /// Location of the weight maximum; must lie inside `omega`.
    pub center: f64,
    pub s: f64,
    pub lambda: f64,
    pub taus: Vec<f64>,
    pub corpus_size: usize,
    /// Fixed constant; calibrated on the corpus at `tau_ref` when absent.
    pub c1: Option<f64>,
    pub tau_ref: f64,
    pub safety: f64,
    /// Upper end of the threshold search; no search when absent.
    pub tau_hi: Option<f64>,
}

impl Default for CarlemanConfig {
    fn default() -> Self {
        Self {
            center: 0.5,
            s: 2.0,
            lambda: 2.0,
            taus: vec![1.0, 10.0, 100.0],
            corpus_size: 8,
            c1: None,
            tau_ref: 100.0,
            safety: 2.0,
            tau_hi: Some(1e4),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SpectralConfig {
    /// Multipliers `M` applied to the configured potential.
    pub amplitudes: Vec<f64>,
    /// Cutoffs above the potential floor; a dyadic ladder when absent.
    pub offsets: Option<Vec<f64>>,
    pub ladder_base: f64,
    pub rungs: usize,
}

impl Default for SpectralConfig {
    fn default() -> Self {
        Self {
            amplitudes: vec![0.0, 25.0, 100.0],
            offsets: None,
            ladder_base: 4.0 * std::f64::consts::PI.powi(2) * 7.1 * 7.1,
            rungs: 4,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FitConfig {
    pub x: String,
    pub y: String,
    pub candidates: Vec<f64>,
    /// Fit `ln y` instead of `y`.
    #[serde(default)]
    pub log_y: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SweepConfig {
    pub task: Task,
    /// Dotted path into the configuration, e.g. `potential.value`.
    pub axis: String,
    pub values: Vec<serde_json::Value>,
    #[serde(default)]
    pub fit: Option<FitConfig>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    #[serde(default)]
    pub task: Option<Task>,
    pub domain: Domain,
    pub time: Time,
    #[serde(default = "zero_potential")]
    pub potential: Potential<f64>,
    #[serde(default)]
    pub omega: Option<Vec<(f64, f64)>>,
    #[serde(rename = "E", default)]
    pub e: Option<Vec<(f64, f64)>>,
    #[serde(default)]
    pub initial: Initial,
    #[serde(default)]
    pub seed: u64,
    #[serde(default)]
    pub output: Option<String>,
    #[serde(default)]
    pub hum: HumParams,
    #[serde(default)]
    pub regctl: RegctlParams,
    #[serde(default)]
    pub obscost: ObscostParams,
    #[serde(default)]
    pub carleman: CarlemanConfig,
    #[serde(default)]
    pub spectral: SpectralConfig,
    #[serde(default)]
    pub sweep: Option<SweepConfig>,
}

fn zero_potential() -> Potential<f64> {
    Potential::constant(0.0)
}

impl ExperimentConfig {
    pub fn from_value(v: serde_json::Value) -> CliResult<Self> {
        let cfg: Self = serde_json::from_value(v).map_err(|e| CliError::Schema(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> CliResult<serde_json::Value> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| CliError::Io(format!("{}: {e}", path.display())))?;
        serde_json::from_str(&text)
            .map_err(|e| CliError::Schema(format!("{}: {e}", path.display())))
    }

    /// Checks every fragment that can be checked without running a solver.
    pub fn validate(&self) -> CliResult<()> {
        let grid = self.grid()?;
        let tg = self.time_grid()?;
        if let Some(om) = &self.omega {
            SpaceMask::new(&grid, om)?;
        }
        if let Some(e) = &self.e {
            TimeSet::new(&tg, e)?;
        }
        if let Initial::Samples { values } = &self.initial {
            if values.len() != grid.n {
                return Err(CliError::Schema(format!(
                    "initial samples: expected {} values, got {}",
                    grid.n,
                    values.len()
                )));
            }
        }
        Ok(())
    }

    pub fn grid(&self) -> CliResult<SpaceGrid<f64>> {
        Ok(SpaceGrid::new(self.domain.a, self.domain.b, self.domain.n)?)
    }

    pub fn time_grid(&self) -> CliResult<TimeGrid<f64>> {
        Ok(TimeGrid::new(self.time.t_final, self.time.steps)?)
    }

    pub fn omega_mask(&self, grid: &SpaceGrid<f64>) -> CliResult<SpaceMask<f64>> {
        let om = self
            .omega
            .as_ref()
            .ok_or_else(|| CliError::Schema("this task needs `omega`".into()))?;
        Ok(SpaceMask::new(grid, om)?)
    }

    pub fn time_set(&self, tg: &TimeGrid<f64>) -> CliResult<TimeSet<f64>> {
        match &self.e {
            Some(e) => Ok(TimeSet::new(tg, e)?),
            None => Ok(TimeSet::full(tg)),
        }
    }
}

/// Replaces the value at a dotted path; every segment but the last must
/// already exist as an object key.
pub fn set_path(
    root: &mut serde_json::Value,
    path: &str,
    value: serde_json::Value,
) -> CliResult<()> {
    let segments: Vec<&str> = path.split('.').collect();
    if segments.iter().any(|s| s.is_empty()) {
        return Err(CliError::Schema(format!("malformed axis path `{path}`")));
    }
    let (last, parents) = segments
        .split_last()
        .expect("split yields at least one segment");
    let mut node = root;
    for seg in parents {
        node = node
            .get_mut(*seg)
            .ok_or_else(|| CliError::Schema(format!("axis path `{path}`: no key `{seg}`")))?;
    }
    let obj = node
        .as_object_mut()
        .ok_or_else(|| CliError::Schema(format!("axis path `{path}` does not end in an object")))?;
    obj.insert(last.to_string(), value);
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use serde_json::json;

    fn base() -> serde_json::Value {
        json!({"domain": {"a": 0.0, "b": 1.0, "n": 15}, "time": {"T": 0.5, "steps": 16}})
    }

    #[test]
    fn minimal_config_fills_defaults() {
        let cfg = ExperimentConfig::from_value(base()).unwrap();
        assert_eq!(cfg.potential, Potential::constant(0.0));
        assert_eq!(cfg.initial, Initial::default());
        assert_eq!(cfg.hum, HumParams::default());
    }

    #[test]
    fn unknown_keys_are_rejected() {
        let mut v = base();
        v["domian"] = json!(1);
        assert!(matches!(
            ExperimentConfig::from_value(v),
            Err(CliError::Schema(_))
        ));
        let mut v = base();
        v["hum"] = json!({"eps": 1e-8, "tolerance": 1});
        assert!(matches!(
            ExperimentConfig::from_value(v),
            Err(CliError::Schema(_))
        ));
    }

    #[test]
    fn overlapping_omega_is_a_schema_error() {
        let mut v = base();
        v["omega"] = json!([[0.1, 0.5], [0.4, 0.8]]);
        assert!(matches!(
            ExperimentConfig::from_value(v),
            Err(CliError::Schema(_))
        ));
    }

    #[test]
    fn set_path_walks_objects() {
        let mut v = json!({"potential": {"kind": "constant", "value": 0.0}});
        set_path(&mut v, "potential.value", json!(10.0)).unwrap();
        assert_eq!(v["potential"]["value"], json!(10.0));
        assert!(set_path(&mut v, "potential.missing.x", json!(1)).is_err());
        assert!(set_path(&mut v, "potential..value", json!(1)).is_err());
    }

    #[test]
    fn potential_fragment_parses() {
        let mut v = base();
        v["potential"] = json!({"kind": "separable", "V0": {"kind": "sin", "amplitude": 4.0, "frequency": 2}, "g": {"kind": "poly1p", "beta": 1.0}});
        ExperimentConfig::from_value(v).unwrap();
    }
}
