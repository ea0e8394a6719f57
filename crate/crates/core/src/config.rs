//! JSON run configuration. Every field has a default matching the
//! standard 64x64 scene, so `{}` is a valid configuration.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::metrics::Connectivity;
use crate::propagation::{max_cell_rss_dbm, BeamSet, RadioConfig, ScalingSpec};
use crate::reconstruct::IdwParams;
use crate::sampling::SensorPlacement;
use crate::scenario::{GridSpec, ScenarioClass};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct LayoutConfig {
    pub min_side_m: f64,
    pub max_side_m: f64,
}

impl Default for LayoutConfig {
    fn default() -> Self {
        LayoutConfig {
            min_side_m: 8.0,
            max_side_m: 25.0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct BeamConfig {
    pub n_beams: usize,
    pub angular_sep_deg: f64,
    pub beamwidth_deg: f64,
}

impl Default for BeamConfig {
    fn default() -> Self {
        BeamConfig {
            n_beams: 18,
            angular_sep_deg: 20.0,
            beamwidth_deg: 20.0,
        }
    }
}

impl BeamConfig {
    pub fn beam_set(&self) -> Result<BeamSet> {
        BeamSet::from_degrees(self.n_beams, self.angular_sep_deg, self.beamwidth_deg)
            .map_err(|e| Error::Config(e.to_string()))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ScalingConfig {
    pub psi_min: f64,
    pub psi_max: f64,
    /// Defaults to the noise floor.
    pub db_floor: Option<f64>,
    /// Defaults to the strongest power any cell center can receive.
    pub db_ceil: Option<f64>,
}

impl Default for ScalingConfig {
    fn default() -> Self {
        ScalingConfig {
            psi_min: 0.05,
            psi_max: 0.9,
            db_floor: None,
            db_ceil: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SamplingConfig {
    pub rate: f64,
    pub placement: SensorPlacement,
}

impl Default for SamplingConfig {
    fn default() -> Self {
        SamplingConfig {
            rate: 0.5,
            placement: SensorPlacement::AnyCell,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ClassCount {
    pub class: ScenarioClass,
    pub count: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct DatasetConfig {
    /// Scenario classes in generation order.
    pub classes: Vec<ClassCount>,
}

impl Default for DatasetConfig {
    fn default() -> Self {
        DatasetConfig {
            classes: ScenarioClass::all()
                .into_iter()
                .map(|class| ClassCount {
                    class,
                    count: class.default_size(),
                })
                .collect(),
        }
    }
}

impl DatasetConfig {
    pub fn n_scenarios(&self) -> usize {
        self.classes.iter().map(|c| c.count).sum()
    }

    /// A single class with `count` scenes.
    pub fn only(class: ScenarioClass, count: usize) -> Self {
        DatasetConfig {
            classes: vec![ClassCount { class, count }],
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct MetricsConfig {
    pub connectivity: Connectivity,
    pub clamp_eps: f64,
}

impl Default for MetricsConfig {
    fn default() -> Self {
        MetricsConfig {
            connectivity: Connectivity::Eight,
            clamp_eps: 1e-7,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ExperimentConfig {
    pub epsilons: Vec<f64>,
    /// Hoeffding curve is emitted for `1..=max_votes`; exact and simulated
    /// errors only for odd counts.
    pub max_votes: usize,
    pub mc_trials: usize,
    pub direction_counts: Vec<usize>,
    /// Scenes used for the direction-count curve.
    pub direction_scenes: usize,
    /// Power above the noise floor still treated as "no signal".
    pub noise_tolerance_mw: f64,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        ExperimentConfig {
            epsilons: vec![0.1, 0.2, 0.3, 0.4, 0.45],
            max_votes: 50,
            mc_trials: 100_000,
            direction_counts: (1..=9).map(|k| 2 * k).collect(),
            direction_scenes: 100,
            noise_tolerance_mw: 0.0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Config {
    pub seed: u64,
    pub grid: GridSpec,
    pub layout: LayoutConfig,
    pub beams: BeamConfig,
    pub radio: RadioConfig,
    pub scaling: ScalingConfig,
    pub sampling: SamplingConfig,
    pub reconstruction: IdwParams,
    pub dataset: DatasetConfig,
    pub metrics: MetricsConfig,
    pub experiment: ExperimentConfig,
    pub output_dir: PathBuf,
}

impl Default for Config {
    fn default() -> Self {
        Config {
            seed: 0,
            grid: GridSpec::standard(),
            layout: LayoutConfig::default(),
            beams: BeamConfig::default(),
            radio: RadioConfig::default(),
            scaling: ScalingConfig::default(),
            sampling: SamplingConfig::default(),
            reconstruction: IdwParams::default(),
            dataset: DatasetConfig::default(),
            metrics: MetricsConfig::default(),
            experiment: ExperimentConfig::default(),
            output_dir: PathBuf::from("out"),
        }
    }
}

impl Config {
    pub fn from_json(text: &str) -> Result<Self> {
        let cfg: Config = serde_json::from_str(text).map_err(|e| Error::Config(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| Error::Config(format!("{}: {e}", path.display())))?;
        Config::from_json(&text)
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    /// Checks every section; all failures are [`Error::Config`].
    pub fn validate(&self) -> Result<()> {
        let cfg_err = |e: Error| match e {
            Error::Config(_) => e,
            other => Error::Config(other.to_string()),
        };
        self.grid.validate().map_err(cfg_err)?;
        let beams = self.beams.beam_set()?;
        self.radio.validate(&beams).map_err(cfg_err)?;
        self.scaling_spec()?;
        let l = &self.layout;
        let half = self.grid.length_m.min(self.grid.width_m) / 2.0;
        if !(l.min_side_m > 0.0 && l.min_side_m <= l.max_side_m && l.max_side_m <= half) {
            return Err(Error::Config(format!(
                "obstacle sides need 0 < min <= max <= {half}, got ({}, {})",
                l.min_side_m, l.max_side_m
            )));
        }
        let rate = self.sampling.rate;
        if !(rate > 0.0 && rate < 1.0) {
            return Err(Error::Config(format!("sampling rate {rate} must lie in (0, 1)")));
        }
        if ((rate * self.grid.n_cells() as f64).floor() as usize) == 0 {
            return Err(Error::Config(format!("sampling rate {rate} places no sensors")));
        }
        self.reconstruction.validate()?;
        if !(self.metrics.clamp_eps > 0.0 && self.metrics.clamp_eps < 0.5) {
            return Err(Error::Config("clamp_eps must lie in (0, 0.5)".into()));
        }
        let x = &self.experiment;
        if let Some(e) = x.epsilons.iter().find(|e| !(**e >= 0.0 && **e < 0.5)) {
            return Err(Error::Config(format!("epsilon {e} must lie in [0, 0.5)")));
        }
        if x.max_votes == 0 || x.mc_trials == 0 {
            return Err(Error::Config("max_votes and mc_trials must be positive".into()));
        }
        if let Some(n) = x.direction_counts.iter().find(|&&n| n == 0 || n > self.beams.n_beams) {
            return Err(Error::Config(format!(
                "direction count {n} outside [1, {}]",
                self.beams.n_beams
            )));
        }
        if !(x.noise_tolerance_mw >= 0.0) {
            return Err(Error::Config("noise tolerance must be >= 0".into()));
        }
        Ok(())
    }

    pub fn beam_set(&self) -> Result<BeamSet> {
        self.beams.beam_set()
    }

    /// Scaling with the optional bounds resolved against the radio config.
    pub fn scaling_spec(&self) -> Result<ScalingSpec> {
        let floor = self.scaling.db_floor.unwrap_or(self.radio.noise_floor_dbm);
        let ceil = self
            .scaling
            .db_ceil
            .unwrap_or_else(|| max_cell_rss_dbm(&self.grid, &self.radio));
        ScalingSpec::new(self.scaling.psi_min, self.scaling.psi_max, floor, ceil)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn empty_document_gives_defaults() {
        let cfg = Config::from_json("{}").unwrap();
        assert_eq!(cfg, Config::default());
        assert_eq!(cfg.dataset.n_scenarios(), 301);
        assert_eq!(cfg.grid.n_rows, 64);
        assert_eq!(cfg.beams.n_beams, 18);
    }

    #[test]
    fn json_round_trip() {
        let mut cfg = Config::default();
        cfg.seed = 77;
        cfg.sampling.placement = SensorPlacement::FreeCellsOnly;
        cfg.dataset = DatasetConfig::only(ScenarioClass::S2, 3);
        let back = Config::from_json(&cfg.to_json().unwrap()).unwrap();
        assert_eq!(back, cfg);
    }

    #[test]
    fn bad_values_are_config_errors() {
        for doc in [
            r#"{"sampling": {"rate": 1.0}}"#,
            r#"{"sampling": {"rate": 0.0}}"#,
            r#"{"beams": {"n_beams": 0}}"#,
            r#"{"layout": {"min_side_m": 30, "max_side_m": 20}}"#,
            r#"{"scaling": {"psi_max": 1.0}}"#,
            r#"{"experiment": {"epsilons": [0.5]}}"#,
            r#"{"experiment": {"direction_counts": [20]}}"#,
            r#"{"no_such_key": 1}"#,
        ] {
            assert!(matches!(Config::from_json(doc), Err(Error::Config(_))), "{doc}");
        }
    }

    #[test]
    fn scaling_ceiling_is_resolved() {
        let cfg = Config::default();
        let s = cfg.scaling_spec().unwrap();
        assert_eq!(s.db_floor, -90.0);
        assert!(s.db_ceil > -60.0 && s.db_ceil < -50.0, "{}", s.db_ceil);
    }
}
