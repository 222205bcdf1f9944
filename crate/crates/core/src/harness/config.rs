use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::exec::Execution;
use crate::fields::{BenchmarkField, NeuralField, StaticField, VectorFieldSpec};
use crate::flow::{uniform_grid, IntegratorConfig, Method};
use crate::measures::{MeasureSpec, Region};
use crate::synthesis::{FitOptions, SynthesisParams};

/// What the synthesized controls should reproduce.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case", deny_unknown_fields)]
pub enum TargetSpec {
    /// Analytic reference field, e.g. `{"name": "rotation", "params": {"omega": 1}}`.
    Benchmark { field: BenchmarkField },
    /// A superposition given explicitly, with the region its bounds are checked on.
    Neural { field: NeuralField, region: Region },
    Zero { dim: usize },
    /// Endpoint target measure sampled independently of the initial one.
    Measure {
        measure: MeasureSpec,
        bandwidth: f64,
        /// Sampling seed; defaults to the experiment seed + 1.
        #[serde(default)]
        seed: Option<u64>,
    },
    /// Endpoint target equal to the initial ensemble shifted by `shift`.
    TranslatedInitial { shift: Vec<f64>, bandwidth: f64 },
}

impl TargetSpec {
    pub fn is_endpoint(&self) -> bool {
        matches!(self, TargetSpec::Measure { .. } | TargetSpec::TranslatedInitial { .. })
    }

    /// Field for trajectory experiments; `None` for endpoint targets.
    pub fn field_spec(&self, horizon: f64) -> Option<Result<VectorFieldSpec>> {
        match self {
            TargetSpec::Benchmark { field } => Some(VectorFieldSpec::benchmark(field.clone(), horizon)),
            TargetSpec::Neural { field, region } => {
                Some(VectorFieldSpec::neural(field.clone(), horizon, region.clone()))
            }
            TargetSpec::Zero { dim } => Some(VectorFieldSpec::zero(*dim, horizon)),
            _ => None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SweepSpec {
    pub n_avg: Vec<usize>,
    pub m: Vec<usize>,
    pub n_osc: Vec<usize>,
}

impl SweepSpec {
    /// Sorted, deduplicated (n_avg, m, n_osc) grid.
    pub fn points(&self) -> Vec<(usize, usize, usize)> {
        let mut pts = Vec::new();
        for &a in &self.n_avg {
            for &m in &self.m {
                for &n in &self.n_osc {
                    pts.push((a, m, n));
                }
            }
        }
        pts.sort_unstable();
        pts.dedup();
        pts
    }
}

fn default_snapshots() -> usize {
    51
}

fn default_method() -> Method {
    Method::Rk4
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct IntegratorSettings {
    #[serde(default = "default_method")]
    pub method: Method,
    #[serde(default)]
    pub base_step: Option<f64>,
    /// Evenly spaced snapshot count on [0, T], both ends included.
    #[serde(default = "default_snapshots")]
    pub snapshots: usize,
}

impl Default for IntegratorSettings {
    fn default() -> Self {
        Self {
            method: default_method(),
            base_step: None,
            snapshots: default_snapshots(),
        }
    }
}

fn default_margin() -> f64 {
    1.5
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub seed: u64,
    pub n_particles: usize,
    pub initial: MeasureSpec,
    pub target: TargetSpec,
    pub horizon: f64,
    pub sweep: SweepSpec,
    pub fit_tolerance: f64,
    #[serde(default)]
    pub fit: FitOptions,
    #[serde(default = "default_margin")]
    pub region_margin: f64,
    #[serde(default)]
    pub integrator: IntegratorSettings,
    /// Declared accuracy goal; rows above it are reported but not failed.
    #[serde(default)]
    pub epsilon: Option<f64>,
    #[serde(default)]
    pub output_dir: Option<PathBuf>,
}

fn config_err(msg: impl Into<String>) -> Error {
    Error::Config(msg.into())
}

impl ExperimentConfig {
    pub fn from_json(text: &str) -> Result<Self> {
        let cfg: Self = serde_json::from_str(text).map_err(|e| config_err(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| config_err(format!("{}: {e}", path.display())))?;
        Self::from_json(&text).map_err(|e| match e {
            Error::Config(m) => config_err(format!("{}: {m}", path.display())),
            other => other,
        })
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    /// Every check that can fail before any sampling or integration.
    pub fn validate(&self) -> Result<()> {
        let v = |ok: bool, msg: &str| if ok { Ok(()) } else { Err(config_err(msg)) };
        v(self.n_particles >= 1, "n_particles must be >= 1")?;
        v(self.horizon.is_finite() && self.horizon > 0.0, "horizon must be positive")?;
        v(
            !self.sweep.n_avg.is_empty() && !self.sweep.m.is_empty() && !self.sweep.n_osc.is_empty(),
            "sweep lists must be nonempty",
        )?;
        let all = self.sweep.n_avg.iter().chain(&self.sweep.m).chain(&self.sweep.n_osc);
        v(all.into_iter().all(|&c| c >= 1), "sweep counts must be >= 1")?;
        v(self.integrator.snapshots >= 2, "integrator.snapshots must be >= 2")?;
        if let Some(e) = self.epsilon {
            v(e.is_finite() && e > 0.0, "epsilon must be positive")?;
        }
        self.initial.validate().map_err(|e| config_err(format!("initial: {e}")))?;
        let dim = self.initial.dim();
        let target_dim = match &self.target {
            TargetSpec::Benchmark { field } => {
                field.validate().map_err(|e| config_err(format!("target: {e}")))?;
                field.dim()
            }
            TargetSpec::Neural { field, region } => {
                region.validate().map_err(|e| config_err(format!("target region: {e}")))?;
                field.dim()
            }
            TargetSpec::Zero { dim } => *dim,
            TargetSpec::Measure { measure, bandwidth, .. } => {
                measure.validate().map_err(|e| config_err(format!("target: {e}")))?;
                v(*bandwidth > 0.0 && bandwidth.is_finite(), "bandwidth must be positive")?;
                v(
                    measure.is_absolutely_continuous() && self.initial.is_absolutely_continuous(),
                    "endpoint experiments need measures sampled from continuous densities",
                )?;
                measure.dim()
            }
            TargetSpec::TranslatedInitial { shift, bandwidth } => {
                v(*bandwidth > 0.0 && bandwidth.is_finite(), "bandwidth must be positive")?;
                v(shift.iter().all(|s| s.is_finite()), "shift must be finite")?;
                v(
                    self.initial.is_absolutely_continuous(),
                    "endpoint experiments need measures sampled from continuous densities",
                )?;
                shift.len()
            }
        };
        v(
            target_dim == dim,
            &format!("target dimension {target_dim} differs from initial dimension {dim}"),
        )?;
        for &(a, m, n) in &self.sweep.points() {
            self.synthesis_params(a, m, n, Execution::Sequential)
                .validate()
                .map_err(|e| config_err(e.to_string()))?;
        }
        self.integrator_config(Execution::Sequential)
            .validate()
            .map_err(|e| config_err(e.to_string()))?;
        Ok(())
    }

    pub fn synthesis_params(&self, n_avg: usize, m: usize, n_osc: usize, execution: Execution) -> SynthesisParams {
        SynthesisParams {
            n_avg,
            m_width: m,
            fit_tolerance: self.fit_tolerance,
            n_osc,
            region_margin: self.region_margin,
            seed: self.seed,
            fit: self.fit.clone(),
            execution,
        }
    }

    pub fn integrator_config(&self, execution: Execution) -> IntegratorConfig {
        IntegratorConfig {
            method: self.integrator.method,
            base_step: self.integrator.base_step,
            snap_times: uniform_grid(self.horizon, self.integrator.snapshots),
            execution,
        }
    }

    /// Seed used for the independently sampled endpoint target.
    pub fn target_seed(&self) -> u64 {
        match &self.target {
            TargetSpec::Measure { seed: Some(s), .. } => *s,
            _ => self.seed.wrapping_add(1),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    const ROTATION: &str = r#"{
        "seed": 7,
        "n_particles": 20,
        "initial": {"kind": "uniform-ball", "center": [0, 0], "radius": 1},
        "target": {"kind": "benchmark", "field": {"name": "rotation", "params": {"omega": 1}}},
        "horizon": 1,
        "sweep": {"n_avg": [1], "m": [8], "n_osc": [4, 1, 4]},
        "fit_tolerance": 0.1
    }"#;

    #[test]
    fn parses_with_defaults() {
        let cfg = ExperimentConfig::from_json(ROTATION).unwrap();
        assert_eq!(cfg.region_margin, 1.5);
        assert_eq!(cfg.integrator.snapshots, 51);
        assert_eq!(cfg.sweep.points(), vec![(1, 8, 1), (1, 8, 4)]);
        let back = ExperimentConfig::from_json(&cfg.to_json().unwrap()).unwrap();
        assert_eq!(back, cfg);
    }

    #[test]
    fn unknown_keys_are_rejected() {
        let typo = ROTATION.replace("\"n_osc\"", "\"nosc\"");
        assert!(matches!(ExperimentConfig::from_json(&typo), Err(Error::Config(_))));
        let extra = ROTATION.replace("\"seed\": 7,", "\"seed\": 7, \"seeds\": 1,");
        assert!(matches!(ExperimentConfig::from_json(&extra), Err(Error::Config(_))));
    }

    #[test]
    fn invalid_values_are_config_errors() {
        for (from, to) in [
            ("\"n_osc\": [4, 1, 4]", "\"n_osc\": []"),
            ("\"n_osc\": [4, 1, 4]", "\"n_osc\": [0]"),
            ("\"fit_tolerance\": 0.1", "\"fit_tolerance\": -1"),
            ("\"radius\": 1}", "\"radius\": -1}"),
            ("\"seed\": 7,", ""),
        ] {
            let bad = ROTATION.replace(from, to);
            assert!(matches!(ExperimentConfig::from_json(&bad), Err(Error::Config(_))), "{to}");
        }
    }

    #[test]
    fn endpoint_targets_need_continuous_measures() {
        let cfg = ROTATION
            .replace(
                r#"{"kind": "uniform-ball", "center": [0, 0], "radius": 1}"#,
                r#"{"kind": "explicit-points", "points": [[0, 0]]}"#,
            )
            .replace(
                r#"{"kind": "benchmark", "field": {"name": "rotation", "params": {"omega": 1}}}"#,
                r#"{"kind": "translated-initial", "shift": [1, 0], "bandwidth": 0.5}"#,
            )
            .replace("\"n_particles\": 20", "\"n_particles\": 1");
        assert!(matches!(ExperimentConfig::from_json(&cfg), Err(Error::Config(_))));
    }
}
