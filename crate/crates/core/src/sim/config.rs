//! Harness configuration, read from TOML.
//!
//! Every section is optional; omitted keys take their defaults. Unknown keys
//! are rejected with the path of the offending entry.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use super::codec::CodecConfig;
use super::detect::DetectorConfig;
use super::render::RenderConfig;
use super::scenario::ScenarioConfig;
use crate::error::{Error, Result};
use crate::featurizer::BevSpec;
use crate::fusion::IfamConfig;
use crate::pointcloud::PhdConfig;
use crate::temporal::{CosineGranularity, Stage2Warp, XiMode};

/// Where the stage-1 and stage-2 motion fields come from.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum MotionMode {
    /// Ground-truth flow from scene kinematics: identity at stage 1 and the
    /// per-frame object displacement at stage 2.
    #[default]
    Ideal,
    /// The motion estimators.
    Estimated,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PtamConfig {
    pub enabled: bool,
    pub xi: XiMode,
    pub motion: MotionMode,
    pub stage2_warp: Stage2Warp,
    /// Hidden width of the motion estimators and ξ predictors.
    pub hidden: usize,
    /// Cosine window size `l`.
    pub window: usize,
    pub granularity: CosineGranularity,
    /// Cells added around the swept object region of ideal flow.
    pub ideal_dilation: usize,
}

impl Default for PtamConfig {
    fn default() -> Self {
        Self {
            enabled: true,
            xi: XiMode::Oracle,
            motion: MotionMode::Ideal,
            stage2_warp: Stage2Warp::ScaledStage2,
            hidden: 16,
            window: 16,
            granularity: CosineGranularity::Window,
            ideal_dilation: 2,
        }
    }
}

/// Hand-set scorer applied to BEV features to get foreground maps.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ForegroundConfig {
    /// BEV channel scored; 3 carries the pillar maximum height.
    pub channel: usize,
    pub gain: f64,
    pub threshold: f64,
}

impl Default for ForegroundConfig {
    fn default() -> Self {
        Self {
            channel: 3,
            gain: 8.0,
            threshold: 0.5,
        }
    }
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ModelSource {
    /// Hand-set carries through the backbone and projection, He-initialised
    /// elsewhere.
    #[default]
    Analytic,
    /// Every network read from a weight archive.
    Archive,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ModelConfig {
    pub source: ModelSource,
    pub seed: u64,
    pub archive: Option<PathBuf>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    /// Evaluation time `t`, seconds.
    pub time: f64,
    pub tau_ms: f64,
    pub sigma_local_m: f64,
    pub sigma_head_deg: f64,
    pub phd: bool,
    /// Also evaluate the adversarial domain loss and the temporal loss.
    pub diagnostics: bool,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            time: 2.0,
            tau_ms: 300.0,
            sigma_local_m: 0.0,
            sigma_head_deg: 0.0,
            phd: true,
            diagnostics: true,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SweepConfig {
    pub tau_ms: Vec<f64>,
    /// Times at which each grid point is evaluated; times earlier than
    /// `τ + ΔT` are skipped.
    pub eval_times: Vec<f64>,
    pub sigma_local_m: Vec<f64>,
    pub sigma_head_deg: Vec<f64>,
}

impl Default for SweepConfig {
    fn default() -> Self {
        Self {
            tau_ms: vec![0.0, 100.0, 200.0, 300.0, 400.0, 500.0],
            eval_times: vec![1.2, 1.6, 2.0],
            sigma_local_m: vec![0.0],
            sigma_head_deg: vec![0.0],
        }
    }
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SimConfig {
    pub scenario: ScenarioConfig,
    pub bev: BevSpec,
    pub phd: PhdConfig,
    pub ptam: PtamConfig,
    pub ifam: IfamConfig,
    pub codec: CodecConfig,
    pub sweep: SweepConfig,
    pub run: RunConfig,
    pub render: RenderConfig,
    pub detector: DetectorConfig,
    pub foreground: ForegroundConfig,
    pub model: ModelConfig,
}

fn non_negative(path: &str, v: f64) -> Result<()> {
    if v >= 0.0 && v.is_finite() {
        Ok(())
    } else {
        Err(Error::config(path, format!("{v} must be a non-negative number")))
    }
}

impl SimConfig {
    pub fn from_toml_str(text: &str) -> Result<Self> {
        let de = toml::Deserializer::parse(text).map_err(|e| Error::config("", e.to_string()))?;
        let cfg: SimConfig = serde_path_to_error::deserialize(de)
            .map_err(|e| Error::config(e.path().to_string(), e.inner().message().to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn from_file(path: &Path) -> Result<Self> {
        Self::from_toml_str(&std::fs::read_to_string(path)?)
    }

    pub fn to_toml_string(&self) -> Result<String> {
        toml::to_string_pretty(self).map_err(|e| Error::config("", e.to_string()))
    }

    pub fn validate(&self) -> Result<()> {
        self.scenario.validate()?;
        self.bev.validate()?;
        self.phd.validate()?;
        self.render.validate()?;
        if self.ptam.hidden == 0 {
            return Err(Error::config("ptam.hidden", "must be positive"));
        }
        if self.ptam.window == 0 {
            return Err(Error::config("ptam.window", "must be positive"));
        }
        if !(0.0..=1.0).contains(&self.detector.threshold) {
            return Err(Error::config("detector.threshold", "must lie in [0, 1]"));
        }
        if self.model.source == ModelSource::Archive && self.model.archive.is_none() {
            return Err(Error::config("model.archive", "required when model.source = \"archive\""));
        }
        non_negative("run.time", self.run.time)?;
        non_negative("run.tau_ms", self.run.tau_ms)?;
        non_negative("run.sigma_local_m", self.run.sigma_local_m)?;
        non_negative("run.sigma_head_deg", self.run.sigma_head_deg)?;
        for (i, v) in self.sweep.tau_ms.iter().enumerate() {
            non_negative(&format!("sweep.tau_ms[{i}]"), *v)?;
        }
        for (i, v) in self.sweep.eval_times.iter().enumerate() {
            non_negative(&format!("sweep.eval_times[{i}]"), *v)?;
        }
        for (i, v) in self.sweep.sigma_local_m.iter().enumerate() {
            non_negative(&format!("sweep.sigma_local_m[{i}]"), *v)?;
        }
        for (i, v) in self.sweep.sigma_head_deg.iter().enumerate() {
            non_negative(&format!("sweep.sigma_head_deg[{i}]"), *v)?;
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::sim::Template;

    #[test]
    fn empty_file_is_default() {
        assert_eq!(SimConfig::from_toml_str("").unwrap(), SimConfig::default());
    }

    #[test]
    fn partial_sections() {
        let cfg = SimConfig::from_toml_str(
            "[scenario]\ntemplate = \"turning\"\n[codec]\nmode = \"int8\"\n[sweep]\ntau_ms = [0, 250]\n",
        )
        .unwrap();
        assert_eq!(cfg.scenario.template, Template::Turning);
        assert_eq!(cfg.sweep.tau_ms, vec![0.0, 250.0]);
    }

    #[test]
    fn schema_errors_carry_a_path() {
        let err = SimConfig::from_toml_str("[scenario]\nspeed = \"fast\"\n").unwrap_err();
        match err {
            Error::Config { path, .. } => assert_eq!(path, "scenario.speed"),
            e => panic!("unexpected {e}"),
        }
        let err = SimConfig::from_toml_str("[ptam]\nwindw = 3\n").unwrap_err();
        assert!(matches!(err, Error::Config { ref path, .. } if path.starts_with("ptam")), "{err}");
        let err = SimConfig::from_toml_str("[sweep]\ntau_ms = [0, -5]\n").unwrap_err();
        assert!(matches!(err, Error::Config { ref path, .. } if path == "sweep.tau_ms[1]"));
    }

    #[test]
    fn toml_roundtrip() {
        let cfg = SimConfig::default();
        let text = cfg.to_toml_string().unwrap();
        assert_eq!(SimConfig::from_toml_str(&text).unwrap(), cfg);
    }
}
