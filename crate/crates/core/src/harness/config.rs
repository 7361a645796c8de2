use std::path::PathBuf;

use serde::{Deserialize, Serialize};

use crate::assembly::{AlphaPolicy, SchemeConfig};
use crate::error::{Error, Result};
use crate::flux::{FluxParams, ScaleMode};
use crate::limiter::SlopeLimiterParams;
use crate::mesh::Pattern;
use crate::problems::ProblemParams;
use crate::quadrature::{edge_rule, triangle_rule};
use crate::timestep::{CflMode, CflParams};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct MeshConfig {
    pub pattern: Pattern,
    /// Cells per side on the coarsest level; doubled on every further level.
    pub nx: usize,
    /// Read the mesh from a file instead (single level).
    pub file: Option<PathBuf>,
}

impl Default for MeshConfig {
    fn default() -> Self {
        MeshConfig {
            pattern: Pattern::Uniform,
            nx: 12,
            file: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SchemeSettings {
    pub beta0: f64,
    pub beta1: f64,
    pub scale_mode: ScaleMode,
    pub interface_correction: bool,
    /// `gauss2`, `gauss3` or `lobatto3`.
    pub edge_rule: String,
    pub volume_degree: usize,
    pub alpha_policy: AlphaPolicy,
}

impl Default for SchemeSettings {
    fn default() -> Self {
        SchemeSettings {
            beta0: 5.0,
            beta1: 0.125,
            scale_mode: ScaleMode::EdgeNormal,
            interface_correction: true,
            edge_rule: "gauss3".into(),
            volume_degree: 4,
            alpha_policy: AlphaPolicy::PerEdge,
        }
    }
}

impl SchemeSettings {
    pub fn flux(&self) -> FluxParams {
        FluxParams::new(self.beta0, self.beta1, self.scale_mode)
    }

    pub fn build(&self) -> Result<SchemeConfig> {
        let cfg = SchemeConfig {
            flux: self.flux(),
            interface_correction: self.interface_correction,
            edge_rule: edge_rule(&self.edge_rule)?,
            volume_rule: triangle_rule(self.volume_degree)?,
            alpha_policy: self.alpha_policy,
        };
        cfg.validate()?;
        Ok(cfg)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum LimitMode {
    PerStage,
    PerStep,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SlopeConfig {
    pub enabled: bool,
    pub gamma: f64,
    pub m_tvb: f64,
}

impl Default for SlopeConfig {
    fn default() -> Self {
        SlopeConfig {
            enabled: false,
            gamma: 1.5,
            m_tvb: 5.0,
        }
    }
}

impl SlopeConfig {
    pub fn params(&self) -> SlopeLimiterParams {
        SlopeLimiterParams {
            gamma: self.gamma,
            m_tvb: self.m_tvb,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct CflConfig {
    pub safety: f64,
    pub mode: CflMode,
    pub dt: Option<f64>,
}

impl Default for CflConfig {
    fn default() -> Self {
        CflConfig {
            safety: 0.9,
            mode: CflMode::LinearThm,
            dt: None,
        }
    }
}

impl CflConfig {
    pub fn params(&self) -> CflParams {
        CflParams {
            safety: self.safety,
            mode: self.mode,
            user_dt: self.dt,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ExperimentConfig {
    pub problem: String,
    pub epsilon: Option<f64>,
    pub reynolds: Option<f64>,
    pub mesh: MeshConfig,
    pub levels: usize,
    pub scheme: SchemeSettings,
    pub limiter: bool,
    pub limit_mode: LimitMode,
    pub slope: SlopeConfig,
    /// Defaults to the problem's own final time.
    pub final_time: Option<f64>,
    /// Extra times at which global extrema are recorded.
    pub record_times: Vec<f64>,
    /// End a level early once a recorded state leaves the bounds.
    pub stop_on_violation: bool,
    pub cfl: CflConfig,
    pub integrator: String,
    pub output_dir: Option<PathBuf>,
    /// Write the final field (and recorded snapshots) of every level.
    pub export_fields: bool,
    pub seed: u64,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        ExperimentConfig {
            problem: "heat".into(),
            epsilon: None,
            reynolds: None,
            mesh: MeshConfig::default(),
            levels: 4,
            scheme: SchemeSettings::default(),
            limiter: true,
            limit_mode: LimitMode::PerStage,
            slope: SlopeConfig::default(),
            final_time: None,
            record_times: Vec::new(),
            stop_on_violation: false,
            cfl: CflConfig::default(),
            integrator: "ssp-rk3".into(),
            output_dir: None,
            export_fields: false,
            seed: 0,
        }
    }
}

impl ExperimentConfig {
    pub fn problem_params(&self) -> ProblemParams {
        ProblemParams {
            epsilon: self.epsilon,
            reynolds: self.reynolds,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.levels == 0 {
            return Err(Error::Config("levels must be at least 1".into()));
        }
        if self.mesh.file.is_some() && self.levels != 1 {
            return Err(Error::Config("a mesh file supports a single level".into()));
        }
        if let Some(t) = self.final_time {
            if !(t > 0.0) {
                return Err(Error::Config(format!("final time must be positive, got {t}")));
            }
        }
        if self.record_times.iter().any(|t| !(*t > 0.0)) {
            return Err(Error::Config("record times must be positive".into()));
        }
        self.cfl.params().validate()?;
        Ok(())
    }

    pub fn from_toml(text: &str) -> Result<Self> {
        let cfg: ExperimentConfig = toml::from_str(text).map_err(|e| Error::Config(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn to_toml(&self) -> Result<String> {
        toml::to_string(self).map_err(|e| Error::Config(e.to_string()))
    }
}
