use crate::error::{Error, Result};
use crate::timestep::CflMode;

use super::config::{ExperimentConfig, SlopeConfig};
use super::run::{run_experiment, Report};

/// One run of an experiment.
#[derive(Debug, Clone)]
pub struct Preset {
    pub label: String,
    pub config: ExperimentConfig,
}

/// A named study: a base configuration and the runs derived from it.
pub trait Experiment {
    fn name(&self) -> &'static str;
    fn summary(&self) -> &'static str;
    fn base_config(&self) -> ExperimentConfig;

    /// Runs for a (possibly user-edited) base configuration. By default the
    /// base with and without the bound-preserving limiter.
    fn presets(&self, base: &ExperimentConfig) -> Vec<Preset> {
        limiter_pair(base, false)
    }

    fn run(&self, base: &ExperimentConfig) -> Result<Vec<Report>> {
        self.presets(base)
            .iter()
            .map(|p| run_experiment(&p.config, &p.label).map_err(|e| e.context(format!("{} {}", self.name(), p.label))))
            .collect()
    }
}

fn limiter_pair(base: &ExperimentConfig, stop_off_run: bool) -> Vec<Preset> {
    let on = ExperimentConfig {
        limiter: true,
        ..base.clone()
    };
    let off = ExperimentConfig {
        limiter: false,
        stop_on_violation: base.stop_on_violation || stop_off_run,
        ..base.clone()
    };
    vec![
        Preset {
            label: "limiter-on".into(),
            config: on,
        },
        Preset {
            label: "limiter-off".into(),
            config: off,
        },
    ]
}

/// Heat equation refinement study.
pub struct Accuracy;

impl Experiment for Accuracy {
    fn name(&self) -> &'static str {
        "accuracy"
    }
    fn summary(&self) -> &'static str {
        "heat equation convergence on the uniform or obtuse mesh family"
    }
    fn base_config(&self) -> ExperimentConfig {
        ExperimentConfig {
            problem: "heat".into(),
            epsilon: Some(1.0),
            levels: 4,
            final_time: Some(1e-4),
            ..ExperimentConfig::default()
        }
    }
}

/// Porous medium equation, limiter on and off, extrema at recorded times.
pub struct Porous;

impl Experiment for Porous {
    fn name(&self) -> &'static str {
        "porous"
    }
    fn summary(&self) -> &'static str {
        "porous medium equation with two merging bumps"
    }
    fn base_config(&self) -> ExperimentConfig {
        let mut cfg = ExperimentConfig {
            problem: "porous".into(),
            levels: 1,
            final_time: Some(2.0),
            record_times: vec![0.005, 0.1, 0.5],
            ..ExperimentConfig::default()
        };
        cfg.mesh.nx = 24;
        cfg.cfl.mode = CflMode::NonlinearThm;
        cfg
    }
    fn presets(&self, base: &ExperimentConfig) -> Vec<Preset> {
        limiter_pair(base, true)
    }
}

/// Strongly degenerate convection-diffusion with both limiters.
pub struct Degenerate;

impl Experiment for Degenerate {
    fn name(&self) -> &'static str {
        "sdp"
    }
    fn summary(&self) -> &'static str {
        "strongly degenerate parabolic problem with slope and bound limiters"
    }
    fn base_config(&self) -> ExperimentConfig {
        let mut cfg = ExperimentConfig {
            problem: "sdp".into(),
            epsilon: Some(0.1),
            levels: 1,
            final_time: Some(0.5),
            record_times: vec![0.1, 0.25],
            slope: SlopeConfig {
                enabled: true,
                ..SlopeConfig::default()
            },
            ..ExperimentConfig::default()
        };
        cfg.mesh.nx = 24;
        cfg.cfl.mode = CflMode::ConvectionCombined;
        cfg
    }
    fn presets(&self, base: &ExperimentConfig) -> Vec<Preset> {
        vec![Preset {
            label: "limiter-on".into(),
            config: base.clone(),
        }]
    }
}

/// Vorticity equation with a smooth exact solution.
pub struct NsAccuracy;

impl Experiment for NsAccuracy {
    fn name(&self) -> &'static str {
        "ns-accuracy"
    }
    fn summary(&self) -> &'static str {
        "incompressible Navier-Stokes (vorticity form) convergence"
    }
    fn base_config(&self) -> ExperimentConfig {
        let mut cfg = ExperimentConfig {
            problem: "ns-accuracy".into(),
            reynolds: Some(100.0),
            levels: 3,
            final_time: Some(0.1),
            ..ExperimentConfig::default()
        };
        cfg.mesh.nx = 12;
        cfg.cfl.mode = CflMode::ConvectionCombined;
        cfg
    }
}

/// Vorticity equation with discontinuous patch data.
pub struct NsVortex;

impl Experiment for NsVortex {
    fn name(&self) -> &'static str {
        "ns-vortex"
    }
    fn summary(&self) -> &'static str {
        "incompressible Navier-Stokes vortex patch, extrema with and without limiter"
    }
    fn base_config(&self) -> ExperimentConfig {
        let mut cfg = ExperimentConfig {
            problem: "ns-vortex".into(),
            reynolds: Some(100.0),
            levels: 2,
            final_time: Some(0.1),
            ..ExperimentConfig::default()
        };
        cfg.mesh.nx = 12;
        cfg.cfl.mode = CflMode::ConvectionCombined;
        cfg
    }
}

pub struct ExperimentRegistry {
    entries: Vec<Box<dyn Experiment>>,
}

impl ExperimentRegistry {
    pub fn empty() -> Self {
        ExperimentRegistry { entries: Vec::new() }
    }

    pub fn register(&mut self, e: Box<dyn Experiment>) {
        self.entries.push(e);
    }

    pub fn names(&self) -> Vec<&'static str> {
        self.entries.iter().map(|e| e.name()).collect()
    }

    pub fn get(&self, name: &str) -> Result<&dyn Experiment> {
        self.entries
            .iter()
            .find(|e| e.name() == name)
            .map(|e| e.as_ref())
            .ok_or_else(|| Error::Unknown {
                kind: "experiment",
                name: name.into(),
            })
    }
}

impl Default for ExperimentRegistry {
    fn default() -> Self {
        let mut r = ExperimentRegistry::empty();
        r.register(Box::new(Accuracy));
        r.register(Box::new(Porous));
        r.register(Box::new(Degenerate));
        r.register(Box::new(NsAccuracy));
        r.register(Box::new(NsVortex));
        r
    }
}

/// Builds a registered experiment by name.
pub fn experiment_by_name(name: &str) -> Result<Box<dyn Experiment>> {
    let e: Box<dyn Experiment> = match name {
        "accuracy" => Box::new(Accuracy),
        "porous" => Box::new(Porous),
        "sdp" => Box::new(Degenerate),
        "ns-accuracy" => Box::new(NsAccuracy),
        "ns-vortex" => Box::new(NsVortex),
        other => {
            return Err(Error::Unknown {
                kind: "experiment",
                name: other.into(),
            })
        }
    };
    Ok(e)
}
