use std::path::PathBuf;

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand, ValueEnum};

use mpsddg::assembly::AlphaPolicy;
use mpsddg::flux::ScaleMode;
use mpsddg::harness::{experiment_by_name, quadcheck, table_csv, ExperimentConfig, LimitMode, Report};
use mpsddg::mesh::{generate_structured, write_mesh, Pattern, Rect};
use mpsddg::timestep::CflMode;

#[derive(Parser)]
#[command(name = "mpsddg", version, about = "Bound-preserving DDG experiments on triangular meshes")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Heat equation refinement study (error and order table).
    Accuracy(RunArgs),
    /// Porous medium equation, global extrema at recorded times.
    Porous(RunArgs),
    /// Strongly degenerate convection-diffusion.
    Sdp(RunArgs),
    /// Vorticity-form Navier-Stokes refinement study.
    NsAccuracy(RunArgs),
    /// Vorticity-form Navier-Stokes vortex patch.
    NsVortex(RunArgs),
    /// Verify the vertex-containing and selected-point quadrature rules.
    Quadcheck {
        #[arg(long, default_value_t = 1)]
        seed: u64,
    },
    /// Write a structured mesh in the plain-text mesh format.
    Meshgen(MeshgenArgs),
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum LimiterChoice {
    On,
    Off,
    Both,
}

#[derive(Clone, Copy, ValueEnum)]
enum PatternArg {
    Uniform,
    Obtuse,
}

impl From<PatternArg> for Pattern {
    fn from(p: PatternArg) -> Self {
        match p {
            PatternArg::Uniform => Pattern::Uniform,
            PatternArg::Obtuse => Pattern::Obtuse,
        }
    }
}

#[derive(Args)]
struct RunArgs {
    /// TOML file overriding the experiment's base configuration; flags
    /// override the file.
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long, value_enum)]
    pattern: Option<PatternArg>,
    /// Cells per side on the coarsest level.
    #[arg(long)]
    nx: Option<usize>,
    #[arg(long)]
    levels: Option<usize>,
    #[arg(long)]
    mesh_file: Option<PathBuf>,
    #[arg(long)]
    epsilon: Option<f64>,
    #[arg(long)]
    reynolds: Option<f64>,
    #[arg(long)]
    beta0: Option<f64>,
    #[arg(long)]
    beta1: Option<f64>,
    /// edge-normal, gauss-point or edge-length.
    #[arg(long)]
    scale_mode: Option<ScaleMode>,
    #[arg(long)]
    no_interface_correction: bool,
    /// gauss2, gauss3 or lobatto3.
    #[arg(long)]
    edge_rule: Option<String>,
    /// global or per-edge.
    #[arg(long)]
    alpha_policy: Option<AlphaPolicy>,
    #[arg(long, value_enum, default_value = "both")]
    limiter: LimiterChoice,
    #[arg(long)]
    per_step_limiting: bool,
    #[arg(long, overrides_with = "no_slope")]
    slope: bool,
    #[arg(long)]
    no_slope: bool,
    #[arg(long)]
    slope_gamma: Option<f64>,
    #[arg(long)]
    slope_m: Option<f64>,
    #[arg(long)]
    final_time: Option<f64>,
    /// Comma-separated times at which extrema are recorded.
    #[arg(long, value_delimiter = ',')]
    record_times: Option<Vec<f64>>,
    #[arg(long)]
    stop_on_violation: bool,
    #[arg(long)]
    cfl_safety: Option<f64>,
    /// linear-thm, nonlinear-thm or convection-combined.
    #[arg(long)]
    cfl_mode: Option<CflMode>,
    /// Fixed time step (overrides the CFL bound).
    #[arg(long)]
    dt: Option<f64>,
    /// euler or ssp-rk3.
    #[arg(long)]
    integrator: Option<String>,
    /// Directory for tables, metadata and fields.
    #[arg(long)]
    output: Option<PathBuf>,
    #[arg(long)]
    export_fields: bool,
    #[arg(long)]
    seed: Option<u64>,
}

impl RunArgs {
    fn apply(&self, mut cfg: ExperimentConfig) -> Result<ExperimentConfig> {
        if let Some(path) = &self.config {
            let text = std::fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
            cfg = ExperimentConfig::from_toml(&text)?;
        }
        if let Some(p) = self.pattern {
            cfg.mesh.pattern = p.into();
        }
        if let Some(n) = self.nx {
            cfg.mesh.nx = n;
        }
        if let Some(l) = self.levels {
            cfg.levels = l;
        }
        if let Some(f) = &self.mesh_file {
            cfg.mesh.file = Some(f.clone());
            cfg.levels = 1;
        }
        cfg.epsilon = self.epsilon.or(cfg.epsilon);
        cfg.reynolds = self.reynolds.or(cfg.reynolds);
        if let Some(b) = self.beta0 {
            cfg.scheme.beta0 = b;
        }
        if let Some(b) = self.beta1 {
            cfg.scheme.beta1 = b;
        }
        if let Some(s) = self.scale_mode {
            cfg.scheme.scale_mode = s;
        }
        if self.no_interface_correction {
            cfg.scheme.interface_correction = false;
        }
        if let Some(r) = &self.edge_rule {
            cfg.scheme.edge_rule = r.clone();
        }
        if let Some(a) = self.alpha_policy {
            cfg.scheme.alpha_policy = a;
        }
        if self.per_step_limiting {
            cfg.limit_mode = LimitMode::PerStep;
        }
        if self.slope {
            cfg.slope.enabled = true;
        }
        if self.no_slope {
            cfg.slope.enabled = false;
        }
        if let Some(g) = self.slope_gamma {
            cfg.slope.gamma = g;
        }
        if let Some(m) = self.slope_m {
            cfg.slope.m_tvb = m;
        }
        cfg.final_time = self.final_time.or(cfg.final_time);
        if let Some(t) = &self.record_times {
            cfg.record_times = t.clone();
        }
        cfg.stop_on_violation |= self.stop_on_violation;
        if let Some(s) = self.cfl_safety {
            cfg.cfl.safety = s;
        }
        if let Some(m) = self.cfl_mode {
            cfg.cfl.mode = m;
        }
        cfg.cfl.dt = self.dt.or(cfg.cfl.dt);
        if let Some(i) = &self.integrator {
            cfg.integrator = i.clone();
        }
        cfg.output_dir = self.output.clone().or(cfg.output_dir);
        cfg.export_fields |= self.export_fields;
        if let Some(s) = self.seed {
            cfg.seed = s;
        }
        cfg.validate()?;
        Ok(cfg)
    }
}

#[derive(Args)]
struct MeshgenArgs {
    #[arg(long, default_value_t = 12)]
    nx: usize,
    #[arg(long)]
    ny: Option<usize>,
    #[arg(long, value_enum, default_value = "uniform")]
    pattern: PatternArg,
    /// Rectangle as x0,y0,x1,y1.
    #[arg(long, value_delimiter = ',', num_args = 4, default_values_t = [0.0, 0.0, 1.0, 1.0])]
    rect: Vec<f64>,
    #[arg(long)]
    periodic: bool,
    #[arg(long)]
    output: PathBuf,
}

fn print_report(report: &Report) {
    println!("# {}", report.label);
    print!("{}", table_csv(report));
    for l in &report.levels {
        if l.snapshots.len() > 2 {
            for s in &l.snapshots {
                println!(
                    "#   level {} t = {:.4e}: min {:.6e} max {:.6e}",
                    l.level, s.time, s.min, s.max
                );
            }
        }
    }
}

fn run(name: &str, args: &RunArgs) -> Result<()> {
    let experiment = experiment_by_name(name)?;
    let cfg = args.apply(experiment.base_config())?;
    let presets: Vec<_> = experiment
        .presets(&cfg)
        .into_iter()
        .filter(|p| match args.limiter {
            LimiterChoice::Both => true,
            LimiterChoice::On => p.config.limiter,
            LimiterChoice::Off => !p.config.limiter,
        })
        .collect();
    if presets.is_empty() {
        bail!("{name} has no run matching the limiter choice");
    }
    for p in presets {
        let report = mpsddg::harness::run_experiment(&p.config, &p.label)
            .with_context(|| format!("{name} {}", p.label))?;
        print_report(&report);
    }
    Ok(())
}

fn main() -> Result<()> {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info")).init();
    let cli = Cli::parse();
    match &cli.command {
        Command::Accuracy(a) => run("accuracy", a),
        Command::Porous(a) => run("porous", a),
        Command::Sdp(a) => run("sdp", a),
        Command::NsAccuracy(a) => run("ns-accuracy", a),
        Command::NsVortex(a) => run("ns-vortex", a),
        Command::Quadcheck { seed } => {
            let lines = quadcheck(*seed)?;
            let mut ok = true;
            for l in &lines {
                println!("{} {}: {}", if l.passed { "PASS" } else { "FAIL" }, l.name, l.detail);
                ok &= l.passed;
            }
            if !ok {
                bail!("quadrature checks failed");
            }
            Ok(())
        }
        Command::Meshgen(m) => {
            let rect = Rect::new(m.rect[0], m.rect[1], m.rect[2], m.rect[3]);
            let mesh = generate_structured(m.nx, m.ny.unwrap_or(m.nx), rect, m.pattern.into(), m.periodic)?;
            write_mesh(&mesh, &m.output)?;
            println!(
                "{} cells, {} vertices, h = {:.4e}, angles [{:.2}, {:.2}] deg",
                mesh.num_cells(),
                mesh.vertices.len(),
                mesh.h,
                mesh.theta_min.to_degrees(),
                mesh.theta_max.to_degrees()
            );
            Ok(())
        }
    }
}
