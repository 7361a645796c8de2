use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use crate::assembly::SpatialOperator;
use crate::error::Result;
use crate::limiter::{LimiterChain, MpsLimiter, SlopeLimiter};
use crate::mesh::{generate_structured, load_mesh, TriMesh};
use crate::poisson::VorticityOperator;
use crate::poly2::DgField;
use crate::problems::{problem_by_name, BoundaryKind, Problem};
use crate::quadrature::{triangle_rule, QuadRule};
use crate::timestep::{compute_dt, integrate, integrator_by_name, StepContext, StepReport};

use super::config::{ExperimentConfig, LimitMode};
use super::export::{export_field, ExportFormat};

/// Sampling used for the L∞ error, echoed into the run metadata.
pub const LINF_SAMPLING: &str =
    "max over the degree-5 quadrature points, the three vertices and the three edge midpoints of every cell";

/// Barycentric sample points besides the quadrature points.
const VERTEX_MIDPOINTS: [[f64; 2]; 6] = [[1.0, 0.0], [0.0, 1.0], [0.0, 0.0], [0.5, 0.5], [0.0, 0.5], [0.5, 0.0]];

/// Global extrema of the solution at a recorded time.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Snapshot {
    pub time: f64,
    pub min: f64,
    pub max: f64,
    /// `min(u_min - m(t), 0)`: negative when the solution undershoots.
    pub min_violation: f64,
    /// `max(u_max - M(t), 0)`: positive when the solution overshoots.
    pub max_violation: f64,
}

impl Snapshot {
    fn of(field: &DgField, bounds: (f64, f64)) -> Self {
        let (min, max) = field.extrema();
        Snapshot {
            time: field.time,
            min,
            max,
            min_violation: (min - bounds.0).min(0.0),
            max_violation: (max - bounds.1).max(0.0),
        }
    }

    pub fn within_bounds(&self, tol: f64) -> bool {
        self.min_violation >= -tol && self.max_violation <= tol
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct LevelResult {
    pub level: usize,
    pub nx: usize,
    pub cells: usize,
    /// Largest cell diameter relative to the domain width.
    pub h: f64,
    pub step: StepReport,
    pub steps: usize,
    pub l2_error: Option<f64>,
    pub linf_error: Option<f64>,
    /// State at the end of the level (the final time unless stopped early).
    pub last: Snapshot,
    /// Recorded states, including the initial limited state and the last one.
    pub snapshots: Vec<Snapshot>,
    pub stopped_early: bool,
    pub mass_initial: f64,
    pub mass_final: f64,
    /// `Σ |K| |ū_K|` of the initial state, the scale for mass drift.
    pub mass_scale: f64,
    pub cg_iterations: usize,
    pub periodic: bool,
}

impl LevelResult {
    pub fn mass_drift(&self) -> f64 {
        (self.mass_final - self.mass_initial).abs()
    }

    /// Mass drift relative to the initial mass scale, per unit time.
    pub fn relative_drift_rate(&self) -> f64 {
        let t = self.last.time.max(f64::MIN_POSITIVE);
        self.mass_drift() / self.mass_scale.max(f64::MIN_POSITIVE) / t
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ErrorTableRow {
    pub h: f64,
    pub l2_error: Option<f64>,
    pub l2_order: Option<f64>,
    pub linf_error: Option<f64>,
    pub linf_order: Option<f64>,
    pub u_min_minus_bound: f64,
    pub u_max_minus_bound: f64,
}

#[derive(Debug, Clone)]
pub struct Report {
    pub label: String,
    pub config: ExperimentConfig,
    pub levels: Vec<LevelResult>,
}

impl Report {
    pub fn table(&self) -> Vec<ErrorTableRow> {
        error_table(&self.levels)
    }
}

/// `order_i = log(e_{i-1}/e_i) / log(h_{i-1}/h_i)`; the first entry and any
/// entry involving a zero or missing error are `None`.
pub fn observed_order(errors: &[Option<f64>], hs: &[f64]) -> Vec<Option<f64>> {
    let mut out = vec![None; errors.len()];
    for i in 1..errors.len().min(hs.len()) {
        if let (Some(a), Some(b)) = (errors[i - 1], errors[i]) {
            let hr = hs[i - 1] / hs[i];
            if a > 0.0 && b > 0.0 && hr > 0.0 && hr != 1.0 {
                out[i] = Some((a / b).ln() / hr.ln());
            }
        }
    }
    out
}

pub fn error_table(levels: &[LevelResult]) -> Vec<ErrorTableRow> {
    let hs: Vec<f64> = levels.iter().map(|l| l.h).collect();
    let l2: Vec<Option<f64>> = levels.iter().map(|l| l.l2_error).collect();
    let linf: Vec<Option<f64>> = levels.iter().map(|l| l.linf_error).collect();
    let l2_order = observed_order(&l2, &hs);
    let linf_order = observed_order(&linf, &hs);
    levels
        .iter()
        .enumerate()
        .map(|(i, l)| ErrorTableRow {
            h: l.h,
            l2_error: l.l2_error,
            l2_order: l2_order[i],
            linf_error: l.linf_error,
            linf_order: linf_order[i],
            u_min_minus_bound: l.last.min_violation,
            u_max_minus_bound: l.last.max_violation,
        })
        .collect()
}

fn build_mesh(cfg: &ExperimentConfig, problem: &dyn Problem, nx: usize) -> Result<TriMesh> {
    if let Some(path) = &cfg.mesh.file {
        return Ok(load_mesh(path)?);
    }
    let periodic = problem.boundary() == BoundaryKind::Periodic;
    Ok(generate_structured(nx, nx, problem.domain(), cfg.mesh.pattern, periodic)?)
}

/// L² and L∞ errors against the exact solution, or `None` when the problem
/// has none.
fn errors(mesh: &TriMesh, field: &DgField, problem: &dyn Problem, rule: &QuadRule) -> Option<(f64, f64)> {
    let t = field.time;
    problem.exact(mesh.centroid(0), t)?;
    let mut l2 = 0.0;
    let mut linf: f64 = 0.0;
    for (k, p) in field.polys.iter().enumerate() {
        let tri = mesh.cell_points(k);
        let frame = &mesh.frames[k];
        let mut sum = 0.0;
        for (pt, w) in rule.physical_points(tri).into_iter().zip(&rule.weights) {
            let e = p.evaluate(frame, pt) - problem.exact(pt, t)?;
            sum += w * e * e;
            linf = linf.max(e.abs());
        }
        l2 += sum * mesh.cells[k].area;
        for [a, b] in VERTEX_MIDPOINTS {
            let pt = tri[0] * a + tri[1] * b + tri[2] * (1.0 - a - b);
            let e = p.eval_bary(a, b) - problem.exact(pt, t)?;
            linf = linf.max(e.abs());
        }
    }
    Some((l2.sqrt(), linf))
}

fn mass_scale(mesh: &TriMesh, field: &DgField) -> f64 {
    field
        .averages()
        .iter()
        .zip(&mesh.cells)
        .map(|(u, c)| c.area * u.abs())
        .sum()
}

/// Runs one refinement level with `nx` cells per side.
pub fn run_level(cfg: &ExperimentConfig, level: usize, nx: usize, out_dir: Option<&Path>) -> Result<LevelResult> {
    let problem = problem_by_name(&cfg.problem, &cfg.problem_params())?;
    let problem = problem.as_ref();
    let mesh = build_mesh(cfg, problem, nx)?;
    let scheme = cfg.scheme.build()?;
    let flux = scheme.flux;
    let t_final = cfg.final_time.unwrap_or_else(|| problem.final_time());
    let integrator = integrator_by_name(&cfg.integrator)?;
    let quad5 = triangle_rule(5)?;

    let mut chain = LimiterChain::default();
    if cfg.slope.enabled {
        chain.push(Box::new(SlopeLimiter::new(&mesh, cfg.slope.params())?));
    }
    if cfg.limiter {
        chain.push(Box::new(MpsLimiter { problem }));
    }

    let mut u = DgField::project(&mesh, |x| problem.initial(x), &quad5);
    chain.apply(&mut u)?;
    let mass_initial = u.total_mass(&mesh);
    let scale = mass_scale(&mesh, &u);
    let bounds0 = problem.bounds(0.0);
    let mut snapshots = vec![Snapshot::of(&u, bounds0)];

    let op = SpatialOperator::new(&mesh, problem, scheme)?;
    let mut vorticity = if problem.vorticity_transport() {
        Some(VorticityOperator::new(SpatialOperator::new(&mesh, problem, cfg.scheme.build()?)?)?)
    } else {
        None
    };
    let wave_speed = match (&mut vorticity, problem.convection()) {
        (Some(v), _) => {
            let vel = v.velocity(&u)?;
            v.dg.max_wave_speed(&vel, bounds0)
        }
        (None, Some(c)) => op.max_wave_speed(c, bounds0),
        (None, None) => 0.0,
    };
    let ctx = StepContext {
        diffusion_max: problem.diffusion_bound(bounds0.0, bounds0.1),
        linear_diffusion: problem.constant_diffusion(),
        wave_speed,
    };
    let step = compute_dt(&mesh, &cfg.cfl.params(), &flux, &ctx)?;
    log::info!(
        "{} level {level}: {} cells, dt = {:e}{}",
        problem.name(),
        mesh.num_cells(),
        step.dt,
        if step.mesh_specific { " (mesh-specific bound)" } else { "" }
    );

    let mut targets: Vec<f64> = cfg.record_times.iter().copied().filter(|t| *t < t_final).collect();
    targets.push(t_final);
    targets.sort_by(f64::total_cmp);
    targets.dedup();

    let mut rhs = |f: &DgField| match &mut vorticity {
        Some(v) => v.residual(f),
        None => op.residual(f),
    };
    let per_step = cfg.limit_mode == LimitMode::PerStep;
    let mut hook = |f: &mut DgField, _stage: usize, last: bool| {
        if per_step && !last {
            return Ok(());
        }
        chain.apply(f)
    };
    let mut steps = 0;
    let mut stopped_early = false;
    for target in targets {
        steps += integrate(integrator.as_ref(), &mut u, target, step.dt, &mut rhs, &mut hook, &mut |_, _| Ok(()))
            .map_err(|e| e.context(format!("integrating to t = {target}")))?;
        let snap = Snapshot::of(&u, problem.bounds(u.time));
        snapshots.push(snap);
        if cfg.stop_on_violation && !snap.within_bounds(0.0) && target < t_final {
            stopped_early = true;
            break;
        }
    }
    let cg_iterations = vorticity.as_ref().map_or(0, |v| v.cg_iterations);

    let (l2_error, linf_error) = match errors(&mesh, &u, problem, &quad5) {
        Some((a, b)) if !stopped_early => (Some(a), Some(b)),
        _ => (None, None),
    };
    if let Some(dir) = out_dir {
        if cfg.export_fields {
            export_field(&u, &mesh, &dir.join(format!("field_level{level}.vtk")), ExportFormat::VtkLegacy)?;
            export_field(&u, &mesh, &dir.join(format!("field_level{level}.csv")), ExportFormat::Csv)?;
        }
    }
    Ok(LevelResult {
        level,
        nx,
        cells: mesh.num_cells(),
        h: mesh.h / problem.domain().width(),
        step,
        steps,
        l2_error,
        linf_error,
        last: *snapshots.last().unwrap_or(&snapshots[0]),
        snapshots,
        stopped_early,
        mass_initial,
        mass_final: u.total_mass(&mesh),
        mass_scale: scale,
        cg_iterations,
        periodic: mesh.is_fully_periodic(),
    })
}

/// Runs every level, writing the report files when an output directory is
/// configured.
pub fn run_experiment(cfg: &ExperimentConfig, label: &str) -> Result<Report> {
    cfg.validate()?;
    let out_dir: Option<PathBuf> = cfg.output_dir.as_ref().map(|d| d.join(label));
    if let Some(dir) = &out_dir {
        std::fs::create_dir_all(dir)?;
    }
    let mut levels = Vec::with_capacity(cfg.levels);
    for level in 0..cfg.levels {
        let nx = cfg.mesh.nx << level;
        let dir = out_dir.as_ref().map(|d| d.join(format!("level{level}")));
        if let Some(d) = &dir {
            if cfg.export_fields {
                std::fs::create_dir_all(d)?;
            }
        }
        let result = run_level(cfg, level, nx, dir.as_deref()).map_err(|e| e.context(format!("level {level}")))?;
        levels.push(result);
    }
    let report = Report {
        label: label.to_string(),
        config: cfg.clone(),
        levels,
    };
    if let Some(dir) = &out_dir {
        write_report(&report, dir)?;
    }
    Ok(report)
}

fn opt(v: Option<f64>, prec: usize) -> String {
    v.map_or(String::new(), |x| format!("{x:.prec$e}"))
}

pub fn table_csv(report: &Report) -> String {
    let mut s = String::from(
        "level,nx,cells,h,dt,steps,l2_error,l2_order,linf_error,linf_order,u_min,u_max,u_min_minus_bound,u_max_minus_bound,mass_drift\n",
    );
    for (l, row) in report.levels.iter().zip(report.table()) {
        let _ = writeln!(
            s,
            "{},{},{},{:.6e},{:.6e},{},{},{},{},{},{:.12e},{:.12e},{:.3e},{:.3e},{:.3e}",
            l.level,
            l.nx,
            l.cells,
            row.h,
            l.step.dt,
            l.steps,
            opt(row.l2_error, 6),
            row.l2_order.map_or(String::new(), |o| format!("{o:.3}")),
            opt(row.linf_error, 6),
            row.linf_order.map_or(String::new(), |o| format!("{o:.3}")),
            l.last.min,
            l.last.max,
            row.u_min_minus_bound,
            row.u_max_minus_bound,
            l.mass_drift(),
        );
    }
    s
}

pub fn snapshots_csv(report: &Report) -> String {
    let mut s = String::from("level,time,u_min,u_max,min_violation,max_violation\n");
    for l in &report.levels {
        for snap in &l.snapshots {
            let _ = writeln!(
                s,
                "{},{:.6e},{:.12e},{:.12e},{:.3e},{:.3e}",
                l.level, snap.time, snap.min, snap.max, snap.min_violation, snap.max_violation
            );
        }
    }
    s
}

fn metadata(report: &Report) -> String {
    let cfg = &report.config;
    let mut s = String::new();
    let _ = writeln!(s, "experiment: {}", report.label);
    let _ = writeln!(s, "problem: {}", cfg.problem);
    let _ = writeln!(s, "l2 error: degree-5 triangle quadrature");
    let _ = writeln!(s, "linf error: {LINF_SAMPLING}");
    let _ = writeln!(s, "min/max: exact extrema of each cell quadratic");
    let _ = writeln!(s, "h: largest cell diameter divided by the domain width");
    let _ = writeln!(
        s,
        "violation columns: min(u_min - m(t), 0) and max(u_max - M(t), 0)"
    );
    for l in &report.levels {
        let _ = writeln!(
            s,
            "level {}: dt {:e} ({}), diffusion dt {:e}, convection dt {:e}, lambda {}, steps {}, cg iterations {}, mass drift {:e} (scale {:e}){}",
            l.level,
            l.step.dt,
            if l.step.mesh_specific { "mesh-specific bound" } else { "theorem bound" },
            l.step.diffusion_dt,
            l.step.convection_dt,
            l.step.lambda.map_or("-".into(), |a| format!("{a:e}")),
            l.steps,
            l.cg_iterations,
            l.mass_drift(),
            l.mass_scale,
            if l.stopped_early { ", stopped at first bound violation" } else { "" },
        );
    }
    s
}

/// Writes `table.csv`, `snapshots.csv`, `metadata.txt` and `config.toml`.
pub fn write_report(report: &Report, dir: &Path) -> Result<()> {
    std::fs::create_dir_all(dir)?;
    std::fs::write(dir.join("table.csv"), table_csv(report))?;
    std::fs::write(dir.join("snapshots.csv"), snapshots_csv(report))?;
    std::fs::write(dir.join("metadata.txt"), metadata(report))?;
    std::fs::write(dir.join("config.toml"), report.config.to_toml()?)?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn order_examples() {
        let o = observed_order(&[Some(1.94e-4), Some(2.60e-5)], &[0.0586, 0.0293]);
        assert_eq!(o[0], None);
        assert!((o[1].unwrap() - 2.90).abs() < 5e-3);
        let o = observed_order(&[Some(1.0), Some(1.0)], &[0.2, 0.1]);
        assert_eq!(o[1], Some(0.0));
        let o = observed_order(&[Some(1.0), Some(0.5)], &[0.2, 0.1]);
        assert!((o[1].unwrap() - 1.0).abs() < 1e-15);
        let o = observed_order(&[Some(1.0), Some(0.0), Some(0.0)], &[0.4, 0.2, 0.1]);
        assert_eq!(o, vec![None, None, None]);
    }

    #[test]
    fn short_run_conserves_mass() {
        let mut cfg = ExperimentConfig {
            problem: "nonlinear-heat".into(),
            levels: 1,
            final_time: Some(1e-3),
            ..ExperimentConfig::default()
        };
        cfg.mesh.nx = 4;
        let r = run_level(&cfg, 0, 4, None).unwrap();
        assert!(r.steps > 0);
        assert!(r.mass_drift() < 1e-13 * r.mass_scale, "{}", r.mass_drift());
        assert!(r.last.within_bounds(0.0));
    }
}
