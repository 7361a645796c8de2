//! Step-size bounds and explicit integrators.

use std::f64::consts::FRAC_PI_2;

use crate::error::{Error, Result};
use crate::flux::FluxParams;
use crate::mesh::TriMesh;
use crate::poly2::DgField;
use crate::quadrature::{min_selected_weight, selected_point_weights, SelectedPoints, VERTEX_WEIGHT};

#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum CflMode {
    LinearThm,
    NonlinearThm,
    /// Diffusion bound (linear or nonlinear by problem type) combined with a
    /// convective bound.
    ConvectionCombined,
}

impl std::str::FromStr for CflMode {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "linear-thm" => Ok(CflMode::LinearThm),
            "nonlinear-thm" => Ok(CflMode::NonlinearThm),
            "convection-combined" => Ok(CflMode::ConvectionCombined),
            other => Err(Error::Unknown {
                kind: "cfl mode",
                name: other.into(),
            }),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CflParams {
    pub safety: f64,
    pub mode: CflMode,
    pub user_dt: Option<f64>,
}

impl Default for CflParams {
    fn default() -> Self {
        CflParams {
            safety: 0.9,
            mode: CflMode::LinearThm,
            user_dt: None,
        }
    }
}

impl CflParams {
    pub fn validate(&self) -> Result<()> {
        if !(self.safety > 0.0 && self.safety <= 1.0) {
            return Err(Error::InvalidParameter(format!("CFL safety must lie in (0, 1], got {}", self.safety)));
        }
        if let Some(dt) = self.user_dt {
            if !(dt > 0.0 && dt.is_finite()) {
                return Err(Error::InvalidParameter(format!("time step must be positive, got {dt}")));
            }
        }
        Ok(())
    }
}

fn ratio(num: f64, den: f64) -> f64 {
    if den > 0.0 {
        num / den
    } else {
        f64::INFINITY
    }
}

/// `λ = Δt/|K|` bound for linear diffusion with unit coefficient, from the
/// smallest and largest mesh angles. Nonpositive when `θ_max ≥ π/2`.
pub fn cfl_a_linear(beta0: f64, beta1: f64, theta_min: f64, theta_max: f64) -> f64 {
    let w1 = VERTEX_WEIGHT;
    let t = theta_min.tan();
    let inner = ratio(1.0, 6.0 * (8.0 * beta1 - 1.0))
        .min(ratio(w1, 8.0 * (beta0 - 2.25 + 6.0 * beta1)))
        .min(ratio(w1, 4.0 * beta0));
    t * ratio(w1, 72.0 * (1.0 - 4.0 * beta1)).min(t / theta_max.tan() * inner)
}

/// `λ` bound for nonlinear diffusion given the smallest selected weight.
pub fn cfl_a_nonlinear(beta0: f64, beta1: f64, theta_min: f64, w0: f64) -> f64 {
    theta_min.sin() * (3.0 - 3f64.sqrt()) / 3.0 * w0 * ratio(1.0, 2.0 * beta0 + 8.0 * beta1 + 3.0).min(ratio(1.0, 8.0 * beta1 + 1.0))
}

/// Mesh-specific form of the linear monotonicity conditions: for every cell,
/// each selected point's quadrature weight must dominate `λ` times its flux
/// coefficient. Returns `min_K λ_K |K|`.
pub fn linear_mesh_bound(mesh: &TriMesh, flux: &FluxParams) -> Result<f64> {
    let scales = mesh.midpoint_scales()?;
    let (b0, b1) = (flux.beta0, flux.beta1);
    let mut best = f64::INFINITY;
    for k in 0..mesh.num_cells() {
        let sel = SelectedPoints::new(mesh, k, &scales);
        let weights = selected_point_weights(mesh, k, &sel)?;
        let tol = 1e-12 * mesh.cells[k].diameter;
        let mut coef: Vec<(crate::mesh::Point2, f64)> = Vec::new();
        let mut add = |p: crate::mesh::Point2, c: f64| match coef.iter_mut().find(|(q, _)| q.dist(p) < tol) {
            Some(e) => e.1 += c,
            None => coef.push((p, c)),
        };
        for l in 0..3 {
            let e = mesh.cells[k].edge_ids[l];
            let r = mesh.edges[e].length / scales[e];
            add(sel.vertices[l], b0 / 6.0 * r);
            add(sel.vertices[(l + 1) % 3], b0 / 6.0 * r);
            add(sel.midpoints[l], r * (2.0 / 3.0 * b0 - 1.5 + 4.0 * b1));
            add(sel.half[l], 2.0 * r * (1.0 - 4.0 * b1));
            add(sel.full[l], 0.5 * r * (8.0 * b1 - 1.0));
        }
        let area = mesh.cells[k].area;
        for (p, c) in coef {
            if c <= 0.0 {
                continue;
            }
            let w: f64 = weights.rule.iter().filter(|(q, _)| q.dist(p) < tol).map(|(_, w)| w).sum();
            best = best.min(w / c * area);
        }
    }
    Ok(best)
}

/// Inputs to [`compute_dt`] that depend on the problem.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StepContext {
    /// Largest spectral radius of `A(u)` over the bounds (zero when there is
    /// no diffusion).
    pub diffusion_max: f64,
    /// True when `A` does not depend on `u`.
    pub linear_diffusion: bool,
    /// Largest convective speed `|F'(u)|` (zero when there is no convection).
    pub wave_speed: f64,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StepReport {
    pub dt: f64,
    /// Bound-preserving limit on `Δt/|K|` for unit diffusion, when one applies.
    pub lambda: Option<f64>,
    pub diffusion_dt: f64,
    pub convection_dt: f64,
    /// True when the angle formula was replaced by the mesh-specific bound.
    pub mesh_specific: bool,
}

/// Step size from the bound-preserving limits, scaled by the diffusion magnitude.
pub fn compute_dt(mesh: &TriMesh, params: &CflParams, flux: &FluxParams, ctx: &StepContext) -> Result<StepReport> {
    params.validate()?;
    let min_area = mesh.cells.iter().map(|c| c.area).fold(f64::INFINITY, f64::min);
    let linear = match params.mode {
        CflMode::LinearThm => true,
        CflMode::NonlinearThm => false,
        CflMode::ConvectionCombined => ctx.linear_diffusion,
    };
    let mut mesh_specific = false;
    let (lambda, diffusion_dt) = if ctx.diffusion_max > 0.0 {
        let (lambda, base) = if linear {
            let a = cfl_a_linear(flux.beta0, flux.beta1, mesh.theta_min, mesh.theta_max);
            if mesh.theta_max < FRAC_PI_2 - 1e-9 && a > 0.0 && a.is_finite() {
                (Some(a), a * min_area)
            } else {
                mesh_specific = true;
                (None, linear_mesh_bound(mesh, flux)?)
            }
        } else {
            let scales = mesh.midpoint_scales()?;
            let w0 = min_selected_weight(mesh, &scales)?;
            let a = cfl_a_nonlinear(flux.beta0, flux.beta1, mesh.theta_min, w0);
            (Some(a), a * min_area)
        };
        (lambda, params.safety * base / ctx.diffusion_max)
    } else {
        (None, f64::INFINITY)
    };
    let convection_dt = if params.mode == CflMode::ConvectionCombined && ctx.wave_speed > 0.0 {
        let r = (0..mesh.num_cells()).map(|k| mesh.inradius(k)).fold(f64::INFINITY, f64::min);
        params.safety * r / (18.0 * ctx.wave_speed)
    } else {
        f64::INFINITY
    };
    let mut dt = 1.0 / (1.0 / diffusion_dt + 1.0 / convection_dt);
    if !(dt.is_finite() && dt > 0.0) && params.user_dt.is_none() {
        return Err(Error::InvalidParameter("no finite time step bound; supply a time step".into()));
    }
    if let Some(user) = params.user_dt {
        if user > dt {
            log::warn!("time step {user:e} exceeds the theorem bound {dt:e}");
        }
        dt = user;
    }
    Ok(StepReport {
        dt,
        lambda,
        diffusion_dt,
        convection_dt,
        mesh_specific,
    })
}

/// Right-hand side `H(u)` of the semi-discrete system.
pub type Rhs<'r> = dyn FnMut(&DgField) -> Result<DgField> + 'r;
/// Hook called after each stage with the stage index (1-based) and whether
/// it completes the step.
pub type StageHook<'r> = dyn FnMut(&mut DgField, usize, bool) -> Result<()> + 'r;

fn finite(field: &DgField, stage: usize) -> Result<()> {
    if field.is_finite() {
        Ok(())
    } else {
        Err(Error::NonFiniteStage { stage })
    }
}

pub trait TimeIntegrator {
    fn name(&self) -> &'static str;
    fn stages(&self) -> usize;
    fn step(&self, state: &mut DgField, dt: f64, rhs: &mut Rhs, post_stage: &mut StageHook) -> Result<()>;
}

pub struct ForwardEuler;

impl TimeIntegrator for ForwardEuler {
    fn name(&self) -> &'static str {
        "euler"
    }
    fn stages(&self) -> usize {
        1
    }
    fn step(&self, state: &mut DgField, dt: f64, rhs: &mut Rhs, post_stage: &mut StageHook) -> Result<()> {
        if !(dt > 0.0) {
            return Err(Error::InvalidParameter(format!("time step must be positive, got {dt}")));
        }
        let h = rhs(state)?;
        state.combine(1.0, &h, dt);
        state.time += dt;
        finite(state, 1)?;
        post_stage(state, 1, true)
    }
}

/// Three-stage third-order strong-stability-preserving Runge-Kutta.
pub struct SspRk3;

impl TimeIntegrator for SspRk3 {
    fn name(&self) -> &'static str {
        "ssp-rk3"
    }
    fn stages(&self) -> usize {
        3
    }
    fn step(&self, state: &mut DgField, dt: f64, rhs: &mut Rhs, post_stage: &mut StageHook) -> Result<()> {
        if !(dt > 0.0) {
            return Err(Error::InvalidParameter(format!("time step must be positive, got {dt}")));
        }
        let t0 = state.time;
        let h = rhs(state)?;
        let mut u1 = state.clone();
        u1.combine(1.0, &h, dt);
        u1.time = t0 + dt;
        finite(&u1, 1)?;
        post_stage(&mut u1, 1, false)?;

        let h = rhs(&u1)?;
        u1.combine(1.0, &h, dt);
        let mut u2 = state.clone();
        u2.combine(0.75, &u1, 0.25);
        u2.time = t0 + 0.5 * dt;
        finite(&u2, 2)?;
        post_stage(&mut u2, 2, false)?;

        let h = rhs(&u2)?;
        u2.combine(1.0, &h, dt);
        state.combine(1.0 / 3.0, &u2, 2.0 / 3.0);
        state.time = t0 + dt;
        finite(state, 3)?;
        post_stage(state, 3, true)
    }
}

pub fn integrator_by_name(name: &str) -> Result<Box<dyn TimeIntegrator>> {
    match name {
        "euler" => Ok(Box::new(ForwardEuler)),
        "ssp-rk3" => Ok(Box::new(SspRk3)),
        other => Err(Error::Unknown {
            kind: "integrator",
            name: other.into(),
        }),
    }
}

pub const INTEGRATOR_NAMES: [&str; 2] = ["euler", "ssp-rk3"];

/// Step sizes that march from `t0` to `t_final` with steps of `dt`, the
/// last one truncated to land exactly on `t_final`.
pub fn step_sizes(t0: f64, t_final: f64, dt: f64) -> Vec<f64> {
    let span = t_final - t0;
    if !(span > 0.0) {
        return Vec::new();
    }
    let n = (span / dt * (1.0 - 1e-12)).ceil().max(1.0) as usize;
    let mut out = vec![dt; n];
    out[n - 1] = span - dt * (n - 1) as f64;
    out
}

/// Marches `state` to `t_final`, calling `on_step` after every step.
pub fn integrate(
    integrator: &dyn TimeIntegrator,
    state: &mut DgField,
    t_final: f64,
    dt: f64,
    rhs: &mut Rhs,
    post_stage: &mut StageHook,
    on_step: &mut dyn FnMut(&DgField, usize) -> Result<()>,
) -> Result<usize> {
    let t0 = state.time;
    let sizes = step_sizes(t0, t_final, dt);
    for (i, h) in sizes.iter().enumerate() {
        integrator.step(state, *h, rhs, post_stage)?;
        state.time = if i + 1 == sizes.len() { t_final } else { t0 + dt * (i + 1) as f64 };
        on_step(state, i + 1)?;
    }
    Ok(sizes.len())
}
