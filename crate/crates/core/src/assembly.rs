//! Semi-discrete spatial operator.
//!
//! For every cell `K` and basis function `φ_i` the operator evaluates
//!
//! ```text
//! -∮ F̂·n φ_i + ∫ F(u)·∇φ_i + ∮ Â φ_i - ∫ A(u)∇u·∇φ_i - ∮ ½ (A∇φ_i)·n [u]
//! ```
//!
//! and returns the coefficient rates `M⁻¹ R / |K|`. When the diffusion
//! matrix does not depend on `u` the diffusion part is linear; it is then
//! assembled once into a block-sparse matrix and applied as a product.

use crate::error::{Error, Result};
use crate::flux::{ddg_flux, gamma_vector, interface_correction, lax_friedrichs, EdgeTracePair, FluxParams, ScaleMode, Trace};
use crate::mesh::{edge_length_scale, BoundaryTag, Point2, TriMesh};
use crate::poly2::{basis_gradients, basis_values, inverse_mass_matrix, BASIS_MEANS, DgField, QuadraticPoly};
use crate::problems::{Convection, Problem};
use crate::quadrature::{gauss_3, triangle_rule, EdgeRule, QuadRule};

#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum AlphaPolicy {
    /// `max |F'(u)·n|` sampled over the admissible interval.
    Global,
    /// `max |F'(u)·n|` over the two traces and the interval endpoints.
    PerEdge,
}

impl std::str::FromStr for AlphaPolicy {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "global" => Ok(AlphaPolicy::Global),
            "per-edge" => Ok(AlphaPolicy::PerEdge),
            other => Err(Error::Unknown {
                kind: "alpha policy",
                name: other.into(),
            }),
        }
    }
}

#[derive(Debug, Clone)]
pub struct SchemeConfig {
    pub flux: FluxParams,
    pub interface_correction: bool,
    pub edge_rule: EdgeRule,
    pub volume_rule: QuadRule,
    pub alpha_policy: AlphaPolicy,
}

impl Default for SchemeConfig {
    fn default() -> Self {
        SchemeConfig {
            flux: FluxParams::default(),
            interface_correction: true,
            edge_rule: gauss_3(),
            volume_rule: triangle_rule(4).expect("degree 4 rule exists"),
            alpha_policy: AlphaPolicy::PerEdge,
        }
    }
}

impl SchemeConfig {
    pub fn validate(&self) -> Result<()> {
        if self.edge_rule.degree < 3 {
            return Err(Error::InvalidParameter(format!(
                "edge rule must be exact to degree 3, got {}",
                self.edge_rule.degree
            )));
        }
        if !(self.flux.beta0.is_finite() && self.flux.beta1.is_finite()) {
            return Err(Error::InvalidParameter("flux coefficients must be finite".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy)]
struct EdgePoint {
    x: Point2,
    /// Quadrature weight times edge length.
    w: f64,
    left: (f64, f64),
    right: (f64, f64),
    /// Chord scale along the edge normal through this point.
    h_normal: f64,
}

#[derive(Debug, Clone)]
struct Interface {
    id: usize,
    left: usize,
    right: Option<usize>,
    normal: Point2,
    length: f64,
    h_mid: f64,
    points: Vec<EdgePoint>,
}

/// Block-sparse linear map on per-cell coefficient vectors, already
/// premultiplied by the inverse mass matrix.
#[derive(Debug, Clone)]
struct BlockMatrix {
    row_start: Vec<usize>,
    cols: Vec<usize>,
    blocks: Vec<[[f64; 6]; 6]>,
    /// Unscaled first row of each block over the cell area: the average
    /// rate, free of the cancellation in the inverse mass matrix.
    mean_rows: Vec<[f64; 6]>,
}

fn dot6(r: &[f64; 6], c: &[f64; 6]) -> f64 {
    r[0] * c[0] + r[1] * c[1] + r[2] * c[2] + r[3] * c[3] + r[4] * c[4] + r[5] * c[5]
}

impl BlockMatrix {
    fn apply(&self, polys: &[QuadraticPoly], out: &mut [[f64; 6]], means: &mut [f64]) {
        for (k, (o, m)) in out.iter_mut().zip(means.iter_mut()).enumerate() {
            for b in self.row_start[k]..self.row_start[k + 1] {
                let c = &polys[self.cols[b]].coeffs;
                let blk = &self.blocks[b];
                for i in 0..6 {
                    o[i] += dot6(&blk[i], c);
                }
                *m += dot6(&self.mean_rows[b], c);
            }
        }
    }
}

/// Spatial operator bound to a mesh, a problem and a scheme configuration.
pub struct SpatialOperator<'a> {
    mesh: &'a TriMesh,
    problem: &'a dyn Problem,
    cfg: SchemeConfig,
    interfaces: Vec<Interface>,
    /// Interfaces touching each cell.
    cell_interfaces: Vec<Vec<usize>>,
    linear: Option<BlockMatrix>,
}

#[derive(Debug, Clone, Copy, Default)]
struct SideEval {
    u: f64,
    grad: Point2,
}

fn eval_side(p: &QuadraticPoly, frame: &crate::mesh::CellFrame, b: (f64, f64)) -> SideEval {
    SideEval {
        u: p.eval_bary(b.0, b.1),
        grad: p.gradient_bary(frame, b.0, b.1),
    }
}

fn check(v: f64, what: &'static str, cell: usize) -> Result<f64> {
    if v.is_finite() {
        Ok(v)
    } else {
        Err(Error::NonFinite { what, cell })
    }
}

impl<'a> SpatialOperator<'a> {
    pub fn new(mesh: &'a TriMesh, problem: &'a dyn Problem, cfg: SchemeConfig) -> Result<Self> {
        cfg.validate()?;
        let scales = mesh.midpoint_scales()?;
        let mut interfaces = Vec::new();
        let mut cell_interfaces = vec![Vec::new(); mesh.num_cells()];
        for (id, e) in mesh.edges.iter().enumerate() {
            if !e.is_owner(id) {
                continue;
            }
            let mut points = Vec::with_capacity(cfg.edge_rule.len());
            for (s, w) in cfg.edge_rule.params().zip(&cfg.edge_rule.weights) {
                let x = e.point_at(mesh, s);
                let left = mesh.frames[e.left_cell].bary(x);
                let right = match e.right_cell {
                    Some(r) => {
                        let shifted = match e.boundary {
                            BoundaryTag::Periodic { .. } => x + e.shift,
                            _ => x,
                        };
                        mesh.frames[r].bary(shifted)
                    }
                    None => (0.0, 0.0),
                };
                let h_normal = match cfg.flux.scale_mode {
                    ScaleMode::GaussPoint => edge_length_scale(mesh, id, e.unit_normal, x)?,
                    _ => scales[id],
                };
                points.push(EdgePoint {
                    x,
                    w: w * e.length,
                    left,
                    right,
                    h_normal,
                });
            }
            let k = interfaces.len();
            cell_interfaces[e.left_cell].push(k);
            if let Some(r) = e.right_cell {
                if r != e.left_cell {
                    cell_interfaces[r].push(k);
                }
            }
            interfaces.push(Interface {
                id,
                left: e.left_cell,
                right: e.right_cell,
                normal: e.unit_normal,
                length: e.length,
                h_mid: scales[id],
                points,
            });
        }
        let mut op = SpatialOperator {
            mesh,
            problem,
            cfg,
            interfaces,
            cell_interfaces,
            linear: None,
        };
        if problem.constant_diffusion() {
            op.linear = Some(op.assemble_linear_diffusion()?);
        }
        Ok(op)
    }

    pub fn mesh(&self) -> &'a TriMesh {
        self.mesh
    }

    pub fn problem(&self) -> &'a dyn Problem {
        self.problem
    }

    pub fn config(&self) -> &SchemeConfig {
        &self.cfg
    }

    /// True when the diffusion part is applied as a precomputed matrix.
    pub fn is_linear(&self) -> bool {
        self.linear.is_some()
    }

    fn scale(&self, f: &Interface, q: usize, dir: Point2) -> Result<f64> {
        match self.cfg.flux.scale_mode {
            ScaleMode::EdgeNormal => Ok(f.h_mid),
            ScaleMode::EdgeLength => Ok(f.length),
            ScaleMode::GaussPoint => {
                if (dir - f.normal).norm() < 1e-12 {
                    Ok(f.points[q].h_normal)
                } else {
                    edge_length_scale(self.mesh, f.id, dir, f.points[q].x)
                }
            }
        }
    }

    /// Diffusion and interface-correction contributions of one interface.
    fn edge_diffusion(
        &self,
        f: &Interface,
        pl: &QuadraticPoly,
        pr: Option<&QuadraticPoly>,
        out_l: &mut [f64; 6],
        out_r: &mut [f64; 6],
    ) -> Result<()> {
        let mesh = self.mesh;
        let fl = &mesh.frames[f.left];
        let n = f.normal;
        for (q, pt) in f.points.iter().enumerate() {
            let l = eval_side(pl, fl, pt.left);
            let (r, fr) = match (pr, f.right) {
                (Some(p), Some(rc)) => {
                    let fr = &mesh.frames[rc];
                    (eval_side(p, fr, pt.right), Some(fr))
                }
                _ => (SideEval::default(), None),
            };
            let a = self.problem.diffusion(0.5 * (l.u + r.u));
            let (gamma, _) = gamma_vector(&a, n);
            let g = gamma.norm();
            let along = gamma.dot(n);
            let mut flux = 0.0;
            // subnormal γ has no usable direction and is treated as zero
            if g >= f64::MIN_POSITIVE {
                if along == 0.0 {
                    return Err(Error::InvalidParameter(format!(
                        "diffusion direction is tangent to edge {}",
                        f.id
                    )));
                }
                // orient the direction from the left cell to the right one;
                // an indefinite A at this state (γ·n < 0) flips the sign
                let sign = along.signum();
                let dir = gamma * (sign / g);
                let h = self.scale(f, q, dir)?;
                let inner = Trace {
                    u: l.u,
                    du: l.grad.dot(dir),
                    ddu: pl.second_directional(fl, dir),
                };
                let outer = match (pr, fr) {
                    (Some(p), Some(fr)) => Trace {
                        u: r.u,
                        du: r.grad.dot(dir),
                        ddu: p.second_directional(fr, dir),
                    },
                    _ => Trace::default(),
                };
                flux = sign * g * ddg_flux(&self.cfg.flux, &EdgeTracePair { inner, outer, scale: h })?;
            }
            let jump = r.u - l.u;
            let phi_l = basis_values(pt.left.0, pt.left.1);
            let grad_l = basis_gradients(fl, pt.left.0, pt.left.1);
            let al = if self.cfg.interface_correction {
                Some(self.problem.diffusion(l.u))
            } else {
                None
            };
            for i in 0..6 {
                let mut v = flux * phi_l[i];
                if let Some(al) = &al {
                    v -= interface_correction(jump, grad_l[i], al, n);
                }
                out_l[i] += pt.w * v;
            }
            if let (Some(fr), Some(_)) = (fr, pr) {
                let phi_r = basis_values(pt.right.0, pt.right.1);
                let grad_r = basis_gradients(fr, pt.right.0, pt.right.1);
                let ar = if self.cfg.interface_correction {
                    Some(self.problem.diffusion(r.u))
                } else {
                    None
                };
                for i in 0..6 {
                    let mut v = -flux * phi_r[i];
                    if let Some(ar) = &ar {
                        v -= interface_correction(-jump, grad_r[i], ar, -n);
                    }
                    out_r[i] += pt.w * v;
                }
            }
        }
        Ok(())
    }

    fn alpha(&self, conv: &dyn Convection, cell: usize, x: Point2, n: Point2, ul: f64, ur: f64, bounds: (f64, f64)) -> f64 {
        let speed = |u: f64| conv.speed(cell, x, u).dot(n).abs();
        match self.cfg.alpha_policy {
            AlphaPolicy::PerEdge => speed(ul).max(speed(ur)).max(speed(bounds.0)).max(speed(bounds.1)),
            AlphaPolicy::Global => (0..=32)
                .map(|i| speed(bounds.0 + (bounds.1 - bounds.0) * i as f64 / 32.0))
                .fold(0.0, f64::max),
        }
    }

    fn edge_convection(
        &self,
        conv: &dyn Convection,
        f: &Interface,
        pl: &QuadraticPoly,
        pr: Option<&QuadraticPoly>,
        bounds: (f64, f64),
        out_l: &mut [f64; 6],
        out_r: &mut [f64; 6],
    ) {
        let n = f.normal;
        for pt in &f.points {
            let ul = pl.eval_bary(pt.left.0, pt.left.1);
            let ur = pr.map_or(0.0, |p| p.eval_bary(pt.right.0, pt.right.1));
            let alpha = self.alpha(conv, f.left, pt.x, n, ul, ur, bounds);
            let flux = lax_friedrichs(|u| conv.flux(f.left, pt.x, u), ul, ur, n, alpha);
            let phi_l = basis_values(pt.left.0, pt.left.1);
            for i in 0..6 {
                out_l[i] -= pt.w * flux * phi_l[i];
            }
            if pr.is_some() && f.right.is_some() {
                let phi_r = basis_values(pt.right.0, pt.right.1);
                for i in 0..6 {
                    out_r[i] += pt.w * flux * phi_r[i];
                }
            }
        }
    }

    fn volume(&self, cell: usize, p: &QuadraticPoly, conv: Option<&dyn Convection>, diffusion: bool, out: &mut [f64; 6]) {
        let mesh = self.mesh;
        let frame = &mesh.frames[cell];
        let area = mesh.cells[cell].area;
        let tri = mesh.cell_points(cell);
        for (b, w) in self.cfg.volume_rule.points.iter().zip(&self.cfg.volume_rule.weights) {
            let (xi, eta) = (b[0], b[1]);
            let u = p.eval_bary(xi, eta);
            let grad_u = p.gradient_bary(frame, xi, eta);
            let mut vec = Point2::ZERO;
            if diffusion {
                vec = -self.problem.diffusion(u).apply(grad_u);
            }
            if let Some(c) = conv {
                let x = tri[0] * b[0] + tri[1] * b[1] + tri[2] * b[2];
                vec += c.flux(cell, x, u);
            }
            let grads = basis_gradients(frame, xi, eta);
            for i in 1..6 {
                out[i] += w * area * vec.dot(grads[i]);
            }
        }
    }

    fn assemble_linear_diffusion(&self) -> Result<BlockMatrix> {
        let nc = self.mesh.num_cells();
        let mut rows: Vec<Vec<(usize, [[f64; 6]; 6])>> = vec![Vec::new(); nc];
        let add = |rows: &mut Vec<Vec<(usize, [[f64; 6]; 6])>>, row: usize, col: usize, j: usize, v: &[f64; 6]| {
            let pos = match rows[row].iter().position(|(c, _)| *c == col) {
                Some(p) => p,
                None => {
                    rows[row].push((col, [[0.0; 6]; 6]));
                    rows[row].len() - 1
                }
            };
            for i in 0..6 {
                rows[row][pos].1[i][j] += v[i];
            }
        };
        let zero = QuadraticPoly::default();
        for f in &self.interfaces {
            for j in 0..6 {
                let mut unit = [0.0; 6];
                unit[j] = 1.0;
                let unit = QuadraticPoly::new(unit);
                let (mut ol, mut or) = ([0.0; 6], [0.0; 6]);
                self.edge_diffusion(f, &unit, f.right.map(|_| &zero), &mut ol, &mut or)?;
                add(&mut rows, f.left, f.left, j, &ol);
                if let Some(r) = f.right {
                    add(&mut rows, r, f.left, j, &or);
                    let (mut ol, mut or) = ([0.0; 6], [0.0; 6]);
                    self.edge_diffusion(f, &zero, Some(&unit), &mut ol, &mut or)?;
                    add(&mut rows, f.left, r, j, &ol);
                    add(&mut rows, r, r, j, &or);
                }
            }
        }
        for k in 0..nc {
            for j in 0..6 {
                let mut unit = [0.0; 6];
                unit[j] = 1.0;
                let mut out = [0.0; 6];
                self.volume(k, &QuadraticPoly::new(unit), None, true, &mut out);
                add(&mut rows, k, k, j, &out);
            }
        }
        let minv = inverse_mass_matrix();
        let mut row_start = Vec::with_capacity(nc + 1);
        let mut cols = Vec::new();
        let mut blocks = Vec::new();
        let mut mean_rows = Vec::new();
        row_start.push(0);
        for (k, mut row) in rows.into_iter().enumerate() {
            row.sort_by_key(|(c, _)| *c);
            let inv_area = 1.0 / self.mesh.cells[k].area;
            for (c, blk) in row {
                let mut scaled = [[0.0; 6]; 6];
                for i in 0..6 {
                    for j in 0..6 {
                        scaled[i][j] = (0..6).map(|m| minv[(i, m)] * blk[m][j]).sum::<f64>() * inv_area;
                    }
                }
                cols.push(c);
                blocks.push(scaled);
                mean_rows.push(blk[0].map(|v| v * inv_area));
            }
            row_start.push(cols.len());
        }
        Ok(BlockMatrix {
            row_start,
            cols,
            blocks,
            mean_rows,
        })
    }

    /// Unscaled residual `R_i` (before the mass solve), using `conv` as the
    /// convection flux in place of the problem's own.
    fn raw_residual(&self, field: &DgField, conv: Option<&dyn Convection>) -> Result<Vec<[f64; 6]>> {
        let nc = self.mesh.num_cells();
        let mut out = vec![[0.0; 6]; nc];
        let bounds = self.problem.bounds(field.time);
        let nonlinear = self.linear.is_none();
        for f in &self.interfaces {
            let pl = &field.polys[f.left];
            let pr = f.right.map(|r| &field.polys[r]);
            let (mut ol, mut or) = ([0.0; 6], [0.0; 6]);
            if nonlinear {
                self.edge_diffusion(f, pl, pr, &mut ol, &mut or)?;
            }
            if let Some(c) = conv {
                self.edge_convection(c, f, pl, pr, bounds, &mut ol, &mut or);
            }
            for i in 0..6 {
                out[f.left][i] += ol[i];
            }
            if let Some(r) = f.right {
                for i in 0..6 {
                    out[r][i] += or[i];
                }
            }
        }
        if nonlinear || conv.is_some() {
            for (k, o) in out.iter_mut().enumerate() {
                self.volume(k, &field.polys[k], conv, nonlinear, o);
            }
        }
        Ok(out)
    }

    /// Coefficient rates with an explicit convection flux (used by the
    /// vorticity transport, whose velocity changes every stage).
    pub fn residual_with(&self, field: &DgField, conv: Option<&dyn Convection>) -> Result<DgField> {
        if field.len() != self.mesh.num_cells() {
            return Err(Error::InvalidParameter(format!(
                "field has {} cells, mesh has {}",
                field.len(),
                self.mesh.num_cells()
            )));
        }
        let raw = self.raw_residual(field, conv)?;
        let minv = inverse_mass_matrix();
        let mut rates = vec![[0.0; 6]; raw.len()];
        let mut means = vec![0.0; raw.len()];
        for (k, (r, o)) in raw.iter().zip(rates.iter_mut()).enumerate() {
            let inv_area = 1.0 / self.mesh.cells[k].area;
            means[k] = r[0] * inv_area;
            for i in 0..6 {
                let mut s = 0.0;
                for m in 0..6 {
                    s += minv[(i, m)] * r[m];
                }
                o[i] = s * inv_area;
            }
        }
        if let Some(lin) = &self.linear {
            lin.apply(&field.polys, &mut rates, &mut means);
        }
        // average rate straight from the flux sum
        for (r, m) in rates.iter_mut().zip(&means) {
            r[0] += m - dot6(&BASIS_MEANS, r);
        }
        let mut polys = Vec::with_capacity(rates.len());
        for (k, r) in rates.into_iter().enumerate() {
            for v in r {
                check(v, "spatial residual", k)?;
            }
            polys.push(QuadraticPoly::new(r));
        }
        Ok(DgField { polys, time: field.time })
    }

    /// Time derivative of every cell's coefficients.
    pub fn residual(&self, field: &DgField) -> Result<DgField> {
        self.residual_with(field, self.problem.convection())
    }

    /// Rate of change of the average of `cell`: the edge fluxes divided by
    /// the cell area (test function `v ≡ 1`).
    pub fn average_rate(&self, field: &DgField, cell: usize) -> Result<f64> {
        self.average_rate_with(field, cell, self.problem.convection())
    }

    pub fn average_rate_with(&self, field: &DgField, cell: usize, conv: Option<&dyn Convection>) -> Result<f64> {
        let bounds = self.problem.bounds(field.time);
        let mut total = 0.0;
        for &k in &self.cell_interfaces[cell] {
            let f = &self.interfaces[k];
            let pl = &field.polys[f.left];
            let pr = f.right.map(|r| &field.polys[r]);
            let (mut ol, mut or) = ([0.0; 6], [0.0; 6]);
            self.edge_diffusion(f, pl, pr, &mut ol, &mut or)?;
            if let Some(c) = conv {
                self.edge_convection(c, f, pl, pr, bounds, &mut ol, &mut or);
            }
            if f.left == cell {
                total += ol[0];
            }
            if f.right == Some(cell) {
                total += or[0];
            }
        }
        check(total / self.mesh.cells[cell].area, "average rate", cell)
    }

    /// Largest `|F'(u)·n|` over all edges for `u` in the bounds.
    pub fn max_wave_speed(&self, conv: &dyn Convection, bounds: (f64, f64)) -> f64 {
        let mut alpha: f64 = 0.0;
        for f in &self.interfaces {
            for pt in &f.points {
                for i in 0..=8 {
                    let u = bounds.0 + (bounds.1 - bounds.0) * i as f64 / 8.0;
                    alpha = alpha.max(conv.speed(f.left, pt.x, u).dot(f.normal).abs());
                }
            }
        }
        alpha
    }
}
