//! Limiters: the bound-preserving linear scaling limiter and a TVB slope
//! limiter for convection-dominated runs.

use crate::error::{Error, Result};
use crate::mesh::{Point2, TriMesh};
use crate::poly2::{DgField, QuadraticPoly};
use crate::problems::Problem;

/// Averages outside the bounds by at most this much are clamped; beyond it
/// the step is rejected.
pub const AVERAGE_GUARD: f64 = 1e-11;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Bounds {
    pub lower: f64,
    pub upper: f64,
}

impl Bounds {
    pub fn new(lower: f64, upper: f64) -> Result<Self> {
        if !(lower < upper) {
            return Err(Error::InvalidParameter(format!("bounds [{lower}, {upper}] are empty")));
        }
        Ok(Bounds { lower, upper })
    }

    pub fn of(problem: &dyn Problem, t: f64) -> Result<Self> {
        let (m, mm) = problem.bounds(t);
        Bounds::new(m, mm)
    }
}

/// Scaling factor `θ` pulling the range `[lo, hi]` of a polynomial with
/// average `avg` into the bounds.
pub fn scaling_factor(avg: f64, lo: f64, hi: f64, b: Bounds) -> f64 {
    let mut theta: f64 = 1.0;
    if hi > b.upper {
        theta = theta.min(((b.upper - avg) / (hi - avg)).abs());
    }
    if lo < b.lower {
        theta = theta.min(((b.lower - avg) / (lo - avg)).abs());
    }
    theta
}

/// Limits one polynomial in place. Returns `θ`.
pub fn limit_poly(p: &mut QuadraticPoly, b: Bounds, cell: usize) -> Result<f64> {
    let mut avg = p.mean();
    if !avg.is_finite() {
        return Err(Error::NonFinite { what: "cell average", cell });
    }
    if avg < b.lower - AVERAGE_GUARD || avg > b.upper + AVERAGE_GUARD {
        return Err(Error::AverageOutOfBounds {
            cell,
            average: avg,
            lower: b.lower,
            upper: b.upper,
        });
    }
    if avg < b.lower || avg > b.upper {
        let target = avg.clamp(b.lower, b.upper);
        p.coeffs[0] += target - avg;
        avg = target;
    }
    let (lo, hi) = p.extrema();
    let theta = scaling_factor(avg, lo, hi, b);
    if theta < 1.0 {
        p.scale_about_mean(theta);
    }
    Ok(theta)
}

#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct LimitReport {
    /// Cells modified by the limiter.
    pub limited: usize,
    pub min_theta: f64,
}

/// Applies the scaling limiter to every cell.
pub fn mps_limit(field: &mut DgField, bounds: Bounds) -> Result<LimitReport> {
    let mut report = LimitReport {
        limited: 0,
        min_theta: 1.0,
    };
    for (k, p) in field.polys.iter_mut().enumerate() {
        let theta = limit_poly(p, bounds, k)?;
        if theta < 1.0 {
            report.limited += 1;
        }
        report.min_theta = report.min_theta.min(theta);
    }
    Ok(report)
}

#[derive(Debug, Clone, Copy, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct SlopeLimiterParams {
    pub gamma: f64,
    /// TVB constant: deviations below `m_tvb h²` are left alone.
    pub m_tvb: f64,
}

impl SlopeLimiterParams {
    pub fn validate(&self) -> Result<()> {
        if self.gamma >= 1.0 && self.m_tvb >= 0.0 {
            Ok(())
        } else {
            Err(Error::InvalidParameter(format!(
                "slope limiter needs gamma >= 1 and M >= 0, got ({}, {})",
                self.gamma, self.m_tvb
            )))
        }
    }
}

/// Which cell average a neighbor reference uses; `None` stands for the zero
/// ghost state outside a Dirichlet boundary.
type Neighbor = Option<usize>;

#[derive(Debug, Clone, Copy)]
struct MidpointStencil {
    /// `m_i - b_0 = a (b_p - b_0) + b (b_q - b_0)`.
    pair: [Neighbor; 2],
    coef: [f64; 2],
}

/// Triangle slope limiter with TVB modification.
#[derive(Debug, Clone)]
pub struct SlopeLimiter {
    params: SlopeLimiterParams,
    stencils: Vec<[MidpointStencil; 3]>,
    h2: Vec<f64>,
}

fn minmod(a: f64, b: f64) -> f64 {
    if a * b <= 0.0 {
        0.0
    } else if a > 0.0 {
        a.min(b)
    } else {
        a.max(b)
    }
}

fn solve2(u: Point2, v: Point2, r: Point2) -> Option<(f64, f64)> {
    let det = u.cross(v);
    if det.abs() < 1e-14 * u.norm() * v.norm() {
        return None;
    }
    Some((r.cross(v) / det, u.cross(r) / det))
}

impl SlopeLimiter {
    pub fn new(mesh: &TriMesh, params: SlopeLimiterParams) -> Result<Self> {
        params.validate()?;
        let mut stencils = Vec::with_capacity(mesh.num_cells());
        let mut h2 = Vec::with_capacity(mesh.num_cells());
        for k in 0..mesh.num_cells() {
            let b0 = mesh.centroid(k);
            let pts = mesh.cell_points(k);
            // neighbor centroids in this cell's coordinates
            let mut nb: [(Neighbor, Point2); 3] = [(None, Point2::ZERO); 3];
            for (l, slot) in nb.iter_mut().enumerate() {
                let e = &mesh.edges[mesh.cells[k].edge_ids[l]];
                let mid = (pts[l] + pts[(l + 1) % 3]) * 0.5;
                *slot = match mesh.cells[k].neighbor_ids[l] {
                    Some(n) => {
                        let shift = if e.left_cell == k && e.left_local == l { e.shift } else { -e.shift };
                        (Some(n), mesh.centroid(n) - shift)
                    }
                    None => (None, mid * 2.0 - b0),
                };
            }
            let mut cell = [MidpointStencil {
                pair: [None, None],
                coef: [0.0, 0.0],
            }; 3];
            for (l, st) in cell.iter_mut().enumerate() {
                let mid = (pts[l] + pts[(l + 1) % 3]) * 0.5;
                let r = mid - b0;
                let mut best: Option<(f64, MidpointStencil)> = None;
                for j in 0..3 {
                    if j == l {
                        continue;
                    }
                    let (a, b) = match solve2(nb[l].1 - b0, nb[j].1 - b0, r) {
                        Some(s) => s,
                        None => continue,
                    };
                    let violation = (-a).max(-b).max(0.0);
                    if best.is_none_or(|(v, _)| violation < v) {
                        best = Some((
                            violation,
                            MidpointStencil {
                                pair: [nb[l].0, nb[j].0],
                                coef: [a, b],
                            },
                        ));
                    }
                }
                *st = best
                    .map(|(_, s)| s)
                    .ok_or_else(|| Error::InvalidParameter(format!("degenerate slope stencil in cell {k}")))?;
            }
            stencils.push(cell);
            let d = mesh.cells[k].diameter;
            h2.push(d * d);
        }
        Ok(SlopeLimiter { params, stencils, h2 })
    }

    pub fn params(&self) -> SlopeLimiterParams {
        self.params
    }

    /// Limits every cell; returns the number of modified cells.
    pub fn apply(&self, field: &mut DgField) -> usize {
        let avg = field.averages();
        let neighbor_avg = |n: Neighbor| n.map_or(0.0, |i| avg[i]);
        let mids = [(0.5, 0.5), (0.0, 0.5), (0.5, 0.0)];
        let mut limited = 0;
        for (k, p) in field.polys.iter_mut().enumerate() {
            let u0 = avg[k];
            let mut dev = [0.0; 3];
            let mut changed = false;
            for l in 0..3 {
                let own = p.eval_bary(mids[l].0, mids[l].1) - u0;
                let st = &self.stencils[k][l];
                let reference = st.coef[0] * (neighbor_avg(st.pair[0]) - u0) + st.coef[1] * (neighbor_avg(st.pair[1]) - u0);
                dev[l] = if own.abs() <= self.params.m_tvb * self.h2[k] {
                    own
                } else {
                    minmod(own, self.params.gamma * reference)
                };
                if dev[l] != own {
                    changed = true;
                }
            }
            if !changed {
                continue;
            }
            let pos: f64 = dev.iter().map(|d| d.max(0.0)).sum();
            let neg: f64 = dev.iter().map(|d| (-d).max(0.0)).sum();
            if pos > 0.0 && neg > 0.0 {
                let tp = (neg / pos).min(1.0);
                let tn = (pos / neg).min(1.0);
                for d in &mut dev {
                    *d = tp * d.max(0.0) - tn * (-*d).max(0.0);
                }
            } else {
                dev = [0.0; 3];
            }
            let [p0, p1, p2] = dev.map(|d| u0 + d);
            let c1 = 2.0 * (p0 - p1);
            let c2 = 2.0 * (p0 - p2);
            let mut lin = QuadraticPoly::new([p1 + p2 - p0, c1, c2, 0.0, 0.0, 0.0]);
            // the midpoint construction preserves the mean exactly in exact
            // arithmetic; restore it bitwise
            lin.coeffs[0] += u0 - lin.mean();
            *p = lin;
            limited += 1;
        }
        limited
    }
}

/// A limiter applied to the state after every stage update.
pub trait Limiter {
    fn name(&self) -> &'static str;
    fn apply(&self, field: &mut DgField) -> Result<LimitReport>;
}

pub struct MpsLimiter<'a> {
    pub problem: &'a dyn Problem,
}

impl Limiter for MpsLimiter<'_> {
    fn name(&self) -> &'static str {
        "mps"
    }
    fn apply(&self, field: &mut DgField) -> Result<LimitReport> {
        mps_limit(field, Bounds::of(self.problem, field.time)?)
    }
}

impl Limiter for SlopeLimiter {
    fn name(&self) -> &'static str {
        "tvb-slope"
    }
    fn apply(&self, field: &mut DgField) -> Result<LimitReport> {
        let limited = SlopeLimiter::apply(self, field);
        Ok(LimitReport {
            limited,
            min_theta: 1.0,
        })
    }
}

/// Limiters applied in sequence.
#[derive(Default)]
pub struct LimiterChain<'a> {
    pub stages: Vec<Box<dyn Limiter + 'a>>,
}

impl<'a> LimiterChain<'a> {
    pub fn push(&mut self, l: Box<dyn Limiter + 'a>) {
        self.stages.push(l);
    }

    pub fn is_empty(&self) -> bool {
        self.stages.is_empty()
    }

    pub fn names(&self) -> Vec<&'static str> {
        self.stages.iter().map(|l| l.name()).collect()
    }

    pub fn apply(&self, field: &mut DgField) -> Result<()> {
        for l in &self.stages {
            l.apply(field)?;
        }
        Ok(())
    }
}

/// Everything a limiter constructor may need.
pub struct LimiterContext<'a> {
    pub mesh: &'a TriMesh,
    pub problem: &'a dyn Problem,
    pub slope: Option<SlopeLimiterParams>,
}

/// Builds a limiter by name: `mps` or `tvb-slope`.
pub fn limiter_by_name<'a>(name: &str, ctx: &LimiterContext<'a>) -> Result<Box<dyn Limiter + 'a>> {
    match name {
        "mps" => Ok(Box::new(MpsLimiter { problem: ctx.problem })),
        "tvb-slope" => {
            let params = ctx
                .slope
                .or_else(|| ctx.problem.slope_limiter())
                .unwrap_or(SlopeLimiterParams { gamma: 1.5, m_tvb: 5.0 });
            Ok(Box::new(SlopeLimiter::new(ctx.mesh, params)?))
        }
        other => Err(Error::Unknown {
            kind: "limiter",
            name: other.into(),
        }),
    }
}

pub const LIMITER_NAMES: [&str; 2] = ["mps", "tvb-slope"];
