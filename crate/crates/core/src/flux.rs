//! Interface fluxes: the direct DG diffusion flux, the interface correction
//! and the Lax-Friedrichs convection flux.

use crate::error::{Error, Result};
use crate::mesh::Point2;

/// How the flux length scale `h` is chosen on an edge.
#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ScaleMode {
    /// Normal-line chord at the edge midpoint, shared by all points of the edge.
    EdgeNormal,
    /// Chord along the flux direction through each quadrature point.
    GaussPoint,
    /// Edge length.
    EdgeLength,
}

impl std::str::FromStr for ScaleMode {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "edge-normal" => Ok(ScaleMode::EdgeNormal),
            "gauss-point" => Ok(ScaleMode::GaussPoint),
            "edge-length" => Ok(ScaleMode::EdgeLength),
            other => Err(Error::Unknown {
                kind: "scale mode",
                name: other.into(),
            }),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FluxParams {
    pub beta0: f64,
    pub beta1: f64,
    pub scale_mode: ScaleMode,
}

impl FluxParams {
    pub fn new(beta0: f64, beta1: f64, scale_mode: ScaleMode) -> Self {
        FluxParams {
            beta0,
            beta1,
            scale_mode,
        }
    }
}

impl Default for FluxParams {
    fn default() -> Self {
        FluxParams::new(5.0, 0.125, ScaleMode::EdgeNormal)
    }
}

/// Value and first/second derivatives along the flux direction.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct Trace {
    pub u: f64,
    pub du: f64,
    pub ddu: f64,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EdgeTracePair {
    pub inner: Trace,
    pub outer: Trace,
    pub scale: f64,
}

/// `β0 [u]/h + avg(u_γ) + β1 h [u_γγ]` with jumps taken outer minus inner.
pub fn ddg_flux(params: &FluxParams, pair: &EdgeTracePair) -> Result<f64> {
    let h = pair.scale;
    if !(h > 0.0) {
        return Err(Error::NonpositiveScale(h));
    }
    Ok(params.beta0 * (pair.outer.u - pair.inner.u) / h
        + 0.5 * (pair.inner.du + pair.outer.du)
        + params.beta1 * h * (pair.outer.ddu - pair.inner.ddu))
}

/// A 2×2 matrix, row-major.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Mat2(pub [[f64; 2]; 2]);

impl Mat2 {
    pub fn scalar(s: f64) -> Self {
        Mat2([[s, 0.0], [0.0, s]])
    }

    pub fn diag(a: f64, b: f64) -> Self {
        Mat2([[a, 0.0], [0.0, b]])
    }

    pub fn apply(&self, v: Point2) -> Point2 {
        let m = &self.0;
        Point2::new(m[0][0] * v.x + m[0][1] * v.y, m[1][0] * v.x + m[1][1] * v.y)
    }

    pub fn transpose_apply(&self, v: Point2) -> Point2 {
        let m = &self.0;
        Point2::new(m[0][0] * v.x + m[1][0] * v.y, m[0][1] * v.x + m[1][1] * v.y)
    }

    pub fn is_symmetric(&self) -> bool {
        (self.0[0][1] - self.0[1][0]).abs() <= 1e-14 * (self.0[0][1].abs() + 1.0)
    }

    /// Largest eigenvalue modulus of a symmetric matrix.
    pub fn spectral_radius(&self) -> f64 {
        let [[a, b], [_, d]] = self.0;
        let mean = 0.5 * (a + d);
        let r = (0.25 * (a - d) * (a - d) + b * b).sqrt();
        (mean + r).abs().max((mean - r).abs())
    }
}

/// `γ = Aᵀ n`, with a flag reporting whether `γ·n > 0`.
pub fn gamma_vector(a: &Mat2, n: Point2) -> (Point2, bool) {
    let g = a.transpose_apply(n);
    (g, g.dot(n) > 0.0)
}

/// `½ (A ∇v)·n [u]`, the extra edge term of the corrected scheme seen from
/// the cell owning the test function `v`.
pub fn interface_correction(u_jump: f64, test_grad: Point2, a_inner: &Mat2, n: Point2) -> f64 {
    0.5 * a_inner.apply(test_grad).dot(n) * u_jump
}

/// `½ (F(u⁻)·n + F(u⁺)·n - α (u⁺ - u⁻))`.
pub fn lax_friedrichs(f: impl Fn(f64) -> Point2, u_inner: f64, u_outer: f64, n: Point2, alpha: f64) -> f64 {
    0.5 * (f(u_inner).dot(n) + f(u_outer).dot(n) - alpha * (u_outer - u_inner))
}

/// Which monotonicity theorem a parameter pair is checked against.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Regime {
    Linear,
    Nonlinear,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Validation {
    pub ok: bool,
    pub message: String,
}

/// Checks `(β0, β1)` against the admissible ranges of the linear or
/// nonlinear bound-preservation result. Never fails; the caller decides.
pub fn validate_params(params: &FluxParams, regime: Regime) -> Validation {
    let FluxParams { beta0, beta1, .. } = *params;
    let tol = 1e-14;
    let mut problems = Vec::new();
    if beta1 < 0.125 - tol || beta1 > 0.25 + tol {
        problems.push(format!("beta1 = {beta1} outside [1/8, 1/4]"));
    }
    let floor = match regime {
        Regime::Linear => 2.25 - 6.0 * beta1,
        Regime::Nonlinear => 1.5 - 4.0 * beta1,
    };
    if beta0 < floor - tol {
        problems.push(format!("beta0 = {beta0} below {floor}"));
    }
    if problems.is_empty() {
        Validation {
            ok: true,
            message: format!("({beta0}, {beta1}) admissible for {regime:?} diffusion"),
        }
    } else {
        Validation {
            ok: false,
            message: problems.join("; "),
        }
    }
}

/// Edge integral of the diffusion flux written through point values on
/// the normal-line stencils.
///
/// `inner` and `outer` hold, for the two cells, the values at the two edge
/// endpoints, the midpoint, and the points at distance `h/2` and `h` from
/// the midpoint along the normal into that cell. `length` is the edge
/// length and `h` the midpoint normal scale.
pub fn stencil_edge_integral(params: &FluxParams, length: f64, h: f64, inner: [f64; 5], outer: [f64; 5]) -> f64 {
    let (b0, b1) = (params.beta0, params.beta1);
    let r = length / h;
    let jump = b0 * r / 6.0 * ((outer[0] + outer[1] + 4.0 * outer[2]) - (inner[0] + inner[1] + 4.0 * inner[2]));
    let avg = 0.5 * r * ((-3.0 * outer[2] - outer[4] + 4.0 * outer[3]) + (3.0 * inner[2] + inner[4] - 4.0 * inner[3]));
    let second = 4.0 * b1 * r * ((outer[2] + outer[4] - 2.0 * outer[3]) - (inner[2] + inner[4] - 2.0 * inner[3]));
    jump + avg + second
}
