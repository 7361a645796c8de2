//! Quadratic polynomials on a triangle.
//!
//! A [`QuadraticPoly`] stores six coefficients in the basis
//! `{1, ξ, η, ξ², ξη, η²}`, where `ξ` and `η` are the barycentric
//! coordinates attached to the first two vertices of the owning cell.
//! Because the basis is affine-invariant, the normalized mass matrix
//! `∫ φ_i φ_j / |K|` is the same for every cell.

use std::sync::OnceLock;

use nalgebra::{Matrix6, Vector6};

use crate::error::{Error, Result};
use crate::mesh::{CellFrame, Point2, TriMesh};
use crate::quadrature::QuadRule;

/// `(a, b)` exponents of `ξ^a η^b` for each basis function.
pub const EXPONENTS: [(u32, u32); 6] = [(0, 0), (1, 0), (0, 1), (2, 0), (1, 1), (0, 2)];

/// Cell averages of the basis functions.
pub const BASIS_MEANS: [f64; 6] = [1.0, 1.0 / 3.0, 1.0 / 3.0, 1.0 / 6.0, 1.0 / 12.0, 1.0 / 6.0];

fn factorial(n: u32) -> f64 {
    (1..=n).map(f64::from).product()
}

/// Cell average of `ξ^a η^b`.
pub fn monomial_mean(a: u32, b: u32) -> f64 {
    factorial(a) * factorial(b) * 2.0 / factorial(a + b + 2)
}

/// `∫ φ_i φ_j / |K|`.
pub fn mass_matrix() -> &'static Matrix6<f64> {
    static MASS: OnceLock<Matrix6<f64>> = OnceLock::new();
    MASS.get_or_init(|| {
        Matrix6::from_fn(|i, j| {
            let (a, b) = EXPONENTS[i];
            let (c, d) = EXPONENTS[j];
            monomial_mean(a + c, b + d)
        })
    })
}

pub fn inverse_mass_matrix() -> &'static Matrix6<f64> {
    static INV: OnceLock<Matrix6<f64>> = OnceLock::new();
    INV.get_or_init(|| {
        mass_matrix()
            .cholesky()
            .expect("reference mass matrix is positive definite")
            .inverse()
    })
}

#[inline]
pub fn basis_values(xi: f64, eta: f64) -> [f64; 6] {
    [1.0, xi, eta, xi * xi, xi * eta, eta * eta]
}

/// Gradients of the basis functions in physical coordinates.
#[inline]
pub fn basis_gradients(frame: &CellFrame, xi: f64, eta: f64) -> [Point2; 6] {
    let gx = frame.grad_xi;
    let ge = frame.grad_eta;
    [
        Point2::ZERO,
        gx,
        ge,
        gx * (2.0 * xi),
        gx * eta + ge * xi,
        ge * (2.0 * eta),
    ]
}

#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct QuadraticPoly {
    pub coeffs: [f64; 6],
}

impl QuadraticPoly {
    pub const fn new(coeffs: [f64; 6]) -> Self {
        QuadraticPoly { coeffs }
    }

    pub const fn constant(c: f64) -> Self {
        QuadraticPoly {
            coeffs: [c, 0.0, 0.0, 0.0, 0.0, 0.0],
        }
    }

    #[inline]
    pub fn eval_bary(&self, xi: f64, eta: f64) -> f64 {
        let c = &self.coeffs;
        c[0] + xi * (c[1] + c[3] * xi + c[4] * eta) + eta * (c[2] + c[5] * eta)
    }

    #[inline]
    pub fn evaluate(&self, frame: &CellFrame, p: Point2) -> f64 {
        let (xi, eta) = frame.bary(p);
        self.eval_bary(xi, eta)
    }

    /// `(∂/∂ξ, ∂/∂η)`.
    #[inline]
    pub fn bary_gradient(&self, xi: f64, eta: f64) -> (f64, f64) {
        let c = &self.coeffs;
        (
            c[1] + 2.0 * c[3] * xi + c[4] * eta,
            c[2] + c[4] * xi + 2.0 * c[5] * eta,
        )
    }

    #[inline]
    pub fn gradient_bary(&self, frame: &CellFrame, xi: f64, eta: f64) -> Point2 {
        let (dx, de) = self.bary_gradient(xi, eta);
        frame.grad_xi * dx + frame.grad_eta * de
    }

    pub fn gradient(&self, frame: &CellFrame, p: Point2) -> Point2 {
        let (xi, eta) = frame.bary(p);
        self.gradient_bary(frame, xi, eta)
    }

    /// `dᵀ (Hess p) d`, constant over the plane.
    #[inline]
    pub fn second_directional(&self, frame: &CellFrame, d: Point2) -> f64 {
        let c = &self.coeffs;
        let gx = frame.grad_xi.dot(d);
        let ge = frame.grad_eta.dot(d);
        2.0 * (c[3] * gx * gx + c[4] * gx * ge + c[5] * ge * ge)
    }

    /// `(∇p·d, dᵀ(Hess p)d)` at `p`; `d` need not be unit.
    pub fn directional_derivatives(&self, frame: &CellFrame, p: Point2, d: Point2) -> Result<(f64, f64)> {
        if d.x == 0.0 && d.y == 0.0 {
            return Err(Error::ZeroDirection);
        }
        Ok((self.gradient(frame, p).dot(d), self.second_directional(frame, d)))
    }

    pub fn mean(&self) -> f64 {
        self.coeffs.iter().zip(BASIS_MEANS).map(|(c, m)| c * m).sum()
    }

    /// Replaces `p` by `θ(p - p̄) + p̄`.
    pub fn scale_about_mean(&mut self, theta: f64) {
        let mean = self.mean();
        self.coeffs[0] = theta * self.coeffs[0] + (1.0 - theta) * mean;
        for c in &mut self.coeffs[1..] {
            *c *= theta;
        }
    }

    /// Exact minimum and maximum over the closed cell.
    pub fn extrema(&self) -> (f64, f64) {
        let c = &self.coeffs;
        let mut lo = f64::INFINITY;
        let mut hi = f64::NEG_INFINITY;
        let mut take = |v: f64| {
            lo = lo.min(v);
            hi = hi.max(v);
        };
        take(c[0]);
        take(c[0] + c[1] + c[3]);
        take(c[0] + c[2] + c[5]);
        // 1D restrictions q(s) = q0 + b s + a s², s ∈ (0, 1)
        let edges = [
            (c[0], c[1], c[3]),
            (c[0], c[2], c[5]),
            (c[0] + c[2] + c[5], c[1] - c[2] + c[4] - 2.0 * c[5], c[3] - c[4] + c[5]),
        ];
        for (q0, b, a) in edges {
            if a != 0.0 {
                let s = -b / (2.0 * a);
                if s > 0.0 && s < 1.0 {
                    take(q0 + s * (b + a * s));
                }
            }
        }
        let det = 4.0 * c[3] * c[5] - c[4] * c[4];
        let scale = c[3].abs().max(c[4].abs()).max(c[5].abs());
        if scale > 0.0 && det.abs() >= 1e-14 * scale * scale {
            let xi = (-c[1] * 2.0 * c[5] + c[2] * c[4]) / det;
            let eta = (-c[2] * 2.0 * c[3] + c[1] * c[4]) / det;
            if xi > 0.0 && eta > 0.0 && xi + eta < 1.0 {
                take(self.eval_bary(xi, eta));
            }
        }
        (lo, hi)
    }

    /// Coefficients from values of the polynomial's moments
    /// `rhs_i = ∫ f φ_i / |K|`.
    pub fn from_moments(rhs: [f64; 6]) -> Self {
        let c = inverse_mass_matrix() * Vector6::from(rhs);
        QuadraticPoly {
            coeffs: c.into(),
        }
    }

    /// L² projection of `f` onto the quadratics of a cell.
    pub fn l2_project(f: impl Fn(Point2) -> f64, tri: [Point2; 3], rule: &QuadRule) -> Self {
        let mut rhs = [0.0; 6];
        for (b, w) in rule.points.iter().zip(&rule.weights) {
            let x = tri[0] * b[0] + tri[1] * b[1] + tri[2] * b[2];
            let fx = f(x);
            for (r, phi) in rhs.iter_mut().zip(basis_values(b[0], b[1])) {
                *r += w * fx * phi;
            }
        }
        QuadraticPoly::from_moments(rhs)
    }
}

impl std::ops::Add for QuadraticPoly {
    type Output = QuadraticPoly;
    fn add(mut self, o: QuadraticPoly) -> QuadraticPoly {
        for (a, b) in self.coeffs.iter_mut().zip(o.coeffs) {
            *a += b;
        }
        self
    }
}

impl std::ops::Mul<f64> for QuadraticPoly {
    type Output = QuadraticPoly;
    fn mul(mut self, s: f64) -> QuadraticPoly {
        for a in &mut self.coeffs {
            *a *= s;
        }
        self
    }
}

/// The discrete solution: one quadratic per cell.
#[derive(Debug, Clone, PartialEq)]
pub struct DgField {
    pub polys: Vec<QuadraticPoly>,
    pub time: f64,
}

impl DgField {
    pub fn zeros(n: usize) -> Self {
        DgField {
            polys: vec![QuadraticPoly::default(); n],
            time: 0.0,
        }
    }

    pub fn constant(n: usize, c: f64) -> Self {
        DgField {
            polys: vec![QuadraticPoly::constant(c); n],
            time: 0.0,
        }
    }

    pub fn project(mesh: &TriMesh, f: impl Fn(Point2) -> f64, rule: &QuadRule) -> Self {
        let polys = (0..mesh.num_cells())
            .map(|c| QuadraticPoly::l2_project(&f, mesh.cell_points(c), rule))
            .collect();
        DgField { polys, time: 0.0 }
    }

    pub fn len(&self) -> usize {
        self.polys.len()
    }

    pub fn is_empty(&self) -> bool {
        self.polys.is_empty()
    }

    pub fn averages(&self) -> Vec<f64> {
        self.polys.iter().map(QuadraticPoly::mean).collect()
    }

    /// `Σ |K| ū_K`, with compensated summation so that drift measurements
    /// are not swamped by the rounding of the sum itself.
    pub fn total_mass(&self, mesh: &TriMesh) -> f64 {
        let (mut sum, mut comp) = (0.0f64, 0.0f64);
        for (p, c) in self.polys.iter().zip(&mesh.cells) {
            let x = c.area * p.mean();
            let t = sum + x;
            comp += if sum.abs() >= x.abs() { (sum - t) + x } else { (x - t) + sum };
            sum = t;
        }
        sum + comp
    }

    /// Global minimum and maximum via exact per-cell extrema.
    pub fn extrema(&self) -> (f64, f64) {
        self.polys.iter().fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), p| {
            let (a, b) = p.extrema();
            (lo.min(a), hi.max(b))
        })
    }

    /// `self ← a·self + b·other`.
    pub fn combine(&mut self, a: f64, other: &DgField, b: f64) {
        for (p, q) in self.polys.iter_mut().zip(&other.polys) {
            for (x, y) in p.coeffs.iter_mut().zip(q.coeffs) {
                *x = a * *x + b * y;
            }
        }
    }

    pub fn is_finite(&self) -> bool {
        self.polys.iter().all(|p| p.coeffs.iter().all(|c| c.is_finite()))
    }
}
