//! Problem catalog. Each problem supplies the convection flux, diffusion
//! matrix, initial data, boundary type, bounds and (when known) the exact
//! solution. Problems are looked up by name through [`ProblemRegistry`].

use std::f64::consts::PI;

use crate::error::{Error, Result};
use crate::flux::Mat2;
use crate::limiter::SlopeLimiterParams;
use crate::mesh::{Point2, Rect};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum BoundaryKind {
    Periodic,
    DirichletZero,
}

/// Convection flux `F(u)`, possibly varying in space (transport by a
/// velocity field). `cell` identifies the cell whose data are used to
/// evaluate space-dependent coefficients at `x`.
pub trait Convection: Sync {
    fn flux(&self, cell: usize, x: Point2, u: f64) -> Point2;
    /// `F'(u)`.
    fn speed(&self, cell: usize, x: Point2, u: f64) -> Point2;
}

pub trait Problem: Send + Sync {
    fn name(&self) -> &'static str;
    fn domain(&self) -> Rect;
    fn boundary(&self) -> BoundaryKind;
    fn diffusion(&self, u: f64) -> Mat2;
    /// True when the diffusion matrix does not depend on `u`.
    fn constant_diffusion(&self) -> bool {
        false
    }
    /// Solution-dependent convection. Transport problems driven by the
    /// stream function return `None` here; see [`Problem::vorticity_transport`].
    fn convection(&self) -> Option<&dyn Convection> {
        None
    }
    /// True when the convection velocity comes from a stream-function solve.
    fn vorticity_transport(&self) -> bool {
        false
    }
    fn initial(&self, x: Point2) -> f64;
    fn exact(&self, _x: Point2, _t: f64) -> Option<f64> {
        None
    }
    /// Admissible interval `[m(t), M(t)]`.
    fn bounds(&self, t: f64) -> (f64, f64);
    fn slope_limiter(&self) -> Option<SlopeLimiterParams> {
        None
    }
    /// Default final time of the experiment.
    fn final_time(&self) -> f64;

    /// Largest spectral radius of `A(u)` for `u` in `[lo, hi]`, by sampling.
    fn diffusion_bound(&self, lo: f64, hi: f64) -> f64 {
        (0..=64)
            .map(|i| {
                let u = lo + (hi - lo) * i as f64 / 64.0;
                self.diffusion(u).spectral_radius()
            })
            .fold(0.0, f64::max)
    }
}

/// `u_t = ε Δu` on the periodic unit square.
#[derive(Debug, Clone, Copy)]
pub struct LinearDiffusion {
    pub epsilon: f64,
}

impl LinearDiffusion {
    pub fn amplitude(&self, t: f64) -> f64 {
        (-8.0 * PI * PI * self.epsilon * t).exp()
    }
}

impl Problem for LinearDiffusion {
    fn name(&self) -> &'static str {
        "heat"
    }
    fn domain(&self) -> Rect {
        Rect::UNIT
    }
    fn boundary(&self) -> BoundaryKind {
        BoundaryKind::Periodic
    }
    fn diffusion(&self, _u: f64) -> Mat2 {
        Mat2::scalar(self.epsilon)
    }
    fn constant_diffusion(&self) -> bool {
        true
    }
    fn initial(&self, x: Point2) -> f64 {
        (2.0 * PI * (x.x + x.y)).sin()
    }
    fn exact(&self, x: Point2, t: f64) -> Option<f64> {
        Some(self.amplitude(t) * self.initial(x))
    }
    fn bounds(&self, t: f64) -> (f64, f64) {
        let a = self.amplitude(t);
        (-a, a)
    }
    fn final_time(&self) -> f64 {
        1e-4
    }
}

/// `u_t = ∇·((1 + u) ∇u)` on the periodic unit square, data in `[0, 1]`.
/// Used to exercise the nonlinear bound-preservation result.
#[derive(Debug, Clone, Copy)]
pub struct NonlinearDiffusion;

impl Problem for NonlinearDiffusion {
    fn name(&self) -> &'static str {
        "nonlinear-heat"
    }
    fn domain(&self) -> Rect {
        Rect::UNIT
    }
    fn boundary(&self) -> BoundaryKind {
        BoundaryKind::Periodic
    }
    fn diffusion(&self, u: f64) -> Mat2 {
        Mat2::scalar(1.0 + u)
    }
    fn initial(&self, x: Point2) -> f64 {
        0.5 + 0.5 * (2.0 * PI * x.x).sin() * (2.0 * PI * x.y).sin()
    }
    fn bounds(&self, _t: f64) -> (f64, f64) {
        (0.0, 1.0)
    }
    fn final_time(&self) -> f64 {
        1e-3
    }
}

/// `u_t = Δ(u²)` on `[-10, 10]²` with two unit disks of data.
#[derive(Debug, Clone, Copy)]
pub struct PorousMedium;

impl Problem for PorousMedium {
    fn name(&self) -> &'static str {
        "porous"
    }
    fn domain(&self) -> Rect {
        Rect::square(-10.0, 10.0)
    }
    fn boundary(&self) -> BoundaryKind {
        BoundaryKind::DirichletZero
    }
    fn diffusion(&self, u: f64) -> Mat2 {
        Mat2::scalar(2.0 * u)
    }
    fn initial(&self, x: Point2) -> f64 {
        let d1 = (x.x - 2.0).powi(2) + (x.y + 2.0).powi(2);
        let d2 = (x.x + 2.0).powi(2) + (x.y - 2.0).powi(2);
        if d1 < 6.0 || d2 < 6.0 {
            1.0
        } else {
            0.0
        }
    }
    fn bounds(&self, _t: f64) -> (f64, f64) {
        (0.0, 1.0)
    }
    fn final_time(&self) -> f64 {
        2.0
    }
}

/// `f = g = u²`.
#[derive(Debug, Clone, Copy)]
pub struct Burgers2d;

impl Convection for Burgers2d {
    fn flux(&self, _cell: usize, _x: Point2, u: f64) -> Point2 {
        Point2::new(u * u, u * u)
    }
    fn speed(&self, _cell: usize, _x: Point2, u: f64) -> Point2 {
        Point2::new(2.0 * u, 2.0 * u)
    }
}

/// `u_t + (u²)_x + (u²)_y = ε ∇·(ν(u) ∇u)` with `ν` vanishing on
/// `|u| ≤ 1/4`.
#[derive(Debug, Clone, Copy)]
pub struct StronglyDegenerate {
    pub epsilon: f64,
}

impl StronglyDegenerate {
    pub fn nu(u: f64) -> f64 {
        if u.abs() <= 0.25 {
            0.0
        } else {
            1.0
        }
    }
}

impl Problem for StronglyDegenerate {
    fn name(&self) -> &'static str {
        "sdp"
    }
    fn domain(&self) -> Rect {
        Rect::square(-1.5, 1.5)
    }
    fn boundary(&self) -> BoundaryKind {
        BoundaryKind::DirichletZero
    }
    fn diffusion(&self, u: f64) -> Mat2 {
        Mat2::scalar(self.epsilon * Self::nu(u))
    }
    fn convection(&self) -> Option<&dyn Convection> {
        Some(&Burgers2d)
    }
    fn initial(&self, x: Point2) -> f64 {
        if (x.x + 0.5).powi(2) + (x.y + 0.5).powi(2) < 0.16 {
            1.0
        } else if (x.x - 0.5).powi(2) + (x.y - 0.5).powi(2) < 0.16 {
            -1.0
        } else {
            0.0
        }
    }
    fn bounds(&self, _t: f64) -> (f64, f64) {
        (-1.0, 1.0)
    }
    fn slope_limiter(&self) -> Option<SlopeLimiterParams> {
        Some(SlopeLimiterParams { gamma: 1.5, m_tvb: 5.0 })
    }
    fn final_time(&self) -> f64 {
        0.5
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum VorticityCase {
    /// Decaying Taylor-Green vorticity with an exact solution.
    Accuracy,
    /// Two rectangular patches of opposite sign.
    VortexPatch,
}

/// Vorticity transport `w_t + ∇·(V w) = Δw / Re`, `V = (-φ_y, φ_x)`,
/// `Δφ = w`, on the periodic square `[0, 2π]²`.
#[derive(Debug, Clone, Copy)]
pub struct Vorticity {
    pub reynolds: f64,
    pub case: VorticityCase,
}

impl Vorticity {
    fn decay(&self, t: f64) -> f64 {
        (-2.0 * t / self.reynolds).exp()
    }
}

impl Problem for Vorticity {
    fn name(&self) -> &'static str {
        match self.case {
            VorticityCase::Accuracy => "ns-accuracy",
            VorticityCase::VortexPatch => "ns-vortex",
        }
    }
    fn domain(&self) -> Rect {
        Rect::square(0.0, 2.0 * PI)
    }
    fn boundary(&self) -> BoundaryKind {
        BoundaryKind::Periodic
    }
    fn diffusion(&self, _u: f64) -> Mat2 {
        Mat2::scalar(1.0 / self.reynolds)
    }
    fn constant_diffusion(&self) -> bool {
        true
    }
    fn vorticity_transport(&self) -> bool {
        true
    }
    fn initial(&self, x: Point2) -> f64 {
        match self.case {
            VorticityCase::Accuracy => -2.0 * x.x.sin() * x.y.sin(),
            VorticityCase::VortexPatch => {
                let in_x = (0.5 * PI..=1.5 * PI).contains(&x.x);
                if in_x && (0.25 * PI..=0.75 * PI).contains(&x.y) {
                    -1.0
                } else if in_x && (1.25 * PI..=1.75 * PI).contains(&x.y) {
                    1.0
                } else {
                    0.0
                }
            }
        }
    }
    fn exact(&self, x: Point2, t: f64) -> Option<f64> {
        match self.case {
            VorticityCase::Accuracy => Some(self.initial(x) * self.decay(t)),
            VorticityCase::VortexPatch => None,
        }
    }
    fn bounds(&self, t: f64) -> (f64, f64) {
        match self.case {
            VorticityCase::Accuracy => {
                let a = 2.0 * self.decay(t);
                (-a, a)
            }
            VorticityCase::VortexPatch => (-1.0, 1.0),
        }
    }
    fn final_time(&self) -> f64 {
        0.1
    }
}

/// Optional numeric parameters shared by the problem constructors.
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct ProblemParams {
    pub epsilon: Option<f64>,
    pub reynolds: Option<f64>,
}

type Constructor = fn(&ProblemParams) -> Result<Box<dyn Problem>>;

pub struct ProblemEntry {
    pub name: &'static str,
    pub summary: &'static str,
    build: Constructor,
}

/// Name-indexed catalog of problems.
pub struct ProblemRegistry {
    entries: Vec<ProblemEntry>,
}

fn positive(name: &str, v: f64) -> Result<f64> {
    if v > 0.0 && v.is_finite() {
        Ok(v)
    } else {
        Err(Error::InvalidParameter(format!("{name} must be positive, got {v}")))
    }
}

impl ProblemRegistry {
    pub fn empty() -> Self {
        ProblemRegistry { entries: Vec::new() }
    }

    pub fn register(&mut self, name: &'static str, summary: &'static str, build: Constructor) {
        self.entries.retain(|e| e.name != name);
        self.entries.push(ProblemEntry { name, summary, build });
    }

    pub fn names(&self) -> Vec<&'static str> {
        self.entries.iter().map(|e| e.name).collect()
    }

    pub fn entries(&self) -> &[ProblemEntry] {
        &self.entries
    }

    pub fn create(&self, name: &str, params: &ProblemParams) -> Result<Box<dyn Problem>> {
        let entry = self.entries.iter().find(|e| e.name == name).ok_or_else(|| Error::Unknown {
            kind: "problem",
            name: name.to_string(),
        })?;
        (entry.build)(params)
    }
}

impl Default for ProblemRegistry {
    fn default() -> Self {
        let mut r = ProblemRegistry::empty();
        r.register("heat", "linear diffusion, periodic unit square", |p| {
            let epsilon = positive("epsilon", p.epsilon.unwrap_or(1.0))?;
            Ok(Box::new(LinearDiffusion { epsilon }))
        });
        r.register("nonlinear-heat", "diffusion with A(u) = (1+u)I", |_| {
            Ok(Box::new(NonlinearDiffusion))
        });
        r.register("porous", "porous medium equation u_t = Δ(u²)", |_| Ok(Box::new(PorousMedium)));
        r.register("sdp", "strongly degenerate convection-diffusion", |p| {
            let epsilon = positive("epsilon", p.epsilon.unwrap_or(0.1))?;
            Ok(Box::new(StronglyDegenerate { epsilon }))
        });
        r.register("ns-accuracy", "vorticity transport with exact decay", |p| {
            let reynolds = positive("reynolds", p.reynolds.unwrap_or(100.0))?;
            Ok(Box::new(Vorticity { reynolds, case: VorticityCase::Accuracy }))
        });
        r.register("ns-vortex", "vorticity transport, vortex patches", |p| {
            let reynolds = positive("reynolds", p.reynolds.unwrap_or(100.0))?;
            Ok(Box::new(Vorticity { reynolds, case: VorticityCase::VortexPatch }))
        });
        r
    }
}

/// Looks up a problem in the default catalog.
pub fn problem_by_name(name: &str, params: &ProblemParams) -> Result<Box<dyn Problem>> {
    ProblemRegistry::default().create(name, params)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::flux::gamma_vector;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn heat_examples() {
        let p = LinearDiffusion { epsilon: 1.0 };
        let x = Point2::new(0.3, 0.1);
        assert_eq!(p.exact(x, 0.0).unwrap(), (2.0 * PI * 0.4).sin());
        assert!((p.amplitude(1e-4) - (-8.0 * PI * PI * 1e-4f64).exp()).abs() < 1e-16);
        assert!((p.amplitude(1e-4) - 0.992_136).abs() < 1e-6);
        let (m, mm) = p.bounds(0.37);
        assert_eq!(m, -mm);
    }

    #[test]
    fn porous_examples() {
        let p = PorousMedium;
        assert_eq!(p.diffusion(0.0), Mat2::scalar(0.0));
        assert_eq!(p.initial(Point2::new(2.0, -2.0)), 1.0);
        assert_eq!(p.initial(Point2::new(0.0, 0.0)), 0.0);
    }

    #[test]
    fn sdp_examples() {
        assert_eq!(StronglyDegenerate::nu(0.25), 0.0);
        assert_eq!(StronglyDegenerate::nu(0.251), 1.0);
        let p = StronglyDegenerate { epsilon: 0.1 };
        assert_eq!(p.initial(Point2::new(-0.5, -0.5)), 1.0);
        assert_eq!(p.initial(Point2::new(0.5, 0.5)), -1.0);
        let n = Point2::new(1.0, 1.0).normalized();
        let conv = p.convection().unwrap();
        let alpha = [-1.0f64, 1.0]
            .iter()
            .map(|&u| conv.speed(0, Point2::ZERO, u).dot(n).abs())
            .fold(0.0, f64::max);
        assert!((alpha - 2.0 * 2f64.sqrt()).abs() < 1e-14);
    }

    #[test]
    fn vorticity_examples() {
        let p = Vorticity { reynolds: 100.0, case: VorticityCase::Accuracy };
        assert!((p.bounds(0.1).1 - 2.0 * (-0.002f64).exp()).abs() < 1e-15);
        assert!((p.bounds(0.1).1 - 1.996).abs() < 1e-3);
        let v = Vorticity { reynolds: 100.0, case: VorticityCase::VortexPatch };
        assert_eq!(v.initial(Point2::new(PI, 0.5 * PI)), -1.0);
        assert_eq!(v.initial(Point2::new(PI, 1.5 * PI)), 1.0);
    }

    #[test]
    fn exact_solutions_satisfy_their_equations() {
        let mut rng = ChaCha8Rng::seed_from_u64(21);
        let heat = LinearDiffusion { epsilon: 1.0 };
        let ns = Vorticity { reynolds: 100.0, case: VorticityCase::Accuracy };
        let h = 1e-4;
        for _ in 0..100 {
            let x = Point2::new(rng.gen_range(0.0..1.0), rng.gen_range(0.0..1.0));
            let t = rng.gen_range(0.0..1e-3);
            let u = |x: Point2, t: f64| heat.exact(x, t).unwrap();
            let ut = (u(x, t + h) - u(x, t - h)) / (2.0 * h);
            let lap = (u(x + Point2::new(h, 0.0), t) + u(x - Point2::new(h, 0.0), t)
                + u(x + Point2::new(0.0, h), t)
                + u(x - Point2::new(0.0, h), t)
                - 4.0 * u(x, t))
                / (h * h);
            assert!((ut - lap).abs() < 1e-4 * 8.0 * PI * PI);

            let x = x * (2.0 * PI);
            let t = rng.gen_range(0.0..1.0);
            let w = |x: Point2, t: f64| ns.exact(x, t).unwrap();
            // stream function solving Δφ = w, and its velocity (-φ_y, φ_x)
            let decay = (-2.0 * t / ns.reynolds).exp();
            let vel = Point2::new(-x.x.sin() * x.y.cos(), x.x.cos() * x.y.sin()) * decay;
            let wt = (w(x, t + h) - w(x, t - h)) / (2.0 * h);
            let wx = (w(x + Point2::new(h, 0.0), t) - w(x - Point2::new(h, 0.0), t)) / (2.0 * h);
            let wy = (w(x + Point2::new(0.0, h), t) - w(x - Point2::new(0.0, h), t)) / (2.0 * h);
            let lap = (w(x + Point2::new(h, 0.0), t) + w(x - Point2::new(h, 0.0), t)
                + w(x + Point2::new(0.0, h), t)
                + w(x - Point2::new(0.0, h), t)
                - 4.0 * w(x, t))
                / (h * h);
            let residual = wt + vel.x * wx + vel.y * wy - lap / ns.reynolds;
            assert!(residual.abs() < 1e-4 * 2.0);
        }
    }

    #[test]
    fn diffusion_is_semidefinite_within_bounds() {
        let mut rng = ChaCha8Rng::seed_from_u64(22);
        let reg = ProblemRegistry::default();
        for name in reg.names() {
            let p = reg.create(name, &ProblemParams::default()).unwrap();
            let (lo, hi) = p.bounds(0.0);
            for _ in 0..200 {
                let u = rng.gen_range(lo..=hi);
                let phi: f64 = rng.gen_range(0.0..2.0 * PI);
                let n = Point2::new(phi.cos(), phi.sin());
                let a = p.diffusion(u);
                assert!(a.is_symmetric());
                assert!(gamma_vector(&a, n).0.dot(n) >= 0.0, "{name}");
            }
        }
    }

    #[test]
    fn registry_lookup() {
        assert!(problem_by_name("heat", &ProblemParams { epsilon: Some(0.5), ..Default::default() }).is_ok());
        assert!(matches!(
            problem_by_name("nope", &ProblemParams::default()),
            Err(Error::Unknown { kind: "problem", .. })
        ));
        assert!(problem_by_name("heat", &ProblemParams { epsilon: Some(-1.0), ..Default::default() }).is_err());
    }
}
