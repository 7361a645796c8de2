use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::Result;
use crate::mesh::{generate_lattice, LatticeParams, Point2};
use crate::poly2::QuadraticPoly;
use crate::quadrature::{
    gauss_radau_3, mapped_vertex_rule, selected_point_weights, selected_weight_bounds, triangle_rule, SelectedPoints,
    VERTEX_WEIGHT,
};

/// Outcome of one quadrature verification.
#[derive(Debug, Clone, PartialEq)]
pub struct CheckLine {
    pub name: &'static str,
    pub passed: bool,
    pub detail: String,
}

fn random_triangle(rng: &mut ChaCha8Rng) -> [Point2; 3] {
    loop {
        let t = [(); 3].map(|_| Point2::new(rng.gen_range(-2.0..2.0), rng.gen_range(-2.0..2.0)));
        if (t[1] - t[0]).cross(t[2] - t[0]).abs() > 0.05 {
            return t;
        }
    }
}

fn monomial_check(rng: &mut ChaCha8Rng, triangles: usize) -> Result<CheckLine> {
    let rule = mapped_vertex_rule();
    let reference = triangle_rule(5)?;
    let mut worst: f64 = 0.0;
    for _ in 0..triangles {
        let tri = random_triangle(rng);
        let c = (tri[0] + tri[1] + tri[2]) * (1.0 / 3.0);
        for (a, b) in crate::poly2::EXPONENTS {
            let f = |p: Point2| (p.x - c.x).powi(a as i32) * (p.y - c.y).powi(b as i32);
            let got: f64 = rule.physical_points(tri).into_iter().zip(&rule.weights).map(|(p, w)| w * f(p)).sum();
            let want: f64 = reference
                .physical_points(tri)
                .into_iter()
                .zip(&reference.weights)
                .map(|(p, w)| w * f(p))
                .sum();
            worst = worst.max((got - want).abs());
        }
    }
    Ok(CheckLine {
        name: "mapped vertex rule exact on quadratics",
        passed: worst < 1e-13,
        detail: format!("{triangles} triangles, max error {worst:.2e}"),
    })
}

fn vertex_weight_check() -> CheckLine {
    let rule = mapped_vertex_rule();
    let mut ws = Vec::new();
    for v in [[1.0, 0.0, 0.0], [0.0, 1.0, 0.0], [0.0, 0.0, 1.0]] {
        let w: f64 = rule
            .points
            .iter()
            .zip(&rule.weights)
            .filter(|(p, _)| (0..3).all(|k| (p[k] - v[k]).abs() < 1e-14))
            .map(|(_, w)| w)
            .sum();
        ws.push(w);
    }
    let worst = ws.iter().map(|w| (w - VERTEX_WEIGHT).abs()).fold(0.0, f64::max);
    CheckLine {
        name: "vertex weight 2/81",
        passed: worst < 1e-15,
        detail: format!("weights {ws:?}"),
    }
}

fn radau_check() -> CheckLine {
    let r = gauss_radau_3();
    let s6 = 6f64.sqrt();
    let want = [1.0 / 9.0, (16.0 + s6) / 36.0, (16.0 - s6) / 36.0];
    let mut got = r.weights.clone();
    let mut expect = want.to_vec();
    got.sort_by(f64::total_cmp);
    expect.sort_by(f64::total_cmp);
    let worst = got.iter().zip(&expect).map(|(g, w)| (g - w).abs()).fold(0.0, f64::max);
    CheckLine {
        name: "Gauss-Radau weights",
        passed: worst < 1e-15,
        detail: format!("max deviation {worst:.2e}"),
    }
}

fn selected_weight_check(rng: &mut ChaCha8Rng, meshes: usize) -> Result<Vec<CheckLine>> {
    let mut worst_margin = f64::INFINITY;
    let mut min_weight = f64::INFINITY;
    let mut worst_exact: f64 = 0.0;
    let mut cells = 0;
    for _ in 0..meshes {
        let mesh = generate_lattice(
            LatticeParams {
                n: 3,
                jitter: 0.2,
                ..LatticeParams::default()
            },
            rng,
        )?;
        let scales = mesh.midpoint_scales()?;
        let (lo_vm, lo_half, lo_full) = selected_weight_bounds(mesh.theta_min, mesh.theta_max);
        for c in 0..mesh.num_cells() {
            cells += 1;
            let sel = SelectedPoints::new(&mesh, c, &scales);
            let w = selected_point_weights(&mesh, c, &sel)?;
            min_weight = min_weight.min(w.min_selected());
            for k in 0..3 {
                worst_margin = worst_margin
                    .min(w.vertices[k] - lo_vm)
                    .min(w.midpoints[k] - lo_vm)
                    .min(w.half[k] - lo_half)
                    .min(w.full[k] - lo_full);
            }
            let p = QuadraticPoly::new([(); 6].map(|_| rng.gen_range(-1.0..1.0)));
            let frame = &mesh.frames[c];
            worst_exact = worst_exact.max((w.average(|x| p.evaluate(frame, x)) - p.mean()).abs());
        }
    }
    Ok(vec![
        CheckLine {
            name: "selected-point weights positive",
            passed: min_weight > 0.0,
            detail: format!("{cells} cells on {meshes} meshes, smallest weight {min_weight:.4e}"),
        },
        CheckLine {
            name: "selected-point weights above angle bounds",
            passed: worst_margin >= -1e-15,
            detail: format!("smallest margin {worst_margin:.3e}"),
        },
        CheckLine {
            name: "selected-point rule exact on quadratics",
            passed: worst_exact < 1e-13,
            detail: format!("max error {worst_exact:.2e}"),
        },
    ])
}

/// Verification suite for the vertex-containing mapped rule and the
/// selected-point composite rule.
pub fn quadcheck(seed: u64) -> Result<Vec<CheckLine>> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut out = vec![monomial_check(&mut rng, 1000)?, vertex_weight_check(), radau_check()];
    out.extend(selected_weight_check(&mut rng, 100)?);
    Ok(out)
}
