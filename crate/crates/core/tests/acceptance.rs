//! Acceptance suite: one PASS/FAIL line per criterion.
//!
//! Run with `cargo test --release -p mpsddg --test acceptance -- --nocapture`
//! to see the lines.

use std::f64::consts::PI;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use mpsddg::assembly::{SchemeConfig, SpatialOperator};
use mpsddg::flux::{ddg_flux, stencil_edge_integral, EdgeTracePair, FluxParams, ScaleMode, Trace};
use mpsddg::harness::{experiment_by_name, Report};
use mpsddg::limiter::{mps_limit, scaling_factor, Bounds};
use mpsddg::mesh::{generate_lattice, LatticeParams, Pattern, Point2, TriMesh};
use mpsddg::poly2::DgField;
use mpsddg::problems::{LinearDiffusion, NonlinearDiffusion};
use mpsddg::quadrature::{
    gauss_2, gauss_3, mapped_vertex_rule, selected_point_weights, SelectedPoints,
};
use mpsddg::timestep::{cfl_a_linear, cfl_a_nonlinear};
use mpsddg::QuadraticPoly;

const ZERO_TOL: f64 = 1e-12;

struct Outcome {
    passed: bool,
    detail: String,
}

fn outcome(passed: bool, detail: String) -> Outcome {
    Outcome { passed, detail }
}

fn fmt_orders(o: &[Option<f64>]) -> String {
    o.iter()
        .map(|x| x.map_or("-".to_string(), |v| format!("{v:.3}")))
        .collect::<Vec<_>>()
        .join(", ")
}

/// Largest absolute violation over all levels of a limited run.
fn worst_violation(r: &Report) -> f64 {
    r.levels
        .iter()
        .flat_map(|l| &l.snapshots)
        .map(|s| s.min_violation.abs().max(s.max_violation.abs()))
        .fold(0.0, f64::max)
}

fn finest_orders(r: &Report, pairs: usize) -> Vec<Option<f64>> {
    let t = r.table();
    t[t.len() - pairs..].iter().map(|row| row.l2_order).collect()
}

fn convergence(reports: &[Report], min_order: f64) -> Outcome {
    let on = &reports[0];
    let off = &reports[1];
    let mut ok = true;
    let mut detail = String::new();
    for r in [on, off] {
        let orders = finest_orders(r, 2);
        ok &= orders.iter().all(|o| o.is_some_and(|v| v >= min_order));
        let all: Vec<_> = r.table().iter().map(|row| row.l2_order).collect();
        detail += &format!("{} orders [{}]; ", r.label, fmt_orders(&all));
    }
    let v = worst_violation(on);
    ok &= v <= ZERO_TOL;
    detail += &format!("limiter-on worst violation {v:.1e}");
    outcome(ok, detail)
}

fn random_unit_field(rng: &mut ChaCha8Rng, cells: usize) -> DgField {
    let mut f = DgField::zeros(cells);
    for p in &mut f.polys {
        let avg = rng.gen_range(0.0..1.0);
        let mut c: [f64; 6] = std::array::from_fn(|_| rng.gen_range(-2.0..2.0));
        let q = QuadraticPoly::new(c);
        c[0] += avg - q.mean();
        *p = QuadraticPoly::new(c);
    }
    mps_limit(&mut f, Bounds::new(0.0, 1.0).unwrap()).unwrap();
    f
}

fn random_mesh(rng: &mut ChaCha8Rng) -> TriMesh {
    generate_lattice(
        LatticeParams {
            n: 4,
            jitter: 0.2,
            min_angle: 20f64.to_radians(),
            max_angle: 0.5 * PI,
        },
        rng,
    )
    .unwrap()
}

/// Forward-Euler step of random admissible data; worst excursion of the new
/// averages outside [0, 1].
fn euler_suite(nonlinear: bool) -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(if nonlinear { 32 } else { 31 });
    let linear_problem = LinearDiffusion { epsilon: 1.0 };
    let nonlinear_problem = NonlinearDiffusion;
    let mut worst: f64 = 0.0;
    let mut checked = 0usize;
    let mut dts = (f64::INFINITY, 0.0f64);
    for _ in 0..50 {
        let mesh = random_mesh(&mut rng);
        let min_area = mesh.cells.iter().map(|c| c.area).fold(f64::INFINITY, f64::min);
        let (b0, b1) = (5.0, 0.125);
        let mut cfg = SchemeConfig::default();
        let op;
        let dt;
        if nonlinear {
            cfg.edge_rule = gauss_2();
            op = SpatialOperator::new(&mesh, &nonlinear_problem, cfg).unwrap();
            let scales = mesh.midpoint_scales().unwrap();
            let w0 = (0..mesh.num_cells())
                .map(|c| {
                    let sel = SelectedPoints::new(&mesh, c, &scales);
                    selected_point_weights(&mesh, c, &sel).unwrap().min_selected()
                })
                .fold(f64::INFINITY, f64::min);
            // largest diffusion coefficient on [0, 1] is 1 + 1
            dt = 0.9 * cfl_a_nonlinear(b0, b1, mesh.theta_min, w0) * min_area / 2.0;
        } else {
            op = SpatialOperator::new(&mesh, &linear_problem, cfg).unwrap();
            dt = 0.9 * cfl_a_linear(b0, b1, mesh.theta_min, mesh.theta_max) * min_area;
        }
        dts = (dts.0.min(dt), dts.1.max(dt));
        for _ in 0..200 {
            let u = random_unit_field(&mut rng, mesh.num_cells());
            let rate = op.residual(&u).unwrap();
            for (p, r) in u.polys.iter().zip(&rate.polys) {
                let next = p.mean() + dt * r.mean();
                worst = worst.max(-next).max(next - 1.0);
                checked += 1;
            }
        }
    }
    outcome(
        worst <= ZERO_TOL,
        format!("{checked} cell averages, dt in [{:.2e}, {:.2e}], worst excursion {worst:.2e}", dts.0, dts.1),
    )
}

fn monomial_integrals(tri: [Point2; 3]) -> [f64; 6] {
    // ∫ p q = |K|/12 (Σ p_i q_i + Σ p_i Σ q_i) for linear p, q
    let area = 0.5 * (tri[1] - tri[0]).cross(tri[2] - tri[0]).abs();
    let xs = tri.map(|p| p.x);
    let ys = tri.map(|p| p.y);
    let pq = |a: [f64; 3], b: [f64; 3]| {
        area / 12.0 * ((0..3).map(|i| a[i] * b[i]).sum::<f64>() + a.iter().sum::<f64>() * b.iter().sum::<f64>())
    };
    [
        area,
        area * xs.iter().sum::<f64>() / 3.0,
        area * ys.iter().sum::<f64>() / 3.0,
        pq(xs, xs),
        pq(xs, ys),
        pq(ys, ys),
    ]
}

fn mapped_rule_check() -> Outcome {
    let rule = mapped_vertex_rule();
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let mut worst: f64 = 0.0;
    for _ in 0..1000 {
        let tri = loop {
            let t = [(); 3].map(|_| Point2::new(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0)));
            if (t[1] - t[0]).cross(t[2] - t[0]).abs() > 1e-2 {
                break t;
            }
        };
        let area = 0.5 * (tri[1] - tri[0]).cross(tri[2] - tri[0]).abs();
        let exact = monomial_integrals(tri);
        let pts = rule.physical_points(tri);
        let monos = |p: Point2| [1.0, p.x, p.y, p.x * p.x, p.x * p.y, p.y * p.y];
        let mut got = [0.0; 6];
        for (p, w) in pts.iter().zip(&rule.weights) {
            for (g, m) in got.iter_mut().zip(monos(*p)) {
                *g += w * m * area;
            }
        }
        for (g, e) in got.iter().zip(exact) {
            worst = worst.max((g - e).abs());
        }
    }
    let vertex_weights: Vec<f64> = [[1.0, 0.0, 0.0], [0.0, 1.0, 0.0], [0.0, 0.0, 1.0]]
        .iter()
        .map(|v| {
            rule.points
                .iter()
                .zip(&rule.weights)
                .filter(|(p, _)| (0..3).all(|k| (p[k] - v[k]).abs() < 1e-14))
                .map(|(_, w)| *w)
                .sum()
        })
        .collect();
    let vertex_ok = vertex_weights.iter().all(|w| (w - 2.0 / 81.0).abs() <= f64::EPSILON * 2.0 / 81.0);
    outcome(
        worst < 1e-13 && vertex_ok,
        format!("1000 triangles, max monomial error {worst:.1e}, vertex weights {vertex_weights:?}"),
    )
}

fn selected_weights_check() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(6);
    let w1 = 2.0 / 81.0;
    let mut worst_margin = f64::INFINITY;
    let mut min_weight = f64::INFINITY;
    let mut configs = 0;
    while configs < 100 {
        let mesh = random_mesh(&mut rng);
        let ratio = mesh.theta_min.tan() / mesh.theta_max.tan();
        let (lo_vm, lo_half, lo_full) = (w1 / 6.0 * ratio, ratio / 18.0, w1 / 6.0);
        let scales = mesh.midpoint_scales().unwrap();
        for c in 0..mesh.num_cells() {
            let sel = SelectedPoints::new(&mesh, c, &scales);
            let w = selected_point_weights(&mesh, c, &sel).unwrap();
            for k in 0..3 {
                for (v, lo) in [
                    (w.vertices[k], lo_vm),
                    (w.midpoints[k], lo_vm),
                    (w.half[k], lo_half),
                    (w.full[k], lo_full),
                ] {
                    min_weight = min_weight.min(v);
                    worst_margin = worst_margin.min((v - lo) / lo);
                }
                configs += 1;
            }
            if configs >= 100 {
                break;
            }
        }
    }
    outcome(
        min_weight > 0.0 && worst_margin >= -1e-12,
        format!("{configs} edge configurations, smallest weight {min_weight:.3e}, smallest relative margin {worst_margin:.2e}"),
    )
}

/// A general quadratic in the plane: value, gradient and Hessian.
struct Quad2 {
    c: [f64; 6],
}

impl Quad2 {
    fn value(&self, p: Point2) -> f64 {
        let c = &self.c;
        c[0] + c[1] * p.x + c[2] * p.y + c[3] * p.x * p.x + c[4] * p.x * p.y + c[5] * p.y * p.y
    }
    fn grad(&self, p: Point2) -> Point2 {
        let c = &self.c;
        Point2::new(c[1] + 2.0 * c[3] * p.x + c[4] * p.y, c[2] + c[4] * p.x + 2.0 * c[5] * p.y)
    }
    fn second(&self, d: Point2) -> f64 {
        let c = &self.c;
        2.0 * c[3] * d.x * d.x + 2.0 * c[4] * d.x * d.y + 2.0 * c[5] * d.y * d.y
    }
}

fn stencil_identity() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    let params = FluxParams::new(5.0, 0.125, ScaleMode::EdgeNormal);
    let rule = gauss_3();
    let mut worst: f64 = 0.0;
    for _ in 0..500 {
        let a = Point2::new(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0));
        let phi: f64 = rng.gen_range(0.0..2.0 * PI);
        let len = rng.gen_range(0.1..1.0);
        let b = a + Point2::new(phi.cos(), phi.sin()) * len;
        let t = (b - a) * (1.0 / len);
        let n = Point2::new(-t.y, t.x);
        let h = rng.gen_range(0.05..1.0);
        let inner = Quad2 {
            c: std::array::from_fn(|_| rng.gen_range(-1.0..1.0)),
        };
        let outer = Quad2 {
            c: std::array::from_fn(|_| rng.gen_range(-1.0..1.0)),
        };
        let mut quad = 0.0;
        for (s, w) in rule.params().zip(&rule.weights) {
            let x = a + (b - a) * s;
            let trace = |q: &Quad2| Trace {
                u: q.value(x),
                du: q.grad(x).dot(n),
                ddu: q.second(n),
            };
            let pair = EdgeTracePair {
                inner: trace(&inner),
                outer: trace(&outer),
                scale: h,
            };
            quad += w * len * ddg_flux(&params, &pair).unwrap();
        }
        let m = (a + b) * 0.5;
        let iv = [inner.value(a), inner.value(b), inner.value(m), inner.value(m - n * (0.5 * h)), inner.value(m - n * h)];
        let ov = [outer.value(a), outer.value(b), outer.value(m), outer.value(m + n * (0.5 * h)), outer.value(m + n * h)];
        let stencil = stencil_edge_integral(&params, len, h, iv, ov);
        worst = worst.max((stencil - quad).abs() / quad.abs().max(1.0));
    }
    outcome(worst < 1e-11, format!("500 random pairs, max difference {worst:.1e}"))
}

fn porous(reports: &[Report]) -> Outcome {
    let on = &reports[0].levels[0];
    let off = &reports[1].levels[0];
    let mut ok = true;
    let mut detail = String::from("limiter-on min:");
    for t in [0.1, 0.5, 2.0] {
        match on.snapshots.iter().find(|s| (s.time - t).abs() < 1e-9) {
            Some(s) => {
                ok &= s.min >= -ZERO_TOL;
                detail += &format!(" t={t}: {:.2e}", s.min);
            }
            None => {
                ok = false;
                detail += &format!(" t={t}: missing");
            }
        }
    }
    let negative = off.snapshots.iter().find(|s| s.min < 0.0);
    ok &= negative.is_some();
    match negative {
        Some(s) => detail += &format!("; limiter-off min {:.2e} at t={}", s.min, s.time),
        None => detail += "; limiter-off never negative",
    }
    detail += &format!("; h={:.4}, dt={:.3e}", on.h, on.step.dt);
    outcome(ok, detail)
}

fn ns_accuracy(reports: &[Report]) -> Outcome {
    let on = &reports[0];
    let orders: Vec<_> = on.table().iter().map(|r| r.l2_order).collect();
    let last = finest_orders(on, 1)[0];
    let v = worst_violation(on);
    let off_orders: Vec<_> = reports[1].table().iter().map(|r| r.l2_order).collect();
    outcome(
        last.is_some_and(|o| o >= 2.8) && v <= ZERO_TOL,
        format!(
            "limiter-on orders [{}], limiter-off orders [{}], limiter-on worst violation {v:.1e}",
            fmt_orders(&orders),
            fmt_orders(&off_orders)
        ),
    )
}

fn vortex(runs: &[(f64, Vec<Report>)]) -> Outcome {
    let mut ok = true;
    let mut detail = String::new();
    for (re, reports) in runs {
        for l in &reports[1].levels {
            ok &= l.last.min_violation < 0.0 && l.last.max_violation > 0.0;
            detail += &format!(
                "Re={re} nx={} off ({:.2e}, {:.2e}); ",
                l.nx, l.last.min_violation, l.last.max_violation
            );
        }
        let v = worst_violation(&reports[0]);
        ok &= v <= ZERO_TOL;
        detail += &format!("Re={re} on worst {v:.1e}; ");
    }
    outcome(ok, detail.trim_end_matches("; ").to_string())
}

fn conservation(reports: &[&Report]) -> Outcome {
    let mut worst: f64 = 0.0;
    let mut runs = 0;
    for r in reports {
        for l in r.levels.iter().filter(|l| l.periodic) {
            worst = worst.max(l.relative_drift_rate());
            runs += 1;
        }
    }
    outcome(
        runs > 0 && worst <= 1e-10,
        format!("{runs} periodic levels, worst relative drift per unit time {worst:.2e}"),
    )
}

fn limiter_properties() -> Outcome {
    let theta = scaling_factor(0.5, -0.1, 1.2, Bounds::new(0.0, 1.0).unwrap());
    let theta_ok = (theta - 5.0 / 7.0).abs() < 1e-15;
    let mut rng = ChaCha8Rng::seed_from_u64(12);
    let (mut avg_err, mut bound_err, mut idem_err): (f64, f64, f64) = (0.0, 0.0, 0.0);
    let n = 140;
    for _ in 0..40 {
        let lo = rng.gen_range(-2.0..0.0);
        let hi = rng.gen_range(0.0..2.0);
        let b = Bounds::new(lo, hi).unwrap();
        let mut f = DgField::zeros(1);
        let mut c: [f64; 6] = std::array::from_fn(|_| rng.gen_range(-5.0..5.0));
        c[0] += rng.gen_range(lo..hi) - QuadraticPoly::new(c).mean();
        f.polys[0] = QuadraticPoly::new(c);
        let before = f.polys[0].mean();
        mps_limit(&mut f, b).unwrap();
        let p = f.polys[0];
        avg_err = avg_err.max((p.mean() - before).abs());
        for i in 0..=n {
            for j in 0..=n - i {
                let v = p.eval_bary(i as f64 / n as f64, j as f64 / n as f64);
                bound_err = bound_err.max(lo - v).max(v - hi);
            }
        }
        let mut again = f.clone();
        mps_limit(&mut again, b).unwrap();
        for (x, y) in again.polys[0].coeffs.iter().zip(&p.coeffs) {
            idem_err = idem_err.max((x - y).abs());
        }
    }
    let samples = (n + 1) * (n + 2) / 2;
    outcome(
        theta_ok && avg_err <= 1e-14 && bound_err <= ZERO_TOL && idem_err <= 1e-14,
        format!(
            "theta {theta:.15} (5/7), average error {avg_err:.1e}, bound excess {bound_err:.1e} at {samples} samples/cell, idempotence {idem_err:.1e}"
        ),
    )
}

#[test]
fn acceptance() {
    let mut lines: Vec<(usize, &str, Outcome)> = Vec::new();
    let record = |lines: &mut Vec<(usize, &str, Outcome)>, id, name, o: Outcome| {
        println!("[{id:>2}] {} {name}: {}", if o.passed { "PASS" } else { "FAIL" }, o.detail);
        lines.push((id, name, o));
    };

    let accuracy = experiment_by_name("accuracy").unwrap();
    let uniform = accuracy.run(&accuracy.base_config()).unwrap();
    record(&mut lines, 1, "heat convergence, uniform family", convergence(&uniform, 2.85));

    let mut obtuse_cfg = accuracy.base_config();
    obtuse_cfg.mesh.pattern = Pattern::Obtuse;
    let obtuse = accuracy.run(&obtuse_cfg).unwrap();
    record(&mut lines, 2, "heat convergence, obtuse family", convergence(&obtuse, 2.8));

    record(&mut lines, 3, "linear-diffusion Euler step keeps averages in bounds", euler_suite(false));
    record(&mut lines, 4, "nonlinear-diffusion Euler step keeps averages in bounds", euler_suite(true));
    record(&mut lines, 5, "mapped vertex rule", mapped_rule_check());
    record(&mut lines, 6, "selected-point weights", selected_weights_check());
    record(&mut lines, 7, "stencil form of the edge flux", stencil_identity());

    let porous_exp = experiment_by_name("porous").unwrap();
    let porous_runs = porous_exp.run(&porous_exp.base_config()).unwrap();
    record(&mut lines, 8, "porous medium positivity", porous(&porous_runs));

    let ns = experiment_by_name("ns-accuracy").unwrap();
    let ns_runs = ns.run(&ns.base_config()).unwrap();
    record(&mut lines, 9, "vorticity equation convergence", ns_accuracy(&ns_runs));

    let vx = experiment_by_name("ns-vortex").unwrap();
    let mut vortex_runs = Vec::new();
    for re in [100.0, 1e4] {
        let mut cfg = vx.base_config();
        cfg.reynolds = Some(re);
        vortex_runs.push((re, vx.run(&cfg).unwrap()));
    }
    record(&mut lines, 10, "vortex patch extrema", vortex(&vortex_runs));

    let mut periodic: Vec<&Report> = uniform.iter().chain(&obtuse).chain(&ns_runs).collect();
    for (_, r) in &vortex_runs {
        periodic.extend(r);
    }
    record(&mut lines, 11, "mass conservation on periodic runs", conservation(&periodic));
    record(&mut lines, 12, "limiter unit properties", limiter_properties());

    let failed: Vec<usize> = lines.iter().filter(|(_, _, o)| !o.passed).map(|(id, _, _)| *id).collect();
    println!("{} of {} criteria passed", lines.len() - failed.len(), lines.len());
    assert!(failed.is_empty(), "failed criteria: {failed:?}");
}
