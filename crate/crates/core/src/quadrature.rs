//! Quadrature on triangles and edges.
//!
//! Triangle rules are stored in barycentric coordinates with weights that
//! sum to one, so `Σ w f(x)` approximates the cell average. Edge rules live
//! on `[-1/2, 1/2]` with weights summing to one; `Σ w g(s)` approximates the
//! edge average.

use crate::error::{Error, Result};
use crate::mesh::{Point2, TriMesh};

#[derive(Debug, Clone, PartialEq)]
pub struct QuadRule {
    /// Barycentric coordinates with respect to the cell's vertices.
    pub points: Vec<[f64; 3]>,
    pub weights: Vec<f64>,
}

impl QuadRule {
    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    pub fn physical_points(&self, tri: [Point2; 3]) -> Vec<Point2> {
        self.points
            .iter()
            .map(|b| tri[0] * b[0] + tri[1] * b[1] + tri[2] * b[2])
            .collect()
    }

    /// Cell average of `f` given in barycentric coordinates.
    pub fn average(&self, mut f: impl FnMut([f64; 3]) -> f64) -> f64 {
        self.points
            .iter()
            .zip(&self.weights)
            .map(|(p, w)| w * f(*p))
            .sum()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct EdgeRule {
    /// Nodes on `[-1/2, 1/2]`.
    pub nodes: Vec<f64>,
    pub weights: Vec<f64>,
    /// Highest polynomial degree integrated exactly.
    pub degree: usize,
}

impl EdgeRule {
    /// Nodes mapped to the edge parameter `s ∈ [0, 1]`.
    pub fn params(&self) -> impl Iterator<Item = f64> + '_ {
        self.nodes.iter().map(|v| v + 0.5)
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }
}

pub fn gauss_2() -> EdgeRule {
    let g = 0.5 / 3f64.sqrt();
    EdgeRule {
        nodes: vec![-g, g],
        weights: vec![0.5, 0.5],
        degree: 3,
    }
}

pub fn gauss_3() -> EdgeRule {
    let g = 0.5 * 0.6f64.sqrt();
    EdgeRule {
        nodes: vec![-g, 0.0, g],
        weights: vec![5.0 / 18.0, 4.0 / 9.0, 5.0 / 18.0],
        degree: 5,
    }
}

pub fn gauss_lobatto_3() -> EdgeRule {
    EdgeRule {
        nodes: vec![-0.5, 0.0, 0.5],
        weights: vec![1.0 / 6.0, 2.0 / 3.0, 1.0 / 6.0],
        degree: 3,
    }
}

/// Left-endpoint Radau rule.
pub fn gauss_radau_3() -> EdgeRule {
    let r6 = 6f64.sqrt();
    EdgeRule {
        nodes: vec![-0.5, (1.0 - r6) / 10.0, (1.0 + r6) / 10.0],
        weights: vec![1.0 / 9.0, (16.0 + r6) / 36.0, (16.0 - r6) / 36.0],
        degree: 4,
    }
}

/// Edge rule by name: `gauss2`, `gauss3`, `lobatto3`.
pub fn edge_rule(name: &str) -> Result<EdgeRule> {
    match name {
        "gauss2" => Ok(gauss_2()),
        "gauss3" => Ok(gauss_3()),
        "lobatto3" => Ok(gauss_lobatto_3()),
        other => Err(Error::Unknown {
            kind: "edge rule",
            name: other.to_string(),
        }),
    }
}

fn orbit3(a: f64, w: f64, pts: &mut Vec<[f64; 3]>, wts: &mut Vec<f64>) {
    let b = 1.0 - 2.0 * a;
    for p in [[b, a, a], [a, b, a], [a, a, b]] {
        pts.push(p);
        wts.push(w);
    }
}

/// Symmetric triangle rules exact to the given degree (2, 4 or 5).
pub fn triangle_rule(degree: usize) -> Result<QuadRule> {
    let mut points = Vec::new();
    let mut weights = Vec::new();
    match degree {
        2 => orbit3(1.0 / 6.0, 1.0 / 3.0, &mut points, &mut weights),
        4 => {
            orbit3(0.445948490915965, 0.223381589678011, &mut points, &mut weights);
            orbit3(0.091576213509771, 0.109951743655322, &mut points, &mut weights);
            let total: f64 = weights.iter().sum();
            for w in &mut weights {
                *w /= total;
            }
        }
        5 => {
            let r = 15f64.sqrt();
            points.push([1.0 / 3.0; 3]);
            weights.push(9.0 / 40.0);
            orbit3((6.0 - r) / 21.0, (155.0 - r) / 1200.0, &mut points, &mut weights);
            orbit3((6.0 + r) / 21.0, (155.0 + r) / 1200.0, &mut points, &mut weights);
        }
        d => return Err(Error::UnsupportedDegree(d)),
    }
    Ok(QuadRule { points, weights })
}

/// Weights 1/3 at the three edge midpoints; exact for quadratics.
pub fn edge_midpoint_rule() -> QuadRule {
    QuadRule {
        points: vec![[0.0, 0.5, 0.5], [0.5, 0.0, 0.5], [0.5, 0.5, 0.0]],
        weights: vec![1.0 / 3.0; 3],
    }
}

/// Weight carried by each vertex in [`mapped_vertex_rule`].
pub const VERTEX_WEIGHT: f64 = 2.0 / 81.0;

fn merge_into(points: &mut Vec<[f64; 3]>, weights: &mut Vec<f64>, p: [f64; 3], w: f64) {
    let found = points
        .iter()
        .position(|q| (0..3).all(|k| (q[k] - p[k]).abs() < 1e-14));
    match found {
        Some(i) => weights[i] += w,
        None => {
            points.push(p);
            weights.push(w);
        }
    }
}

/// P²-exact rule containing the three vertices and three edge midpoints.
///
/// The Lobatto × Radau tensor rule on the square `[-1/2, 1/2]²` is pushed
/// onto the triangle three times, each push collapsing the top side of the
/// square into a different vertex, and the three results averaged. The
/// Jacobian of each push is `2|K|(1/2 - v)`. Coincident images are merged.
/// The rule is expressed in barycentric coordinates and so serves every
/// cell.
pub fn mapped_vertex_rule() -> QuadRule {
    let lob = gauss_lobatto_3();
    let rad = gauss_radau_3();
    let mut points = Vec::new();
    let mut weights = Vec::new();
    for i in 0..3 {
        for (&u, &wu) in lob.nodes.iter().zip(&lob.weights) {
            for (&v, &wv) in rad.nodes.iter().zip(&rad.weights) {
                let mut b = [0.0; 3];
                b[i] = 0.5 + v;
                b[(i + 1) % 3] = (0.5 + u) * (0.5 - v);
                b[(i + 2) % 3] = (0.5 - u) * (0.5 - v);
                let w = 2.0 / 3.0 * (0.5 - v) * wu * wv;
                merge_into(&mut points, &mut weights, b, w);
            }
        }
    }
    QuadRule { points, weights }
}

/// The selected points of one cell: for each local edge `AB`, the
/// endpoints, the midpoint `M`, and the points `M - (h/2) n` and `M - h n`
/// on the inward normal line, `h` being the edge's normal length scale.
#[derive(Debug, Clone, PartialEq)]
pub struct SelectedPoints {
    pub vertices: [Point2; 3],
    /// Indexed by local edge.
    pub midpoints: [Point2; 3],
    pub half: [Point2; 3],
    pub full: [Point2; 3],
}

impl SelectedPoints {
    /// `scales` holds the midpoint normal length scale of every mesh edge.
    pub fn new(mesh: &TriMesh, cell: usize, scales: &[f64]) -> Self {
        let vertices = mesh.cell_points(cell);
        let mut midpoints = [Point2::ZERO; 3];
        let mut half = [Point2::ZERO; 3];
        let mut full = [Point2::ZERO; 3];
        for k in 0..3 {
            let e = mesh.cells[cell].edge_ids[k];
            let n = mesh.outward_normal(cell, k);
            let m = (vertices[k] + vertices[(k + 1) % 3]) * 0.5;
            midpoints[k] = m;
            half[k] = m - n * (0.5 * scales[e]);
            full[k] = m - n * scales[e];
        }
        SelectedPoints {
            vertices,
            midpoints,
            half,
            full,
        }
    }
}

/// Weights of the selected points in a nonnegative cell-average rule.
#[derive(Debug, Clone, PartialEq)]
pub struct SelectedPointWeights {
    /// Total weight at each vertex.
    pub vertices: [f64; 3],
    /// Total weight at each edge midpoint, by local edge.
    pub midpoints: [f64; 3],
    /// Total weight at each half-normal point, by local edge.
    pub half: [f64; 3],
    /// Total weight at each full-normal point, by local edge.
    pub full: [f64; 3],
    /// Weight the construction for edge `k` alone places on its own full
    /// normal point (always `w1/6`).
    pub full_own: [f64; 3],
    /// Whether the full normal point of edge `k` lies on the boundary of the
    /// cell (the second geometric case).
    pub on_boundary: [bool; 3],
    /// The composite rule in full: every point with its merged weight.
    pub rule: Vec<(Point2, f64)>,
}

impl SelectedPointWeights {
    pub fn min_selected(&self) -> f64 {
        self.vertices
            .iter()
            .chain(&self.midpoints)
            .chain(&self.half)
            .chain(&self.full)
            .copied()
            .fold(f64::INFINITY, f64::min)
    }

    pub fn average(&self, f: impl Fn(Point2) -> f64) -> f64 {
        self.rule.iter().map(|(p, w)| w * f(*p)).sum()
    }
}

fn tri_area(a: Point2, b: Point2, c: Point2) -> f64 {
    0.5 * (b - a).cross(c - a).abs()
}

struct Accumulator {
    tol: f64,
    entries: Vec<(Point2, f64)>,
}

impl Accumulator {
    fn add(&mut self, p: Point2, w: f64) {
        match self.entries.iter_mut().find(|(q, _)| q.dist(p) < self.tol) {
            Some(entry) => entry.1 += w,
            None => self.entries.push((p, w)),
        }
    }

    fn weight_at(&self, p: Point2) -> f64 {
        self.entries
            .iter()
            .filter(|(q, _)| q.dist(p) < self.tol)
            .map(|(_, w)| w)
            .sum()
    }
}

/// Builds a nonnegative P²-exact cell-average rule through all twelve
/// selected points.
///
/// For each edge the cell is fanned from the full-normal point `x5` over
/// the polygon `A, M, B, C`; zero-area pieces are dropped (when `x5` lies
/// on a side or coincides with `C`). One sixth of the average is carried by
/// the area-weighted mapped vertex rule on the fan, another sixth by the
/// area-weighted edge-midpoint rule. Summed over three edges this is the
/// whole average.
pub fn selected_point_weights(
    mesh: &TriMesh,
    cell: usize,
    selected: &SelectedPoints,
) -> Result<SelectedPointWeights> {
    let tri = mesh.cell_points(cell);
    let area = mesh.cells[cell].area;
    let diam = mesh.cells[cell].diameter;
    let tol = 1e-12 * diam;
    let frame = mesh.frames[cell];
    let fail = |reason: String| Error::SelectedPoints { cell, reason };

    if selected.vertices != tri {
        return Err(fail("vertices do not match the cell".into()));
    }
    let vertex_rule = mapped_vertex_rule();
    let mid_rule = edge_midpoint_rule();
    let mut acc = Accumulator {
        tol,
        entries: Vec::new(),
    };
    let mut on_boundary = [false; 3];
    let mut full_own = [0.0; 3];
    for k in 0..3 {
        let a = tri[k];
        let b = tri[(k + 1) % 3];
        let c = tri[(k + 2) % 3];
        let m = selected.midpoints[k];
        let x4 = selected.half[k];
        let x5 = selected.full[k];
        if m.dist((a + b) * 0.5) > tol {
            return Err(fail(format!("point 3 of edge {k} is not the midpoint")));
        }
        if x4.dist((m + x5) * 0.5) > tol {
            return Err(fail(format!("point 4 of edge {k} is not halfway to point 5")));
        }
        let inward = x5 - m;
        if inward.norm() <= tol || (b - a).dot(inward).abs() > 1e-10 * inward.norm() * diam {
            return Err(fail(format!("point 5 of edge {k} is not on the normal line")));
        }
        let (xi, eta) = frame.bary(x5);
        let zeta = 1.0 - xi - eta;
        if xi.min(eta).min(zeta) < -1e-10 {
            return Err(fail(format!("point 5 of edge {k} lies outside the cell")));
        }
        on_boundary[k] = tri_area(x5, b, c).min(tri_area(x5, c, a)) <= 1e-12 * area;

        let fan = [[x5, a, m], [x5, m, b], [x5, b, c], [x5, c, a]];
        let mut own = 0.0;
        for piece in fan {
            let share = tri_area(piece[0], piece[1], piece[2]) / area;
            if share <= 1e-12 {
                continue;
            }
            for rule in [&vertex_rule, &mid_rule] {
                for (bc, w) in rule.points.iter().zip(&rule.weights) {
                    let p = piece[0] * bc[0] + piece[1] * bc[1] + piece[2] * bc[2];
                    let wt = w * share / 6.0;
                    if p.dist(x5) < tol {
                        own += wt;
                    }
                    acc.add(p, wt);
                }
            }
        }
        full_own[k] = own;
    }
    let mut out = SelectedPointWeights {
        vertices: [0.0; 3],
        midpoints: [0.0; 3],
        half: [0.0; 3],
        full: [0.0; 3],
        full_own,
        on_boundary,
        rule: Vec::new(),
    };
    for k in 0..3 {
        out.vertices[k] = acc.weight_at(tri[k]);
        out.midpoints[k] = acc.weight_at(selected.midpoints[k]);
        out.half[k] = acc.weight_at(selected.half[k]);
        out.full[k] = acc.weight_at(selected.full[k]);
    }
    out.rule = acc.entries;
    Ok(out)
}

/// Lower bounds on the selected-point weights in terms of the mesh's
/// smallest and largest angles: `(vertex and midpoint, half-normal,
/// full-normal)`.
pub fn selected_weight_bounds(theta_min: f64, theta_max: f64) -> (f64, f64, f64) {
    let ratio = theta_min.tan() / theta_max.tan();
    (
        VERTEX_WEIGHT / 6.0 * ratio,
        ratio / 18.0,
        VERTEX_WEIGHT / 6.0,
    )
}

/// Smallest selected-point weight over the whole mesh.
pub fn min_selected_weight(mesh: &TriMesh, scales: &[f64]) -> Result<f64> {
    let mut w0 = f64::INFINITY;
    for c in 0..mesh.num_cells() {
        let sel = SelectedPoints::new(mesh, c, scales);
        w0 = w0.min(selected_point_weights(mesh, c, &sel)?.min_selected());
    }
    Ok(w0)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::mesh::Periodicity;

    fn factorial(n: u32) -> f64 {
        (1..=n).map(f64::from).product()
    }

    /// Average of ξ^a η^b ζ^c over a triangle.
    fn moment(a: u32, b: u32, c: u32) -> f64 {
        factorial(a) * factorial(b) * factorial(c) * 2.0 / factorial(a + b + c + 2)
    }

    fn check_exact(rule: &QuadRule, degree: u32) {
        for a in 0..=degree {
            for b in 0..=degree - a {
                for c in 0..=degree - a - b {
                    let q = rule.average(|p| {
                        p[0].powi(a as i32) * p[1].powi(b as i32) * p[2].powi(c as i32)
                    });
                    let exact = moment(a, b, c);
                    assert!(
                        ((q - exact) / exact).abs() < 1e-13,
                        "degree {degree} fails on ({a},{b},{c}): {q} vs {exact}"
                    );
                }
            }
        }
    }

    #[test]
    fn triangle_rules_are_exact() {
        for d in [2, 4, 5] {
            let r = triangle_rule(d).unwrap();
            assert!((r.weights.iter().sum::<f64>() - 1.0).abs() < 1e-14);
            assert!(r.weights.iter().all(|&w| w > 0.0));
            check_exact(&r, d as u32);
        }
        assert!(matches!(triangle_rule(3), Err(Error::UnsupportedDegree(3))));
    }

    #[test]
    fn xi2_eta2_moment() {
        let r = triangle_rule(4).unwrap();
        let q = r.average(|p| p[0] * p[0] * p[1] * p[1]);
        assert!((q - 2.0 / 180.0).abs() < 1e-15);
    }

    #[test]
    fn edge_rules() {
        let integrate = |r: &EdgeRule, k: i32| -> f64 {
            r.nodes.iter().zip(&r.weights).map(|(x, w)| w * x.powi(k)).sum()
        };
        let exact = |k: i32| -> f64 {
            if k % 2 == 1 {
                0.0
            } else {
                2.0 * 0.5f64.powi(k + 1) / (k + 1) as f64
            }
        };
        for r in [gauss_2(), gauss_3(), gauss_lobatto_3(), gauss_radau_3()] {
            for k in 0..=r.degree as i32 {
                assert!((integrate(&r, k) - exact(k)).abs() < 1e-15, "{r:?} {k}");
            }
        }
        let r6 = 6f64.sqrt();
        let rad = gauss_radau_3();
        assert_eq!(rad.weights, vec![1.0 / 9.0, (16.0 + r6) / 36.0, (16.0 - r6) / 36.0]);
        assert!((integrate(&rad, 4) - 1.0 / 80.0).abs() < 1e-16);
        assert!(integrate(&gauss_lobatto_3(), 3).abs() < 1e-16);
    }

    #[test]
    fn mapped_rule_structure() {
        let r = mapped_vertex_rule();
        assert_eq!(r.len(), 24);
        assert!((r.weights.iter().sum::<f64>() - 1.0).abs() < 1e-15);
        assert!(r.weights.iter().all(|&w| w > 0.0));
        check_exact(&r, 2);
        let weight_of = |p: [f64; 3]| {
            r.points
                .iter()
                .zip(&r.weights)
                .find(|(q, _)| (0..3).all(|k| (q[k] - p[k]).abs() < 1e-15))
                .map(|(_, w)| *w)
                .unwrap()
        };
        for v in [[1.0, 0.0, 0.0], [0.0, 1.0, 0.0], [0.0, 0.0, 1.0]] {
            assert!((weight_of(v) - 2.0 / 81.0).abs() < 1e-17);
        }
        for m in edge_midpoint_rule().points {
            assert!((weight_of(m) - 4.0 / 81.0).abs() < 1e-17);
        }
    }

    fn equilateral_pair() -> TriMesh {
        let s = 0.75f64.sqrt();
        let v = vec![
            Point2::new(0.0, 0.0),
            Point2::new(1.0, 0.0),
            Point2::new(0.5, s),
            Point2::new(0.5, -s),
        ];
        TriMesh::from_parts(v, vec![[0, 1, 2], [0, 3, 1]], Periodicity::None).unwrap()
    }

    #[test]
    fn equilateral_full_normal_weight() {
        let m = equilateral_pair();
        let scales = m.midpoint_scales().unwrap();
        let e = m.edges.iter().position(|e| e.right_cell.is_some()).unwrap();
        let c = m.edges[e].left_cell;
        let k = m.cells[c].edge_ids.iter().position(|&x| x == e).unwrap();
        let sel = SelectedPoints::new(&m, c, &scales);
        let w = selected_point_weights(&m, c, &sel).unwrap();
        assert!((w.full_own[k] - 2.0 / 486.0).abs() < 1e-16);
        assert!(w.on_boundary[k]);
    }

    #[test]
    fn selected_rule_is_exact_and_positive() {
        let m = crate::mesh::generate_structured(3, 3, crate::mesh::Rect::UNIT, crate::mesh::Pattern::Obtuse, true)
            .unwrap();
        let scales = m.midpoint_scales().unwrap();
        for c in 0..m.num_cells() {
            let sel = SelectedPoints::new(&m, c, &scales);
            let w = selected_point_weights(&m, c, &sel).unwrap();
            assert!(w.min_selected() > 0.0);
            let total: f64 = w.rule.iter().map(|(_, w)| w).sum();
            assert!((total - 1.0).abs() < 1e-14);
            let f = m.frames[c];
            let q = w.average(|p| {
                let (x, y) = f.bary(p);
                x * x + 3.0 * x * y - y * y + 2.0 * x
            });
            let exact = moment(2, 0, 0) + 3.0 * moment(1, 1, 0) - moment(0, 2, 0) + 2.0 * moment(1, 0, 0);
            assert!((q - exact).abs() < 1e-13);
            for k in 0..3 {
                assert!((w.full_own[k] - VERTEX_WEIGHT / 6.0).abs() < 1e-15);
            }
        }
    }

    #[test]
    fn inconsistent_points_rejected() {
        let m = equilateral_pair();
        let scales = m.midpoint_scales().unwrap();
        let mut sel = SelectedPoints::new(&m, 0, &scales);
        sel.half[1] += Point2::new(0.01, 0.0);
        assert!(matches!(
            selected_point_weights(&m, 0, &sel),
            Err(Error::SelectedPoints { cell: 0, .. })
        ));
    }
}
