use super::{BoundaryTag, Point2, TriMesh};
use crate::error::{Error, Result};

/// Distance from `origin` along `dir` (unit) to the boundary of the convex
/// triangle `tri`, ignoring sides the ray moves away from. `origin` is
/// expected on or inside the triangle.
pub fn ray_exit_distance(tri: [Point2; 3], origin: Point2, dir: Point2) -> Option<f64> {
    let mut best = f64::INFINITY;
    for k in 0..3 {
        let a = tri[k];
        let b = tri[(k + 1) % 3];
        let opposite = tri[(k + 2) % 3];
        let t = b - a;
        let mut n = Point2::new(-t.y, t.x);
        if n.dot(opposite - a) > 0.0 {
            n = -n;
        }
        let speed = n.dot(dir);
        if speed <= 1e-14 * n.norm() {
            continue;
        }
        let dist = n.dot(a - origin) / speed;
        if dist > 1e-14 * t.norm() {
            best = best.min(dist);
        }
    }
    best.is_finite().then_some(best)
}

/// Length scale at a point of edge `edge_id` measured along `dir`: the
/// shorter of the two chords from `origin` through the left cell (along
/// `-dir`) and through the right cell (along `dir`). Dirichlet edges use the
/// left cell only.
pub fn edge_length_scale(mesh: &TriMesh, edge_id: usize, dir: Point2, origin: Point2) -> Result<f64> {
    let norm = dir.norm();
    if norm == 0.0 || !norm.is_finite() {
        return Err(Error::ZeroDirection);
    }
    let d = dir * (1.0 / norm);
    let e = &mesh.edges[edge_id];
    let left = ray_exit_distance(mesh.cell_points(e.left_cell), origin, -d)
        .ok_or(Error::ZeroDirection)?;
    let mut h = left;
    if let Some(r) = e.right_cell {
        let shifted = match e.boundary {
            BoundaryTag::Periodic { .. } => origin + e.shift,
            _ => origin,
        };
        let right = ray_exit_distance(mesh.cell_points(r), shifted, d).ok_or(Error::ZeroDirection)?;
        h = h.min(right);
    }
    if h <= 0.0 || !h.is_finite() {
        return Err(Error::NonpositiveScale(h));
    }
    Ok(h)
}

impl TriMesh {
    /// Normal-line length scale at the midpoint of every edge.
    pub fn midpoint_scales(&self) -> Result<Vec<f64>> {
        (0..self.edges.len())
            .map(|i| {
                let e = &self.edges[i];
                edge_length_scale(self, i, e.unit_normal, e.midpoint)
            })
            .collect()
    }

    /// The four angles adjacent to edge `edge_id`: the two in the left cell
    /// at the edge endpoints followed by the two in the right cell (if any).
    pub fn edge_angles(&self, edge_id: usize) -> Vec<f64> {
        let e = &self.edges[edge_id];
        let mut out = Vec::with_capacity(4);
        let c = &self.cells[e.left_cell];
        out.push(c.angles[e.left_local]);
        out.push(c.angles[(e.left_local + 1) % 3]);
        if let (Some(r), Some(rl)) = (e.right_cell, e.right_local) {
            let c = &self.cells[r];
            out.push(c.angles[rl]);
            out.push(c.angles[(rl + 1) % 3]);
        }
        out
    }

    /// Largest `l_e / h` over both two-point Gauss points of every interior
    /// edge, with `h` measured along the edge normal.
    pub fn max_gauss_point_ratio(&self) -> Result<f64> {
        let g = 0.5 / 3f64.sqrt();
        let mut worst: f64 = 0.0;
        for (i, e) in self.edges.iter().enumerate() {
            if e.right_cell.is_none() {
                continue;
            }
            for s in [0.5 - g, 0.5 + g] {
                let p = e.point_at(self, s);
                let h = edge_length_scale(self, i, e.unit_normal, p)?;
                worst = worst.max(e.length / h);
            }
        }
        Ok(worst)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::mesh::{generate_structured, Pattern, Periodicity, Rect};

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

    fn shared_edge(m: &TriMesh) -> usize {
        m.edges.iter().position(|e| e.right_cell.is_some()).unwrap()
    }

    #[test]
    fn equilateral_midpoint() {
        let m = equilateral_pair();
        let i = shared_edge(&m);
        let e = &m.edges[i];
        let h = edge_length_scale(&m, i, e.unit_normal, e.midpoint).unwrap();
        assert!((h - 0.5 * (PI_3).tan()).abs() < 1e-14);
    }

    const PI_3: f64 = std::f64::consts::PI / 3.0;

    #[test]
    fn right_isosceles_hypotenuse() {
        let v = vec![
            Point2::new(0.0, 0.0),
            Point2::new(1.0, 0.0),
            Point2::new(1.0, 1.0),
            Point2::new(0.0, 1.0),
        ];
        let m = TriMesh::from_parts(v, vec![[0, 1, 3], [1, 2, 3]], Periodicity::None).unwrap();
        let i = shared_edge(&m);
        let e = &m.edges[i];
        let h = edge_length_scale(&m, i, e.unit_normal, e.midpoint).unwrap();
        assert!((h - 0.5f64.sqrt()).abs() < 1e-14);
    }

    #[test]
    fn off_center_point_is_shorter() {
        let m = equilateral_pair();
        let i = shared_edge(&m);
        let e = &m.edges[i];
        let mid = edge_length_scale(&m, i, e.unit_normal, e.midpoint).unwrap();
        let p = e.point_at(&m, 0.3);
        let h = edge_length_scale(&m, i, e.unit_normal, p).unwrap();
        assert!(h < mid);
        // the chord from the point at parameter 0.3 meets the side through
        // the nearer vertex at distance 0.3·tan(60°)
        assert!((h - 0.3 * PI_3.tan()).abs() < 1e-13);
    }

    #[test]
    fn midpoint_scale_matches_angle_identity() {
        for pattern in [Pattern::Uniform, Pattern::Obtuse] {
            let m = generate_structured(5, 4, Rect::UNIT, pattern, true).unwrap();
            let scales = m.midpoint_scales().unwrap();
            for (i, e) in m.edges.iter().enumerate() {
                let min_angle = m.edge_angles(i).into_iter().fold(f64::INFINITY, f64::min);
                // the identity needs non-obtuse angles at the edge endpoints
                if m.edge_angles(i).iter().all(|&a| a <= 0.5 * std::f64::consts::PI + 1e-12) {
                    let expected = 0.5 * e.length * min_angle.tan();
                    assert!((scales[i] - expected).abs() < 1e-12, "edge {i}");
                }
            }
        }
    }

    #[test]
    fn dirichlet_edge_uses_interior_only() {
        let m = generate_structured(3, 3, Rect::UNIT, Pattern::Uniform, false).unwrap();
        for (i, e) in m.edges.iter().enumerate() {
            if e.right_cell.is_none() {
                let h = edge_length_scale(&m, i, e.unit_normal, e.midpoint).unwrap();
                assert!(h > 0.0 && h <= m.h);
            }
        }
    }

    #[test]
    fn zero_direction_rejected() {
        let m = equilateral_pair();
        let e = &m.edges[0];
        assert!(edge_length_scale(&m, 0, Point2::ZERO, e.midpoint).is_err());
    }
}
