use std::f64::consts::PI;

use rand::Rng;

use super::{MeshError, Periodicity, Point2, TriMesh};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Rect {
    pub x0: f64,
    pub y0: f64,
    pub x1: f64,
    pub y1: f64,
}

impl Rect {
    pub const UNIT: Rect = Rect::new(0.0, 0.0, 1.0, 1.0);

    pub const fn new(x0: f64, y0: f64, x1: f64, y1: f64) -> Self {
        Rect { x0, y0, x1, y1 }
    }

    pub fn square(lo: f64, hi: f64) -> Self {
        Rect::new(lo, lo, hi, hi)
    }

    pub fn width(&self) -> f64 {
        self.x1 - self.x0
    }

    pub fn height(&self) -> f64 {
        self.y1 - self.y0
    }

    pub fn area(&self) -> f64 {
        self.width() * self.height()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Pattern {
    /// Every quad split into two right triangles along the same diagonal.
    Uniform,
    /// Odd interior rows shifted sideways; largest angle about 3π/5.
    Obtuse,
}

impl std::str::FromStr for Pattern {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, String> {
        match s {
            "uniform" => Ok(Pattern::Uniform),
            "obtuse" => Ok(Pattern::Obtuse),
            other => Err(format!("unknown mesh pattern `{other}`")),
        }
    }
}

/// Horizontal shift of odd interior rows in units of the column spacing.
/// On square cells it opens the largest angle to exactly `0.6π`.
pub fn obtuse_shift() -> f64 {
    (0.1 * PI).tan()
}

fn split_quads(nx: usize, ny: usize) -> Vec<[usize; 3]> {
    let id = |i: usize, j: usize| j * (nx + 1) + i;
    let mut tris = Vec::with_capacity(2 * nx * ny);
    for j in 0..ny {
        for i in 0..nx {
            tris.push([id(i, j), id(i + 1, j), id(i + 1, j + 1)]);
            tris.push([id(i, j), id(i + 1, j + 1), id(i, j + 1)]);
        }
    }
    tris
}

/// Structured triangulation of a rectangle with `nx × ny` quads.
///
/// With `periodic` set, opposite sides are paired by translation.
pub fn generate_structured(
    nx: usize,
    ny: usize,
    rect: Rect,
    pattern: Pattern,
    periodic: bool,
) -> Result<TriMesh, MeshError> {
    if nx < 2 || ny < 2 {
        return Err(MeshError::Generation(format!(
            "need at least 2x2 quads, got {nx}x{ny}"
        )));
    }
    let dx = rect.width() / nx as f64;
    let dy = rect.height() / ny as f64;
    let shift = match pattern {
        Pattern::Uniform => 0.0,
        Pattern::Obtuse => obtuse_shift() * dx,
    };
    let mut vertices = Vec::with_capacity((nx + 1) * (ny + 1));
    for j in 0..=ny {
        for i in 0..=nx {
            let mut x = rect.x0 + i as f64 * dx;
            let y = rect.y0 + j as f64 * dy;
            if j % 2 == 1 && j < ny && i > 0 && i < nx {
                x += shift;
            }
            // exact coordinates on the far sides keep periodic matching tight
            if i == nx {
                x = rect.x1;
            }
            vertices.push(Point2::new(x, if j == ny { rect.y1 } else { y }));
        }
    }
    let periodicity = if periodic {
        Periodicity::Translations(vec![
            Point2::new(rect.width(), 0.0),
            Point2::new(0.0, rect.height()),
        ])
    } else {
        Periodicity::None
    };
    TriMesh::from_parts(vertices, split_quads(nx, ny), periodicity).map_err(|e| match e {
        MeshError::DegenerateCell(c) => {
            MeshError::Generation(format!("cell {c} degenerate after perturbation"))
        }
        other => other,
    })
}

/// Random periodic meshes for property tests.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LatticeParams {
    /// Lattice points per side.
    pub n: usize,
    /// Vertex displacement as a fraction of the lattice spacing.
    pub jitter: f64,
    /// Reject meshes whose smallest angle is below this (radians).
    pub min_angle: f64,
    /// Reject meshes whose largest angle is at or above this (radians).
    pub max_angle: f64,
}

impl Default for LatticeParams {
    fn default() -> Self {
        LatticeParams {
            n: 4,
            jitter: 0.15,
            min_angle: 20f64.to_radians(),
            max_angle: 0.5 * PI,
        }
    }
}

/// A jittered equilateral lattice on a periodic parallelogram. Vertices
/// identified by periodicity receive the same displacement. Draws are
/// repeated until the angle constraints hold.
pub fn generate_lattice<R: Rng + ?Sized>(
    params: LatticeParams,
    rng: &mut R,
) -> Result<TriMesh, MeshError> {
    let n = params.n;
    if n < 3 {
        return Err(MeshError::Generation(
            "periodic lattice needs at least 3 points per side".into(),
        ));
    }
    let a1 = Point2::new(1.0, 0.0);
    let a2 = Point2::new(-0.5, 0.75f64.sqrt());
    let length = n as f64;
    for _attempt in 0..1000 {
        let offsets: Vec<Point2> = (0..n * n)
            .map(|_| {
                let r = params.jitter * rng.gen::<f64>().sqrt();
                let phi = rng.gen_range(0.0..2.0 * PI);
                Point2::new(r * phi.cos(), r * phi.sin())
            })
            .collect();
        let mut vertices = Vec::with_capacity((n + 1) * (n + 1));
        for j in 0..=n {
            for i in 0..=n {
                let base = a1 * i as f64 + a2 * j as f64;
                vertices.push(base + offsets[(j % n) * n + (i % n)]);
            }
        }
        let mesh = TriMesh::from_parts(
            vertices,
            split_quads(n, n),
            Periodicity::Translations(vec![a1 * length, a2 * length]),
        )?;
        if mesh.theta_min >= params.min_angle && mesh.theta_max < params.max_angle {
            return Ok(mesh);
        }
    }
    Err(MeshError::Generation(
        "no lattice draw met the angle constraints".into(),
    ))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::mesh::BoundaryTag;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn two_by_two_uniform() {
        let m = generate_structured(2, 2, Rect::UNIT, Pattern::Uniform, false).unwrap();
        assert_eq!(m.cells.len(), 8);
        assert_eq!(m.edges.len(), 16);
        assert!((m.theta_min - PI / 4.0).abs() < 1e-14);
        assert!((m.theta_max - PI / 2.0).abs() < 1e-14);
    }

    #[test]
    fn area_and_euler_relation() {
        for pattern in [Pattern::Uniform, Pattern::Obtuse] {
            for n in [2, 3, 5, 8] {
                let m = generate_structured(n, n + 1, Rect::UNIT, pattern, false).unwrap();
                assert!((m.total_area() - 1.0).abs() < 1e-14);
                let euler =
                    m.vertices.len() as i64 - m.edges.len() as i64 + m.cells.len() as i64;
                assert_eq!(euler, 1);
            }
        }
    }

    #[test]
    fn obtuse_angle_scale() {
        let m = generate_structured(8, 8, Rect::UNIT, Pattern::Obtuse, false).unwrap();
        assert!(m.theta_max >= 0.55 * PI && m.theta_max <= 0.65 * PI, "{}", m.theta_max / PI);
    }

    #[test]
    fn periodic_pairs_cover_the_boundary() {
        for pattern in [Pattern::Uniform, Pattern::Obtuse] {
            let m = generate_structured(4, 6, Rect::square(-1.0, 2.0), pattern, true).unwrap();
            assert!(m.is_fully_periodic());
            for (id, e) in m.edges.iter().enumerate() {
                if let BoundaryTag::Periodic { partner } = e.boundary {
                    let p = &m.edges[partner];
                    assert_eq!(p.boundary, BoundaryTag::Periodic { partner: id });
                    assert!((p.length - e.length).abs() < 1e-12);
                    assert_eq!(p.right_cell, Some(e.left_cell));
                    assert!(e.unit_normal.dot(p.unit_normal) < -1.0 + 1e-12);
                }
            }
        }
    }

    #[test]
    fn lattice_meets_constraints() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        for _ in 0..5 {
            let m = generate_lattice(LatticeParams::default(), &mut rng).unwrap();
            assert!(m.is_fully_periodic());
            assert!(m.theta_min >= 20f64.to_radians());
            assert!(m.theta_max < 0.5 * PI);
            let expected = 16.0 * 0.75f64.sqrt();
            assert!((m.total_area() - expected).abs() < 1e-10);
        }
    }
}
