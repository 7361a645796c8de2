//! Triangular meshes with full edge/cell adjacency.
//!
//! Cells are stored with clockwise vertex order. Local edge `i` of a cell
//! runs from local vertex `i` to local vertex `i + 1 (mod 3)`, so that
//! `neighbor_ids[i]` is the cell across `edge_ids[i]`. Each edge stores its
//! vertices in the traversal order of its left cell and a unit normal that
//! points from the left cell into the right cell (outward on the boundary).
//!
//! Periodic boundaries keep both boundary edges of an identified pair. Each
//! carries the partner id, the partner's cell as `right_cell`, and a `shift`
//! that translates points of the edge into the partner's coordinates.

mod generate;
mod io;
mod scale;

use std::collections::{HashMap, HashSet};
use std::f64::consts::PI;
use std::ops::{Add, AddAssign, Mul, Neg, Sub};

use thiserror::Error;

pub use generate::{generate_lattice, generate_structured, obtuse_shift, LatticeParams, Pattern, Rect};
pub use io::{load_mesh, parse_mesh, write_mesh, write_mesh_string};
pub use scale::{edge_length_scale, ray_exit_distance};

/// Matching tolerance for periodic vertex images.
pub const PERIODIC_TOL: f64 = 1e-10;

#[derive(Debug, Error)]
pub enum MeshError {
    #[error("vertex index {index} out of range in cell {cell}")]
    IndexOutOfRange { cell: usize, index: usize },
    #[error("non-finite vertex coordinate at vertex {0}")]
    NonFiniteVertex(usize),
    #[error("cell {0} has zero area")]
    DegenerateCell(usize),
    #[error("cell {0} duplicates an earlier cell")]
    DuplicateCell(usize),
    #[error("vertex {0} is not referenced by any cell")]
    DanglingVertex(usize),
    #[error("edge ({0}, {1}) is shared by more than two cells")]
    NonConformingEdge(usize, usize),
    #[error("cell {0} overlaps its neighbor (inverted element)")]
    InvertedElement(usize),
    #[error("periodic pairing: {0}")]
    Periodic(String),
    #[error("mesh generation: {0}")]
    Generation(String),
    #[error("mesh file line {line}: {msg}")]
    Parse { line: usize, msg: String },
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct Point2 {
    pub x: f64,
    pub y: f64,
}

impl Point2 {
    pub const ZERO: Point2 = Point2 { x: 0.0, y: 0.0 };

    pub const fn new(x: f64, y: f64) -> Self {
        Self { x, y }
    }

    pub fn dot(self, o: Point2) -> f64 {
        self.x * o.x + self.y * o.y
    }

    /// z-component of the 3D cross product.
    pub fn cross(self, o: Point2) -> f64 {
        self.x * o.y - self.y * o.x
    }

    pub fn norm(self) -> f64 {
        self.x.hypot(self.y)
    }

    pub fn normalized(self) -> Point2 {
        self * (1.0 / self.norm())
    }

    /// Rotation by -90 degrees.
    pub fn perp_cw(self) -> Point2 {
        Point2::new(self.y, -self.x)
    }

    pub fn dist(self, o: Point2) -> f64 {
        (self - o).norm()
    }

    pub fn is_finite(self) -> bool {
        self.x.is_finite() && self.y.is_finite()
    }
}

impl Add for Point2 {
    type Output = Point2;
    fn add(self, o: Point2) -> Point2 {
        Point2::new(self.x + o.x, self.y + o.y)
    }
}

impl AddAssign for Point2 {
    fn add_assign(&mut self, o: Point2) {
        self.x += o.x;
        self.y += o.y;
    }
}

impl Sub for Point2 {
    type Output = Point2;
    fn sub(self, o: Point2) -> Point2 {
        Point2::new(self.x - o.x, self.y - o.y)
    }
}

impl Neg for Point2 {
    type Output = Point2;
    fn neg(self) -> Point2 {
        Point2::new(-self.x, -self.y)
    }
}

impl Mul<f64> for Point2 {
    type Output = Point2;
    fn mul(self, s: f64) -> Point2 {
        Point2::new(self.x * s, self.y * s)
    }
}

/// Affine chart of a triangle: `xi` and `eta` are the barycentric
/// coordinates attached to the first two vertices.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CellFrame {
    /// Third vertex, where `xi = eta = 0`.
    pub origin: Point2,
    pub grad_xi: Point2,
    pub grad_eta: Point2,
}

impl CellFrame {
    pub fn new(v: [Point2; 3]) -> Self {
        let e1 = v[0] - v[2];
        let e2 = v[1] - v[2];
        let det = e1.cross(e2);
        CellFrame {
            origin: v[2],
            grad_xi: Point2::new(e2.y, -e2.x) * (1.0 / det),
            grad_eta: Point2::new(-e1.y, e1.x) * (1.0 / det),
        }
    }

    #[inline]
    pub fn bary(&self, p: Point2) -> (f64, f64) {
        let d = p - self.origin;
        (self.grad_xi.dot(d), self.grad_eta.dot(d))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum BoundaryTag {
    Interior,
    DirichletZero,
    Periodic { partner: usize },
}

#[derive(Debug, Clone)]
pub struct Cell {
    /// Clockwise.
    pub vertex_ids: [usize; 3],
    pub edge_ids: [usize; 3],
    pub neighbor_ids: [Option<usize>; 3],
    pub area: f64,
    /// Diameter `h_K` (longest side).
    pub diameter: f64,
    /// Interior angle at each local vertex.
    pub angles: [f64; 3],
}

#[derive(Debug, Clone)]
pub struct Edge {
    /// In the traversal order of the left cell.
    pub vertex_ids: [usize; 2],
    pub left_cell: usize,
    pub left_local: usize,
    pub right_cell: Option<usize>,
    pub right_local: Option<usize>,
    pub boundary: BoundaryTag,
    pub length: f64,
    /// Points from the left cell into the right cell.
    pub unit_normal: Point2,
    pub midpoint: Point2,
    /// Translation taking points on this edge into the right cell's
    /// coordinates. Zero unless periodic.
    pub shift: Point2,
}

impl Edge {
    /// Each physical interface is owned by exactly one edge record: interior
    /// edges always, periodic pairs by the lower id.
    pub fn is_owner(&self, id: usize) -> bool {
        match self.boundary {
            BoundaryTag::Periodic { partner } => id < partner,
            _ => true,
        }
    }

    pub fn point_at(&self, mesh: &TriMesh, s: f64) -> Point2 {
        let a = mesh.vertices[self.vertex_ids[0]];
        let b = mesh.vertices[self.vertex_ids[1]];
        a + (b - a) * s
    }
}

/// How boundary edges are paired into periodic interfaces.
#[derive(Debug, Clone, Default)]
pub enum Periodicity {
    #[default]
    None,
    /// Pair boundary edges whose vertices coincide under one of these
    /// translations (either sign), within [`PERIODIC_TOL`].
    Translations(Vec<Point2>),
    /// Explicit pairs: edge `{a, b}` is identified with `{c, d}`, `a` with
    /// `c` and `b` with `d`.
    EdgePairs(Vec<([usize; 2], [usize; 2])>),
}

#[derive(Debug, Clone)]
pub struct TriMesh {
    pub vertices: Vec<Point2>,
    pub cells: Vec<Cell>,
    pub edges: Vec<Edge>,
    pub frames: Vec<CellFrame>,
    /// Minimum angle over the partition (radians).
    pub theta_min: f64,
    /// Maximum angle over the partition (radians).
    pub theta_max: f64,
    /// Largest cell diameter.
    pub h: f64,
}

fn signed_area(a: Point2, b: Point2, c: Point2) -> f64 {
    0.5 * (b - a).cross(c - a)
}

fn angle_between(u: Point2, v: Point2) -> f64 {
    u.cross(v).abs().atan2(u.dot(v))
}

impl TriMesh {
    /// Builds adjacency from scratch. Counter-clockwise cells are flipped to
    /// clockwise; degenerate, duplicate and non-conforming input is rejected.
    pub fn from_parts(
        vertices: Vec<Point2>,
        triangles: Vec<[usize; 3]>,
        periodicity: Periodicity,
    ) -> Result<TriMesh, MeshError> {
        for (i, v) in vertices.iter().enumerate() {
            if !v.is_finite() {
                return Err(MeshError::NonFiniteVertex(i));
            }
        }
        let mut cells = Vec::with_capacity(triangles.len());
        let mut seen = HashSet::with_capacity(triangles.len());
        let mut used = vec![false; vertices.len()];
        for (ci, tri) in triangles.iter().enumerate() {
            for &i in tri {
                if i >= vertices.len() {
                    return Err(MeshError::IndexOutOfRange { cell: ci, index: i });
                }
            }
            let mut key = *tri;
            key.sort_unstable();
            if key[0] == key[1] || key[1] == key[2] {
                return Err(MeshError::DegenerateCell(ci));
            }
            if !seen.insert(key) {
                return Err(MeshError::DuplicateCell(ci));
            }
            let [a, b, c] = tri.map(|i| vertices[i]);
            let s = signed_area(a, b, c);
            let scale = a.dist(b).max(b.dist(c)).max(c.dist(a));
            if s.abs() <= 1e-14 * scale * scale {
                return Err(MeshError::DegenerateCell(ci));
            }
            let ids = if s > 0.0 { [tri[0], tri[2], tri[1]] } else { *tri };
            for &i in &ids {
                used[i] = true;
            }
            let p = ids.map(|i| vertices[i]);
            let mut angles = [0.0; 3];
            for k in 0..3 {
                angles[k] = angle_between(p[(k + 1) % 3] - p[k], p[(k + 2) % 3] - p[k]);
            }
            cells.push(Cell {
                vertex_ids: ids,
                edge_ids: [usize::MAX; 3],
                neighbor_ids: [None; 3],
                area: s.abs(),
                diameter: scale,
                angles,
            });
        }
        if let Some(i) = used.iter().position(|u| !u) {
            return Err(MeshError::DanglingVertex(i));
        }

        let mut edge_index: HashMap<(usize, usize), usize> = HashMap::new();
        let mut edges: Vec<Edge> = Vec::new();
        for ci in 0..cells.len() {
            for local in 0..3 {
                let a = cells[ci].vertex_ids[local];
                let b = cells[ci].vertex_ids[(local + 1) % 3];
                let key = (a.min(b), a.max(b));
                match edge_index.get(&key) {
                    None => {
                        let pa = vertices[a];
                        let pb = vertices[b];
                        let t = pb - pa;
                        let length = t.norm();
                        edge_index.insert(key, edges.len());
                        cells[ci].edge_ids[local] = edges.len();
                        edges.push(Edge {
                            vertex_ids: [a, b],
                            left_cell: ci,
                            left_local: local,
                            right_cell: None,
                            right_local: None,
                            boundary: BoundaryTag::DirichletZero,
                            length,
                            // outward for a clockwise traversal
                            unit_normal: Point2::new(-t.y, t.x) * (1.0 / length),
                            midpoint: (pa + pb) * 0.5,
                            shift: Point2::ZERO,
                        });
                    }
                    Some(&ei) => {
                        let e = &mut edges[ei];
                        if e.right_cell.is_some() {
                            return Err(MeshError::NonConformingEdge(key.0, key.1));
                        }
                        if e.vertex_ids != [b, a] {
                            return Err(MeshError::InvertedElement(ci));
                        }
                        e.right_cell = Some(ci);
                        e.right_local = Some(local);
                        e.boundary = BoundaryTag::Interior;
                        cells[ci].edge_ids[local] = ei;
                    }
                }
            }
        }

        pair_periodic(&vertices, &mut edges, &edge_index, &periodicity)?;

        for e in &edges {
            if let (Some(r), Some(rl)) = (e.right_cell, e.right_local) {
                cells[e.left_cell].neighbor_ids[e.left_local] = Some(r);
                if e.boundary == BoundaryTag::Interior {
                    cells[r].neighbor_ids[rl] = Some(e.left_cell);
                }
            }
        }

        let frames = cells
            .iter()
            .map(|c| CellFrame::new(c.vertex_ids.map(|i| vertices[i])))
            .collect();
        let mut theta_min = PI;
        let mut theta_max: f64 = 0.0;
        let mut h: f64 = 0.0;
        for c in &cells {
            for &a in &c.angles {
                theta_min = theta_min.min(a);
                theta_max = theta_max.max(a);
            }
            h = h.max(c.diameter);
        }
        Ok(TriMesh {
            vertices,
            cells,
            edges,
            frames,
            theta_min,
            theta_max,
            h,
        })
    }

    pub fn num_cells(&self) -> usize {
        self.cells.len()
    }

    pub fn cell_points(&self, cell: usize) -> [Point2; 3] {
        self.cells[cell].vertex_ids.map(|i| self.vertices[i])
    }

    pub fn centroid(&self, cell: usize) -> Point2 {
        let [a, b, c] = self.cell_points(cell);
        (a + b + c) * (1.0 / 3.0)
    }

    pub fn total_area(&self) -> f64 {
        self.cells.iter().map(|c| c.area).sum()
    }

    /// Outward unit normal of `cell` on its local edge `local`.
    pub fn outward_normal(&self, cell: usize, local: usize) -> Point2 {
        let e = &self.edges[self.cells[cell].edge_ids[local]];
        if e.left_cell == cell && e.left_local == local {
            e.unit_normal
        } else {
            -e.unit_normal
        }
    }

    /// True when every boundary edge is periodically paired.
    pub fn is_fully_periodic(&self) -> bool {
        self.edges
            .iter()
            .all(|e| e.boundary != BoundaryTag::DirichletZero)
    }

    /// Inradius `2|K| / perimeter`.
    pub fn inradius(&self, cell: usize) -> f64 {
        let c = &self.cells[cell];
        let perimeter: f64 = c.edge_ids.iter().map(|&e| self.edges[e].length).sum();
        2.0 * c.area / perimeter
    }

    pub fn perimeter(&self, cell: usize) -> f64 {
        self.cells[cell]
            .edge_ids
            .iter()
            .map(|&e| self.edges[e].length)
            .sum()
    }

    /// Angle of `cell` at the given global vertex.
    pub fn angle_at(&self, cell: usize, vertex: usize) -> f64 {
        let c = &self.cells[cell];
        let k = c
            .vertex_ids
            .iter()
            .position(|&v| v == vertex)
            .expect("vertex not in cell");
        c.angles[k]
    }
}

fn pair_periodic(
    vertices: &[Point2],
    edges: &mut [Edge],
    edge_index: &HashMap<(usize, usize), usize>,
    periodicity: &Periodicity,
) -> Result<(), MeshError> {
    let mut pairs: Vec<(usize, usize, Point2)> = Vec::new();
    match periodicity {
        Periodicity::None => return Ok(()),
        Periodicity::Translations(ts) => {
            let boundary: Vec<usize> = (0..edges.len())
                .filter(|&i| edges[i].right_cell.is_none())
                .collect();
            let mut taken = vec![false; edges.len()];
            for &e in &boundary {
                if taken[e] {
                    continue;
                }
                let [a, b] = edges[e].vertex_ids.map(|i| vertices[i]);
                let mut found = None;
                'search: for t in ts.iter().flat_map(|&t| [t, -t]) {
                    for &f in &boundary {
                        if f == e || taken[f] {
                            continue;
                        }
                        let [c, d] = edges[f].vertex_ids.map(|i| vertices[i]);
                        if c.dist(b + t) < PERIODIC_TOL && d.dist(a + t) < PERIODIC_TOL {
                            found = Some((f, t));
                            break 'search;
                        }
                    }
                }
                if let Some((f, t)) = found {
                    taken[e] = true;
                    taken[f] = true;
                    pairs.push((e, f, t));
                }
            }
        }
        Periodicity::EdgePairs(list) => {
            for &([a, b], [c, d]) in list {
                let lookup = |p: usize, q: usize| {
                    edge_index.get(&(p.min(q), p.max(q))).copied().ok_or_else(|| {
                        MeshError::Periodic(format!("no edge between vertices {p} and {q}"))
                    })
                };
                let e = lookup(a, b)?;
                let f = lookup(c, d)?;
                for &x in &[e, f] {
                    if edges[x].right_cell.is_some() {
                        return Err(MeshError::Periodic(format!(
                            "edge {x} is not a free boundary edge"
                        )));
                    }
                }
                let t = vertices[c] - vertices[a];
                if (vertices[d] - vertices[b]).dist(t) > PERIODIC_TOL {
                    return Err(MeshError::Periodic(format!(
                        "edges ({a},{b}) and ({c},{d}) are not translates"
                    )));
                }
                pairs.push((e, f, t));
            }
        }
    }
    for (e, f, t) in pairs {
        if (edges[e].length - edges[f].length).abs() > 1e-12 * edges[e].length.max(1.0) {
            return Err(MeshError::Periodic(format!(
                "edges {e} and {f} differ in length"
            )));
        }
        // The two left cells traverse the identified edge in opposite
        // directions, exactly as two neighbours sharing an interior edge.
        let [a, b] = edges[e].vertex_ids.map(|i| vertices[i]);
        let [c, d] = edges[f].vertex_ids.map(|i| vertices[i]);
        if c.dist(b + t) > PERIODIC_TOL || d.dist(a + t) > PERIODIC_TOL {
            return Err(MeshError::Periodic(format!(
                "edges {e} and {f} do not have reversed vertex correspondence"
            )));
        }
        let (lf, llf) = (edges[f].left_cell, edges[f].left_local);
        let (le, lle) = (edges[e].left_cell, edges[e].left_local);
        edges[e].boundary = BoundaryTag::Periodic { partner: f };
        edges[e].right_cell = Some(lf);
        edges[e].right_local = Some(llf);
        edges[e].shift = t;
        edges[f].boundary = BoundaryTag::Periodic { partner: e };
        edges[f].right_cell = Some(le);
        edges[f].right_local = Some(lle);
        edges[f].shift = -t;
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn two_triangles() -> TriMesh {
        let v = vec![
            Point2::new(0.0, 0.0),
            Point2::new(1.0, 0.0),
            Point2::new(1.0, 1.0),
            Point2::new(0.0, 1.0),
        ];
        TriMesh::from_parts(v, vec![[0, 1, 2], [0, 2, 3]], Periodicity::None).unwrap()
    }

    #[test]
    fn orientation_is_normalized_to_clockwise() {
        let m = two_triangles();
        for c in 0..m.num_cells() {
            let [a, b, cc] = m.cell_points(c);
            assert!(signed_area(a, b, cc) < 0.0);
            assert!((m.cells[c].area - 0.5).abs() < 1e-15);
        }
    }

    #[test]
    fn normals_point_from_left_to_right() {
        let m = two_triangles();
        for e in &m.edges {
            assert!((e.unit_normal.norm() - 1.0).abs() < 1e-14);
            let to_left = m.centroid(e.left_cell) - e.midpoint;
            assert!(to_left.dot(e.unit_normal) < 0.0);
            if let Some(r) = e.right_cell {
                assert!((m.centroid(r) - e.midpoint).dot(e.unit_normal) > 0.0);
            }
        }
        assert_eq!(m.edges.len(), 5);
        let interior = m.edges.iter().filter(|e| e.right_cell.is_some()).count();
        assert_eq!(interior, 1);
    }

    #[test]
    fn rejects_bad_input() {
        let v = vec![
            Point2::new(0.0, 0.0),
            Point2::new(1.0, 0.0),
            Point2::new(2.0, 0.0),
            Point2::new(0.0, 1.0),
        ];
        let err = TriMesh::from_parts(v.clone(), vec![[0, 1, 2]], Periodicity::None);
        assert!(matches!(err, Err(MeshError::DegenerateCell(0))));
        let err = TriMesh::from_parts(v.clone(), vec![[0, 1, 3], [1, 3, 0]], Periodicity::None);
        assert!(matches!(err, Err(MeshError::DuplicateCell(1))));
        let err = TriMesh::from_parts(v.clone(), vec![[0, 1, 3]], Periodicity::None);
        assert!(matches!(err, Err(MeshError::DanglingVertex(2))));
        let err = TriMesh::from_parts(v, vec![[0, 1, 7]], Periodicity::None);
        assert!(matches!(err, Err(MeshError::IndexOutOfRange { .. })));
    }

    #[test]
    fn rejects_edge_shared_by_three_cells() {
        let v = vec![
            Point2::new(0.0, 0.0),
            Point2::new(1.0, 0.0),
            Point2::new(0.5, 1.0),
            Point2::new(0.5, -1.0),
            Point2::new(0.5, 2.0),
        ];
        let err = TriMesh::from_parts(v, vec![[0, 1, 2], [0, 1, 3], [0, 1, 4]], Periodicity::None);
        assert!(matches!(
            err,
            Err(MeshError::NonConformingEdge(0, 1)) | Err(MeshError::InvertedElement(_))
        ));
    }

    #[test]
    fn frame_recovers_barycentric_coordinates() {
        let m = two_triangles();
        let [a, b, c] = m.cell_points(0);
        let f = m.frames[0];
        let (x, y) = f.bary(a);
        assert!((x - 1.0).abs() < 1e-15 && y.abs() < 1e-15);
        let (x, y) = f.bary(b);
        assert!(x.abs() < 1e-15 && (y - 1.0).abs() < 1e-15);
        let (x, y) = f.bary(c);
        assert!(x.abs() < 1e-15 && y.abs() < 1e-15);
    }
}
