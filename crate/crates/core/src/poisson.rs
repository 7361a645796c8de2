//! Continuous P2 finite elements for the stream function `Δφ = w`, and the
//! vorticity transport operator built on it.

use crate::assembly::SpatialOperator;
use crate::error::{Error, Result};
use crate::mesh::{BoundaryTag, Point2, TriMesh};
use crate::poly2::{DgField, QuadraticPoly};
use crate::problems::Convection;
use crate::quadrature::{triangle_rule, QuadRule};

/// Local P2 Lagrange basis in the monomial basis of [`QuadraticPoly`]: the
/// three vertex functions followed by the midpoint functions of local edges
/// 0, 1, 2.
const LAGRANGE: [[f64; 6]; 6] = [
    [0.0, -1.0, 0.0, 2.0, 0.0, 0.0],
    [0.0, 0.0, -1.0, 0.0, 0.0, 2.0],
    [1.0, -3.0, -3.0, 2.0, 4.0, 2.0],
    [0.0, 0.0, 0.0, 0.0, 4.0, 0.0],
    [0.0, 0.0, 4.0, 0.0, -4.0, -4.0],
    [0.0, 4.0, 0.0, -4.0, -4.0, 0.0],
];

/// Compressed sparse row matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct CsrMatrix {
    pub n: usize,
    pub row_start: Vec<usize>,
    pub cols: Vec<usize>,
    pub values: Vec<f64>,
}

impl CsrMatrix {
    /// Sums duplicate entries.
    pub fn from_triplets(n: usize, mut triplets: Vec<(usize, usize, f64)>) -> Self {
        triplets.sort_by_key(|t| (t.0, t.1));
        let mut row_start = vec![0; n + 1];
        let mut cols = Vec::with_capacity(triplets.len());
        let mut values: Vec<f64> = Vec::with_capacity(triplets.len());
        let mut last = None;
        for (i, j, v) in triplets {
            if last == Some((i, j)) {
                *values.last_mut().expect("entry exists") += v;
            } else {
                cols.push(j);
                values.push(v);
                row_start[i + 1] += 1;
                last = Some((i, j));
            }
        }
        for i in 0..n {
            row_start[i + 1] += row_start[i];
        }
        CsrMatrix { n, row_start, cols, values }
    }

    pub fn mul(&self, x: &[f64], y: &mut [f64]) {
        for (i, yi) in y.iter_mut().enumerate() {
            let mut s = 0.0;
            for k in self.row_start[i]..self.row_start[i + 1] {
                s += self.values[k] * x[self.cols[k]];
            }
            *yi = s;
        }
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        (self.row_start[i]..self.row_start[i + 1])
            .find(|&k| self.cols[k] == j)
            .map_or(0.0, |k| self.values[k])
    }

    pub fn diagonal(&self) -> Vec<f64> {
        (0..self.n).map(|i| self.get(i, i)).collect()
    }

    /// Largest `|a_ij - a_ji|`.
    pub fn asymmetry(&self) -> f64 {
        let mut worst: f64 = 0.0;
        for i in 0..self.n {
            for k in self.row_start[i]..self.row_start[i + 1] {
                worst = worst.max((self.values[k] - self.get(self.cols[k], i)).abs());
            }
        }
        worst
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CgReport {
    pub iterations: usize,
    pub residual: f64,
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// Removes the component of `v` along the constant vector.
fn remove_constant(v: &mut [f64]) {
    let mean = v.iter().sum::<f64>() / v.len() as f64;
    for x in v.iter_mut() {
        *x -= mean;
    }
}

/// Jacobi-preconditioned conjugate gradients. With `singular` set, the
/// right-hand side and residuals are kept orthogonal to constants (the
/// kernel of a periodic stiffness matrix). `x` holds the initial guess.
pub fn solve_cg(a: &CsrMatrix, rhs: &[f64], x: &mut [f64], tol: f64, max_iter: usize, singular: bool) -> Result<CgReport> {
    let n = a.n;
    let mut b = rhs.to_vec();
    if singular {
        remove_constant(&mut b);
    }
    let bnorm = dot(&b, &b).sqrt();
    if bnorm == 0.0 {
        x.iter_mut().for_each(|v| *v = 0.0);
        return Ok(CgReport { iterations: 0, residual: 0.0 });
    }
    let inv_diag: Vec<f64> = a.diagonal().iter().map(|d| if *d > 0.0 { 1.0 / d } else { 1.0 }).collect();
    let mut r = vec![0.0; n];
    a.mul(x, &mut r);
    for i in 0..n {
        r[i] = b[i] - r[i];
    }
    if singular {
        remove_constant(&mut r);
    }
    let mut z: Vec<f64> = r.iter().zip(&inv_diag).map(|(a, b)| a * b).collect();
    if singular {
        remove_constant(&mut z);
    }
    let mut p = z.clone();
    let mut rz = dot(&r, &z);
    let mut ap = vec![0.0; n];
    let mut res = dot(&r, &r).sqrt() / bnorm;
    let mut it = 0;
    while res > tol {
        if it == max_iter {
            return Err(Error::NoConvergence {
                iterations: it,
                residual: res,
            });
        }
        a.mul(&p, &mut ap);
        let alpha = rz / dot(&p, &ap);
        for i in 0..n {
            x[i] += alpha * p[i];
            r[i] -= alpha * ap[i];
        }
        if singular {
            remove_constant(&mut r);
        }
        for i in 0..n {
            z[i] = r[i] * inv_diag[i];
        }
        if singular {
            remove_constant(&mut z);
        }
        let rz_new = dot(&r, &z);
        let beta = rz_new / rz;
        rz = rz_new;
        for i in 0..n {
            p[i] = z[i] + beta * p[i];
        }
        res = dot(&r, &r).sqrt() / bnorm;
        it += 1;
    }
    Ok(CgReport { iterations: it, residual: res })
}

/// Degrees of freedom of the continuous P2 space.
#[derive(Debug, Clone)]
pub struct C0Space {
    /// Node coordinates: vertices then edge midpoints.
    pub nodes: Vec<Point2>,
    /// Global node of each cell's six local nodes (unidentified numbering).
    pub cell_nodes: Vec<[usize; 6]>,
    /// Unknown index of every node, or `None` for a fixed boundary node.
    pub free: Vec<Option<usize>>,
    pub num_free: usize,
    /// True when all boundary edges are periodically identified.
    pub periodic: bool,
}

fn find(parent: &mut [usize], mut i: usize) -> usize {
    while parent[i] != i {
        parent[i] = parent[parent[i]];
        i = parent[i];
    }
    i
}

fn union(parent: &mut [usize], a: usize, b: usize) {
    let (ra, rb) = (find(parent, a), find(parent, b));
    if ra != rb {
        parent[ra.max(rb)] = ra.min(rb);
    }
}

impl C0Space {
    pub fn new(mesh: &TriMesh) -> Result<Self> {
        let nv = mesh.vertices.len();
        let ne = mesh.edges.len();
        let mut nodes = mesh.vertices.clone();
        nodes.extend(mesh.edges.iter().map(|e| e.midpoint));
        let cell_nodes = mesh
            .cells
            .iter()
            .map(|c| {
                let [a, b, d] = c.vertex_ids;
                let [e0, e1, e2] = c.edge_ids;
                [a, b, d, nv + e0, nv + e1, nv + e2]
            })
            .collect();
        let mut parent: Vec<usize> = (0..nv + ne).collect();
        let mut fixed = vec![false; nv + ne];
        let periodic = mesh.is_fully_periodic();
        let mut any_periodic = false;
        for (id, e) in mesh.edges.iter().enumerate() {
            match e.boundary {
                BoundaryTag::Periodic { partner } => {
                    any_periodic = true;
                    let f = &mesh.edges[partner];
                    union(&mut parent, e.vertex_ids[0], f.vertex_ids[1]);
                    union(&mut parent, e.vertex_ids[1], f.vertex_ids[0]);
                    union(&mut parent, nv + id, nv + partner);
                }
                BoundaryTag::DirichletZero => {
                    fixed[e.vertex_ids[0]] = true;
                    fixed[e.vertex_ids[1]] = true;
                    fixed[nv + id] = true;
                }
                BoundaryTag::Interior => {}
            }
        }
        if any_periodic && !periodic {
            return Err(Error::InvalidParameter("mixed periodic and Dirichlet boundaries are not supported by the stream-function solver".into()));
        }
        let mut index = vec![usize::MAX; nv + ne];
        let mut free = vec![None; nv + ne];
        let mut num_free = 0;
        for i in 0..nv + ne {
            let r = find(&mut parent, i);
            if fixed[r] {
                continue;
            }
            if index[r] == usize::MAX {
                index[r] = num_free;
                num_free += 1;
            }
            free[i] = Some(index[r]);
        }
        Ok(C0Space {
            nodes,
            cell_nodes,
            free,
            num_free,
            periodic,
        })
    }

    /// The restriction of a nodal field to `cell` as a quadratic.
    pub fn cell_poly(&self, cell: usize, values: &[f64]) -> QuadraticPoly {
        let mut c = [0.0; 6];
        for (l, &node) in self.cell_nodes[cell].iter().enumerate() {
            let v = values[node];
            for m in 0..6 {
                c[m] += v * LAGRANGE[l][m];
            }
        }
        QuadraticPoly::new(c)
    }
}

/// Stiffness matrix `∫ ∇φ_i·∇φ_j` over the free nodes.
pub fn assemble_poisson(mesh: &TriMesh) -> Result<(C0Space, CsrMatrix)> {
    let space = C0Space::new(mesh)?;
    let rule = triangle_rule(2)?;
    let mut triplets = Vec::with_capacity(36 * mesh.num_cells());
    for k in 0..mesh.num_cells() {
        let local = local_stiffness(mesh, k, &rule);
        let nodes = space.cell_nodes[k];
        for i in 0..6 {
            let Some(gi) = space.free[nodes[i]] else { continue };
            for j in 0..6 {
                if let Some(gj) = space.free[nodes[j]] {
                    triplets.push((gi, gj, local[i][j]));
                }
            }
        }
    }
    let matrix = CsrMatrix::from_triplets(space.num_free, triplets);
    Ok((space, matrix))
}

fn local_stiffness(mesh: &TriMesh, cell: usize, rule: &QuadRule) -> [[f64; 6]; 6] {
    let frame = &mesh.frames[cell];
    let area = mesh.cells[cell].area;
    let mut out = [[0.0; 6]; 6];
    for (b, w) in rule.points.iter().zip(&rule.weights) {
        let grads: [Point2; 6] = std::array::from_fn(|l| QuadraticPoly::new(LAGRANGE[l]).gradient_bary(frame, b[0], b[1]));
        for i in 0..6 {
            for j in 0..6 {
                out[i][j] += w * area * grads[i].dot(grads[j]);
            }
        }
    }
    out
}

/// Stream function solver bound to one mesh.
pub struct PoissonSolver<'a> {
    mesh: &'a TriMesh,
    pub space: C0Space,
    pub matrix: CsrMatrix,
    load_rule: QuadRule,
    pub tol: f64,
    pub max_iter: usize,
    /// Last solution over the free nodes, reused as the initial guess.
    guess: Vec<f64>,
}

/// Nodal values of a continuous P2 field.
#[derive(Debug, Clone)]
pub struct StreamFunction {
    /// Value at every (unidentified) node.
    pub values: Vec<f64>,
    /// Per-cell quadratic restriction.
    pub polys: Vec<QuadraticPoly>,
}

impl<'a> PoissonSolver<'a> {
    pub fn new(mesh: &'a TriMesh) -> Result<Self> {
        let (space, matrix) = assemble_poisson(mesh)?;
        let guess = vec![0.0; space.num_free];
        Ok(PoissonSolver {
            mesh,
            space,
            matrix,
            load_rule: triangle_rule(4)?,
            tol: 1e-10,
            max_iter: 5000,
            guess,
        })
    }

    /// Load vector `∫ f φ_i` for a source given per cell as a quadratic.
    fn load(&self, source: &DgField) -> Vec<f64> {
        let mut b = vec![0.0; self.space.num_free];
        for k in 0..self.mesh.num_cells() {
            let area = self.mesh.cells[k].area;
            let nodes = self.space.cell_nodes[k];
            for (p, w) in self.load_rule.points.iter().zip(&self.load_rule.weights) {
                let f = source.polys[k].eval_bary(p[0], p[1]);
                for (l, &node) in nodes.iter().enumerate() {
                    if let Some(g) = self.space.free[node] {
                        b[g] += w * area * f * QuadraticPoly::new(LAGRANGE[l]).eval_bary(p[0], p[1]);
                    }
                }
            }
        }
        b
    }

    /// Solves `Δφ = w`. Periodic meshes get the mean-zero solution; meshes
    /// with boundary take `φ = boundary(x)` on the boundary nodes.
    pub fn solve(&mut self, w: &DgField, boundary: Option<&dyn Fn(Point2) -> f64>) -> Result<(StreamFunction, CgReport)> {
        let space = &self.space;
        let n_nodes = space.nodes.len();
        let mut fixed = vec![0.0; n_nodes];
        if !space.periodic {
            if let Some(g) = boundary {
                for i in 0..n_nodes {
                    if space.free[i].is_none() {
                        fixed[i] = g(space.nodes[i]);
                    }
                }
            }
        }
        // -K φ = ∫ w v
        let mut rhs: Vec<f64> = self.load(w).into_iter().map(|v| -v).collect();
        if !space.periodic {
            let rule = triangle_rule(2)?;
            for k in 0..self.mesh.num_cells() {
                let nodes = space.cell_nodes[k];
                if nodes.iter().all(|&n| space.free[n].is_some()) {
                    continue;
                }
                let local = local_stiffness(self.mesh, k, &rule);
                for i in 0..6 {
                    let Some(gi) = space.free[nodes[i]] else { continue };
                    for j in 0..6 {
                        if space.free[nodes[j]].is_none() {
                            rhs[gi] -= local[i][j] * fixed[nodes[j]];
                        }
                    }
                }
            }
        }
        let mut x = std::mem::take(&mut self.guess);
        let report = solve_cg(&self.matrix, &rhs, &mut x, self.tol, self.max_iter, space.periodic)?;
        if space.periodic {
            // gauge: zero integral; vertex basis functions integrate to zero,
            // midpoint ones to |K|/3 per cell
            let mut integral = 0.0;
            let mut mass = vec![0.0; space.num_free];
            for k in 0..self.mesh.num_cells() {
                for &node in &space.cell_nodes[k][3..] {
                    if let Some(g) = space.free[node] {
                        mass[g] += self.mesh.cells[k].area / 3.0;
                    }
                }
            }
            for (xi, m) in x.iter().zip(&mass) {
                integral += xi * m;
            }
            let shift = integral / self.mesh.total_area();
            for v in x.iter_mut() {
                *v -= shift;
            }
        }
        let values: Vec<f64> = (0..n_nodes)
            .map(|i| match space.free[i] {
                Some(g) => x[g],
                None => fixed[i],
            })
            .collect();
        self.guess = x;
        let polys = (0..self.mesh.num_cells()).map(|k| space.cell_poly(k, &values)).collect();
        Ok((StreamFunction { values, polys }, report))
    }
}

/// Velocity `(-φ_y, φ_x)` of a stream function, used as the transport field
/// `F(w) = V w`.
pub struct VelocityField<'a> {
    mesh: &'a TriMesh,
    pub phi: StreamFunction,
}

impl<'a> VelocityField<'a> {
    pub fn new(mesh: &'a TriMesh, phi: StreamFunction) -> Self {
        VelocityField { mesh, phi }
    }

    pub fn velocity(&self, cell: usize, x: Point2) -> Point2 {
        let g = self.phi.polys[cell].gradient(&self.mesh.frames[cell], x);
        Point2::new(-g.y, g.x)
    }

    /// Largest speed over the vertices and edge midpoints of every cell.
    pub fn max_speed(&self) -> f64 {
        let pts = [(1.0, 0.0), (0.0, 1.0), (0.0, 0.0), (0.5, 0.5), (0.0, 0.5), (0.5, 0.0), (1.0 / 3.0, 1.0 / 3.0)];
        let mut best: f64 = 0.0;
        for k in 0..self.mesh.num_cells() {
            let frame = &self.mesh.frames[k];
            for (xi, eta) in pts {
                best = best.max(self.phi.polys[k].gradient_bary(frame, xi, eta).norm());
            }
        }
        best
    }
}

impl Convection for VelocityField<'_> {
    fn flux(&self, cell: usize, x: Point2, u: f64) -> Point2 {
        self.velocity(cell, x) * u
    }
    fn speed(&self, cell: usize, x: Point2, _u: f64) -> Point2 {
        self.velocity(cell, x)
    }
}

/// Right-hand side of the vorticity equation: one stream-function solve
/// followed by the DG operator with the resulting velocity.
pub struct VorticityOperator<'a> {
    pub dg: SpatialOperator<'a>,
    pub poisson: PoissonSolver<'a>,
    /// Total CG iterations so far.
    pub cg_iterations: usize,
}

impl<'a> VorticityOperator<'a> {
    pub fn new(dg: SpatialOperator<'a>) -> Result<Self> {
        let poisson = PoissonSolver::new(dg.mesh())?;
        Ok(VorticityOperator {
            dg,
            poisson,
            cg_iterations: 0,
        })
    }

    pub fn velocity(&mut self, w: &DgField) -> Result<VelocityField<'a>> {
        let (phi, report) = self.poisson.solve(w, None)?;
        self.cg_iterations += report.iterations;
        Ok(VelocityField::new(self.poisson.mesh, phi))
    }

    pub fn residual(&mut self, w: &DgField) -> Result<DgField> {
        let v = self.velocity(w)?;
        self.dg.residual_with(w, Some(&v))
    }
}
