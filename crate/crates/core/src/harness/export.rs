use std::fmt::Write as _;
use std::path::Path;

use crate::error::{Error, Result};
use crate::mesh::TriMesh;
use crate::poly2::DgField;

/// Per-cell sample lattice in barycentric coordinates: vertices then edge
/// midpoints.
const LATTICE: [[f64; 2]; 6] = [[1.0, 0.0], [0.0, 1.0], [0.0, 0.0], [0.5, 0.5], [0.0, 0.5], [0.5, 0.0]];

#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ExportFormat {
    VtkLegacy,
    Csv,
}

impl std::str::FromStr for ExportFormat {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "vtk" | "vtk-legacy" => Ok(ExportFormat::VtkLegacy),
            "csv" => Ok(ExportFormat::Csv),
            other => Err(Error::Unknown {
                kind: "export format",
                name: other.into(),
            }),
        }
    }
}

fn vtk(field: &DgField, mesh: &TriMesh) -> String {
    let nv = mesh.vertices.len();
    let mut sum = vec![0.0; nv];
    let mut count = vec![0usize; nv];
    for (cell, p) in mesh.cells.iter().zip(&field.polys) {
        for (local, &v) in cell.vertex_ids.iter().enumerate() {
            let [a, b] = LATTICE[local];
            sum[v] += p.eval_bary(a, b);
            count[v] += 1;
        }
    }
    let mut s = String::new();
    s.push_str("# vtk DataFile Version 3.0\n");
    let _ = writeln!(s, "dg field t={:.12e}", field.time);
    s.push_str("ASCII\nDATASET UNSTRUCTURED_GRID\n");
    let _ = writeln!(s, "POINTS {nv} double");
    for v in &mesh.vertices {
        let _ = writeln!(s, "{:.15e} {:.15e} 0", v.x, v.y);
    }
    let nc = mesh.num_cells();
    let _ = writeln!(s, "CELLS {nc} {}", 4 * nc);
    for c in &mesh.cells {
        let [a, b, d] = c.vertex_ids;
        let _ = writeln!(s, "3 {a} {b} {d}");
    }
    let _ = writeln!(s, "CELL_TYPES {nc}");
    for _ in 0..nc {
        s.push_str("5\n");
    }
    let _ = writeln!(s, "POINT_DATA {nv}");
    s.push_str("SCALARS u double 1\nLOOKUP_TABLE default\n");
    for (total, n) in sum.iter().zip(&count) {
        let v = if *n > 0 { total / *n as f64 } else { 0.0 };
        let _ = writeln!(s, "{v:.15e}");
    }
    let _ = writeln!(s, "CELL_DATA {nc}");
    s.push_str("SCALARS cell_average double 1\nLOOKUP_TABLE default\n");
    for avg in field.averages() {
        let _ = writeln!(s, "{avg:.15e}");
    }
    s
}

fn csv(field: &DgField, mesh: &TriMesh) -> String {
    let mut s = String::from("x,y,value\n");
    for (k, p) in field.polys.iter().enumerate() {
        let tri = mesh.cell_points(k);
        for [a, b] in LATTICE {
            let pt = tri[0] * a + tri[1] * b + tri[2] * (1.0 - a - b);
            let _ = writeln!(s, "{:.15e},{:.15e},{:.15e}", pt.x, pt.y, p.eval_bary(a, b));
        }
    }
    s
}

/// Writes the field as legacy VTK (vertex-averaged values plus cell
/// averages) or as CSV samples on a six-point lattice per cell.
pub fn export_field(field: &DgField, mesh: &TriMesh, path: &Path, format: ExportFormat) -> Result<()> {
    let text = match format {
        ExportFormat::VtkLegacy => vtk(field, mesh),
        ExportFormat::Csv => csv(field, mesh),
    };
    std::fs::write(path, text).map_err(|e| Error::from(e).context(format!("writing {}", path.display())))
}

/// Reads back `(x, y, value)` rows written by [`export_field`] in CSV form.
pub fn read_csv_samples(path: &Path) -> Result<Vec<(f64, f64, f64)>> {
    let text = std::fs::read_to_string(path)?;
    let mut out = Vec::new();
    for (i, line) in text.lines().enumerate().skip(1) {
        let parse = |s: Option<&str>| -> Result<f64> {
            s.and_then(|v| v.trim().parse().ok())
                .ok_or_else(|| Error::Config(format!("{}: bad sample on line {}", path.display(), i + 1)))
        };
        let mut cols = line.split(',');
        out.push((parse(cols.next())?, parse(cols.next())?, parse(cols.next())?));
    }
    Ok(out)
}
