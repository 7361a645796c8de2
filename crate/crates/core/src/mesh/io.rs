//! Plain-text mesh format.
//!
//! ```text
//! # comments and blank lines are ignored
//! 4 vertices
//! 0.0 0.0
//! ...
//! 2 cells
//! 1 2 3
//! ...
//! 1 periodic
//! 1 2 4 3
//! ```
//!
//! Indices are 1-based. A periodic line `a b c d` identifies edge `{a, b}`
//! with edge `{c, d}`, vertex `a` with `c` and `b` with `d`. The periodic
//! block is optional.

use std::fmt::Write as _;
use std::path::Path;

use super::{BoundaryTag, MeshError, Periodicity, Point2, TriMesh};

pub fn load_mesh(path: impl AsRef<Path>) -> Result<TriMesh, MeshError> {
    let text = std::fs::read_to_string(path)?;
    parse_mesh(&text)
}

struct Lines<'a> {
    inner: std::iter::Enumerate<std::str::Lines<'a>>,
    last: usize,
}

impl<'a> Lines<'a> {
    fn next_content(&mut self) -> Option<(usize, Vec<&'a str>)> {
        for (i, line) in self.inner.by_ref() {
            let line = line.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            self.last = i + 1;
            return Some((i + 1, line.split_whitespace().collect()));
        }
        None
    }

    fn expect(&mut self) -> Result<(usize, Vec<&'a str>), MeshError> {
        self.next_content().ok_or(MeshError::Parse {
            line: self.last + 1,
            msg: "unexpected end of file".into(),
        })
    }
}

fn parse_err(line: usize, msg: impl Into<String>) -> MeshError {
    MeshError::Parse {
        line,
        msg: msg.into(),
    }
}

fn header(line: usize, toks: &[&str], keyword: &str) -> Result<usize, MeshError> {
    match toks {
        [n, k] if *k == keyword => n
            .parse()
            .map_err(|_| parse_err(line, format!("bad {keyword} count `{n}`"))),
        _ => Err(parse_err(line, format!("expected `<count> {keyword}`"))),
    }
}

fn index(line: usize, tok: &str, n: usize) -> Result<usize, MeshError> {
    let i: usize = tok
        .parse()
        .map_err(|_| parse_err(line, format!("bad index `{tok}`")))?;
    if i == 0 || i > n {
        return Err(parse_err(line, format!("index {i} out of range 1..={n}")));
    }
    Ok(i - 1)
}

pub fn parse_mesh(text: &str) -> Result<TriMesh, MeshError> {
    let mut lines = Lines {
        inner: text.lines().enumerate(),
        last: 0,
    };
    let (ln, toks) = lines.expect()?;
    let nv = header(ln, &toks, "vertices")?;
    let mut vertices = Vec::with_capacity(nv);
    for _ in 0..nv {
        let (ln, toks) = lines.expect()?;
        if toks.len() != 2 {
            return Err(parse_err(ln, "expected two coordinates"));
        }
        let x: f64 = toks[0]
            .parse()
            .map_err(|_| parse_err(ln, format!("bad coordinate `{}`", toks[0])))?;
        let y: f64 = toks[1]
            .parse()
            .map_err(|_| parse_err(ln, format!("bad coordinate `{}`", toks[1])))?;
        vertices.push(Point2::new(x, y));
    }
    let (ln, toks) = lines.expect()?;
    let nc = header(ln, &toks, "cells")?;
    let mut cells = Vec::with_capacity(nc);
    for _ in 0..nc {
        let (ln, toks) = lines.expect()?;
        if toks.len() != 3 {
            return Err(parse_err(ln, "expected three vertex indices"));
        }
        cells.push([
            index(ln, toks[0], nv)?,
            index(ln, toks[1], nv)?,
            index(ln, toks[2], nv)?,
        ]);
    }
    let mut periodicity = Periodicity::None;
    if let Some((ln, toks)) = lines.next_content() {
        let np = header(ln, &toks, "periodic")?;
        let mut pairs = Vec::with_capacity(np);
        for _ in 0..np {
            let (ln, toks) = lines.expect()?;
            if toks.len() != 4 {
                return Err(parse_err(ln, "expected four vertex indices"));
            }
            let v: Vec<usize> = toks
                .iter()
                .map(|t| index(ln, t, nv))
                .collect::<Result<_, _>>()?;
            pairs.push(([v[0], v[1]], [v[2], v[3]]));
        }
        if let Some((ln, _)) = lines.next_content() {
            return Err(parse_err(ln, "trailing content"));
        }
        periodicity = Periodicity::EdgePairs(pairs);
    }
    TriMesh::from_parts(vertices, cells, periodicity)
}

pub fn write_mesh_string(mesh: &TriMesh) -> String {
    let mut s = String::new();
    let _ = writeln!(s, "{} vertices", mesh.vertices.len());
    for v in &mesh.vertices {
        let _ = writeln!(s, "{:.17e} {:.17e}", v.x, v.y);
    }
    let _ = writeln!(s, "{} cells", mesh.cells.len());
    for c in &mesh.cells {
        let [a, b, d] = c.vertex_ids;
        let _ = writeln!(s, "{} {} {}", a + 1, b + 1, d + 1);
    }
    let pairs: Vec<_> = mesh
        .edges
        .iter()
        .enumerate()
        .filter_map(|(i, e)| match e.boundary {
            BoundaryTag::Periodic { partner } if i < partner => Some((e, &mesh.edges[partner])),
            _ => None,
        })
        .collect();
    if !pairs.is_empty() {
        let _ = writeln!(s, "{} periodic", pairs.len());
        for (e, f) in pairs {
            // traversal directions are opposite, so e's start matches f's end
            let _ = writeln!(
                s,
                "{} {} {} {}",
                e.vertex_ids[0] + 1,
                e.vertex_ids[1] + 1,
                f.vertex_ids[1] + 1,
                f.vertex_ids[0] + 1
            );
        }
    }
    s
}

pub fn write_mesh(mesh: &TriMesh, path: impl AsRef<Path>) -> Result<(), MeshError> {
    std::fs::write(path, write_mesh_string(mesh))?;
    Ok(())
}
