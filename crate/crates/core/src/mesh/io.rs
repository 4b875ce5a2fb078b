//! Line-oriented text interchange format.
//!
//! ```text
//! polyvem-mesh 1
//! <nVertices> <nCells>
//! x y                      (one line per vertex, 17 significant digits)
//! m i0 i1 ... i(m-1)       (one line per cell, 0-based CCW indices)
//! ```

use std::fmt::Write as _;

use super::{MeshError, PolyMesh};
use crate::real::Real;

pub const MESH_MAGIC: &str = "polyvem-mesh 1";

pub fn write_mesh<T: Real>(mesh: &PolyMesh<T>) -> String {
    let mut out = String::new();
    let _ = writeln!(out, "{MESH_MAGIC}");
    let _ = writeln!(out, "{} {}", mesh.n_vertices(), mesh.n_cells());
    for v in mesh.vertices() {
        let _ = writeln!(out, "{:.16e} {:.16e}", v[0].as_f64(), v[1].as_f64());
    }
    for c in mesh.cells() {
        let _ = write!(out, "{}", c.vertex_ids.len());
        for i in &c.vertex_ids {
            let _ = write!(out, " {i}");
        }
        out.push('\n');
    }
    out
}

pub fn read_mesh<T: Real>(text: &str) -> Result<PolyMesh<T>, MeshError> {
    let mut lines = text.lines().enumerate().filter(|(_, l)| !l.trim().is_empty());
    let (_, magic) = lines.next().ok_or_else(|| MeshError::Header("empty input".into()))?;
    if magic.trim() != MESH_MAGIC {
        return Err(MeshError::Header(format!("expected `{MESH_MAGIC}`, found `{}`", magic.trim())));
    }
    let (_, counts) = lines.next().ok_or_else(|| MeshError::Header("missing counts line".into()))?;
    let counts: Vec<usize> = counts
        .split_whitespace()
        .map(str::parse)
        .collect::<Result<_, _>>()
        .map_err(|e| MeshError::Header(format!("bad counts line: {e}")))?;
    let [nv, nc] = counts[..] else {
        return Err(MeshError::Header("counts line must hold `<nVertices> <nCells>`".into()));
    };

    let mut vertices = Vec::with_capacity(nv);
    for _ in 0..nv {
        let (ln, line) = lines.next().ok_or_else(|| MeshError::Parse { line: 0, msg: "missing vertex line".into() })?;
        let parse = |s: &str| {
            s.parse::<f64>().map_err(|e| MeshError::Parse { line: ln + 1, msg: format!("bad coordinate `{s}`: {e}") })
        };
        let toks: Vec<&str> = line.split_whitespace().collect();
        if toks.len() != 2 {
            return Err(MeshError::Parse { line: ln + 1, msg: "vertex line must hold `x y`".into() });
        }
        vertices.push([T::lit(parse(toks[0])?), T::lit(parse(toks[1])?)]);
    }

    let mut cells = Vec::with_capacity(nc);
    for _ in 0..nc {
        let (ln, line) = lines.next().ok_or_else(|| MeshError::Parse { line: 0, msg: "missing cell line".into() })?;
        let ids: Vec<usize> = line
            .split_whitespace()
            .map(str::parse)
            .collect::<Result<_, _>>()
            .map_err(|e| MeshError::Parse { line: ln + 1, msg: format!("bad index: {e}") })?;
        match ids.split_first() {
            Some((&m, rest)) if m == rest.len() => cells.push(rest.to_vec()),
            _ => return Err(MeshError::Parse { line: ln + 1, msg: "cell line length disagrees with its count".into() }),
        }
    }
    if let Some((ln, _)) = lines.next() {
        return Err(MeshError::Parse { line: ln + 1, msg: "trailing content".into() });
    }
    PolyMesh::new(vertices, cells)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::mesh::gen_quad;

    #[test]
    fn quad_round_trip() {
        let m = gen_quad::<f64>(2).unwrap();
        let text = write_mesh(&m);
        assert!(text.starts_with("polyvem-mesh 1\n9 4\n"));
        let back = read_mesh::<f64>(&text).unwrap();
        assert_eq!(back.vertices(), m.vertices());
        for (a, b) in back.cells().iter().zip(m.cells()) {
            assert_eq!(a.vertex_ids, b.vertex_ids);
        }
    }

    #[test]
    fn index_out_of_range() {
        let mut text = write_mesh(&gen_quad::<f64>(2).unwrap());
        text = text.replacen("4 0 1 4 3", "4 0 1 99 3", 1);
        assert!(matches!(read_mesh::<f64>(&text), Err(MeshError::IndexOutOfRange { index: 99, .. })));
    }

    #[test]
    fn clockwise_cell_rejected() {
        let text = "polyvem-mesh 1\n4 1\n0 0\n1 0\n1 1\n0 1\n4 0 3 2 1\n";
        assert!(matches!(read_mesh::<f64>(text), Err(MeshError::Orientation { .. })));
    }

    #[test]
    fn malformed_header() {
        assert!(matches!(read_mesh::<f64>("polymesh 2\n"), Err(MeshError::Header(_))));
        assert!(matches!(read_mesh::<f64>("polyvem-mesh 1\n4\n"), Err(MeshError::Header(_))));
        assert!(matches!(read_mesh::<f64>(""), Err(MeshError::Header(_))));
    }
}
