//! Polygonal meshes: representation, validation, generators, quality audit and file format.

mod generators;
mod io;
mod voronoi;

use std::collections::HashMap;

use thiserror::Error;

pub use generators::{gen_quad, gen_tria};
pub use io::{read_mesh, write_mesh, MESH_MAGIC};
pub use voronoi::{cvt_energy, gen_voronoi, lloyd_step, voronoi_cells, voronoi_from_seeds};

use crate::quadrature::polygon_centroid;
use crate::real::{dist, orient, Point, Real};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum MeshError {
    #[error("malformed header: {0}")]
    Header(String),
    #[error("line {line}: {msg}")]
    Parse { line: usize, msg: String },
    #[error("cell {cell} references vertex {index} but the mesh has {n_vertices} vertices")]
    IndexOutOfRange { cell: usize, index: usize, n_vertices: usize },
    #[error("cell {cell} is not counter-clockwise (signed area {area:e})")]
    Orientation { cell: usize, area: f64 },
    #[error("cell {cell} is degenerate: {reason}")]
    Degenerate { cell: usize, reason: String },
    #[error("cell {cell} is not a simple polygon")]
    NotSimple { cell: usize },
    #[error("edge ({a}, {b}) is shared by more than two cells or traversed twice in the same direction")]
    NonManifoldEdge { a: usize, b: usize },
    #[error("boundary edges do not form closed loops at vertex {0}")]
    OpenBoundary(usize),
    #[error("non-finite vertex coordinate at vertex {0}")]
    NonFinite(usize),
    #[error("invalid generator input: {0}")]
    Generator(String),
}

/// A polygon of the mesh with its cached geometry.
#[derive(Clone, Debug)]
pub struct Cell<T> {
    pub vertex_ids: Vec<usize>,
    /// Global edge index of local edge `i` (from vertex `i` to vertex `i + 1`).
    pub edge_ids: Vec<usize>,
    pub area: T,
    pub diameter: T,
    pub centroid: Point<T>,
}

impl<T> Cell<T> {
    pub fn n_vertices(&self) -> usize {
        self.vertex_ids.len()
    }
}

/// Undirected mesh edge; `vertices[0] < vertices[1]` fixes the global orientation.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Edge {
    pub vertices: [usize; 2],
    /// Cell traversing the edge from `vertices[0]` to `vertices[1]`, if any.
    pub left: Option<usize>,
    /// Cell traversing it the other way, if any.
    pub right: Option<usize>,
}

impl Edge {
    pub fn is_boundary(&self) -> bool {
        self.left.is_none() || self.right.is_none()
    }

    pub fn cells(&self) -> impl Iterator<Item = usize> + '_ {
        self.left.iter().chain(self.right.iter()).copied()
    }
}

/// Conforming polygonal tessellation. Immutable after construction.
#[derive(Clone, Debug)]
pub struct PolyMesh<T> {
    vertices: Vec<Point<T>>,
    cells: Vec<Cell<T>>,
    edges: Vec<Edge>,
    boundary_vertex: Vec<bool>,
    h: T,
}

impl<T: Real> PolyMesh<T> {
    /// Builds and validates a mesh from vertex coordinates and CCW vertex loops.
    pub fn new(vertices: Vec<Point<T>>, cell_loops: Vec<Vec<usize>>) -> Result<Self, MeshError> {
        for (i, v) in vertices.iter().enumerate() {
            if !(v[0].is_finite() && v[1].is_finite()) {
                return Err(MeshError::NonFinite(i));
            }
        }
        let nv = vertices.len();
        let mut cells = Vec::with_capacity(cell_loops.len());
        for (c, ids) in cell_loops.into_iter().enumerate() {
            if ids.len() < 3 {
                return Err(MeshError::Degenerate { cell: c, reason: format!("{} vertices", ids.len()) });
            }
            if let Some(&bad) = ids.iter().find(|&&i| i >= nv) {
                return Err(MeshError::IndexOutOfRange { cell: c, index: bad, n_vertices: nv });
            }
            let mut sorted = ids.clone();
            sorted.sort_unstable();
            if sorted.windows(2).any(|w| w[0] == w[1]) {
                return Err(MeshError::Degenerate { cell: c, reason: "repeated vertex".into() });
            }
            let pts: Vec<Point<T>> = ids.iter().map(|&i| vertices[i]).collect();
            let (area, centroid) = polygon_centroid(&pts);
            if !(area > T::zero()) {
                return Err(MeshError::Orientation { cell: c, area: area.as_f64() });
            }
            if !is_simple(&pts) {
                return Err(MeshError::NotSimple { cell: c });
            }
            let mut diameter = T::zero();
            for i in 0..pts.len() {
                for j in i + 1..pts.len() {
                    diameter = diameter.max(dist(pts[i], pts[j]));
                }
            }
            cells.push(Cell { vertex_ids: ids, edge_ids: Vec::new(), area, diameter, centroid });
        }

        let mut edges: Vec<Edge> = Vec::new();
        let mut lookup: HashMap<(usize, usize), usize> = HashMap::new();
        for c in 0..cells.len() {
            let m = cells[c].vertex_ids.len();
            let mut edge_ids = Vec::with_capacity(m);
            for i in 0..m {
                let a = cells[c].vertex_ids[i];
                let b = cells[c].vertex_ids[(i + 1) % m];
                let key = (a.min(b), a.max(b));
                let e = *lookup.entry(key).or_insert_with(|| {
                    edges.push(Edge { vertices: [key.0, key.1], left: None, right: None });
                    edges.len() - 1
                });
                let slot = if a < b { &mut edges[e].left } else { &mut edges[e].right };
                if slot.is_some() {
                    return Err(MeshError::NonManifoldEdge { a: key.0, b: key.1 });
                }
                *slot = Some(c);
                edge_ids.push(e);
            }
            cells[c].edge_ids = edge_ids;
        }

        let mut boundary_vertex = vec![false; nv];
        let mut balance = vec![0i64; nv];
        for e in edges.iter().filter(|e| e.is_boundary()) {
            let [a, b] = e.vertices;
            boundary_vertex[a] = true;
            boundary_vertex[b] = true;
            let (from, to) = if e.left.is_some() { (a, b) } else { (b, a) };
            balance[from] += 1;
            balance[to] -= 1;
        }
        if let Some(v) = balance.iter().position(|&b| b != 0) {
            return Err(MeshError::OpenBoundary(v));
        }

        let h = cells.iter().fold(T::zero(), |m, c| m.max(c.diameter));
        Ok(Self { vertices, cells, edges, boundary_vertex, h })
    }

    pub fn vertices(&self) -> &[Point<T>] {
        &self.vertices
    }

    pub fn cells(&self) -> &[Cell<T>] {
        &self.cells
    }

    pub fn edges(&self) -> &[Edge] {
        &self.edges
    }

    pub fn n_vertices(&self) -> usize {
        self.vertices.len()
    }

    pub fn n_cells(&self) -> usize {
        self.cells.len()
    }

    pub fn n_edges(&self) -> usize {
        self.edges.len()
    }

    pub fn is_boundary_vertex(&self, v: usize) -> bool {
        self.boundary_vertex[v]
    }

    /// Mesh size `max_E h_E`.
    pub fn h(&self) -> T {
        self.h
    }

    pub fn cell_points(&self, c: usize) -> Vec<Point<T>> {
        self.cells[c].vertex_ids.iter().map(|&i| self.vertices[i]).collect()
    }

    pub fn total_area(&self) -> T {
        self.cells.iter().map(|c| c.area).sum()
    }

    /// Checks `Σ|E| = expected` to a relative tolerance.
    pub fn check_partition(&self, expected: T, rel_tol: T) -> bool {
        ((self.total_area() - expected) / expected).abs() <= rel_tol
    }

    /// `V − E + C`, equal to 1 for a tessellation of a simply connected domain.
    pub fn euler_characteristic(&self) -> i64 {
        self.n_vertices() as i64 - self.n_edges() as i64 + self.n_cells() as i64
    }

    pub fn audit(&self) -> MeshQualityReport<T> {
        audit_mesh(self)
    }
}

/// Segments `p0p1` and `q0q1` intersect (including touching).
fn segments_intersect<T: Real>(p0: Point<T>, p1: Point<T>, q0: Point<T>, q1: Point<T>) -> bool {
    let d1 = orient(q0, q1, p0);
    let d2 = orient(q0, q1, p1);
    let d3 = orient(p0, p1, q0);
    let d4 = orient(p0, p1, q1);
    let z = T::zero();
    if ((d1 > z && d2 < z) || (d1 < z && d2 > z)) && ((d3 > z && d4 < z) || (d3 < z && d4 > z)) {
        return true;
    }
    let on = |a: Point<T>, b: Point<T>, p: Point<T>, d: T| {
        d == z && p[0] >= a[0].min(b[0]) && p[0] <= a[0].max(b[0]) && p[1] >= a[1].min(b[1]) && p[1] <= a[1].max(b[1])
    };
    on(q0, q1, p0, d1) || on(q0, q1, p1, d2) || on(p0, p1, q0, d3) || on(p0, p1, q1, d4)
}

pub(crate) fn is_simple<T: Real>(pts: &[Point<T>]) -> bool {
    let n = pts.len();
    for i in 0..n {
        let (a0, a1) = (pts[i], pts[(i + 1) % n]);
        for j in i + 1..n {
            // adjacent edges share a vertex by construction
            if j == i + 1 || (i == 0 && j == n - 1) {
                continue;
            }
            if segments_intersect(a0, a1, pts[j], pts[(j + 1) % n]) {
                return false;
            }
        }
    }
    true
}

/// Per-cell shape regularity indicators.
#[derive(Clone, Debug)]
pub struct CellQuality<T> {
    /// `min_e |e| / h_E`.
    pub edge_ratio: T,
    /// Radius of the largest ball about the centroid contained in the polygon's kernel, over `h_E`.
    pub star_ratio: T,
}

#[derive(Clone, Debug)]
pub struct MeshQualityReport<T> {
    pub cells: Vec<CellQuality<T>>,
    pub min_edge_ratio: T,
    pub min_star_ratio: T,
}

pub fn cell_quality<T: Real>(pts: &[Point<T>], diameter: T, centroid: Point<T>) -> CellQuality<T> {
    let n = pts.len();
    let mut min_edge = T::infinity();
    let mut min_dist = T::infinity();
    for i in 0..n {
        let (a, b) = (pts[i], pts[(i + 1) % n]);
        let len = dist(a, b);
        min_edge = min_edge.min(len);
        // signed distance of the centroid to the edge line, positive inside (CCW)
        min_dist = min_dist.min(orient(a, b, centroid) / len);
    }
    CellQuality { edge_ratio: min_edge / diameter, star_ratio: min_dist.max(T::zero()) / diameter }
}

pub fn audit_mesh<T: Real>(mesh: &PolyMesh<T>) -> MeshQualityReport<T> {
    let cells: Vec<CellQuality<T>> = (0..mesh.n_cells())
        .map(|c| {
            let cell = &mesh.cells()[c];
            cell_quality(&mesh.cell_points(c), cell.diameter, cell.centroid)
        })
        .collect();
    let min_edge_ratio = cells.iter().fold(T::infinity(), |m, q| m.min(q.edge_ratio));
    let min_star_ratio = cells.iter().fold(T::infinity(), |m, q| m.min(q.star_ratio));
    MeshQualityReport { cells, min_edge_ratio, min_star_ratio }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn unit_square() -> PolyMesh<f64> {
        PolyMesh::new(vec![[0.0, 0.0], [1.0, 0.0], [1.0, 1.0], [0.0, 1.0]], vec![vec![0, 1, 2, 3]]).unwrap()
    }

    #[test]
    fn single_square_geometry() {
        let m = unit_square();
        let c = &m.cells()[0];
        assert_eq!(c.area, 1.0);
        assert!((c.diameter - 2f64.sqrt()).abs() < 1e-15);
        assert_eq!(c.centroid, [0.5, 0.5]);
        assert_eq!(m.n_edges(), 4);
        assert!(m.edges().iter().all(Edge::is_boundary));
        assert_eq!(m.euler_characteristic(), 1);
    }

    #[test]
    fn quality_of_square_and_equilateral_triangle() {
        let q = unit_square().audit();
        assert!((q.min_edge_ratio - 1.0 / 2f64.sqrt()).abs() < 1e-15);
        assert!((q.min_star_ratio - 0.5 / 2f64.sqrt()).abs() < 1e-15);
        let t = PolyMesh::new(vec![[0.0, 0.0], [1.0, 0.0], [0.5, 0.75f64.sqrt()]], vec![vec![0, 1, 2]]).unwrap();
        let qt = t.audit();
        assert!((qt.min_edge_ratio - 1.0).abs() < 1e-15);
        assert!(qt.min_star_ratio > 0.0 && qt.min_star_ratio <= 1.0);
    }

    #[test]
    fn rejects_clockwise_cell() {
        let err = PolyMesh::new(vec![[0.0, 0.0], [1.0, 0.0], [1.0, 1.0], [0.0, 1.0]], vec![vec![0, 3, 2, 1]])
            .unwrap_err();
        assert!(matches!(err, MeshError::Orientation { cell: 0, .. }));
    }

    #[test]
    fn rejects_out_of_range_and_self_intersection() {
        let v = vec![[0.0, 0.0], [1.0, 0.0], [1.0, 1.0], [0.0, 1.0]];
        assert!(matches!(
            PolyMesh::new(v.clone(), vec![vec![0, 1, 7]]),
            Err(MeshError::IndexOutOfRange { index: 7, .. })
        ));
        // bow-tie with positive net area
        let bow = vec![[0.0, 0.0], [2.0, 0.0], [0.0, 1.0], [1.0, 1.5], [2.0, 1.0]];
        let err = PolyMesh::new(bow, vec![vec![0, 1, 2, 3, 4]]).unwrap_err();
        assert!(matches!(err, MeshError::NotSimple { .. } | MeshError::Orientation { .. }), "{err:?}");
    }

    #[test]
    fn rejects_overlapping_cells() {
        let v = vec![[0.0, 0.0], [1.0, 0.0], [1.0, 1.0], [0.0, 1.0]];
        let err = PolyMesh::new(v, vec![vec![0, 1, 2, 3], vec![0, 1, 2, 3]]).unwrap_err();
        assert!(matches!(err, MeshError::NonManifoldEdge { .. }));
    }
}
