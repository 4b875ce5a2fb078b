//! Degrees of freedom of the enhanced space: vertex values, values at the interior
//! Gauss–Lobatto nodes of each edge, and scaled moments against `P_{k−2}`.

use crate::basis::{poly_dim, ScaledMonomials};
use crate::mesh::PolyMesh;
use crate::quadrature::{edge_lobatto_points, polygon_rule, QuadratureError};
use crate::real::{Point, Real};

/// What a local degree of freedom measures.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum DofKind {
    Vertex { local_vertex: usize },
    /// `node` in `1..k`, counted along the local edge direction.
    EdgeNode { local_edge: usize, node: usize },
    /// `(1/|E|) ∫_E v m_α` with `α` an index into `P_{k−2}`.
    Moment { alpha: usize },
}

/// Local DoF counts and ordering for a polygon with `n_vertices` corners.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct LocalDofLayout {
    pub k: usize,
    pub n_vertices: usize,
}

impl LocalDofLayout {
    pub fn new(k: usize, n_vertices: usize) -> Self {
        assert!(k >= 1, "order k must be at least 1");
        Self { k, n_vertices }
    }

    pub fn n_vertex_dofs(&self) -> usize {
        self.n_vertices
    }

    pub fn n_edge_dofs(&self) -> usize {
        (self.k - 1) * self.n_vertices
    }

    pub fn n_internal_dofs(&self) -> usize {
        poly_dim(self.k as isize - 2)
    }

    pub fn total(&self) -> usize {
        self.n_vertices * self.k + self.n_internal_dofs()
    }

    /// Local index of Lobatto node `node ∈ 0..=k` of local edge `edge`; the endpoints are vertex DoFs.
    pub fn boundary_node(&self, edge: usize, node: usize) -> usize {
        if node == 0 {
            edge
        } else if node == self.k {
            (edge + 1) % self.n_vertices
        } else {
            self.n_vertices + edge * (self.k - 1) + node - 1
        }
    }

    pub fn moment(&self, alpha: usize) -> usize {
        self.n_vertices * self.k + alpha
    }

    pub fn kind(&self, i: usize) -> DofKind {
        let nv = self.n_vertices;
        if i < nv {
            DofKind::Vertex { local_vertex: i }
        } else if i < nv * self.k {
            let j = i - nv;
            DofKind::EdgeNode { local_edge: j / (self.k - 1), node: j % (self.k - 1) + 1 }
        } else {
            DofKind::Moment { alpha: i - nv * self.k }
        }
    }
}

/// Local-to-global numbering: vertex DoFs, then edge DoFs by global edge and node, then
/// moments by cell.
#[derive(Clone, Debug)]
pub struct DofMap {
    k: usize,
    n_global: usize,
    cell_dofs: Vec<Vec<usize>>,
    boundary: Vec<bool>,
    n_vertex_dofs: usize,
    n_edge_dofs: usize,
}

impl DofMap {
    pub fn build<T: Real>(mesh: &PolyMesh<T>, k: usize) -> Self {
        assert!(k >= 1, "order k must be at least 1");
        let nv = mesh.n_vertices();
        let ne = mesh.n_edges();
        let n_int = poly_dim(k as isize - 2);
        let edge_base = nv;
        let int_base = nv + ne * (k - 1);
        let n_global = int_base + mesh.n_cells() * n_int;

        let mut boundary = vec![false; n_global];
        for v in 0..nv {
            boundary[v] = mesh.is_boundary_vertex(v);
        }
        for (e, edge) in mesh.edges().iter().enumerate() {
            if edge.is_boundary() {
                for t in 0..k - 1 {
                    boundary[edge_base + e * (k - 1) + t] = true;
                }
            }
        }

        let cell_dofs = mesh
            .cells()
            .iter()
            .enumerate()
            .map(|(c, cell)| {
                let m = cell.n_vertices();
                let mut dofs = Vec::with_capacity(m * k + n_int);
                dofs.extend_from_slice(&cell.vertex_ids);
                for i in 0..m {
                    let e = cell.edge_ids[i];
                    let forward = mesh.edges()[e].vertices[0] == cell.vertex_ids[i];
                    for j in 1..k {
                        let t = if forward { j } else { k - j };
                        dofs.push(edge_base + e * (k - 1) + t - 1);
                    }
                }
                dofs.extend((0..n_int).map(|a| int_base + c * n_int + a));
                dofs
            })
            .collect();

        Self { k, n_global, cell_dofs, boundary, n_vertex_dofs: nv, n_edge_dofs: ne * (k - 1) }
    }

    pub fn k(&self) -> usize {
        self.k
    }

    pub fn n_global(&self) -> usize {
        self.n_global
    }

    pub fn cell_dofs(&self, c: usize) -> &[usize] {
        &self.cell_dofs[c]
    }

    pub fn is_boundary(&self, dof: usize) -> bool {
        self.boundary[dof]
    }

    pub fn boundary_mask(&self) -> &[bool] {
        &self.boundary
    }

    pub fn n_boundary(&self) -> usize {
        self.boundary.iter().filter(|&&b| b).count()
    }

    pub fn n_vertex_dofs(&self) -> usize {
        self.n_vertex_dofs
    }

    pub fn n_edge_dofs(&self) -> usize {
        self.n_edge_dofs
    }

    /// Physical location of every point-value DoF (`None` for moments).
    pub fn dof_points<T: Real>(&self, mesh: &PolyMesh<T>) -> Vec<Option<Point<T>>> {
        let k = self.k;
        let mut pts = vec![None; self.n_global];
        for (v, p) in mesh.vertices().iter().enumerate() {
            pts[v] = Some(*p);
        }
        for (e, edge) in mesh.edges().iter().enumerate() {
            let [a, b] = edge.vertices;
            let nodes = edge_lobatto_points(mesh.vertices()[a], mesh.vertices()[b], k);
            for t in 1..k {
                pts[self.n_vertex_dofs + e * (k - 1) + t - 1] = Some(nodes[t]);
            }
        }
        pts
    }

    pub fn local<T: Real>(&self, c: usize, global: &[T]) -> Vec<T> {
        self.cell_dofs[c].iter().map(|&g| global[g]).collect()
    }
}

/// DoFs of a smooth function: point values at vertices and Lobatto nodes, and
/// `(1/|E|) ∫_E f m_α` moments by quadrature of the given degree.
pub fn interpolate_dofs<T: Real>(
    mesh: &PolyMesh<T>,
    dofs: &DofMap,
    f: &(dyn Fn(Point<T>) -> T + Sync),
    quad_degree: usize,
) -> Result<Vec<T>, QuadratureError> {
    let k = dofs.k();
    let mut out = vec![T::zero(); dofs.n_global()];
    for (i, p) in dofs.dof_points(mesh).into_iter().enumerate() {
        if let Some(p) = p {
            out[i] = f(p);
        }
    }
    if k >= 2 {
        let n_int = poly_dim(k as isize - 2);
        for (c, cell) in mesh.cells().iter().enumerate() {
            let basis = ScaledMonomials::new(cell.centroid, cell.diameter, k - 2);
            let rule = polygon_rule(&mesh.cell_points(c), quad_degree)?;
            let mut mom = vec![T::zero(); n_int];
            for (&p, &w) in rule.points.iter().zip(&rule.weights) {
                let fv = f(p) * w;
                for (m, b) in mom.iter_mut().zip(basis.eval(p)) {
                    *m += fv * b;
                }
            }
            let local = dofs.cell_dofs(c);
            let layout = LocalDofLayout::new(k, cell.n_vertices());
            for (a, m) in mom.into_iter().enumerate() {
                out[local[layout.moment(a)]] = m / cell.area;
            }
        }
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::mesh::gen_quad;

    #[test]
    fn counts_on_small_grids() {
        let m1 = gen_quad::<f64>(1).unwrap();
        let d = DofMap::build(&m1, 1);
        assert_eq!(d.n_global(), 4);
        assert_eq!(d.n_boundary(), 4);
        let d2 = DofMap::build(&m1, 2);
        assert_eq!(d2.n_global(), 9);
        assert_eq!(d2.n_boundary(), 8);
        let m2 = gen_quad::<f64>(2).unwrap();
        // 9 vertices + 12 edges + 4 cells
        assert_eq!(DofMap::build(&m2, 2).n_global(), 9 + 12 + 4);
        assert_eq!(DofMap::build(&m2, 3).n_global(), 9 + 2 * 12 + 3 * 4);
    }

    #[test]
    fn layout_formula_and_kinds() {
        let l = LocalDofLayout::new(3, 5);
        assert_eq!(l.total(), 5 * 3 + 3);
        assert_eq!(l.kind(0), DofKind::Vertex { local_vertex: 0 });
        assert_eq!(l.kind(5), DofKind::EdgeNode { local_edge: 0, node: 1 });
        assert_eq!(l.kind(6), DofKind::EdgeNode { local_edge: 0, node: 2 });
        assert_eq!(l.kind(15), DofKind::Moment { alpha: 0 });
        assert_eq!(l.boundary_node(4, 3), 0);
        assert_eq!(l.boundary_node(4, 0), 4);
    }

    #[test]
    fn shared_edges_share_dofs_with_matching_nodes() {
        let m = gen_quad::<f64>(3).unwrap();
        let k = 4;
        let d = DofMap::build(&m, k);
        let pts = d.dof_points(&m);
        for (c, cell) in m.cells().iter().enumerate() {
            let layout = LocalDofLayout::new(k, cell.n_vertices());
            let loc = d.cell_dofs(c);
            let cp = m.cell_points(c);
            for i in 0..cell.n_vertices() {
                let nodes = edge_lobatto_points(cp[i], cp[(i + 1) % cp.len()], k);
                for j in 0..=k {
                    let g = loc[layout.boundary_node(i, j)];
                    let p = pts[g].unwrap();
                    assert!((p[0] - nodes[j][0]).abs() < 1e-15 && (p[1] - nodes[j][1]).abs() < 1e-15);
                }
            }
        }
    }

    #[test]
    fn interpolation_of_constants_and_point_values() {
        let m = gen_quad::<f64>(2).unwrap();
        let d = DofMap::build(&m, 2);
        let one = interpolate_dofs(&m, &d, &|_| 1.0, 6).unwrap();
        assert!(one.iter().all(|&v| (v - 1.0).abs() < 1e-14));

        let m4 = gen_quad::<f64>(4).unwrap();
        let d1 = DofMap::build(&m4, 1);
        let f = |p: Point<f64>| (std::f64::consts::PI * p[0]).sin() * (std::f64::consts::PI * p[1]).sin();
        let v = interpolate_dofs(&m4, &d1, &f, 4).unwrap();
        for (i, p) in m4.vertices().iter().enumerate() {
            assert_eq!(v[i], f(*p));
        }
    }
}
