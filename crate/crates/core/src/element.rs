//! Geometry and quadrature cached per polygon.

use crate::basis::ScaledMonomials;
use crate::dofs::LocalDofLayout;
use crate::linalg::DMat;
use crate::mesh::PolyMesh;
use crate::quadrature::{gauss_legendre, gauss_lobatto, polygon_rule, segment_point, QuadRule, QuadratureError};
use crate::real::{dist, Point, Real};

/// One edge of a polygon, oriented along the polygon's CCW traversal.
#[derive(Clone, Debug)]
pub struct ElementEdge<T> {
    pub start: Point<T>,
    pub end: Point<T>,
    pub length: T,
    /// Outward unit normal.
    pub normal: Point<T>,
    /// The `k + 1` Lobatto nodes and their weights (already multiplied by the length).
    pub lobatto_points: Vec<Point<T>>,
    pub lobatto_weights: Vec<T>,
    /// Gauss rule for traces times smooth data.
    pub gauss: QuadRule<T>,
    /// Lagrange basis of the Lobatto nodes at the Gauss points (`nGauss × (k+1)`).
    pub gauss_lagrange: DMat<T>,
}

/// A polygon with everything needed to build its projectors and forms.
#[derive(Clone, Debug)]
pub struct LocalElement<T> {
    pub k: usize,
    pub vertices: Vec<Point<T>>,
    pub area: T,
    pub centroid: Point<T>,
    pub diameter: T,
    pub perimeter: T,
    pub layout: LocalDofLayout,
    pub basis: ScaledMonomials<T>,
    pub volume_rule: QuadRule<T>,
    pub edges: Vec<ElementEdge<T>>,
}

/// Default integration degree for local forms.
pub fn default_quad_degree(k: usize) -> usize {
    2 * k + 2
}

/// Lagrange basis of `nodes` evaluated at `s`.
pub(crate) fn lagrange_values(nodes: &[f64], s: f64) -> Vec<f64> {
    (0..nodes.len())
        .map(|j| {
            nodes
                .iter()
                .enumerate()
                .filter(|&(m, _)| m != j)
                .map(|(_, &sm)| (s - sm) / (nodes[j] - sm))
                .product()
        })
        .collect()
}

impl<T: Real> LocalElement<T> {
    pub fn from_mesh(mesh: &PolyMesh<T>, cell: usize, k: usize, quad_degree: usize) -> Result<Self, QuadratureError> {
        let c = &mesh.cells()[cell];
        Self::new(mesh.cell_points(cell), c.area, c.centroid, c.diameter, k, quad_degree)
    }

    /// Builds from CCW vertices; geometry is recomputed if not supplied by a mesh.
    pub fn from_polygon(vertices: Vec<Point<T>>, k: usize, quad_degree: usize) -> Result<Self, QuadratureError> {
        let (area, centroid) = crate::quadrature::polygon_centroid(&vertices);
        let mut diameter = T::zero();
        for i in 0..vertices.len() {
            for j in i + 1..vertices.len() {
                diameter = diameter.max(dist(vertices[i], vertices[j]));
            }
        }
        Self::new(vertices, area, centroid, diameter, k, quad_degree)
    }

    fn new(
        vertices: Vec<Point<T>>,
        area: T,
        centroid: Point<T>,
        diameter: T,
        k: usize,
        quad_degree: usize,
    ) -> Result<Self, QuadratureError> {
        assert!(k >= 1, "order k must be at least 1");
        let quad_degree = quad_degree.max(2 * k);
        let volume_rule = polygon_rule(&vertices, quad_degree)?;
        let (lob_s, lob_w) = gauss_lobatto(k + 1);
        let n_gauss = quad_degree / 2 + 1;
        let (gs, gw) = gauss_legendre(n_gauss);
        let gauss_lagrange = {
            let mut m = DMat::zeros(n_gauss, k + 1);
            for (g, &s) in gs.iter().enumerate() {
                for (j, v) in lagrange_values(&lob_s, s).into_iter().enumerate() {
                    m[(g, j)] = T::lit(v);
                }
            }
            m
        };
        let n = vertices.len();
        let mut perimeter = T::zero();
        let edges = (0..n)
            .map(|i| {
                let a = vertices[i];
                let b = vertices[(i + 1) % n];
                let length = dist(a, b);
                perimeter += length;
                let normal = [(b[1] - a[1]) / length, (a[0] - b[0]) / length];
                ElementEdge {
                    start: a,
                    end: b,
                    length,
                    normal,
                    lobatto_points: lob_s.iter().map(|&s| segment_point(a, b, T::lit(s))).collect(),
                    lobatto_weights: lob_w.iter().map(|&w| T::lit(w) * length).collect(),
                    gauss: QuadRule {
                        points: gs.iter().map(|&s| segment_point(a, b, T::lit(s))).collect(),
                        weights: gw.iter().map(|&w| T::lit(w) * length).collect(),
                        degree: 2 * n_gauss - 1,
                    },
                    gauss_lagrange: gauss_lagrange.clone(),
                }
            })
            .collect();
        Ok(Self {
            k,
            area,
            centroid,
            diameter,
            perimeter,
            layout: LocalDofLayout::new(k, n),
            basis: ScaledMonomials::new(centroid, diameter, k),
            volume_rule,
            edges,
            vertices,
        })
    }

    pub fn n_dofs(&self) -> usize {
        self.layout.total()
    }

    /// Values of the local DoF vector's edge trace at the Gauss points of `edge`, as a
    /// `nGauss × N` matrix.
    pub fn trace_at_gauss(&self, edge: usize) -> DMat<T> {
        let e = &self.edges[edge];
        let n = self.n_dofs();
        let mut m = DMat::zeros(e.gauss.len(), n);
        for g in 0..e.gauss.len() {
            for j in 0..=self.k {
                m[(g, self.layout.boundary_node(edge, j))] += e.gauss_lagrange[(g, j)];
            }
        }
        m
    }
}
