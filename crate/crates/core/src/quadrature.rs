//! Quadrature on triangles, polygons (fan sub-triangulation) and segments.

use thiserror::Error;

use crate::real::{orient, Point, Real};

pub const MAX_TRIANGLE_DEGREE: usize = 20;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum QuadratureError {
    #[error("unsupported triangle rule degree {0} (supported: 1..={MAX_TRIANGLE_DEGREE})")]
    UnsupportedDegree(usize),
    #[error("no point found from which every polygon edge is visible")]
    NoFanPoint,
}

/// Points and weights in physical coordinates, exact for polynomials up to `degree`.
#[derive(Clone, Debug)]
pub struct QuadRule<T> {
    pub points: Vec<Point<T>>,
    pub weights: Vec<T>,
    pub degree: usize,
}

impl<T: Real> QuadRule<T> {
    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    pub fn measure(&self) -> T {
        self.weights.iter().copied().sum()
    }

    pub fn integrate(&self, mut f: impl FnMut(Point<T>) -> T) -> T {
        self.points.iter().zip(&self.weights).map(|(&p, &w)| w * f(p)).sum()
    }
}

/// Gauss–Legendre nodes and weights on `[0, 1]` (weights sum to 1).
pub fn gauss_legendre(n: usize) -> (Vec<f64>, Vec<f64>) {
    assert!(n >= 1, "gauss_legendre: need at least one point");
    let mut nodes = vec![0.0; n];
    let mut weights = vec![0.0; n];
    let nf = n as f64;
    for i in 0..(n + 1) / 2 {
        let mut x = (std::f64::consts::PI * (i as f64 + 0.75) / (nf + 0.5)).cos();
        let mut dp = 0.0;
        for _ in 0..100 {
            let (p, d) = legendre_with_derivative(n, x);
            dp = d;
            let dx = p / d;
            x -= dx;
            if dx.abs() < 1e-16 {
                break;
            }
        }
        let (_, d) = legendre_with_derivative(n, x);
        if d != 0.0 {
            dp = d;
        }
        let w = 2.0 / ((1.0 - x * x) * dp * dp);
        // map [-1,1] → [0,1]
        nodes[i] = 0.5 * (1.0 - x);
        nodes[n - 1 - i] = 0.5 * (1.0 + x);
        weights[i] = 0.5 * w;
        weights[n - 1 - i] = 0.5 * w;
    }
    (nodes, weights)
}

fn legendre_with_derivative(n: usize, x: f64) -> (f64, f64) {
    let mut p0 = 1.0;
    let mut p1 = x;
    if n == 0 {
        return (1.0, 0.0);
    }
    for j in 2..=n {
        let jf = j as f64;
        let p2 = ((2.0 * jf - 1.0) * x * p1 - (jf - 1.0) * p0) / jf;
        p0 = p1;
        p1 = p2;
    }
    let d = n as f64 * (x * p1 - p0) / (x * x - 1.0);
    (p1, d)
}

/// Gauss–Lobatto nodes and weights on `[0, 1]` with `n ≥ 2` points, endpoints included.
pub fn gauss_lobatto(n: usize) -> (Vec<f64>, Vec<f64>) {
    assert!(n >= 2, "gauss_lobatto: need at least two points");
    let deg = n - 1;
    let degf = deg as f64;
    let mut nodes = vec![0.0; n];
    let mut weights = vec![0.0; n];
    for i in 0..n {
        // Chebyshev–Gauss–Lobatto initial guess, descending in [-1,1]
        let mut x = (std::f64::consts::PI * i as f64 / degf).cos();
        if i != 0 && i != deg {
            for _ in 0..100 {
                // roots of P'_deg: Newton on q(x) = (1 - x²) P'_deg(x)
                let (p, dp) = legendre_with_derivative(deg, x);
                // (1-x²)P'' = 2xP' - deg(deg+1)P
                let d2p = (2.0 * x * dp - degf * (degf + 1.0) * p) / (1.0 - x * x);
                let dx = dp / d2p;
                x -= dx;
                if dx.abs() < 1e-16 {
                    break;
                }
            }
        }
        let p = if i == 0 {
            1.0
        } else if i == deg {
            if deg % 2 == 0 { 1.0 } else { -1.0 }
        } else {
            legendre_with_derivative(deg, x).0
        };
        let w = 2.0 / (degf * (degf + 1.0) * p * p);
        nodes[n - 1 - i] = 0.5 * (1.0 + x);
        weights[n - 1 - i] = 0.5 * w;
    }
    nodes[0] = 0.0;
    nodes[n - 1] = 1.0;
    (nodes, weights)
}

/// Rule on the reference triangle `(0,0), (1,0), (0,1)`.
pub fn triangle_rule<T: Real>(degree: usize) -> Result<QuadRule<T>, QuadratureError> {
    if degree == 0 || degree > MAX_TRIANGLE_DEGREE {
        return Err(QuadratureError::UnsupportedDegree(degree));
    }
    let l = T::lit;
    let rule = match degree {
        1 => QuadRule { points: vec![[l(1.0 / 3.0), l(1.0 / 3.0)]], weights: vec![l(0.5)], degree },
        2 => QuadRule {
            points: vec![
                [l(1.0 / 6.0), l(1.0 / 6.0)],
                [l(2.0 / 3.0), l(1.0 / 6.0)],
                [l(1.0 / 6.0), l(2.0 / 3.0)],
            ],
            weights: vec![l(1.0 / 6.0); 3],
            degree,
        },
        _ => {
            // collapsed tensor Gauss rule; the Duffy Jacobian (1-u) raises the u-degree by one
            let n = (degree + 3) / 2;
            let (x, w) = gauss_legendre(n);
            let mut points = Vec::with_capacity(n * n);
            let mut weights = Vec::with_capacity(n * n);
            for (u, wu) in x.iter().zip(&w) {
                for (v, wv) in x.iter().zip(&w) {
                    points.push([l(*u), l(v * (1.0 - u))]);
                    weights.push(l(wu * wv * (1.0 - u)));
                }
            }
            QuadRule { points, weights, degree }
        }
    };
    Ok(rule)
}

/// Area-weighted centroid of a simple polygon given CCW.
pub fn polygon_centroid<T: Real>(vertices: &[Point<T>]) -> (T, Point<T>) {
    let n = vertices.len();
    let mut a = T::zero();
    let mut cx = T::zero();
    let mut cy = T::zero();
    // shift to the first vertex for roundoff
    let o = vertices[0];
    for i in 0..n {
        let p = [vertices[i][0] - o[0], vertices[i][1] - o[1]];
        let q = [vertices[(i + 1) % n][0] - o[0], vertices[(i + 1) % n][1] - o[1]];
        let c = p[0] * q[1] - q[0] * p[1];
        a += c;
        cx += (p[0] + q[0]) * c;
        cy += (p[1] + q[1]) * c;
    }
    let area = a * T::lit(0.5);
    let six = T::lit(6.0) * area;
    (area, [o[0] + cx / six, o[1] + cy / six])
}

fn sees_all_edges<T: Real>(vertices: &[Point<T>], p: Point<T>, tol: T) -> T {
    let n = vertices.len();
    (0..n)
        .map(|i| orient(p, vertices[i], vertices[(i + 1) % n]))
        .fold(T::infinity(), T::min)
        - tol
}

/// Point from which every edge is visible: the centroid when it works, otherwise the
/// centroid of the polygon's kernel (intersection of the inner half-planes of all edges).
pub fn fan_point<T: Real>(vertices: &[Point<T>]) -> Result<Point<T>, QuadratureError> {
    let (area, c) = polygon_centroid(vertices);
    let tol = area.abs() * T::lit(1e-10);
    if sees_all_edges(vertices, c, tol) > T::zero() {
        return Ok(c);
    }
    let (mut lo, mut hi) = (vertices[0], vertices[0]);
    for v in vertices {
        lo = [lo[0].min(v[0]), lo[1].min(v[1])];
        hi = [hi[0].max(v[0]), hi[1].max(v[1])];
    }
    let mut kernel = vec![lo, [hi[0], lo[1]], hi, [lo[0], hi[1]]];
    let n = vertices.len();
    for i in 0..n {
        kernel = clip_left(&kernel, vertices[i], vertices[(i + 1) % n]);
        if kernel.len() < 3 {
            return Err(QuadratureError::NoFanPoint);
        }
    }
    let (ka, kc) = polygon_centroid(&kernel);
    if ka > T::zero() && sees_all_edges(vertices, kc, tol) > T::zero() {
        Ok(kc)
    } else {
        Err(QuadratureError::NoFanPoint)
    }
}

/// Part of the convex polygon `poly` left of the directed line `a → b`.
fn clip_left<T: Real>(poly: &[Point<T>], a: Point<T>, b: Point<T>) -> Vec<Point<T>> {
    let mut out = Vec::with_capacity(poly.len() + 1);
    for i in 0..poly.len() {
        let p = poly[i];
        let q = poly[(i + 1) % poly.len()];
        let (sp, sq) = (orient(a, b, p), orient(a, b, q));
        if sp >= T::zero() {
            out.push(p);
        }
        if (sp > T::zero() && sq < T::zero()) || (sp < T::zero() && sq > T::zero()) {
            let t = sp / (sp - sq);
            out.push([p[0] + t * (q[0] - p[0]), p[1] + t * (q[1] - p[1])]);
        }
    }
    out
}

/// Polygon rule by fan triangulation; exact to `degree` (degree 0 is served by the degree-1 rule).
pub fn polygon_rule<T: Real>(vertices: &[Point<T>], degree: usize) -> Result<QuadRule<T>, QuadratureError> {
    let reference = triangle_rule::<T>(degree.max(1))?;
    let c = fan_point(vertices)?;
    let n = vertices.len();
    let mut points = Vec::with_capacity(n * reference.len());
    let mut weights = Vec::with_capacity(n * reference.len());
    for i in 0..n {
        let a = vertices[i];
        let b = vertices[(i + 1) % n];
        let e1 = [a[0] - c[0], a[1] - c[1]];
        let e2 = [b[0] - c[0], b[1] - c[1]];
        let det = e1[0] * e2[1] - e1[1] * e2[0];
        for (p, &w) in reference.points.iter().zip(&reference.weights) {
            points.push([c[0] + p[0] * e1[0] + p[1] * e2[0], c[1] + p[0] * e1[1] + p[1] * e2[1]]);
            weights.push(w * det);
        }
    }
    Ok(QuadRule { points, weights, degree })
}

/// Gauss rule on the segment `[a, b]`, exact to `degree`.
pub fn edge_rule<T: Real>(a: Point<T>, b: Point<T>, degree: usize) -> QuadRule<T> {
    let n = degree / 2 + 1;
    let (x, w) = gauss_legendre(n);
    let len = crate::real::dist(a, b);
    QuadRule {
        points: x.iter().map(|&s| segment_point(a, b, T::lit(s))).collect(),
        weights: w.iter().map(|&wi| T::lit(wi) * len).collect(),
        degree,
    }
}

/// The `k + 1` Gauss–Lobatto points of the segment, from `a` to `b`.
pub fn edge_lobatto_points<T: Real>(a: Point<T>, b: Point<T>, k: usize) -> Vec<Point<T>> {
    assert!(k >= 1, "edge_lobatto_points: k must be positive");
    let (x, _) = gauss_lobatto(k + 1);
    x.iter().map(|&s| segment_point(a, b, T::lit(s))).collect()
}

#[inline]
pub(crate) fn segment_point<T: Real>(a: Point<T>, b: Point<T>, s: T) -> Point<T> {
    [a[0] + s * (b[0] - a[0]), a[1] + s * (b[1] - a[1])]
}
