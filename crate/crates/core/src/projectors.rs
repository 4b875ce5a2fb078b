//! Computable polynomial projections of the enhanced virtual element space, as matrices
//! acting on local DoF vectors.
//!
//! Notation for the matrices (`n_k = dim P_k`, `N` = local DoFs):
//! - `D` (`N × n_k`): DoFs of the scaled monomials;
//! - `G` (`n_k × n_k`): `∫∇m_α·∇m_β`, first row replaced by the boundary mean of `m_β`;
//! - `B` (`n_k × N`): right-hand side `∫∇m_α·∇φ_i` by integration by parts, first row the
//!   boundary mean of `φ_i`;
//! - `H` (`n_k × n_k`): mass matrix;
//! - `C` (`n_k × N`): moments `∫ m_α φ_i`, read from the DoFs up to degree `k − 2` and
//!   from `Π∇φ_i` above (the enhancement constraint).

use thiserror::Error;

use crate::basis::poly_dim;
use crate::element::LocalElement;
use crate::linalg::{DMat, LinalgError};
use crate::real::Real;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ProjectorError {
    #[error("singular {matrix} matrix: {source}")]
    Singular {
        matrix: &'static str,
        #[source]
        source: LinalgError,
    },
}

fn singular(matrix: &'static str) -> impl FnOnce(LinalgError) -> ProjectorError {
    move |source| ProjectorError::Singular { matrix, source }
}

#[derive(Clone, Debug)]
pub struct ElementProjectors<T> {
    pub d: DMat<T>,
    pub g: DMat<T>,
    pub b: DMat<T>,
    pub h: DMat<T>,
    pub c: DMat<T>,
    /// Monomial coefficients of `Π∇_k φ_i` (`n_k × N`).
    pub pi_nabla_star: DMat<T>,
    /// DoFs of `Π∇_k φ_i` (`N × N`).
    pub pi_nabla_dof: DMat<T>,
    /// Monomial coefficients of `Π0_k φ_i` (`n_k × N`).
    pub pi0_k: DMat<T>,
    /// Coefficients of `Π0_{k−1}∇φ_i`: x-components then y-components (`2 dim P_{k−1} × N`).
    pub pi0_grad_km1: DMat<T>,
    /// Coefficients of `Π0_k∇φ_i` (`2 n_k × N`).
    pub pi0_grad_k: DMat<T>,
}

impl<T: Real> ElementProjectors<T> {
    pub fn compute(elem: &LocalElement<T>) -> Result<Self, ProjectorError> {
        let h = elem.basis.mass_matrix(&elem.volume_rule);
        let d = dof_matrix(elem, &h);
        let (g, b) = nabla_system(elem);
        let pi_nabla_star = g.solve(&b).map_err(singular("G"))?;
        let pi_nabla_dof = d.matmul(&pi_nabla_star);
        let c = moment_matrix(elem, &h, &pi_nabla_star);
        let h_lu = h.lu().map_err(singular("H"))?;
        let pi0_k = h_lu.solve(&c);
        let pi0_grad_km1 = pi0_grad(elem, &h, &c, elem.k - 1)?;
        let pi0_grad_k = pi0_grad(elem, &h, &c, elem.k)?;
        Ok(Self { d, g, b, h, c, pi_nabla_star, pi_nabla_dof, pi0_k, pi0_grad_km1, pi0_grad_k })
    }

    /// `(Π0_n∇)` for `n ∈ {k−1, k}`.
    pub fn pi0_grad(&self, n: usize, k: usize) -> &DMat<T> {
        if n == k {
            &self.pi0_grad_k
        } else {
            &self.pi0_grad_km1
        }
    }
}

/// Π∇ only: returns `(Π∇ star, Π∇ dof)`.
pub fn compute_pi_nabla<T: Real>(elem: &LocalElement<T>) -> Result<(DMat<T>, DMat<T>), ProjectorError> {
    let h = elem.basis.mass_matrix(&elem.volume_rule);
    let d = dof_matrix(elem, &h);
    let (g, b) = nabla_system(elem);
    let star = g.solve(&b).map_err(singular("G"))?;
    let dof = d.matmul(&star);
    Ok((star, dof))
}

/// `Π0_k` from a precomputed `Π∇` star matrix.
pub fn compute_pi0<T: Real>(elem: &LocalElement<T>, pi_nabla_star: &DMat<T>) -> Result<DMat<T>, ProjectorError> {
    let h = elem.basis.mass_matrix(&elem.volume_rule);
    let c = moment_matrix(elem, &h, pi_nabla_star);
    h.solve(&c).map_err(singular("H"))
}

/// DoFs of the monomials of `P_k`.
pub fn dof_matrix<T: Real>(elem: &LocalElement<T>, h: &DMat<T>) -> DMat<T> {
    let k = elem.k;
    let layout = elem.layout;
    let nk = elem.basis.dim();
    let mut d = DMat::zeros(layout.total(), nk);
    for (i, v) in elem.vertices.iter().enumerate() {
        d.row_mut(i).copy_from_slice(&elem.basis.eval(*v));
    }
    for (i, e) in elem.edges.iter().enumerate() {
        for j in 1..k {
            d.row_mut(layout.boundary_node(i, j)).copy_from_slice(&elem.basis.eval(e.lobatto_points[j]));
        }
    }
    for beta in 0..layout.n_internal_dofs() {
        let row = layout.moment(beta);
        for alpha in 0..nk {
            d[(row, alpha)] = h[(beta, alpha)] / elem.area;
        }
    }
    d
}

/// `(G, B)` of the `Π∇` normal equations, with the boundary-mean row in place of row 0.
pub fn nabla_system<T: Real>(elem: &LocalElement<T>) -> (DMat<T>, DMat<T>) {
    let k = elem.k;
    let layout = elem.layout;
    let nk = elem.basis.dim();
    let n = layout.total();
    let mut g = DMat::zeros(nk, nk);
    for (&p, &w) in elem.volume_rule.points.iter().zip(&elem.volume_rule.weights) {
        let (dx, dy) = elem.basis.eval_grad(p);
        for a in 1..nk {
            for bb in 1..nk {
                g[(a, bb)] += w * (dx[a] * dx[bb] + dy[a] * dy[bb]);
            }
        }
    }
    let mut b = DMat::zeros(nk, n);
    let inv_perimeter = T::one() / elem.perimeter;
    for (i, e) in elem.edges.iter().enumerate() {
        for j in 0..=k {
            let p = e.lobatto_points[j];
            let w = e.lobatto_weights[j];
            let dof = layout.boundary_node(i, j);
            let vals = elem.basis.eval(p);
            for bb in 0..nk {
                g[(0, bb)] += w * vals[bb] * inv_perimeter;
            }
            b[(0, dof)] += w * inv_perimeter;
            let (dx, dy) = elem.basis.eval_grad(p);
            for a in 1..nk {
                b[(a, dof)] += w * (dx[a] * e.normal[0] + dy[a] * e.normal[1]);
            }
        }
    }
    for a in 1..nk {
        for (beta, coef) in elem.basis.laplacian_coeffs(a) {
            b[(a, layout.moment(beta))] -= coef * elem.area;
        }
    }
    (g, b)
}

/// Moments `∫ m_α φ_i` for `|α| ≤ k`.
pub fn moment_matrix<T: Real>(elem: &LocalElement<T>, h: &DMat<T>, pi_nabla_star: &DMat<T>) -> DMat<T> {
    let layout = elem.layout;
    let nk = elem.basis.dim();
    let n_int = layout.n_internal_dofs();
    let mut c = DMat::zeros(nk, layout.total());
    for a in 0..n_int {
        c[(a, layout.moment(a))] = elem.area;
    }
    let hp = h.rows_range(n_int, nk).matmul(pi_nabla_star);
    for a in n_int..nk {
        c.row_mut(a).copy_from_slice(hp.row(a - n_int));
    }
    c
}

/// `Π0_n ∇` with `n ≤ k`, stacked as x-coefficients over y-coefficients.
pub fn pi0_grad<T: Real>(elem: &LocalElement<T>, h: &DMat<T>, c: &DMat<T>, n: usize) -> Result<DMat<T>, ProjectorError> {
    let nn = poly_dim(n as isize);
    let ndof = elem.layout.total();
    let mut ex = DMat::zeros(nn, ndof);
    let mut ey = DMat::zeros(nn, ndof);
    for g in 0..nn {
        if let Some((idx, coef)) = elem.basis.dx_coeff(g) {
            for (o, &cv) in ex.row_mut(g).iter_mut().zip(c.row(idx)) {
                *o -= coef * cv;
            }
        }
        if let Some((idx, coef)) = elem.basis.dy_coeff(g) {
            for (o, &cv) in ey.row_mut(g).iter_mut().zip(c.row(idx)) {
                *o -= coef * cv;
            }
        }
    }
    for (i, e) in elem.edges.iter().enumerate() {
        for (q, (&p, &w)) in e.gauss.points.iter().zip(&e.gauss.weights).enumerate() {
            let vals = elem.basis.eval(p);
            for j in 0..=elem.k {
                let lag = e.gauss_lagrange[(q, j)];
                let dof = elem.layout.boundary_node(i, j);
                for g in 0..nn {
                    let s = w * lag * vals[g];
                    ex[(g, dof)] += s * e.normal[0];
                    ey[(g, dof)] += s * e.normal[1];
                }
            }
        }
    }
    let lu = h.leading_block(nn).lu().map_err(singular("vector mass"))?;
    let px = lu.solve(&ex);
    let py = lu.solve(&ey);
    let mut out = DMat::zeros(2 * nn, ndof);
    for g in 0..nn {
        out.row_mut(g).copy_from_slice(px.row(g));
        out.row_mut(nn + g).copy_from_slice(py.row(g));
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::basis::monomial_index;

    fn square(k: usize) -> LocalElement<f64> {
        LocalElement::from_polygon(vec![[0.0, 0.0], [1.0, 0.0], [1.0, 1.0], [0.0, 1.0]], k, 2 * k + 2).unwrap()
    }

    fn pentagon(k: usize) -> LocalElement<f64> {
        LocalElement::from_polygon(vec![[0.0, 0.0], [1.0, 0.1], [1.2, 0.8], [0.4, 1.1], [-0.1, 0.6]], k, 2 * k + 2)
            .unwrap()
    }

    fn assert_identity(m: &DMat<f64>, tol: f64) {
        for i in 0..m.nrows() {
            for j in 0..m.ncols() {
                let e = if i == j { 1.0 } else { 0.0 };
                assert!((m[(i, j)] - e).abs() < tol, "({i},{j}) = {}", m[(i, j)]);
            }
        }
    }

    #[test]
    fn projectors_reproduce_polynomials() {
        for k in 1..=4 {
            for elem in [square(k), pentagon(k)] {
                let p = ElementProjectors::compute(&elem).unwrap();
                assert_identity(&p.pi_nabla_star.matmul(&p.d), 1e-10);
                assert_identity(&p.pi0_k.matmul(&p.d), 1e-10);
            }
        }
    }

    #[test]
    fn hat_function_average_gradient_k1() {
        // DoF vector e₁ on the unit square; the bilinear hat at (0,0) has mean gradient (−½, −½)
        let elem = square(1);
        let p = ElementProjectors::compute(&elem).unwrap();
        let h = elem.diameter;
        let star = &p.pi_nabla_star;
        let gx = star[(monomial_index(1, 0), 0)] / h;
        let gy = star[(monomial_index(0, 1), 0)] / h;
        assert!((gx + 0.5).abs() < 1e-14 && (gy + 0.5).abs() < 1e-14);
        // Π0_0 ∇ is the same mean gradient
        let g0 = &p.pi0_grad_km1;
        assert!((g0[(0, 0)] + 0.5).abs() < 1e-14 && (g0[(1, 0)] + 0.5).abs() < 1e-14);
    }

    #[test]
    fn gradient_projection_of_linear_monomial() {
        let elem = pentagon(2);
        let p = ElementProjectors::compute(&elem).unwrap();
        let v: Vec<f64> = (0..p.d.nrows()).map(|i| p.d[(i, monomial_index(1, 0))]).collect();
        for grad in [&p.pi0_grad_km1, &p.pi0_grad_k] {
            let c = grad.mul_vec(&v);
            let nn = c.len() / 2;
            assert!((c[0] - 1.0 / elem.diameter).abs() < 1e-12);
            assert!(c[1..nn].iter().all(|x| x.abs() < 1e-12));
            assert!(c[nn..].iter().all(|x| x.abs() < 1e-12));
        }
        let constant = vec![3.0; p.d.nrows() - 1].into_iter().chain([3.0]).collect::<Vec<_>>();
        // moment DoF of a constant is the constant times (1/|E|)∫m_0 = constant
        let g = p.pi0_grad_k.mul_vec(&constant);
        assert!(g.iter().all(|x| x.abs() < 1e-12));
    }

    #[test]
    fn boundary_mean_constraint_holds_for_random_vectors() {
        let elem = pentagon(3);
        let p = ElementProjectors::compute(&elem).unwrap();
        let n = p.d.nrows();
        let v: Vec<f64> = (0..n).map(|i| ((i * 37 % 11) as f64 - 5.0) / 3.0).collect();
        let coeffs = p.pi_nabla_star.mul_vec(&v);
        // ∫_∂E (v − Π∇v) ds via Lobatto
        let mut res = 0.0;
        for (i, e) in elem.edges.iter().enumerate() {
            for j in 0..=elem.k {
                let pv: f64 = elem.basis.eval(e.lobatto_points[j]).iter().zip(&coeffs).map(|(a, b)| a * b).sum();
                res += e.lobatto_weights[j] * (v[elem.layout.boundary_node(i, j)] - pv);
            }
        }
        assert!(res.abs() < 1e-12, "{res}");
    }

    #[test]
    fn mass_times_pi0_equals_moment_matrix() {
        let elem = pentagon(3);
        let p = ElementProjectors::compute(&elem).unwrap();
        let hp = p.h.matmul(&p.pi0_k);
        assert!(hp.sub(&p.c).max_abs() < 1e-12);
    }

    #[test]
    fn pi0_of_internal_basis_function_matches_dense_oracle() {
        // k = 2, unit square: the DoF vector dual to the single moment. Its Π0 has
        // ∫ Π0 v = ∫ v = |E| · moment = 1; recompute H at high degree independently.
        let elem = square(2);
        let p = ElementProjectors::compute(&elem).unwrap();
        let n = p.d.nrows();
        let mut v = vec![0.0; n];
        v[n - 1] = 1.0;
        let coeffs = p.pi0_k.mul_vec(&v);
        let fine = crate::quadrature::polygon_rule(&elem.vertices, 16).unwrap();
        let integral = fine.integrate(|x| elem.basis.eval(x).iter().zip(&coeffs).map(|(a, b)| a * b).sum());
        assert!((integral - 1.0).abs() < 1e-13);
        let h_fine = elem.basis.mass_matrix(&fine);
        assert!(h_fine.sub(&p.h).max_abs() < 1e-14);
    }
}
