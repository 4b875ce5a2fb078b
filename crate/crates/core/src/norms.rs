//! Error norms of the discrete solution and the computable supg norm.

use crate::element::LocalElement;
use crate::forms::{diffusion_consistency, dofi_energy, streamline_matrix};
use crate::linalg::DMat;
use crate::projectors::ElementProjectors;
use crate::real::{Point, Real};
use crate::system::Discretization;

pub type GradFn<'a, T> = &'a (dyn Fn(Point<T>) -> [T; 2] + Sync);

/// Per-cell squared contributions of the two error norms.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct CellErrors<T> {
    /// `‖∇(u − Π∇u_h)‖²`.
    pub grad_sq: T,
    /// `‖β·∇(u − Π∇u_h)‖²`.
    pub streamline_sq: T,
}

fn cell_errors<T: Real>(
    elem: &LocalElement<T>,
    proj: &ElementProjectors<T>,
    local: &[T],
    grad_u: GradFn<'_, T>,
    beta: GradFn<'_, T>,
) -> CellErrors<T> {
    let coef = proj.pi_nabla_star.mul_vec(local);
    let mut grad_sq = T::zero();
    let mut streamline_sq = T::zero();
    for (&p, &w) in elem.volume_rule.points.iter().zip(&elem.volume_rule.weights) {
        let (dx, dy) = elem.basis.eval_grad(p);
        let gh = [
            dx.iter().zip(&coef).fold(T::zero(), |s, (&a, &c)| s + a * c),
            dy.iter().zip(&coef).fold(T::zero(), |s, (&a, &c)| s + a * c),
        ];
        let g = grad_u(p);
        let e = [g[0] - gh[0], g[1] - gh[1]];
        let b = beta(p);
        let be = b[0] * e[0] + b[1] * e[1];
        grad_sq += w * (e[0] * e[0] + e[1] * e[1]);
        streamline_sq += w * be * be;
    }
    CellErrors { grad_sq, streamline_sq }
}

pub fn cell_error_contributions<T: Real>(
    disc: &Discretization<'_, T>,
    solution: &[T],
    grad_u: GradFn<'_, T>,
    beta: GradFn<'_, T>,
) -> Vec<CellErrors<T>> {
    use rayon::prelude::*;
    (0..disc.n_cells())
        .into_par_iter()
        .map(|c| cell_errors(&disc.elements[c], &disc.projectors[c], &disc.dofs.local(c, solution), grad_u, beta))
        .collect()
}

/// `e_H1 = (Σ_E ‖∇(u − Π∇_k u_h)‖²)^{1/2}`.
pub fn error_h1<T: Real>(disc: &Discretization<'_, T>, solution: &[T], grad_u: GradFn<'_, T>) -> T {
    let zero = |_: Point<T>| [T::zero(), T::zero()];
    cell_error_contributions(disc, solution, grad_u, &zero).iter().fold(T::zero(), |s, c| s + c.grad_sq).sqrt()
}

/// `e_C = (Σ_E ε‖∇(u − Π∇u_h)‖² + τ_E‖β·∇(u − Π∇u_h)‖²)^{1/2}` with the given per-cell τ.
pub fn error_convective<T: Real>(
    disc: &Discretization<'_, T>,
    solution: &[T],
    grad_u: GradFn<'_, T>,
    beta: GradFn<'_, T>,
    epsilon: T,
    tau: &[T],
) -> T {
    combine_convective(&cell_error_contributions(disc, solution, grad_u, beta), epsilon, tau)
}

pub fn combine_convective<T: Real>(cells: &[CellErrors<T>], epsilon: T, tau: &[T]) -> T {
    cells.iter().zip(tau).fold(T::zero(), |s, (c, &t)| s + epsilon * c.grad_sq + t * c.streamline_sq).sqrt()
}

/// Matrix `N` with `vᵀNv = ‖v‖²_{supg,E}`, using the dofi-dofi energy `R` for the
/// non-polynomial part: `ε(Ahc + R) + τ ∫(β·Π0_{k−1}∇v)² + τβ_E² R`.
pub fn supg_norm_matrix<T: Real>(
    elem: &LocalElement<T>,
    proj: &ElementProjectors<T>,
    beta: GradFn<'_, T>,
    epsilon: T,
    tau: T,
    beta_e: T,
) -> DMat<T> {
    let r = dofi_energy(proj);
    let mut n = diffusion_consistency(elem, proj).scaled(epsilon);
    n.add_assign_scaled(&r, epsilon + tau * beta_e * beta_e);
    if tau != T::zero() {
        n.add_assign_scaled(&streamline_matrix(elem, proj, beta), tau);
    }
    n
}

/// Global supg norm of a DoF vector with per-cell `(τ_E, β_E)`.
pub fn supg_norm<T: Real>(
    disc: &Discretization<'_, T>,
    v: &[T],
    beta: GradFn<'_, T>,
    epsilon: T,
    tau: &[T],
    beta_e: &[T],
) -> T {
    use rayon::prelude::*;
    let parts: Vec<T> = (0..disc.n_cells())
        .into_par_iter()
        .map(|c| {
            let n = supg_norm_matrix(&disc.elements[c], &disc.projectors[c], beta, epsilon, tau[c], beta_e[c]);
            let vl = disc.dofs.local(c, v);
            n.bilinear(&vl, &vl)
        })
        .collect();
    parts.into_iter().fold(T::zero(), |s, x| s + x).max(T::zero()).sqrt()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dofs::interpolate_dofs;
    use crate::mesh::gen_quad;
    use crate::quadrature::polygon_rule;
    use std::f64::consts::PI;

    fn grad_sin(p: Point<f64>) -> [f64; 2] {
        [PI * (PI * p[0]).cos() * (PI * p[1]).sin(), PI * (PI * p[0]).sin() * (PI * p[1]).cos()]
    }

    #[test]
    fn zero_solution_gives_seminorm_of_exact() {
        let m = gen_quad::<f64>(4).unwrap();
        let d = Discretization::with_quad_degree(&m, 2, 12).unwrap();
        let e = error_h1(&d, &vec![0.0; d.n_dofs()], &grad_sin);
        // |sin πx sin πy|²_1 = π²/2
        assert!((e - (PI * PI / 2.0).sqrt()).abs() < 1e-8);
    }

    #[test]
    fn polynomial_interpolant_is_exact() {
        let m = gen_quad::<f64>(3).unwrap();
        let d = Discretization::new(&m, 2).unwrap();
        let u = |p: Point<f64>| 1.0 + p[0] - 2.0 * p[1] * p[0] + 0.5 * p[1] * p[1];
        let g = |p: Point<f64>| [1.0 - 2.0 * p[1], -2.0 * p[0] + p[1]];
        let v = interpolate_dofs(&m, &d.dofs, &u, 6).unwrap();
        assert!(error_h1(&d, &v, &g) < 1e-12);
        let taus = vec![0.3; m.n_cells()];
        assert!(error_convective(&d, &v, &g, &|_| [1.0, 2.0], 1e-3, &taus) < 1e-12);
    }

    #[test]
    fn interpolation_error_decreases_at_order_k() {
        let u = |p: Point<f64>| (PI * p[0]).sin() * (PI * p[1]).sin();
        for k in 1..=2 {
            let errs: Vec<f64> = [4, 8, 16]
                .iter()
                .map(|&n| {
                    let m = gen_quad::<f64>(n).unwrap();
                    let d = Discretization::new(&m, k).unwrap();
                    let v = interpolate_dofs(&m, &d.dofs, &u, 2 * k + 2).unwrap();
                    error_h1(&d, &v, &grad_sin)
                })
                .collect();
            let rate = (errs[1] / errs[2]).log2();
            assert!(rate > k as f64 - 0.1, "k={k} rate {rate}");
        }
    }

    #[test]
    fn convective_error_reductions() {
        let m = gen_quad::<f64>(4).unwrap();
        let d = Discretization::new(&m, 1).unwrap();
        let v = vec![0.0; d.n_dofs()];
        let eps = 1e-2;
        let h1 = error_h1(&d, &v, &grad_sin);
        let zero_tau = vec![0.0; m.n_cells()];
        let ec = error_convective(&d, &v, &grad_sin, &|_| [1.0, 1.0], eps, &zero_tau);
        assert!((ec - eps.sqrt() * h1).abs() < 1e-12);
        let ec0 = error_convective(&d, &v, &grad_sin, &|_| [0.0, 0.0], eps, &vec![0.5; m.n_cells()]);
        assert!((ec0 - eps.sqrt() * h1).abs() < 1e-12);
    }

    #[test]
    fn supg_norm_exact_on_polynomials_and_homogeneous() {
        let m = gen_quad::<f64>(2).unwrap();
        let d = Discretization::new(&m, 2).unwrap();
        let beta = |_: Point<f64>| [1.0, 2.0];
        let (eps, tau) = (0.1, 0.05);
        let taus = vec![tau; m.n_cells()];
        let bes = vec![5f64.sqrt(); m.n_cells()];
        let one = vec![1.0; d.n_dofs()];
        assert!(supg_norm(&d, &one, &beta, eps, &taus, &bes) < 1e-7);
        let u = |p: Point<f64>| p[0] * p[0] - p[0] * p[1];
        let g = |p: Point<f64>| [2.0 * p[0] - p[1], -p[0]];
        let v = interpolate_dofs(&m, &d.dofs, &u, 6).unwrap();
        let sq = [[0.0, 0.0], [1.0, 0.0], [1.0, 1.0], [0.0, 1.0]];
        let rule = polygon_rule(&sq, 6).unwrap();
        let oracle = rule.integrate(|p| {
            let gr = g(p);
            eps * (gr[0] * gr[0] + gr[1] * gr[1]) + tau * (gr[0] + 2.0 * gr[1]).powi(2)
        });
        let norm = supg_norm(&d, &v, &beta, eps, &taus, &bes);
        assert!((norm * norm - oracle).abs() < 1e-12);
        let scaled: Vec<f64> = v.iter().map(|x| -3.0 * x).collect();
        assert!((supg_norm(&d, &scaled, &beta, eps, &taus, &bes) - 3.0 * norm).abs() < 1e-12);
    }
}
