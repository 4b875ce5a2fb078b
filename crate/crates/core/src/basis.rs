//! Scaled monomials `m_α(x) = ((x − x_E)/h_E)^{α₁} ((y − y_E)/h_E)^{α₂}`.
//!
//! The ordering is graded lexicographic: degree 0, then `(1,0), (0,1)`, then
//! `(2,0), (1,1), (0,2)`, and so on. Because of the grading, the basis of
//! `P_n` is always a prefix of the basis of `P_m` for `n ≤ m`.

use crate::linalg::DMat;
use crate::quadrature::QuadRule;
use crate::real::{Point, Real};

/// `dim P_n = (n+1)(n+2)/2`, zero for negative `n`.
pub const fn poly_dim(n: isize) -> usize {
    if n < 0 {
        0
    } else {
        let n = n as usize;
        (n + 1) * (n + 2) / 2
    }
}

/// Position of the multi-index `(a, b)` in the graded ordering.
pub const fn monomial_index(a: usize, b: usize) -> usize {
    let d = a + b;
    poly_dim(d as isize - 1) + (d - a)
}

pub fn multi_indices(n: usize) -> Vec<(usize, usize)> {
    let mut out = Vec::with_capacity(poly_dim(n as isize));
    for d in 0..=n {
        for a in (0..=d).rev() {
            out.push((a, d - a));
        }
    }
    out
}

#[derive(Clone, Debug)]
pub struct ScaledMonomials<T> {
    center: Point<T>,
    h: T,
    degree: usize,
    exps: Vec<(usize, usize)>,
}

impl<T: Real> ScaledMonomials<T> {
    pub fn new(center: Point<T>, h: T, degree: usize) -> Self {
        Self { center, h, degree, exps: multi_indices(degree) }
    }

    pub fn dim(&self) -> usize {
        self.exps.len()
    }

    pub fn degree(&self) -> usize {
        self.degree
    }

    pub fn center(&self) -> Point<T> {
        self.center
    }

    pub fn h(&self) -> T {
        self.h
    }

    pub fn exponents(&self) -> &[(usize, usize)] {
        &self.exps
    }

    fn powers(&self, p: Point<T>) -> (Vec<T>, Vec<T>) {
        let xi = (p[0] - self.center[0]) / self.h;
        let eta = (p[1] - self.center[1]) / self.h;
        let mut px = vec![T::one(); self.degree + 1];
        let mut py = vec![T::one(); self.degree + 1];
        for i in 1..=self.degree {
            px[i] = px[i - 1] * xi;
            py[i] = py[i - 1] * eta;
        }
        (px, py)
    }

    /// All basis values at `p`.
    pub fn eval(&self, p: Point<T>) -> Vec<T> {
        let (px, py) = self.powers(p);
        self.exps.iter().map(|&(a, b)| px[a] * py[b]).collect()
    }

    /// `(∂_x m_α, ∂_y m_α)` for every α.
    pub fn eval_grad(&self, p: Point<T>) -> (Vec<T>, Vec<T>) {
        let (px, py) = self.powers(p);
        let inv_h = T::one() / self.h;
        let dx = self
            .exps
            .iter()
            .map(|&(a, b)| if a == 0 { T::zero() } else { T::from_usize_lossy(a) * inv_h * px[a - 1] * py[b] })
            .collect();
        let dy = self
            .exps
            .iter()
            .map(|&(a, b)| if b == 0 { T::zero() } else { T::from_usize_lossy(b) * inv_h * px[a] * py[b - 1] })
            .collect();
        (dx, dy)
    }

    pub fn eval_laplacian(&self, p: Point<T>) -> Vec<T> {
        let (px, py) = self.powers(p);
        let inv_h2 = T::one() / (self.h * self.h);
        self.exps
            .iter()
            .map(|&(a, b)| {
                let mut v = T::zero();
                if a >= 2 {
                    v += T::from_usize_lossy(a * (a - 1)) * px[a - 2] * py[b];
                }
                if b >= 2 {
                    v += T::from_usize_lossy(b * (b - 1)) * px[a] * py[b - 2];
                }
                v * inv_h2
            })
            .collect()
    }

    /// `(nPoints × dim)` value matrix.
    pub fn eval_matrix(&self, points: &[Point<T>]) -> DMat<T> {
        let mut m = DMat::zeros(points.len(), self.dim());
        for (i, &p) in points.iter().enumerate() {
            m.row_mut(i).copy_from_slice(&self.eval(p));
        }
        m
    }

    /// `∂_x m_α` as `(index of m_{α−e₁}, coefficient)`, or `None` when it vanishes.
    pub fn dx_coeff(&self, alpha: usize) -> Option<(usize, T)> {
        let (a, b) = self.exps[alpha];
        (a > 0).then(|| (monomial_index(a - 1, b), T::from_usize_lossy(a) / self.h))
    }

    pub fn dy_coeff(&self, alpha: usize) -> Option<(usize, T)> {
        let (a, b) = self.exps[alpha];
        (b > 0).then(|| (monomial_index(a, b - 1), T::from_usize_lossy(b) / self.h))
    }

    /// `Δ m_α` expanded in the basis of `P_{n−2}`: list of `(index, coefficient)`.
    pub fn laplacian_coeffs(&self, alpha: usize) -> Vec<(usize, T)> {
        let (a, b) = self.exps[alpha];
        let inv_h2 = T::one() / (self.h * self.h);
        let mut out = Vec::with_capacity(2);
        if a >= 2 {
            out.push((monomial_index(a - 2, b), T::from_usize_lossy(a * (a - 1)) * inv_h2));
        }
        if b >= 2 {
            out.push((monomial_index(a, b - 2), T::from_usize_lossy(b * (b - 1)) * inv_h2));
        }
        out
    }

    /// `H_{αγ} = ∫ m_α m_γ` with the given rule (needs exactness ≥ 2n).
    pub fn mass_matrix(&self, rule: &QuadRule<T>) -> DMat<T> {
        let n = self.dim();
        let mut h = DMat::zeros(n, n);
        for (&p, &w) in rule.points.iter().zip(&rule.weights) {
            let v = self.eval(p);
            for i in 0..n {
                let wi = w * v[i];
                for j in i..n {
                    h[(i, j)] += wi * v[j];
                }
            }
        }
        for i in 0..n {
            for j in 0..i {
                h[(i, j)] = h[(j, i)];
            }
        }
        h
    }
}
