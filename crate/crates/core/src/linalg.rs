//! Small dense matrices for per-element work.
//!
//! Element matrices stay below ~60×60 for k ≤ 4, so everything here is a
//! straightforward row-major implementation: LU with partial pivoting,
//! Cholesky, and a cyclic Jacobi eigen-solver for symmetric matrices.

use std::ops::{Index, IndexMut};

use thiserror::Error;

use crate::real::Real;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum LinalgError {
    #[error("matrix is singular to working precision (pivot {pivot:e} at column {column})")]
    Singular { column: usize, pivot: f64 },
    #[error("matrix is not positive definite (column {column})")]
    NotPositiveDefinite { column: usize },
    #[error("dimension mismatch: {0}")]
    Dimension(String),
}

#[derive(Clone, Debug, PartialEq)]
pub struct DMat<T> {
    rows: usize,
    cols: usize,
    data: Vec<T>,
}

impl<T: Real> DMat<T> {
    pub fn zeros(rows: usize, cols: usize) -> Self {
        Self { rows, cols, data: vec![T::zero(); rows * cols] }
    }

    pub fn identity(n: usize) -> Self {
        let mut m = Self::zeros(n, n);
        for i in 0..n {
            m[(i, i)] = T::one();
        }
        m
    }

    pub fn from_fn(rows: usize, cols: usize, mut f: impl FnMut(usize, usize) -> T) -> Self {
        let mut data = Vec::with_capacity(rows * cols);
        for i in 0..rows {
            for j in 0..cols {
                data.push(f(i, j));
            }
        }
        Self { rows, cols, data }
    }

    pub fn from_row_slice(rows: usize, cols: usize, values: &[T]) -> Self {
        assert_eq!(values.len(), rows * cols, "from_row_slice: wrong length");
        Self { rows, cols, data: values.to_vec() }
    }

    #[inline]
    pub fn nrows(&self) -> usize {
        self.rows
    }

    #[inline]
    pub fn ncols(&self) -> usize {
        self.cols
    }

    #[inline]
    pub fn row(&self, i: usize) -> &[T] {
        &self.data[i * self.cols..(i + 1) * self.cols]
    }

    #[inline]
    pub fn row_mut(&mut self, i: usize) -> &mut [T] {
        &mut self.data[i * self.cols..(i + 1) * self.cols]
    }

    pub fn as_slice(&self) -> &[T] {
        &self.data
    }

    pub fn transpose(&self) -> Self {
        Self::from_fn(self.cols, self.rows, |i, j| self[(j, i)])
    }

    pub fn matmul(&self, rhs: &Self) -> Self {
        assert_eq!(self.cols, rhs.rows, "matmul: inner dimensions differ");
        let mut out = Self::zeros(self.rows, rhs.cols);
        for i in 0..self.rows {
            for l in 0..self.cols {
                let a = self[(i, l)];
                if a == T::zero() {
                    continue;
                }
                let r = rhs.row(l);
                let o = out.row_mut(i);
                for j in 0..rhs.cols {
                    o[j] += a * r[j];
                }
            }
        }
        out
    }

    /// `selfᵀ · rhs` without forming the transpose.
    pub fn tr_matmul(&self, rhs: &Self) -> Self {
        assert_eq!(self.rows, rhs.rows, "tr_matmul: row counts differ");
        let mut out = Self::zeros(self.cols, rhs.cols);
        for l in 0..self.rows {
            let a = self.row(l);
            let r = rhs.row(l);
            for i in 0..self.cols {
                let ai = a[i];
                if ai == T::zero() {
                    continue;
                }
                let o = out.row_mut(i);
                for j in 0..rhs.cols {
                    o[j] += ai * r[j];
                }
            }
        }
        out
    }

    pub fn mul_vec(&self, v: &[T]) -> Vec<T> {
        assert_eq!(self.cols, v.len(), "mul_vec: length mismatch");
        (0..self.rows)
            .map(|i| self.row(i).iter().zip(v).map(|(&a, &b)| a * b).sum())
            .collect()
    }

    /// `selfᵀ · v`.
    pub fn tr_mul_vec(&self, v: &[T]) -> Vec<T> {
        assert_eq!(self.rows, v.len(), "tr_mul_vec: length mismatch");
        let mut out = vec![T::zero(); self.cols];
        for (i, &vi) in v.iter().enumerate() {
            for (o, &a) in out.iter_mut().zip(self.row(i)) {
                *o += a * vi;
            }
        }
        out
    }

    /// `vᵀ · self · w`.
    pub fn bilinear(&self, v: &[T], w: &[T]) -> T {
        let mw = self.mul_vec(w);
        v.iter().zip(&mw).map(|(&a, &b)| a * b).sum()
    }

    pub fn scaled(&self, s: T) -> Self {
        Self { rows: self.rows, cols: self.cols, data: self.data.iter().map(|&x| x * s).collect() }
    }

    pub fn add_assign_scaled(&mut self, other: &Self, s: T) {
        assert_eq!((self.rows, self.cols), (other.rows, other.cols));
        for (a, &b) in self.data.iter_mut().zip(&other.data) {
            *a += s * b;
        }
    }

    pub fn sub(&self, other: &Self) -> Self {
        let mut out = self.clone();
        out.add_assign_scaled(other, -T::one());
        out
    }

    pub fn add(&self, other: &Self) -> Self {
        let mut out = self.clone();
        out.add_assign_scaled(other, T::one());
        out
    }

    pub fn frobenius_norm(&self) -> T {
        self.data.iter().map(|&x| x * x).sum::<T>().sqrt()
    }

    pub fn max_abs(&self) -> T {
        self.data.iter().fold(T::zero(), |m, &x| m.max(x.abs()))
    }

    /// Copy of rows `r0..r1`.
    pub fn rows_range(&self, r0: usize, r1: usize) -> Self {
        Self::from_row_slice(r1 - r0, self.cols, &self.data[r0 * self.cols..r1 * self.cols])
    }

    /// Leading `n × n` principal block.
    pub fn leading_block(&self, n: usize) -> Self {
        Self::from_fn(n, n, |i, j| self[(i, j)])
    }

    pub fn lu(&self) -> Result<Lu<T>, LinalgError> {
        Lu::factor(self.clone())
    }

    pub fn solve(&self, rhs: &Self) -> Result<Self, LinalgError> {
        Ok(self.lu()?.solve(rhs))
    }

    pub fn cholesky(&self) -> Result<Cholesky<T>, LinalgError> {
        Cholesky::factor(self)
    }

    pub fn symmetric_eigen(&self) -> SymmetricEigen<T> {
        SymmetricEigen::new(self)
    }
}

impl<T> Index<(usize, usize)> for DMat<T> {
    type Output = T;
    #[inline]
    fn index(&self, (i, j): (usize, usize)) -> &T {
        &self.data[i * self.cols + j]
    }
}

impl<T> IndexMut<(usize, usize)> for DMat<T> {
    #[inline]
    fn index_mut(&mut self, (i, j): (usize, usize)) -> &mut T {
        &mut self.data[i * self.cols + j]
    }
}

/// LU factorization with partial pivoting, `P·A = L·U`.
#[derive(Clone, Debug)]
pub struct Lu<T> {
    lu: DMat<T>,
    perm: Vec<usize>,
}

impl<T: Real> Lu<T> {
    fn factor(mut a: DMat<T>) -> Result<Self, LinalgError> {
        let n = a.rows;
        if n != a.cols {
            return Err(LinalgError::Dimension(format!("LU of {}x{} matrix", a.rows, a.cols)));
        }
        let scale = a.max_abs();
        let tiny = scale * T::epsilon() * T::from_usize_lossy(n.max(1));
        let mut perm: Vec<usize> = (0..n).collect();
        for c in 0..n {
            let (p, pv) = (c..n)
                .map(|r| (r, a[(r, c)].abs()))
                .fold((c, -T::one()), |best, cur| if cur.1 > best.1 { cur } else { best });
            if !(pv > tiny) {
                return Err(LinalgError::Singular { column: c, pivot: pv.as_f64() });
            }
            if p != c {
                perm.swap(p, c);
                for j in 0..n {
                    a.data.swap(p * n + j, c * n + j);
                }
            }
            let d = a[(c, c)];
            for r in c + 1..n {
                let f = a[(r, c)] / d;
                a[(r, c)] = f;
                if f != T::zero() {
                    for j in c + 1..n {
                        let u = a[(c, j)];
                        a[(r, j)] -= f * u;
                    }
                }
            }
        }
        Ok(Self { lu: a, perm })
    }

    pub fn solve_vec(&self, b: &[T]) -> Vec<T> {
        let n = self.lu.rows;
        let mut x: Vec<T> = self.perm.iter().map(|&p| b[p]).collect();
        for i in 0..n {
            let mut s = x[i];
            for j in 0..i {
                s -= self.lu[(i, j)] * x[j];
            }
            x[i] = s;
        }
        for i in (0..n).rev() {
            let mut s = x[i];
            for j in i + 1..n {
                s -= self.lu[(i, j)] * x[j];
            }
            x[i] = s / self.lu[(i, i)];
        }
        x
    }

    pub fn solve(&self, rhs: &DMat<T>) -> DMat<T> {
        let mut out = DMat::zeros(rhs.rows, rhs.cols);
        let mut col = vec![T::zero(); rhs.rows];
        for j in 0..rhs.cols {
            for i in 0..rhs.rows {
                col[i] = rhs[(i, j)];
            }
            let x = self.solve_vec(&col);
            for i in 0..rhs.rows {
                out[(i, j)] = x[i];
            }
        }
        out
    }
}

/// Lower Cholesky factor `A = L·Lᵀ`.
#[derive(Clone, Debug)]
pub struct Cholesky<T> {
    l: DMat<T>,
}

impl<T: Real> Cholesky<T> {
    fn factor(a: &DMat<T>) -> Result<Self, LinalgError> {
        let n = a.rows;
        let mut l = DMat::zeros(n, n);
        for j in 0..n {
            let mut d = a[(j, j)];
            for p in 0..j {
                d -= l[(j, p)] * l[(j, p)];
            }
            if !(d > T::zero()) {
                return Err(LinalgError::NotPositiveDefinite { column: j });
            }
            let d = d.sqrt();
            l[(j, j)] = d;
            for i in j + 1..n {
                let mut s = a[(i, j)];
                for p in 0..j {
                    s -= l[(i, p)] * l[(j, p)];
                }
                l[(i, j)] = s / d;
            }
        }
        Ok(Self { l })
    }

    pub fn l(&self) -> &DMat<T> {
        &self.l
    }

    /// `L⁻¹ · B`.
    pub fn forward(&self, b: &DMat<T>) -> DMat<T> {
        let n = self.l.rows;
        let mut x = b.clone();
        for c in 0..b.cols {
            for i in 0..n {
                let mut s = x[(i, c)];
                for p in 0..i {
                    s -= self.l[(i, p)] * x[(p, c)];
                }
                x[(i, c)] = s / self.l[(i, i)];
            }
        }
        x
    }

    /// Symmetric reduction `L⁻¹ · K · L⁻ᵀ` of a generalized eigenproblem `K x = λ A x`.
    pub fn reduce(&self, k: &DMat<T>) -> DMat<T> {
        let y = self.forward(k);
        let z = self.forward(&y.transpose());
        // z = L⁻¹ (L⁻¹ K)ᵀ = L⁻¹ K L⁻ᵀ (K symmetric); symmetrize roundoff.
        DMat::from_fn(z.rows, z.cols, |i, j| T::lit(0.5) * (z[(i, j)] + z[(j, i)]))
    }
}

/// Eigen-decomposition of a symmetric matrix by cyclic Jacobi rotations.
/// Eigenvalues are sorted ascending; `vectors` holds them column-wise.
#[derive(Clone, Debug)]
pub struct SymmetricEigen<T> {
    pub values: Vec<T>,
    pub vectors: DMat<T>,
}

impl<T: Real> SymmetricEigen<T> {
    fn new(a: &DMat<T>) -> Self {
        let n = a.rows;
        assert_eq!(n, a.cols, "symmetric_eigen needs a square matrix");
        let mut m = a.clone();
        let mut v = DMat::identity(n);
        let norm = m.frobenius_norm();
        for _sweep in 0..100 {
            let mut off = T::zero();
            for i in 0..n {
                for j in i + 1..n {
                    off += m[(i, j)] * m[(i, j)];
                }
            }
            if off.sqrt() <= T::epsilon() * T::lit(1e-2) * norm || off == T::zero() {
                break;
            }
            for p in 0..n {
                for q in p + 1..n {
                    let apq = m[(p, q)];
                    if apq == T::zero() {
                        continue;
                    }
                    let theta = (m[(q, q)] - m[(p, p)]) / (T::lit(2.0) * apq);
                    let t = theta.signum() / (theta.abs() + (theta * theta + T::one()).sqrt());
                    let c = T::one() / (t * t + T::one()).sqrt();
                    let s = t * c;
                    for k in 0..n {
                        let mkp = m[(k, p)];
                        let mkq = m[(k, q)];
                        m[(k, p)] = c * mkp - s * mkq;
                        m[(k, q)] = s * mkp + c * mkq;
                    }
                    for k in 0..n {
                        let mpk = m[(p, k)];
                        let mqk = m[(q, k)];
                        m[(p, k)] = c * mpk - s * mqk;
                        m[(q, k)] = s * mpk + c * mqk;
                    }
                    for k in 0..n {
                        let vkp = v[(k, p)];
                        let vkq = v[(k, q)];
                        v[(k, p)] = c * vkp - s * vkq;
                        v[(k, q)] = s * vkp + c * vkq;
                    }
                }
            }
        }
        let mut order: Vec<usize> = (0..n).collect();
        order.sort_by(|&i, &j| m[(i, i)].partial_cmp(&m[(j, j)]).unwrap_or(std::cmp::Ordering::Equal));
        let values = order.iter().map(|&i| m[(i, i)]).collect();
        let vectors = DMat::from_fn(n, n, |r, c| v[(r, order[c])]);
        Self { values, vectors }
    }
}

pub(crate) fn dot<T: Real>(a: &[T], b: &[T]) -> T {
    a.iter().zip(b).map(|(&x, &y)| x * y).sum()
}

pub(crate) fn norm2<T: Real>(a: &[T]) -> T {
    dot(a, a).sqrt()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn lu_solves_pivoting_system() {
        let a = DMat::<f64>::from_row_slice(3, 3, &[0.0, 2.0, 1.0, 1.0, 1.0, 0.0, 3.0, 0.0, 1.0]);
        let x = [1.0, -2.0, 0.5];
        let b = a.mul_vec(&x);
        let sol = a.lu().unwrap().solve_vec(&b);
        for (s, e) in sol.iter().zip(x) {
            assert!((s - e).abs() < 1e-14);
        }
    }

    #[test]
    fn lu_rejects_singular() {
        let a = DMat::from_row_slice(2, 2, &[1.0, 2.0, 2.0, 4.0]);
        assert!(matches!(a.lu(), Err(LinalgError::Singular { .. })));
    }

    #[test]
    fn jacobi_matches_known_spectrum() {
        let a = DMat::from_row_slice(3, 3, &[2.0, -1.0, 0.0, -1.0, 2.0, -1.0, 0.0, -1.0, 2.0]);
        let e = a.symmetric_eigen();
        let s2 = 2.0f64.sqrt();
        let expected = [2.0 - s2, 2.0, 2.0 + s2];
        for (v, x) in e.values.iter().zip(expected) {
            assert!((v - x).abs() < 1e-13, "{v} vs {x}");
        }
        // A v = λ v
        for c in 0..3 {
            let col: Vec<f64> = (0..3).map(|r| e.vectors[(r, c)]).collect();
            let av = a.mul_vec(&col);
            for r in 0..3 {
                assert!((av[r] - e.values[c] * col[r]).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn cholesky_reduction_gives_generalized_eigenvalues() {
        // K x = λ M x with M = diag(2, 4), K = diag(2, 1) → λ = {1/4, 1}
        let m = DMat::from_row_slice(2, 2, &[2.0, 0.0, 0.0, 4.0]);
        let k = DMat::from_row_slice(2, 2, &[2.0, 0.0, 0.0, 1.0]);
        let c = m.cholesky().unwrap().reduce(&k);
        let e = c.symmetric_eigen();
        assert!((e.values[0] - 0.25f64).abs() < 1e-14);
        assert!((e.values[1] - 1.0f64).abs() < 1e-14);
    }
}
