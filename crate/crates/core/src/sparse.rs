//! Compressed sparse rows, ILU(0) and restarted GMRES.

use thiserror::Error;

use crate::linalg::{dot, norm2};
use crate::real::Real;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum SolverError {
    #[error("zero pivot in ILU(0) at row {0}")]
    ZeroPivot(usize),
    #[error("GMRES did not converge: relative residual {residual:e} after {iterations} iterations")]
    NotConverged { residual: f64, iterations: usize },
    #[error("dimension mismatch: {0}")]
    Dimension(String),
}

#[derive(Clone, Debug, PartialEq)]
pub struct CsrMatrix<T> {
    n_rows: usize,
    n_cols: usize,
    row_ptr: Vec<usize>,
    col_idx: Vec<usize>,
    values: Vec<T>,
}

impl<T: Real> CsrMatrix<T> {
    /// Sums duplicate entries; columns sorted within each row. Explicit zeros are kept.
    pub fn from_triplets(n_rows: usize, n_cols: usize, triplets: &[(usize, usize, T)]) -> Self {
        let mut counts = vec![0usize; n_rows + 1];
        for &(i, j, _) in triplets {
            assert!(i < n_rows && j < n_cols, "triplet ({i}, {j}) out of range");
            counts[i + 1] += 1;
        }
        for i in 0..n_rows {
            counts[i + 1] += counts[i];
        }
        let mut next = counts.clone();
        let mut cols = vec![0usize; triplets.len()];
        let mut vals = vec![T::zero(); triplets.len()];
        for &(i, j, v) in triplets {
            cols[next[i]] = j;
            vals[next[i]] = v;
            next[i] += 1;
        }
        let mut row_ptr = Vec::with_capacity(n_rows + 1);
        let mut col_idx = Vec::with_capacity(triplets.len());
        let mut values = Vec::with_capacity(triplets.len());
        row_ptr.push(0);
        let mut order: Vec<usize> = Vec::new();
        for i in 0..n_rows {
            let (s, e) = (counts[i], counts[i + 1]);
            order.clear();
            order.extend(s..e);
            order.sort_by_key(|&p| cols[p]);
            for &p in &order {
                if col_idx.len() > row_ptr[i] && *col_idx.last().unwrap() == cols[p] {
                    *values.last_mut().unwrap() += vals[p];
                } else {
                    col_idx.push(cols[p]);
                    values.push(vals[p]);
                }
            }
            row_ptr.push(col_idx.len());
        }
        Self { n_rows, n_cols, row_ptr, col_idx, values }
    }

    pub fn identity(n: usize) -> Self {
        Self { n_rows: n, n_cols: n, row_ptr: (0..=n).collect(), col_idx: (0..n).collect(), values: vec![T::one(); n] }
    }

    pub fn n_rows(&self) -> usize {
        self.n_rows
    }

    pub fn n_cols(&self) -> usize {
        self.n_cols
    }

    pub fn nnz(&self) -> usize {
        self.values.len()
    }

    pub fn row(&self, i: usize) -> (&[usize], &[T]) {
        let r = self.row_ptr[i]..self.row_ptr[i + 1];
        (&self.col_idx[r.clone()], &self.values[r])
    }

    pub fn get(&self, i: usize, j: usize) -> T {
        let (c, v) = self.row(i);
        match c.binary_search(&j) {
            Ok(p) => v[p],
            Err(_) => T::zero(),
        }
    }

    pub fn values_mut(&mut self) -> &mut [T] {
        &mut self.values
    }

    pub fn triplets(&self) -> Vec<(usize, usize, T)> {
        let mut out = Vec::with_capacity(self.nnz());
        for i in 0..self.n_rows {
            let (c, v) = self.row(i);
            out.extend(c.iter().zip(v).map(|(&j, &x)| (i, j, x)));
        }
        out
    }

    pub fn mul_vec(&self, x: &[T]) -> Vec<T> {
        let mut y = vec![T::zero(); self.n_rows];
        self.mul_vec_into(x, &mut y);
        y
    }

    pub fn mul_vec_into(&self, x: &[T], y: &mut [T]) {
        for (i, yi) in y.iter_mut().enumerate() {
            let (c, v) = self.row(i);
            *yi = c.iter().zip(v).fold(T::zero(), |s, (&j, &a)| s + a * x[j]);
        }
    }

    pub fn bilinear(&self, v: &[T], w: &[T]) -> T {
        dot(v, &self.mul_vec(w))
    }

    pub fn transpose(&self) -> Self {
        let t: Vec<(usize, usize, T)> = self.triplets().into_iter().map(|(i, j, v)| (j, i, v)).collect();
        Self::from_triplets(self.n_cols, self.n_rows, &t)
    }

    /// `self + s · other`.
    pub fn add_scaled(&self, other: &Self, s: T) -> Self {
        let mut t = self.triplets();
        t.extend(other.triplets().into_iter().map(|(i, j, v)| (i, j, s * v)));
        Self::from_triplets(self.n_rows, self.n_cols, &t)
    }

    pub fn frobenius_norm(&self) -> T {
        self.values.iter().fold(T::zero(), |s, &v| s + v * v).sqrt()
    }

    pub fn to_dense(&self) -> crate::linalg::DMat<T> {
        let mut d = crate::linalg::DMat::zeros(self.n_rows, self.n_cols);
        for (i, j, v) in self.triplets() {
            d[(i, j)] += v;
        }
        d
    }

    /// `P A Pᵀ` with `perm[new] = old`.
    pub fn permuted(&self, perm: &[usize]) -> Self {
        let n = self.n_rows;
        let mut inv = vec![0usize; n];
        for (new, &old) in perm.iter().enumerate() {
            inv[old] = new;
        }
        let t: Vec<(usize, usize, T)> = self.triplets().into_iter().map(|(i, j, v)| (inv[i], inv[j], v)).collect();
        Self::from_triplets(n, self.n_cols, &t)
    }
}

/// Reverse Cuthill–McKee ordering of the symmetrized pattern, `perm[new] = old`.
pub fn reverse_cuthill_mckee<T: Real>(a: &CsrMatrix<T>) -> Vec<usize> {
    let n = a.n_rows;
    let mut adj: Vec<Vec<usize>> = vec![Vec::new(); n];
    for i in 0..n {
        for &j in a.row(i).0 {
            if i != j {
                adj[i].push(j);
                adj[j].push(i);
            }
        }
    }
    for l in &mut adj {
        l.sort_unstable();
        l.dedup();
    }
    let mut visited = vec![false; n];
    let mut order = Vec::with_capacity(n);
    let mut by_degree: Vec<usize> = (0..n).collect();
    by_degree.sort_by_key(|&v| (adj[v].len(), v));
    for &start in &by_degree {
        if visited[start] {
            continue;
        }
        visited[start] = true;
        let head = order.len();
        order.push(start);
        let mut q = head;
        while q < order.len() {
            let v = order[q];
            q += 1;
            let mut next: Vec<usize> = adj[v].iter().copied().filter(|&w| !visited[w]).collect();
            next.sort_by_key(|&w| (adj[w].len(), w));
            for w in next {
                visited[w] = true;
                order.push(w);
            }
        }
    }
    order.reverse();
    order
}

/// Incomplete LU with the sparsity pattern of the matrix.
#[derive(Clone, Debug)]
pub struct Ilu0<T> {
    lu: CsrMatrix<T>,
    diag: Vec<usize>,
}

impl<T: Real> Ilu0<T> {
    pub fn new(a: &CsrMatrix<T>) -> Result<Self, SolverError> {
        let n = a.n_rows;
        let mut lu = a.clone();
        let mut diag = vec![usize::MAX; n];
        for i in 0..n {
            let (c, _) = lu.row(i);
            match c.binary_search(&i) {
                Ok(p) => diag[i] = lu.row_ptr[i] + p,
                Err(_) => return Err(SolverError::ZeroPivot(i)),
            }
        }
        let mut pos = vec![usize::MAX; n];
        for i in 0..n {
            let (rs, re) = (lu.row_ptr[i], lu.row_ptr[i + 1]);
            for p in rs..re {
                pos[lu.col_idx[p]] = p;
            }
            for p in rs..re {
                let kcol = lu.col_idx[p];
                if kcol >= i {
                    break;
                }
                let pivot = lu.values[diag[kcol]];
                let lik = lu.values[p] / pivot;
                lu.values[p] = lik;
                for q in diag[kcol] + 1..lu.row_ptr[kcol + 1] {
                    let j = lu.col_idx[q];
                    let target = pos[j];
                    if target != usize::MAX {
                        let u = lu.values[q];
                        lu.values[target] -= lik * u;
                    }
                }
            }
            for p in rs..re {
                pos[lu.col_idx[p]] = usize::MAX;
            }
            let d = lu.values[diag[i]];
            if d == T::zero() || !d.is_finite() {
                return Err(SolverError::ZeroPivot(i));
            }
        }
        Ok(Self { lu, diag })
    }

    /// `x ← (LU)⁻¹ x`.
    pub fn apply(&self, x: &mut [T]) {
        let n = self.diag.len();
        for i in 0..n {
            let mut s = x[i];
            for p in self.lu.row_ptr[i]..self.diag[i] {
                s -= self.lu.values[p] * x[self.lu.col_idx[p]];
            }
            x[i] = s;
        }
        for i in (0..n).rev() {
            let mut s = x[i];
            for p in self.diag[i] + 1..self.lu.row_ptr[i + 1] {
                s -= self.lu.values[p] * x[self.lu.col_idx[p]];
            }
            x[i] = s / self.lu.values[self.diag[i]];
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct GmresOptions {
    pub restart: usize,
    pub max_iterations: usize,
    /// Relative residual `‖b − Ax‖ / ‖b‖`.
    pub tol: f64,
}

impl Default for GmresOptions {
    fn default() -> Self {
        Self { restart: 120, max_iterations: 5000, tol: 1e-12 }
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct SolveStats {
    pub iterations: usize,
    pub relative_residual: f64,
}

pub fn relative_residual<T: Real>(a: &CsrMatrix<T>, x: &[T], b: &[T]) -> T {
    let ax = a.mul_vec(x);
    let r: Vec<T> = b.iter().zip(&ax).map(|(&bi, &ai)| bi - ai).collect();
    let nb = norm2(b);
    if nb == T::zero() {
        norm2(&r)
    } else {
        norm2(&r) / nb
    }
}

/// Right-preconditioned restarted GMRES; the returned residual is recomputed from `x`.
pub fn gmres<T: Real>(
    a: &CsrMatrix<T>,
    b: &[T],
    x: &mut [T],
    precond: &Ilu0<T>,
    opts: GmresOptions,
) -> Result<SolveStats, SolverError> {
    let n = a.n_rows;
    if b.len() != n || x.len() != n {
        return Err(SolverError::Dimension(format!("matrix {n}, rhs {}, x {}", b.len(), x.len())));
    }
    let tol = T::lit(opts.tol);
    let nb = norm2(b);
    if nb == T::zero() {
        x.iter_mut().for_each(|v| *v = T::zero());
        return Ok(SolveStats { iterations: 0, relative_residual: 0.0 });
    }
    let m = opts.restart.max(1);
    let mut iterations = 0;
    let mut work = vec![T::zero(); n];
    loop {
        a.mul_vec_into(x, &mut work);
        let r: Vec<T> = b.iter().zip(&work).map(|(&bi, &ai)| bi - ai).collect();
        let beta = norm2(&r);
        let rel = beta / nb;
        if rel <= tol {
            return Ok(SolveStats { iterations, relative_residual: rel.as_f64() });
        }
        if iterations >= opts.max_iterations {
            return Err(SolverError::NotConverged { residual: rel.as_f64(), iterations });
        }
        let mut basis: Vec<Vec<T>> = Vec::with_capacity(m + 1);
        basis.push(r.iter().map(|&v| v / beta).collect());
        let mut hess: Vec<Vec<T>> = Vec::with_capacity(m);
        let mut cs: Vec<T> = Vec::with_capacity(m);
        let mut sn: Vec<T> = Vec::with_capacity(m);
        let mut g = vec![T::zero(); m + 1];
        g[0] = beta;
        let mut used = 0;
        for j in 0..m {
            let mut z = basis[j].clone();
            precond.apply(&mut z);
            let mut w = a.mul_vec(&z);
            let mut h = vec![T::zero(); j + 2];
            // modified Gram-Schmidt, twice for stability near convergence
            for _ in 0..2 {
                for (i, v) in basis.iter().enumerate() {
                    let hij = dot(&w, v);
                    h[i] += hij;
                    for (wk, &vk) in w.iter_mut().zip(v) {
                        *wk -= hij * vk;
                    }
                }
            }
            let hn = norm2(&w);
            h[j + 1] = hn;
            for i in 0..j {
                let t = cs[i] * h[i] + sn[i] * h[i + 1];
                h[i + 1] = -sn[i] * h[i] + cs[i] * h[i + 1];
                h[i] = t;
            }
            let denom = (h[j] * h[j] + h[j + 1] * h[j + 1]).sqrt();
            let (c, s) = if denom == T::zero() { (T::one(), T::zero()) } else { (h[j] / denom, h[j + 1] / denom) };
            cs.push(c);
            sn.push(s);
            h[j] = denom;
            h[j + 1] = T::zero();
            g[j + 1] = -s * g[j];
            g[j] = c * g[j];
            hess.push(h);
            used = j + 1;
            iterations += 1;
            let breakdown = hn == T::zero();
            if !breakdown {
                basis.push(w.iter().map(|&v| v / hn).collect());
            }
            // aim a little below tol so the recomputed residual passes
            if g[j + 1].abs() / nb <= tol * T::lit(0.1) || breakdown || iterations >= opts.max_iterations {
                break;
            }
        }
        let mut y = vec![T::zero(); used];
        for i in (0..used).rev() {
            let mut s = g[i];
            for k in i + 1..used {
                s -= hess[k][i] * y[k];
            }
            y[i] = s / hess[i][i];
        }
        let mut upd = vec![T::zero(); n];
        for (yi, v) in y.iter().zip(&basis) {
            for (u, &vk) in upd.iter_mut().zip(v) {
                *u += *yi * vk;
            }
        }
        precond.apply(&mut upd);
        for (xi, u) in x.iter_mut().zip(&upd) {
            *xi += *u;
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn convection_diffusion_1d(n: usize, peclet: f64) -> CsrMatrix<f64> {
        let mut t = Vec::new();
        for i in 0..n {
            t.push((i, i, 2.0));
            if i > 0 {
                t.push((i, i - 1, -1.0 - peclet));
            }
            if i + 1 < n {
                t.push((i, i + 1, -1.0 + peclet));
            }
        }
        CsrMatrix::from_triplets(n, n, &t)
    }

    #[test]
    fn triplets_sum_duplicates_and_sort() {
        let m = CsrMatrix::from_triplets(2, 3, &[(0, 2, 1.0), (0, 0, 2.0), (0, 2, 3.0), (1, 1, -1.0)]);
        assert_eq!(m.nnz(), 3);
        assert_eq!(m.get(0, 2), 4.0);
        assert_eq!(m.get(0, 1), 0.0);
        assert_eq!(m.row(0).0, &[0, 2]);
        assert_eq!(m.mul_vec(&[1.0, 1.0, 1.0]), vec![6.0, -1.0]);
        assert_eq!(m.transpose().get(2, 0), 4.0);
    }

    #[test]
    fn ilu0_is_exact_for_tridiagonal() {
        let a = convection_diffusion_1d(20, 0.3);
        let ilu = Ilu0::new(&a).unwrap();
        let x: Vec<f64> = (0..20).map(|i| (i as f64 * 0.37).sin()).collect();
        let mut b = a.mul_vec(&x);
        ilu.apply(&mut b);
        for (u, v) in b.iter().zip(&x) {
            assert!((u - v).abs() < 1e-12);
        }
    }

    #[test]
    fn gmres_solves_nonsymmetric_system() {
        let n = 400;
        // 2D five-point operator with a convection term: ILU(0) is only approximate
        let side = 20;
        let mut t = Vec::new();
        for i in 0..side {
            for j in 0..side {
                let r = i * side + j;
                t.push((r, r, 4.0));
                if i > 0 {
                    t.push((r, r - side, -1.3));
                }
                if i + 1 < side {
                    t.push((r, r + side, -0.7));
                }
                if j > 0 {
                    t.push((r, r - 1, -1.0));
                }
                if j + 1 < side {
                    t.push((r, r + 1, -1.0));
                }
            }
        }
        let a = CsrMatrix::from_triplets(n, n, &t);
        let b: Vec<f64> = (0..n).map(|i| ((i * 7) % 13) as f64 - 6.0).collect();
        let ilu = Ilu0::new(&a).unwrap();
        let mut x = vec![0.0; n];
        let stats = gmres(&a, &b, &mut x, &ilu, GmresOptions { restart: 10, ..Default::default() }).unwrap();
        assert!(stats.relative_residual <= 1e-12);
        assert!(relative_residual(&a, &x, &b) <= 1e-12);
        // against a dense LU oracle
        let dense = a.to_dense().solve(&crate::linalg::DMat::from_fn(n, 1, |i, _| b[i])).unwrap();
        for i in 0..n {
            assert!((x[i] - dense[(i, 0)]).abs() < 1e-9);
        }
    }

    #[test]
    fn identity_system_returns_rhs() {
        let a = CsrMatrix::<f64>::identity(5);
        let b = vec![1.0, 2.0, 3.0, 4.0, 5.0];
        let mut x = vec![0.0; 5];
        gmres(&a, &b, &mut x, &Ilu0::new(&a).unwrap(), GmresOptions::default()).unwrap();
        assert_eq!(x, b);
    }

    #[test]
    fn missing_diagonal_is_reported() {
        let a = CsrMatrix::from_triplets(2, 2, &[(0, 1, 1.0), (1, 0, 1.0)]);
        assert_eq!(Ilu0::new(&a).unwrap_err(), SolverError::ZeroPivot(0));
    }
}
