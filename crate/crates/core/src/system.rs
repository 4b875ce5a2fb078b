//! Global assembly, Dirichlet elimination and the linear solve.

use rayon::prelude::*;
use thiserror::Error;

use crate::dofs::DofMap;
use crate::element::{default_quad_degree, LocalElement};
use crate::forms::{element_supg, ElementForms, FormsError, ProblemSpec};
use crate::linalg::{DMat, LinalgError};
use crate::mesh::PolyMesh;
use crate::projectors::{ElementProjectors, ProjectorError};
use crate::quadrature::QuadratureError;
use crate::real::{Point, Real};
use crate::sparse::{gmres, relative_residual, reverse_cuthill_mckee, CsrMatrix, GmresOptions, Ilu0, SolveStats, SolverError};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum SystemError {
    #[error("cell {cell}: {source}")]
    Quadrature {
        cell: usize,
        #[source]
        source: QuadratureError,
    },
    #[error("cell {cell}: {source}")]
    Projector {
        cell: usize,
        #[source]
        source: ProjectorError,
    },
    #[error("cell {cell}: {source}")]
    Forms {
        cell: usize,
        #[source]
        source: FormsError,
    },
    #[error(transparent)]
    InvalidSpec(FormsError),
    #[error(transparent)]
    Solver(#[from] SolverError),
    #[error("dense fallback failed: {0}")]
    Dense(#[from] LinalgError),
    #[error("relative residual {residual:e} exceeds tolerance {tol:e}")]
    Residual { residual: f64, tol: f64 },
}

/// Systems at most this large fall back to dense LU when GMRES fails.
pub const DENSE_FALLBACK_LIMIT: usize = 3000;

/// Mesh-dependent data shared by every problem solved on it with order `k`.
pub struct Discretization<'m, T> {
    pub mesh: &'m PolyMesh<T>,
    pub k: usize,
    pub dofs: DofMap,
    pub elements: Vec<LocalElement<T>>,
    pub projectors: Vec<ElementProjectors<T>>,
}

impl<'m, T: Real> Discretization<'m, T> {
    pub fn new(mesh: &'m PolyMesh<T>, k: usize) -> Result<Self, SystemError> {
        Self::with_quad_degree(mesh, k, default_quad_degree(k))
    }

    pub fn with_quad_degree(mesh: &'m PolyMesh<T>, k: usize, quad_degree: usize) -> Result<Self, SystemError> {
        let dofs = DofMap::build(mesh, k);
        let built: Result<Vec<_>, SystemError> = (0..mesh.n_cells())
            .into_par_iter()
            .map(|c| {
                let e = LocalElement::from_mesh(mesh, c, k, quad_degree)
                    .map_err(|source| SystemError::Quadrature { cell: c, source })?;
                let p = ElementProjectors::compute(&e).map_err(|source| SystemError::Projector { cell: c, source })?;
                Ok((e, p))
            })
            .collect();
        let (elements, projectors) = built?.into_iter().unzip();
        Ok(Self { mesh, k, dofs, elements, projectors })
    }

    pub fn n_dofs(&self) -> usize {
        self.dofs.n_global()
    }

    pub fn n_cells(&self) -> usize {
        self.elements.len()
    }

    /// Element forms of one cell.
    pub fn element_forms(&self, cell: usize, spec: &ProblemSpec<T>) -> Result<ElementForms<T>, SystemError> {
        element_supg(&self.elements[cell], &self.projectors[cell], spec)
            .map_err(|source| SystemError::Forms { cell, source })
    }

    /// Scatters one local matrix per cell into a global sparse matrix.
    pub fn assemble_matrix<F>(&self, local: F) -> Result<CsrMatrix<T>, SystemError>
    where
        F: Fn(usize) -> Result<DMat<T>, SystemError> + Sync,
    {
        let parts: Result<Vec<Vec<(usize, usize, T)>>, SystemError> = (0..self.n_cells())
            .into_par_iter()
            .map(|c| {
                let m = local(c)?;
                Ok(scatter(self.dofs.cell_dofs(c), &m))
            })
            .collect();
        let triplets: Vec<_> = parts?.into_iter().flatten().collect();
        let n = self.n_dofs();
        Ok(CsrMatrix::from_triplets(n, n, &triplets))
    }

    /// Values of `g` at every point DoF on `∂Ω` (zero elsewhere) and the mask of those DoFs.
    pub fn boundary_values(&self, g: &(dyn Fn(Point<T>) -> T + Sync)) -> (Vec<bool>, Vec<T>) {
        let mask = self.dofs.boundary_mask().to_vec();
        let pts = self.dofs.dof_points(self.mesh);
        let values = mask
            .iter()
            .zip(&pts)
            .map(|(&b, p)| match (b, p) {
                (true, Some(p)) => g(*p),
                _ => T::zero(),
            })
            .collect();
        (mask, values)
    }
}

fn scatter<T: Real>(dofs: &[usize], m: &DMat<T>) -> Vec<(usize, usize, T)> {
    let mut out = Vec::with_capacity(dofs.len() * dofs.len());
    for (i, &gi) in dofs.iter().enumerate() {
        for (j, &gj) in dofs.iter().enumerate() {
            out.push((gi, gj, m[(i, j)]));
        }
    }
    out
}

/// Per-cell scalars kept after assembly.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct CellInfo<T> {
    pub tau: T,
    pub tau_nominal: T,
    pub beta_e: T,
    pub gamma_hat: T,
}

#[derive(Clone, Debug)]
pub struct LinearSystem<T> {
    pub matrix: CsrMatrix<T>,
    pub rhs: Vec<T>,
    pub dirichlet_mask: Vec<bool>,
    pub dirichlet_values: Vec<T>,
}

/// Sums `A^E_supg` and `F^E_supg` over the cells; no boundary conditions yet.
pub fn assemble<T: Real>(
    disc: &Discretization<'_, T>,
    spec: &ProblemSpec<T>,
) -> Result<(LinearSystem<T>, Vec<CellInfo<T>>), SystemError> {
    spec.validate().map_err(SystemError::InvalidSpec)?;
    type Part<T> = (Vec<(usize, usize, T)>, Vec<(usize, T)>, CellInfo<T>);
    let parts: Result<Vec<Part<T>>, SystemError> = (0..disc.n_cells())
        .into_par_iter()
        .map(|c| {
            let f = disc.element_forms(c, spec)?;
            let dofs = disc.dofs.cell_dofs(c);
            let load = dofs.iter().copied().zip(f.fsupg.iter().copied()).collect();
            let info = CellInfo { tau: f.tau, tau_nominal: f.tau_nominal, beta_e: f.beta_e, gamma_hat: f.gamma_hat };
            Ok((scatter(dofs, &f.asupg), load, info))
        })
        .collect();
    let n = disc.n_dofs();
    let mut triplets = Vec::new();
    let mut rhs = vec![T::zero(); n];
    let mut infos = Vec::with_capacity(disc.n_cells());
    for (t, load, info) in parts? {
        triplets.extend(t);
        for (g, v) in load {
            rhs[g] += v;
        }
        infos.push(info);
    }
    let system = LinearSystem {
        matrix: CsrMatrix::from_triplets(n, n, &triplets),
        rhs,
        dirichlet_mask: vec![false; n],
        dirichlet_values: vec![T::zero(); n],
    };
    Ok((system, infos))
}

/// Eliminates the masked DoFs: their values move to the right-hand side and their rows
/// and columns become identity.
pub fn apply_dirichlet<T: Real>(system: &LinearSystem<T>, mask: &[bool], values: &[T]) -> LinearSystem<T> {
    let n = system.rhs.len();
    let mut rhs = system.rhs.clone();
    let mut triplets = Vec::with_capacity(system.matrix.nnz());
    for i in 0..n {
        if mask[i] {
            triplets.push((i, i, T::one()));
            rhs[i] = values[i];
            continue;
        }
        let (cols, vals) = system.matrix.row(i);
        for (&j, &v) in cols.iter().zip(vals) {
            if mask[j] {
                rhs[i] -= v * values[j];
            } else {
                triplets.push((i, j, v));
            }
        }
    }
    LinearSystem {
        matrix: CsrMatrix::from_triplets(n, n, &triplets),
        rhs,
        dirichlet_mask: mask.to_vec(),
        dirichlet_values: values.to_vec(),
    }
}

/// ILU(0)-GMRES on the reverse Cuthill–McKee reordered system, dense LU as a fallback for
/// small systems; the residual is always re-checked on the original system.
pub fn solve<T: Real>(system: &LinearSystem<T>, tol: f64) -> Result<(Vec<T>, SolveStats), SystemError> {
    let a = &system.matrix;
    let b = &system.rhs;
    let n = b.len();
    let perm = reverse_cuthill_mckee(a);
    let pa = a.permuted(&perm);
    let pb: Vec<T> = perm.iter().map(|&o| b[o]).collect();
    let mut px: Vec<T> = perm
        .iter()
        .map(|&o| if system.dirichlet_mask[o] { system.dirichlet_values[o] } else { T::zero() })
        .collect();
    let krylov = Ilu0::new(&pa).and_then(|ilu| gmres(&pa, &pb, &mut px, &ilu, GmresOptions { tol, ..Default::default() }));
    let mut x = vec![T::zero(); n];
    let stats = match krylov {
        Ok(s) => {
            for (new, &old) in perm.iter().enumerate() {
                x[old] = px[new];
            }
            s
        }
        Err(_) if n <= DENSE_FALLBACK_LIMIT => {
            x = a.to_dense().lu()?.solve_vec(b);
            SolveStats { iterations: 0, relative_residual: relative_residual(a, &x, b).as_f64() }
        }
        Err(e) => return Err(e.into()),
    };
    let residual = relative_residual(a, &x, b).as_f64();
    if !(residual <= tol) {
        return Err(SystemError::Residual { residual, tol });
    }
    Ok((x, SolveStats { relative_residual: residual, ..stats }))
}

#[cfg(test)]
mod tests {
    use std::sync::Arc;

    use super::*;
    use crate::forms::{ConvectionForm, StabKind};
    use crate::mesh::{gen_quad, gen_voronoi};

    fn diffusion_spec(eps: f64) -> ProblemSpec<f64> {
        ProblemSpec::new(eps, Arc::new(|_| [0.0, 0.0]), Arc::new(|_| 1.0), Arc::new(|_| 0.0))
    }

    #[test]
    fn pure_diffusion_matrix_is_symmetric_with_zero_row_sums() {
        let m = gen_quad::<f64>(2).unwrap();
        let d = Discretization::new(&m, 1).unwrap();
        let (s, _) = assemble(&d, &diffusion_spec(1.0)).unwrap();
        let a = &s.matrix;
        for i in 0..a.n_rows() {
            let (c, v) = a.row(i);
            assert!(v.iter().sum::<f64>().abs() < 1e-13);
            for (&j, &x) in c.iter().zip(v) {
                assert!((x - a.get(j, i)).abs() < 1e-14);
            }
        }
    }

    #[test]
    fn sparsity_follows_cell_adjacency() {
        let m = gen_quad::<f64>(3).unwrap();
        let d = Discretization::new(&m, 2).unwrap();
        let (s, _) = assemble(&d, &diffusion_spec(1.0)).unwrap();
        let n = d.n_dofs();
        let mut share = vec![vec![false; n]; n];
        for c in 0..m.n_cells() {
            for &i in d.dofs.cell_dofs(c) {
                for &j in d.dofs.cell_dofs(c) {
                    share[i][j] = true;
                }
            }
        }
        for (i, j, _) in s.matrix.triplets() {
            assert!(share[i][j]);
        }
    }

    #[test]
    fn single_interior_vertex_matches_hand_solve() {
        let m = gen_quad::<f64>(2).unwrap();
        let d = Discretization::new(&m, 1).unwrap();
        let (s, _) = assemble(&d, &diffusion_spec(1.0)).unwrap();
        let (mask, vals) = d.boundary_values(&|_| 0.0);
        let s = apply_dirichlet(&s, &mask, &vals);
        let (x, _) = solve(&s, 1e-12).unwrap();
        let centre = (0..m.n_vertices()).find(|&v| !m.is_boundary_vertex(v)).unwrap();
        let expected = s.rhs[centre] / s.matrix.get(centre, centre);
        assert!((x[centre] - expected).abs() < 1e-14);
        // unit load on four cells of area 1/4 against four stiffness diagonals
        assert!(x[centre] > 0.0);
    }

    #[test]
    fn scatter_matches_sum_of_local_quadratic_forms() {
        let m = gen_voronoi::<f64>(30, 5, 2).unwrap();
        let d = Discretization::new(&m, 2).unwrap();
        let beta: crate::forms::VectorField<f64> = Arc::new(|p| [1.0 + p[1], -p[0]]);
        let spec = ProblemSpec::new(1e-2, beta, Arc::new(|_| 1.0), Arc::new(|_| 0.0))
            .with_form(ConvectionForm::Boun)
            .with_stab(StabKind::DRecipe);
        let (s, _) = assemble(&d, &spec).unwrap();
        let v: Vec<f64> = (0..d.n_dofs()).map(|i| ((i * 31) % 17) as f64 / 17.0 - 0.5).collect();
        let global = s.matrix.bilinear(&v, &v);
        let mut local = 0.0;
        for c in 0..d.n_cells() {
            let f = d.element_forms(c, &spec).unwrap();
            let vl = d.dofs.local(c, &v);
            local += f.asupg.bilinear(&vl, &vl);
        }
        assert!((global - local).abs() < 1e-12 * local.abs().max(1.0));
    }

    #[test]
    fn load_is_linear_in_f() {
        let m = gen_quad::<f64>(3).unwrap();
        let d = Discretization::new(&m, 2).unwrap();
        let beta: crate::forms::VectorField<f64> = Arc::new(|_| [1.0, 0.5]);
        let mk = |f: crate::forms::ScalarField<f64>| {
            let spec = ProblemSpec::new(0.1, beta.clone(), f, Arc::new(|_| 0.0));
            assemble(&d, &spec).unwrap().0.rhs
        };
        let r1 = mk(Arc::new(|p| p[0]));
        let r2 = mk(Arc::new(|p| p[1] * p[1]));
        let r12 = mk(Arc::new(|p| p[0] + p[1] * p[1]));
        for i in 0..r1.len() {
            assert!((r1[i] + r2[i] - r12[i]).abs() < 1e-14);
        }
    }

    #[test]
    fn dirichlet_with_zero_data_keeps_interior_rhs() {
        let m = gen_quad::<f64>(3).unwrap();
        let d = Discretization::new(&m, 1).unwrap();
        let (s, _) = assemble(&d, &diffusion_spec(1.0)).unwrap();
        let (mask, vals) = d.boundary_values(&|_| 0.0);
        let e = apply_dirichlet(&s, &mask, &vals);
        for i in 0..s.rhs.len() {
            if !mask[i] {
                assert_eq!(e.rhs[i], s.rhs[i]);
            } else {
                assert_eq!(e.matrix.row(i).0, &[i]);
            }
        }
    }
}
