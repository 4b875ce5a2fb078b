use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::{MeshError, PolyMesh};
use crate::real::Real;

fn grid_vertices<T: Real>(n: usize) -> Vec<[T; 2]> {
    let nf = T::from_usize_lossy(n);
    let mut v = Vec::with_capacity((n + 1) * (n + 1));
    for j in 0..=n {
        for i in 0..=n {
            v.push([T::from_usize_lossy(i) / nf, T::from_usize_lossy(j) / nf]);
        }
    }
    v
}

/// `n × n` uniform squares on the unit square.
pub fn gen_quad<T: Real>(n: usize) -> Result<PolyMesh<T>, MeshError> {
    if n == 0 {
        return Err(MeshError::Generator("quad mesh needs n >= 1".into()));
    }
    let id = |i: usize, j: usize| j * (n + 1) + i;
    let mut cells = Vec::with_capacity(n * n);
    for j in 0..n {
        for i in 0..n {
            cells.push(vec![id(i, j), id(i + 1, j), id(i + 1, j + 1), id(i, j + 1)]);
        }
    }
    PolyMesh::new(grid_vertices(n), cells)
}

/// Split-quad triangulation of the unit square; interior vertices are jittered by up to
/// `perturb / n` per coordinate.
pub fn gen_tria<T: Real>(n: usize, perturb: T, rng_seed: u64) -> Result<PolyMesh<T>, MeshError> {
    if n == 0 {
        return Err(MeshError::Generator("tria mesh needs n >= 1".into()));
    }
    if !(perturb >= T::zero() && perturb < T::lit(0.3)) {
        return Err(MeshError::Generator(format!("perturbation {perturb} outside [0, 0.3)")));
    }
    let id = |i: usize, j: usize| j * (n + 1) + i;
    let mut vertices = grid_vertices::<T>(n);
    if perturb > T::zero() {
        let mut rng = ChaCha8Rng::seed_from_u64(rng_seed);
        let amp = perturb / T::from_usize_lossy(n);
        for j in 1..n {
            for i in 1..n {
                let dx: f64 = rng.gen_range(-1.0..=1.0);
                let dy: f64 = rng.gen_range(-1.0..=1.0);
                let v = &mut vertices[id(i, j)];
                v[0] += amp * T::lit(dx);
                v[1] += amp * T::lit(dy);
            }
        }
    }
    let mut cells = Vec::with_capacity(2 * n * n);
    for j in 0..n {
        for i in 0..n {
            cells.push(vec![id(i, j), id(i + 1, j), id(i + 1, j + 1)]);
            cells.push(vec![id(i, j), id(i + 1, j + 1), id(i, j + 1)]);
        }
    }
    PolyMesh::new(vertices, cells).map_err(|e| match e {
        MeshError::Orientation { cell, .. } | MeshError::Degenerate { cell, .. } => {
            MeshError::Generator(format!("perturbation flips triangle {cell}"))
        }
        other => other,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn quad_counts_and_size() {
        let m1 = gen_quad::<f64>(1).unwrap();
        assert_eq!((m1.n_cells(), m1.n_vertices()), (1, 4));
        assert_eq!(m1.cells()[0].area, 1.0);
        let m2 = gen_quad::<f64>(2).unwrap();
        assert_eq!((m2.n_cells(), m2.n_vertices()), (4, 9));
        assert!((m2.total_area() - 1.0).abs() < 1e-15);
        let m8 = gen_quad::<f64>(8).unwrap();
        assert_eq!(m8.n_cells(), 64);
        assert!((m8.h() - 2f64.sqrt() / 8.0).abs() < 1e-15);
        assert!(gen_quad::<f64>(0).is_err());
    }

    #[test]
    fn tria_counts_and_validity() {
        assert_eq!(gen_tria::<f64>(1, 0.0, 0).unwrap().n_cells(), 2);
        let m2 = gen_tria::<f64>(2, 0.0, 0).unwrap();
        assert_eq!(m2.n_cells(), 8);
        assert!((m2.total_area() - 1.0).abs() < 1e-15);
        let m4 = gen_tria::<f64>(4, 0.2, 7).unwrap();
        assert_eq!(m4.n_cells(), 32);
        assert!(m4.cells().iter().all(|c| c.area > 0.0));
        assert!((m4.total_area() - 1.0).abs() < 1e-12);
        assert!(gen_tria::<f64>(4, 0.35, 7).is_err());
    }

    #[test]
    fn euler_and_partition_for_grid_families() {
        for n in [1, 3, 8] {
            for m in [gen_quad::<f64>(n).unwrap(), gen_tria::<f64>(n, 0.25, 3).unwrap()] {
                assert_eq!(m.euler_characteristic(), 1);
                assert!(m.check_partition(1.0, 1e-10));
            }
        }
    }
}
