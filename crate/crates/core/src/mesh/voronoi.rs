//! Voronoi tessellations of the unit square by half-plane clipping, with Lloyd relaxation.

use std::collections::HashMap;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::{is_simple, MeshError, PolyMesh};
use crate::quadrature::{polygon_centroid, polygon_rule};
use crate::real::{dist, Point, Real};

/// Vertices closer than this are the same Voronoi vertex.
const MERGE_TOL: f64 = 1e-10;
/// Cells below this area are merged into a neighbour.
const MIN_CELL_AREA: f64 = 1e-12;
/// Edges shorter than this fraction of the mean seed spacing are collapsed.
const MIN_EDGE_FRACTION: f64 = 1e-3;

struct SeedGrid {
    bins: usize,
    members: Vec<Vec<usize>>,
}

impl SeedGrid {
    fn new<T: Real>(seeds: &[Point<T>]) -> Self {
        let bins = ((seeds.len() as f64).sqrt().ceil() as usize).max(1);
        let mut members = vec![Vec::new(); bins * bins];
        for (i, s) in seeds.iter().enumerate() {
            let (bx, by) = Self::bin_of(bins, *s);
            members[by * bins + bx].push(i);
        }
        Self { bins, members }
    }

    fn bin_of<T: Real>(bins: usize, p: Point<T>) -> (usize, usize) {
        let f = |x: T| ((x.as_f64() * bins as f64).floor().max(0.0) as usize).min(bins - 1);
        (f(p[0]), f(p[1]))
    }
}

fn unit_square<T: Real>() -> Vec<Point<T>> {
    vec![[T::zero(), T::zero()], [T::one(), T::zero()], [T::one(), T::one()], [T::zero(), T::one()]]
}

/// Keeps the part of the convex polygon closer to `s` than to `q`.
fn clip_bisector<T: Real>(poly: &[Point<T>], s: Point<T>, q: Point<T>) -> Vec<Point<T>> {
    let half = T::lit(0.5);
    let d = [q[0] - s[0], q[1] - s[1]];
    let m = [half * (s[0] + q[0]), half * (s[1] + q[1])];
    let side = |p: Point<T>| (p[0] - m[0]) * d[0] + (p[1] - m[1]) * d[1];
    let n = poly.len();
    let mut out = Vec::with_capacity(n + 1);
    for i in 0..n {
        let a = poly[i];
        let b = poly[(i + 1) % n];
        let (fa, fb) = (side(a), side(b));
        let a_in = fa <= T::zero();
        let b_in = fb <= T::zero();
        if a_in {
            out.push(a);
        }
        if a_in != b_in {
            let t = fa / (fa - fb);
            out.push([a[0] + t * (b[0] - a[0]), a[1] + t * (b[1] - a[1])]);
        }
    }
    out
}

/// Voronoi cell of every seed, clipped to the unit square, as CCW vertex loops.
pub fn voronoi_cells<T: Real>(seeds: &[Point<T>]) -> Vec<Vec<Point<T>>> {
    let grid = SeedGrid::new(seeds);
    let bins = grid.bins as isize;
    let bin_size = 1.0 / grid.bins as f64;
    seeds
        .iter()
        .enumerate()
        .map(|(si, &s)| {
            let mut poly = unit_square::<T>();
            let (bx, by) = SeedGrid::bin_of(grid.bins, s);
            let (bx, by) = (bx as isize, by as isize);
            for r in 0..=bins {
                for dy in -r..=r {
                    for dx in -r..=r {
                        if dx.abs() != r && dy.abs() != r {
                            continue;
                        }
                        let (x, y) = (bx + dx, by + dy);
                        if x < 0 || y < 0 || x >= bins || y >= bins {
                            continue;
                        }
                        for &q in &grid.members[(y * bins + x) as usize] {
                            if q != si {
                                poly = clip_bisector(&poly, s, seeds[q]);
                            }
                        }
                    }
                }
                // seeds outside the processed block are at least r·bin_size away; they can
                // only cut the cell if closer than twice its circumradius about s
                let reach = poly.iter().fold(0.0f64, |m, &p| m.max(dist(p, s).as_f64()));
                if r as f64 * bin_size >= 2.0 * reach {
                    break;
                }
            }
            poly
        })
        .collect()
}

/// One Lloyd iteration: every seed moves to the centroid of its cell.
pub fn lloyd_step<T: Real>(seeds: &[Point<T>]) -> Vec<Point<T>> {
    voronoi_cells(seeds).iter().map(|poly| polygon_centroid(poly).1).collect()
}

/// Centroidal Voronoi energy `Σ_i ∫_{V_i} |x − s_i|² dx`.
pub fn cvt_energy<T: Real>(seeds: &[Point<T>]) -> T {
    voronoi_cells(seeds)
        .iter()
        .zip(seeds)
        .map(|(poly, s)| {
            let rule = polygon_rule(poly, 2).expect("convex Voronoi cell");
            rule.integrate(|p| (p[0] - s[0]).powi(2) + (p[1] - s[1]).powi(2))
        })
        .sum()
}

/// `n_seeds` uniform random seeds, `lloyd_iters` relaxation steps, then the tessellation.
pub fn gen_voronoi<T: Real>(n_seeds: usize, lloyd_iters: usize, rng_seed: u64) -> Result<PolyMesh<T>, MeshError> {
    if n_seeds == 0 {
        return Err(MeshError::Generator("voronoi mesh needs at least one seed".into()));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(rng_seed);
    let seeds: Vec<Point<T>> = (0..n_seeds)
        .map(|_| {
            let x: f64 = rng.gen_range(0.0..1.0);
            let y: f64 = rng.gen_range(0.0..1.0);
            [T::lit(x), T::lit(y)]
        })
        .collect();
    voronoi_from_seeds(seeds, lloyd_iters)
}

pub fn voronoi_from_seeds<T: Real>(mut seeds: Vec<Point<T>>, lloyd_iters: usize) -> Result<PolyMesh<T>, MeshError> {
    if seeds.is_empty() {
        return Err(MeshError::Generator("voronoi mesh needs at least one seed".into()));
    }
    for (i, s) in seeds.iter().enumerate() {
        if !(s[0] > T::zero() && s[0] < T::one() && s[1] > T::zero() && s[1] < T::one()) {
            return Err(MeshError::Generator(format!("seed {i} lies outside the open unit square")));
        }
    }
    check_duplicates(&seeds)?;
    for _ in 0..lloyd_iters {
        seeds = lloyd_step(&seeds);
    }
    let polys = voronoi_cells(&seeds);
    let spacing = 1.0 / (seeds.len() as f64).sqrt();
    mesh_from_polygons(polys, T::lit(MIN_EDGE_FRACTION * spacing))
}

fn check_duplicates<T: Real>(seeds: &[Point<T>]) -> Result<(), MeshError> {
    let mut sorted: Vec<(usize, Point<T>)> = seeds.iter().copied().enumerate().collect();
    sorted.sort_by(|a, b| a.1[0].partial_cmp(&b.1[0]).unwrap().then(a.1[1].partial_cmp(&b.1[1]).unwrap()));
    let tol = T::lit(1e-12);
    for i in 0..sorted.len() {
        for j in i + 1..sorted.len() {
            if sorted[j].1[0] - sorted[i].1[0] > tol {
                break;
            }
            if dist(sorted[i].1, sorted[j].1) <= tol {
                return Err(MeshError::Generator(format!("duplicate seeds {} and {}", sorted[i].0, sorted[j].0)));
            }
        }
    }
    Ok(())
}

/// Welds polygon corners into a shared vertex set and repairs near-degenerate features.
fn mesh_from_polygons<T: Real>(polys: Vec<Vec<Point<T>>>, min_edge: T) -> Result<PolyMesh<T>, MeshError> {
    let tol = MERGE_TOL;
    let mut vertices: Vec<Point<T>> = Vec::new();
    let mut buckets: HashMap<(i64, i64), Vec<usize>> = HashMap::new();
    let key = |p: Point<T>| ((p[0].as_f64() / tol).floor() as i64, (p[1].as_f64() / tol).floor() as i64);
    let mut loops: Vec<Vec<usize>> = Vec::with_capacity(polys.len());
    for poly in &polys {
        let mut ids = Vec::with_capacity(poly.len());
        for &p in poly {
            let (kx, ky) = key(p);
            let mut found = None;
            'search: for dx in -1..=1 {
                for dy in -1..=1 {
                    if let Some(list) = buckets.get(&(kx + dx, ky + dy)) {
                        for &v in list {
                            if dist(vertices[v], p).as_f64() <= tol {
                                found = Some(v);
                                break 'search;
                            }
                        }
                    }
                }
            }
            let id = found.unwrap_or_else(|| {
                vertices.push(p);
                buckets.entry((kx, ky)).or_default().push(vertices.len() - 1);
                vertices.len() - 1
            });
            if ids.last() != Some(&id) {
                ids.push(id);
            }
        }
        while ids.len() > 1 && ids.first() == ids.last() {
            ids.pop();
        }
        loops.push(ids);
    }

    collapse_short_edges(&mut vertices, &mut loops, min_edge);
    merge_tiny_cells(&vertices, &mut loops);
    compact(vertices, loops)
}

fn on_boundary<T: Real>(p: Point<T>) -> (bool, bool) {
    let eps = T::lit(1e-14);
    let bx = p[0].abs() <= eps || (p[0] - T::one()).abs() <= eps;
    let by = p[1].abs() <= eps || (p[1] - T::one()).abs() <= eps;
    (bx, by)
}

fn loop_points<T: Real>(vertices: &[Point<T>], ids: &[usize]) -> Vec<Point<T>> {
    ids.iter().map(|&i| vertices[i]).collect()
}

fn valid_loop<T: Real>(vertices: &[Point<T>], ids: &[usize]) -> bool {
    if ids.len() < 3 {
        return false;
    }
    let pts = loop_points(vertices, ids);
    polygon_centroid(&pts).0 > T::zero() && is_simple(&pts)
}

fn relabel(ids: &[usize], from: usize, to: usize) -> Vec<usize> {
    let mut out: Vec<usize> = Vec::with_capacity(ids.len());
    for &i in ids {
        let j = if i == from { to } else { i };
        if out.last() != Some(&j) {
            out.push(j);
        }
    }
    while out.len() > 1 && out.first() == out.last() {
        out.pop();
    }
    out
}

/// Collapses edges shorter than `min_edge`, keeping boundary vertices on the boundary.
fn collapse_short_edges<T: Real>(vertices: &mut [Point<T>], loops: &mut [Vec<usize>], min_edge: T) {
    let mut short: Vec<(T, usize, usize)> = Vec::new();
    for ids in loops.iter() {
        let m = ids.len();
        for i in 0..m {
            let (a, b) = (ids[i], ids[(i + 1) % m]);
            let len = dist(vertices[a], vertices[b]);
            if a < b && len < min_edge {
                short.push((len, a, b));
            }
        }
    }
    if short.is_empty() {
        return;
    }
    short.sort_by(|x, y| x.0.partial_cmp(&y.0).unwrap().then(x.1.cmp(&y.1)).then(x.2.cmp(&y.2)));
    let mut vertex_cells: HashMap<usize, Vec<usize>> = HashMap::new();
    for (c, ids) in loops.iter().enumerate() {
        for &v in ids {
            vertex_cells.entry(v).or_default().push(c);
        }
    }
    let mut alive = vec![true; vertices.len()];
    for (_, a, b) in short {
        if !alive[a] || !alive[b] {
            continue;
        }
        let (pa, pb) = (vertices[a], vertices[b]);
        if dist(pa, pb) >= min_edge {
            continue;
        }
        let (ax, ay) = on_boundary(pa);
        let (bx, by) = on_boundary(pb);
        let a_corner = ax && ay;
        let b_corner = bx && by;
        let target = if a_corner {
            pa
        } else if b_corner {
            pb
        } else if (ax || ay) && !(bx || by) {
            pa
        } else if (bx || by) && !(ax || ay) {
            pb
        } else if (ax || ay) && (bx || by) && !((ax && bx) || (ay && by)) {
            // on different sides of the square without a corner: leave it
            continue;
        } else {
            let half = T::lit(0.5);
            [half * (pa[0] + pb[0]), half * (pa[1] + pb[1])]
        };
        let mut affected: Vec<usize> = vertex_cells.get(&a).cloned().unwrap_or_default();
        affected.extend(vertex_cells.get(&b).cloned().unwrap_or_default());
        affected.sort_unstable();
        affected.dedup();
        let old_a = vertices[a];
        vertices[a] = target;
        let candidates: Vec<Vec<usize>> = affected.iter().map(|&c| relabel(&loops[c], b, a)).collect();
        if candidates.iter().all(|ids| valid_loop(vertices, ids)) {
            for (&c, ids) in affected.iter().zip(candidates) {
                loops[c] = ids;
            }
            alive[b] = false;
            let moved = vertex_cells.remove(&b).unwrap_or_default();
            let entry = vertex_cells.entry(a).or_default();
            entry.extend(moved);
            entry.sort_unstable();
            entry.dedup();
        } else {
            vertices[a] = old_a;
        }
    }
}

/// Merges cells of negligible area into the neighbour across their longest edge.
fn merge_tiny_cells<T: Real>(vertices: &[Point<T>], loops: &mut Vec<Vec<usize>>) {
    loop {
        let tiny = loops.iter().position(|ids| {
            ids.len() < 3 || polygon_centroid(&loop_points(vertices, ids)).0 < T::lit(MIN_CELL_AREA)
        });
        let Some(t) = tiny else { return };
        let ids = loops[t].clone();
        let m = ids.len();
        if m >= 2 {
            let mut order: Vec<usize> = (0..m).collect();
            order.sort_by(|&i, &j| {
                let li = dist(vertices[ids[i]], vertices[ids[(i + 1) % m]]);
                let lj = dist(vertices[ids[j]], vertices[ids[(j + 1) % m]]);
                lj.partial_cmp(&li).unwrap()
            });
            for i in order {
                let (a, b) = (ids[i], ids[(i + 1) % m]);
                let Some(nb) = loops.iter().enumerate().position(|(c, l)| {
                    c != t && (0..l.len()).any(|j| l[j] == b && l[(j + 1) % l.len()] == a)
                }) else {
                    continue;
                };
                // splice the tiny cell's path b → ... → a into the neighbour's edge b → a
                let nl = &loops[nb];
                let j = (0..nl.len()).find(|&j| nl[j] == b && nl[(j + 1) % nl.len()] == a).unwrap();
                let mut new_loop = Vec::with_capacity(nl.len() + m);
                for s in 0..nl.len() {
                    let v = nl[(j + 1 + s) % nl.len()];
                    new_loop.push(v);
                }
                // new_loop starts at a and ends at b; append the tiny cell's interior path b → a
                let start = (i + 1) % m; // position of b in the tiny cell
                for s in 1..m - 1 {
                    new_loop.push(ids[(start + s) % m]);
                }
                if valid_loop(vertices, &new_loop) {
                    loops[nb] = new_loop;
                    break;
                }
            }
        }
        // an unmerged sliver leaves a hole, which mesh validation reports as an open boundary
        loops.remove(t);
    }
}

/// Drops unreferenced vertices and renumbers.
fn compact<T: Real>(vertices: Vec<Point<T>>, loops: Vec<Vec<usize>>) -> Result<PolyMesh<T>, MeshError> {
    let mut map = vec![usize::MAX; vertices.len()];
    let mut kept = Vec::new();
    let loops: Vec<Vec<usize>> = loops
        .into_iter()
        .map(|ids| {
            ids.into_iter()
                .map(|v| {
                    if map[v] == usize::MAX {
                        map[v] = kept.len();
                        kept.push(vertices[v]);
                    }
                    map[v]
                })
                .collect()
        })
        .collect();
    PolyMesh::new(kept, loops)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn single_seed_gives_unit_square() {
        let m = voronoi_from_seeds(vec![[0.3f64, 0.6]], 0).unwrap();
        assert_eq!(m.n_cells(), 1);
        assert!((m.cells()[0].area - 1.0).abs() < 1e-15);
        assert_eq!(m.n_vertices(), 4);
    }

    #[test]
    fn four_symmetric_seeds_give_four_squares() {
        let seeds = vec![[0.25, 0.25], [0.75, 0.25], [0.25, 0.75], [0.75, 0.75]];
        let m = voronoi_from_seeds::<f64>(seeds, 0).unwrap();
        assert_eq!(m.n_cells(), 4);
        assert_eq!(m.n_vertices(), 9);
        for c in m.cells() {
            assert_eq!(c.n_vertices(), 4);
            assert!((c.area - 0.25).abs() < 1e-15);
        }
    }

    #[test]
    fn duplicate_seeds_rejected() {
        let err = voronoi_from_seeds::<f64>(vec![[0.5, 0.5], [0.2, 0.2], [0.5, 0.5]], 0).unwrap_err();
        assert!(matches!(err, MeshError::Generator(_)));
    }

    #[test]
    fn clipping_matches_brute_force_nearest_seed() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let seeds: Vec<Point<f64>> = (0..200).map(|_| [rng.gen(), rng.gen()]).collect();
        let cells = voronoi_cells(&seeds);
        // every cell vertex is equidistant-or-closer to its own seed than to all others
        for (i, poly) in cells.iter().enumerate() {
            for p in poly {
                let own = dist(*p, seeds[i]);
                for s in &seeds {
                    assert!(own <= dist(*p, *s) + 1e-12);
                }
            }
        }
        let total: f64 = cells.iter().map(|p| polygon_centroid(p).0).sum();
        assert!((total - 1.0).abs() < 1e-12);
    }

    #[test]
    fn random_meshes_are_valid_partitions() {
        for (n, iters) in [(10, 0), (64, 0), (64, 20), (300, 5)] {
            let m = gen_voronoi::<f64>(n, iters, 42).unwrap();
            assert!(m.check_partition(1.0, 1e-10), "n={n}");
            assert_eq!(m.euler_characteristic(), 1);
            assert_eq!(m.n_cells(), n);
        }
    }

    #[test]
    fn lloyd_energy_non_increasing() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let mut seeds: Vec<Point<f64>> = (0..64).map(|_| [rng.gen(), rng.gen()]).collect();
        let mut e = cvt_energy(&seeds);
        for _ in 0..30 {
            seeds = lloyd_step(&seeds);
            let e2 = cvt_energy(&seeds);
            assert!(e2 <= e * (1.0 + 1e-12), "{e2} > {e}");
            e = e2;
        }
    }

    #[test]
    fn lloyd_cells_are_star_shaped() {
        // boundary cells of a converged CVT sit just below 0.3
        for seed in 0..4 {
            let q = gen_voronoi::<f64>(64, 100, seed).unwrap().audit();
            assert!(q.min_star_ratio >= 0.25, "seed {seed}: min star ratio {}", q.min_star_ratio);
        }
    }

    #[test]
    fn generation_is_deterministic() {
        let a = gen_voronoi::<f64>(100, 3, 9).unwrap();
        let b = gen_voronoi::<f64>(100, 3, 9).unwrap();
        assert_eq!(a.vertices(), b.vertices());
    }
}
