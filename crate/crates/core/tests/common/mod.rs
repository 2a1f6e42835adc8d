#![allow(dead_code)]

use std::collections::BTreeSet;
use std::sync::Arc;

use nalgebra::DMatrix;
use pliso::complex::EdgeLengths;
use pliso::{PLMap, SimplicialComplex};
use rand::{Rng, RngExt};
use rand_distr::StandardNormal;

pub fn graph(edges: &[(&str, &str, f64)]) -> Arc<SimplicialComplex> {
    let mut ids: Vec<&str> = edges.iter().flat_map(|(a, b, _)| [*a, *b]).collect();
    ids.sort();
    ids.dedup();
    let l: EdgeLengths = edges.iter().map(|(a, b, w)| ((a.to_string(), b.to_string()), *w)).collect();
    let tops: Vec<Vec<&str>> = edges.iter().map(|(a, b, _)| vec![*a, *b]).collect();
    Arc::new(SimplicialComplex::build(&ids, &tops, &l).unwrap())
}

/// Four unit edges a-b-c-d-a.
pub fn square_circle() -> Arc<SimplicialComplex> {
    graph(&[("a", "b", 1.0), ("b", "c", 1.0), ("c", "d", 1.0), ("a", "d", 1.0)])
}

/// The unit square scaled by `lambda`, padded with zeros to `R^n`.
pub fn contracted_square(lambda: f64, n: usize) -> PLMap {
    let corners = [[0.0, 0.0], [1.0, 0.0], [1.0, 1.0], [0.0, 1.0]];
    let images = corners
        .iter()
        .map(|c| {
            let mut p = vec![0.0; n];
            p[0] = lambda * c[0];
            p[1] = lambda * c[1];
            p
        })
        .collect();
    PLMap::new(square_circle(), n, images).unwrap()
}

pub fn dist(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum::<f64>().sqrt()
}

/// A jittered, lifted grid surface with some triangles dropped; flat simplices by construction.
pub struct Surface {
    pub complex: Arc<SimplicialComplex>,
    pub positions: Vec<[f64; 3]>,
    pub triangles: Vec<[usize; 3]>,
}

pub fn random_surface<R: Rng>(rng: &mut R, max_vertices: usize) -> Surface {
    let nx = rng.random_range(2..=5usize).min(max_vertices / 2);
    let ny = rng.random_range(2..=(max_vertices / nx).max(2));
    let positions: Vec<[f64; 3]> = (0..nx * ny)
        .map(|k| {
            let (i, j) = ((k / ny) as f64, (k % ny) as f64);
            [i + rng.random_range(-0.2..0.2), j + rng.random_range(-0.2..0.2), rng.random_range(0.0..0.6)]
        })
        .collect();
    let at = |i: usize, j: usize| i * ny + j;
    let mut triangles = Vec::new();
    for i in 0..nx - 1 {
        for j in 0..ny - 1 {
            let (a, b, c, d) = (at(i, j), at(i + 1, j), at(i + 1, j + 1), at(i, j + 1));
            let pair = if rng.random::<bool>() { [[a, b, c], [a, c, d]] } else { [[a, b, d], [b, c, d]] };
            for t in pair {
                if rng.random::<f64>() < 0.85 {
                    triangles.push(t);
                }
            }
        }
    }
    if triangles.is_empty() {
        triangles.push([at(0, 0), at(1, 0), at(1, 1)]);
    }
    let ids: Vec<String> = (0..positions.len()).map(|k| format!("v{k:02}")).collect();
    let mut lengths = EdgeLengths::new();
    for t in &triangles {
        for (x, y) in [(t[0], t[1]), (t[0], t[2]), (t[1], t[2])] {
            lengths.insert((ids[x].clone(), ids[y].clone()), dist(&positions[x], &positions[y]));
        }
    }
    let tops: Vec<Vec<String>> = triangles.iter().map(|t| t.iter().map(|v| ids[*v].clone()).collect()).collect();
    let complex = Arc::new(SimplicialComplex::build(&ids, &tops, &lengths).unwrap());
    Surface { complex, positions, triangles }
}

/// Columns of an `n × 3` matrix with orthonormal columns.
pub fn random_isometry<R: Rng>(rng: &mut R, n: usize) -> DMatrix<f64> {
    let g = DMatrix::from_fn(n, 3, |_, _| rng.sample::<f64, _>(StandardNormal));
    g.qr().q()
}

/// A strictly short map of the surface into `R^n` that sends an edge and a random vertex
/// pair to coincident points.
pub fn coincident_short_map<R: Rng>(rng: &mut R, s: &Surface, n: usize) -> PLMap {
    let q = random_isometry(rng, n);
    let t = s.triangles[rng.random_range(0..s.triangles.len())];
    let (u, w) = (t[0], t[1]);
    let nv = s.positions.len();
    let a = rng.random_range(0..nv);
    let b = (a + rng.random_range(1..nv)) % nv;
    let mut c = 0.9;
    loop {
        let mut images: Vec<Vec<f64>> = s
            .positions
            .iter()
            .map(|p| (0..n).map(|r| c * (q[(r, 0)] * p[0] + q[(r, 1)] * p[1] + q[(r, 2)] * p[2])).collect())
            .collect();
        images[u] = images[w].clone();
        images[a] = images[b].clone();
        let f = PLMap::new(Arc::clone(&s.complex), n, images).unwrap();
        if f.shortness_margin().is_strictly_short() {
            return f;
        }
        c *= 0.7;
    }
}

/// Open cells of `complex` grouped by shell about `base`, computed from iterated closed stars.
/// Components without the base are measured from their least vertex.
pub fn star_shells(complex: &SimplicialComplex, base: &str) -> Vec<(usize, BTreeSet<Vec<String>>)> {
    let comps = complex.components();
    let b = complex.vertex_index(base).unwrap();
    let mut anchors = vec![b];
    anchors.extend((0..complex.vertex_count()).filter(|v| comps[*v] == *v && comps[*v] != comps[b]));
    let mut out = Vec::new();
    for anchor in anchors {
        let id = complex.id(anchor);
        let size = complex.all_simplices().filter(|s| comps[s[0]] == comps[anchor]).count();
        let mut seen = 0;
        let mut k = 1;
        while seen < size {
            let sh = complex.shell(id, k).unwrap();
            let cells: BTreeSet<Vec<String>> = sh.cells().map(|s| complex.simplex_ids(s)).collect();
            seen += cells.len();
            out.push((k, cells));
            k += 1;
            assert!(k <= complex.vertex_count() + 2, "shells do not exhaust the component");
        }
    }
    out
}
