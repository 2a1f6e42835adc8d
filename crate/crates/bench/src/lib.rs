//! Inputs shared by the benchmarks.

use std::sync::Arc;

use pliso::complex::EdgeLengths;
use pliso::{PLMap, SimplicialComplex};

/// A cycle of `n` unit edges.
pub fn circle(n: usize) -> Arc<SimplicialComplex> {
    let ids: Vec<String> = (0..n).map(|i| format!("c{i:03}")).collect();
    let tops: Vec<Vec<String>> = (0..n).map(|i| vec![ids[i].clone(), ids[(i + 1) % n].clone()]).collect();
    let lengths: EdgeLengths = tops.iter().map(|e| ((e[0].clone(), e[1].clone()), 1.0)).collect();
    Arc::new(SimplicialComplex::build(&ids, &tops, &lengths).unwrap())
}

/// The cycle placed on a regular polygon of perimeter `lambda·n` in the first plane of `R^dim`.
pub fn contracted_circle(n: usize, lambda: f64, dim: usize) -> PLMap {
    let radius = lambda * 0.5 / (std::f64::consts::PI / n as f64).sin();
    let images = (0..n)
        .map(|i| {
            let t = 2.0 * std::f64::consts::PI * i as f64 / n as f64;
            let mut p = vec![0.0; dim];
            p[0] = radius * t.cos();
            p[1] = radius * t.sin();
            p
        })
        .collect();
    PLMap::new(circle(n), dim, images).unwrap()
}

/// Deterministic pseudo-random points, spread by a multiplicative hash.
pub fn scattered_points(count: usize, dim: usize) -> Vec<Vec<f64>> {
    let mut state = 0x9e37_79b9_7f4a_7c15u64;
    (0..count)
        .map(|_| {
            (0..dim)
                .map(|_| {
                    state = state.wrapping_mul(6_364_136_223_846_793_005).wrapping_add(1_442_695_040_888_963_407);
                    (state >> 11) as f64 / (1u64 << 53) as f64 - 0.5
                })
                .collect()
        })
        .collect()
}
