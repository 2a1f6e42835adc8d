//! Exact injectivity test for PL maps by pairwise simplex intersection.

use minilp::{ComparisonOp, OptimizationDirection, Problem};
use nalgebra::DMatrix;
use serde::Serialize;

use crate::complex::Simplex;
use crate::plmap::PLMap;

/// Overlap (in barycentric weight) above which two image simplices count as colliding.
pub const OVERLAP_TOL: f64 = 1e-7;
/// Relative singular-value floor for a nondegenerate simplex image.
pub const DEGENERACY_TOL: f64 = 1e-10;

#[derive(Clone, Debug, PartialEq, Serialize)]
#[serde(tag = "verdict", rename_all = "snake_case")]
pub enum ExactVerdict {
    Embedding,
    Degenerate { simplex: Vec<String> },
    Collision { first: Vec<String>, second: Vec<String>, overlap: f64 },
}

impl ExactVerdict {
    pub fn is_embedding(&self) -> bool {
        matches!(self, ExactVerdict::Embedding)
    }
}

/// Ratio of extreme singular values of the edge vectors of `f(s)`; 1 for a vertex.
pub fn image_conditioning(f: &PLMap, s: &Simplex) -> f64 {
    if s.len() < 2 {
        return 1.0;
    }
    let n = f.ambient_dim();
    let base = f.image(s[0]);
    let m = DMatrix::from_fn(n, s.len() - 1, |r, c| f.image(s[c + 1])[r] - base[r]);
    let sv = m.singular_values();
    let max = sv.max();
    if max == 0.0 {
        return 0.0;
    }
    if s.len() - 1 > n {
        return 0.0;
    }
    sv.min() / max
}

/// Largest barycentric weight off `s ∩ t` carried by a common point of `f(s)` and `f(t)`;
/// `None` when the images are disjoint.
pub fn pair_overlap(f: &PLMap, s: &Simplex, t: &Simplex) -> Option<f64> {
    let mut lp = Problem::new(OptimizationDirection::Maximize);
    let lam: Vec<_> =
        s.iter().map(|v| lp.add_var(if t.contains_vertex(*v) { 0.0 } else { 1.0 }, (0.0, 1.0))).collect();
    let mu: Vec<_> =
        t.iter().map(|v| lp.add_var(if s.contains_vertex(*v) { 0.0 } else { 1.0 }, (0.0, 1.0))).collect();
    lp.add_constraint(lam.iter().map(|x| (*x, 1.0)).collect::<Vec<_>>(), ComparisonOp::Eq, 1.0);
    lp.add_constraint(mu.iter().map(|x| (*x, 1.0)).collect::<Vec<_>>(), ComparisonOp::Eq, 1.0);
    for c in 0..f.ambient_dim() {
        let mut expr: Vec<_> = s.iter().zip(&lam).map(|(v, x)| (*x, f.image(*v)[c])).collect();
        expr.extend(t.iter().zip(&mu).map(|(v, x)| (*x, -f.image(*v)[c])));
        lp.add_constraint(expr, ComparisonOp::Eq, 0.0);
    }
    match lp.solve() {
        Ok(sol) => Some(sol.objective()),
        Err(_) => None,
    }
}

fn bounding_box(f: &PLMap, s: &Simplex) -> Vec<(f64, f64)> {
    (0..f.ambient_dim())
        .map(|c| {
            s.iter().map(|v| f.image(*v)[c]).fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), x| (lo.min(x), hi.max(x)))
        })
        .collect()
}

fn boxes_meet(a: &[(f64, f64)], b: &[(f64, f64)], slack: f64) -> bool {
    a.iter().zip(b).all(|(x, y)| x.0 <= y.1 + slack && y.0 <= x.1 + slack)
}

/// Pairs of maximal simplices whose image bounding boxes meet, in sweep order.
pub(crate) fn candidate_pairs(f: &PLMap, slack: f64) -> Vec<(usize, usize)> {
    let maximal = f.domain().maximal_simplices();
    let boxes: Vec<_> = maximal.iter().map(|s| bounding_box(f, s)).collect();
    let mut order: Vec<usize> = (0..maximal.len()).collect();
    if f.ambient_dim() == 0 {
        return order.iter().enumerate().flat_map(|(k, &i)| order[k + 1..].iter().map(move |&j| (i, j))).collect();
    }
    order.sort_by(|a, b| boxes[*a][0].0.total_cmp(&boxes[*b][0].0).then(a.cmp(b)));
    let mut pairs = Vec::new();
    for (k, &i) in order.iter().enumerate() {
        for &j in &order[k + 1..] {
            if boxes[j][0].0 > boxes[i][0].1 + slack {
                break;
            }
            if boxes_meet(&boxes[i], &boxes[j], slack) {
                pairs.push((i.min(j), i.max(j)));
            }
        }
    }
    pairs.sort_unstable();
    pairs
}

/// Ground-truth injectivity: every maximal simplex maps nondegenerately and any two
/// image simplices meet exactly in the image of their common face.
pub fn exact_verdict(f: &PLMap) -> ExactVerdict {
    let dom = f.domain();
    let maximal = dom.maximal_simplices();
    for s in maximal {
        if image_conditioning(f, s) <= DEGENERACY_TOL {
            return ExactVerdict::Degenerate { simplex: dom.simplex_ids(s) };
        }
    }
    let scale = f.images_flat().iter().fold(1.0f64, |m, x| m.max(x.abs()));
    for (i, j) in candidate_pairs(f, 1e-9 * scale) {
        if let Some(w) = pair_overlap(f, &maximal[i], &maximal[j]) {
            if w > OVERLAP_TOL {
                return ExactVerdict::Collision {
                    first: dom.simplex_ids(&maximal[i]),
                    second: dom.simplex_ids(&maximal[j]),
                    overlap: w,
                };
            }
        }
    }
    ExactVerdict::Embedding
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::complex::{EdgeLengths, SimplicialComplex};
    use std::sync::Arc;

    fn graph(edges: &[(&str, &str)]) -> Arc<SimplicialComplex> {
        let mut ids: Vec<&str> = edges.iter().flat_map(|(a, b)| [*a, *b]).collect();
        ids.sort();
        ids.dedup();
        let mut l = EdgeLengths::new();
        for (a, b) in edges {
            l.insert((a.to_string(), b.to_string()), 10.0);
        }
        let tops: Vec<Vec<&str>> = edges.iter().map(|(a, b)| vec![*a, *b]).collect();
        Arc::new(SimplicialComplex::build(&ids, &tops, &l).unwrap())
    }

    #[test]
    fn crossing_segments_collide() {
        let g = graph(&[("a", "b"), ("c", "d")]);
        let f = PLMap::new(Arc::clone(&g), 2, vec![vec![0.0, 0.0], vec![1.0, 1.0], vec![0.0, 1.0], vec![1.0, 0.0]]).unwrap();
        assert!(matches!(exact_verdict(&f), ExactVerdict::Collision { .. }));
        let skew = PLMap::new(g, 3, vec![vec![0.0, 0.0, 0.0], vec![1.0, 1.0, 0.0], vec![0.0, 1.0, 0.1], vec![1.0, 0.0, 0.1]]).unwrap();
        assert_eq!(exact_verdict(&skew), ExactVerdict::Embedding);
    }

    #[test]
    fn shared_vertex_is_not_a_collision() {
        let g = graph(&[("a", "b"), ("b", "c")]);
        let bent = PLMap::new(Arc::clone(&g), 2, vec![vec![0.0, 0.0], vec![1.0, 0.0], vec![1.0, 1.0]]).unwrap();
        assert_eq!(exact_verdict(&bent), ExactVerdict::Embedding);
        let folded = PLMap::new(g, 2, vec![vec![0.0, 0.0], vec![1.0, 0.0], vec![0.5, 0.0]]).unwrap();
        assert!(matches!(exact_verdict(&folded), ExactVerdict::Collision { .. }));
    }

    #[test]
    fn collapsed_edge_is_degenerate() {
        let g = graph(&[("a", "b")]);
        let f = PLMap::new(g, 2, vec![vec![0.3, 0.3], vec![0.3, 0.3]]).unwrap();
        assert!(matches!(exact_verdict(&f), ExactVerdict::Degenerate { .. }));
    }

    #[test]
    fn coincident_isolated_vertices_collide() {
        let mut l = EdgeLengths::new();
        l.insert(("a".into(), "b".into()), 1.0);
        let c = Arc::new(SimplicialComplex::build(&["a", "b", "z"], &[vec!["a", "b"], vec!["z"]], &l).unwrap());
        let f = PLMap::new(c, 2, vec![vec![0.0, 0.0], vec![1.0, 0.0], vec![0.5, 0.0]]).unwrap();
        assert!(matches!(exact_verdict(&f), ExactVerdict::Collision { .. }));
    }
}
