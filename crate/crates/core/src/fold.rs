//! Zigzag folding of graph maps into path isometries.

use std::sync::Arc;

use serde::Serialize;

use crate::complex::{BarycentricPoint, SimplicialComplex};
use crate::error::{Error, Result};
use crate::plmap::PLMap;
use crate::schedule::{EpsSchedule, ShellBudget};

/// Relative excess of target over straight length below which an edge is left straight.
pub const STRAIGHT_TOL: f64 = 1e-12;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum FoldKind {
    Straight,
    Zigzag,
    Switchback,
}

/// How one edge was folded.
#[derive(Clone, Debug, Serialize)]
pub struct EdgeFoldPlan {
    pub edge: [String; 2],
    pub kind: FoldKind,
    pub pieces: usize,
    pub target_length: f64,
    pub straight_length: f64,
    pub budget: f64,
    pub direction: Vec<f64>,
    pub transverse: Vec<f64>,
    pub rise: f64,
    /// Offset of each breakpoint from the straight image, along `transverse` for zigzags
    /// and along `direction` for switchbacks.
    pub offsets: Vec<f64>,
}

#[derive(Clone, Debug, Default, Serialize)]
pub struct FoldPlan {
    pub edges: Vec<EdgeFoldPlan>,
}

impl FoldPlan {
    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("fold plans serialize")
    }
}

fn dist(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum::<f64>().sqrt()
}

/// Lowest coordinate axis orthogonalized against `d`; `e_0` when `d` vanishes.
pub fn transverse_direction(d: &[f64]) -> Vec<f64> {
    let n = d.len();
    let len = d.iter().map(|x| x * x).sum::<f64>().sqrt();
    let mut out = vec![0.0; n];
    if len == 0.0 {
        out[0] = 1.0;
        return out;
    }
    let u: Vec<f64> = d.iter().map(|x| x / len).collect();
    for c in 0..n {
        if u[c] * u[c] <= 0.75 {
            let mut t: Vec<f64> = u.iter().map(|x| -u[c] * x).collect();
            t[c] += 1.0;
            let tl = t.iter().map(|x| x * x).sum::<f64>().sqrt();
            t.iter_mut().for_each(|x| *x /= tl);
            return t;
        }
    }
    unreachable!("some axis makes an angle of at least 30 degrees with a unit vector in R^n, n >= 2")
}

/// Even piece count of a zigzag with rise strictly below `budget`.
pub fn zigzag_pieces(straight: f64, target: f64, budget: f64) -> usize {
    let h = (target * target - straight * straight).max(0.0).sqrt();
    let mut m = ((h + straight) / budget).ceil().max(2.0) as usize;
    m += m % 2;
    while h / m as f64 >= budget {
        m += 2;
    }
    m
}

fn check_lengths(straight: f64, target: f64) -> Result<bool> {
    if !(target >= 0.0) || !target.is_finite() {
        return Err(Error::InvalidArgument(format!("target length must be nonnegative, got {target}")));
    }
    if straight > target * (1.0 + STRAIGHT_TOL) {
        return Err(Error::NotShort { edge: ["p".into(), "q".into()], image_length: straight, length: target });
    }
    Ok(target - straight > STRAIGHT_TOL * target)
}

/// Zigzag polyline from `p` to `q` of arclength `target` staying within `budget` of the
/// segment: `m` equal pieces whose breakpoints alternate between offset 0 and the rise.
pub fn fold_edge(p: &[f64], q: &[f64], target: f64, budget: f64, transverse: &[f64]) -> Result<Vec<Vec<f64>>> {
    let straight = dist(p, q);
    if !check_lengths(straight, target)? {
        return Ok(vec![p.to_vec(), q.to_vec()]);
    }
    if p.len() < 2 {
        return Err(Error::DimensionTooSmall { required: 2, actual: p.len() });
    }
    if !(budget > 0.0) {
        return Err(Error::InvalidArgument(format!("amplitude budget must be positive, got {budget}")));
    }
    let tn = transverse.iter().map(|x| x * x).sum::<f64>().sqrt();
    let dot: f64 = transverse.iter().zip(p.iter().zip(q)).map(|(t, (a, b))| t * (b - a)).sum();
    if transverse.len() != p.len() || (tn - 1.0).abs() > 1e-9 || dot.abs() > 1e-9 * straight.max(1.0) {
        return Err(Error::InvalidArgument("transverse direction must be a unit normal to q - p".into()));
    }
    let m = zigzag_pieces(straight, target, budget);
    let rise = (target * target - straight * straight).sqrt() / m as f64;
    Ok((0..=m)
        .map(|i| {
            let s = i as f64 / m as f64;
            let off = if i % 2 == 1 { rise } else { 0.0 };
            (0..p.len()).map(|c| p[c] + s * (q[c] - p[c]) + off * transverse[c]).collect()
        })
        .collect())
}

struct EdgeFold {
    plan: EdgeFoldPlan,
    fractions: Vec<f64>,
    points: Vec<Vec<f64>>,
}

fn zigzag(p: &[f64], q: &[f64], target: f64, budget: f64) -> Result<EdgeFold> {
    let straight = dist(p, q);
    let d: Vec<f64> = p.iter().zip(q).map(|(a, b)| b - a).collect();
    let direction: Vec<f64> = if straight > 0.0 { d.iter().map(|x| x / straight).collect() } else { vec![0.0; p.len()] };
    let transverse = transverse_direction(&d);
    let poly = fold_edge(p, q, target, budget, &transverse)?;
    let m = poly.len() - 1;
    let rise = (target * target - straight * straight).sqrt() / m as f64;
    let plan = EdgeFoldPlan {
        edge: Default::default(),
        kind: FoldKind::Zigzag,
        pieces: m,
        target_length: target,
        straight_length: straight,
        budget,
        direction,
        transverse,
        rise,
        offsets: (0..=m).map(|i| if i % 2 == 1 { rise } else { 0.0 }).collect(),
    };
    let fractions = (1..m).map(|i| i as f64 / m as f64).collect();
    Ok(EdgeFold { plan, fractions, points: poly[1..m].to_vec() })
}

/// Back-and-forth path on a line with `p` teeth: each tooth runs forward at constant
/// speed `target` for a fraction `(1 + ℓ/target)/2` of its time, then backward.
fn switchback(p: f64, q: f64, target: f64, budget: f64) -> EdgeFold {
    let straight = (q - p).abs();
    let dir = if q >= p { 1.0 } else { -1.0 };
    let tf = 0.5 * (1.0 + straight / target);
    let teeth = ((target - straight) * tf / budget).floor() as usize + 1;
    let mut fractions = Vec::with_capacity(2 * teeth);
    let mut points = Vec::with_capacity(2 * teeth);
    let mut offsets = vec![0.0];
    for i in 0..teeth {
        let start = i as f64 / teeth as f64;
        let turn = start + tf / teeth as f64;
        let base = p + dir * straight * start;
        if i > 0 {
            fractions.push(start);
            points.push(vec![base]);
            offsets.push(0.0);
        }
        if turn < 1.0 {
            fractions.push(turn);
            let value = base + dir * target * tf / teeth as f64;
            points.push(vec![value]);
            offsets.push(dir * (value - (p + dir * straight * turn)));
        }
    }
    offsets.push(0.0);
    let plan = EdgeFoldPlan {
        edge: Default::default(),
        kind: FoldKind::Switchback,
        pieces: fractions.len() + 1,
        target_length: target,
        straight_length: straight,
        budget,
        direction: vec![dir],
        transverse: Vec::new(),
        rise: (target - straight) * tf / teeth as f64,
        offsets,
    };
    EdgeFold { plan, fractions, points }
}

fn straight_plan(p: &[f64], q: &[f64], target: f64, budget: f64) -> EdgeFold {
    let straight = dist(p, q);
    let direction = if straight > 0.0 { p.iter().zip(q).map(|(a, b)| (b - a) / straight).collect() } else { vec![0.0; p.len()] };
    EdgeFold {
        plan: EdgeFoldPlan {
            edge: Default::default(),
            kind: FoldKind::Straight,
            pieces: 1,
            target_length: target,
            straight_length: straight,
            budget,
            direction,
            transverse: Vec::new(),
            rise: 0.0,
            offsets: vec![0.0, 0.0],
        },
        fractions: Vec::new(),
        points: Vec::new(),
    }
}

/// Folds each edge of a graph map to the given image arclength within the given budget.
/// One-dimensional targets use switchbacks when `allow_line` is set.
pub(crate) fn fold_edges(
    map: &PLMap,
    targets: &[f64],
    budgets: &[f64],
    allow_line: bool,
) -> Result<(PLMap, FoldPlan, Vec<BarycentricPoint>)> {
    let dom = map.domain();
    if dom.dimension() > 1 {
        return Err(Error::WrongDimension { expected: 1, actual: dom.dimension() });
    }
    let n = map.ambient_dim();
    let mut folds = Vec::with_capacity(dom.edges().len());
    for ((e, &target), &budget) in dom.edges().iter().zip(targets).zip(budgets) {
        let (p, q) = (map.image(e[0]), map.image(e[1]));
        let straight = dist(p, q);
        let ids = [dom.id(e[0]).to_string(), dom.id(e[1]).to_string()];
        let needs_fold = check_lengths(straight, target).map_err(|err| match err {
            Error::NotShort { image_length, length, .. } => Error::NotShort { edge: ids.clone(), image_length, length },
            other => other,
        })?;
        let mut fold = if !needs_fold {
            straight_plan(p, q, target, budget)
        } else if n >= 2 {
            zigzag(p, q, target, budget)?
        } else if n == 1 && allow_line {
            switchback(p[0], q[0], target, budget)
        } else {
            return Err(Error::DimensionTooSmall { required: 2, actual: n });
        };
        fold.plan.edge = ids;
        folds.push(fold);
    }
    let fractions: Vec<Vec<f64>> = folds.iter().map(|f| f.fractions.clone()).collect();
    let (refined, corr) = dom.split_edges(&fractions)?;
    let mut images = map.images_flat().to_vec();
    images.reserve(n * (refined.vertex_count() - dom.vertex_count()));
    for f in &folds {
        for p in &f.points {
            images.extend_from_slice(p);
        }
    }
    let folded = PLMap::from_flat(refined, n, images)?;
    Ok((folded, FoldPlan { edges: folds.into_iter().map(|f| f.plan).collect() }, corr))
}

/// Per-edge budgets `min(ε_1, ε_l)` over the root shells met by each closed edge.
pub fn edge_budgets(domain: &Arc<SimplicialComplex>, eps: &EpsSchedule, base_vertex: &str) -> Result<Vec<f64>> {
    let shells = ShellBudget::new(domain, base_vertex)?;
    Ok(domain.edges().iter().map(|e| shells.cell_budget(domain, e, eps)).collect())
}

/// Folds every strictly short edge so its image arclength equals its intrinsic length.
/// Original vertex images are kept; the result is linear on an edgewise subdivision.
pub fn isometrize_graph(map: &PLMap, eps: &EpsSchedule, base_vertex: &str) -> Result<(PLMap, FoldPlan)> {
    let dom = map.domain();
    if dom.dimension() > 1 {
        return Err(Error::WrongDimension { expected: 1, actual: dom.dimension() });
    }
    let targets: Vec<f64> = dom.edges().iter().map(|e| dom.length(e[0], e[1])).collect();
    let budgets = edge_budgets(dom, eps, base_vertex)?;
    let (folded, plan, _) = fold_edges(map, &targets, &budgets, false)?;
    Ok((folded, plan))
}

/// Image arclength of each original edge of `domain` under a map linear on a refinement.
pub fn edge_arclengths(map: &PLMap) -> Vec<f64> {
    let dom = map.domain();
    let root = dom.root();
    let mut out = vec![0.0; root.edges().len()];
    let index: std::collections::HashMap<_, _> = root.edges().iter().enumerate().map(|(i, e)| (e.clone(), i)).collect();
    for e in dom.edges() {
        let carrier = dom.root_carrier(e);
        if let Some(i) = index.get(&carrier) {
            out[*i] += dist(map.image(e[0]), map.image(e[1]));
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::complex::EdgeLengths;
    use approx::assert_relative_eq;

    fn arclength(poly: &[Vec<f64>]) -> f64 {
        poly.windows(2).map(|w| dist(&w[0], &w[1])).sum()
    }

    #[test]
    fn fold_edge_example() {
        let poly = fold_edge(&[0.0, 0.0], &[1.0, 0.0], 2.0, 0.1, &[0.0, 1.0]).unwrap();
        assert_eq!(poly.len(), 29);
        assert_relative_eq!(poly[1][1], 3f64.sqrt() / 28.0, epsilon = 1e-15);
        assert_relative_eq!(arclength(&poly), 2.0, max_relative = 1e-12);
        assert_eq!(fold_edge(&[0.0, 0.0], &[1.0, 0.0], 1.0, 0.1, &[0.0, 1.0]).unwrap(), vec![vec![0.0, 0.0], vec![1.0, 0.0]]);
        assert!(matches!(fold_edge(&[0.0, 0.0], &[1.0, 0.0], 0.5, 0.1, &[0.0, 1.0]), Err(Error::NotShort { .. })));
        assert!(fold_edge(&[0.0, 0.0], &[1.0, 0.0], 2.0, 0.1, &[1.0, 0.0]).is_err());
        assert!(matches!(fold_edge(&[0.0], &[1.0], 2.0, 0.1, &[1.0]), Err(Error::DimensionTooSmall { .. })));
    }

    #[test]
    fn transverse_is_unit_normal() {
        for d in [vec![1.0, 0.0, 0.0], vec![0.3, -0.2, 0.9], vec![0.0, 0.0, 2.0], vec![0.0, 0.0, 0.0]] {
            let t = transverse_direction(&d);
            assert_relative_eq!(t.iter().map(|x| x * x).sum::<f64>(), 1.0, epsilon = 1e-14);
            assert!(t.iter().zip(&d).map(|(a, b)| a * b).sum::<f64>().abs() < 1e-14);
        }
        assert_eq!(transverse_direction(&[0.0, 0.0, 2.0]), vec![1.0, 0.0, 0.0]);
    }

    #[test]
    fn switchback_restores_length() {
        let fold = switchback(0.2, 0.5, 0.9, 0.05);
        let mut values = vec![0.2];
        values.extend(fold.points.iter().map(|p| p[0]));
        values.push(0.5);
        let mut ts = vec![0.0];
        ts.extend(&fold.fractions);
        ts.push(1.0);
        let len: f64 = values.windows(2).map(|w| (w[1] - w[0]).abs()).sum();
        assert_relative_eq!(len, 0.9, max_relative = 1e-12);
        for (w, t) in values.windows(2).zip(ts.windows(2)) {
            assert_relative_eq!((w[1] - w[0]).abs() / (t[1] - t[0]), 0.9, max_relative = 1e-9);
        }
        for (v, t) in values.iter().zip(&ts) {
            assert!((v - (0.2 + 0.3 * t)).abs() < 0.05);
        }
    }

    fn square() -> Arc<SimplicialComplex> {
        let mut l = EdgeLengths::new();
        for (a, b) in [("a", "b"), ("b", "c"), ("c", "d"), ("a", "d")] {
            l.insert((a.into(), b.into()), 1.0);
        }
        let tops = vec![vec!["a", "b"], vec!["b", "c"], vec!["c", "d"], vec!["a", "d"]];
        Arc::new(SimplicialComplex::build(&["a", "b", "c", "d"], &tops, &l).unwrap())
    }

    #[test]
    fn square_circle_isometrized() {
        let s = square();
        let unit = PLMap::new(Arc::clone(&s), 2, vec![vec![0.0, 0.0], vec![1.0, 0.0], vec![1.0, 1.0], vec![0.0, 1.0]]).unwrap();
        let half = unit.contract_toward_point(None, 0.5).unwrap();
        let eps = EpsSchedule::constant(0.05).unwrap();
        let (h, plan) = isometrize_graph(&half, &eps, "a").unwrap();
        for len in edge_arclengths(&h) {
            assert_relative_eq!(len, 1.0, max_relative = 1e-9);
        }
        for v in 0..4 {
            assert_eq!(h.image(v), half.image(v));
        }
        assert!(plan.edges.iter().all(|e| e.kind == FoldKind::Zigzag && e.pieces % 2 == 0 && e.rise < 0.05));
        let (id, plan1) = isometrize_graph(&unit, &eps, "a").unwrap();
        assert!(plan1.edges.iter().all(|e| e.pieces == 1));
        assert_eq!(id.images_flat(), unit.images_flat());
        assert!(plan.to_json().contains("\"zigzag\""));
    }

    #[test]
    fn stretched_edge_rejected() {
        let s = square();
        let big = PLMap::new(Arc::clone(&s), 2, vec![vec![0.0, 0.0], vec![2.0, 0.0], vec![2.0, 2.0], vec![0.0, 2.0]]).unwrap();
        let eps = EpsSchedule::constant(0.05).unwrap();
        assert!(matches!(isometrize_graph(&big, &eps, "a"), Err(Error::NotShort { .. })));
        let line = PLMap::new(s, 1, vec![vec![0.0], vec![0.5], vec![0.5], vec![0.0]]).unwrap();
        assert!(matches!(isometrize_graph(&line, &eps, "a"), Err(Error::DimensionTooSmall { .. })));
    }
}
