//! General position tests and shortness-preserving perturbations of vertex images.

use std::collections::HashMap;

use nalgebra::DMatrix;
use rand::{RngExt, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::Serialize;

use crate::complex::Simplex;
use crate::error::{Error, Result};
use crate::intersect::exact_verdict;
use crate::plmap::{PLMap, STRICT_TOL};
use crate::schedule::{EpsSchedule, ShellBudget};

pub const DEFAULT_RANK_TOL: f64 = 1e-9;
pub const DEFAULT_RETRIES: usize = 64;
pub const MAX_HALVINGS: usize = 20;
/// Largest subset count for which perturbation loops check every placed subset.
pub const FULL_SCOPE_LIMIT: f64 = 5e6;

// squared-ratio lower bound above which the Gram screen is trusted without an SVD;
// far above the Cholesky rounding level and far above rank_tol²
const SCREEN_LB: f64 = 1e-12;

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct GenPosReport {
    pub k: usize,
    pub holds: bool,
    pub witness: Vec<usize>,
    pub min_singular_gap: f64,
}

/// Which subsets the perturbation loops re-test after moving a vertex.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum GpScope {
    /// Every subset of already placed vertices containing the moved one.
    Full,
    /// Vertex sets of pairs of maximal simplices with overlapping image boxes.
    Local,
}

#[derive(Clone, Copy, Debug)]
pub struct PerturbOptions {
    pub rank_tol: f64,
    pub retries: usize,
    pub max_halvings: usize,
    pub scope: Option<GpScope>,
}

impl Default for PerturbOptions {
    fn default() -> Self {
        PerturbOptions { rank_tol: DEFAULT_RANK_TOL, retries: DEFAULT_RETRIES, max_halvings: MAX_HALVINGS, scope: None }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum EmbeddingCheck {
    GenPos,
    LocalGenPos,
    Exact,
}

fn norm(p: &[f64]) -> f64 {
    p.iter().map(|x| x * x).sum::<f64>().sqrt()
}

/// Cholesky factor of the difference Gram matrix of a growing point list, with the
/// running quantities that bound `(σ_min/σ_max)²`.
struct Factor {
    diffs: Vec<Vec<f64>>,
    rows: Vec<Vec<f64>>,
    det: f64,
    trace: f64,
    min_pivot: f64,
    max_diag: f64,
    saved: Vec<[f64; 4]>,
}

impl Factor {
    fn new() -> Self {
        Factor {
            diffs: Vec::new(),
            rows: Vec::new(),
            det: 1.0,
            trace: 0.0,
            min_pivot: f64::INFINITY,
            max_diag: 0.0,
            saved: Vec::new(),
        }
    }

    /// Appends `d`; leaves the factor unchanged and returns false on a non-positive pivot.
    fn push(&mut self, d: Vec<f64>) -> bool {
        let sq: f64 = d.iter().map(|x| x * x).sum();
        let mut y = Vec::with_capacity(self.rows.len() + 1);
        for (j, row) in self.rows.iter().enumerate() {
            let g: f64 = d.iter().zip(&self.diffs[j]).map(|(a, b)| a * b).sum();
            let partial: f64 = row[..j].iter().zip(&y).map(|(a, b)| a * b).sum();
            y.push((g - partial) / row[j]);
        }
        let pivot = sq - y.iter().map(|x| x * x).sum::<f64>();
        if !(pivot > 0.0) {
            return false;
        }
        self.saved.push([self.det, self.trace, self.min_pivot, self.max_diag]);
        self.det *= pivot;
        self.trace += sq;
        self.min_pivot = self.min_pivot.min(pivot);
        self.max_diag = self.max_diag.max(sq);
        y.push(pivot.sqrt());
        self.rows.push(y);
        self.diffs.push(d);
        true
    }

    fn pop(&mut self) {
        self.rows.pop();
        self.diffs.pop();
        [self.det, self.trace, self.min_pivot, self.max_diag] = self.saved.pop().unwrap();
    }

    /// `(lower, upper)` bounds on `(σ_min/σ_max)²`: `λ_max ≤ trace`, and by AM-GM on the
    /// other eigenvalues `λ_min ≥ det / (trace/(l−1))^(l−1)`.
    fn bounds(&self) -> (f64, f64) {
        let l = self.rows.len();
        let lower = if l < 2 {
            1.0
        } else {
            let rest = self.trace / (l - 1) as f64;
            self.det / (self.trace * rest.powi(l as i32 - 1))
        };
        (lower, self.min_pivot / self.max_diag)
    }
}

/// Depth-first walk over the subsets `{anchor} ∪ S`, `S` an ordered selection of at most
/// `k` points of `others`. `visit` receives the positions of `S` and the Gram bounds when
/// the factorization succeeded; it returns false to stop the walk.
fn walk(anchor: &[f64], others: &[&[f64]], k: usize, visit: &mut impl FnMut(&[usize], Option<(f64, f64)>) -> bool) -> bool {
    fn go(
        anchor: &[f64],
        others: &[&[f64]],
        k: usize,
        chosen: &mut Vec<usize>,
        factor: &mut Factor,
        exact: bool,
        visit: &mut impl FnMut(&[usize], Option<(f64, f64)>) -> bool,
    ) -> bool {
        if chosen.len() == k {
            return true;
        }
        let start = chosen.last().map_or(0, |l| l + 1);
        for u in start..others.len() {
            chosen.push(u);
            let pushed = exact && factor.push(others[u].iter().zip(anchor).map(|(a, b)| a - b).collect());
            let mut cont = visit(chosen, pushed.then(|| factor.bounds()));
            cont = cont && go(anchor, others, k, chosen, factor, pushed, visit);
            if pushed {
                factor.pop();
            }
            chosen.pop();
            if !cont {
                return false;
            }
        }
        true
    }
    go(anchor, others, k, &mut Vec::new(), &mut Factor::new(), true, visit)
}

/// `σ_min/σ_max` of the difference matrix of `pts`; for two points, their distance
/// relative to the larger norm.
pub fn singular_gap(pts: &[&[f64]]) -> f64 {
    match pts.len() {
        0 | 1 => 1.0,
        2 => {
            let scale = norm(pts[0]).max(norm(pts[1]));
            if scale == 0.0 {
                return 0.0;
            }
            let d: f64 = pts[0].iter().zip(pts[1]).map(|(a, b)| (a - b) * (a - b)).sum::<f64>().sqrt();
            d / scale
        }
        m => {
            let n = pts[0].len();
            if m - 1 > n {
                return 0.0;
            }
            let a = DMatrix::from_fn(n, m - 1, |r, c| pts[c + 1][r] - pts[0][r]);
            let sv = a.singular_values();
            let max = sv.max();
            if max == 0.0 {
                0.0
            } else {
                sv.min() / max
            }
        }
    }
}

/// Pairs compare distance to scale; larger sets trust the Gram bound when conclusive.
fn independent(pts: &[&[f64]], bounds: Option<(f64, f64)>, tol: f64) -> bool {
    if pts.len() > 2 && pts.len() - 1 > pts[0].len() {
        return false;
    }
    if pts.len() > 2 && bounds.is_some_and(|(lb, _)| lb > SCREEN_LB) {
        return true;
    }
    singular_gap(pts) > tol
}

/// Drops points from a degenerate subset while it stays degenerate.
fn shrink_witness(points: &[&[f64]], mut witness: Vec<usize>, tol: f64) -> (Vec<usize>, f64) {
    let gap_of = |w: &[usize]| singular_gap(&w.iter().map(|i| points[*i]).collect::<Vec<_>>());
    let mut i = 0;
    while i < witness.len() && witness.len() > 2 {
        let mut fewer = witness.clone();
        fewer.remove(i);
        if gap_of(&fewer) <= tol {
            witness = fewer;
        } else {
            i += 1;
        }
    }
    let gap = gap_of(&witness);
    (witness, gap)
}

/// Checks that every subset of at most `k + 1` points is affinely independent.
pub fn is_general_position(points: &[Vec<f64>], k: usize, rank_tol: f64) -> Result<GenPosReport> {
    let refs: Vec<&[f64]> = points.iter().map(|p| p.as_slice()).collect();
    general_position_of(&refs, k, rank_tol)
}

pub(crate) fn general_position_of(points: &[&[f64]], k: usize, rank_tol: f64) -> Result<GenPosReport> {
    let n = points.first().map_or(k, |p| p.len());
    if k > n {
        return Err(Error::InvalidArgument(format!("general position order {k} exceeds ambient dimension {n}")));
    }
    let mut best = f64::INFINITY;
    let mut witness = None;
    for a in 0..points.len() {
        let others = &points[a + 1..];
        let mut pts: Vec<&[f64]> = Vec::with_capacity(k + 1);
        let done = walk(points[a], others, k, &mut |chosen, bounds| {
            if chosen.len() > 1 {
                if let Some((lb, ub)) = bounds {
                    if lb > SCREEN_LB && ub >= best * best {
                        return true;
                    }
                }
            }
            pts.clear();
            pts.push(points[a]);
            pts.extend(chosen.iter().map(|u| others[*u]));
            let gap = singular_gap(&pts);
            best = best.min(gap);
            if gap <= rank_tol {
                witness = Some(std::iter::once(a).chain(chosen.iter().map(|u| a + 1 + u)).collect::<Vec<_>>());
                return false;
            }
            true
        });
        if !done {
            let (witness, gap) = shrink_witness(points, witness.unwrap(), rank_tol);
            return Ok(GenPosReport { k, holds: false, witness, min_singular_gap: gap });
        }
    }
    Ok(GenPosReport { k, holds: true, witness: Vec::new(), min_singular_gap: best.min(1.0) })
}

fn subset_count(v: usize, k: usize) -> f64 {
    let mut total = 0.0;
    let mut c = 1.0;
    for m in 1..=(k + 1).min(v) {
        c = c * (v + 1 - m) as f64 / m as f64;
        if m >= 2 {
            total += c;
        }
    }
    total
}

/// Scope used when none is requested: full when the subset count stays manageable.
pub fn auto_scope(vertex_count: usize, k: usize) -> GpScope {
    if subset_count(vertex_count, k) <= FULL_SCOPE_LIMIT {
        GpScope::Full
    } else {
        GpScope::Local
    }
}

type Bbox = Vec<(f64, f64)>;

/// Uniform hash grid over the first (at most three) coordinates of placed simplex boxes.
/// Each box is filed under the cell of its lower corner.
struct BoxGrid {
    cell: f64,
    dims: usize,
    cells: HashMap<[i64; 3], Vec<usize>>,
    oversize: Vec<usize>,
    reach: i64,
}

impl BoxGrid {
    const MAX_SPAN: i64 = 16;

    fn new(cell: f64, dims: usize) -> Self {
        BoxGrid { cell, dims: dims.min(3), cells: HashMap::new(), oversize: Vec::new(), reach: 0 }
    }

    fn key(&self, x: f64) -> i64 {
        (x / self.cell).floor() as i64
    }

    fn insert(&mut self, id: usize, b: &Bbox) {
        let mut corner = [0i64; 3];
        let mut span = 0;
        for c in 0..self.dims {
            corner[c] = self.key(b[c].0);
            span = span.max(self.key(b[c].1) - corner[c]);
        }
        if span > Self::MAX_SPAN {
            self.oversize.push(id);
        } else {
            self.reach = self.reach.max(span);
            self.cells.entry(corner).or_default().push(id);
        }
    }

    /// Ids whose boxes may meet `b` widened by `slack`.
    fn query(&self, b: &Bbox, slack: f64) -> Vec<usize> {
        let mut out = self.oversize.clone();
        let mut lo = [0i64; 3];
        let mut hi = [0i64; 3];
        let mut volume = 1i64;
        for c in 0..self.dims {
            lo[c] = self.key(b[c].0 - slack) - self.reach;
            hi[c] = self.key(b[c].1 + slack);
            volume = volume.saturating_mul(hi[c] - lo[c] + 1);
        }
        if volume as usize > self.cells.len() {
            for (key, list) in &self.cells {
                if (0..self.dims).all(|c| lo[c] <= key[c] && key[c] <= hi[c]) {
                    out.extend(list);
                }
            }
        } else {
            for x in lo[0]..=hi[0] {
                for y in lo[1]..=hi[1] {
                    for z in lo[2]..=hi[2] {
                        if let Some(list) = self.cells.get(&[x, y, z]) {
                            out.extend(list);
                        }
                    }
                }
            }
        }
        out.sort_unstable();
        out.dedup();
        out
    }
}

struct GpCheck {
    k: usize,
    coords: usize,
    tol: f64,
    grid: Option<BoxGrid>,
    slack: f64,
}

impl GpCheck {
    fn new(g: &PLMap, k: usize, coords: usize, tol: f64, scope: GpScope) -> Self {
        let slack = 1e-9 * g.images_flat().iter().fold(1.0f64, |m, x| m.max(x.abs()));
        let grid = (scope == GpScope::Local).then(|| {
            let dom = g.domain();
            let extents: Vec<f64> = dom
                .maximal_simplices()
                .iter()
                .map(|s| bbox(g, s, coords).iter().map(|(lo, hi)| hi - lo).fold(0.0, f64::max))
                .collect();
            let mean = extents.iter().sum::<f64>() / extents.len().max(1) as f64;
            BoxGrid::new(if mean > 0.0 { 2.0 * mean } else { 1.0 }, coords)
        });
        GpCheck { k, coords, tol, grid, slack }
    }

    fn prefix<'a>(&self, g: &'a PLMap, v: usize) -> &'a [f64] {
        &g.image(v)[..self.coords]
    }

    fn subsets_ok(&self, g: &PLMap, v: usize, others: &[usize]) -> bool {
        let own = self.prefix(g, v);
        let rest: Vec<&[f64]> = others.iter().map(|u| self.prefix(g, *u)).collect();
        let mut pts: Vec<&[f64]> = Vec::with_capacity(self.k + 1);
        walk(own, &rest, self.k, &mut |chosen, bounds| {
            pts.clear();
            pts.push(own);
            pts.extend(chosen.iter().map(|u| rest[*u]));
            independent(&pts, bounds, self.tol)
        })
    }

    fn meets(&self, a: &Bbox, b: &Bbox) -> bool {
        a.iter().zip(b).all(|(x, y)| x.0 <= y.1 + self.slack && y.0 <= x.1 + self.slack)
    }

    /// Maximal simplices whose largest vertex is `v`.
    fn own(g: &PLMap, v: usize) -> impl Iterator<Item = usize> + '_ {
        let maximal = g.domain().maximal_simplices();
        g.domain().incident_maximal(v).iter().copied().filter(move |i| *maximal[*i].last().unwrap() == v)
    }

    /// Subsets of placed vertices (indices `< v`) together with `v`.
    fn ok(&self, g: &PLMap, v: usize) -> bool {
        match &self.grid {
            None => {
                let placed: Vec<usize> = (0..v).collect();
                self.subsets_ok(g, v, &placed)
            }
            Some(grid) => {
                let maximal = g.domain().maximal_simplices();
                let own: Vec<usize> = Self::own(g, v).collect();
                for &si in &own {
                    let s = &maximal[si];
                    let sb = bbox(g, s, self.coords);
                    let mut cands = grid.query(&sb, self.slack);
                    cands.extend(&own);
                    for ti in cands {
                        let t = &maximal[ti];
                        if !self.meets(&sb, &bbox(g, t, self.coords)) {
                            continue;
                        }
                        let others: Vec<usize> = s.union(t).iter().copied().filter(|u| *u != v).collect();
                        if !self.subsets_ok(g, v, &others) {
                            return false;
                        }
                    }
                }
                true
            }
        }
    }

    /// Records the simplices completed by placing `v`.
    fn commit(&mut self, g: &PLMap, v: usize) {
        let coords = self.coords;
        let own: Vec<usize> = Self::own(g, v).collect();
        if let Some(grid) = self.grid.as_mut() {
            for si in own {
                grid.insert(si, &bbox(g, &g.domain().maximal_simplices()[si], coords));
            }
        }
    }
}

fn bbox(g: &PLMap, s: &Simplex, coords: usize) -> Bbox {
    (0..coords)
        .map(|c| s.iter().map(|u| g.image(*u)[c]).fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), x| (lo.min(x), hi.max(x))))
        .collect()
}

fn require_strictly_short(map: &PLMap) -> Result<()> {
    let report = map.shortness_margin();
    if report.is_strictly_short() {
        Ok(())
    } else {
        Err(Error::NotStrictlyShort { margin: report.margin, simplex: report.worst_simplex.unwrap_or_default() })
    }
}

enum Sampling {
    Ball,
    Axis(usize),
}

struct Mover<'a> {
    rng: ChaCha8Rng,
    opts: &'a PerturbOptions,
}

impl Mover<'_> {
    fn margins(g: &PLMap, incident: &[Simplex]) -> Vec<(f64, f64)> {
        incident.iter().map(|s| g.simplex_margin(s)).collect()
    }

    /// Largest `budget / 2^i` keeping every incident margin above half its value
    /// under each signed axis displacement.
    fn shortness_radius(g: &mut PLMap, v: usize, incident: &[Simplex], axes: &[usize], budget: f64) -> Option<f64> {
        let original = g.image(v).to_vec();
        let base = Self::margins(g, incident);
        let mut r = budget;
        for _ in 0..64 {
            let mut ok = true;
            'dirs: for &c in axes {
                for sign in [1.0, -1.0] {
                    g.image_mut(v)[c] = original[c] + sign * r;
                    let now = Self::margins(g, incident);
                    g.image_mut(v)[c] = original[c];
                    if now.iter().zip(&base).any(|(a, b)| a.0 < 0.5 * b.0) {
                        ok = false;
                        break 'dirs;
                    }
                }
            }
            if ok {
                return Some(r);
            }
            r /= 2.0;
        }
        None
    }

    fn sample(&mut self, r: f64, n: usize, how: &Sampling) -> Vec<f64> {
        match how {
            Sampling::Ball => {
                let mut d: Vec<f64> = (0..n).map(|_| self.rng.sample(StandardNormal)).collect();
                let len = norm(&d);
                let u: f64 = self.rng.random();
                let scale = r * u.powf(1.0 / n as f64) / len;
                d.iter_mut().for_each(|x| *x *= scale);
                d
            }
            Sampling::Axis(c) => {
                let mut d = vec![0.0; n];
                d[*c] = r * (2.0 * self.rng.random::<f64>() - 1.0);
                d
            }
        }
    }

    fn place(&mut self, g: &mut PLMap, v: usize, budget: f64, how: Sampling, check: &mut GpCheck) -> Result<()> {
        let dom = g.domain().clone();
        let incident: Vec<Simplex> =
            dom.incident_maximal(v).iter().map(|i| dom.maximal_simplices()[*i].clone()).filter(|s| s.dim() >= 1).collect();
        let n = g.ambient_dim();
        let axes: Vec<usize> = match how {
            Sampling::Ball => (0..n).collect(),
            Sampling::Axis(c) => vec![c],
        };
        let mut r = Self::shortness_radius(g, v, &incident, &axes, budget)
            .ok_or_else(|| Error::Numerical(format!("no shortness-preserving radius at `{}`", dom.id(v))))?;
        let original = g.image(v).to_vec();
        for _ in 0..=self.opts.max_halvings {
            for _ in 0..self.opts.retries {
                let d = self.sample(r, n, &how);
                if norm(&d) >= budget {
                    continue;
                }
                for (x, (o, dx)) in g.image_mut(v).iter_mut().zip(original.iter().zip(&d)) {
                    *x = o + dx;
                }
                let short = Self::margins(g, &incident).iter().all(|(m, t)| *m > 0.0 && m / t > STRICT_TOL);
                if short && check.ok(g, v) {
                    check.commit(g, v);
                    return Ok(());
                }
            }
            r /= 2.0;
        }
        g.image_mut(v).copy_from_slice(&original);
        Err(Error::RetryExhausted { vertex: dom.id(v).to_string() })
    }
}

/// Moves every vertex image (in vertex order) by less than half its shell budget so that
/// the images land in `(2n+1)`-general position while the map stays strictly short.
pub fn perturb_to_embedding(
    map: &PLMap,
    eps: &EpsSchedule,
    base_vertex: &str,
    seed: u64,
    opts: &PerturbOptions,
) -> Result<PLMap> {
    let dom = map.domain().clone();
    let n = dom.dimension();
    let k = 2 * n + 1;
    if map.ambient_dim() < k {
        return Err(Error::DimensionTooSmall { required: k, actual: map.ambient_dim() });
    }
    require_strictly_short(map)?;
    let budgets = ShellBudget::new(&dom, base_vertex)?;
    let scope = opts.scope.unwrap_or_else(|| auto_scope(dom.vertex_count(), k));
    let mut check = GpCheck::new(map, k, map.ambient_dim(), opts.rank_tol, scope);
    let mut mover = Mover { rng: ChaCha8Rng::seed_from_u64(seed), opts };
    let mut g = map.clone();
    for v in 0..dom.vertex_count() {
        let budget = budgets.vertex_budget(&dom, v, eps) / 2.0;
        mover.place(&mut g, v, budget, Sampling::Ball, &mut check)?;
    }
    Ok(g)
}

/// Perturbs one coordinate at a time so that every prefix map `g_j` sends vertices
/// into `min(j, 2n+1)`-general position.
pub fn perturb_prefix_general_position(
    map: &PLMap,
    eps: &EpsSchedule,
    base_vertex: &str,
    seed: u64,
    opts: &PerturbOptions,
) -> Result<PLMap> {
    let dom = map.domain().clone();
    let n = dom.dimension();
    let big_n = map.ambient_dim();
    let required = (3 * n).max(1);
    if big_n < required {
        return Err(Error::DimensionTooSmall { required, actual: big_n });
    }
    require_strictly_short(map)?;
    let budgets = ShellBudget::new(&dom, base_vertex)?;
    let scope = opts.scope.unwrap_or_else(|| auto_scope(dom.vertex_count(), 2 * n + 1));
    let per_vertex: Vec<f64> =
        (0..dom.vertex_count()).map(|v| budgets.vertex_budget(&dom, v, eps) / (4.0 * big_n as f64)).collect();
    let mut mover = Mover { rng: ChaCha8Rng::seed_from_u64(seed), opts };
    let mut g = map.clone();
    for j in 0..big_n {
        let mut check = GpCheck::new(&g, (j + 1).min(2 * n + 1), j + 1, opts.rank_tol, scope);
        for (v, budget) in per_vertex.iter().enumerate() {
            mover.place(&mut g, v, *budget, Sampling::Axis(j), &mut check)?;
        }
    }
    Ok(g)
}

/// Vertex images restricted to the first `coords` coordinates.
pub fn prefix_images(map: &PLMap, coords: usize) -> Vec<Vec<f64>> {
    map.images().map(|p| p[..coords].to_vec()).collect()
}

/// Decides whether `map` is an embedding.
///
/// `GenPos` and `LocalGenPos` are sufficient certificates (Key Lemma and its pairwise
/// form); `Exact` is the intersection oracle.
pub fn verify_embedding(map: &PLMap, mode: EmbeddingCheck, rank_tol: f64) -> Result<bool> {
    let n = map.domain().dimension();
    let k = 2 * n + 1;
    match mode {
        EmbeddingCheck::Exact => Ok(exact_verdict(map).is_embedding()),
        _ if map.ambient_dim() < k => Err(Error::DimensionTooSmall { required: k, actual: map.ambient_dim() }),
        EmbeddingCheck::GenPos => {
            let pts: Vec<&[f64]> = map.images().collect();
            Ok(general_position_of(&pts, k, rank_tol)?.holds)
        }
        EmbeddingCheck::LocalGenPos => {
            let mut check = GpCheck::new(map, k, map.ambient_dim(), rank_tol, GpScope::Local);
            for v in 0..map.domain().vertex_count() {
                if !check.ok(map, v) {
                    return Ok(false);
                }
                check.commit(map, v);
            }
            Ok(true)
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::complex::{EdgeLengths, SimplicialComplex};
    use crate::intersect::ExactVerdict;
    use itertools::Itertools;
    use std::sync::Arc;

    fn pts(v: &[[f64; 2]]) -> Vec<Vec<f64>> {
        v.iter().map(|p| p.to_vec()).collect()
    }

    #[test]
    fn general_position_examples() {
        let tri = pts(&[[0.0, 0.0], [1.0, 0.0], [0.0, 1.0]]);
        let r = is_general_position(&tri, 2, 1e-9).unwrap();
        assert!(r.holds && r.witness.is_empty());
        let mut four = tri.clone();
        four.push(vec![2.0, 0.0]);
        let r = is_general_position(&four, 2, 1e-9).unwrap();
        assert!(!r.holds);
        assert_eq!(r.witness, vec![0, 1, 3]);
        assert!(is_general_position(&pts(&[[0.3, 0.4]]), 2, 1e-9).unwrap().holds);
        assert!(is_general_position(&tri, 3, 1e-9).is_err());
    }

    #[test]
    fn min_gap_matches_brute_force() {
        let cloud = vec![
            vec![0.0, 0.0, 0.0],
            vec![1.0, 0.1, 0.0],
            vec![0.2, 1.0, 0.3],
            vec![0.5, 0.5, 1.0],
            vec![0.9, 0.95, 0.4],
        ];
        let r = is_general_position(&cloud, 3, 1e-9).unwrap();
        let mut brute = f64::INFINITY;
        for m in 2..=4 {
            for s in (0..5).combinations(m) {
                let p: Vec<&[f64]> = s.iter().map(|i| cloud[*i].as_slice()).collect();
                brute = brute.min(singular_gap(&p));
            }
        }
        assert!(r.holds);
        assert!((r.min_singular_gap - brute).abs() < 1e-14);
    }

    #[test]
    fn screen_brackets_the_ratio() {
        let p = [vec![0.0, 0.0, 0.0], vec![1.0, 0.0, 0.0], vec![0.3, 0.01, 0.0], vec![0.0, 0.2, 2.0]];
        let refs: Vec<&[f64]> = p.iter().map(|x| x.as_slice()).collect();
        let mut f = Factor::new();
        for q in &p[1..] {
            assert!(f.push(q.iter().zip(&p[0]).map(|(a, b)| a - b).collect()));
        }
        let (lb, ub) = f.bounds();
        let r2 = singular_gap(&refs).powi(2);
        assert!(lb <= r2 * (1.0 + 1e-12) && r2 <= ub * (1.0 + 1e-12), "{lb} {r2} {ub}");
    }

    fn two_triangles() -> Arc<SimplicialComplex> {
        let mut l = EdgeLengths::new();
        for (a, b) in [("a", "b"), ("a", "c"), ("b", "c"), ("b", "d"), ("c", "d")] {
            l.insert((a.into(), b.into()), 1.0);
        }
        Arc::new(SimplicialComplex::build(&["a", "b", "c", "d"], &[vec!["a", "b", "c"], vec!["b", "c", "d"]], &l).unwrap())
    }

    fn coincident_map() -> PLMap {
        let z = |x: f64, y: f64| vec![x, y, 0.0, 0.0, 0.0];
        PLMap::new(two_triangles(), 5, vec![z(0.0, 0.0), z(0.5, 0.0), z(0.0, 0.5), z(0.0, 0.0)]).unwrap()
    }

    #[test]
    fn coincident_vertices_become_embedded() {
        let f = coincident_map();
        assert!(matches!(exact_verdict(&f), ExactVerdict::Collision { .. }));
        let eps = EpsSchedule::new(vec![0.05, 0.02]).unwrap();
        let g = perturb_to_embedding(&f, &eps, "a", 11, &PerturbOptions::default()).unwrap();
        assert!(g.shortness_margin().is_strictly_short());
        assert_eq!(exact_verdict(&g), ExactVerdict::Embedding);
        assert!(verify_embedding(&g, EmbeddingCheck::GenPos, 1e-9).unwrap());
        assert!(verify_embedding(&g, EmbeddingCheck::LocalGenPos, 1e-9).unwrap());
        for v in 0..4 {
            let d = norm(&g.image(v).iter().zip(f.image(v)).map(|(a, b)| a - b).collect::<Vec<_>>());
            assert!(d < 0.05);
        }
        let again = perturb_to_embedding(&f, &eps, "a", 11, &PerturbOptions::default()).unwrap();
        assert_eq!(again, g);
    }

    #[test]
    fn general_input_stays_close() {
        let f = coincident_map();
        let eps = EpsSchedule::constant(0.01).unwrap();
        let g = perturb_to_embedding(&f, &eps, "a", 1, &PerturbOptions::default()).unwrap();
        let h = perturb_to_embedding(&g, &eps, "b", 2, &PerturbOptions::default()).unwrap();
        for v in 0..4 {
            let d = norm(&h.image(v).iter().zip(g.image(v)).map(|(a, b)| a - b).collect::<Vec<_>>());
            assert!(d < 0.01);
        }
        assert!(is_general_position(&h.images().map(|p| p.to_vec()).collect::<Vec<_>>(), 5, 1e-9).unwrap().holds);
    }

    #[test]
    fn perturb_rejects_bad_inputs() {
        let f = coincident_map();
        let eps = EpsSchedule::constant(0.01).unwrap();
        let stretched = f.contract_toward_point(Some(&[0.0; 5]), 1.0).unwrap().with_images(f.images_flat().iter().map(|x| 3.0 * x).collect()).unwrap();
        assert!(matches!(
            perturb_to_embedding(&stretched, &eps, "a", 0, &PerturbOptions::default()),
            Err(Error::NotStrictlyShort { .. })
        ));
        let (low, _) = f.split_coordinates(4).unwrap();
        assert!(matches!(
            perturb_to_embedding(&low, &eps, "a", 0, &PerturbOptions::default()),
            Err(Error::DimensionTooSmall { required: 5, actual: 4 })
        ));
        assert!(matches!(verify_embedding(&low, EmbeddingCheck::GenPos, 1e-9), Err(Error::DimensionTooSmall { .. })));
        let (five, _) = f.direct_sum(&f).unwrap().split_coordinates(5).unwrap();
        assert!(matches!(
            perturb_prefix_general_position(&five, &eps, "a", 0, &PerturbOptions::default()),
            Err(Error::DimensionTooSmall { required: 6, actual: 5 })
        ));
    }

    #[test]
    fn prefix_separates_first_coordinates() {
        let mut l = EdgeLengths::new();
        l.insert(("a".into(), "b".into()), 1.0);
        l.insert(("b".into(), "c".into()), 1.0);
        let path = Arc::new(SimplicialComplex::build(&["a", "b", "c"], &[vec!["a", "b"], vec!["b", "c"]], &l).unwrap());
        let f = PLMap::new(path, 3, vec![vec![0.2, 0.0, 0.0], vec![0.2, 0.5, 0.0], vec![0.6, 0.5, 0.1]]).unwrap();
        let eps = EpsSchedule::constant(0.05).unwrap();
        let g = perturb_prefix_general_position(&f, &eps, "a", 5, &PerturbOptions::default()).unwrap();
        assert_ne!(g.image(0)[0], g.image(1)[0]);
        for j in 1..=3 {
            let r = is_general_position(&prefix_images(&g, j), j.min(3), 1e-9).unwrap();
            assert!(r.holds, "prefix {j}");
        }
        assert!(g.shortness_margin().is_strictly_short());
        for v in 0..3 {
            for c in 0..3 {
                assert!((g.image(v)[c] - f.image(v)[c]).abs() < 0.05 / 6.0);
            }
        }
    }

    #[test]
    fn collapsed_edge_fails_exact() {
        let f = coincident_map();
        let mut images = f.images_flat().to_vec();
        images[5..10].copy_from_slice(&[0.0; 5]);
        let g = f.with_images(images).unwrap();
        assert!(!verify_embedding(&g, EmbeddingCheck::Exact, 1e-9).unwrap());
    }

    #[test]
    fn subset_counts() {
        assert_eq!(subset_count(4, 2), 6.0 + 4.0);
        assert_eq!(auto_scope(30, 5), GpScope::Full);
        assert_eq!(auto_scope(2000, 5), GpScope::Local);
    }
}
