//! Finite metric simplicial complexes.
//!
//! A complex is stored by vertex index. Every face of every listed simplex is
//! present, and every edge carries a positive intrinsic length. Complexes that
//! come out of a subdivision remember where each of their vertices sits in the
//! complex they were cut from (see [`Ancestry`]), which lets maps linear on
//! different refinements be compared pointwise.

use std::collections::{BTreeMap, BTreeSet, HashMap, HashSet, VecDeque};
use std::fmt;
use std::ops::Deref;
use std::sync::Arc;

use itertools::Itertools;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::form::QuadraticForm;

/// Default relative positive-definiteness tolerance for Gram forms.
pub const DEFAULT_PD_TOL: f64 = 1e-10;

/// Sorted, duplicate-free tuple of vertex indices.
#[derive(Clone, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize)]
pub struct Simplex(Vec<usize>);

impl Simplex {
    pub fn new(mut vertices: Vec<usize>) -> Self {
        vertices.sort_unstable();
        vertices.dedup();
        Simplex(vertices)
    }

    pub fn vertex(v: usize) -> Self {
        Simplex(vec![v])
    }

    pub fn edge(a: usize, b: usize) -> Self {
        Simplex::new(vec![a, b])
    }

    pub fn dim(&self) -> usize {
        self.0.len() - 1
    }

    pub fn vertices(&self) -> &[usize] {
        &self.0
    }

    pub fn contains_vertex(&self, v: usize) -> bool {
        self.0.binary_search(&v).is_ok()
    }

    pub fn is_face_of(&self, other: &Simplex) -> bool {
        self.0.iter().all(|v| other.contains_vertex(*v))
    }

    pub fn union(&self, other: &Simplex) -> Simplex {
        let mut v = self.0.clone();
        v.extend_from_slice(&other.0);
        Simplex::new(v)
    }

    /// All nonempty faces, the simplex itself included.
    pub fn faces(&self) -> impl Iterator<Item = Simplex> + '_ {
        let n = self.0.len();
        (1u32..(1u32 << n)).map(move |mask| {
            Simplex((0..n).filter(|i| mask & (1 << i) != 0).map(|i| self.0[i]).collect())
        })
    }

    /// Faces of codimension one.
    pub fn facets(&self) -> impl Iterator<Item = Simplex> + '_ {
        (0..self.0.len()).filter(|_| self.0.len() > 1).map(move |skip| {
            Simplex(self.0.iter().enumerate().filter(|(i, _)| *i != skip).map(|(_, v)| *v).collect())
        })
    }
}

impl Deref for Simplex {
    type Target = [usize];
    fn deref(&self) -> &[usize] {
        &self.0
    }
}

/// A point of a complex given by convex weights on the vertices of a simplex.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct BarycentricPoint {
    pub simplex: Simplex,
    pub weights: Vec<f64>,
}

impl BarycentricPoint {
    /// Checks that the weights are nonnegative and sum to one within `1e-12`.
    pub fn new(simplex: Simplex, weights: Vec<f64>) -> Result<Self> {
        if weights.len() != simplex.len() {
            return Err(Error::InvalidArgument(format!(
                "{} weights for a simplex with {} vertices",
                weights.len(),
                simplex.len()
            )));
        }
        let sum: f64 = weights.iter().sum();
        if weights.iter().any(|w| !(*w >= 0.0)) || (sum - 1.0).abs() > 1e-12 {
            return Err(Error::InvalidArgument(format!("weights {weights:?} are not barycentric")));
        }
        Ok(BarycentricPoint { simplex, weights })
    }

    pub fn at_vertex(v: usize) -> Self {
        BarycentricPoint { simplex: Simplex::vertex(v), weights: vec![1.0] }
    }

    pub fn centroid(simplex: &Simplex) -> Self {
        let w = 1.0 / simplex.len() as f64;
        BarycentricPoint { simplex: simplex.clone(), weights: vec![w; simplex.len()] }
    }

    /// Point on edge `a b` at parameter `t` measured from `a`.
    pub fn on_edge(a: usize, b: usize, t: f64) -> Self {
        if a < b {
            BarycentricPoint { simplex: Simplex(vec![a, b]), weights: vec![1.0 - t, t] }
        } else {
            BarycentricPoint { simplex: Simplex(vec![b, a]), weights: vec![t, 1.0 - t] }
        }
    }

    /// The open cell containing the point: its simplex restricted to positive weights.
    pub fn carrier(&self) -> Simplex {
        Simplex(self.simplex.iter().zip(&self.weights).filter(|(_, w)| **w > 0.0).map(|(v, _)| *v).collect())
    }

    pub fn weight_of(&self, v: usize) -> f64 {
        self.simplex.iter().position(|u| *u == v).map_or(0.0, |i| self.weights[i])
    }

    /// Convex combination of points, written over the union of their simplices.
    pub fn combine(terms: &[(&BarycentricPoint, f64)]) -> BarycentricPoint {
        let mut acc: BTreeMap<usize, f64> = BTreeMap::new();
        for (p, c) in terms {
            for (v, w) in p.simplex.iter().zip(&p.weights) {
                *acc.entry(*v).or_insert(0.0) += c * w;
            }
        }
        acc.retain(|_, w| *w > 0.0);
        let total: f64 = acc.values().sum();
        BarycentricPoint {
            simplex: Simplex(acc.keys().copied().collect()),
            weights: acc.values().map(|w| w / total).collect(),
        }
    }

    /// Coordinates in the edge basis of `frame` (which must contain the point's carrier).
    fn frame_coords(&self, frame: &Simplex) -> Vec<f64> {
        frame[1..].iter().map(|v| self.weight_of(*v)).collect()
    }
}

/// Where the vertices of a refined complex sit inside the unrefined root complex.
#[derive(Clone, Debug)]
pub struct Ancestry {
    root: Arc<SimplicialComplex>,
    points: Vec<BarycentricPoint>,
}

impl Ancestry {
    pub fn root(&self) -> &Arc<SimplicialComplex> {
        &self.root
    }

    pub fn points(&self) -> &[BarycentricPoint] {
        &self.points
    }
}

/// Finite abstract simplicial complex with intrinsic edge lengths.
#[derive(Clone)]
pub struct SimplicialComplex {
    ids: Vec<String>,
    index: HashMap<String, usize>,
    by_dim: Vec<Vec<Simplex>>,
    members: HashSet<Simplex>,
    lengths: HashMap<(usize, usize), f64>,
    maximal: Vec<Simplex>,
    incident: Vec<Vec<usize>>,
    ancestry: Option<Ancestry>,
}

impl fmt::Debug for SimplicialComplex {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("SimplicialComplex")
            .field("vertices", &self.ids.len())
            .field("dimension", &self.dimension())
            .field("simplices", &self.members.len())
            .field("refined", &self.ancestry.is_some())
            .finish()
    }
}

impl PartialEq for SimplicialComplex {
    fn eq(&self, other: &Self) -> bool {
        self.ids == other.ids && self.by_dim == other.by_dim && self.lengths == other.lengths
    }
}

/// Unordered edge-length table keyed by vertex ids.
pub type EdgeLengths = HashMap<(String, String), f64>;

fn edge_key(a: usize, b: usize) -> (usize, usize) {
    if a < b {
        (a, b)
    } else {
        (b, a)
    }
}

impl SimplicialComplex {
    /// Builds the face closure of `simplices` over `vertices`.
    ///
    /// Vertex indices follow the lexicographic order of the ids, so the least
    /// vertex of a simplex is the one with the least id.
    pub fn build<S: AsRef<str>>(vertices: &[S], simplices: &[Vec<S>], edge_lengths: &EdgeLengths) -> Result<Self> {
        let mut ids: Vec<String> = vertices.iter().map(|v| v.as_ref().to_string()).collect();
        ids.sort();
        if let Some(dup) = ids.windows(2).find(|w| w[0] == w[1]) {
            return Err(Error::DuplicateVertex(dup[0].clone()));
        }
        let index: HashMap<String, usize> = ids.iter().enumerate().map(|(i, id)| (id.clone(), i)).collect();
        let mut tops = Vec::with_capacity(simplices.len());
        for s in simplices {
            let idx = s
                .iter()
                .map(|v| index.get(v.as_ref()).copied().ok_or_else(|| Error::UnknownVertex(v.as_ref().to_string())))
                .collect::<Result<Vec<_>>>()?;
            tops.push(idx);
        }
        let mut lengths = HashMap::new();
        for ((a, b), len) in edge_lengths {
            let (Some(&ia), Some(&ib)) = (index.get(a), index.get(b)) else {
                let missing = if index.contains_key(a) { b } else { a };
                return Err(Error::UnknownVertex(missing.clone()));
            };
            lengths.insert(edge_key(ia, ib), *len);
        }
        Self::from_indexed(ids, tops, lengths, None)
    }

    pub(crate) fn from_indexed(
        ids: Vec<String>,
        tops: Vec<Vec<usize>>,
        mut lengths: HashMap<(usize, usize), f64>,
        ancestry: Option<Ancestry>,
    ) -> Result<Self> {
        let mut index = HashMap::with_capacity(ids.len());
        for (i, id) in ids.iter().enumerate() {
            if index.insert(id.clone(), i).is_some() {
                return Err(Error::DuplicateVertex(id.clone()));
            }
        }
        let nv = ids.len();
        let mut members: HashSet<Simplex> = (0..nv).map(Simplex::vertex).collect();
        for top in tops {
            let s = Simplex::new(top);
            if s.is_empty() {
                continue;
            }
            if let Some(v) = s.iter().find(|v| **v >= nv) {
                return Err(Error::UnknownVertex(format!("#{v}")));
            }
            if members.contains(&s) {
                continue;
            }
            members.extend(s.faces());
        }
        let dim = members.iter().map(|s| s.dim()).max().unwrap_or(0);
        let mut by_dim = vec![Vec::new(); dim + 1];
        for s in &members {
            by_dim[s.dim()].push(s.clone());
        }
        for layer in &mut by_dim {
            layer.sort_unstable();
        }
        if let Some(edges) = by_dim.get(1) {
            for e in edges {
                let key = (e[0], e[1]);
                match lengths.get(&key) {
                    None => return Err(Error::MissingEdgeLength(ids[e[0]].clone(), ids[e[1]].clone())),
                    Some(len) if !(*len > 0.0) || !len.is_finite() => {
                        return Err(Error::NonPositiveLength {
                            a: ids[e[0]].clone(),
                            b: ids[e[1]].clone(),
                            length: *len,
                        })
                    }
                    _ => {}
                }
            }
            let edge_set: HashSet<(usize, usize)> = edges.iter().map(|e| (e[0], e[1])).collect();
            lengths.retain(|k, _| edge_set.contains(k));
        } else {
            lengths.clear();
        }
        let mut covered: HashSet<&Simplex> = HashSet::new();
        for layer in by_dim.iter().skip(1) {
            for s in layer {
                covered.extend(s.facets().filter_map(|f| members.get(&f)));
            }
        }
        let mut maximal: Vec<Simplex> =
            by_dim.iter().flatten().filter(|s| !covered.contains(s)).cloned().collect();
        maximal.sort_unstable_by(|a, b| b.dim().cmp(&a.dim()).then_with(|| a.cmp(b)));
        let mut incident = vec![Vec::new(); nv];
        for (i, s) in maximal.iter().enumerate() {
            for v in s.iter() {
                incident[*v].push(i);
            }
        }
        Ok(SimplicialComplex { ids, index, by_dim, members, lengths, maximal, incident, ancestry })
    }

    pub fn dimension(&self) -> usize {
        self.by_dim.len() - 1
    }

    pub fn vertex_count(&self) -> usize {
        self.ids.len()
    }

    pub fn ids(&self) -> &[String] {
        &self.ids
    }

    pub fn id(&self, v: usize) -> &str {
        &self.ids[v]
    }

    pub fn vertex_index(&self, id: &str) -> Result<usize> {
        self.index.get(id).copied().ok_or_else(|| Error::UnknownVertex(id.to_string()))
    }

    /// Simplex from vertex ids; errors if it is not part of the complex.
    pub fn simplex_of(&self, ids: &[&str]) -> Result<Simplex> {
        let s = Simplex::new(ids.iter().map(|id| self.vertex_index(id)).collect::<Result<_>>()?);
        if self.contains(&s) {
            Ok(s)
        } else {
            Err(Error::UnknownSimplex(ids.iter().map(|s| s.to_string()).collect()))
        }
    }

    pub fn simplex_ids(&self, s: &Simplex) -> Vec<String> {
        s.iter().map(|v| self.ids[*v].clone()).collect()
    }

    pub fn contains(&self, s: &Simplex) -> bool {
        self.members.contains(s)
    }

    /// Simplices of one dimension, sorted.
    pub fn simplices(&self, dim: usize) -> &[Simplex] {
        self.by_dim.get(dim).map_or(&[], |v| v.as_slice())
    }

    pub fn all_simplices(&self) -> impl Iterator<Item = &Simplex> {
        self.by_dim.iter().flatten()
    }

    pub fn simplex_count(&self) -> usize {
        self.members.len()
    }

    pub fn edges(&self) -> &[Simplex] {
        self.simplices(1)
    }

    /// Maximal simplices, highest dimension first.
    pub fn maximal_simplices(&self) -> &[Simplex] {
        &self.maximal
    }

    /// Indices into [`Self::maximal_simplices`] of the maximal simplices containing `v`.
    pub fn incident_maximal(&self, v: usize) -> &[usize] {
        &self.incident[v]
    }

    /// Intrinsic length of edge `a b`; zero when `a == b`.
    pub fn length(&self, a: usize, b: usize) -> f64 {
        if a == b {
            0.0
        } else {
            self.lengths[&edge_key(a, b)]
        }
    }

    pub fn try_length(&self, a: usize, b: usize) -> Option<f64> {
        if a == b {
            Some(0.0)
        } else {
            self.lengths.get(&edge_key(a, b)).copied()
        }
    }

    pub fn ancestry(&self) -> Option<&Ancestry> {
        self.ancestry.as_ref()
    }

    /// Position of vertex `v` in the root complex.
    pub fn root_point(&self, v: usize) -> BarycentricPoint {
        match &self.ancestry {
            Some(a) => a.points[v].clone(),
            None => BarycentricPoint::at_vertex(v),
        }
    }

    /// The open cell of the root complex containing the interior of `s`.
    pub fn root_carrier(&self, s: &Simplex) -> Simplex {
        match &self.ancestry {
            None => s.clone(),
            Some(a) => s.iter().map(|v| a.points[*v].carrier()).reduce(|x, y| x.union(&y)).expect("nonempty simplex"),
        }
    }

    /// Intrinsic Gram form of `s`, based at its least vertex:
    /// `G[a,b] = (d(v0,va)² + d(v0,vb)² − d(va,vb)²) / 2`.
    pub fn gram_form(&self, s: &Simplex) -> Result<QuadraticForm> {
        if !self.contains(s) {
            return Err(Error::UnknownSimplex(self.simplex_ids_lossy(s)));
        }
        Ok(self.gram_unchecked(s))
    }

    fn simplex_ids_lossy(&self, s: &Simplex) -> Vec<String> {
        s.iter().map(|v| self.ids.get(*v).cloned().unwrap_or_else(|| format!("#{v}"))).collect()
    }

    pub(crate) fn gram_unchecked(&self, s: &Simplex) -> QuadraticForm {
        let l = s.dim();
        let v0 = s[0];
        let d0: Vec<f64> = s[1..].iter().map(|v| self.length(v0, *v)).collect();
        let mut m = nalgebra::DMatrix::zeros(l, l);
        for a in 0..l {
            for b in a..l {
                let dab = self.length(s[a + 1], s[b + 1]);
                let g = 0.5 * (d0[a] * d0[a] + d0[b] * d0[b] - dab * dab);
                m[(a, b)] = g;
                m[(b, a)] = g;
            }
        }
        QuadraticForm::new(m)
    }

    /// Straight-line distance between two points lying in the closed simplex `frame`.
    pub fn distance_within(&self, frame: &Simplex, p: &BarycentricPoint, q: &BarycentricPoint) -> f64 {
        if frame.len() == 2 {
            let t = p.weight_of(frame[1]) - q.weight_of(frame[1]);
            return t.abs() * self.length(frame[0], frame[1]);
        }
        let g = self.gram_unchecked(frame);
        let xp = p.frame_coords(frame);
        let xq = q.frame_coords(frame);
        let delta: Vec<f64> = xp.iter().zip(&xq).map(|(a, b)| a - b).collect();
        g.apply(&delta).max(0.0).sqrt()
    }

    /// Distance between two points of this complex that share a closed simplex.
    pub fn local_distance(&self, p: &BarycentricPoint, q: &BarycentricPoint) -> Option<f64> {
        let frame = p.carrier().union(&q.carrier());
        self.contains(&frame).then(|| self.distance_within(&frame, p, q))
    }

    /// Lists the maximal simplices whose Gram form fails `λ_min > tol · trace`.
    pub fn validate_metric(&self, pd_tolerance: f64) -> ValidationReport {
        let mut failures = Vec::new();
        for s in self.maximal.iter().filter(|s| s.dim() >= 1) {
            let g = self.gram_unchecked(s);
            let min_eigenvalue = g.min_eigenvalue();
            let trace = g.trace();
            if !(min_eigenvalue > pd_tolerance * trace.abs()) {
                failures.push(MetricFailure { simplex: self.simplex_ids(s), min_eigenvalue, trace });
            }
        }
        ValidationReport { valid: failures.is_empty(), failures }
    }

    /// Path components of the 1-skeleton; `component[v]` is the least vertex of `v`'s component.
    pub fn components(&self) -> Vec<usize> {
        let adj = self.vertex_adjacency();
        let mut comp = vec![usize::MAX; self.vertex_count()];
        for start in 0..self.vertex_count() {
            if comp[start] != usize::MAX {
                continue;
            }
            comp[start] = start;
            let mut queue = VecDeque::from([start]);
            while let Some(u) = queue.pop_front() {
                for &w in &adj[u] {
                    if comp[w] == usize::MAX {
                        comp[w] = start;
                        queue.push_back(w);
                    }
                }
            }
        }
        comp
    }

    pub(crate) fn vertex_adjacency(&self) -> Vec<Vec<usize>> {
        let mut adj = vec![Vec::new(); self.vertex_count()];
        for e in self.edges() {
            adj[e[0]].push(e[1]);
            adj[e[1]].push(e[0]);
        }
        adj
    }

    /// Closed iterated star `St^k(v)`: `St¹(v)` is the union of closed simplices
    /// containing `v`, and `St^{k+1}` is the union of the stars of the points of `St^k`.
    pub fn star(&self, vertex: &str, k: usize) -> Result<SubComplex<'_>> {
        let v = self.vertex_index(vertex)?;
        if k < 1 {
            return Err(Error::InvalidArgument("star order must be at least 1".into()));
        }
        Ok(SubComplex { parent: self, simplices: self.star_set(v, k), excluded: BTreeSet::new() })
    }

    fn star_set(&self, v: usize, k: usize) -> BTreeSet<Simplex> {
        let mut points: BTreeSet<usize> = BTreeSet::from([v]);
        let mut set = BTreeSet::new();
        for _ in 0..k {
            set.clear();
            for u in &points {
                for &mi in &self.incident[*u] {
                    set.extend(self.maximal[mi].faces());
                }
            }
            // every point of a closed simplex has its star inside the stars of the simplex's vertices
            points = set.iter().flat_map(|s| s.iter().copied()).collect();
        }
        set
    }

    /// Shell `Sh^k(v) = St^k(v) \ St^{k-1}(v)` (with `Sh¹ = St¹`), stored as the closure of
    /// the open cells it contains plus the set of boundary faces that are excluded.
    pub fn shell(&self, vertex: &str, k: usize) -> Result<SubComplex<'_>> {
        let v = self.vertex_index(vertex)?;
        if k < 1 {
            return Err(Error::InvalidArgument("shell order must be at least 1".into()));
        }
        let outer = self.star_set(v, k);
        let inner = if k == 1 { BTreeSet::new() } else { self.star_set(v, k - 1) };
        let cells: BTreeSet<Simplex> = outer.difference(&inner).cloned().collect();
        let closure: BTreeSet<Simplex> = cells.iter().flat_map(|s| s.faces()).collect();
        let excluded = closure.difference(&cells).cloned().collect();
        Ok(SubComplex { parent: self, simplices: closure, excluded })
    }

    /// Refines the complex: graphs are cut edgewise into `2^level` equal pieces,
    /// higher-dimensional complexes get `level` rounds of barycentric subdivision.
    ///
    /// The returned correspondence gives each new vertex's position in `self`.
    pub fn subdivide(self: &Arc<Self>, level: u32) -> Result<(Arc<SimplicialComplex>, Vec<BarycentricPoint>)> {
        if level == 0 {
            let corr = (0..self.vertex_count()).map(BarycentricPoint::at_vertex).collect();
            return Ok((Arc::clone(self), corr));
        }
        if self.dimension() <= 1 {
            let pieces = 1usize << level;
            let fractions: Vec<Vec<f64>> =
                vec![(1..pieces).map(|i| i as f64 / pieces as f64).collect(); self.edges().len()];
            return self.split_edges(&fractions);
        }
        let mut current = Arc::clone(self);
        let mut corr: Vec<BarycentricPoint> = (0..self.vertex_count()).map(BarycentricPoint::at_vertex).collect();
        for _ in 0..level {
            let (next, step) = current.barycentric_once()?;
            corr = step
                .iter()
                .map(|p| {
                    let terms: Vec<_> = p.simplex.iter().zip(&p.weights).map(|(v, w)| (&corr[*v], *w)).collect();
                    BarycentricPoint::combine(&terms)
                })
                .collect();
            current = next;
        }
        Ok((current, corr))
    }

    fn fresh_ids(&self, count: usize) -> Vec<String> {
        let mut out = Vec::with_capacity(count);
        let mut counter = self.ids.len();
        while out.len() < count {
            let id = format!("~{counter}");
            counter += 1;
            if !self.index.contains_key(&id) {
                out.push(id);
            }
        }
        out
    }

    fn compose_root(&self, local: &[BarycentricPoint]) -> Option<Ancestry> {
        let root = match &self.ancestry {
            Some(a) => Arc::clone(&a.root),
            None => return None,
        };
        let parents = &self.ancestry.as_ref().unwrap().points;
        let points = local
            .iter()
            .map(|p| {
                let terms: Vec<_> = p.simplex.iter().zip(&p.weights).map(|(v, w)| (&parents[*v], *w)).collect();
                BarycentricPoint::combine(&terms)
            })
            .collect();
        Some(Ancestry { root, points })
    }

    fn with_root(self: &Arc<Self>, local: &[BarycentricPoint]) -> Ancestry {
        self.compose_root(local).unwrap_or_else(|| Ancestry { root: Arc::clone(self), points: local.to_vec() })
    }

    /// Cuts edge `i` (in [`Self::edges`] order) at the sorted interior fractions
    /// `fractions[i]`, measured from the edge's lower-index vertex. Graphs only.
    pub fn split_edges(self: &Arc<Self>, fractions: &[Vec<f64>]) -> Result<(Arc<SimplicialComplex>, Vec<BarycentricPoint>)> {
        if self.dimension() > 1 {
            return Err(Error::WrongDimension { expected: 1, actual: self.dimension() });
        }
        if fractions.len() != self.edges().len() {
            return Err(Error::InvalidArgument("one fraction list per edge is required".into()));
        }
        let added: usize = fractions.iter().map(Vec::len).sum();
        let mut fresh = self.fresh_ids(added).into_iter();
        let mut ids = self.ids.clone();
        ids.reserve(added);
        let mut corr: Vec<BarycentricPoint> = (0..self.vertex_count()).map(BarycentricPoint::at_vertex).collect();
        corr.reserve(added);
        let mut tops: Vec<Vec<usize>> = Vec::with_capacity(self.edges().len() + added);
        let mut lengths = HashMap::with_capacity(self.edges().len() + added);
        for (e, cuts) in self.edges().iter().zip(fractions) {
            let (a, b) = (e[0], e[1]);
            let len = self.length(a, b);
            let mut prev = (a, 0.0);
            for &t in cuts {
                if !(t > prev.1 && t < 1.0) {
                    return Err(Error::InvalidArgument(format!("edge cut fractions must increase inside (0,1): {cuts:?}")));
                }
                let v = ids.len();
                ids.push(fresh.next().unwrap());
                corr.push(BarycentricPoint { simplex: e.clone(), weights: vec![1.0 - t, t] });
                tops.push(vec![prev.0, v]);
                lengths.insert(edge_key(prev.0, v), (t - prev.1) * len);
                prev = (v, t);
            }
            tops.push(vec![prev.0, b]);
            lengths.insert(edge_key(prev.0, b), (1.0 - prev.1) * len);
        }
        for m in self.maximal.iter().filter(|s| s.dim() == 0) {
            tops.push(m.to_vec());
        }
        let ancestry = self.with_root(&corr);
        let refined = SimplicialComplex::from_indexed(ids, tops, lengths, Some(ancestry))?;
        Ok((Arc::new(refined), corr))
    }

    fn barycentric_once(self: &Arc<Self>) -> Result<(Arc<SimplicialComplex>, Vec<BarycentricPoint>)> {
        let higher: Vec<&Simplex> = self.by_dim.iter().skip(1).flatten().collect();
        let mut fresh = self.fresh_ids(higher.len()).into_iter();
        let mut ids = self.ids.clone();
        let mut corr: Vec<BarycentricPoint> = (0..self.vertex_count()).map(BarycentricPoint::at_vertex).collect();
        let mut node_of: HashMap<&Simplex, usize> = HashMap::new();
        for s in &higher {
            node_of.insert(s, ids.len());
            ids.push(fresh.next().unwrap());
            corr.push(BarycentricPoint::centroid(s));
        }
        let node = |s: &Simplex| if s.len() == 1 { s[0] } else { node_of[s] };
        let mut tops = Vec::new();
        let mut lengths = HashMap::new();
        for top in &self.maximal {
            for perm in top.iter().copied().permutations(top.len()) {
                let chain: Vec<Simplex> = (1..=perm.len()).map(|i| Simplex::new(perm[..i].to_vec())).collect();
                let nodes: Vec<usize> = chain.iter().map(node).collect();
                for [i, j] in (0..nodes.len()).array_combinations() {
                    let key = edge_key(nodes[i], nodes[j]);
                    lengths.entry(key).or_insert_with(|| self.distance_within(top, &corr[nodes[i]], &corr[nodes[j]]));
                }
                tops.push(nodes);
            }
        }
        let ancestry = self.with_root(&corr);
        let refined = SimplicialComplex::from_indexed(ids, tops, lengths, Some(ancestry))?;
        Ok((Arc::new(refined), corr))
    }

    /// Shorthand for the root complex this one was refined from (itself if unrefined).
    pub fn root(self: &Arc<Self>) -> Arc<SimplicialComplex> {
        match &self.ancestry {
            Some(a) => Arc::clone(&a.root),
            None => Arc::clone(self),
        }
    }
}

/// Same complex, by pointer or by value.
pub fn same_complex(a: &Arc<SimplicialComplex>, b: &Arc<SimplicialComplex>) -> bool {
    Arc::ptr_eq(a, b) || **a == **b
}

#[derive(Clone, Debug, Serialize)]
pub struct MetricFailure {
    pub simplex: Vec<String>,
    pub min_eigenvalue: f64,
    pub trace: f64,
}

#[derive(Clone, Debug, Serialize)]
pub struct ValidationReport {
    pub valid: bool,
    pub failures: Vec<MetricFailure>,
}

/// A set of open cells of a complex.
///
/// `simplices` is closed under faces; the point-set is the union of the open
/// cells of `simplices` that are not in `excluded`.
#[derive(Clone, Debug)]
pub struct SubComplex<'a> {
    pub parent: &'a SimplicialComplex,
    pub simplices: BTreeSet<Simplex>,
    pub excluded: BTreeSet<Simplex>,
}

impl SubComplex<'_> {
    pub fn contains_cell(&self, s: &Simplex) -> bool {
        self.simplices.contains(s) && !self.excluded.contains(s)
    }

    pub fn cells(&self) -> impl Iterator<Item = &Simplex> {
        self.simplices.iter().filter(|s| !self.excluded.contains(*s))
    }

    pub fn vertex_ids(&self) -> Vec<String> {
        self.cells().filter(|s| s.len() == 1).map(|s| self.parent.id(s[0]).to_string()).collect()
    }

    pub fn is_empty(&self) -> bool {
        self.cells().next().is_none()
    }
}

/// Shell number of every cell of a complex about a base vertex.
///
/// A cell lies in `Sh^k` for `k = max(1, 1 + min d(w))`, the minimum over vertices
/// `w` of maximal simplices containing the cell, with `d` the edge-hop distance
/// from the base. Cells in other path components are measured from the least
/// vertex of their component.
#[derive(Clone, Debug)]
pub struct ShellIndex {
    shells: HashMap<Simplex, usize>,
}

impl ShellIndex {
    pub fn new(complex: &SimplicialComplex, base: usize) -> Self {
        let adj = complex.vertex_adjacency();
        let comp = complex.components();
        let mut dist = vec![usize::MAX; complex.vertex_count()];
        let mut anchors: Vec<usize> = vec![base];
        anchors.extend((0..complex.vertex_count()).filter(|v| comp[*v] == *v && comp[*v] != comp[base]));
        for anchor in anchors {
            dist[anchor] = 0;
            let mut queue = VecDeque::from([anchor]);
            while let Some(u) = queue.pop_front() {
                for &w in &adj[u] {
                    if dist[w] == usize::MAX {
                        dist[w] = dist[u] + 1;
                        queue.push_back(w);
                    }
                }
            }
        }
        let mut shells: HashMap<Simplex, usize> = HashMap::new();
        for top in complex.maximal_simplices() {
            let reach = top.iter().map(|v| dist[*v]).min().unwrap();
            let k = reach + 1;
            for f in top.faces() {
                shells.entry(f).and_modify(|s| *s = (*s).min(k)).or_insert(k);
            }
        }
        ShellIndex { shells }
    }

    pub fn shell_of(&self, cell: &Simplex) -> usize {
        self.shells[cell]
    }

    pub fn max_shell(&self) -> usize {
        self.shells.values().copied().max().unwrap_or(1)
    }

    /// Shells of all cells in the closure of `s`.
    pub fn closure_shells<'a>(&'a self, s: &'a Simplex) -> impl Iterator<Item = usize> + 'a {
        s.faces().map(move |f| self.shells[&f])
    }
}
