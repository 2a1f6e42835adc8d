//! Sample graphs, intrinsic distances and discretized pullback metrics.

use std::collections::HashMap;
use std::sync::Arc;

use petgraph::algo::dijkstra;
use petgraph::graph::{NodeIndex, UnGraph};
use serde::Serialize;

use crate::complex::{same_complex, BarycentricPoint, Simplex, SimplicialComplex};
use crate::error::{Error, Result};
use crate::plmap::{Locator, PLMap};

// relative slack when comparing step lengths against the chain bound
const STEP_SLACK: f64 = 1e-12;

/// Subdivision points of a complex joined whenever they share a closed simplex.
#[derive(Clone, Debug)]
pub struct SampleGraph {
    complex: Arc<SimplicialComplex>,
    refined: Arc<SimplicialComplex>,
    nodes: Vec<BarycentricPoint>,
    edges: Vec<(usize, usize, f64)>,
    mesh: f64,
}

pub fn sample_graph(complex: &Arc<SimplicialComplex>, level: u32) -> Result<SampleGraph> {
    let (refined, nodes) = complex.subdivide(level)?;
    let mesh = refined.edges().iter().map(|e| refined.length(e[0], e[1])).fold(0.0, f64::max);
    let mut members: HashMap<usize, Vec<usize>> = HashMap::new();
    for (i, p) in nodes.iter().enumerate() {
        let carrier = p.carrier();
        for &mi in complex.incident_maximal(carrier[0]) {
            if carrier.is_face_of(&complex.maximal_simplices()[mi]) {
                members.entry(mi).or_default().push(i);
            }
        }
    }
    let mut weights: HashMap<(usize, usize), f64> = HashMap::new();
    let mut keys: Vec<usize> = members.keys().copied().collect();
    keys.sort_unstable();
    for mi in keys {
        let frame = &complex.maximal_simplices()[mi];
        let list = &members[&mi];
        for (a, &i) in list.iter().enumerate() {
            for &j in &list[a + 1..] {
                weights.entry((i.min(j), i.max(j))).or_insert_with(|| complex.distance_within(frame, &nodes[i], &nodes[j]));
            }
        }
    }
    let mut edges: Vec<(usize, usize, f64)> = weights.into_iter().map(|((i, j), w)| (i, j, w)).collect();
    edges.sort_by(|a, b| (a.0, a.1).cmp(&(b.0, b.1)));
    Ok(SampleGraph { complex: Arc::clone(complex), refined, nodes, edges, mesh })
}

impl SampleGraph {
    pub fn complex(&self) -> &Arc<SimplicialComplex> {
        &self.complex
    }

    pub fn refined(&self) -> &Arc<SimplicialComplex> {
        &self.refined
    }

    pub fn nodes(&self) -> &[BarycentricPoint] {
        &self.nodes
    }

    pub fn node_count(&self) -> usize {
        self.nodes.len()
    }

    pub fn edges(&self) -> &[(usize, usize, f64)] {
        &self.edges
    }

    /// Longest edge of the underlying subdivision.
    pub fn mesh(&self) -> f64 {
        self.mesh
    }

    /// Node sitting at vertex `id` of the sampled complex.
    pub fn node_at(&self, id: &str) -> Result<usize> {
        let v = self.complex.vertex_index(id)?;
        Ok(self.vertex_nodes()[v])
    }

    /// Node index of every vertex of the sampled complex, in vertex order.
    pub fn vertex_nodes(&self) -> Vec<usize> {
        // subdivisions keep the original vertices first
        (0..self.complex.vertex_count()).collect()
    }

    /// Nodes lying in the closure of `cell`, a simplex of the sampled complex.
    pub fn nodes_in(&self, cell: &Simplex) -> Vec<usize> {
        (0..self.nodes.len()).filter(|i| self.nodes[*i].carrier().is_face_of(cell)).collect()
    }

    fn check_node(&self, x: usize) -> Result<()> {
        if x < self.nodes.len() {
            Ok(())
        } else {
            Err(Error::InvalidArgument(format!("node {x} outside the sample graph")))
        }
    }

    /// Position of each node in the root complex.
    pub fn root_points(&self) -> Vec<BarycentricPoint> {
        match self.complex.ancestry() {
            None => self.nodes.clone(),
            Some(a) => self
                .nodes
                .iter()
                .map(|p| {
                    let terms: Vec<_> = p.simplex.iter().zip(&p.weights).map(|(v, w)| (&a.points()[*v], *w)).collect();
                    BarycentricPoint::combine(&terms)
                })
                .collect(),
        }
    }

    fn weighted(&self, weight: impl Fn(usize, usize, f64) -> Option<f64>) -> UnGraph<(), f64> {
        let mut g: UnGraph<(), f64> = UnGraph::with_capacity(self.nodes.len(), self.edges.len());
        for _ in 0..self.nodes.len() {
            g.add_node(());
        }
        for &(i, j, w) in &self.edges {
            if let Some(c) = weight(i, j, w) {
                g.add_edge(NodeIndex::new(i), NodeIndex::new(j), c);
            }
        }
        g
    }

    fn shortest_from(&self, source: usize, weight: impl Fn(usize, usize, f64) -> Option<f64>) -> Vec<Option<f64>> {
        shortest(&self.weighted(weight), source)
    }

    /// Graph distances from `source` to every node; `None` when unreachable.
    pub fn intrinsic_from(&self, source: usize) -> Result<Vec<Option<f64>>> {
        self.check_node(source)?;
        Ok(self.shortest_from(source, |_, _, w| Some(w)))
    }

    fn check_chain(&self, chain_eps: f64) -> Result<()> {
        if !(chain_eps > 0.0) {
            return Err(Error::InvalidArgument(format!("chain step must be positive, got {chain_eps}")));
        }
        if chain_eps < self.mesh * (1.0 - STEP_SLACK) {
            return Err(Error::ChainTooFine { chain_eps, mesh: self.mesh });
        }
        Ok(())
    }
}

/// Node images of `map`, evaluated directly or through the common root complex.
pub fn node_images(map: &PLMap, graph: &SampleGraph) -> Result<Vec<Vec<f64>>> {
    if same_complex(map.domain(), graph.complex()) {
        return graph.nodes.iter().map(|p| map.evaluate(p)).collect();
    }
    if !same_complex(&map.domain().root(), &graph.complex().root()) {
        return Err(Error::DomainMismatch);
    }
    let loc = Locator::new(map.domain());
    graph.root_points().iter().map(|p| Ok(map.evaluate_unchecked(&loc.locate(p)?))).collect()
}

fn dist(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum::<f64>().sqrt()
}

fn shortest(g: &UnGraph<(), f64>, source: usize) -> Vec<Option<f64>> {
    let dist = dijkstra(g, NodeIndex::new(source), None, |e| *e.weight());
    (0..g.node_count()).map(|i| dist.get(&NodeIndex::new(i)).copied()).collect()
}

fn chain_graph(graph: &SampleGraph, images: &[Vec<f64>], chain_eps: f64) -> UnGraph<(), f64> {
    let bound = chain_eps * (1.0 + STEP_SLACK);
    graph.weighted(|i, j, w| (w <= bound).then(|| dist(&images[i], &images[j])))
}

pub fn intrinsic_distance(graph: &SampleGraph, x: usize, y: usize) -> Result<Option<f64>> {
    graph.check_node(y)?;
    Ok(graph.intrinsic_from(x)?[y])
}

/// Shortest image length of a chain from `x` to `y` whose steps stay inside a closed
/// simplex and are at most `chain_eps` long.
pub fn pullback_estimate(map: &PLMap, graph: &SampleGraph, x: usize, y: usize, chain_eps: f64) -> Result<Option<f64>> {
    graph.check_node(x)?;
    graph.check_node(y)?;
    graph.check_chain(chain_eps)?;
    let images = node_images(map, graph)?;
    Ok(shortest(&chain_graph(graph, &images, chain_eps), x)[y])
}

#[derive(Clone, Debug, Serialize)]
pub struct DefectRow {
    pub pair: usize,
    pub x: usize,
    pub y: usize,
    pub intrinsic: Option<f64>,
    pub pullback: Option<f64>,
    pub defect: Option<f64>,
}

#[derive(Clone, Debug, Serialize)]
pub struct DefectReport {
    pub max_defect: f64,
    pub argmax: Option<(usize, usize)>,
    pub rows: Vec<DefectRow>,
}

impl DefectReport {
    pub fn to_csv(&self) -> String {
        let fmt = |v: Option<f64>| v.map_or_else(|| "unreachable".to_string(), |x| format!("{x:.12e}"));
        let mut out = String::from("pair,intrinsic,pullback,defect\n");
        for r in &self.rows {
            let defect = r.defect.map_or_else(String::new, |x| format!("{x:.12e}"));
            out.push_str(&format!("{},{},{},{}\n", r.pair, fmt(r.intrinsic), fmt(r.pullback), defect));
        }
        out
    }
}

/// Largest `intrinsic − pullback` over the given node pairs; unreachable pairs are listed
/// but do not enter the maximum.
pub fn isometry_defect(map: &PLMap, graph: &SampleGraph, chain_eps: f64, pairs: &[(usize, usize)]) -> Result<DefectReport> {
    graph.check_chain(chain_eps)?;
    for &(x, y) in pairs {
        graph.check_node(x)?;
        graph.check_node(y)?;
    }
    let images = node_images(map, graph)?;
    let intrinsic_graph = graph.weighted(|_, _, w| Some(w));
    let pull_graph = chain_graph(graph, &images, chain_eps);
    let mut cache: HashMap<usize, (Vec<Option<f64>>, Vec<Option<f64>>)> = HashMap::new();
    let mut rows = Vec::with_capacity(pairs.len());
    let mut max_defect = f64::NEG_INFINITY;
    let mut argmax = None;
    for (pair, &(x, y)) in pairs.iter().enumerate() {
        let (d, p) = cache
            .entry(x)
            .or_insert_with(|| (shortest(&intrinsic_graph, x), shortest(&pull_graph, x)));
        let (intrinsic, pullback) = (d[y], p[y]);
        let defect = intrinsic.zip(pullback).map(|(a, b)| a - b);
        if let Some(v) = defect {
            if v > max_defect {
                max_defect = v;
                argmax = Some((x, y));
            }
        }
        rows.push(DefectRow { pair, x, y, intrinsic, pullback, defect });
    }
    if argmax.is_none() {
        max_defect = 0.0;
    }
    Ok(DefectReport { max_defect, argmax, rows })
}

/// All unordered pairs of the given nodes.
pub fn all_pairs(nodes: &[usize]) -> Vec<(usize, usize)> {
    let mut out = Vec::new();
    for (a, &x) in nodes.iter().enumerate() {
        for &y in &nodes[a + 1..] {
            out.push((x, y));
        }
    }
    out
}
