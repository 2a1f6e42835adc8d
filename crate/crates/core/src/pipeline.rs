//! End-to-end constructions for graphs: split local embedding plus residual fold, and the
//! alternating contract / perturb / fold sequence with its convergence ledger.

use std::sync::Arc;

use rand::{RngExt, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use crate::complex::{BarycentricPoint, SimplicialComplex};
use crate::error::{Error, Result};
use crate::fold::{fold_edges, isometrize_graph, FoldPlan};
use crate::genpos::{is_general_position, perturb_prefix_general_position, perturb_to_embedding, prefix_images, PerturbOptions};
use crate::intersect::exact_verdict;
use crate::plmap::{Locator, PLMap};
use crate::pullback::{all_pairs, intrinsic_distance, isometry_defect, node_images, sample_graph};
use crate::schedule::{EpsSchedule, ShellBudget};

fn dist(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum::<f64>().sqrt()
}

fn require_graph(map: &PLMap, min_dim: usize) -> Result<()> {
    let n = map.domain().dimension();
    if n != 1 {
        return Err(Error::WrongDimension { expected: 1, actual: n });
    }
    if map.ambient_dim() < min_dim {
        return Err(Error::DimensionTooSmall { required: min_dim, actual: map.ambient_dim() });
    }
    Ok(())
}

/// Result of [`split_embed_pipeline`] with the quantities that certify it.
#[derive(Clone, Debug)]
pub struct SplitOutcome {
    pub map: PLMap,
    /// The input after the coordinatewise general-position pass.
    pub prefix: PLMap,
    pub plan: FoldPlan,
    /// Separation radius: half the shortest edge.
    pub delta: f64,
    /// Sample level at which separations were measured.
    pub level: u32,
    /// Measured separation `μ_k` for shells `k = 1, 2, …` (infinite when no pair qualifies).
    pub mu: Vec<f64>,
    /// Fold amplitude cap of each edge.
    pub caps: Vec<f64>,
}

/// Residual fold targets `√(L² − ℓ₁²)` for the head coordinates of a strictly short map.
pub fn residual_targets(head: &PLMap) -> Vec<f64> {
    let dom = head.domain();
    dom.edges()
        .iter()
        .map(|e| {
            let l = dom.length(e[0], e[1]);
            let l1 = dist(head.image(e[0]), head.image(e[1]));
            (l * l - l1 * l1).max(0.0).sqrt()
        })
        .collect()
}

/// Folds the tail coordinates to the residual lengths and reattaches the (refined) head.
pub fn fold_residual(head: &PLMap, tail: &PLMap, caps: &[f64]) -> Result<(PLMap, FoldPlan)> {
    let targets = residual_targets(head);
    let (folded, plan, corr) = fold_edges(tail, &targets, caps, true)?;
    let head_refined = head.refine_to(folded.domain(), &corr)?;
    Ok((head_refined.direct_sum(&folded)?, plan))
}

/// Shells whose closure contains each point of `dom` (given in `dom`'s own coordinates).
fn closure_shell_sets(dom: &Arc<SimplicialComplex>, budget: &ShellBudget, points: &[BarycentricPoint]) -> Vec<Vec<usize>> {
    points
        .iter()
        .map(|p| {
            let carrier = p.carrier();
            let mut out: Vec<usize> = dom
                .incident_maximal(carrier[0])
                .iter()
                .map(|i| &dom.maximal_simplices()[*i])
                .filter(|s| carrier.is_face_of(s))
                .flat_map(|s| s.faces().filter(|f| carrier.is_face_of(f)).collect::<Vec<_>>())
                .map(|f| budget.shell_of(dom, &f))
                .collect();
            out.sort_unstable();
            out.dedup();
            out
        })
        .collect()
}

/// Builds `h = h₁ ⊕ h̄₂`: the first two coordinates are put in general position (a local
/// embedding), the rest are folded so every edge regains its intrinsic length.
pub fn split_embed_pipeline(
    map: &PLMap,
    eps: &EpsSchedule,
    base_vertex: &str,
    seed: u64,
    opts: &PerturbOptions,
) -> Result<SplitOutcome> {
    require_graph(map, 3)?;
    let dom = map.domain().clone();
    let half = eps.map(|_, e| e / 2.0)?;
    let prefix = perturb_prefix_general_position(map, &half, base_vertex, seed, opts)?;
    let (head, tail) = prefix.split_coordinates(2)?;
    if !is_general_position(&prefix_images(&prefix, 2), 2, opts.rank_tol)?.holds {
        return Err(Error::Numerical("head coordinates lost general position".into()));
    }

    let lengths: Vec<f64> = dom.edges().iter().map(|e| dom.length(e[0], e[1])).collect();
    let delta = 0.5 * lengths.iter().copied().fold(f64::INFINITY, f64::min);
    let longest = lengths.iter().copied().fold(0.0, f64::max);
    let mut level = 0u32;
    while longest / f64::from(1u32 << level) > delta / 4.0 {
        level += 1;
    }
    let grid = sample_graph(&dom, level)?;
    let slack = grid.mesh();
    let images = node_images(&prefix, &grid)?;
    let budget = ShellBudget::new(&dom, base_vertex)?;
    let shells = closure_shell_sets(&dom, &budget, grid.nodes());
    let max_shell = budget.shells().max_shell();
    let mut mu = vec![f64::INFINITY; max_shell + 1];
    for x in 0..grid.node_count() {
        let from = grid.intrinsic_from(x)?;
        for y in x + 1..grid.node_count() {
            match from[y] {
                Some(d) if d >= delta - slack => {
                    let gap = dist(&images[x], &images[y]) - slack;
                    for &k in shells[x].iter().chain(&shells[y]) {
                        mu[k - 1] = mu[k - 1].min(gap);
                    }
                }
                _ => {}
            }
        }
    }
    if let Some(k) = mu.iter().position(|m| *m <= 0.0) {
        return Err(Error::Numerical(format!("separation in shell {} is not certified at sample level {level}", k + 1)));
    }
    let caps: Vec<f64> = dom
        .edges()
        .iter()
        .map(|e| {
            budget
                .closure_shells(&dom, e)
                .into_iter()
                .map(|s| (eps.get(s) / 2.0).min(eps.get(s + 1) / 2.0).min(mu[s - 1] / 3.0).min(eps.get(1) / 2.0))
                .fold(f64::INFINITY, f64::min)
        })
        .collect();
    let (out, plan) = fold_residual(&head, &tail, &caps)?;
    Ok(SplitOutcome { map: out, prefix, plan, delta, level, mu: mu[..max_shell].to_vec(), caps })
}

#[derive(Clone, Copy, Debug)]
pub struct NashOptions {
    pub perturb: PerturbOptions,
    /// Root subdivision level of the fixed sample nodes.
    pub sample_level: u32,
}

impl Default for NashOptions {
    fn default() -> Self {
        NashOptions { perturb: PerturbOptions::default(), sample_level: 5 }
    }
}

#[derive(Clone, Debug, Serialize)]
pub struct IterationRow {
    pub iter: usize,
    /// Sampled `sup |h_i − h_{i−1}|`, with `h_0` the input map.
    pub sup_delta: f64,
    /// Smallest image distance of `h_i` over `S_i`.
    pub min_gap: f64,
    pub defect: f64,
    pub alpha: f64,
    pub beta: f64,
    pub mu: f64,
    pub lambda: f64,
    pub pairs: usize,
    pub vertices: usize,
    pub alpha_by_shell: Vec<f64>,
    pub beta_by_shell: Vec<f64>,
}

#[derive(Clone, Debug, Serialize)]
pub struct LedgerCheck {
    pub name: String,
    pub passed: bool,
    pub detail: String,
}

#[derive(Clone, Debug, Default, Serialize)]
pub struct ConvergenceReport {
    pub rows: Vec<IterationRow>,
    /// `separation[j][l]`: smallest image distance over `S_{j+1}` in `h_{l+1}` (`NaN` before it forms).
    pub separation: Vec<Vec<f64>>,
    /// Largest ratio `|h_I − f_1| / min(ε_1, ε_l)` over sample nodes of each shell.
    pub shell_accuracy: Vec<f64>,
    pub checks: Vec<LedgerCheck>,
}

impl ConvergenceReport {
    pub fn to_csv(&self) -> String {
        let mut out = String::from("iter,sup_delta,min_gap,defect,alpha,beta\n");
        for r in &self.rows {
            out.push_str(&format!(
                "{},{:.12e},{:.12e},{:.12e},{:.12e},{:.12e}\n",
                r.iter, r.sup_delta, r.min_gap, r.defect, r.alpha, r.beta
            ));
        }
        out
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("reports serialize")
    }

    pub fn all_passed(&self) -> bool {
        self.checks.iter().all(|c| c.passed)
    }

    pub fn check(&self, name: &str) -> Option<&LedgerCheck> {
        self.checks.iter().find(|c| c.name == name)
    }
}

struct Samples {
    root: Arc<SimplicialComplex>,
    points: Vec<BarycentricPoint>,
    shell: Vec<usize>,
    component: Vec<usize>,
    edge: Vec<Option<usize>>,
}

impl Samples {
    fn new(map: &PLMap, base_vertex: &str, level: u32) -> Result<Self> {
        let root = map.domain().root();
        let (_, points) = root.subdivide(level)?;
        let budget = ShellBudget::new(&root, base_vertex)?;
        let comps = root.components();
        let edge_index: std::collections::HashMap<_, _> =
            root.edges().iter().enumerate().map(|(i, e)| (e.clone(), i)).collect();
        let shell = points.iter().map(|p| budget.shells().shell_of(&p.carrier())).collect();
        let component = points.iter().map(|p| comps[p.carrier()[0]]).collect();
        // a vertex node belongs to the first edge (in order) containing it
        let edge = points
            .iter()
            .map(|p| {
                let c = p.carrier();
                if c.len() == 2 {
                    edge_index.get(&c).copied()
                } else {
                    root.edges().iter().position(|e| e.contains_vertex(c[0]))
                }
            })
            .collect();
        Ok(Samples { root, points, shell, component, edge })
    }

    fn eval(&self, map: &PLMap) -> Result<Vec<Vec<f64>>> {
        let loc = Locator::new(map.domain());
        self.points.iter().map(|p| map.evaluate(&loc.locate(p)?)).collect()
    }

    /// Node pairs on the first `i` edges, in one component, at least `2^{-i}` apart under `f_1`.
    fn separated_pairs(&self, i: usize, first: &[Vec<f64>]) -> Vec<(usize, usize)> {
        let on: Vec<usize> = (0..self.points.len()).filter(|x| self.edge[*x].is_some_and(|e| e < i)).collect();
        let floor = 0.5f64.powi(i as i32);
        all_pairs(&on)
            .into_iter()
            .filter(|(x, y)| self.component[*x] == self.component[*y] && dist(&first[*x], &first[*y]) >= floor)
            .collect()
    }
}

fn min_gap(pairs: &[(usize, usize)], images: &[Vec<f64>]) -> f64 {
    pairs.iter().map(|(x, y)| dist(&images[*x], &images[*y])).fold(f64::INFINITY, f64::min)
}

/// Intrinsic-minus-pullback over pairs of root vertices, on the map's own triangulation.
fn vertex_defect(map: &PLMap, root_vertices: usize) -> Result<(f64, f64)> {
    let graph = sample_graph(map.domain(), 0)?;
    let nodes: Vec<usize> = graph.vertex_nodes()[..root_vertices].to_vec();
    let report = isometry_defect(map, &graph, graph.mesh(), &all_pairs(&nodes))?;
    Ok((report.max_defect.max(0.0), graph.mesh()))
}

fn record(checks: &mut Vec<LedgerCheck>, name: &str, passed: bool, detail: String) {
    checks.push(LedgerCheck { name: name.into(), passed, detail });
}

/// Runs `I` rounds of: fold `f_i` into an isometry `h_i`, contract slightly, perturb back
/// into an embedding `f_{i+1}`; budgets shrink by 4 per round and are capped by the
/// separations measured on the growing pair sets `S_i`.
pub fn iterate_nash(
    map: &PLMap,
    eps: &EpsSchedule,
    base_vertex: &str,
    iterations: usize,
    seed: u64,
    opts: &NashOptions,
) -> Result<(PLMap, ConvergenceReport)> {
    if iterations == 0 {
        return Ok((map.clone(), ConvergenceReport::default()));
    }
    require_graph(map, 3)?;
    let margin = map.shortness_margin();
    if !margin.is_strictly_short() {
        return Err(Error::NotStrictlyShort { margin: margin.margin, simplex: margin.worst_simplex.unwrap_or_default() });
    }
    if !exact_verdict(map).is_embedding() {
        return Err(Error::NotAnEmbedding);
    }
    let samples = Samples::new(map, base_vertex, opts.sample_level)?;
    let shells = ShellBudget::new(map.domain(), base_vertex)?.shells().max_shell();
    let first = samples.eval(map)?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);

    let mut f = map.clone();
    let mut f_images = first.clone();
    let mut prev_h = first.clone();
    let mut last_h = map.clone();
    let mut mus: Vec<f64> = Vec::new();
    let mut sets: Vec<Vec<(usize, usize)>> = Vec::new();
    let mut alpha: Vec<f64> = vec![0.0; shells];
    let mut rows = Vec::with_capacity(iterations);
    let mut separation: Vec<Vec<f64>> = Vec::new();
    let mut checks = Vec::new();
    let mut budget_ok = true;
    let mut cap_ok = true;
    let mut sep_ok = true;
    let mut cauchy_ok = true;
    let mut defect_ok = true;
    let mut worst_sep = f64::INFINITY;
    let mut worst_cauchy: f64 = 0.0;

    for i in 1..=iterations {
        let four = 4f64.powi(i as i32);
        let pairs = samples.separated_pairs(i, &first);
        let mu_i = min_gap(&pairs, &f_images);
        mus.push(mu_i);
        sets.push(pairs);
        let earlier = mus[..i - 1].iter().copied().fold(f64::INFINITY, f64::min);
        let beta: Vec<f64> =
            (1..=shells).map(|k| 0.9 * (eps.get(k) / four).min(mu_i / 4.0).min(earlier / four)).collect();
        for k in 1..=shells {
            let bound = eps.get(k) / four;
            budget_ok &= alpha[k - 1] < bound && beta[k - 1] < bound;
            cap_ok &= beta[k - 1] < mu_i / 4.0 && beta[k - 1] < earlier / four && alpha[k - 1] < earlier / four;
        }
        let (h, _) = isometrize_graph(&f, &EpsSchedule::new(beta.clone())?, base_vertex)?;
        let h_images = samples.eval(&h)?;

        let mut sup_delta: f64 = 0.0;
        for x in 0..h_images.len() {
            let d = dist(&h_images[x], &prev_h[x]);
            sup_delta = sup_delta.max(d);
            if i >= 2 {
                let k = samples.shell[x];
                let allowed = alpha[0].min(alpha[k - 1]) + beta[0].min(beta[k - 1]);
                worst_cauchy = worst_cauchy.max(d / allowed);
                cauchy_ok &= d <= allowed + 1e-12;
            }
        }
        separation.push(vec![f64::NAN; iterations]);
        for (j, set) in sets.iter().enumerate() {
            let in_h = min_gap(set, &h_images);
            let in_f = min_gap(set, &f_images);
            separation[j][i - 1] = in_h;
            if mus[j].is_finite() {
                let ratio = in_h.min(in_f) / (mus[j] / 2.0);
                worst_sep = worst_sep.min(ratio);
                sep_ok &= ratio > 1.0;
            }
        }
        let (defect, mesh) = vertex_defect(&h, samples.root.vertex_count())?;
        defect_ok &= defect <= 2.0 * mesh + 1e-9;

        let mut lambda = 1.0;
        let alpha_row = alpha.clone();
        if i < iterations {
            let next = four * 4.0;
            let known = mus.iter().copied().fold(f64::INFINITY, f64::min);
            alpha = (1..=shells).map(|k| 0.9 * (eps.get(k) / next).min(known / next)).collect();
            let amin = alpha.iter().copied().fold(f64::INFINITY, f64::min);
            let center = h.centroid();
            let reach = h.images().map(|p| dist(p, &center)).fold(0.0, f64::max);
            let step = (1.0 / next).min(if reach > 0.0 { amin / (2.0 * reach) } else { 1.0 / next });
            lambda = 1.0 - step;
            let contracted = h.contract_toward_point(Some(&center), lambda)?;
            let half = EpsSchedule::new(alpha.iter().map(|a| a / 2.0).collect())?;
            f = perturb_to_embedding(&contracted, &half, base_vertex, rng.random::<u64>(), &opts.perturb)?;
            f_images = samples.eval(&f)?;
        }
        rows.push(IterationRow {
            iter: i,
            sup_delta,
            min_gap: min_gap(&sets[i - 1], &h_images),
            defect,
            alpha: alpha_row.iter().copied().fold(0.0, f64::max),
            beta: beta.iter().copied().fold(0.0, f64::max),
            mu: mu_i,
            lambda,
            pairs: sets[i - 1].len(),
            vertices: h.domain().vertex_count(),
            alpha_by_shell: alpha_row,
            beta_by_shell: beta,
        });
        prev_h = h_images;
        last_h = h;
    }

    let mut shell_accuracy = vec![0.0f64; shells];
    for x in 0..first.len() {
        let k = samples.shell[x];
        shell_accuracy[k - 1] = shell_accuracy[k - 1].max(dist(&prev_h[x], &first[x]) / eps.binding(k));
    }
    let accuracy_ok = shell_accuracy.iter().all(|r| *r < 1.0);
    record(&mut checks, "budgets", budget_ok, "alpha_i^k, beta_i^k < eps_k/4^i".into());
    record(&mut checks, "separation_caps", cap_ok, "beta_i < mu_i/4 and later budgets < mu_j/4^l".into());
    record(&mut checks, "separation", sep_ok, format!("min gap over S_j stays above mu_j/2 (worst ratio {worst_sep:.6})"));
    record(&mut checks, "cauchy", cauchy_ok, format!("sup|h_i - h_(i-1)| <= alpha_i + beta_i (worst ratio {worst_cauchy:.6})"));
    record(&mut checks, "shell_accuracy", accuracy_ok, format!("|h_I - f_1| < eps_l on Sh^l samples (ratios {shell_accuracy:?})"));
    record(&mut checks, "defect", defect_ok, "isometry defect of each h_i <= 2 * chain step".into());
    Ok((last_h, ConvergenceReport { rows, separation, shell_accuracy, checks }))
}

/// Distance between two sample nodes in the intrinsic metric of the root complex.
pub fn root_distance(map: &PLMap, level: u32, x: usize, y: usize) -> Result<Option<f64>> {
    let graph = sample_graph(&map.domain().root(), level)?;
    intrinsic_distance(&graph, x, y)
}
