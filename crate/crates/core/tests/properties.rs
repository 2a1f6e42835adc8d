mod common;

use std::collections::BTreeSet;
use std::sync::Arc;

use nalgebra::DMatrix;
use pliso::complex::EdgeLengths;
use pliso::fold::{edge_arclengths, edge_budgets, isometrize_graph};
use pliso::genpos::{
    is_general_position, perturb_prefix_general_position, perturb_to_embedding, verify_embedding, EmbeddingCheck,
    PerturbOptions,
};
use pliso::intersect::exact_verdict;
use pliso::pullback::{intrinsic_distance, pullback_estimate, sample_graph};
use pliso::schedule::ShellBudget;
use pliso::{BarycentricPoint, EpsSchedule, PLMap, Simplex, SimplicialComplex};
use proptest::prelude::*;
use rand::RngExt;
use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

use common::*;

fn points<R: rand::Rng>(rng: &mut R, count: usize, dim: usize) -> Vec<Vec<f64>> {
    (0..count).map(|_| (0..dim).map(|_| rng.sample(StandardNormal)).collect()).collect()
}

fn simplex_complex(pts: &[Vec<f64>], ids: &[String]) -> SimplicialComplex {
    let mut l = EdgeLengths::new();
    for i in 0..pts.len() {
        for j in i + 1..pts.len() {
            l.insert((ids[i].clone(), ids[j].clone()), dist(&pts[i], &pts[j]));
        }
    }
    SimplicialComplex::build(ids, &[ids.to_vec()], &l).unwrap()
}

/// Random connected graph: a cycle with chords, lengths from points in the plane.
fn random_graph(seed: u64, vertices: usize, chords: usize) -> (Arc<SimplicialComplex>, Vec<Vec<f64>>) {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let pos = points(&mut rng, vertices, 2);
    let ids: Vec<String> = (0..vertices).map(|i| format!("g{i:02}")).collect();
    let mut edges: BTreeSet<(usize, usize)> = (0..vertices).map(|i| (i.min((i + 1) % vertices), i.max((i + 1) % vertices))).collect();
    for _ in 0..chords {
        let a = rng.random_range(0..vertices);
        let b = rng.random_range(0..vertices);
        if a != b {
            edges.insert((a.min(b), a.max(b)));
        }
    }
    let mut l = EdgeLengths::new();
    for (a, b) in &edges {
        l.insert((ids[*a].clone(), ids[*b].clone()), dist(&pos[*a], &pos[*b]).max(0.05));
    }
    let tops: Vec<Vec<String>> = edges.iter().map(|(a, b)| vec![ids[*a].clone(), ids[*b].clone()]).collect();
    (Arc::new(SimplicialComplex::build(&ids, &tops, &l).unwrap()), pos)
}

/// `scale ×` the planar positions placed in the first two of `n` coordinates; short
/// whenever every edge length is at least the planar distance.
fn planar_map(c: &Arc<SimplicialComplex>, pos: &[Vec<f64>], n: usize, scale: f64) -> PLMap {
    let images = pos
        .iter()
        .map(|p| {
            let mut q = vec![0.0; n];
            q[0] = scale * p[0];
            q[1] = scale * p[1];
            q
        })
        .collect();
    PLMap::new(Arc::clone(c), n, images).unwrap()
}

fn volume(c: &SimplicialComplex, s: &Simplex) -> f64 {
    let g = c.gram_form(s).unwrap();
    let k = s.dim();
    let fact: f64 = (1..=k).map(|i| i as f64).product();
    g.determinant().max(0.0).sqrt() / fact
}

proptest! {
    #![proptest_config(ProptestConfig { cases: 64, ..ProptestConfig::default() })]

    // Rebasing the Gram form at another vertex is the congruence by e_i ↦ e_i − e_j.
    #[test]
    fn gram_rebasing_is_a_congruence(seed in any::<u64>(), dim in 2usize..=3, new_base in 1usize..=3) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let pts = points(&mut rng, dim + 1, dim);
        let j = new_base.min(dim);
        let ids: Vec<String> = (0..=dim).map(|i| format!("v{i}")).collect();
        // renaming vertex j to sort first moves the base there
        let mut renamed = ids.clone();
        renamed[j] = "a".into();
        let c = simplex_complex(&pts, &ids);
        let r = simplex_complex(&pts, &renamed);
        let g = c.gram_form(&c.maximal_simplices()[0]).unwrap();
        let h = r.gram_form(&r.maximal_simplices()[0]).unwrap();
        // order of r: vertex j first, then the others in original order
        let others: Vec<usize> = (0..=dim).filter(|v| *v != j).collect();
        // edge vector of `others[b]` from j, expressed in the basis e_i = v_i − v_0
        let t = DMatrix::from_fn(dim, dim, |a, b| {
            let u = others[b];
            let coef = |w: usize| if w == 0 { 0.0 } else if w == a + 1 { 1.0 } else { 0.0 };
            coef(u) - coef(j)
        });
        let expected = t.transpose() * g.entries() * &t;
        let diff = (&expected - h.entries()).abs().max();
        prop_assert!(diff <= 1e-10 * (1.0 + g.trace()), "{diff}");
    }

    // For points in general position the Gram determinant matches the Cayley–Menger volume.
    #[test]
    fn gram_determinant_matches_cayley_menger(seed in any::<u64>(), dim in 1usize..=3) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let pts = points(&mut rng, dim + 1, dim);
        let ids: Vec<String> = (0..=dim).map(|i| format!("p{i}")).collect();
        let c = simplex_complex(&pts, &ids);
        let g = c.gram_form(&c.maximal_simplices()[0]).unwrap();
        let m = dim + 1;
        let cm = DMatrix::from_fn(m + 1, m + 1, |r, s| match (r, s) {
            (0, 0) => 0.0,
            (0, _) | (_, 0) => 1.0,
            _ => dist(&pts[r - 1], &pts[s - 1]).powi(2),
        });
        // det G = (-1)^(k+1) CM / 2^k
        let sign = if dim % 2 == 0 { -1.0 } else { 1.0 };
        let expected = sign * cm.determinant() / 2f64.powi(dim as i32);
        prop_assert!((g.determinant() - expected).abs() <= 1e-8 * (1.0 + expected.abs()));
        prop_assert!(c.validate_metric(1e-10).valid);
    }

    #[test]
    fn shells_partition_the_complex(seed in any::<u64>()) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let s = random_surface(&mut rng, 20);
        let c = &s.complex;
        let base = c.id(rng.random_range(0..c.vertex_count())).to_string();
        let shells = star_shells(c, &base);
        let mut seen = BTreeSet::new();
        for (_, cells) in &shells {
            for cell in cells {
                prop_assert!(seen.insert(cell.clone()), "cell {cell:?} in two shells");
            }
        }
        prop_assert_eq!(seen.len(), c.simplex_count());
    }

    #[test]
    fn subdivision_preserves_volume(seed in any::<u64>(), level in 1u32..=2) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let s = random_surface(&mut rng, 12);
        let (fine, corr) = s.complex.subdivide(level).unwrap();
        let coarse: f64 = s.complex.maximal_simplices().iter().filter(|t| t.dim() == 2).map(|t| volume(&s.complex, t)).sum();
        let refined: f64 = fine.maximal_simplices().iter().filter(|t| t.dim() == 2).map(|t| volume(&fine, t)).sum();
        prop_assert!((coarse - refined).abs() <= 1e-9 * coarse);
        prop_assert_eq!(corr.len(), fine.vertex_count());
        prop_assert!(fine.validate_metric(1e-10).valid);
    }

    #[test]
    fn induced_forms_are_psd(seed in any::<u64>(), n in 1usize..=5) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let s = random_surface(&mut rng, 12);
        let images: Vec<f64> = (0..n * s.complex.vertex_count()).map(|_| rng.sample(StandardNormal)).collect();
        let f = PLMap::from_flat(Arc::clone(&s.complex), n, images).unwrap();
        for t in s.complex.maximal_simplices() {
            let g = f.induced_form(t);
            prop_assert!(g.is_symmetric());
            prop_assert!(g.min_eigenvalue() >= -1e-12 * (1.0 + g.trace()));
        }
    }

    // Contracting a short map scales the induced form by λ², so every margin grows.
    #[test]
    fn contraction_increases_margins(seed in any::<u64>(), lambda in 0.05f64..0.99) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let s = random_surface(&mut rng, 16);
        let f = coincident_short_map(&mut rng, &s, 4);
        let g = f.contract_toward_point(None, lambda).unwrap();
        let (a, b) = (f.shortness_margin(), g.shortness_margin());
        for (x, y) in a.per_simplex.iter().zip(&b.per_simplex) {
            prop_assert!(y.margin >= x.margin - 1e-12);
        }
        for t in s.complex.maximal_simplices() {
            let diff = (f.induced_form(t).entries() * (lambda * lambda) - g.induced_form(t).entries()).abs().max();
            prop_assert!(diff <= 1e-12);
        }
    }

    #[test]
    fn split_forms_add_up(seed in any::<u64>(), n in 2usize..=6) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let s = random_surface(&mut rng, 10);
        let j = rng.random_range(1..n);
        let images: Vec<f64> = (0..n * s.complex.vertex_count()).map(|_| rng.sample(StandardNormal)).collect();
        let f = PLMap::from_flat(Arc::clone(&s.complex), n, images).unwrap();
        let (a, b) = f.split_coordinates(j).unwrap();
        prop_assert_eq!(a.direct_sum(&b).unwrap(), f.clone());
        for t in s.complex.all_simplices().filter(|t| t.len() > 1) {
            let sum = a.induced_form(t).entries() + b.induced_form(t).entries();
            prop_assert!((f.induced_form(t).entries() - sum).abs().max() <= 1e-12);
        }
    }

    // A map with positive margin is 1-Lipschitz inside every simplex.
    #[test]
    fn short_maps_are_lipschitz(seed in any::<u64>()) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let s = random_surface(&mut rng, 12);
        let f = coincident_short_map(&mut rng, &s, 3);
        for t in s.complex.maximal_simplices() {
            for _ in 0..5 {
                let w = |rng: &mut ChaCha8Rng| {
                    let raw: Vec<f64> = (0..t.len()).map(|_| rng.random::<f64>() + 1e-3).collect();
                    let total: f64 = raw.iter().sum();
                    BarycentricPoint::new(t.clone(), raw.iter().map(|x| x / total).collect()).unwrap()
                };
                let (p, q) = (w(&mut rng), w(&mut rng));
                let image = dist(&f.evaluate(&p).unwrap(), &f.evaluate(&q).unwrap());
                let intrinsic = s.complex.distance_within(t, &p, &q);
                prop_assert!(image <= intrinsic + 1e-12);
            }
        }
    }

    // General position certifies an embedding of a graph: disjoint edges stay apart and
    // adjacent edges only share their vertex. The LP oracle resolves gaps down to ~1e-8,
    // so it is consulted only when the smallest gap is well above that.
    #[test]
    fn general_position_is_sound(seed in any::<u64>(), nudge in prop_oneof![Just(0.0), Just(1e-7), Just(1e-3)]) {
        let (c, pos) = random_graph(seed, 10, 6);
        let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0x5eed);
        let mut images: Vec<Vec<f64>> = pos.iter().map(|p| vec![p[0], p[1], nudge * rng.sample::<f64, _>(StandardNormal)]).collect();
        // an occasional near-coincidence
        images[3] = images[7].iter().map(|x| x + nudge).collect();
        let f = PLMap::new(c, 3, images).unwrap();
        let gap = graph_image_gap(&f);
        for check in [EmbeddingCheck::GenPos, EmbeddingCheck::LocalGenPos] {
            if verify_embedding(&f, check, 1e-9).unwrap() {
                prop_assert!(gap > 0.0, "{check:?} accepted a map with gap {gap}");
                if gap > 1e-6 {
                    prop_assert!(exact_verdict(&f).is_embedding());
                }
            }
        }
    }
}

fn sub(a: &[f64], b: &[f64]) -> Vec<f64> {
    a.iter().zip(b).map(|(x, y)| x - y).collect()
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

fn segment_distance(p0: &[f64], p1: &[f64], q0: &[f64], q1: &[f64]) -> f64 {
    let (u, v, w) = (sub(p1, p0), sub(q1, q0), sub(p0, q0));
    let (a, b, c, d, e) = (dot(&u, &u), dot(&u, &v), dot(&v, &v), dot(&u, &w), dot(&v, &w));
    let denom = a * c - b * b;
    let mut s = if denom > 0.0 { ((b * e - c * d) / denom).clamp(0.0, 1.0) } else { 0.0 };
    let mut t = (b * s + e) / c;
    if !(0.0..=1.0).contains(&t) {
        t = t.clamp(0.0, 1.0);
        s = ((b * t - d) / a).clamp(0.0, 1.0);
    }
    let at = |x: &[f64], dir: &[f64], k: f64| x.iter().zip(dir).map(|(x, y)| x + k * y).collect::<Vec<_>>();
    dist(&at(p0, &u, s), &at(q0, &v, t))
}

/// Smallest separation between the images of disjoint edges, and for adjacent edges the
/// sine of the angle at the shared vertex (zero when one folds onto the other).
fn graph_image_gap(f: &PLMap) -> f64 {
    let edges = f.domain().edges();
    let mut gap = f64::INFINITY;
    for (i, e) in edges.iter().enumerate() {
        for g in &edges[i + 1..] {
            let shared: Vec<usize> = e.iter().filter(|v| g.contains_vertex(**v)).copied().collect();
            let (p0, p1, q0, q1) = (f.image(e[0]), f.image(e[1]), f.image(g[0]), f.image(g[1]));
            gap = gap.min(match shared[..] {
                [] => segment_distance(p0, p1, q0, q1),
                [v] => {
                    let other = |s: &Simplex| if s[0] == v { s[1] } else { s[0] };
                    let (a, b) = (sub(f.image(other(e)), f.image(v)), sub(f.image(other(g)), f.image(v)));
                    let cos = dot(&a, &b) / (dot(&a, &a) * dot(&b, &b)).sqrt();
                    if cos > 0.0 { (1.0 - cos * cos).max(0.0).sqrt() } else { 1.0 }
                }
                _ => f64::INFINITY,
            });
        }
    }
    gap
}

proptest! {
    #![proptest_config(ProptestConfig { cases: 24, ..ProptestConfig::default() })]

    #[test]
    fn perturbation_respects_budgets(seed in any::<u64>(), eps1 in 0.01f64..0.2) {
        let (c, pos) = random_graph(seed, 12, 5);
        let f = planar_map(&c, &pos, 3, 0.5);
        let eps = EpsSchedule::geometric(eps1, 2.0, 6).unwrap();
        let base = c.id(0).to_string();
        let g = perturb_to_embedding(&f, &eps, &base, seed, &PerturbOptions::default()).unwrap();
        let budget = ShellBudget::new(&c, &base).unwrap();
        for v in 0..c.vertex_count() {
            prop_assert!(dist(f.image(v), g.image(v)) < budget.vertex_budget(&c, v, &eps));
        }
        prop_assert!(g.shortness_margin().margin > 0.0);
        prop_assert!(exact_verdict(&g).is_embedding());
        prop_assert!(verify_embedding(&g, EmbeddingCheck::GenPos, 1e-9).unwrap());
    }

    #[test]
    fn prefix_pass_gives_nested_general_position(seed in any::<u64>(), n in 3usize..=5) {
        let (c, pos) = random_graph(seed, 9, 3);
        let f = planar_map(&c, &pos, n, 0.5);
        let eps = EpsSchedule::constant(0.05).unwrap();
        let g = perturb_prefix_general_position(&f, &eps, c.id(0), seed, &PerturbOptions::default()).unwrap();
        for j in 1..=n {
            let prefix: Vec<Vec<f64>> = g.images().map(|p| p[..j].to_vec()).collect();
            prop_assert!(is_general_position(&prefix, j.min(3), 1e-9).unwrap().holds, "prefix {j}");
        }
        prop_assert!(g.shortness_margin().is_strictly_short());
    }

    #[test]
    fn pullback_never_exceeds_intrinsic(seed in any::<u64>(), level in 1u32..=3) {
        let (c, pos) = random_graph(seed, 7, 3);
        let f = planar_map(&c, &pos, 2, 0.8);
        let g = sample_graph(&c, level).unwrap();
        let nodes = g.vertex_nodes();
        for &x in &nodes[..3] {
            for &y in &nodes {
                let d = intrinsic_distance(&g, x, y).unwrap().unwrap();
                let p = pullback_estimate(&f, &g, x, y, g.mesh()).unwrap().unwrap();
                prop_assert!(p <= d + 1e-9);
            }
        }
    }

    // Shrinking the admissible step removes graph edges, so estimates can only grow.
    #[test]
    fn finer_chains_never_shorten(seed in any::<u64>()) {
        let (c, pos) = random_graph(seed, 7, 3);
        let f = planar_map(&c, &pos, 2, 0.8);
        let g = sample_graph(&c, 3).unwrap();
        let nodes = g.vertex_nodes();
        for &y in &nodes[1..] {
            let fine = pullback_estimate(&f, &g, nodes[0], y, g.mesh()).unwrap().unwrap();
            let coarse = pullback_estimate(&f, &g, nodes[0], y, 4.0 * g.mesh()).unwrap().unwrap();
            prop_assert!(coarse <= fine + 1e-9);
        }
    }

    #[test]
    fn folding_is_exact_and_local(seed in any::<u64>(), eps1 in 0.01f64..0.2, scale in 0.2f64..0.95) {
        let (c, pos) = random_graph(seed, 8, 3);
        let f = planar_map(&c, &pos, 3, scale);
        let eps = EpsSchedule::geometric(eps1, 1.5, 6).unwrap();
        let base = c.id(0).to_string();
        let (h, _) = isometrize_graph(&f, &eps, &base).unwrap();
        for (s, e) in edge_arclengths(&h).iter().zip(c.edges()) {
            let len = c.length(e[0], e[1]);
            prop_assert!((s - len).abs() <= 1e-9 * len);
        }
        for v in 0..c.vertex_count() {
            let w = h.domain().vertex_index(c.id(v)).unwrap();
            prop_assert_eq!(h.image(w), f.image(v));
        }
        let budgets = edge_budgets(&c, &eps, &base).unwrap();
        let dom = h.domain();
        for v in 0..dom.vertex_count() {
            let p = dom.root_point(v);
            let carrier = p.carrier();
            let allowed = if carrier.len() == 2 {
                budgets[c.edges().iter().position(|e| *e == carrier).unwrap()]
            } else {
                f64::INFINITY
            };
            prop_assert!(dist(h.image(v), &f.evaluate(&p).unwrap()) < allowed);
        }
    }
}

// h_δ = (1−δ)f is strictly short; its pullback approaches that of f as δ → 0.
#[test]
fn pullback_of_contractions_converges() {
    let c = graph(&[("a", "b", 1.0)]);
    let f = PLMap::new(Arc::clone(&c), 2, vec![vec![0.0, 0.0], vec![0.5, 0.0]]).unwrap();
    let g = sample_graph(&c, 4).unwrap();
    let (x, y) = (g.node_at("a").unwrap(), g.node_at("b").unwrap());
    let pull_f = pullback_estimate(&f, &g, x, y, g.mesh()).unwrap().unwrap();
    let mut gaps = Vec::new();
    for delta in [0.1, 0.01, 0.001] {
        let h = f.contract_toward_point(None, 1.0 - delta).unwrap();
        assert!(h.shortness_margin().is_strictly_short());
        let pull_h = pullback_estimate(&h, &g, x, y, g.mesh()).unwrap().unwrap();
        assert!(pull_h <= pull_f + 1e-12);
        gaps.push(pull_f - pull_h);
    }
    assert!(gaps.windows(2).all(|w| w[1] < w[0]), "{gaps:?}");
    assert!(gaps[2] < 1e-3, "{gaps:?}");
}
