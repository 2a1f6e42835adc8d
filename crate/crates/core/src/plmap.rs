//! Piecewise-linear maps into `R^N`.

use std::collections::HashMap;
use std::sync::Arc;

use nalgebra::{DMatrix, DVector};
use serde::Serialize;

use crate::complex::{same_complex, BarycentricPoint, Simplex, SimplicialComplex};
use crate::error::{Error, Result};
use crate::form::QuadraticForm;

/// Relative slack under which a map still counts as short (`λ_min ≥ −tol · trace`).
pub const SHORT_TOL: f64 = 1e-10;
/// Relative margin a map needs to count as strictly short.
pub const STRICT_TOL: f64 = 1e-12;

/// A map linear on each simplex of `domain`, stored as a vertex-image table.
#[derive(Clone, Debug)]
pub struct PLMap {
    domain: Arc<SimplicialComplex>,
    ambient_dim: usize,
    images: Vec<f64>,
}

impl PartialEq for PLMap {
    fn eq(&self, other: &Self) -> bool {
        self.ambient_dim == other.ambient_dim && self.images == other.images && same_complex(&self.domain, &other.domain)
    }
}

/// Per-simplex shortness margin.
#[derive(Clone, Debug, Serialize)]
pub struct SimplexMargin {
    pub simplex: Vec<String>,
    pub margin: f64,
    pub ratio: f64,
}

/// Smallest eigenvalue of `G(σ) − G_f(σ)` over maximal simplices, in length² units,
/// alongside the scale-free `margin / trace G(σ)`.
#[derive(Clone, Debug, Serialize)]
pub struct MarginReport {
    pub margin: f64,
    pub ratio: f64,
    pub worst_simplex: Option<Vec<String>>,
    pub per_simplex: Vec<SimplexMargin>,
}

impl MarginReport {
    pub fn is_short(&self) -> bool {
        self.ratio >= -SHORT_TOL
    }

    pub fn is_strictly_short(&self) -> bool {
        self.margin > 0.0 && self.ratio > STRICT_TOL
    }
}

fn dist2(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum()
}

impl PLMap {
    pub fn new(domain: Arc<SimplicialComplex>, ambient_dim: usize, images: Vec<Vec<f64>>) -> Result<Self> {
        if images.len() != domain.vertex_count() {
            return Err(Error::InvalidArgument(format!(
                "{} images for {} vertices",
                images.len(),
                domain.vertex_count()
            )));
        }
        if let Some((v, _)) = images.iter().enumerate().find(|(_, p)| p.len() != ambient_dim) {
            return Err(Error::InvalidArgument(format!("image of `{}` is not in R^{ambient_dim}", domain.id(v))));
        }
        Self::from_flat(domain, ambient_dim, images.concat())
    }

    pub fn from_flat(domain: Arc<SimplicialComplex>, ambient_dim: usize, images: Vec<f64>) -> Result<Self> {
        if images.len() != ambient_dim * domain.vertex_count() {
            return Err(Error::InvalidArgument("image table has the wrong size".into()));
        }
        if images.iter().any(|x| !x.is_finite()) {
            return Err(Error::InvalidArgument("vertex images must be finite".into()));
        }
        Ok(PLMap { domain, ambient_dim, images })
    }

    /// Builds the table from images keyed by vertex id.
    pub fn from_ids(domain: Arc<SimplicialComplex>, ambient_dim: usize, images: &HashMap<String, Vec<f64>>) -> Result<Self> {
        let table = domain
            .ids()
            .iter()
            .map(|id| images.get(id).cloned().ok_or_else(|| Error::UnknownVertex(id.clone())))
            .collect::<Result<Vec<_>>>()?;
        Self::new(domain, ambient_dim, table)
    }

    /// Constant map to the origin.
    pub fn zero(domain: Arc<SimplicialComplex>, ambient_dim: usize) -> Self {
        let n = domain.vertex_count();
        PLMap { domain, ambient_dim, images: vec![0.0; n * ambient_dim] }
    }

    pub fn domain(&self) -> &Arc<SimplicialComplex> {
        &self.domain
    }

    pub fn ambient_dim(&self) -> usize {
        self.ambient_dim
    }

    pub fn image(&self, v: usize) -> &[f64] {
        &self.images[v * self.ambient_dim..(v + 1) * self.ambient_dim]
    }

    pub(crate) fn image_mut(&mut self, v: usize) -> &mut [f64] {
        &mut self.images[v * self.ambient_dim..(v + 1) * self.ambient_dim]
    }

    pub fn images(&self) -> impl Iterator<Item = &[f64]> {
        self.images.chunks(self.ambient_dim.max(1)).take(self.domain.vertex_count())
    }

    pub fn images_flat(&self) -> &[f64] {
        &self.images
    }

    /// Affine combination of the vertex images.
    pub fn evaluate(&self, point: &BarycentricPoint) -> Result<Vec<f64>> {
        if !self.domain.contains(&point.simplex) {
            return Err(Error::UnknownSimplex(point.simplex.iter().map(|v| format!("#{v}")).collect()));
        }
        Ok(self.evaluate_unchecked(point))
    }

    pub(crate) fn evaluate_unchecked(&self, point: &BarycentricPoint) -> Vec<f64> {
        let mut out = vec![0.0; self.ambient_dim];
        for (v, w) in point.simplex.iter().zip(&point.weights) {
            for (o, x) in out.iter_mut().zip(self.image(*v)) {
                *o += w * x;
            }
        }
        out
    }

    /// `G_f(σ)[a,b] = (f(v_a) − f(v_0)) · (f(v_b) − f(v_0))`.
    pub fn induced_form(&self, s: &Simplex) -> QuadraticForm {
        let l = s.dim();
        let base = self.image(s[0]);
        let edges: Vec<Vec<f64>> =
            s[1..].iter().map(|v| self.image(*v).iter().zip(base).map(|(x, y)| x - y).collect()).collect();
        let m = DMatrix::from_fn(l, l, |a, b| edges[a].iter().zip(&edges[b]).map(|(x, y)| x * y).sum());
        QuadraticForm::new(m)
    }

    /// `G(σ) − G_f(σ)`.
    pub fn difference_form(&self, s: &Simplex) -> QuadraticForm {
        &self.domain.gram_unchecked(s) - &self.induced_form(s)
    }

    /// Smallest eigenvalue of `G(σ) − G_f(σ)` and the trace of `G(σ)`.
    pub fn simplex_margin(&self, s: &Simplex) -> (f64, f64) {
        if s.len() == 2 {
            let len = self.domain.length(s[0], s[1]);
            let l2 = len * len;
            return (l2 - dist2(self.image(s[0]), self.image(s[1])), l2);
        }
        let g = self.domain.gram_unchecked(s);
        let trace = g.trace();
        ((&g - &self.induced_form(s)).min_eigenvalue(), trace)
    }

    pub fn shortness_margin(&self) -> MarginReport {
        let mut per_simplex = Vec::new();
        let mut margin = f64::INFINITY;
        let mut ratio = f64::INFINITY;
        let mut worst = None;
        for s in self.domain.maximal_simplices().iter().filter(|s| s.dim() >= 1) {
            let (m, trace) = self.simplex_margin(s);
            let r = m / trace;
            if r < ratio {
                ratio = r;
                worst = Some(self.domain.simplex_ids(s));
            }
            margin = margin.min(m);
            per_simplex.push(SimplexMargin { simplex: self.domain.simplex_ids(s), margin: m, ratio: r });
        }
        MarginReport { margin, ratio, worst_simplex: worst, per_simplex }
    }

    /// Splits into the first `j` and the remaining `N − j` coordinates.
    pub fn split_coordinates(&self, j: usize) -> Result<(PLMap, PLMap)> {
        let n = self.ambient_dim;
        if j < 1 || j >= n {
            return Err(Error::InvalidArgument(format!("split index {j} outside 1..{n}")));
        }
        let mut head = Vec::with_capacity(j * self.domain.vertex_count());
        let mut tail = Vec::with_capacity((n - j) * self.domain.vertex_count());
        for p in self.images() {
            head.extend_from_slice(&p[..j]);
            tail.extend_from_slice(&p[j..]);
        }
        Ok((
            PLMap { domain: Arc::clone(&self.domain), ambient_dim: j, images: head },
            PLMap { domain: Arc::clone(&self.domain), ambient_dim: n - j, images: tail },
        ))
    }

    /// Concatenates coordinates of two maps on the same domain.
    pub fn direct_sum(&self, other: &PLMap) -> Result<PLMap> {
        if !same_complex(&self.domain, &other.domain) {
            return Err(Error::DomainMismatch);
        }
        let n = self.ambient_dim + other.ambient_dim;
        let mut images = Vec::with_capacity(n * self.domain.vertex_count());
        for v in 0..self.domain.vertex_count() {
            images.extend_from_slice(self.image(v));
            images.extend_from_slice(other.image(v));
        }
        Ok(PLMap { domain: Arc::clone(&self.domain), ambient_dim: n, images })
    }

    /// Centroid of the vertex images.
    pub fn centroid(&self) -> Vec<f64> {
        let mut c = vec![0.0; self.ambient_dim];
        for p in self.images() {
            for (ci, x) in c.iter_mut().zip(p) {
                *ci += x;
            }
        }
        let n = self.domain.vertex_count().max(1) as f64;
        c.iter_mut().for_each(|x| *x /= n);
        c
    }

    /// `center + λ (f − center)`; the center defaults to the image centroid.
    pub fn contract_toward_point(&self, center: Option<&[f64]>, lambda: f64) -> Result<PLMap> {
        if !(lambda > 0.0 && lambda <= 1.0) {
            return Err(Error::InvalidArgument(format!("contraction factor {lambda} outside (0,1]")));
        }
        let c = match center {
            Some(c) if c.len() == self.ambient_dim => c.to_vec(),
            Some(_) => return Err(Error::InvalidArgument("contraction center has the wrong dimension".into())),
            None => self.centroid(),
        };
        let mut out = self.clone();
        if lambda == 1.0 {
            return Ok(out);
        }
        for v in 0..self.domain.vertex_count() {
            for (x, ci) in out.image_mut(v).iter_mut().zip(&c) {
                *x = ci + lambda * (*x - ci);
            }
        }
        Ok(out)
    }

    /// Re-expresses the map on a subdivision of its domain.
    pub fn refine_to(&self, subdivided: &Arc<SimplicialComplex>, correspondence: &[BarycentricPoint]) -> Result<PLMap> {
        if correspondence.len() != subdivided.vertex_count() {
            return Err(Error::DomainMismatch);
        }
        let mut images = Vec::with_capacity(self.ambient_dim * correspondence.len());
        for p in correspondence {
            if !self.domain.contains(&p.simplex) {
                return Err(Error::DomainMismatch);
            }
            images.extend(self.evaluate_unchecked(p));
        }
        Ok(PLMap { domain: Arc::clone(subdivided), ambient_dim: self.ambient_dim, images })
    }

    /// Replaces the image table while keeping the domain.
    pub fn with_images(&self, images: Vec<f64>) -> Result<PLMap> {
        PLMap::from_flat(Arc::clone(&self.domain), self.ambient_dim, images)
    }
}

/// Finds the simplex of a refined domain containing a point of its root complex.
#[derive(Debug)]
pub struct Locator {
    domain: Arc<SimplicialComplex>,
    root: Arc<SimplicialComplex>,
    at_root_vertex: HashMap<usize, usize>,
    // root edge -> sorted (t_start, t_end, domain edge), t measured toward the edge's larger vertex
    intervals: HashMap<Simplex, Vec<(f64, f64, usize)>>,
    groups: HashMap<Simplex, Vec<usize>>,
}

impl Locator {
    pub fn new(domain: &Arc<SimplicialComplex>) -> Self {
        let root = domain.root();
        let mut at_root_vertex = HashMap::new();
        let mut intervals: HashMap<Simplex, Vec<(f64, f64, usize)>> = HashMap::new();
        let mut groups: HashMap<Simplex, Vec<usize>> = HashMap::new();
        if domain.ancestry().is_some() {
            for v in 0..domain.vertex_count() {
                let p = domain.root_point(v);
                if p.simplex.len() == 1 {
                    at_root_vertex.insert(p.simplex[0], v);
                }
            }
            for (i, s) in domain.maximal_simplices().iter().enumerate() {
                let carrier = domain.root_carrier(s);
                if s.len() == 2 && carrier.len() == 2 {
                    let t0 = domain.root_point(s[0]).weight_of(carrier[1]);
                    let t1 = domain.root_point(s[1]).weight_of(carrier[1]);
                    intervals.entry(carrier).or_default().push((t0.min(t1), t0.max(t1), i));
                } else {
                    groups.entry(carrier).or_default().push(i);
                }
            }
            for list in intervals.values_mut() {
                list.sort_by(|a, b| a.0.total_cmp(&b.0));
            }
        }
        Locator { domain: Arc::clone(domain), root, at_root_vertex, intervals, groups }
    }

    /// Position in the domain of a point of the root complex.
    pub fn locate(&self, p: &BarycentricPoint) -> Result<BarycentricPoint> {
        if self.domain.ancestry().is_none() {
            return if self.domain.contains(&p.simplex) { Ok(p.clone()) } else { Err(Error::DomainMismatch) };
        }
        let carrier = p.carrier();
        if carrier.len() == 1 {
            if let Some(&v) = self.at_root_vertex.get(&carrier[0]) {
                return Ok(BarycentricPoint::at_vertex(v));
            }
        }
        if carrier.len() == 2 {
            if let Some(list) = self.intervals.get(&carrier) {
                let t = p.weight_of(carrier[1]);
                let idx = list.partition_point(|iv| iv.1 < t).min(list.len() - 1);
                let (t0, t1, mi) = list[idx];
                let s = &self.domain.maximal_simplices()[mi];
                let local = if t1 > t0 { ((t - t0) / (t1 - t0)).clamp(0.0, 1.0) } else { 0.0 };
                let (lo, hi) = {
                    let a0 = self.domain.root_point(s[0]).weight_of(carrier[1]);
                    if a0 <= self.domain.root_point(s[1]).weight_of(carrier[1]) {
                        (s[0], s[1])
                    } else {
                        (s[1], s[0])
                    }
                };
                return Ok(BarycentricPoint::on_edge(lo, hi, local));
            }
        }
        for (key, members) in &self.groups {
            if !carrier.is_face_of(key) {
                continue;
            }
            for &mi in members {
                if let Some(bp) = self.solve_in(&self.domain.maximal_simplices()[mi], key, p) {
                    return Ok(bp);
                }
            }
        }
        for (key, list) in &self.intervals {
            if carrier.is_face_of(key) {
                for &(_, _, mi) in list {
                    if let Some(bp) = self.solve_in(&self.domain.maximal_simplices()[mi], key, p) {
                        return Ok(bp);
                    }
                }
            }
        }
        Err(Error::DomainMismatch)
    }

    fn solve_in(&self, s: &Simplex, frame: &Simplex, p: &BarycentricPoint) -> Option<BarycentricPoint> {
        let rows = frame.len();
        let a = DMatrix::from_fn(rows, s.len(), |r, c| self.domain.root_point(s[c]).weight_of(frame[r]));
        let b = DVector::from_fn(rows, |r, _| p.weight_of(frame[r]));
        let svd = a.clone().svd(true, true);
        let w = svd.solve(&b, 1e-13).ok()?;
        let residual = (&a * &w - &b).norm();
        if residual > 1e-10 || w.iter().any(|x| *x < -1e-10) {
            return None;
        }
        let mut weights: Vec<f64> = w.iter().map(|x| x.max(0.0)).collect();
        let total: f64 = weights.iter().sum();
        weights.iter_mut().for_each(|x| *x /= total);
        Some(BarycentricPoint { simplex: s.clone(), weights })
    }

    pub fn root(&self) -> &Arc<SimplicialComplex> {
        &self.root
    }
}

impl PLMap {
    /// Evaluates the map at points of its root complex.
    pub fn evaluate_root_points(&self, points: &[BarycentricPoint]) -> Result<Vec<Vec<f64>>> {
        let loc = Locator::new(&self.domain);
        points.iter().map(|p| Ok(self.evaluate_unchecked(&loc.locate(p)?))).collect()
    }
}
