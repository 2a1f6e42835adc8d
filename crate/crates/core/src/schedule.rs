//! Per-shell accuracy schedules.

use serde::Serialize;

use crate::complex::{ShellIndex, Simplex, SimplicialComplex};
use crate::error::{Error, Result};

/// Positive accuracies `ε_1, ε_2, …` indexed by shell number.
///
/// Shells past the end of the list reuse the last entry.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct EpsSchedule(Vec<f64>);

impl EpsSchedule {
    pub fn new(values: Vec<f64>) -> Result<Self> {
        if values.is_empty() {
            return Err(Error::InvalidArgument("empty accuracy schedule".into()));
        }
        if let Some(bad) = values.iter().find(|e| !(**e > 0.0) || !e.is_finite()) {
            return Err(Error::InvalidArgument(format!("schedule entries must be positive, got {bad}")));
        }
        Ok(EpsSchedule(values))
    }

    pub fn constant(eps: f64) -> Result<Self> {
        Self::new(vec![eps])
    }

    /// `ε_k = first / ratio^(k-1)` for `k = 1..=len`.
    pub fn geometric(first: f64, ratio: f64, len: usize) -> Result<Self> {
        Self::new((0..len.max(1)).map(|k| first / ratio.powi(k as i32)).collect())
    }

    /// Parses `"e1,e2,..."`.
    pub fn parse(text: &str) -> Result<Self> {
        let values = text
            .split(',')
            .map(|t| t.trim().parse::<f64>().map_err(|e| Error::InvalidArgument(format!("bad accuracy `{t}`: {e}"))))
            .collect::<Result<Vec<_>>>()?;
        Self::new(values)
    }

    /// `ε_k` for `k ≥ 1`.
    pub fn get(&self, k: usize) -> f64 {
        assert!(k >= 1, "shells are numbered from 1");
        self.0[(k - 1).min(self.0.len() - 1)]
    }

    /// Accuracy that applies inside shell `k`: `min(ε_1, ε_k)`.
    pub fn binding(&self, k: usize) -> f64 {
        self.get(1).min(self.get(k))
    }

    pub fn values(&self) -> &[f64] {
        &self.0
    }

    pub fn map(&self, f: impl Fn(usize, f64) -> f64) -> Result<Self> {
        Self::new(self.0.iter().enumerate().map(|(i, e)| f(i + 1, *e)).collect())
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }
}

/// Accuracy budgets for the cells of a (possibly refined) complex, measured
/// against the shells of its root complex about a base vertex.
///
/// A cell's budget is the smallest binding accuracy over the root cells that
/// meet its closure, so boundary points always get the tighter of the two
/// neighbouring shells.
#[derive(Clone, Debug)]
pub struct ShellBudget {
    shells: ShellIndex,
}

impl ShellBudget {
    pub fn new(complex: &std::sync::Arc<SimplicialComplex>, base: &str) -> Result<Self> {
        let root = complex.root();
        let base = root.vertex_index(base)?;
        Ok(ShellBudget { shells: ShellIndex::new(&root, base) })
    }

    pub fn shells(&self) -> &ShellIndex {
        &self.shells
    }

    /// Root shells met by the closure of `cell` (a simplex of `complex`).
    pub fn closure_shells(&self, complex: &SimplicialComplex, cell: &Simplex) -> Vec<usize> {
        let mut out: Vec<usize> = cell
            .faces()
            .map(|f| self.shells.shell_of(&complex.root_carrier(&f)))
            .collect();
        out.sort_unstable();
        out.dedup();
        out
    }

    /// Root shell of the open cell containing the interior of `cell`.
    pub fn shell_of(&self, complex: &SimplicialComplex, cell: &Simplex) -> usize {
        self.shells.shell_of(&complex.root_carrier(cell))
    }

    pub fn cell_budget(&self, complex: &SimplicialComplex, cell: &Simplex, eps: &EpsSchedule) -> f64 {
        self.cell_budget_with(complex, cell, |k| eps.binding(k))
    }

    pub fn cell_budget_with(&self, complex: &SimplicialComplex, cell: &Simplex, f: impl Fn(usize) -> f64) -> f64 {
        self.closure_shells(complex, cell).into_iter().map(f).fold(f64::INFINITY, f64::min)
    }

    /// Budget for moving vertex `v`: the tightest budget over the maximal simplices around it.
    pub fn vertex_budget(&self, complex: &SimplicialComplex, v: usize, eps: &EpsSchedule) -> f64 {
        complex
            .incident_maximal(v)
            .iter()
            .map(|i| self.cell_budget(complex, &complex.maximal_simplices()[*i], eps))
            .fold(f64::INFINITY, f64::min)
    }
}
