//! Symmetric bilinear forms attached to simplices.
//!
//! A form on an `l`-simplex lives in the basis of edge vectors leaving the
//! simplex's least vertex. Both the intrinsic metric of a flat simplex and the
//! metric induced by a linear map are represented this way, and their
//! difference decides shortness.

use std::ops::{Add, Sub};

use nalgebra::{DMatrix, SymmetricEigen};
/// Entrywise symmetry tolerance.
pub const SYMMETRY_TOL: f64 = 1e-12;

#[derive(Clone, Debug, PartialEq)]
pub struct QuadraticForm {
    entries: DMatrix<f64>,
}

impl QuadraticForm {
    pub fn new(entries: DMatrix<f64>) -> Self {
        debug_assert!(entries.is_square());
        QuadraticForm { entries }
    }

    pub fn zeros(dim: usize) -> Self {
        QuadraticForm { entries: DMatrix::zeros(dim, dim) }
    }

    /// Builds the form from rows, mostly for tests and literals.
    pub fn from_rows(rows: &[&[f64]]) -> Self {
        let n = rows.len();
        QuadraticForm { entries: DMatrix::from_fn(n, n, |i, j| rows[i][j]) }
    }

    pub fn dim(&self) -> usize {
        self.entries.nrows()
    }

    pub fn entries(&self) -> &DMatrix<f64> {
        &self.entries
    }

    pub fn rows(&self) -> Vec<Vec<f64>> {
        self.entries.row_iter().map(|r| r.iter().copied().collect()).collect()
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.entries[(i, j)]
    }

    pub fn trace(&self) -> f64 {
        self.entries.trace()
    }

    pub fn is_symmetric(&self) -> bool {
        let n = self.dim();
        (0..n).all(|i| (0..i).all(|j| (self.entries[(i, j)] - self.entries[(j, i)]).abs() <= SYMMETRY_TOL))
            && self.entries.iter().all(|x| x.is_finite())
    }

    pub fn scale(&self, factor: f64) -> Self {
        QuadraticForm { entries: &self.entries * factor }
    }

    /// Ascending eigenvalues.
    pub fn eigenvalues(&self) -> Vec<f64> {
        match self.dim() {
            0 => Vec::new(),
            1 => vec![self.entries[(0, 0)]],
            2 => {
                let (a, b, d) = (self.entries[(0, 0)], self.entries[(0, 1)], self.entries[(1, 1)]);
                let mean = 0.5 * (a + d);
                let r = (0.5 * (a - d)).hypot(b);
                vec![mean - r, mean + r]
            }
            _ => {
                let mut ev: Vec<f64> = SymmetricEigen::new(self.entries.clone()).eigenvalues.iter().copied().collect();
                ev.sort_by(f64::total_cmp);
                ev
            }
        }
    }

    /// Smallest eigenvalue; `+inf` for the empty form.
    pub fn min_eigenvalue(&self) -> f64 {
        self.eigenvalues().first().copied().unwrap_or(f64::INFINITY)
    }

    pub fn determinant(&self) -> f64 {
        self.entries.determinant()
    }

    /// Positive definite relative to the trace: `λ_min > tol · trace`.
    pub fn is_positive_definite(&self, tol: f64) -> bool {
        self.dim() == 0 || self.min_eigenvalue() > tol * self.trace().abs()
    }

    /// Evaluates `xᵀ G x`.
    pub fn apply(&self, x: &[f64]) -> f64 {
        let n = self.dim();
        let mut acc = 0.0;
        for i in 0..n {
            for j in 0..n {
                acc += x[i] * self.entries[(i, j)] * x[j];
            }
        }
        acc
    }
}

impl Add for &QuadraticForm {
    type Output = QuadraticForm;
    fn add(self, rhs: &QuadraticForm) -> QuadraticForm {
        QuadraticForm { entries: &self.entries + &rhs.entries }
    }
}

impl Sub for &QuadraticForm {
    type Output = QuadraticForm;
    fn sub(self, rhs: &QuadraticForm) -> QuadraticForm {
        QuadraticForm { entries: &self.entries - &rhs.entries }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    #[test]
    fn closed_form_2x2_matches_general_solver() {
        let g = QuadraticForm::from_rows(&[&[2.0, 0.3], &[0.3, 0.5]]);
        let general: Vec<f64> = {
            let mut v: Vec<f64> = SymmetricEigen::new(g.entries().clone()).eigenvalues.iter().copied().collect();
            v.sort_by(f64::total_cmp);
            v
        };
        let ev = g.eigenvalues();
        assert_relative_eq!(ev[0], general[0], epsilon = 1e-14);
        assert_relative_eq!(ev[1], general[1], epsilon = 1e-14);
    }

    #[test]
    fn regular_tetrahedron_spectrum() {
        let g = QuadraticForm::from_rows(&[&[1.0, 0.5, 0.5], &[0.5, 1.0, 0.5], &[0.5, 0.5, 1.0]]);
        let ev = g.eigenvalues();
        assert_relative_eq!(ev[0], 0.5, epsilon = 1e-12);
        assert_relative_eq!(ev[1], 0.5, epsilon = 1e-12);
        assert_relative_eq!(ev[2], 2.0, epsilon = 1e-12);
    }

    #[test]
    fn empty_form_is_trivially_definite() {
        let g = QuadraticForm::zeros(0);
        assert!(g.is_positive_definite(1e-10));
        assert_eq!(g.min_eigenvalue(), f64::INFINITY);
    }
}
