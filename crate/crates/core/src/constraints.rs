//! Sparse linear inequality rows over the optimization variables.

use serde::Serialize;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum Sense {
    Le,
    Ge,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize)]
pub enum RowTag {
    Convexity,
    Width,
    Anchor,
    Positivity,
    /// Non-convex mode: lower graph below upper graph.
    Ordering,
    /// Non-convex mode: bounding box sanity rows.
    Box,
}

/// `coeffs · x (<= | >=) bound`, with `coeffs` stored as `(index, value)`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ConstraintRow {
    pub coeffs: Vec<(usize, f64)>,
    pub bound: f64,
    pub sense: Sense,
    pub tag: RowTag,
}

impl ConstraintRow {
    pub fn dot(&self, x: &[f64]) -> f64 {
        self.coeffs.iter().map(|&(i, a)| a * x[i]).sum()
    }

    /// Signed slack: nonnegative iff the row is satisfied.
    pub fn residual(&self, x: &[f64]) -> f64 {
        match self.sense {
            Sense::Le => self.bound - self.dot(x),
            Sense::Ge => self.dot(x) - self.bound,
        }
    }

    /// The row rewritten as `a · x <= b`.
    pub fn as_le(&self) -> (Vec<(usize, f64)>, f64) {
        match self.sense {
            Sense::Le => (self.coeffs.clone(), self.bound),
            Sense::Ge => (
                self.coeffs.iter().map(|&(i, a)| (i, -a)).collect(),
                -self.bound,
            ),
        }
    }
}

/// The feasible polyhedron of the optimizer.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct LinearConstraintSet {
    pub n_vars: usize,
    pub rows: Vec<ConstraintRow>,
}

impl LinearConstraintSet {
    pub fn new(n_vars: usize, rows: Vec<ConstraintRow>) -> Self {
        Self { n_vars, rows }
    }

    pub fn len(&self) -> usize {
        self.rows.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rows.is_empty()
    }

    pub fn count(&self, tag: RowTag) -> usize {
        self.rows.iter().filter(|r| r.tag == tag).count()
    }

    pub fn residuals(&self, x: &[f64]) -> Vec<f64> {
        self.rows.iter().map(|r| r.residual(x)).collect()
    }

    pub fn min_residual(&self, x: &[f64]) -> f64 {
        self.rows
            .iter()
            .map(|r| r.residual(x))
            .fold(f64::INFINITY, f64::min)
    }

    pub fn is_feasible(&self, x: &[f64], tol: f64) -> bool {
        self.min_residual(x) >= -tol
    }

    /// Rows with residual at most `tol`, counted per tag.
    pub fn active_counts(&self, x: &[f64], tol: f64) -> Vec<(RowTag, usize)> {
        let mut out: Vec<(RowTag, usize)> = Vec::new();
        for r in self.rows.iter().filter(|r| r.residual(x) <= tol) {
            match out.iter_mut().find(|(t, _)| *t == r.tag) {
                Some((_, c)) => *c += 1,
                None => out.push((r.tag, 1)),
            }
        }
        out
    }
}
