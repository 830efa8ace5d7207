//! Domains between two graphs over a fixed segment (non-convex mode).

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::{BoundaryPolyline, Point};

/// Lower values `p` and upper values `q` over the abscissae
/// `x_i = −d/2 + i·d/(N+1)`, `i = 1..=N`; both graphs vanish at `±d/2`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GraphPair {
    pub p: Vec<f64>,
    pub q: Vec<f64>,
    /// Length of the base segment.
    pub span: f64,
}

impl GraphPair {
    pub fn new(p: Vec<f64>, q: Vec<f64>, span: f64) -> Result<Self> {
        if p.len() != q.len() || p.is_empty() {
            return Err(Error::InvalidInput(format!(
                "graphs: {} lower and {} upper values",
                p.len(),
                q.len()
            )));
        }
        if !(span > 0.0) || p.iter().chain(&q).any(|v| !v.is_finite()) {
            return Err(Error::InvalidInput("graphs: non-finite values or span".into()));
        }
        if let Some(i) = (0..p.len()).find(|&i| p[i] > q[i]) {
            return Err(Error::InvalidInput(format!(
                "graphs: lower value above upper value at {i}"
            )));
        }
        Ok(Self { p, q, span })
    }

    /// The disk of diameter `span`, sampled at the abscissae.
    pub fn disk(n: usize, span: f64) -> Result<Self> {
        let r = 0.5 * span;
        let g = Self {
            p: vec![0.0; n],
            q: vec![0.0; n],
            span,
        };
        let q: Vec<f64> = (0..n)
            .map(|i| {
                let x = g.abscissa(i);
                (r * r - x * x).max(0.0).sqrt()
            })
            .collect();
        let p = q.iter().map(|v| -v).collect();
        Self::new(p, q, span)
    }

    pub fn len(&self) -> usize {
        self.p.len()
    }

    pub fn is_empty(&self) -> bool {
        self.p.is_empty()
    }

    /// Abscissa of the `i`-th interior sample (0-based).
    pub fn abscissa(&self, i: usize) -> f64 {
        -0.5 * self.span + (i + 1) as f64 * self.span / (self.len() + 1) as f64
    }

    /// Variables in optimizer order: all `p`, then all `q`.
    pub fn to_vars(&self) -> Vec<f64> {
        self.p.iter().chain(&self.q).copied().collect()
    }

    pub fn from_vars(vars: &[f64], span: f64) -> Result<Self> {
        let n = vars.len() / 2;
        if vars.len() != 2 * n {
            return Err(Error::InvalidInput("graphs: odd variable count".into()));
        }
        Self::new(vars[..n].to_vec(), vars[n..].to_vec(), span)
    }

    /// Polyline vertex carrying `p[i]`.
    pub fn lower_vertex(&self, i: usize) -> usize {
        1 + i
    }

    /// Polyline vertex carrying `q[i]`.
    pub fn upper_vertex(&self, i: usize) -> usize {
        2 * self.len() + 1 - i
    }

    /// Counterclockwise boundary: left end, lower graph left to right, right
    /// end, upper graph right to left.
    pub fn to_polyline(&self) -> Result<BoundaryPolyline> {
        let n = self.len();
        let h = 0.5 * self.span;
        let mut v = Vec::with_capacity(2 * n + 2);
        v.push(Point::new(-h, 0.0));
        v.extend((0..n).map(|i| Point::new(self.abscissa(i), self.p[i])));
        v.push(Point::new(h, 0.0));
        v.extend((0..n).rev().map(|i| Point::new(self.abscissa(i), self.q[i])));
        BoundaryPolyline::new(v)
    }
}
