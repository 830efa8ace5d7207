//! Steklov eigenpairs through the discrete Dirichlet-to-Neumann map.

use std::fmt::Write as _;

use nalgebra::{DMatrix, DMatrixView};
use serde::Serialize;

use super::sparse::{CsrMatrix, EnvelopeCholesky};
use super::tridiag::{lowest_eigenpairs, Tridiagonal};
use super::FemSpace;
use crate::error::{Error, Result};

/// The `m + 1` smallest Steklov eigenvalues with their eigenfunctions.
#[derive(Debug, Clone, Serialize)]
pub struct SteklovSpectrum {
    /// `σ_0 ≤ σ_1 ≤ …`
    pub eigenvalues: Vec<f64>,
    /// Boundary values per eigenfunction, indexed like
    /// `FemSpace::boundary_dofs`; B-orthonormal.
    pub traces: Vec<Vec<f64>>,
    /// Arclength derivatives of the traces at the boundary dofs.
    pub tangents: Vec<Vec<f64>>,
    /// Discrete harmonic extensions, one full dof vector per eigenfunction.
    #[serde(skip)]
    pub modes: Vec<Vec<f64>>,
}

impl SteklovSpectrum {
    pub fn len(&self) -> usize {
        self.eigenvalues.len()
    }

    pub fn is_empty(&self) -> bool {
        self.eigenvalues.is_empty()
    }

    /// `index,sigma` rows.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("index,sigma\n");
        for (i, s) in self.eigenvalues.iter().enumerate() {
            let _ = writeln!(out, "{i},{s:.17e}");
        }
        out
    }

    pub fn traces_json(&self) -> String {
        serde_json::to_string(self).expect("spectrum serializes")
    }
}

/// Solves `K u = σ B u` for the `m + 1` smallest eigenvalues.
///
/// Interior dofs are eliminated with the Schur complement
/// `S = K_bb − K_bi K_ii⁻¹ K_ib`; the dense pencil `(S, B_bb)` is reduced
/// with the Cholesky factor of `B_bb` and solved as a symmetric problem.
pub fn solve_spectrum(
    space: &FemSpace,
    k: &CsrMatrix,
    b: &CsrMatrix,
    m: usize,
) -> Result<SteklovSpectrum> {
    let n = space.dof_count();
    if k.size() != n || b.size() != n {
        return Err(Error::InvalidInput("fem: matrix size does not match the space".into()));
    }
    let bdofs = space.boundary_dofs();
    let nb = bdofs.len();
    if m + 1 > nb {
        return Err(Error::InvalidInput(format!(
            "fem: {} eigenvalues requested but only {nb} boundary dofs",
            m + 1
        )));
    }
    // local numbering: boundary slot or interior index
    const BND: usize = usize::MAX;
    let mut slot = vec![BND; n];
    let mut bslot = vec![BND; n];
    for (s, &d) in bdofs.iter().enumerate() {
        bslot[d] = s;
    }
    let mut interior = Vec::with_capacity(n - nb);
    for d in 0..n {
        if bslot[d] == BND {
            slot[d] = interior.len();
            interior.push(d);
        }
    }
    let ni = interior.len();

    let mut s_mat = DMatrix::<f64>::zeros(nb, nb);
    let mut b_mat = DMatrix::<f64>::zeros(nb, nb);
    for (p, &d) in bdofs.iter().enumerate() {
        for (j, v) in k.row(d) {
            if bslot[j] != BND {
                s_mat[(p, bslot[j])] += v;
            }
        }
        for (j, v) in b.row(d) {
            if bslot[j] != BND {
                b_mat[(p, bslot[j])] += v;
            }
        }
    }

    let chol_ii = if ni > 0 {
        let mut trip = Vec::new();
        for (r, &d) in interior.iter().enumerate() {
            for (j, v) in k.row(d) {
                if slot[j] != BND {
                    trip.push((r, slot[j], v));
                }
            }
        }
        Some(EnvelopeCholesky::factor(&CsrMatrix::from_triplets(ni, trip))?)
    } else {
        None
    };

    if let Some(f) = &chol_ii {
        // Y = L⁻¹ P K_ib with boundary columns sorted by their first nonzero
        // row, so that each row of Y is nonzero only in a column prefix
        let mut inv = vec![0; ni];
        for (new, &old) in f.perm.iter().enumerate() {
            inv[old] = new;
        }
        let mut first_row = vec![usize::MAX; nb];
        for (p, &d) in bdofs.iter().enumerate() {
            for (j, _) in k.row(d) {
                if slot[j] != BND {
                    first_row[p] = first_row[p].min(inv[slot[j]]);
                }
            }
        }
        let mut cols: Vec<usize> = (0..nb).collect();
        cols.sort_by_key(|&p| (first_row[p], p));
        let mut col_of = vec![0; nb];
        for (c, &p) in cols.iter().enumerate() {
            col_of[p] = c;
        }
        let mut width = vec![0usize; ni];
        let mut c = 0;
        for (r, w) in width.iter_mut().enumerate() {
            while c < nb && first_row[cols[c]] <= r {
                c += 1;
            }
            *w = c;
        }
        let mut y = vec![0.0; ni * nb];
        for (p, &d) in bdofs.iter().enumerate() {
            for (j, v) in k.row(d) {
                if slot[j] != BND {
                    y[inv[slot[j]] * nb + col_of[p]] = v;
                }
            }
        }
        f.forward_block(&mut y, nb, &width);
        // S -= Yᵀ Y, in row chunks restricted to their nonzero column prefix
        let mut g = DMatrix::<f64>::zeros(nb, nb);
        let mut r0 = 0;
        while r0 < ni {
            let r1 = (r0 + 128).min(ni);
            let w = width[r1 - 1];
            if w > 0 {
                // columns 0..w of rows r0..r1, seen as a w × (r1 − r0) matrix
                let a = DMatrixView::from_slice_with_strides(
                    &y[r0 * nb..],
                    w,
                    r1 - r0,
                    1,
                    nb,
                );
                let at = a.transpose();
                g.view_mut((0, 0), (w, w)).gemm(1.0, &a, &at, 1.0);
            }
            r0 = r1;
        }
        for p in 0..nb {
            for q in 0..nb {
                let (a, bb) = (col_of[p], col_of[q]);
                let v = g[(a, bb)];
                s_mat[(p, q)] -= v;
            }
        }
    }

    let s_mat = (&s_mat + s_mat.transpose()) * 0.5;
    // reduce with B_bb = Pᵀ L Lᵀ P: C = L⁻¹ P S Pᵀ L⁻ᵀ
    let mut trip = Vec::new();
    for (p, &d) in bdofs.iter().enumerate() {
        for (j, v) in b.row(d) {
            if bslot[j] != BND {
                trip.push((p, bslot[j], v));
            }
        }
    }
    let fb = EnvelopeCholesky::factor(&CsrMatrix::from_triplets(nb, trip))
        .map_err(|_| Error::SolverFailure("boundary mass matrix is not definite".into()))?;
    let pb = &fb.perm;
    let full_width = vec![nb; nb];
    let mut w = vec![0.0; nb * nb];
    for (r, &o) in pb.iter().enumerate() {
        for c in 0..nb {
            w[r * nb + c] = s_mat[(o, c)];
        }
    }
    fb.forward_block(&mut w, nb, &full_width);
    let mut z = vec![0.0; nb * nb];
    for (r, &o) in pb.iter().enumerate() {
        for c in 0..nb {
            z[r * nb + c] = w[c * nb + o];
        }
    }
    fb.forward_block(&mut z, nb, &full_width);
    let mut c = vec![0.0; nb * nb];
    for i in 0..nb {
        for j in 0..nb {
            c[i * nb + j] = 0.5 * (z[i * nb + j] + z[j * nb + i]);
        }
    }
    let scale = c.iter().fold(0.0f64, |m, x| m.max(x.abs())).max(f64::MIN_POSITIVE);
    let tri = Tridiagonal::new(c, nb);
    let (vals, vecs) = lowest_eigenpairs(&tri.d, &tri.e, m + 1);
    let mut eigenvalues = Vec::with_capacity(m + 1);
    let mut traces = Vec::with_capacity(m + 1);
    let mut tangents = Vec::with_capacity(m + 1);
    let mut modes = Vec::with_capacity(m + 1);
    for (mut sigma, zt) in vals.into_iter().zip(vecs) {
        if sigma < 0.0 {
            if sigma < -1e-9 * scale {
                return Err(Error::SolverFailure(format!("negative eigenvalue {sigma:e}")));
            }
            sigma = 0.0;
        }
        let mut zp = zt;
        tri.back_transform(&mut zp);
        fb.backward(&mut zp);
        let mut trace = vec![0.0; nb];
        for (r, &o) in pb.iter().enumerate() {
            trace[o] = zp[r];
        }
        // deterministic sign: the largest entry is positive
        let imax = (0..nb).max_by(|&a, &b| trace[a].abs().total_cmp(&trace[b].abs())).unwrap();
        if trace[imax] < 0.0 {
            trace.iter_mut().for_each(|x| *x = -*x);
        }
        let mut full = vec![0.0; n];
        for (p, &d) in bdofs.iter().enumerate() {
            full[d] = trace[p];
        }
        if let Some(f) = &chol_ii {
            // u_i = −K_ii⁻¹ K_ib y
            let mut rhs = vec![0.0; ni];
            for (p, &d) in bdofs.iter().enumerate() {
                for (jj, v) in k.row(d) {
                    if slot[jj] != BND {
                        rhs[slot[jj]] -= v * trace[p];
                    }
                }
            }
            for (r, v) in f.solve(&rhs).into_iter().enumerate() {
                full[interior[r]] = v;
            }
        }
        tangents.push(space.tangential_derivative(&trace));
        eigenvalues.push(sigma);
        traces.push(trace);
        modes.push(full);
    }
    Ok(SteklovSpectrum {
        eigenvalues,
        traces,
        tangents,
        modes,
    })
}

/// `vᵀKv / vᵀBv` for a full dof vector `v`.
pub fn rayleigh_quotient(k: &CsrMatrix, b: &CsrMatrix, v: &[f64]) -> Result<f64> {
    let num = k.bilinear(v, v);
    let den = b.bilinear(v, v);
    if !(den > 1e-14 * num.abs()) || den <= 0.0 {
        return Err(Error::ZeroBoundaryTrace);
    }
    Ok(num / den)
}
