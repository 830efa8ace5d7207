//! Strictly convex quadratic programs with a diagonal Hessian, solved by the
//! Goldfarb-Idnani dual active-set method.

use nalgebra::DMatrix;

use crate::error::{Error, Result};

/// Hessian of the quadratic objective; must be positive definite.
#[derive(Debug, Clone, Copy)]
pub enum Hessian<'a> {
    Diagonal(&'a [f64]),
    Dense(&'a DMatrix<f64>),
}

impl Hessian<'_> {
    fn dim(&self) -> usize {
        match self {
            Hessian::Diagonal(d) => d.len(),
            Hessian::Dense(m) => m.nrows(),
        }
    }
}

/// Sparse inequality `a · x <= b`.
#[derive(Debug, Clone, PartialEq)]
pub struct LeRow {
    pub coeffs: Vec<(usize, f64)>,
    pub bound: f64,
}

impl LeRow {
    pub fn slack(&self, x: &[f64]) -> f64 {
        self.bound - self.coeffs.iter().map(|&(i, a)| a * x[i]).sum::<f64>()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct QpSolution {
    pub x: Vec<f64>,
    /// Active rows with their multipliers.
    pub active: Vec<(usize, f64)>,
    pub iterations: usize,
}

/// Minimizes `½ xᵀHx + c·x` subject to `rows`. Rows with slack above
/// `−tol` count as satisfied.
pub fn solve_qp(
    hess: Hessian,
    linear: &[f64],
    rows: &[LeRow],
    tol: f64,
    max_iter: usize,
) -> Result<QpSolution> {
    let n = hess.dim();
    let not_pd = || Error::InvalidInput("optimizer: QP Hessian is not positive definite".into());
    if linear.len() != n {
        return Err(Error::InvalidInput("optimizer: QP dimension mismatch".into()));
    }
    // J = L⁻ᵀ Q and Jᵀ N_A = [R; 0], both row-major n × n
    let mut jm = vec![0.0; n * n];
    let mut x: Vec<f64>;
    match hess {
        Hessian::Diagonal(h) => {
            if h.iter().any(|&v| !(v > 0.0)) {
                return Err(not_pd());
            }
            x = (0..n).map(|i| -linear[i] / h[i]).collect();
            for i in 0..n {
                jm[i * n + i] = 1.0 / h[i].sqrt();
            }
        }
        Hessian::Dense(h) => {
            if h.ncols() != n {
                return Err(not_pd());
            }
            let chol = h.clone().cholesky().ok_or_else(not_pd)?;
            x = chol
                .solve(&nalgebra::DVector::from_column_slice(linear))
                .iter()
                .map(|v| -v)
                .collect();
            let linv = chol
                .l()
                .solve_lower_triangular(&DMatrix::identity(n, n))
                .ok_or_else(not_pd)?;
            for i in 0..n {
                for j in 0..n {
                    jm[i * n + j] = linv[(j, i)];
                }
            }
        }
    }
    let mut rm = vec![0.0; n * n];
    let mut active: Vec<usize> = Vec::new();
    let mut u: Vec<f64> = Vec::new();
    let mut is_active = vec![false; rows.len()];
    let mut iterations = 0;

    loop {
        let worst = rows
            .iter()
            .enumerate()
            .filter(|(i, _)| !is_active[*i])
            .map(|(i, r)| (i, r.slack(&x)))
            .min_by(|a, b| a.1.total_cmp(&b.1));
        let Some((p, sp)) = worst else { break };
        if sp >= -tol {
            break;
        }
        // normal of row p in ≥ form
        let np: Vec<(usize, f64)> = rows[p].coeffs.iter().map(|&(i, a)| (i, -a)).collect();
        let mut uplus = u.clone();
        uplus.push(0.0);
        loop {
            iterations += 1;
            if iterations > max_iter {
                return Err(Error::ProjectionFailure(format!(
                    "active-set iteration cap {max_iter} reached"
                )));
            }
            let q = active.len();
            let mut d = vec![0.0; n];
            for &(i, a) in &np {
                let row = &jm[i * n..(i + 1) * n];
                for (dc, jc) in d.iter_mut().zip(row) {
                    *dc += jc * a;
                }
            }
            let mut z = vec![0.0; n];
            for (i, zi) in z.iter_mut().enumerate() {
                let row = &jm[i * n..(i + 1) * n];
                *zi = row[q..].iter().zip(&d[q..]).map(|(a, b)| a * b).sum();
            }
            let mut r = vec![0.0; q];
            for l in (0..q).rev() {
                let mut s = d[l];
                for c in l + 1..q {
                    s -= rm[l * n + c] * r[c];
                }
                r[l] = s / rm[l * n + l];
            }
            let mut t1 = f64::INFINITY;
            let mut drop = None;
            for l in 0..q {
                if r[l] > 0.0 {
                    let v = uplus[l] / r[l];
                    if v < t1 {
                        t1 = v;
                        drop = Some(l);
                    }
                }
            }
            let zn: f64 = np.iter().map(|&(i, a)| z[i] * a).sum();
            let slack = rows[p].slack(&x);
            let t2 = if zn > 1e-14 * (1.0 + norm(&d).powi(2)) {
                // ≥-form violation is −slack
                (-slack).max(0.0) / zn
            } else {
                f64::INFINITY
            };
            let t = t1.min(t2);
            if t.is_infinite() {
                return Err(Error::ProjectionFailure("infeasible constraint set".into()));
            }
            for l in 0..q {
                uplus[l] -= t * r[l];
            }
            uplus[q] += t;
            if t2.is_finite() {
                for (xi, zi) in x.iter_mut().zip(&z) {
                    *xi += t * zi;
                }
            }
            if t2 <= t1 {
                // full step: row p joins the active set
                for jc in (q + 1..n).rev() {
                    let (a, b) = (d[jc - 1], d[jc]);
                    if b == 0.0 {
                        continue;
                    }
                    let h = a.hypot(b);
                    let (c, s) = (a / h, b / h);
                    d[jc - 1] = h;
                    d[jc] = 0.0;
                    for i in 0..n {
                        let (x0, x1) = (jm[i * n + jc - 1], jm[i * n + jc]);
                        jm[i * n + jc - 1] = c * x0 + s * x1;
                        jm[i * n + jc] = -s * x0 + c * x1;
                    }
                }
                for l in 0..=q {
                    rm[l * n + q] = d[l];
                }
                active.push(p);
                is_active[p] = true;
                u = uplus;
                break;
            }
            let l = drop.expect("partial step has a blocking row");
            is_active[active[l]] = false;
            active.remove(l);
            uplus.remove(l);
            remove_column(&mut rm, &mut jm, n, q, l);
        }
    }
    Ok(QpSolution {
        x,
        active: active.into_iter().zip(u).collect(),
        iterations,
    })
}

fn norm(v: &[f64]) -> f64 {
    v.iter().map(|x| x * x).sum::<f64>().sqrt()
}

/// Deletes column `l` of the `q`-column triangle `R` and restores the
/// triangular shape with Givens rotations, mirrored on the columns of `J`.
fn remove_column(rm: &mut [f64], jm: &mut [f64], n: usize, q: usize, l: usize) {
    for c in l..q - 1 {
        for row in 0..q {
            rm[row * n + c] = rm[row * n + c + 1];
        }
    }
    for row in 0..q {
        rm[row * n + q - 1] = 0.0;
    }
    for c in l..q - 1 {
        let (a, b) = (rm[c * n + c], rm[(c + 1) * n + c]);
        if b == 0.0 {
            continue;
        }
        let h = a.hypot(b);
        let (cs, sn) = (a / h, b / h);
        for cc in c..q - 1 {
            let (x0, x1) = (rm[c * n + cc], rm[(c + 1) * n + cc]);
            rm[c * n + cc] = cs * x0 + sn * x1;
            rm[(c + 1) * n + cc] = -sn * x0 + cs * x1;
        }
        for i in 0..n {
            let (x0, x1) = (jm[i * n + c], jm[i * n + c + 1]);
            jm[i * n + c] = cs * x0 + sn * x1;
            jm[i * n + c + 1] = -sn * x0 + cs * x1;
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn row(coeffs: &[(usize, f64)], bound: f64) -> LeRow {
        LeRow {
            coeffs: coeffs.to_vec(),
            bound,
        }
    }

    #[test]
    fn unconstrained_minimum() {
        let s = solve_qp(Hessian::Diagonal(&[2.0, 4.0]), &[-2.0, 4.0], &[], 1e-12, 100).unwrap();
        assert_eq!(s.x, vec![1.0, -1.0]);
    }

    #[test]
    fn halfspace_projection() {
        // project y = (3, 1) onto x + 2y <= 2
        let y = [3.0, 1.0];
        let a = [1.0, 2.0];
        let s = solve_qp(Hessian::Diagonal(&[1.0, 1.0]), &[-y[0], -y[1]], &[row(&[(0, 1.0), (1, 2.0)], 2.0)], 1e-12, 100)
            .unwrap();
        let viol = (y[0] * a[0] + y[1] * a[1] - 2.0) / 5.0;
        assert!((s.x[0] - (y[0] - viol * a[0])).abs() < 1e-14);
        assert!((s.x[1] - (y[1] - viol * a[1])).abs() < 1e-14);
        assert!((s.active[0].1 - viol).abs() < 1e-14);
    }

    #[test]
    fn box_corner_and_a_dropped_row() {
        // min (x−2)² + (y−2)² with x <= 1, y <= 1, x + y <= 3 (inactive)
        let rows = [
            row(&[(0, 1.0), (1, 1.0)], 3.0),
            row(&[(0, 1.0)], 1.0),
            row(&[(1, 1.0)], 1.0),
        ];
        let s = solve_qp(Hessian::Diagonal(&[1.0, 1.0]), &[-2.0, -2.0], &rows, 1e-12, 100).unwrap();
        assert!((s.x[0] - 1.0).abs() < 1e-14 && (s.x[1] - 1.0).abs() < 1e-14);
        let mut act: Vec<usize> = s.active.iter().map(|a| a.0).collect();
        act.sort();
        assert_eq!(act, vec![1, 2]);
    }

    #[test]
    fn degenerate_rows_are_handled() {
        // three rows through the same vertex
        let rows = [
            row(&[(0, 1.0)], 0.0),
            row(&[(1, 1.0)], 0.0),
            row(&[(0, 1.0), (1, 1.0)], 0.0),
        ];
        let s = solve_qp(Hessian::Diagonal(&[1.0, 1.0]), &[-1.0, -1.0], &rows, 1e-12, 100).unwrap();
        assert!(s.x[0].abs() < 1e-14 && s.x[1].abs() < 1e-14);
    }

    #[test]
    fn dense_hessian_matches_the_transformed_problem() {
        // min ½ xᵀHx − bᵀx with x_0 + x_1 >= 1 rewritten as −x_0 − x_1 <= −1
        let h = DMatrix::from_row_slice(2, 2, &[2.0, 0.5, 0.5, 1.0]);
        let c = [0.0, 0.0];
        let s = solve_qp(Hessian::Dense(&h), &c, &[row(&[(0, -1.0), (1, -1.0)], -1.0)], 1e-12, 100).unwrap();
        // KKT: Hx = λ(1, 1), x_0 + x_1 = 1
        let x = nalgebra::Vector2::new(s.x[0], s.x[1]);
        let g = &h * x;
        assert!((g[0] - g[1]).abs() < 1e-13);
        assert!((x[0] + x[1] - 1.0).abs() < 1e-13);
        assert!(g[0] > 0.0);
        assert!(solve_qp(Hessian::Dense(&-h), &c, &[], 1e-12, 10).is_err());
    }

    #[test]
    fn infeasible_set_is_reported() {
        let rows = [row(&[(0, 1.0)], -1.0), row(&[(0, -1.0)], -1.0)];
        assert!(matches!(
            solve_qp(Hessian::Diagonal(&[1.0]), &[0.0], &rows, 1e-12, 100),
            Err(Error::ProjectionFailure(_))
        ));
    }
}
