//! Lowest eigenpairs of a symmetric tridiagonal matrix by Sturm bisection and
//! inverse iteration.

/// Number of eigenvalues strictly below `x`.
fn sturm_count(d: &[f64], e: &[f64], x: f64, pivmin: f64) -> usize {
    let mut count = 0;
    let mut q = d[0] - x;
    if q.abs() < pivmin {
        q = -pivmin;
    }
    if q < 0.0 {
        count += 1;
    }
    for i in 1..d.len() {
        q = d[i] - x - e[i - 1] * e[i - 1] / q;
        if q.abs() < pivmin {
            q = -pivmin;
        }
        if q < 0.0 {
            count += 1;
        }
    }
    count
}

/// Solves `(T − λ I) x = b` in place with partial pivoting.
fn shifted_solve(d: &[f64], e: &[f64], lambda: f64, b: &mut [f64], tiny: f64) {
    let n = d.len();
    // rows hold (diag, super1, super2) after elimination
    let mut u0 = vec![0.0; n];
    let mut u1 = vec![0.0; n];
    let mut u2 = vec![0.0; n];
    let mut cur = [d[0] - lambda, if n > 1 { e[0] } else { 0.0 }, 0.0];
    for i in 0..n - 1 {
        let below = [e[i], d[i + 1] - lambda, if i + 2 < n { e[i + 1] } else { 0.0 }];
        if below[0].abs() > cur[0].abs() {
            // swap rows i and i + 1
            let f = cur[0] / below[0];
            u0[i] = below[0];
            u1[i] = below[1];
            u2[i] = below[2];
            b.swap(i, i + 1);
            cur = [cur[1] - f * below[1], cur[2] - f * below[2], 0.0];
            b[i + 1] -= f * b[i];
        } else {
            let p = if cur[0] == 0.0 { tiny } else { cur[0] };
            let f = below[0] / p;
            u0[i] = p;
            u1[i] = cur[1];
            u2[i] = cur[2];
            cur = [below[1] - f * cur[1], below[2] - f * cur[2], 0.0];
            b[i + 1] -= f * b[i];
        }
    }
    u0[n - 1] = if cur[0] == 0.0 { tiny } else { cur[0] };
    for i in (0..n).rev() {
        let mut s = b[i];
        if i + 1 < n {
            s -= u1[i] * b[i + 1];
        }
        if i + 2 < n {
            s -= u2[i] * b[i + 2];
        }
        let p = if u0[i].abs() < tiny { tiny.copysign(u0[i]) } else { u0[i] };
        b[i] = s / p;
    }
}

fn normalize(v: &mut [f64]) {
    let s = v.iter().map(|x| x * x).sum::<f64>().sqrt();
    v.iter_mut().for_each(|x| *x /= s);
}

/// The `count` smallest eigenvalues of the tridiagonal matrix with diagonal
/// `d` and off-diagonal `e`, ascending, with orthonormal eigenvectors.
pub fn lowest_eigenpairs(d: &[f64], e: &[f64], count: usize) -> (Vec<f64>, Vec<Vec<f64>>) {
    let n = d.len();
    assert!(count <= n && e.len() + 1 == n);
    let norm = (0..n)
        .map(|i| {
            d[i].abs()
                + if i > 0 { e[i - 1].abs() } else { 0.0 }
                + if i + 1 < n { e[i].abs() } else { 0.0 }
        })
        .fold(0.0, f64::max)
        .max(f64::MIN_POSITIVE);
    let eps = f64::EPSILON;
    let pivmin = f64::MIN_POSITIVE.max(norm * norm * f64::MIN_POSITIVE * 1e4);
    let mut vals = Vec::with_capacity(count);
    for k in 0..count {
        let (mut lo, mut hi) = (-norm, norm);
        for _ in 0..200 {
            let mid = 0.5 * (lo + hi);
            if sturm_count(d, e, mid, pivmin) > k {
                hi = mid;
            } else {
                lo = mid;
            }
            if hi - lo <= 2.0 * eps * lo.abs().max(hi.abs()) + pivmin {
                break;
            }
        }
        vals.push(0.5 * (lo + hi));
    }

    let tiny = eps * norm;
    let cluster_gap = 1e-3 * norm;
    let mut vecs: Vec<Vec<f64>> = Vec::with_capacity(count);
    let mut seed: u64 = 0x9e37_79b9_7f4a_7c15;
    let mut cluster_start = 0;
    let mut prev_shift = f64::NEG_INFINITY;
    for k in 0..count {
        if k > 0 && vals[k] - vals[k - 1] > cluster_gap {
            cluster_start = k;
        }
        let mut lambda = vals[k];
        if k > cluster_start && lambda - prev_shift < 10.0 * eps * norm {
            // separate coincident shifts inside a cluster
            lambda = prev_shift + 10.0 * eps * norm;
        }
        prev_shift = lambda;
        let mut x: Vec<f64> = (0..n)
            .map(|_| {
                seed = seed.wrapping_mul(6_364_136_223_846_793_005).wrapping_add(1_442_695_040_888_963_407);
                ((seed >> 11) as f64 / (1u64 << 53) as f64) - 0.5
            })
            .collect();
        normalize(&mut x);
        for _ in 0..5 {
            shifted_solve(d, e, lambda, &mut x, tiny);
            for v in &vecs[cluster_start..k] {
                let c: f64 = v.iter().zip(&x).map(|(a, b)| a * b).sum();
                x.iter_mut().zip(v).for_each(|(a, b)| *a -= c * b);
            }
            normalize(&mut x);
        }
        vecs.push(x);
    }
    (vals, vecs)
}

/// Householder reduction `A = Q T Qᵀ` of a dense symmetric matrix.
pub struct Tridiagonal {
    pub d: Vec<f64>,
    pub e: Vec<f64>,
    /// reflectors `I − τ v vᵀ` acting on entries `k + 1..`
    reflectors: Vec<(Vec<f64>, f64)>,
}

impl Tridiagonal {
    /// `a` is row-major `n × n`, both triangles filled.
    pub fn new(mut a: Vec<f64>, n: usize) -> Self {
        assert_eq!(a.len(), n * n);
        let mut d = vec![0.0; n];
        let mut e = vec![0.0; n.saturating_sub(1)];
        let mut reflectors = Vec::with_capacity(n.saturating_sub(2));
        for k in 0..n.saturating_sub(2) {
            d[k] = a[k * n + k];
            let m = n - k - 1;
            let mut v: Vec<f64> = (0..m).map(|i| a[(k + 1 + i) * n + k]).collect();
            let alpha = v[0];
            let xnorm = v[1..].iter().map(|x| x * x).sum::<f64>().sqrt();
            if xnorm == 0.0 {
                e[k] = alpha;
                reflectors.push((v, 0.0));
                continue;
            }
            let beta = -alpha.signum() * alpha.hypot(xnorm);
            let tau = (beta - alpha) / beta;
            let scale = 1.0 / (alpha - beta);
            v[0] = 1.0;
            v[1..].iter_mut().for_each(|x| *x *= scale);
            e[k] = beta;
            let off = k + 1;
            let mut p: Vec<f64> = (0..m)
                .map(|i| {
                    let row = &a[(off + i) * n + off..(off + i) * n + n];
                    tau * row.iter().zip(&v).map(|(x, y)| x * y).sum::<f64>()
                })
                .collect();
            let kdot = 0.5 * tau * p.iter().zip(&v).map(|(x, y)| x * y).sum::<f64>();
            p.iter_mut().zip(&v).for_each(|(pi, vi)| *pi -= kdot * vi);
            for i in 0..m {
                let (vi, wi) = (v[i], p[i]);
                let row = &mut a[(off + i) * n + off..(off + i) * n + n];
                for ((x, &vj), &wj) in row.iter_mut().zip(&v).zip(&p) {
                    *x -= vi * wj + wi * vj;
                }
            }
            reflectors.push((v, tau));
        }
        if n >= 2 {
            d[n - 2] = a[(n - 2) * n + n - 2];
            e[n - 2] = a[(n - 1) * n + n - 2];
        }
        if n >= 1 {
            d[n - 1] = a[n * n - 1];
        }
        Self { d, e, reflectors }
    }

    /// Maps an eigenvector of `T` to one of `A`.
    pub fn back_transform(&self, z: &mut [f64]) {
        for (k, (v, tau)) in self.reflectors.iter().enumerate().rev() {
            if *tau == 0.0 {
                continue;
            }
            let tail = &mut z[k + 1..];
            let c = tau * v.iter().zip(tail.iter()).map(|(a, b)| a * b).sum::<f64>();
            tail.iter_mut().zip(v).for_each(|(x, vi)| *x -= c * vi);
        }
    }
}
