//! Matrix-free symmetric eigensolvers: Lanczos with full
//! reorthogonalization (primary) and power iteration (debug fallback).
//!
//! The tridiagonal eigenproblem inside Lanczos is solved by Sturm-sequence
//! bisection for the top eigenvalue and inverse iteration for its vector;
//! only the extreme pair is ever needed here.

use crate::linalg::{axpy, dot, norm_sq};
use crate::rng::{stream_rng, STREAM_EIGEN_INIT};
use crate::{Error, Result};
use rand::Rng;
use rand_distr::StandardNormal;

/// A symmetric linear operator given by its matrix-vector product.
pub trait SymOp {
    fn dim(&self) -> usize;
    fn apply(&self, x: &[f64], out: &mut [f64]);
}

impl<F: Fn(&[f64], &mut [f64])> SymOp for (usize, F) {
    fn dim(&self) -> usize {
        self.0
    }
    fn apply(&self, x: &[f64], out: &mut [f64]) {
        (self.1)(x, out)
    }
}

/// Converged extreme eigenpair.
#[derive(Debug, Clone)]
pub struct EigenResult {
    pub value: f64,
    /// Unit-norm eigenvector.
    pub vector: Vec<f64>,
    pub iters: usize,
    /// Final residual `||A v - value v||`.
    pub residual: f64,
}

/// Number of eigenvalues of the tridiagonal `(diag, off)` strictly below `x`.
fn sturm_count(diag: &[f64], off: &[f64], x: f64) -> usize {
    let mut count = 0;
    let mut d = 1.0f64;
    for i in 0..diag.len() {
        let off2 = if i == 0 { 0.0 } else { off[i - 1] * off[i - 1] };
        d = diag[i] - x - off2 / d;
        if d == 0.0 {
            d = -1e-300;
        }
        if d < 0.0 {
            count += 1;
        }
    }
    count
}

/// Largest eigenvalue of a symmetric tridiagonal matrix by bisection.
fn tridiag_max_eigenvalue(diag: &[f64], off: &[f64]) -> f64 {
    let k = diag.len();
    let mut lo = f64::INFINITY;
    let mut hi = f64::NEG_INFINITY;
    for i in 0..k {
        let r = (if i > 0 { off[i - 1].abs() } else { 0.0 })
            + (if i + 1 < k { off[i].abs() } else { 0.0 });
        lo = lo.min(diag[i] - r);
        hi = hi.max(diag[i] + r);
    }
    let scale = hi.abs().max(lo.abs()).max(1e-300);
    for _ in 0..200 {
        if hi - lo <= 1e-15 * scale {
            break;
        }
        let mid = 0.5 * (lo + hi);
        if sturm_count(diag, off, mid) < k {
            // at least one eigenvalue >= mid
            lo = mid;
        } else {
            hi = mid;
        }
    }
    0.5 * (lo + hi)
}

/// Unit eigenvector of the tridiagonal for an isolated extreme eigenvalue,
/// by inverse iteration with partial pivoting.
fn tridiag_eigenvector(diag: &[f64], off: &[f64], theta: f64) -> Vec<f64> {
    let k = diag.len();
    if k == 1 {
        return vec![1.0];
    }
    let scale = diag.iter().fold(0.0f64, |a, &x| a.max(x.abs())).max(1.0);
    let shift = theta + 1e-12 * scale;
    let mut y = vec![1.0 / (k as f64).sqrt(); k];
    for _ in 0..3 {
        y = solve_shifted_tridiag(diag, off, shift, &y);
        let norm = y.iter().map(|v| v * v).sum::<f64>().sqrt();
        if !(norm > 0.0) || !norm.is_finite() {
            y = vec![1.0 / (k as f64).sqrt(); k];
            continue;
        }
        for v in y.iter_mut() {
            *v /= norm;
        }
    }
    y
}

/// Solves `(T - shift I) x = b` by Gaussian elimination with partial
/// pivoting (one superdiagonal of fill-in).
fn solve_shifted_tridiag(diag: &[f64], off: &[f64], shift: f64, b: &[f64]) -> Vec<f64> {
    let k = diag.len();
    // Row i carries coefficients of (x_{i-1}, x_i, x_{i+1}, x_{i+2}):
    // (sub[i-1], d[i], e[i], f[i]); f is fill-in from pivoting.
    let mut d: Vec<f64> = diag.iter().map(|&x| x - shift).collect();
    let mut e = vec![0.0; k];
    let mut f = vec![0.0; k];
    e[..k - 1].copy_from_slice(off);
    let mut rhs = b.to_vec();

    for i in 0..k - 1 {
        let mut low = off[i]; // coefficient of x_i in row i+1
        if low.abs() > d[i].abs() {
            // Swap rows i and i+1 (the lower row has entries for
            // x_i, x_{i+1}, x_{i+2}; the upper for the same after swap).
            let (a, bb, c) = (d[i], e[i], f[i]);
            d[i] = low;
            e[i] = d[i + 1];
            f[i] = e[i + 1];
            low = a;
            d[i + 1] = bb;
            e[i + 1] = c;
            rhs.swap(i, i + 1);
        }
        let pivot = if d[i] == 0.0 { 1e-300 } else { d[i] };
        let mult = low / pivot;
        d[i + 1] -= mult * e[i];
        e[i + 1] -= mult * f[i];
        rhs[i + 1] -= mult * rhs[i];
    }

    // Back substitution.
    let mut x = vec![0.0; k];
    for i in (0..k).rev() {
        let mut acc = rhs[i];
        if i + 1 < k {
            acc -= e[i] * x[i + 1];
        }
        if i + 2 < k {
            acc -= f[i] * x[i + 2];
        }
        let pivot = if d[i] == 0.0 { 1e-300 } else { d[i] };
        x[i] = acc / pivot;
    }
    x
}

/// Default iteration cap for [`lambda_max`].
pub const LANCZOS_MAX_ITER: usize = 500;
/// Default relative residual tolerance.
pub const LANCZOS_TOL: f64 = 1e-8;

/// Top eigenpair of a symmetric operator by Lanczos with full
/// reorthogonalization; the start vector is drawn from `seed`.
pub fn lambda_max<O: SymOp + ?Sized>(
    op: &O,
    tol: f64,
    max_iter: usize,
    seed: u64,
) -> Result<EigenResult> {
    let n = op.dim();
    let mut rng = stream_rng(seed, STREAM_EIGEN_INIT);
    let init: Vec<f64> = (0..n).map(|_| rng.sample::<f64, _>(StandardNormal)).collect();
    lambda_max_from(op, &init, tol, max_iter)
}

/// Top eigenpair starting from the supplied vector (useful for warm
/// starts across nearby operators).
pub fn lambda_max_from<O: SymOp + ?Sized>(
    op: &O,
    init: &[f64],
    tol: f64,
    max_iter: usize,
) -> Result<EigenResult> {
    let n = op.dim();
    if init.len() != n {
        return Err(Error::Dimension(format!(
            "eigensolver start vector has {} entries, operator dimension is {n}",
            init.len()
        )));
    }
    if n == 0 {
        return Err(Error::InvalidParams("empty operator".into()));
    }

    let norm0 = init.iter().map(|x| x * x).sum::<f64>().sqrt();
    if !(norm0 > 0.0) {
        return Err(Error::InvalidParams("zero start vector".into()));
    }
    let mut basis: Vec<Vec<f64>> = Vec::new();
    basis.push(init.iter().map(|x| x / norm0).collect());

    let mut diag: Vec<f64> = Vec::new();
    let mut off: Vec<f64> = Vec::new();
    let mut w = vec![0.0; n];
    let cap = max_iter.min(n);

    for k in 0..cap {
        op.apply(&basis[k], &mut w);
        let alpha = dot(&basis[k], &w);
        diag.push(alpha);
        axpy(&mut w, -alpha, &basis[k]);
        if k > 0 {
            axpy(&mut w, -off[k - 1], &basis[k - 1]);
        }
        // Full reorthogonalization, twice when cancellation was heavy.
        for _ in 0..2 {
            let mut max_proj = 0.0f64;
            for v in &basis {
                let proj = dot(v, &w);
                max_proj = max_proj.max(proj.abs());
                axpy(&mut w, -proj, v);
            }
            if max_proj < 1e-10 {
                break;
            }
        }
        let beta = norm_sq(&w).sqrt();

        let theta = tridiag_max_eigenvalue(&diag, &off);
        let s = tridiag_eigenvector(&diag, &off, theta);
        let resid_est = beta * s[s.len() - 1].abs();
        let breakdown = beta <= 1e-14 * theta.abs().max(1.0);

        if resid_est <= tol * theta.abs().max(f64::MIN_POSITIVE) || breakdown || k + 1 == cap {
            let mut vector = vec![0.0; n];
            for (j, v) in basis.iter().enumerate() {
                axpy(&mut vector, s[j], v);
            }
            let vnorm = norm_sq(&vector).sqrt();
            for x in vector.iter_mut() {
                *x /= vnorm;
            }
            // True residual on the original operator.
            let mut av = vec![0.0; n];
            op.apply(&vector, &mut av);
            let residual = av
                .iter()
                .zip(&vector)
                .map(|(a, v)| (a - theta * v).powi(2))
                .sum::<f64>()
                .sqrt();
            if residual <= tol * theta.abs().max(f64::MIN_POSITIVE) || breakdown {
                return Ok(EigenResult { value: theta, vector, iters: k + 1, residual });
            }
            if k + 1 == cap {
                return Err(Error::NonConvergence { iters: k + 1, residual });
            }
        }
        off.push(beta);
        basis.push(w.iter().map(|x| x / beta).collect());
    }
    unreachable!("loop returns before exhausting the cap");
}

/// Power-iteration fallback; far slower to converge but trivially simple.
pub fn power_iteration<O: SymOp + ?Sized>(
    op: &O,
    tol: f64,
    max_iter: usize,
    seed: u64,
) -> Result<EigenResult> {
    let n = op.dim();
    let mut rng = stream_rng(seed, STREAM_EIGEN_INIT);
    let mut v: Vec<f64> = (0..n).map(|_| rng.sample::<f64, _>(StandardNormal)).collect();
    let norm = v.iter().map(|x| x * x).sum::<f64>().sqrt();
    v.iter_mut().for_each(|x| *x /= norm);
    let mut av = vec![0.0; n];
    let mut theta = 0.0;
    for k in 0..max_iter {
        op.apply(&v, &mut av);
        theta = v.iter().zip(&av).map(|(a, b)| a * b).sum();
        let residual = av
            .iter()
            .zip(&v)
            .map(|(a, vi)| (a - theta * vi).powi(2))
            .sum::<f64>()
            .sqrt();
        if residual <= tol * theta.abs().max(f64::MIN_POSITIVE) {
            return Ok(EigenResult { value: theta, vector: v, iters: k + 1, residual });
        }
        let norm = av.iter().map(|x| x * x).sum::<f64>().sqrt();
        if !(norm > 0.0) {
            return Err(Error::Numerical("power iteration collapsed to zero".into()));
        }
        for (vi, ai) in v.iter_mut().zip(&av) {
            *vi = ai / norm;
        }
    }
    op.apply(&v, &mut av);
    let residual = av
        .iter()
        .zip(&v)
        .map(|(a, vi)| (a - theta * vi).powi(2))
        .sum::<f64>()
        .sqrt();
    Err(Error::NonConvergence { iters: max_iter, residual })
}

/// Dense symmetric wrapper for tests and small problems.
pub struct DenseSym<'a> {
    pub n: usize,
    pub data: &'a [f64],
}

impl SymOp for DenseSym<'_> {
    fn dim(&self) -> usize {
        self.n
    }
    fn apply(&self, x: &[f64], out: &mut [f64]) {
        for (i, o) in out.iter_mut().enumerate() {
            *o = dot(&self.data[i * self.n..(i + 1) * self.n], x);
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    struct Diag(Vec<f64>);
    impl SymOp for Diag {
        fn dim(&self) -> usize {
            self.0.len()
        }
        fn apply(&self, x: &[f64], out: &mut [f64]) {
            for (o, (d, xi)) in out.iter_mut().zip(self.0.iter().zip(x)) {
                *o = d * xi;
            }
        }
    }

    #[test]
    fn diagonal_operator() {
        let op = Diag(vec![1.0, 2.0, 3.0]);
        let res = lambda_max(&op, 1e-10, 100, 1).unwrap();
        assert!((res.value - 3.0).abs() < 1e-9);
        assert!(res.vector[2].abs() > 0.999);
        let res = power_iteration(&op, 1e-8, 10_000, 1).unwrap();
        assert!((res.value - 3.0).abs() < 1e-6);
    }

    #[test]
    fn matches_dense_oracle() {
        use crate::rng::stream_rng;
        use rand::Rng;
        use rand_distr::StandardNormal;
        let n = 30;
        for seed in 0..20u64 {
            let mut rng = stream_rng(seed, 9);
            let mut data = vec![0.0; n * n];
            for i in 0..n {
                for j in i..n {
                    let x: f64 = rng.sample(StandardNormal);
                    data[i * n + j] = x;
                    data[j * n + i] = x;
                }
            }
            let dm = nalgebra::DMatrix::from_row_slice(n, n, &data);
            let eig = dm.symmetric_eigen();
            let mut top = f64::NEG_INFINITY;
            let mut top_idx = 0;
            for (k, &v) in eig.eigenvalues.iter().enumerate() {
                if v > top {
                    top = v;
                    top_idx = k;
                }
            }
            let res = lambda_max(&DenseSym { n, data: &data }, 1e-10, 200, seed).unwrap();
            assert!((res.value - top).abs() < 1e-8, "seed {seed}: {} vs {top}", res.value);
            let oracle_vec = eig.eigenvectors.column(top_idx);
            let dot: f64 = res.vector.iter().zip(oracle_vec.iter()).map(|(a, b)| a * b).sum();
            assert!(dot.abs() > 1.0 - 1e-7, "seed {seed}: eigenvector misaligned ({dot})");
        }
    }

    #[test]
    fn residual_is_small() {
        let n = 50;
        let mut data = vec![0.0; n * n];
        use crate::rng::stream_rng;
        use rand::Rng;
        use rand_distr::StandardNormal;
        let mut rng = stream_rng(3, 1);
        for i in 0..n {
            for j in i..n {
                let x: f64 = rng.sample(StandardNormal);
                data[i * n + j] = x;
                data[j * n + i] = x;
            }
        }
        let op = DenseSym { n, data: &data };
        let res = lambda_max(&op, 1e-9, 300, 5).unwrap();
        assert!(res.residual <= 1e-9 * res.value.abs());
    }

    #[test]
    fn nonconvergence_reported() {
        let op = Diag((0..200).map(|i| 1.0 + i as f64 * 1e-6).collect());
        // Nearly degenerate spectrum and a two-iteration budget.
        match lambda_max(&op, 1e-14, 2, 1) {
            Err(Error::NonConvergence { iters, .. }) => assert_eq!(iters, 2),
            other => panic!("expected non-convergence, got {other:?}"),
        }
    }

    #[test]
    fn warm_start_converges() {
        let op = Diag(vec![1.0, 5.0, 2.0]);
        let near = vec![0.01, 1.0, 0.01];
        let res = lambda_max_from(&op, &near, 1e-10, 50).unwrap();
        assert!((res.value - 5.0).abs() < 1e-9);
        assert!(res.iters <= 5);
    }
}
