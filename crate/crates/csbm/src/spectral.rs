//! Spectral estimator for the Gaussian observation model: minimize the top
//! eigenvalue of the penalized operator
//!
//! ```text
//! M(xi) = A + (2 mu^2 / (lambda^2 gamma^2 xi)) B^T B + (xi/2) I
//! ```
//!
//! over `xi > 0`. The minimum value is the detection statistic and the top
//! eigenvector at the minimizer is the label estimate. `xi ->
//! lambda_max(M(xi))` is a pointwise maximum of functions convex in `xi`,
//! so golden-section search applies.

use crate::eigen::{lambda_max, lambda_max_from, SymOp, LANCZOS_MAX_ITER, LANCZOS_TOL};
use crate::linalg::dot;
use crate::graph::Graph;
use crate::metrics::Decision;
use crate::model::{CovMatrix, GaussianInstance, Instance, SymMatrix};
use crate::{Error, Result};
use serde::Serialize;

/// Optimal coupling weight `b* = 2 mu / (lambda gamma)` of the combined
/// statistic.
pub fn b_star(lambda: f64, mu: f64, gamma: f64) -> Result<f64> {
    if !(gamma > 0.0) {
        return Err(Error::InvalidParams(format!("need gamma > 0 (got {gamma})")));
    }
    if !(lambda > 0.0) {
        return Err(Error::InvalidParams(
            "b_star undefined at lambda = 0; use the covariate-only spectral estimate".into(),
        ));
    }
    Ok(2.0 * mu / (lambda * gamma))
}

/// Asymptotic null value of the statistic,
/// `2 sqrt(1 + b*^2 gamma / 4) + b*`.
pub fn null_threshold(lambda: f64, mu: f64, gamma: f64) -> Result<f64> {
    let b = b_star(lambda, mu, gamma)?;
    Ok(2.0 * (1.0 + b * b * gamma / 4.0).sqrt() + b)
}

/// Detection decision: reject the null when the statistic clears the
/// asymptotic null value by more than the slack `delta`.
pub fn gaussian_test(
    t_value: f64,
    lambda: f64,
    mu: f64,
    gamma: f64,
    delta: f64,
) -> Result<Decision> {
    if !(delta >= 0.0) {
        return Err(Error::InvalidParams(format!("need delta >= 0 (got {delta})")));
    }
    let threshold = null_threshold(lambda, mu, gamma)?;
    Ok(if t_value > threshold + delta { Decision::Reject } else { Decision::Accept })
}

/// The symmetric-matrix part of the operator.
pub enum GraphPart<'a> {
    /// Gaussian surrogate observation.
    Dense(&'a SymMatrix),
    /// Centered, rescaled adjacency `(A^G - (d/n) 1 1^T) / sqrt(d)`.
    ///
    /// Extrapolation beyond the Gaussian-model guarantee; exposed for
    /// experimentation on sparse instances.
    CenteredAdjacency { graph: &'a Graph, d: f64 },
}

impl GraphPart<'_> {
    fn dim(&self) -> usize {
        match self {
            GraphPart::Dense(a) => a.n,
            GraphPart::CenteredAdjacency { graph, .. } => graph.n(),
        }
    }

    fn apply(&self, x: &[f64], out: &mut [f64]) {
        match self {
            GraphPart::Dense(a) => {
                let n = a.n;
                for (i, o) in out.iter_mut().enumerate() {
                    *o = dot(&a.data[i * n..(i + 1) * n], x);
                }
            }
            GraphPart::CenteredAdjacency { graph, d } => {
                let n = graph.n();
                let mean_shift = d / n as f64 * x.iter().sum::<f64>();
                let scale = 1.0 / d.sqrt();
                for (i, o) in out.iter_mut().enumerate() {
                    let s: f64 = graph.incident(i).map(|e| x[e.neighbor]).sum();
                    *o = scale * (s - mean_shift);
                }
            }
        }
    }
}

/// One spectral problem: data plus the (test) signal parameters.
pub struct SpectralProblem<'a> {
    pub graph: GraphPart<'a>,
    pub covariates: &'a CovMatrix,
    pub lambda: f64,
    pub mu: f64,
    pub gamma: f64,
}

impl<'a> SpectralProblem<'a> {
    /// Gaussian data with explicit test parameters (which may differ from
    /// the parameters that generated the data, e.g. when testing against
    /// null data).
    pub fn gaussian(inst: &'a GaussianInstance, lambda: f64, mu: f64, gamma: f64) -> Self {
        SpectralProblem {
            graph: GraphPart::Dense(&inst.matrix_a),
            covariates: &inst.covariates,
            lambda,
            mu,
            gamma,
        }
    }

    /// Gaussian data at its own generating parameters.
    pub fn from_gaussian(inst: &'a GaussianInstance) -> Self {
        Self::gaussian(inst, inst.params.lambda, inst.params.mu, inst.params.gamma)
    }

    /// Sparse-model data through the centered-adjacency extrapolation.
    pub fn from_sbm(inst: &'a Instance) -> Self {
        SpectralProblem {
            graph: GraphPart::CenteredAdjacency { graph: &inst.graph, d: inst.params.d },
            covariates: &inst.covariates,
            lambda: inst.params.lambda,
            mu: inst.params.mu,
            gamma: inst.params.gamma,
        }
    }

    fn n(&self) -> usize {
        self.graph.dim()
    }

    /// Coefficient of `B^T B / xi`.
    fn penalty_coef(&self) -> f64 {
        2.0 * self.mu * self.mu / (self.lambda * self.lambda * self.gamma * self.gamma)
    }
}

struct PenalizedOp<'a, 'b> {
    problem: &'b SpectralProblem<'a>,
    xi: f64,
}

impl SymOp for PenalizedOp<'_, '_> {
    fn dim(&self) -> usize {
        self.problem.n()
    }
    fn apply(&self, x: &[f64], out: &mut [f64]) {
        self.problem.graph.apply(x, out);
        let c = self.problem.penalty_coef() / self.xi;
        if c != 0.0 {
            let bx = self.problem.covariates.apply(x);
            let btbx = self.problem.covariates.apply_t(&bx);
            for (o, b) in out.iter_mut().zip(&btbx) {
                *o += c * b;
            }
        }
        let half_xi = self.xi / 2.0;
        for (o, xi_) in out.iter_mut().zip(x) {
            *o += half_xi * xi_;
        }
    }
}

/// Matrix-free product `M(xi) x` on a Gaussian instance; `B^T B` is never
/// materialized.
pub fn apply_m(
    inst: &GaussianInstance,
    lambda: f64,
    mu: f64,
    gamma: f64,
    xi: f64,
    x: &[f64],
) -> Result<Vec<f64>> {
    if !(xi > 0.0) {
        return Err(Error::InvalidParams(format!("need xi > 0 (got {xi})")));
    }
    let problem = SpectralProblem::gaussian(inst, lambda, mu, gamma);
    if x.len() != problem.n() {
        return Err(Error::Dimension(format!(
            "vector has {} entries, operator dimension is {}",
            x.len(),
            problem.n()
        )));
    }
    let op = PenalizedOp { problem: &problem, xi };
    let mut out = vec![0.0; x.len()];
    op.apply(x, &mut out);
    Ok(out)
}

/// Which computational path produced a [`SpectralResult`].
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum SpectralMode {
    /// Interior minimization over `xi`.
    Interior,
    /// `mu = 0`: plain top eigenvector of the matrix part.
    GraphOnly,
    /// `lambda = 0`: top right-singular vector of the covariates.
    CovariatesOnly,
}

/// Output of the spectral estimator.
#[derive(Debug, Clone, Serialize)]
pub struct SpectralResult {
    pub xi_star: f64,
    /// `min_xi lambda_max(M(xi))` (or the degenerate-path eigenvalue).
    pub t_value: f64,
    /// Estimate scaled to `||v_hat||_2 = sqrt(n)`, first nonzero
    /// coordinate positive.
    pub v_hat: Vec<f64>,
    /// Total eigensolver iterations across all probes.
    pub eig_iters: usize,
    pub bracket: (f64, f64),
    pub mode: SpectralMode,
}

fn fix_sign_and_scale(mut v: Vec<f64>) -> Vec<f64> {
    let scale = (v.len() as f64).sqrt();
    if let Some(first) = v.iter().find(|x| **x != 0.0) {
        if *first < 0.0 {
            for x in v.iter_mut() {
                *x = -*x;
            }
        }
    }
    for x in v.iter_mut() {
        *x *= scale;
    }
    v
}

const BRACKET_LO: f64 = 1e-3;
const BRACKET_HI: f64 = 10.0;
const BRACKET_FLOOR: f64 = 1e-12;
const BRACKET_CEIL: f64 = 1e12;

/// Minimizes `xi -> lambda_max(M(xi))` by golden-section search over an
/// auto-expanded bracket, warm-starting each eigensolve with the previous
/// eigenvector. Convexity of the profile is asserted on every probed
/// triple.
pub fn minimize_xi(problem: &SpectralProblem<'_>, tol_xi: f64, seed: u64) -> Result<SpectralResult> {
    if !(problem.lambda > 0.0) || !(problem.mu > 0.0) {
        return Err(Error::InvalidParams(
            "minimize_xi needs lambda > 0 and mu > 0; use spectral_estimate for the degenerate \
             paths"
                .into(),
        ));
    }
    let mut warm: Option<Vec<f64>> = None;
    let mut total_iters = 0usize;
    let mut probes: Vec<(f64, f64)> = Vec::new();

    let mut eval = |xi: f64, warm: &mut Option<Vec<f64>>, tol: f64| -> Result<f64> {
        let op = PenalizedOp { problem, xi };
        let res = match warm.as_ref() {
            Some(v) => lambda_max_from(&op, v, tol, LANCZOS_MAX_ITER)?,
            None => lambda_max(&op, tol, LANCZOS_MAX_ITER, seed)?,
        };
        total_iters += res.iters;
        *warm = Some(res.vector);
        probes.push((xi, res.value));
        Ok(res.value)
    };
    // Probes run looser than the final eigensolve: the Ritz value error is
    // quadratic in the residual, so 1e-5 residuals still give ~1e-9
    // eigenvalue accuracy, plenty for the bracketing decisions.
    let probe_tol = LANCZOS_TOL.max(1e-5);

    // Geometric scan, then expand until the best point is interior.
    let mut xs: Vec<f64> = Vec::new();
    let scan = 9usize;
    for k in 0..scan {
        let t = k as f64 / (scan - 1) as f64;
        xs.push(BRACKET_LO * (BRACKET_HI / BRACKET_LO).powf(t));
    }
    let mut vals: Vec<f64> = Vec::new();
    for &xi in &xs {
        vals.push(eval(xi, &mut warm, probe_tol)?);
    }
    loop {
        let best = vals
            .iter()
            .enumerate()
            .min_by(|a, b| a.1.partial_cmp(b.1).unwrap())
            .map(|(k, _)| k)
            .unwrap();
        if best == 0 {
            let lo = xs[0] / 8.0;
            if lo < BRACKET_FLOOR {
                return Err(Error::Numerical(
                    "bracket expansion failed toward xi -> 0 (is mu effectively zero?)".into(),
                ));
            }
            xs.insert(0, lo);
            vals.insert(0, eval(lo, &mut warm, probe_tol)?);
        } else if best == xs.len() - 1 {
            let hi = xs[xs.len() - 1] * 8.0;
            if hi > BRACKET_CEIL {
                return Err(Error::Numerical("bracket expansion failed toward xi -> inf".into()));
            }
            xs.push(hi);
            vals.push(eval(hi, &mut warm, probe_tol)?);
        } else {
            break;
        }
    }
    let best = vals
        .iter()
        .enumerate()
        .min_by(|a, b| a.1.partial_cmp(b.1).unwrap())
        .map(|(k, _)| k)
        .unwrap();
    let (mut lo, mut hi) = (xs[best - 1], xs[best + 1]);
    let outer_bracket = (lo, hi);

    // Golden-section to tol_xi, reusing warm starts.
    const INV_PHI: f64 = 0.618_033_988_749_894_9;
    let mut x1 = hi - INV_PHI * (hi - lo);
    let mut x2 = lo + INV_PHI * (hi - lo);
    let mut f1 = eval(x1, &mut warm, probe_tol)?;
    let mut f2 = eval(x2, &mut warm, probe_tol)?;
    while hi - lo > tol_xi {
        if f1 <= f2 {
            hi = x2;
            x2 = x1;
            f2 = f1;
            x1 = hi - INV_PHI * (hi - lo);
            f1 = eval(x1, &mut warm, probe_tol)?;
        } else {
            lo = x1;
            x1 = x2;
            f1 = f2;
            x2 = lo + INV_PHI * (hi - lo);
            f2 = eval(x2, &mut warm, probe_tol)?;
        }
    }
    let xi_star = if f1 <= f2 { x1 } else { x2 };

    // Convexity witness across every probed triple.
    probes.sort_by(|a, b| a.0.partial_cmp(&b.0).unwrap());
    for w in probes.windows(3) {
        let slack = 1e-6 * (1.0 + w[1].1.abs());
        if w[1].1 > w[0].1.max(w[2].1) + slack {
            return Err(Error::Numerical(format!(
                "eigenvalue profile not unimodal at xi = {:.6e}: {:.12} > max({:.12}, {:.12})",
                w[1].0, w[1].1, w[0].1, w[2].1
            )));
        }
    }

    // Final tight eigensolve at the minimizer.
    let op = PenalizedOp { problem, xi: xi_star };
    let final_res = match warm.as_ref() {
        Some(v) => lambda_max_from(&op, v, LANCZOS_TOL, LANCZOS_MAX_ITER)?,
        None => lambda_max(&op, LANCZOS_TOL, LANCZOS_MAX_ITER, seed)?,
    };
    total_iters += final_res.iters;

    Ok(SpectralResult {
        xi_star,
        t_value: final_res.value,
        v_hat: fix_sign_and_scale(final_res.vector),
        eig_iters: total_iters,
        bracket: outer_bracket,
        mode: SpectralMode::Interior,
    })
}

/// Full estimator with the degenerate fallbacks: `mu = 0` returns the top
/// eigenvector of the matrix part, `lambda = 0` the top right-singular
/// vector of `B`.
pub fn spectral_estimate(
    problem: &SpectralProblem<'_>,
    tol_xi: f64,
    seed: u64,
) -> Result<SpectralResult> {
    if problem.mu == 0.0 {
        let n = problem.n();
        let graph = &problem.graph;
        let op = (n, move |x: &[f64], out: &mut [f64]| graph.apply(x, out));
        let res = lambda_max(&op, LANCZOS_TOL, LANCZOS_MAX_ITER, seed)?;
        return Ok(SpectralResult {
            xi_star: 0.0,
            t_value: res.value,
            v_hat: fix_sign_and_scale(res.vector),
            eig_iters: res.iters,
            bracket: (0.0, 0.0),
            mode: SpectralMode::GraphOnly,
        });
    }
    if problem.lambda == 0.0 {
        let n = problem.covariates.n;
        let cov = problem.covariates;
        let op = (n, move |x: &[f64], out: &mut [f64]| {
            let bx = cov.apply(x);
            out.copy_from_slice(&cov.apply_t(&bx));
        });
        let res = lambda_max(&op, LANCZOS_TOL, LANCZOS_MAX_ITER, seed)?;
        return Ok(SpectralResult {
            xi_star: 0.0,
            t_value: res.value,
            v_hat: fix_sign_and_scale(res.vector),
            eig_iters: res.iters,
            bracket: (0.0, 0.0),
            mode: SpectralMode::CovariatesOnly,
        });
    }
    minimize_xi(problem, tol_xi, seed)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{derive_params, sample_gaussian};

    #[test]
    fn b_star_examples() {
        assert_eq!(b_star(1.0, 1.0, 1.0).unwrap(), 2.0);
        assert_eq!(b_star(1.0, 0.0, 0.8).unwrap(), 0.0);
        assert!((b_star(0.5, 1.0, 0.8).unwrap() - 5.0).abs() < 1e-12);
        assert!(b_star(0.0, 1.0, 1.0).is_err());
    }

    #[test]
    fn penalty_coefficient_identity() {
        // 2 mu^2/(lambda^2 gamma^2 xi) = b*^2 / (2 xi).
        for &(lambda, mu, gamma, xi) in
            &[(1.0, 1.0, 1.0, 0.7), (0.5, 1.3, 0.8, 2.0), (2.0, 0.1, 1.5, 0.01)]
        {
            let b = b_star(lambda, mu, gamma).unwrap();
            let lhs = 2.0 * mu * mu / (lambda * lambda * gamma * gamma * xi);
            let rhs = b * b / (2.0 * xi);
            assert!((lhs - rhs).abs() < 1e-12 * lhs.abs().max(1.0));
        }
    }

    #[test]
    fn apply_m_matches_dense_construction() {
        let params = derive_params(20, 15, 4.0, 0.8, 0.9).unwrap();
        let inst = sample_gaussian(&params, 5);
        let (lambda, mu, gamma) = (0.8, 0.9, params.gamma);
        let xi = 0.6;
        let c = 2.0 * mu * mu / (lambda * lambda * gamma * gamma * xi);

        // Dense oracle: M = A + c B^T B + (xi/2) I assembled explicitly.
        let n = params.n;
        let mut dense = vec![0.0; n * n];
        for i in 0..n {
            for j in 0..n {
                let mut btb = 0.0;
                for q in 0..params.p {
                    btb += inst.covariates.data[q * n + i] * inst.covariates.data[q * n + j];
                }
                dense[i * n + j] =
                    inst.matrix_a.get(i, j) + c * btb + if i == j { xi / 2.0 } else { 0.0 };
            }
        }
        for col in 0..n {
            let mut e = vec![0.0; n];
            e[col] = 1.0;
            let got = apply_m(&inst, lambda, mu, gamma, xi, &e).unwrap();
            for i in 0..n {
                assert!(
                    (got[i] - dense[i * n + col]).abs() <= 1e-12,
                    "entry ({i},{col}) differs"
                );
            }
        }
    }

    #[test]
    fn apply_m_mu_zero_is_shifted_matrix() {
        let params = derive_params(30, 20, 4.0, 1.0, 0.0).unwrap();
        let inst = sample_gaussian(&params, 6);
        let x: Vec<f64> = (0..30).map(|i| (i as f64).sin()).collect();
        let got = apply_m(&inst, 1.0, 0.0, params.gamma, 0.8, &x).unwrap();
        let ax = inst.matrix_a.apply(&x);
        for i in 0..30 {
            assert_eq!(got[i], ax[i] + 0.4 * x[i]);
        }
    }

    #[test]
    fn apply_m_rejects_bad_xi() {
        let params = derive_params(10, 10, 4.0, 1.0, 1.0).unwrap();
        let inst = sample_gaussian(&params, 7);
        assert!(apply_m(&inst, 1.0, 1.0, 1.0, 0.0, &vec![0.0; 10]).is_err());
        assert!(apply_m(&inst, 1.0, 1.0, 1.0, -1.0, &vec![0.0; 10]).is_err());
    }

    #[test]
    fn minimize_xi_small_instance() {
        let params = derive_params(120, 120, 4.0, 1.0, 1.0).unwrap();
        let inst = sample_gaussian(&params, 11);
        let problem = SpectralProblem::from_gaussian(&inst);
        let res = minimize_xi(&problem, 1e-6, 1).unwrap();
        assert!(res.xi_star > res.bracket.0 && res.xi_star < res.bracket.1);
        let norm: f64 = res.v_hat.iter().map(|x| x * x).sum::<f64>().sqrt();
        let expect = (params.n as f64).sqrt();
        assert!((norm - expect).abs() < 1e-9 * expect);
        assert_eq!(res.mode, SpectralMode::Interior);
        // Sign convention.
        let first = res.v_hat.iter().find(|x| **x != 0.0).unwrap();
        assert!(*first > 0.0);
    }

    #[test]
    fn degenerate_mu_zero_path() {
        let params = derive_params(80, 60, 4.0, 1.2, 0.0).unwrap();
        let inst = sample_gaussian(&params, 13);
        let problem = SpectralProblem::from_gaussian(&inst);
        assert!(minimize_xi(&problem, 1e-6, 1).is_err());
        let res = spectral_estimate(&problem, 1e-6, 1).unwrap();
        assert_eq!(res.mode, SpectralMode::GraphOnly);
        let direct = lambda_max(
            &crate::eigen::DenseSym { n: 80, data: &inst.matrix_a.data },
            1e-8,
            500,
            3,
        )
        .unwrap();
        assert!((res.t_value - direct.value).abs() < 1e-6);
    }

    #[test]
    fn degenerate_lambda_zero_path() {
        let params = derive_params(40, 50, 4.0, 0.0, 1.5).unwrap();
        let inst = sample_gaussian(&params, 17);
        let problem = SpectralProblem::from_gaussian(&inst);
        let res = spectral_estimate(&problem, 1e-6, 1).unwrap();
        assert_eq!(res.mode, SpectralMode::CovariatesOnly);

        // Oracle: top eigenvalue of B^T B densely.
        let n = params.n;
        let mut btb = vec![0.0; n * n];
        for i in 0..n {
            for j in 0..n {
                let mut acc = 0.0;
                for q in 0..params.p {
                    acc += inst.covariates.data[q * n + i] * inst.covariates.data[q * n + j];
                }
                btb[i * n + j] = acc;
            }
        }
        let dm = nalgebra::DMatrix::from_row_slice(n, n, &btb);
        let top = dm.symmetric_eigen().eigenvalues.iter().cloned().fold(f64::MIN, f64::max);
        assert!((res.t_value - top).abs() < 1e-6 * top);
    }

    #[test]
    fn gaussian_test_strictness() {
        let (lambda, mu, gamma) = (1.0, 0.5, 1.0);
        let threshold = null_threshold(lambda, mu, gamma).unwrap();
        assert_eq!(
            gaussian_test(threshold, lambda, mu, gamma, 0.0).unwrap(),
            Decision::Accept
        );
        assert_eq!(
            gaussian_test(threshold + 1e-9, lambda, mu, gamma, 0.0).unwrap(),
            Decision::Reject
        );
        assert_eq!(
            gaussian_test(threshold + 0.04, lambda, mu, gamma, 0.05).unwrap(),
            Decision::Accept
        );
        assert!(gaussian_test(1.0, 1.0, 1.0, 1.0, -0.1).is_err());
    }
}
