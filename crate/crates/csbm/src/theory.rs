//! Closed-form predictions: the detection threshold, the scalar `G`
//! function describing deformed-noise spectra, and the asymptotic value of
//! the coupled graph/covariate optimization problem.

use crate::optim::golden_min;
use crate::{Error, Result};
use serde::Serialize;

/// Parameters of the coupled comparison problem.
///
/// `rho` and `tau` scale the symmetric-matrix and covariate noise (both 1 in
/// the standard instantiation), `b` weights the covariate term. Setting
/// `b = b_star * sqrt(gamma)` at `rho = tau = 1` makes [`predicted_opt`]
/// evaluate the statistic of the spectral detection test: the identity
/// `sqrt(4 + b^2) + b / sqrt(gamma) = 2 sqrt(1 + b_star^2 gamma / 4) + b_star`
/// connects the two normalizations.
#[derive(Debug, Clone, Copy, Serialize)]
pub struct ComparisonParams {
    pub lambda: f64,
    pub mu: f64,
    pub gamma: f64,
    pub b: f64,
    pub rho: f64,
    pub tau: f64,
}

impl ComparisonParams {
    pub fn new(lambda: f64, mu: f64, gamma: f64, b: f64, rho: f64, tau: f64) -> Result<Self> {
        if !(gamma > 0.0) {
            return Err(Error::InvalidParams(format!("need gamma > 0 (got {gamma})")));
        }
        if !(rho > 0.0) || !(tau > 0.0) {
            return Err(Error::InvalidParams(format!("need rho, tau > 0 (got {rho}, {tau})")));
        }
        if !(b >= 0.0) || !(lambda >= 0.0) || !(mu >= 0.0) {
            return Err(Error::InvalidParams("need b, lambda, mu >= 0".into()));
        }
        Ok(ComparisonParams { lambda, mu, gamma, b, rho, tau })
    }

    /// Standard instantiation matching the spectral test on model data:
    /// `rho = tau = 1`, `b = 2 mu / (lambda sqrt(gamma))`.
    pub fn from_model(lambda: f64, mu: f64, gamma: f64) -> Result<Self> {
        if !(lambda > 0.0) {
            return Err(Error::InvalidParams(
                "the coupled test needs lambda > 0 (covariate-only detection is spectral PCA)"
                    .into(),
            ));
        }
        let b = 2.0 * mu / (lambda * gamma.sqrt());
        ComparisonParams::new(lambda, mu, gamma, b, 1.0, 1.0)
    }
}

/// Asymptotic top-eigenvalue functional of a rank-one deformed noise matrix:
/// `G(kappa, sigma^2) = kappa/2 + sigma^2/(2 kappa)` once the deformation
/// `kappa` exceeds the noise scale `sigma`, and `sigma` below it.
///
/// Only `kappa >= 0` occurs in the minimizations here; negative `kappa` is
/// rejected rather than guessing an extension.
pub fn g_fn(kappa: f64, sigma2: f64) -> f64 {
    assert!(kappa >= 0.0, "g_fn: kappa must be nonnegative (got {kappa})");
    assert!(sigma2 >= 0.0, "g_fn: sigma2 must be nonnegative (got {sigma2})");
    if kappa * kappa >= sigma2 && kappa > 0.0 {
        kappa / 2.0 + sigma2 / (2.0 * kappa)
    } else {
        sigma2.sqrt()
    }
}

/// Partial derivative of [`g_fn`] in its first argument; `2 * g_prime` is
/// the asymptotic squared overlap of the top eigenvector with the planted
/// direction.
pub fn g_prime(kappa: f64, sigma2: f64) -> f64 {
    assert!(kappa >= 0.0, "g_prime: kappa must be nonnegative (got {kappa})");
    assert!(sigma2 >= 0.0, "g_prime: sigma2 must be nonnegative (got {sigma2})");
    if kappa > 0.0 && kappa * kappa > sigma2 {
        0.5 - sigma2 / (2.0 * kappa * kappa)
    } else {
        0.0
    }
}

/// Result of the one-dimensional minimization in [`predicted_opt`].
#[derive(Debug, Clone, Copy, Serialize)]
pub struct OptOutcome {
    /// Minimum value of the objective.
    pub value: f64,
    /// Location of the minimum (a representative point when the minimum is
    /// attained on a flat set or a boundary ray).
    pub t_star: f64,
    /// True when the minimizer is an isolated interior stationary point;
    /// false on plateaus and boundary rays.
    pub interior: bool,
}

const T_GRID_LO: f64 = 1e-6;
const T_GRID_HI: f64 = 1e6;
const T_GRID_POINTS: usize = 200;

/// Asymptotic optimal value of the coupled problem:
/// `min_{t >= 0} G(2 lambda + b mu t, 4 rho + b^2 tau) + G(b/t, b^2 gamma tau) / gamma`.
///
/// The objective is piecewise smooth with kinks where either `G` switches
/// branch; a log-spaced scan plus golden-section refinement locates the
/// minimum, and when both kinks bracket an interior stationary point the
/// search is repeated inside that bracket so near-critical parameters
/// resolve correctly.
pub fn predicted_opt(cp: &ComparisonParams) -> OptOutcome {
    let s2 = 4.0 * cp.rho + cp.b * cp.b * cp.tau;
    let r2 = cp.b * cp.b * cp.gamma * cp.tau;
    let objective = |t: f64| -> f64 {
        let second = if cp.b == 0.0 { 0.0 } else { g_fn(cp.b / t, r2) / cp.gamma };
        g_fn(2.0 * cp.lambda + cp.b * cp.mu * t, s2) + second
    };

    if cp.b == 0.0 || cp.b * cp.mu == 0.0 {
        // First term constant in t (or whole objective constant): the second
        // term decreases to its floor sqrt(r2)/gamma on the ray t >= b/sqrt(r2).
        let t_flat = if cp.b > 0.0 { (cp.b / r2.sqrt()).max(1.0) } else { 1.0 };
        return OptOutcome { value: objective(t_flat), t_star: t_flat, interior: false };
    }

    // Branch-switch points of the two G terms.
    let s = s2.sqrt();
    let r = r2.sqrt();
    let t1 = (s - 2.0 * cp.lambda) / (cp.b * cp.mu);
    let t2 = cp.b / r; // = 1/sqrt(gamma tau)

    if t1 >= t2 {
        // Both terms sit on their flat branches over [t2, t1]: the minimum
        // is the exact plateau value.
        let t_mid = (t2.max(T_GRID_LO) * t1.min(T_GRID_HI)).sqrt();
        return OptOutcome { value: s + r / cp.gamma, t_star: t_mid, interior: false };
    }

    // Coarse scan for a safe global bracket.
    let ratio = (T_GRID_HI / T_GRID_LO).powf(1.0 / (T_GRID_POINTS as f64 - 1.0));
    let mut best_k = 0;
    let mut best_val = f64::INFINITY;
    let mut t = T_GRID_LO;
    let mut grid = Vec::with_capacity(T_GRID_POINTS);
    for k in 0..T_GRID_POINTS {
        grid.push(t);
        let val = objective(t);
        if val < best_val {
            best_val = val;
            best_k = k;
        }
        t *= ratio;
    }
    let lo = grid[best_k.saturating_sub(1)];
    let hi = grid[(best_k + 1).min(T_GRID_POINTS - 1)];
    let (mut t_star, mut value) = golden_min(objective, lo, hi, 1e-12 * hi, 300);

    // Refine inside the kink bracket (t1, t2), where the interior stationary
    // point lives whenever it exists.
    let blo = t1.max(T_GRID_LO * 1e-3);
    if blo < t2 {
        let (tb, vb) = golden_min(objective, blo, t2, f64::EPSILON * t2, 400);
        if vb <= value {
            t_star = tb;
            value = vb;
        }
    }

    let interior = t_star > grid[0] * 1.0001 && t_star < grid[T_GRID_POINTS - 1] * 0.9999;
    OptOutcome { value, t_star, interior }
}

/// Detection/weak-recovery threshold predicate: `lambda^2 + mu^2/gamma > 1`
/// (strict).
pub fn threshold(lambda: f64, mu: f64, gamma: f64) -> bool {
    assert!(gamma > 0.0, "threshold: gamma must be positive");
    lambda * lambda + mu * mu / gamma > 1.0
}

/// Asymptotic value of the coupled statistic on null data,
/// `2 sqrt(1 + b_star^2 gamma/4) + b_star` in the unit-sphere normalization.
pub fn null_value(cp: &ComparisonParams) -> f64 {
    (4.0 * cp.rho + cp.b * cp.b * cp.tau).sqrt() + cp.b * (cp.tau / cp.gamma).sqrt()
}

/// Decides supercriticality through the optimization route: true when the
/// minimizer `t_star` of the coupled objective (at `rho = tau = 1`,
/// `b = b_star sqrt(gamma)`) has the first `G` on its rising branch.
///
/// Agrees with [`threshold`] everywhere; the two predicates take entirely
/// different computational paths.
pub fn supercriticality_check(lambda: f64, mu: f64, gamma: f64) -> Result<bool> {
    if !(lambda > 0.0) || !(mu > 0.0) {
        return Err(Error::InvalidParams(
            "supercriticality_check needs lambda > 0 and mu > 0".into(),
        ));
    }
    let cp = ComparisonParams::from_model(lambda, mu, gamma)?;
    let opt = predicted_opt(&cp);
    let s2 = 4.0 * cp.rho + cp.b * cp.b * cp.tau;
    Ok(g_prime(2.0 * cp.lambda + cp.b * cp.mu * opt.t_star, s2) > 0.0)
}

/// Stationarity residual of the coupled objective at `t`; vanishes at an
/// interior minimizer.
pub fn stationarity_residual(cp: &ComparisonParams, t: f64) -> f64 {
    let s2 = 4.0 * cp.rho + cp.b * cp.b * cp.tau;
    let r2 = cp.b * cp.b * cp.gamma * cp.tau;
    cp.b * cp.mu * g_prime(2.0 * cp.lambda + cp.b * cp.mu * t, s2)
        - cp.b / (cp.gamma * t * t) * g_prime(cp.b / t, r2)
}
