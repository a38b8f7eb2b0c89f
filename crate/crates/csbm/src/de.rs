//! Density evolution: population dynamics for the message-passing state
//! distribution, the induced map on moments, and its stability radius.
//!
//! The law of `(eta, V)` is represented by a particle pool for
//! `eta | V = +1` only; the `V = -1` half is implied by the global sign
//! symmetry. The pool of `(m, U)` pairs keeps `U` alongside each sample so
//! the mixed moment `E[U m]` stays measurable.

use crate::rng::{derive_seed, stream_rng, DE_STEP_BASE};
use crate::{Error, Result};
use rand::Rng;
use rand_distr::{Distribution, Poisson, StandardNormal};
use serde::Serialize;

/// Asymptotic model parameters consumed by density evolution (no finite
/// sizes involved).
#[derive(Debug, Clone, Copy, Serialize)]
pub struct DeParams {
    pub lambda: f64,
    pub mu: f64,
    pub gamma: f64,
    pub d: f64,
}

impl DeParams {
    pub fn new(lambda: f64, mu: f64, gamma: f64, d: f64) -> Result<Self> {
        if !(d >= 1.0) {
            return Err(Error::InvalidParams(format!("need d >= 1 (got {d})")));
        }
        if !(lambda >= 0.0) || lambda > d.sqrt() {
            return Err(Error::InvalidParams(format!(
                "need 0 <= lambda <= sqrt(d) (got lambda={lambda}, d={d})"
            )));
        }
        if !(mu >= 0.0) {
            return Err(Error::InvalidParams(format!("need mu >= 0 (got {mu})")));
        }
        if !(gamma > 0.0) {
            return Err(Error::InvalidParams(format!("need gamma > 0 (got {gamma})")));
        }
        Ok(DeParams { lambda, mu, gamma, d })
    }
}

/// First and second moments of the message laws:
/// `(E[V eta], E[U m], E[eta^2], E[m^2])`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct MomentVector {
    pub m1: f64,
    pub m2: f64,
    pub m3: f64,
    pub m4: f64,
}

impl MomentVector {
    pub const ZERO: MomentVector = MomentVector { m1: 0.0, m2: 0.0, m3: 0.0, m4: 0.0 };

    pub fn as_array(&self) -> [f64; 4] {
        [self.m1, self.m2, self.m3, self.m4]
    }

    pub fn from_array(a: [f64; 4]) -> Self {
        MomentVector { m1: a[0], m2: a[1], m3: a[2], m4: a[3] }
    }

    pub fn norm(&self) -> f64 {
        self.as_array().iter().map(|x| x * x).sum::<f64>().sqrt()
    }

    /// Cauchy-Schwarz feasibility of a moment vector.
    pub fn is_feasible(&self) -> bool {
        self.m3 >= 0.0
            && self.m4 >= 0.0
            && self.m1 * self.m1 <= self.m3 * (1.0 + 1e-12) + 1e-300
            && self.m2 * self.m2 <= self.m4 * (1.0 + 1e-12) + 1e-300
    }

    /// Normalized correlation `m1 / sqrt(m3)` (zero for a zero pool).
    pub fn normalized_correlation(&self) -> f64 {
        if self.m3 <= 0.0 {
            0.0
        } else {
            self.m1 / self.m3.sqrt()
        }
    }
}

/// Exact one-step map on the moment vector induced by the distributional
/// recursion:
///
/// ```text
/// m1' = lambda^2 m1 + (mu/gamma) m2
/// m2' = mu m1
/// m3' = lambda^2 m3 + lambda^4 m1^2 + (2 lambda^2 mu/gamma) m1 m2
///       + (mu/gamma)^2 m2^2 + (mu/gamma) m4
/// m4' = mu^2 m1^2 + mu m3
/// ```
///
/// The linearization at zero is the stability matrix of the recursion; the
/// quadratic terms follow from the compound-Poisson sums and the Gaussian
/// injections, making the map agree with population dynamics exactly (not
/// just to linear order).
pub fn moment_map(m: &MomentVector, lambda: f64, mu: f64, gamma: f64) -> MomentVector {
    let l2 = lambda * lambda;
    let mg = mu / gamma;
    MomentVector {
        m1: l2 * m.m1 + mg * m.m2,
        m2: mu * m.m1,
        m3: l2 * m.m3
            + l2 * l2 * m.m1 * m.m1
            + 2.0 * l2 * mg * m.m1 * m.m2
            + mg * mg * m.m2 * m.m2
            + mg * m.m4,
        m4: mu * mu * m.m1 * m.m1 + mu * m.m3,
    }
}

/// Spectral radius of the moment-map Jacobian at zero: the largest root
/// magnitude of `z^2 - lambda^2 z - mu^2/gamma = 0`.
pub fn jacobian_radius(lambda: f64, mu: f64, gamma: f64) -> f64 {
    assert!(gamma > 0.0, "jacobian_radius: gamma must be positive");
    let l2 = lambda * lambda;
    let disc = (l2 * l2 + 4.0 * mu * mu / gamma).sqrt();
    let z_plus = (l2 + disc) / 2.0;
    let z_minus = (l2 - disc) / 2.0;
    z_plus.abs().max(z_minus.abs())
}

/// Particle pools representing the two message laws.
#[derive(Debug, Clone)]
pub struct DePool {
    pub params: DeParams,
    /// Samples of `eta | V = +1`; the `V = -1` law is its negation.
    pub eta_plus: Vec<f64>,
    /// Samples of `(m, U)` pairs.
    pub m_u: Vec<(f64, f64)>,
}

impl DePool {
    pub fn size(&self) -> usize {
        self.eta_plus.len()
    }
}

/// Builds a pool whose moments match `m`, using Gaussian shapes:
/// `eta|+ ~ N(m1, m3 - m1^2)` and `m|U ~ m2 U + N(0, m4 - m2^2)`.
pub fn pool_from_moments(
    params: &DeParams,
    m: &MomentVector,
    pool_size: usize,
    seed: u64,
) -> Result<DePool> {
    if pool_size == 0 {
        return Err(Error::InvalidParams("pool_size must be positive".into()));
    }
    if !m.is_feasible() {
        return Err(Error::InvalidParams(format!("infeasible moment vector {m:?}")));
    }
    let mut rng = stream_rng(seed, DE_STEP_BASE);
    let sd_eta = (m.m3 - m.m1 * m.m1).max(0.0).sqrt();
    let sd_m = (m.m4 - m.m2 * m.m2).max(0.0).sqrt();
    let eta_plus = (0..pool_size)
        .map(|_| m.m1 + sd_eta * rng.sample::<f64, _>(StandardNormal))
        .collect();
    let m_u = (0..pool_size)
        .map(|_| {
            let u: f64 = rng.sample(StandardNormal);
            (m.m2 * u + sd_m * rng.sample::<f64, _>(StandardNormal), u)
        })
        .collect();
    Ok(DePool { params: *params, eta_plus, m_u })
}

/// Informative initialization with correlation `m1`, aligned with the top
/// eigenvector of the stability matrix so the normalized correlation moves
/// monotonically from the first step: `m2 = mu m1 / R`, `m3 = 1 + m1^2`,
/// `m4 = mu m3 / R` with `R` the Jacobian radius.
pub fn informative_moments(params: &DeParams, m1: f64) -> MomentVector {
    let radius = jacobian_radius(params.lambda, params.mu, params.gamma);
    let m3 = 1.0 + m1 * m1;
    if radius <= f64::EPSILON {
        return MomentVector { m1, m2: 0.0, m3, m4: 0.0 };
    }
    MomentVector { m1, m2: params.mu * m1 / radius, m3, m4: params.mu * m3 / radius }
}

/// One synchronous update of the particle pools. All expectations entering
/// the update are pool averages frozen at step start.
pub fn de_step(pool: &DePool, seed: u64) -> Result<DePool> {
    let n = pool.size();
    if n == 0 || pool.m_u.is_empty() {
        return Err(Error::Numerical("density evolution on an empty pool".into()));
    }
    let p = &pool.params;
    let m = pool_moments(pool);

    // The unconditional mean of eta is identically zero by the sign
    // symmetry; keep the subtraction term literal via the symmetrized pool.
    let e_eta = 0.5 * m.m1 + 0.5 * (-m.m1);

    let rate_plus = p.d / 2.0 + p.lambda * p.d.sqrt() / 2.0;
    let rate_minus = p.d / 2.0 - p.lambda * p.d.sqrt() / 2.0;
    if rate_minus < 0.0 {
        return Err(Error::InvalidParams(format!(
            "negative branching rate: lambda = {} exceeds sqrt(d)",
            p.lambda
        )));
    }
    let pois_plus = (rate_plus > 0.0).then(|| Poisson::new(rate_plus).unwrap());
    let pois_minus = (rate_minus > 0.0).then(|| Poisson::new(rate_minus).unwrap());

    let coef_edge = p.lambda / p.d.sqrt();
    let drift_mean = p.mu / p.gamma * m.m2 - p.lambda * p.d.sqrt() * e_eta;
    let drift_sd = (p.mu / p.gamma * m.m4).max(0.0).sqrt();
    let inj_mean = p.mu * m.m1;
    let inj_sd = (p.mu * m.m3).max(0.0).sqrt();

    let mut rng = stream_rng(seed, DE_STEP_BASE);
    let mut eta_plus = Vec::with_capacity(n);
    for _ in 0..n {
        let mut sum = 0.0;
        if coef_edge != 0.0 {
            let k_plus = pois_plus.as_ref().map_or(0.0, |d| d.sample(&mut rng)) as usize;
            let k_minus = pois_minus.as_ref().map_or(0.0, |d| d.sample(&mut rng)) as usize;
            for _ in 0..k_plus {
                sum += pool.eta_plus[rng.gen_range(0..n)];
            }
            for _ in 0..k_minus {
                sum -= pool.eta_plus[rng.gen_range(0..n)];
            }
        }
        let zeta2: f64 = rng.sample(StandardNormal);
        eta_plus.push(coef_edge * sum + drift_mean + drift_sd * zeta2);
    }

    let m_u = (0..n)
        .map(|_| {
            let u: f64 = rng.sample(StandardNormal);
            let zeta1: f64 = rng.sample(StandardNormal);
            (inj_mean * u + inj_sd * zeta1, u)
        })
        .collect();

    Ok(DePool { params: *p, eta_plus, m_u })
}

/// Pool-average estimates of the moment vector.
pub fn pool_moments(pool: &DePool) -> MomentVector {
    let n = pool.eta_plus.len().max(1) as f64;
    let np = pool.m_u.len().max(1) as f64;
    // E[V eta] = E[eta | V = +1] under the sign symmetry.
    let m1 = pool.eta_plus.iter().sum::<f64>() / n;
    let m3 = pool.eta_plus.iter().map(|x| x * x).sum::<f64>() / n;
    let m2 = pool.m_u.iter().map(|(m, u)| m * u).sum::<f64>() / np;
    let m4 = pool.m_u.iter().map(|(m, _)| m * m).sum::<f64>() / np;
    MomentVector { m1, m2, m3, m4 }
}

/// Standard errors of the four pool-moment estimates.
pub fn pool_moment_std_errors(pool: &DePool) -> [f64; 4] {
    fn se(vals: Vec<f64>) -> f64 {
        let n_f = vals.len() as f64;
        let mean = vals.iter().sum::<f64>() / n_f;
        let var = vals.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n_f - 1.0).max(1.0);
        (var / n_f).sqrt()
    }
    [
        se(pool.eta_plus.clone()),
        se(pool.m_u.iter().map(|(m, u)| m * u).collect()),
        se(pool.eta_plus.iter().map(|x| x * x).collect()),
        se(pool.m_u.iter().map(|(m, _)| m * m).collect()),
    ]
}

/// Initialization for [`de_run`].
#[derive(Debug, Clone)]
pub enum DeInit {
    /// Gaussian pools matching the given moments.
    Moments(MomentVector),
    /// Eigen-aligned informative start with correlation `m1`.
    Informative { m1: f64 },
}

/// Moment trajectory of a population-dynamics run.
#[derive(Debug, Clone, Serialize)]
pub struct DeTrajectory {
    /// Moments at steps `0..=t_max`.
    pub moments: Vec<MomentVector>,
    /// Standard errors of each moment estimate at the same steps.
    pub std_errors: Vec<[f64; 4]>,
}

/// Iterates [`de_step`] `t_max` times, recording pool moments each step.
/// Each step draws from its own stream derived from `(seed, step)`.
pub fn de_run(
    params: &DeParams,
    init: &DeInit,
    t_max: usize,
    pool_size: usize,
    seed: u64,
) -> Result<DeTrajectory> {
    let m0 = match init {
        DeInit::Moments(m) => *m,
        DeInit::Informative { m1 } => informative_moments(params, *m1),
    };
    let mut pool = pool_from_moments(params, &m0, pool_size, seed)?;
    let mut moments = Vec::with_capacity(t_max + 1);
    let mut std_errors = Vec::with_capacity(t_max + 1);
    moments.push(pool_moments(&pool));
    std_errors.push(pool_moment_std_errors(&pool));
    for t in 0..t_max {
        pool = de_step(&pool, derive_seed(seed, t as u64 + 1, 0))?;
        moments.push(pool_moments(&pool));
        std_errors.push(pool_moment_std_errors(&pool));
    }
    Ok(DeTrajectory { moments, std_errors })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn params(lambda: f64, mu: f64, gamma: f64) -> DeParams {
        DeParams::new(lambda, mu, gamma, 5.0).unwrap()
    }

    #[test]
    fn moment_map_fixed_point_and_example() {
        let zero = moment_map(&MomentVector::ZERO, 0.9, 0.9, 0.8);
        assert_eq!(zero, MomentVector::ZERO);

        // Hand-evaluated at lambda^2 = 0.5, mu = 0.6, gamma = 0.8,
        // z = (0.1, 0.2, 0.3, 0.4).
        let m = MomentVector { m1: 0.1, m2: 0.2, m3: 0.3, m4: 0.4 };
        let out = moment_map(&m, 0.5f64.sqrt(), 0.6, 0.8);
        assert!((out.m1 - 0.2).abs() < 1e-12);
        assert!((out.m2 - 0.06).abs() < 1e-12);
        // 0.5*0.3 + 0.25*0.01 + 0.75*0.02 + 0.5625*0.04 + 0.75*0.4
        assert!((out.m3 - 0.49).abs() < 1e-12, "m3 {}", out.m3);
        assert!((out.m4 - 0.1836).abs() < 1e-12);
    }

    #[test]
    fn moment_map_degenerate_informative() {
        // eta|+ = epsilon deterministic, mu = 0: m1' = lambda^2 epsilon and
        // m3' picks up the Poisson fluctuation lambda^2 eps^2 (1 + lambda^2).
        let eps = 1e-3;
        let m = MomentVector { m1: eps, m2: 0.0, m3: eps * eps, m4: 0.0 };
        let out = moment_map(&m, 1.0, 0.0, 1.0);
        assert!((out.m1 - eps).abs() < 1e-15);
        assert_eq!(out.m2, 0.0);
        assert!((out.m3 - 2.0 * eps * eps).abs() < 1e-15);
        assert_eq!(out.m4, 0.0);
    }

    #[test]
    fn moment_map_linearization_matches_stability_matrix() {
        let h = 1e-6;
        let cases = [(0.9, 0.9, 0.8), (0.3, 1.2, 2.0), (1.5, 0.2, 0.5)];
        for &(lambda, mu, gamma) in &cases {
            let expect = [
                [lambda * lambda, mu / gamma, 0.0, 0.0],
                [mu, 0.0, 0.0, 0.0],
                [0.0, 0.0, lambda * lambda, mu / gamma],
                [0.0, 0.0, mu, 0.0],
            ];
            for j in 0..4 {
                let mut plus = [0.0; 4];
                plus[j] = h;
                let mut minus = [0.0; 4];
                minus[j] = -h;
                let fp = moment_map(&MomentVector::from_array(plus), lambda, mu, gamma);
                let fm = moment_map(&MomentVector::from_array(minus), lambda, mu, gamma);
                let col_p = fp.as_array();
                let col_m = fm.as_array();
                for i in 0..4 {
                    let fd = (col_p[i] - col_m[i]) / (2.0 * h);
                    assert!(
                        (fd - expect[i][j]).abs() < 1e-4,
                        "J[{i}][{j}] fd {fd} vs {}",
                        expect[i][j]
                    );
                }
            }
        }
    }

    #[test]
    fn jacobian_radius_examples() {
        assert!((jacobian_radius(1.0, 0.0, 1.0) - 1.0).abs() < 1e-15);
        assert!((jacobian_radius(0.0, 1.0, 1.0) - 1.0).abs() < 1e-15);
        let r = jacobian_radius(0.8, 0.8, 0.8);
        assert!((r - (0.64 + (0.4096f64 + 3.2).sqrt()) / 2.0).abs() < 1e-12);
        assert!((r - 1.2699474).abs() < 1e-6);
    }

    #[test]
    fn radius_crosses_one_exactly_at_threshold() {
        // 50 x 50 grid: radius > 1 iff lambda^2 + mu^2/gamma > 1, away from
        // the boundary by exact-arithmetic tolerance.
        let gamma = 0.8;
        for i in 0..50 {
            for j in 0..50 {
                let lambda = 1.5 * (i as f64 + 1.0) / 50.0;
                let mu = 2.0 * (j as f64 + 1.0) / 50.0;
                let snr = lambda * lambda + mu * mu / gamma;
                if (snr - 1.0).abs() < 1e-12 {
                    continue;
                }
                assert_eq!(jacobian_radius(lambda, mu, gamma) > 1.0, snr > 1.0);
            }
        }
    }

    #[test]
    fn zero_pool_is_fixed() {
        let p = params(0.9, 0.9, 0.8);
        let pool =
            DePool { params: p, eta_plus: vec![0.0; 500], m_u: vec![(0.0, 1.0); 500] };
        let next = de_step(&pool, 1).unwrap();
        assert!(next.eta_plus.iter().all(|&x| x == 0.0));
        assert!(next.m_u.iter().all(|&(m, _)| m == 0.0));
    }

    #[test]
    fn empty_pool_errors() {
        let p = params(0.5, 0.5, 1.0);
        let pool = DePool { params: p, eta_plus: vec![], m_u: vec![] };
        assert!(de_step(&pool, 1).is_err());
    }

    #[test]
    fn degenerate_start_matches_moment_map() {
        // eta|+ identically c, mu = 0: E[V' eta'] = lambda^2 c within three
        // pool standard errors.
        let p = params(0.9, 0.0, 0.8);
        let c = 0.2;
        let n = 100_000;
        let pool = DePool { params: p, eta_plus: vec![c; n], m_u: vec![(0.0, 1.0); n] };
        let next = de_step(&pool, 7).unwrap();
        let m = pool_moments(&next);
        let se = pool_moment_std_errors(&next);
        let expect = p.lambda * p.lambda * c;
        assert!(
            (m.m1 - expect).abs() < 3.0 * se[0],
            "m1 {} vs {} (se {})",
            m.m1,
            expect,
            se[0]
        );
    }

    fn normal_cdf(x: f64, mean: f64, sd: f64) -> f64 {
        // Abramowitz-Stegun 7.1.26 rational approximation of erf.
        let z = (x - mean) / (sd * std::f64::consts::SQRT_2);
        let t = 1.0 / (1.0 + 0.3275911 * z.abs());
        let poly = t
            * (0.254829592
                + t * (-0.284496736 + t * (1.421413741 + t * (-1.453152027 + t * 1.061405429))));
        let erf = 1.0 - poly * (-z * z).exp();
        let erf = if z >= 0.0 { erf } else { -erf };
        0.5 * (1.0 + erf)
    }

    #[test]
    fn lambda_zero_step_is_gaussian() {
        // lambda = 0 removes the branching sums: eta' is exactly Gaussian
        // with mean (mu/gamma) E[Um] and variance (mu/gamma) E[m^2].
        let p = DeParams::new(0.0, 0.8, 0.8, 5.0).unwrap();
        let n = 100_000;
        let init =
            pool_from_moments(&p, &MomentVector { m1: 0.3, m2: 0.2, m3: 0.5, m4: 0.3 }, n, 3)
                .unwrap();
        let frozen = pool_moments(&init);
        let next = de_step(&init, 9).unwrap();

        let mean = p.mu / p.gamma * frozen.m2;
        let sd = (p.mu / p.gamma * frozen.m4).sqrt();
        let mut xs = next.eta_plus.clone();
        xs.sort_by(|a, b| a.partial_cmp(b).unwrap());
        let mut d_stat: f64 = 0.0;
        for (i, &x) in xs.iter().enumerate() {
            let f = normal_cdf(x, mean, sd);
            let lo = i as f64 / n as f64;
            let hi = (i + 1) as f64 / n as f64;
            d_stat = d_stat.max((f - lo).abs()).max((f - hi).abs());
        }
        // Kolmogorov-Smirnov critical value at level 0.01.
        let crit = 1.628 / (n as f64).sqrt();
        assert!(d_stat < crit, "KS statistic {d_stat} above critical {crit}");
    }

    #[test]
    fn pool_moment_estimates() {
        let p = params(0.5, 0.5, 1.0);
        let zero = DePool { params: p, eta_plus: vec![0.0; 10], m_u: vec![(0.0, 0.5); 10] };
        assert_eq!(pool_moments(&zero), MomentVector::ZERO);

        let ones = DePool { params: p, eta_plus: vec![1.0; 10], m_u: vec![(0.0, 1.0); 10] };
        let m = pool_moments(&ones);
        assert_eq!(m.m1, 1.0);
        assert_eq!(m.m3, 1.0);

        // N(0.5, 1) pool: m1 -> 0.5, m3 -> 1.25.
        let n = 100_000;
        let gauss = pool_from_moments(
            &p,
            &MomentVector { m1: 0.5, m2: 0.0, m3: 1.25, m4: 0.0 },
            n,
            21,
        )
        .unwrap();
        let m = pool_moments(&gauss);
        assert!((m.m1 - 0.5).abs() < 3.0 / (n as f64).sqrt());
        assert!((m.m3 - 1.25).abs() < 0.02);
    }

    #[test]
    fn supercritical_correlation_grows_monotonically() {
        let p = params(0.9, 0.9, 0.8);
        let traj = de_run(&p, &DeInit::Informative { m1: 0.1 }, 5, 50_000, 11).unwrap();
        let corr: Vec<f64> = traj.moments.iter().map(|m| m.normalized_correlation()).collect();
        for w in corr.windows(2) {
            assert!(w[1] > w[0], "correlation not increasing: {corr:?}");
        }
    }

    #[test]
    fn subcritical_correlation_decays() {
        let p = params(0.3, 0.3, 0.8);
        let traj = de_run(&p, &DeInit::Informative { m1: 0.1 }, 10, 50_000, 13).unwrap();
        let first = traj.moments[0].normalized_correlation();
        let last = traj.moments[10].normalized_correlation();
        let se = traj.std_errors[10][0] / traj.moments[10].m3.sqrt().max(1e-12);
        assert!(last <= first + 3.0 * se, "corr {last} did not decay below {first}");
    }

    #[test]
    fn population_tracks_moment_map_short_run() {
        // Small-moment regime: three steps of population dynamics agree
        // with the closed-form map within sampling error.
        let p = params(0.9, 0.9, 0.8);
        let m0 = MomentVector { m1: 0.005, m2: 0.005, m3: 0.005, m4: 0.005 };
        let n = 100_000;
        let traj = de_run(&p, &DeInit::Moments(m0), 3, n, 17).unwrap();
        let mut reference = traj.moments[0];
        for t in 1..=3 {
            reference = moment_map(&reference, p.lambda, p.mu, p.gamma);
            let got = traj.moments[t].as_array();
            let want = reference.as_array();
            let se = traj.std_errors[t];
            for k in 0..4 {
                // Noise inherited from earlier steps compounds on top of the
                // current pool standard error.
                let tol = 6.0 * (t as f64).sqrt() * se[k].max(1e-9);
                assert!(
                    (got[k] - want[k]).abs() < tol,
                    "step {t} moment {k}: {} vs {} (tol {tol})",
                    got[k],
                    want[k]
                );
            }
        }
    }
}
