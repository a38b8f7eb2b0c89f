//! Full nonlinear message passing with the log-odds nonlinearity and
//! adaptive covariate variance.
//!
//! One step evaluates, in order: the new variances `tau'` from the current
//! vertex fields, the covariate fields `m'` (which consume `tau'`), and the
//! vertex/edge fields `eta'` (which consume the stored `tau` of the current
//! step). Linearizing these updates around zero recovers the exact-Onsager
//! linearized algorithm.

use crate::linbp::{estimate_labels, normalize_or_zero, null_test, trace_row, BpRunOutput, MessageState};
use crate::metrics::TraceRow;
use crate::model::{Instance, ModelParams};
use crate::rng::{stream_rng, STREAM_ALG_INIT};
use crate::{Error, Result};
use rand::Rng;
use rand_distr::StandardNormal;

/// Nonlinearity parameters and run settings.
#[derive(Debug, Clone, Copy)]
pub struct BpConfig {
    /// `atanh(lambda / sqrt(d))`: edge coupling.
    pub rho: f64,
    /// `atanh(lambda sqrt(d) / (n - d))`: non-edge coupling.
    pub rho_n: f64,
    pub t_max: usize,
    /// Variance of the random initialization.
    pub init_scale: f64,
}

impl BpConfig {
    pub fn new(params: &ModelParams, t_max: usize, init_scale: f64) -> Result<Self> {
        let ratio = params.lambda / params.d.sqrt();
        if ratio >= 1.0 {
            return Err(Error::InvalidParams(format!(
                "full BP needs lambda < sqrt(d) (got lambda={}, d={})",
                params.lambda, params.d
            )));
        }
        let denom = params.n as f64 - params.d;
        let ratio_n = params.lambda * params.d.sqrt() / denom;
        if !(denom > 0.0) || ratio_n >= 1.0 {
            return Err(Error::InvalidParams(format!(
                "full BP needs lambda sqrt(d) < n - d (got n={}, d={})",
                params.n, params.d
            )));
        }
        if !(init_scale >= 0.0) {
            return Err(Error::InvalidParams("init_scale must be nonnegative".into()));
        }
        Ok(BpConfig { rho: ratio.atanh(), rho_n: ratio_n.atanh(), t_max, init_scale })
    }
}

/// `log(cosh(x))`, overflow-free for large `|x|`.
fn log_cosh(x: f64) -> f64 {
    let a = x.abs();
    a + (-2.0 * a).exp().ln_1p() - std::f64::consts::LN_2
}

/// The saturating edge nonlinearity
/// `f(z; rho) = log(cosh(z + rho) / cosh(z - rho)) / 2`.
///
/// `|f| <= rho` for all `z`, with `f(z) -> sign(z) rho` as `|z| -> inf` and
/// slope `tanh(rho)` at the origin.
pub fn f_rho(z: f64, rho: f64) -> f64 {
    0.5 * (log_cosh(z + rho) - log_cosh(z - rho))
}

/// `sech^2(x)`, overflow-free.
fn sech2(x: f64) -> f64 {
    let e = (-x.abs()).exp();
    let s = 2.0 * e / (1.0 + e * e);
    s * s
}

/// One full BP update. The input state is not mutated.
pub fn fullbp_step(inst: &Instance, state: &MessageState, cfg: &BpConfig) -> Result<MessageState> {
    state.check_shape(inst)?;
    let params = &inst.params;
    let n = params.n;
    let (mu, gamma) = (params.mu, params.gamma);
    let coef_cov = (mu / gamma).sqrt();

    if state.tau.iter().any(|&t| !(t > 0.0)) {
        return Err(Error::Numerical("full BP requires all tau > 0".into()));
    }

    // tau' from the current vertex fields.
    let sech2_eta: Vec<f64> = state.eta.iter().map(|&x| sech2(x)).collect();
    let s_q = inst.covariates.row_sq_sums_weighted_cols(&sech2_eta);
    let mut new_tau = Vec::with_capacity(params.p);
    for (q, &s) in s_q.iter().enumerate() {
        let denom = 1.0 + mu - mu / gamma * s;
        if !(denom > 0.0) {
            return Err(Error::Numerical(format!(
                "tau update non-positive at row {q}: 1 + mu - (mu/gamma) sum B^2 sech^2 = {denom} \
                 (sum = {s})"
            )));
        }
        new_tau.push(1.0 / denom);
    }

    // m' consumes tau'; the memory term reuses the sech^2-weighted sums.
    let tanh_eta: Vec<f64> = state.eta.iter().map(|&x| x.tanh()).collect();
    let b_tanh = inst.covariates.apply(&tanh_eta);
    let m: Vec<f64> = (0..params.p)
        .map(|q| {
            coef_cov / new_tau[q] * b_tanh[q]
                - mu / (gamma * new_tau[q]) * s_q[q] * state.m_prev[q]
        })
        .collect();

    // eta' consumes the stored tau of the current step.
    let bt_m = inst.covariates.apply_t(&state.m);
    let inv_tau: Vec<f64> = state.tau.iter().map(|t| 1.0 / t).collect();
    let w_i = inst.covariates.weighted_col_sq_sums(&inv_tau);
    let tanh_eta_prev: Vec<f64> = state.eta_prev.iter().map(|&x| x.tanh()).collect();
    let f_global: f64 = state.eta.iter().map(|&x| f_rho(x, cfg.rho_n)).sum();

    let mut eta = vec![0.0; n];
    let mut eta_edge = vec![0.0; state.eta_edge.len()];
    for i in 0..n {
        let mut f_in = 0.0;
        for e in inst.graph.incident(i) {
            let f = f_rho(state.eta_edge[e.in_slot], cfg.rho);
            debug_assert!(f.abs() <= cfg.rho + 1e-12);
            f_in += f;
        }
        let vertex =
            coef_cov * bt_m[i] - mu / gamma * w_i[i] * tanh_eta_prev[i] + f_in - f_global;
        eta[i] = vertex;
        for e in inst.graph.incident(i) {
            eta_edge[e.out_slot] = vertex - f_rho(state.eta_edge[e.in_slot], cfg.rho);
        }
    }

    Ok(MessageState {
        eta,
        eta_edge,
        m,
        tau: new_tau,
        eta_prev: state.eta.clone(),
        eta_edge_prev: state.eta_edge.clone(),
        m_prev: state.m.clone(),
        step: state.step + 1,
    })
}

/// Random start following the experimental protocol: current *and*
/// previous iterates i.i.d. `N(0, init_scale)`, `tau = 1`.
pub fn fullbp_init(inst: &Instance, init_scale: f64, seed: u64) -> MessageState {
    let mut state = MessageState::zero(inst);
    let sd = init_scale.sqrt();
    let mut rng = stream_rng(seed, STREAM_ALG_INIT);
    for slot in [
        &mut state.eta,
        &mut state.eta_prev,
        &mut state.eta_edge,
        &mut state.eta_edge_prev,
        &mut state.m,
        &mut state.m_prev,
    ] {
        for x in slot.iter_mut() {
            *x = sd * rng.sample::<f64, _>(StandardNormal);
        }
    }
    state
}

/// Runs full BP for `cfg.t_max` steps from a random start, returning the
/// sign estimate, the normalized covariate estimate, and the trace.
pub fn fullbp_run(inst: &Instance, cfg: &BpConfig, seed: u64) -> Result<BpRunOutput> {
    let state = fullbp_init(inst, cfg.init_scale, seed);
    fullbp_run_from(inst, state, cfg)
}

/// Runs full BP from the given state.
pub fn fullbp_run_from(
    inst: &Instance,
    mut state: MessageState,
    cfg: &BpConfig,
) -> Result<BpRunOutput> {
    let norm0 = state.eta_norm();
    let mut trace: Vec<TraceRow> = Vec::with_capacity(cfg.t_max + 1);
    trace.push(trace_row(inst, &state));
    let mut saturated = false;
    for _ in 0..cfg.t_max {
        state = fullbp_step(inst, &state, cfg)?;
        // tanh/sech saturate beyond this; benign, but worth surfacing.
        saturated |= state.eta.iter().any(|x| x.abs() > 50.0);
        trace.push(trace_row(inst, &state));
    }
    let decision = null_test(norm0, state.eta_norm());
    let v_hat = estimate_labels(&state.eta);
    let u_hat = normalize_or_zero(&state.m);
    Ok(BpRunOutput { state, trace, norm0, decision, v_hat, u_hat, saturated })
}
