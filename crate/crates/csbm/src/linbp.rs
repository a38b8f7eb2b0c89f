//! Linearized approximate message passing on a sampled instance.
//!
//! Each step updates a vertex field, directed-edge messages, and a
//! covariate field, keeping one previous iterate for the memory terms:
//!
//! ```text
//! eta'[i->j] = sqrt(mu/gamma) (B^T m)[i] - (mu/gamma) eta_prev[i]
//!              + (lambda/sqrt(d)) sum_{k in di\j} eta[k->i]
//!              - (lambda sqrt(d)/n) sum_k eta[k]
//! eta'[i]    = same without the backtracking exclusion
//! m'         = sqrt(mu/gamma) B eta - mu m_prev
//! ```
//!
//! At `mu = 0` the edge update is the power method on the nonbacktracking
//! walk operator; at `lambda = 0` it is power iteration on the covariates.

use crate::metrics::{covariate_overlap, overlap_labels, Decision, TraceRow};
use crate::model::Instance;
use crate::rng::{stream_rng, STREAM_ALG_INIT};
use crate::{Error, Result};
use rand::Rng;
use rand_distr::StandardNormal;

/// All message-passing iterates at one time step, plus the previous-step
/// copies consumed by the memory terms.
///
/// `tau` stays at its initial value 1 for the standard linearized update;
/// the exact-Onsager variant and full BP maintain it.
#[derive(Debug, Clone, PartialEq)]
pub struct MessageState {
    pub eta: Vec<f64>,
    pub eta_edge: Vec<f64>,
    pub m: Vec<f64>,
    pub tau: Vec<f64>,
    pub eta_prev: Vec<f64>,
    pub eta_edge_prev: Vec<f64>,
    pub m_prev: Vec<f64>,
    pub step: usize,
}

impl MessageState {
    /// All-zero state shaped for `inst`, with `tau = 1`.
    pub fn zero(inst: &Instance) -> Self {
        let n = inst.params.n;
        let p = inst.params.p;
        let ne = inst.graph.num_directed();
        MessageState {
            eta: vec![0.0; n],
            eta_edge: vec![0.0; ne],
            m: vec![0.0; p],
            tau: vec![1.0; p],
            eta_prev: vec![0.0; n],
            eta_edge_prev: vec![0.0; ne],
            m_prev: vec![0.0; p],
            step: 0,
        }
    }

    /// Random start: `eta, eta_edge, m ~ N(0, init_scale)` i.i.d. (variance
    /// `init_scale`), previous iterates zero.
    pub fn random_init(inst: &Instance, init_scale: f64, seed: u64) -> Self {
        let mut state = Self::zero(inst);
        let sd = init_scale.sqrt();
        let mut rng = stream_rng(seed, STREAM_ALG_INIT);
        for x in state.eta.iter_mut() {
            *x = sd * rng.sample::<f64, _>(StandardNormal);
        }
        for x in state.eta_edge.iter_mut() {
            *x = sd * rng.sample::<f64, _>(StandardNormal);
        }
        for x in state.m.iter_mut() {
            *x = sd * rng.sample::<f64, _>(StandardNormal);
        }
        state
    }

    /// Truth-correlated start matching the asymptotic law with moments
    /// `(m1, m2, m3, m4)`: vertex and edge fields are `v_i`-signed draws of
    /// `N(m1, m3 - m1^2)`, covariate fields condition on `sqrt(p) u_r`.
    pub fn informative_init(
        inst: &Instance,
        moments: &crate::de::MomentVector,
        seed: u64,
    ) -> Self {
        let mut state = Self::zero(inst);
        let mut rng = stream_rng(seed, STREAM_ALG_INIT);
        let sd_eta = (moments.m3 - moments.m1 * moments.m1).max(0.0).sqrt();
        let sd_m = (moments.m4 - moments.m2 * moments.m2).max(0.0).sqrt();
        let owner = inst.graph.slot_owner();
        for (i, x) in state.eta.iter_mut().enumerate() {
            let sign = inst.truth.v[i] as f64;
            *x = sign * (moments.m1 + sd_eta * rng.sample::<f64, _>(StandardNormal));
        }
        for (t, x) in state.eta_edge.iter_mut().enumerate() {
            let sign = inst.truth.v[owner[t] as usize] as f64;
            *x = sign * (moments.m1 + sd_eta * rng.sample::<f64, _>(StandardNormal));
        }
        let sqrt_p = (inst.params.p as f64).sqrt();
        for (r, x) in state.m.iter_mut().enumerate() {
            let u_r = sqrt_p * inst.truth.u[r];
            *x = moments.m2 * u_r + sd_m * rng.sample::<f64, _>(StandardNormal);
        }
        state
    }

    pub fn eta_norm(&self) -> f64 {
        self.eta.iter().map(|x| x * x).sum::<f64>().sqrt()
    }

    pub fn m_norm(&self) -> f64 {
        self.m.iter().map(|x| x * x).sum::<f64>().sqrt()
    }

    pub(crate) fn check_shape(&self, inst: &Instance) -> Result<()> {
        if self.eta.len() != inst.params.n
            || self.eta_edge.len() != inst.graph.num_directed()
            || self.m.len() != inst.params.p
        {
            return Err(Error::Dimension(format!(
                "state ({} vertices, {} edge slots, {} covariates) does not index instance \
                 ({}, {}, {})",
                self.eta.len(),
                self.eta_edge.len(),
                self.m.len(),
                inst.params.n,
                inst.graph.num_directed(),
                inst.params.p
            )));
        }
        Ok(())
    }
}

/// Which memory normalization the linearized update uses.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum LinBpForm {
    /// Law-of-large-numbers simplification: memory coefficients `mu/gamma`
    /// and `mu`, `tau` pinned at 1.
    #[default]
    Standard,
    /// Exact Onsager coefficients weighted by the realized `sum_q B_qi^2 /
    /// tau_q` column sums (the pre-simplification form).
    ExactOnsager,
}

/// One linearized update. The input state is not mutated.
pub fn linbp_step(inst: &Instance, state: &MessageState, form: LinBpForm) -> Result<MessageState> {
    state.check_shape(inst)?;
    let params = &inst.params;
    let n = params.n;
    let (lambda, mu, gamma, d) = (params.lambda, params.mu, params.gamma, params.d);
    let coef_cov = (mu / gamma).sqrt();
    let coef_edge = lambda / d.sqrt();
    let coef_global = lambda * d.sqrt() / n as f64;

    let bt_m = inst.covariates.apply_t(&state.m);
    let sum_global: f64 = state.eta.iter().sum();

    // Memory weights for the vertex update and the new tau vector.
    let (mem_weight, new_tau, row_sq): (Vec<f64>, Vec<f64>, Option<Vec<f64>>) = match form {
        LinBpForm::Standard => (vec![mu / gamma; n], state.tau.clone(), None),
        LinBpForm::ExactOnsager => {
            let inv_tau: Vec<f64> = state.tau.iter().map(|t| 1.0 / t).collect();
            let weighted = inst.covariates.weighted_col_sq_sums(&inv_tau);
            let row_sq = inst.covariates.row_sq_sums();
            let tau: Vec<f64> =
                row_sq.iter().map(|s| 1.0 / (1.0 + mu - mu / gamma * s)).collect();
            (weighted.iter().map(|w| mu / gamma * w).collect(), tau, Some(row_sq))
        }
    };

    let mut eta = vec![0.0; n];
    let mut eta_edge = vec![0.0; state.eta_edge.len()];
    for i in 0..n {
        let sum_in: f64 = inst.graph.incident(i).map(|e| state.eta_edge[e.in_slot]).sum();
        let vertex = coef_cov * bt_m[i] - mem_weight[i] * state.eta_prev[i]
            + coef_edge * sum_in
            - coef_global * sum_global;
        eta[i] = vertex;
        for e in inst.graph.incident(i) {
            eta_edge[e.out_slot] = vertex - coef_edge * state.eta_edge[e.in_slot];
        }
    }

    let b_eta = inst.covariates.apply(&state.eta);
    let m: Vec<f64> = match form {
        LinBpForm::Standard => b_eta
            .iter()
            .zip(&state.m_prev)
            .map(|(be, mp)| coef_cov * be - mu * mp)
            .collect(),
        LinBpForm::ExactOnsager => {
            let row_sq = row_sq.expect("row sums computed above");
            (0..params.p)
                .map(|q| {
                    coef_cov / new_tau[q] * b_eta[q]
                        - mu / (gamma * new_tau[q]) * row_sq[q] * state.m_prev[q]
                })
                .collect()
        }
    };

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

/// Sign estimate of the labels, with `sgn(0) = +1` so estimates are
/// deterministic.
pub fn estimate_labels(eta: &[f64]) -> Vec<i8> {
    eta.iter().map(|&x| if x < 0.0 { -1i8 } else { 1i8 }).collect()
}

/// Norm-growth null test: reject when the field norm strictly grew.
pub fn null_test(norm0: f64, norm_t: f64) -> Decision {
    if norm_t > norm0 {
        Decision::Reject
    } else {
        Decision::Accept
    }
}

/// Output of a message-passing run.
#[derive(Debug, Clone)]
pub struct BpRunOutput {
    pub state: MessageState,
    pub trace: Vec<TraceRow>,
    /// `||eta^0||_2`, the reference for the null test.
    pub norm0: f64,
    pub decision: Decision,
    pub v_hat: Vec<i8>,
    /// `m^T / ||m^T||`, or zeros when the covariate field vanished.
    pub u_hat: Vec<f64>,
    /// Set when `||eta||_inf` exceeded the saturation guard at any step.
    pub saturated: bool,
}

pub(crate) fn trace_row(inst: &Instance, state: &MessageState) -> TraceRow {
    let overlap = overlap_labels(&estimate_labels(&state.eta), &inst.truth.v).unwrap_or(0.0);
    let m_norm = state.m_norm();
    let cov_overlap = if m_norm > 0.0 {
        covariate_overlap(&state.m, &inst.truth.u).unwrap_or(0.0)
    } else {
        0.0
    };
    TraceRow { step: state.step, eta_norm: state.eta_norm(), m_norm, overlap, cov_overlap }
}

pub(crate) fn normalize_or_zero(m: &[f64]) -> Vec<f64> {
    let norm = m.iter().map(|x| x * x).sum::<f64>().sqrt();
    if norm > 0.0 {
        m.iter().map(|x| x / norm).collect()
    } else {
        vec![0.0; m.len()]
    }
}

/// Runs `t_max` linearized steps from a random `N(0, init_scale)` start
/// (previous iterates zero) and applies the null test on `||eta||`.
pub fn linbp_run(
    inst: &Instance,
    t_max: usize,
    init_scale: f64,
    seed: u64,
    form: LinBpForm,
) -> Result<BpRunOutput> {
    let state = MessageState::random_init(inst, init_scale, seed);
    linbp_run_from(inst, state, t_max, form)
}

/// Runs `t_max` linearized steps from the given state.
pub fn linbp_run_from(
    inst: &Instance,
    mut state: MessageState,
    t_max: usize,
    form: LinBpForm,
) -> Result<BpRunOutput> {
    let norm0 = state.eta_norm();
    let mut trace = Vec::with_capacity(t_max + 1);
    trace.push(trace_row(inst, &state));
    let mut saturated = false;
    for _ in 0..t_max {
        state = linbp_step(inst, &state, form)?;
        saturated |= state.eta.iter().any(|x| x.abs() > 50.0);
        trace.push(trace_row(inst, &state));
    }
    let decision = null_test(norm0, state.eta_norm());
    let v_hat = estimate_labels(&state.eta);
    let u_hat = normalize_or_zero(&state.m);
    Ok(BpRunOutput { state, trace, norm0, decision, v_hat, u_hat, saturated })
}
