//! Overlap statistics shared by all algorithms.

use crate::{Error, Result};
use serde::Serialize;

/// Normalized label overlap `|<v_hat, v>| / n`.
///
/// Real-valued estimates are first rescaled to `||v_hat||_2 = sqrt(n)` so
/// sign vectors and spectral outputs are comparable; the absolute value
/// makes the metric invariant to the global label swap.
pub fn overlap(v_hat: &[f64], v: &[i8]) -> Result<f64> {
    if v_hat.len() != v.len() {
        return Err(Error::Dimension(format!(
            "overlap: estimate has {} entries, truth has {}",
            v_hat.len(),
            v.len()
        )));
    }
    let norm = v_hat.iter().map(|x| x * x).sum::<f64>().sqrt();
    if norm == 0.0 {
        return Err(Error::Numerical("overlap of a zero estimate".into()));
    }
    let n = v.len() as f64;
    let dot: f64 = v_hat.iter().zip(v).map(|(x, &s)| x * s as f64).sum();
    Ok((dot.abs() / norm) / n.sqrt())
}

/// Overlap for sign-valued estimates, `|sum_i v_hat_i v_i| / n`.
pub fn overlap_labels(v_hat: &[i8], v: &[i8]) -> Result<f64> {
    let as_f64: Vec<f64> = v_hat.iter().map(|&s| s as f64).collect();
    overlap(&as_f64, v)
}

/// Absolute cosine similarity `|<u_hat, u>| / (||u_hat|| ||u||)`.
pub fn covariate_overlap(u_hat: &[f64], u: &[f64]) -> Result<f64> {
    if u_hat.len() != u.len() {
        return Err(Error::Dimension(format!(
            "covariate_overlap: {} vs {} entries",
            u_hat.len(),
            u.len()
        )));
    }
    let na = u_hat.iter().map(|x| x * x).sum::<f64>().sqrt();
    let nb = u.iter().map(|x| x * x).sum::<f64>().sqrt();
    if na == 0.0 || nb == 0.0 {
        return Err(Error::Numerical("covariate overlap of a zero vector".into()));
    }
    let dot: f64 = u_hat.iter().zip(u).map(|(a, b)| a * b).sum();
    Ok((dot / (na * nb)).abs())
}

/// Accept/reject outcome of a detection test.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Decision {
    Accept,
    Reject,
}

/// One row of a per-step trace (the `--trace` CSV schema).
#[derive(Debug, Clone, Copy, Serialize)]
pub struct TraceRow {
    pub step: usize,
    pub eta_norm: f64,
    pub m_norm: f64,
    pub overlap: f64,
    pub cov_overlap: f64,
}

/// Summary of one algorithm run, the unit aggregated by sweeps.
#[derive(Debug, Clone, Serialize)]
pub struct RunSummary {
    pub algorithm: String,
    pub seed: u64,
    pub overlap: f64,
    pub cov_overlap: f64,
    pub decision: Decision,
    #[serde(skip)]
    pub wall_time: std::time::Duration,
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::stream_rng;
    use rand::Rng;

    #[test]
    fn perfect_and_flipped() {
        let v = vec![1i8, -1, 1, 1];
        assert_eq!(overlap_labels(&v, &v).unwrap(), 1.0);
        let flipped: Vec<i8> = v.iter().map(|&x| -x).collect();
        assert_eq!(overlap_labels(&flipped, &v).unwrap(), 1.0);
    }

    #[test]
    fn scale_invariance() {
        let v = vec![1i8, -1, 1, -1, 1, 1];
        let v_hat = vec![0.3, -0.1, 2.0, 0.4, -0.2, 0.9];
        let base = overlap(&v_hat, &v).unwrap();
        for c in [1e-6, 0.5, 3.0, 1e8, -2.0] {
            let scaled: Vec<f64> = v_hat.iter().map(|x| c * x).collect();
            assert!((overlap(&scaled, &v).unwrap() - base).abs() < 1e-12);
        }
    }

    #[test]
    fn random_guess_near_chance() {
        // Independent random signs: folded-normal mean sqrt(2/(pi*n)).
        let n = 10_000;
        let mut rng = stream_rng(1, 0);
        let v: Vec<i8> = (0..n).map(|_| if rng.gen::<bool>() { 1 } else { -1 }).collect();
        let mut acc = 0.0;
        for _ in 0..100 {
            let guess: Vec<i8> = (0..n).map(|_| if rng.gen::<bool>() { 1 } else { -1 }).collect();
            acc += overlap_labels(&guess, &v).unwrap();
        }
        let mean = acc / 100.0;
        let expect = (2.0 / (std::f64::consts::PI * n as f64)).sqrt();
        assert!((mean - expect).abs() < 0.004, "chance overlap {mean} vs {expect}");
    }

    #[test]
    fn cosine_geometry() {
        let u = vec![1.0, 0.0, 0.0];
        assert_eq!(covariate_overlap(&u, &u).unwrap(), 1.0);
        let w = vec![0.0, 1.0, 0.0];
        assert_eq!(covariate_overlap(&w, &u).unwrap(), 0.0);
        // u + w with ||w|| = ||u||, w orthogonal: cosine 1/sqrt(2).
        let mix = vec![1.0, 1.0, 0.0];
        let got = covariate_overlap(&mix, &u).unwrap();
        assert!((got - std::f64::consts::FRAC_1_SQRT_2).abs() < 1e-12);
    }

    #[test]
    fn rejects_zero_vectors() {
        assert!(overlap(&[0.0, 0.0], &[1, 1]).is_err());
        assert!(covariate_overlap(&[0.0], &[1.0]).is_err());
        assert!(covariate_overlap(&[1.0], &[0.0]).is_err());
        assert!(overlap(&[1.0], &[1, -1]).is_err());
    }
}
