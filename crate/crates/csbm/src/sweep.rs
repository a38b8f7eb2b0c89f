//! Phase-diagram experiment harness: a (lambda, mu) grid of message-passing
//! runs with deterministic per-run seeding, aggregated into a versioned CSV
//! plus a manifest echoing the resolved configuration.

use crate::fullbp::{fullbp_run, BpConfig};
use crate::linbp::{linbp_run, LinBpForm};
use crate::metrics::Decision;
use crate::model::{derive_params, sample_contextual};
use crate::rng::derive_seed;
use crate::{Error, Result};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use std::fmt::Write as _;
use std::path::{Path, PathBuf};

/// Inclusive linear grid over one parameter.
#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct GridSpec {
    pub min: f64,
    pub max: f64,
    pub count: usize,
}

impl GridSpec {
    pub fn values(&self) -> Vec<f64> {
        if self.count <= 1 {
            return vec![self.min];
        }
        (0..self.count)
            .map(|k| self.min + (self.max - self.min) * k as f64 / (self.count - 1) as f64)
            .collect()
    }
}

/// Message-passing algorithms the sweep can drive. The spectral estimator
/// runs through the `run` subcommand; the phase-diagram protocol is a BP
/// protocol.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Algorithm {
    Linbp,
    Fullbp,
}

impl Algorithm {
    pub fn name(&self) -> &'static str {
        match self {
            Algorithm::Linbp => "linbp",
            Algorithm::Fullbp => "fullbp",
        }
    }
}

impl std::str::FromStr for Algorithm {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "linbp" => Ok(Algorithm::Linbp),
            "fullbp" => Ok(Algorithm::Fullbp),
            other => Err(Error::Config(format!(
                "unknown sweep algorithm `{other}` (expected linbp|fullbp)"
            ))),
        }
    }
}

/// Resolved sweep configuration (also the manifest payload).
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SweepConfig {
    pub lambda: GridSpec,
    pub mu: GridSpec,
    pub n: usize,
    pub p: usize,
    pub d: f64,
    pub runs: usize,
    pub algorithms: Vec<Algorithm>,
    pub t_max: usize,
    pub init_scale: f64,
    pub seed: u64,
}

impl SweepConfig {
    pub fn validate(&self) -> Result<()> {
        if self.runs == 0 {
            return Err(Error::Config("runs must be >= 1".into()));
        }
        if self.algorithms.is_empty() {
            return Err(Error::Config("no algorithms selected".into()));
        }
        if self.lambda.count == 0 || self.mu.count == 0 {
            return Err(Error::Config("grid counts must be >= 1".into()));
        }
        if self.lambda.min < 0.0 || self.lambda.max > self.d.sqrt() {
            return Err(Error::Config(format!(
                "lambda grid [{}, {}] outside [0, sqrt(d) = {}]",
                self.lambda.min,
                self.lambda.max,
                self.d.sqrt()
            )));
        }
        if self.mu.min < 0.0 {
            return Err(Error::Config("mu grid must be nonnegative".into()));
        }
        // Probe the corner params once so bad dimensions fail fast.
        derive_params(self.n, self.p, self.d, self.lambda.max, self.mu.max)
            .map_err(|e| Error::Config(e.to_string()))?;
        Ok(())
    }

    pub fn gamma(&self) -> f64 {
        self.n as f64 / self.p as f64
    }
}

/// Aggregated statistics of one `(lambda, mu, algorithm)` cell.
#[derive(Debug, Clone, Serialize)]
pub struct SweepRow {
    pub lambda: f64,
    pub mu: f64,
    pub algorithm: Algorithm,
    pub n_runs: usize,
    pub n_failed: usize,
    pub rejection_rate: f64,
    pub mean_overlap: f64,
    pub se_overlap: f64,
    pub mean_cov_overlap: f64,
    pub se_cov_overlap: f64,
}

#[derive(Debug, Clone, Serialize)]
pub struct SweepResult {
    pub rows: Vec<SweepRow>,
    pub total_failed: usize,
}

struct RunStats {
    reject: bool,
    overlap: f64,
    cov_overlap: f64,
}

fn cell_runs(cfg: &SweepConfig, cell: usize, lambda: f64, mu: f64) -> Vec<SweepRow> {
    let params = match derive_params(cfg.n, cfg.p, cfg.d, lambda, mu) {
        Ok(p) => p,
        Err(_) => {
            // Invalid corner (e.g. lambda marginally above sqrt(d) from
            // rounding): report fully-failed rows rather than aborting.
            return cfg
                .algorithms
                .iter()
                .map(|&alg| SweepRow {
                    lambda,
                    mu,
                    algorithm: alg,
                    n_runs: cfg.runs,
                    n_failed: cfg.runs,
                    rejection_rate: 0.0,
                    mean_overlap: 0.0,
                    se_overlap: 0.0,
                    mean_cov_overlap: 0.0,
                    se_cov_overlap: 0.0,
                })
                .collect();
        }
    };

    let mut per_alg: Vec<Vec<RunStats>> =
        cfg.algorithms.iter().map(|_| Vec::with_capacity(cfg.runs)).collect();
    let mut failures = vec![0usize; cfg.algorithms.len()];

    for run in 0..cfg.runs {
        let inst_seed = derive_seed(cfg.seed, cell as u64, run as u64);
        let inst = sample_contextual(&params, inst_seed);
        for (ai, &alg) in cfg.algorithms.iter().enumerate() {
            let alg_seed = derive_seed(inst_seed, 0x10 + ai as u64, 1);
            let outcome = std::panic::catch_unwind(std::panic::AssertUnwindSafe(|| {
                match alg {
                    Algorithm::Linbp => {
                        linbp_run(&inst, cfg.t_max, cfg.init_scale, alg_seed, LinBpForm::Standard)
                    }
                    Algorithm::Fullbp => {
                        let bp_cfg = BpConfig::new(&params, cfg.t_max, cfg.init_scale)?;
                        fullbp_run(&inst, &bp_cfg, alg_seed)
                    }
                }
            }));
            match outcome {
                Ok(Ok(out)) => {
                    let overlap = crate::metrics::overlap_labels(&out.v_hat, &inst.truth.v)
                        .unwrap_or(0.0);
                    let cov = if out.u_hat.iter().any(|&x| x != 0.0) {
                        crate::metrics::covariate_overlap(&out.u_hat, &inst.truth.u)
                            .unwrap_or(0.0)
                    } else {
                        0.0
                    };
                    per_alg[ai].push(RunStats {
                        reject: out.decision == Decision::Reject,
                        overlap,
                        cov_overlap: cov,
                    });
                }
                _ => failures[ai] += 1,
            }
        }
    }

    cfg.algorithms
        .iter()
        .enumerate()
        .map(|(ai, &alg)| {
            let stats = &per_alg[ai];
            let k = stats.len();
            let mean = |f: &dyn Fn(&RunStats) -> f64| -> f64 {
                if k == 0 {
                    0.0
                } else {
                    stats.iter().map(f).sum::<f64>() / k as f64
                }
            };
            let se = |f: &dyn Fn(&RunStats) -> f64, m: f64| -> f64 {
                if k < 2 {
                    0.0
                } else {
                    let var =
                        stats.iter().map(|s| (f(s) - m).powi(2)).sum::<f64>() / (k - 1) as f64;
                    (var / k as f64).sqrt()
                }
            };
            let mo = mean(&|s: &RunStats| s.overlap);
            let mc = mean(&|s: &RunStats| s.cov_overlap);
            SweepRow {
                lambda,
                mu,
                algorithm: alg,
                n_runs: cfg.runs,
                n_failed: failures[ai],
                rejection_rate: mean(&|s: &RunStats| if s.reject { 1.0 } else { 0.0 }),
                mean_overlap: mo,
                se_overlap: se(&|s: &RunStats| s.overlap, mo),
                mean_cov_overlap: mc,
                se_cov_overlap: se(&|s: &RunStats| s.cov_overlap, mc),
            }
        })
        .collect()
}

/// Executes the sweep. Cells run in parallel; each `(cell, run)` pair owns
/// a seed derived from `(base seed, cell index, run index)`, and the same
/// instance is shared by all algorithms of that run. Per-run failures are
/// recorded in the affected row, never aborting the sweep.
pub fn sweep(cfg: &SweepConfig) -> Result<SweepResult> {
    cfg.validate()?;
    let lambdas = cfg.lambda.values();
    let mus = cfg.mu.values();
    let cells: Vec<(usize, f64, f64)> = lambdas
        .iter()
        .enumerate()
        .flat_map(|(ix, &l)| {
            mus.iter().enumerate().map(move |(iy, &m)| (ix * 100_000 + iy, l, m))
        })
        .collect();

    let mut rows: Vec<SweepRow> = cells
        .par_iter()
        .map(|&(cell, l, m)| (cell, cell_runs(cfg, cell, l, m)))
        .collect::<Vec<_>>()
        .into_iter()
        .flat_map(|(_, rows)| rows)
        .collect();
    // Deterministic row order: lambda-major, mu, then algorithm order.
    rows.sort_by(|a, b| {
        a.lambda
            .partial_cmp(&b.lambda)
            .unwrap()
            .then(a.mu.partial_cmp(&b.mu).unwrap())
            .then(a.algorithm.name().cmp(b.algorithm.name()))
    });
    let total_failed = rows.iter().map(|r| r.n_failed).sum();
    Ok(SweepResult { rows, total_failed })
}

/// Renders the versioned CSV (schema `csbm-sweep v1`).
pub fn sweep_csv(cfg: &SweepConfig, result: &SweepResult) -> String {
    let mut out = String::new();
    out.push_str("# csbm-sweep v1\n");
    let _ = writeln!(
        out,
        "# params: n={} p={} d={} gamma={:.6} tmax={} init_scale={:.6} runs={} seed={}",
        cfg.n,
        cfg.p,
        cfg.d,
        cfg.gamma(),
        cfg.t_max,
        cfg.init_scale,
        cfg.runs,
        cfg.seed
    );
    out.push_str(
        "lambda,mu,algorithm,n_runs,n_failed,rejection_rate,mean_overlap,se_overlap,\
         mean_cov_overlap,se_cov_overlap\n",
    );
    for r in &result.rows {
        let _ = writeln!(
            out,
            "{:.6},{:.6},{},{},{},{:.6},{:.6},{:.6},{:.6},{:.6}",
            r.lambda,
            r.mu,
            r.algorithm.name(),
            r.n_runs,
            r.n_failed,
            r.rejection_rate,
            r.mean_overlap,
            r.se_overlap,
            r.mean_cov_overlap,
            r.se_cov_overlap
        );
    }
    out
}

/// Runs the sweep and writes `sweep.csv` plus `manifest.json` into
/// `out_dir`. Returns the result and the CSV path.
pub fn sweep_to_dir(cfg: &SweepConfig, out_dir: &Path) -> Result<(SweepResult, PathBuf)> {
    let result = sweep(cfg)?;
    std::fs::create_dir_all(out_dir)?;
    let csv_path = out_dir.join("sweep.csv");
    std::fs::write(&csv_path, sweep_csv(cfg, &result))?;
    let manifest = serde_json::json!({
        "schema": "csbm-sweep-manifest v1",
        "version": env!("CARGO_PKG_VERSION"),
        "config": cfg,
    });
    std::fs::write(out_dir.join("manifest.json"), serde_json::to_string_pretty(&manifest)?)?;
    Ok((result, csv_path))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn small_cfg() -> SweepConfig {
        SweepConfig {
            lambda: GridSpec { min: 0.2, max: 0.8, count: 2 },
            mu: GridSpec { min: 0.0, max: 0.5, count: 2 },
            n: 60,
            p: 50,
            d: 4.0,
            runs: 3,
            algorithms: vec![Algorithm::Linbp],
            t_max: 5,
            init_scale: 0.01,
            seed: 9,
        }
    }

    #[test]
    fn bookkeeping_2x2_grid() {
        let cfg = small_cfg();
        let result = sweep(&cfg).unwrap();
        assert_eq!(result.rows.len(), 4);
        for row in &result.rows {
            assert_eq!(row.n_runs, 3);
            assert_eq!(row.n_failed, 0);
            assert!(row.rejection_rate >= 0.0 && row.rejection_rate <= 1.0);
        }
    }

    #[test]
    fn rerun_is_byte_identical() {
        let cfg = small_cfg();
        let a = sweep_csv(&cfg, &sweep(&cfg).unwrap());
        let b = sweep_csv(&cfg, &sweep(&cfg).unwrap());
        assert_eq!(a, b);
    }

    #[test]
    fn row_count_scales_with_algorithms() {
        let mut cfg = small_cfg();
        cfg.algorithms = vec![Algorithm::Linbp, Algorithm::Fullbp];
        let result = sweep(&cfg).unwrap();
        assert_eq!(result.rows.len(), 8);
    }

    #[test]
    fn config_validation() {
        let mut cfg = small_cfg();
        cfg.runs = 0;
        assert!(cfg.validate().is_err());
        let mut cfg = small_cfg();
        cfg.lambda.max = 5.0; // above sqrt(d)
        assert!(cfg.validate().is_err());
        let mut cfg = small_cfg();
        cfg.algorithms.clear();
        assert!(cfg.validate().is_err());
    }

    #[test]
    fn seeds_unique_across_cells_and_runs() {
        let cfg = small_cfg();
        let mut seen = std::collections::HashSet::new();
        for cell in 0..4usize {
            for run in 0..cfg.runs {
                assert!(seen.insert(derive_seed(cfg.seed, cell as u64, run as u64)));
            }
        }
    }
}
