use csbm::fullbp::{fullbp_run, BpConfig};
use csbm::linbp::{linbp_run, LinBpForm};
use csbm::metrics::Decision;
use csbm::model::{derive_params, sample_contextual};
use csbm::rng::derive_seed;
use std::time::Instant;

fn main() {
    let gamma: f64 = 0.8;
    let cells = [
        (0.0, 0.0),
        (0.2, 0.268), // snr 0.13
        (0.5, 0.447), // snr 0.50
        (0.6, 0.894), // snr 1.36 marginal super
        (0.7, 0.715), // snr 1.13 unconstrained band
        (1.0, 0.894), // snr 2.00
        (1.0, 0.0),   // snr 1.00 boundary
        (0.0, 0.894), // snr 1.00 boundary
    ];
    for (lambda, mu) in cells {
        let t0 = Instant::now();
        let params = derive_params(800, 1000, 5.0, lambda, mu).unwrap();
        let mut stats = [[0.0f64; 3]; 2]; // [alg][reject, overlap, cov]
        let runs = 20;
        for run in 0..runs {
            let seed = derive_seed(7, (lambda * 1000.0) as u64, run);
            let inst = sample_contextual(&params, seed);
            let lb = linbp_run(&inst, 50, 0.01, derive_seed(seed, 16, 1), LinBpForm::Standard).unwrap();
            let fb = fullbp_run(&inst, &BpConfig::new(&params, 50, 0.01).unwrap(), derive_seed(seed, 17, 1)).unwrap();
            for (ai, out) in [lb, fb].into_iter().enumerate() {
                stats[ai][0] += if out.decision == Decision::Reject { 1.0 } else { 0.0 };
                stats[ai][1] += csbm::metrics::overlap_labels(&out.v_hat, &inst.truth.v).unwrap();
                if out.u_hat.iter().any(|&x| x != 0.0) {
                    stats[ai][2] += csbm::metrics::covariate_overlap(&out.u_hat, &inst.truth.u).unwrap();
                }
            }
        }
        let snr = lambda * lambda + mu * mu / gamma;
        println!(
            "({lambda:.2},{mu:.3}) snr={snr:.2}: lin rej={:.2} ov={:.3} | full rej={:.2} ov={:.3} cov={:.3}  [{:?}]",
            stats[0][0] / runs as f64,
            stats[0][1] / runs as f64,
            stats[1][0] / runs as f64,
            stats[1][1] / runs as f64,
            stats[1][2] / runs as f64,
            t0.elapsed()
        );
    }
}
