use csbm::fullbp::{fullbp_run, BpConfig};
use csbm::linbp::{linbp_run, LinBpForm};
use csbm::metrics::Decision;
use csbm::model::{derive_params, sample_contextual};
use csbm::rng::derive_seed;

fn main() {
    let gamma: f64 = 0.8;
    let mu_max = gamma.sqrt();
    // Exact criterion-8 grid cells with snr outside (0.7, 1.3).
    let mut cells = Vec::new();
    for k in 0..=10u64 {
        for j in 0..=10u64 {
            let snr = (k * k + j * j) as f64 / 100.0;
            if snr > 1.3 || (snr < 0.7 && snr > 0.45) {
                cells.push((k as f64 / 10.0, mu_max * j as f64 / 10.0, snr));
            }
        }
    }
    cells.sort_by(|a, b| a.2.partial_cmp(&b.2).unwrap());
    for (lambda, mu, snr) in cells {
        let params = derive_params(800, 1000, 5.0, lambda, mu).unwrap();
        let runs = 20;
        let mut s = [[0.0f64; 2]; 2];
        for run in 0..runs {
            let seed = derive_seed(1, (lambda * 1000.0 + mu * 7.0) as u64, run);
            let inst = sample_contextual(&params, seed);
            let lb = linbp_run(&inst, 50, 0.01, derive_seed(seed, 16, 1), LinBpForm::Standard).unwrap();
            let fb = fullbp_run(&inst, &BpConfig::new(&params, 50, 0.01).unwrap(), derive_seed(seed, 17, 1)).unwrap();
            for (ai, out) in [&lb, &fb].into_iter().enumerate() {
                s[ai][0] += if out.decision == Decision::Reject { 1.0 } else { 0.0 };
                s[ai][1] += csbm::metrics::overlap_labels(&out.v_hat, &inst.truth.v).unwrap();
            }
        }
        let r = runs as f64;
        println!(
            "l={lambda:.1} m={mu:.3} snr={snr:.2}:  lin rej={:.2} ov={:.3} | full rej={:.2} ov={:.3}",
            s[0][0] / r, s[0][1] / r, s[1][0] / r, s[1][1] / r
        );
    }
}
