use csbm::de::{de_run, jacobian_radius, DeInit, DeParams, MomentVector};
use csbm::fullbp::{fullbp_run, BpConfig};
use csbm::linbp::{linbp_run, LinBpForm};
use csbm::model::{derive_params, sample_contextual};
use csbm::rng::derive_seed;

fn main() {
    let (lambda, mu, gamma) = (0.6, 0.894427, 0.8);
    // DE sign-overlap from a small informative start, run to saturation.
    let p = DeParams::new(lambda, mu, gamma, 5.0).unwrap();
    let radius = jacobian_radius(lambda, mu, gamma);
    let m1 = 0.0035;
    let m0 = MomentVector { m1, m2: mu * m1 / radius, m3: 0.01, m4: mu * 0.01 / radius };
    let traj = de_run(&p, &DeInit::Moments(m0), 50, 200_000, 3).unwrap();
    for t in [10, 25, 50] {
        let m = &traj.moments[t];
        println!("DE t={t}: corr={:.4}", m.normalized_correlation());
    }
    // Sign overlap from the final pool needs the pool itself; rebuild via one
    // more run and estimate sign overlap from corr under a Gaussian shape:
    // E[sgn(eta)V] = erf(corr/sqrt(2(1-corr^2)))-ish; print both.
    let corr = traj.moments[50].normalized_correlation();
    let gauss_sign = {
        let z = corr / (1.0 - corr * corr).sqrt();
        // P(N(z,1) > 0)*2-1 = erf(z/sqrt2)
        let x = z / std::f64::consts::SQRT_2;
        let t = 1.0 / (1.0 + 0.3275911 * x.abs());
        let poly = t * (0.254829592 + t * (-0.284496736 + t * (1.421413741 + t * (-1.453152027 + t * 1.061405429))));
        let erf = (1.0 - poly * (-x * x).exp()) * x.signum();
        erf
    };
    println!("DE corr(50) = {corr:.4}; Gaussian-shape sign overlap ~ {gauss_sign:.4}");

    // Longer BP runs at the same cell.
    let params = derive_params(800, 1000, 5.0, lambda, mu).unwrap();
    for tmax in [50usize, 150] {
        let (mut lo, mut fo) = (0.0, 0.0);
        let runs = 20;
        for run in 0..runs {
            let seed = derive_seed(11, run, 0);
            let inst = sample_contextual(&params, seed);
            let lb = linbp_run(&inst, tmax, 0.01, derive_seed(seed, 16, 1), LinBpForm::Standard).unwrap();
            let fb = fullbp_run(&inst, &BpConfig::new(&params, tmax, 0.01).unwrap(), derive_seed(seed, 17, 1)).unwrap();
            lo += csbm::metrics::overlap_labels(&lb.v_hat, &inst.truth.v).unwrap();
            fo += csbm::metrics::overlap_labels(&fb.v_hat, &inst.truth.v).unwrap();
        }
        println!("T={tmax}: linbp overlap {:.3}, fullbp overlap {:.3}", lo / runs as f64, fo / runs as f64);
    }
    // Bigger n at the same cell, T=50.
    for n in [2000usize, 4000] {
        let p_big = derive_params(n, (n as f64 / gamma) as usize, 5.0, lambda, mu).unwrap();
        let (mut lo, mut fo) = (0.0, 0.0);
        let runs = 8;
        for run in 0..runs {
            let seed = derive_seed(13, run, n as u64);
            let inst = sample_contextual(&p_big, seed);
            let lb = linbp_run(&inst, 50, 0.01, derive_seed(seed, 16, 1), LinBpForm::Standard).unwrap();
            let fb = fullbp_run(&inst, &BpConfig::new(&p_big, 50, 0.01).unwrap(), derive_seed(seed, 17, 1)).unwrap();
            lo += csbm::metrics::overlap_labels(&lb.v_hat, &inst.truth.v).unwrap();
            fo += csbm::metrics::overlap_labels(&fb.v_hat, &inst.truth.v).unwrap();
        }
        println!("n={n}, T=50: linbp {:.3}, fullbp {:.3}", lo / runs as f64, fo / runs as f64);
    }
}
