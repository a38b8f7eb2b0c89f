use csbm::model::{derive_params, sample_gaussian};
use csbm::spectral::{minimize_xi, SpectralProblem};
use std::time::Instant;

fn main() {
    let n: usize = std::env::args().nth(1).and_then(|s| s.parse().ok()).unwrap_or(2000);
    let params = derive_params(n, n, 5.0, 1.0, 0.5).unwrap();
    let t0 = Instant::now();
    let inst = sample_gaussian(&params, 7);
    println!("sample: {:?}", t0.elapsed());

    let t0 = Instant::now();
    let problem = SpectralProblem::from_gaussian(&inst);
    let res = minimize_xi(&problem, 1e-6, 7).unwrap();
    let dt = t0.elapsed();
    println!(
        "minimize_xi: {:?}, t_value {:.6}, xi* {:.4}, total eig iters {}",
        dt, res.t_value, res.xi_star, res.eig_iters
    );

    // Raw matvec throughput.
    let x = vec![1.0f64; n];
    let t0 = Instant::now();
    let reps = 50;
    let mut acc = 0.0;
    for _ in 0..reps {
        let y = inst.matrix_a.apply(&x);
        acc += y[0];
    }
    let dt = t0.elapsed();
    println!(
        "A*x: {:.3} ms each ({:.2} Gflop/s), checksum {acc:.3}",
        dt.as_secs_f64() * 1000.0 / reps as f64,
        2.0 * (n * n) as f64 * reps as f64 / dt.as_secs_f64() / 1e9
    );
}
