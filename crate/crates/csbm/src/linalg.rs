//! Dense kernels for the hot loops.
//!
//! Strict sequential `f64` summation blocks autovectorization; the dot
//! product below reassociates into eight accumulator lanes, which is the
//! usual trade for throughput here (results stay deterministic for fixed
//! input).

/// Unrolled dot product.
pub(crate) fn dot(a: &[f64], b: &[f64]) -> f64 {
    debug_assert_eq!(a.len(), b.len());
    let mut acc = [0.0f64; 8];
    let chunks = a.len() / 8;
    let (a8, a_tail) = a.split_at(chunks * 8);
    let (b8, b_tail) = b.split_at(chunks * 8);
    for (ca, cb) in a8.chunks_exact(8).zip(b8.chunks_exact(8)) {
        for k in 0..8 {
            acc[k] += ca[k] * cb[k];
        }
    }
    let mut total = ((acc[0] + acc[1]) + (acc[2] + acc[3]))
        + ((acc[4] + acc[5]) + (acc[6] + acc[7]));
    for (x, y) in a_tail.iter().zip(b_tail) {
        total += x * y;
    }
    total
}

/// `out += c * a`.
pub(crate) fn axpy(out: &mut [f64], c: f64, a: &[f64]) {
    debug_assert_eq!(out.len(), a.len());
    for (o, x) in out.iter_mut().zip(a) {
        *o += c * x;
    }
}

/// Sum of squares.
pub(crate) fn norm_sq(a: &[f64]) -> f64 {
    dot(a, a)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn dot_matches_naive() {
        let a: Vec<f64> = (0..103).map(|i| (i as f64 * 0.37).sin()).collect();
        let b: Vec<f64> = (0..103).map(|i| (i as f64 * 0.11).cos()).collect();
        let naive: f64 = a.iter().zip(&b).map(|(x, y)| x * y).sum();
        assert!((dot(&a, &b) - naive).abs() < 1e-12);
        assert_eq!(dot(&[], &[]), 0.0);
    }

    #[test]
    fn axpy_and_norm() {
        let mut out = vec![1.0, 2.0, 3.0];
        axpy(&mut out, 2.0, &[1.0, 1.0, 1.0]);
        assert_eq!(out, vec![3.0, 4.0, 5.0]);
        assert!((norm_sq(&[3.0, 4.0]) - 25.0).abs() < 1e-15);
    }
}
