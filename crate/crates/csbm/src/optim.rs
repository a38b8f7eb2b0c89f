//! Small shared optimization helpers.

/// Golden-section search for the minimum of a unimodal `f` on `[lo, hi]`.
///
/// Returns `(x_min, f_min)` once the bracket shrinks below `tol` (absolute)
/// or after `max_iter` shrink steps.
pub(crate) fn golden_min(
    f: impl Fn(f64) -> f64,
    mut lo: f64,
    mut hi: f64,
    tol: f64,
    max_iter: usize,
) -> (f64, f64) {
    const INV_PHI: f64 = 0.618_033_988_749_894_9;
    debug_assert!(lo <= hi);
    let mut x1 = hi - INV_PHI * (hi - lo);
    let mut x2 = lo + INV_PHI * (hi - lo);
    let mut f1 = f(x1);
    let mut f2 = f(x2);
    for _ in 0..max_iter {
        if hi - lo <= tol {
            break;
        }
        if f1 <= f2 {
            hi = x2;
            x2 = x1;
            f2 = f1;
            x1 = hi - INV_PHI * (hi - lo);
            f1 = f(x1);
        } else {
            lo = x1;
            x1 = x2;
            f1 = f2;
            x2 = lo + INV_PHI * (hi - lo);
            f2 = f(x2);
        }
    }
    if f1 <= f2 {
        (x1, f1)
    } else {
        (x2, f2)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn finds_parabola_minimum() {
        let (x, fx) = golden_min(|t| (t - 1.7).powi(2) + 0.25, 0.0, 10.0, 1e-10, 200);
        assert!((x - 1.7).abs() < 1e-8);
        assert!((fx - 0.25).abs() < 1e-12);
    }

    #[test]
    fn respects_bracket() {
        let (x, _) = golden_min(|t| -t, 0.0, 3.0, 1e-12, 300);
        assert!((x - 3.0).abs() < 1e-9);
    }
}
