//! Log-domain helpers shared by the weighting objectives.

#[allow(unused_imports)]
use num_traits::Float;

use alloc::vec::Vec;

/// log(sum(exp(x_i))) with max-shift.
pub fn log_sum_exp(values: &[f64]) -> f64 {
    let max = values.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    if !max.is_finite() {
        return max; // empty slice or all -inf
    }
    let sum: f64 = values.iter().map(|&v| (v - max).exp()).sum();
    max + sum.ln()
}

/// log(sum_k w_k * exp(l_k)) for a probability vector `w`.
///
/// The shift is taken over the support of `w` so the sum always contains at
/// least one term of order one; rows where a zero-weight model carries the
/// largest log density cannot drag the mixture to log(0).
pub fn log_mixture(w: &[f64], log_densities: &[f64]) -> f64 {
    debug_assert_eq!(w.len(), log_densities.len());
    let mut max = f64::NEG_INFINITY;
    for (&wk, &lk) in w.iter().zip(log_densities) {
        if wk > 0.0 && lk > max {
            max = lk;
        }
    }
    let mut sum = 0.0;
    for (&wk, &lk) in w.iter().zip(log_densities) {
        if wk > 0.0 {
            sum += wk * (lk - max).exp();
        }
    }
    max + sum.ln()
}

/// Softmax of the negated scores: w_k proportional to exp(-s_k).
///
/// Shifted by the minimum score so no intermediate exponential overflows.
pub fn softmax_neg(scores: &[f64]) -> Vec<f64> {
    let min = scores.iter().cloned().fold(f64::INFINITY, f64::min);
    let mut out: Vec<f64> = scores.iter().map(|&s| (-(s - min)).exp()).collect();
    let total: f64 = out.iter().sum();
    for v in &mut out {
        *v /= total;
    }
    out
}

/// x*log(x) with the 0*log(0) = 0 limit convention.
pub fn xlogx(x: f64) -> f64 {
    if x > 0.0 {
        x * x.ln()
    } else {
        0.0
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use alloc::vec;

    #[test]
    fn log_sum_exp_matches_naive_in_range() {
        let xs = vec![0.3, -1.2, 2.5];
        let naive = xs.iter().map(|x| x.exp()).sum::<f64>().ln();
        assert!((log_sum_exp(&xs) - naive).abs() < 1e-14);
    }

    #[test]
    fn log_sum_exp_no_overflow() {
        let xs = vec![1000.0, 998.0];
        let expected = 1000.0 + (1.0 + (-2.0f64).exp()).ln();
        assert!((log_sum_exp(&xs) - expected).abs() < 1e-12);
    }

    #[test]
    fn log_mixture_ignores_zero_weight_spike() {
        // zero-weight model has the dominating density; the shift must come
        // from the supported model so the sum does not underflow
        let w = vec![0.0, 1.0];
        let l = vec![500.0, -800.0];
        assert!((log_mixture(&w, &l) - (-800.0)).abs() < 1e-12);
    }

    #[test]
    fn softmax_neg_is_shift_invariant() {
        let a = softmax_neg(&[1.0, 3.0, 0.5]);
        let b = softmax_neg(&[601.0, 603.0, 600.5]);
        for (x, y) in a.iter().zip(&b) {
            assert!((x - y).abs() < 1e-14);
        }
    }

    #[test]
    fn xlogx_zero_limit() {
        assert_eq!(xlogx(0.0), 0.0);
    }
}
