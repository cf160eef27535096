//! Small numeric helpers shared by the law evaluators.

use std::f64::consts::{FRAC_1_SQRT_2, PI};

use libm::erfc;

pub fn log_sum_exp(xs: &[f64]) -> f64 {
    let max = xs.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    if max == f64::NEG_INFINITY {
        return f64::NEG_INFINITY;
    }
    if max == f64::INFINITY {
        return f64::INFINITY;
    }
    max + xs.iter().map(|&x| (x - max).exp()).sum::<f64>().ln()
}

/// Standard normal CDF through the complementary error function, accurate in both tails.
pub fn std_normal_cdf(z: f64) -> f64 {
    0.5 * erfc(-z * FRAC_1_SQRT_2)
}

pub fn normal_cdf(x: f64, mean: f64, variance: f64) -> f64 {
    std_normal_cdf((x - mean) / variance.sqrt())
}

pub fn normal_pdf(x: f64, mean: f64, variance: f64) -> f64 {
    let d = x - mean;
    (-0.5 * d * d / variance).exp() / (2.0 * PI * variance).sqrt()
}

/// Poisson probabilities `P(K = 0..)` with mean `lambda`, stopping once the
/// remaining upper tail is below `tail_tol`. Returns the weights and the
/// neglected tail mass.
pub fn poisson_weights(lambda: f64, tail_tol: f64) -> (Vec<f64>, f64) {
    if lambda == 0.0 {
        return (vec![1.0], 0.0);
    }
    let mode = lambda.floor();
    let ln_mode = mode * lambda.ln() - lambda - libm::lgamma(mode + 1.0);
    // walk outward from the mode in linear space to avoid underflow at k = 0
    let m = mode as usize;
    let upper = m + 10 + (12.0 * lambda.sqrt()) as usize + 40;
    let mut w = vec![0.0; upper + 1];
    w[m] = ln_mode.exp();
    for k in (0..m).rev() {
        w[k] = w[k + 1] * (k + 1) as f64 / lambda;
    }
    for k in m + 1..=upper {
        w[k] = w[k - 1] * lambda / k as f64;
    }
    let total: f64 = w.iter().sum();
    let mut acc = 0.0;
    let mut cut = w.len();
    for (k, &p) in w.iter().enumerate() {
        acc += p;
        if k >= m && total - acc < tail_tol {
            cut = k + 1;
            break;
        }
    }
    w.truncate(cut);
    // normalize away the rounding in the mode term
    for x in w.iter_mut() {
        *x /= total;
    }
    let kept: f64 = w.iter().sum();
    (w, (1.0 - kept).max(0.0))
}
