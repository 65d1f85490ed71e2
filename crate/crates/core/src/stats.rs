//! Small statistical helpers: normal tails, sample moments.

/// Standard normal CDF, accurate in both tails.
pub fn normal_cdf(x: f64) -> f64 {
    if x == f64::INFINITY {
        return 1.0;
    }
    if x == f64::NEG_INFINITY {
        return 0.0;
    }
    0.5 * libm::erfc(-x / core::f64::consts::SQRT_2)
}

/// Upper tail `1 - Phi(x)` without cancellation.
pub fn normal_sf(x: f64) -> f64 {
    normal_cdf(-x)
}

/// Mean and unbiased sample standard deviation (two-pass).
pub fn mean_sd(xs: &[f64]) -> (f64, f64) {
    let n = xs.len();
    if n == 0 {
        return (f64::NAN, f64::NAN);
    }
    let mean = xs.iter().sum::<f64>() / n as f64;
    if n == 1 {
        return (mean, f64::NAN);
    }
    let ss: f64 = xs.iter().map(|x| (x - mean) * (x - mean)).sum();
    (mean, libm::sqrt(ss / (n - 1) as f64))
}

/// Mean and standard error of the mean.
pub fn mean_se(xs: &[f64]) -> (f64, f64) {
    let (m, sd) = mean_sd(xs);
    (m, sd / libm::sqrt(xs.len() as f64))
}
