//! Small numerical helpers shared across modules.

use statrs::function::erf::erfc;

const SQRT_2: f64 = std::f64::consts::SQRT_2;
const INV_SQRT_2PI: f64 = 0.398_942_280_401_432_7;

/// Standard normal cumulative distribution function.
#[inline]
pub fn norm_cdf(x: f64) -> f64 {
    0.5 * erfc(-x / SQRT_2)
}

/// Standard normal density.
#[inline]
pub fn norm_pdf(x: f64) -> f64 {
    INV_SQRT_2PI * (-0.5 * x * x).exp()
}

/// E[(mu + sigma Z)_+] for Z standard normal.
#[inline]
pub fn expected_positive_part(mu: f64, sigma: f64) -> f64 {
    if sigma <= 1e-300 {
        mu.max(0.0)
    } else {
        let z = mu / sigma;
        mu * norm_cdf(z) + sigma * norm_pdf(z)
    }
}

/// phi1(k, s) = integral_0^s exp(-k u) du = (1 - e^{-ks}) / k, stable at k -> 0.
#[inline]
pub fn phi1(k: f64, s: f64) -> f64 {
    if k == 0.0 {
        s
    } else {
        -(-k * s).exp_m1() / k
    }
}

/// Mean and sample standard error of a slice.
pub fn mean_and_se(xs: &[f64]) -> (f64, f64) {
    let n = xs.len();
    assert!(n > 1, "need at least two samples");
    let mean = xs.iter().sum::<f64>() / n as f64;
    let var = xs.iter().map(|x| (x - mean) * (x - mean)).sum::<f64>() / (n as f64 - 1.0);
    (mean, (var / n as f64).sqrt())
}

/// Ordinary least-squares slope of y on x with a 95% half-width for the slope.
pub fn ols_slope(x: &[f64], y: &[f64]) -> (f64, f64) {
    assert_eq!(x.len(), y.len());
    let n = x.len() as f64;
    let mx = x.iter().sum::<f64>() / n;
    let my = y.iter().sum::<f64>() / n;
    let sxx: f64 = x.iter().map(|v| (v - mx) * (v - mx)).sum();
    let sxy: f64 = x.iter().zip(y).map(|(a, b)| (a - mx) * (b - my)).sum();
    let slope = sxy / sxx;
    let intercept = my - slope * mx;
    let dof = (x.len().max(3) - 2) as f64;
    let sse: f64 = x
        .iter()
        .zip(y)
        .map(|(a, b)| {
            let e = b - (intercept + slope * a);
            e * e
        })
        .sum();
    let se = (sse / dof / sxx).sqrt();
    (slope, 1.96 * se)
}
