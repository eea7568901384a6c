//! Goodness-of-fit helpers used by the comparison reports and the tests.

/// Half-width of the two-sided DKW confidence band at level `1 - alpha`.
pub fn dkw_half_width(count: u64, alpha: f64) -> f64 {
    (libm::log(2.0 / alpha) / (2.0 * count as f64)).sqrt()
}

/// Kolmogorov–Smirnov distance between the empirical law of `samples` and a
/// distribution function `cdf`. Samples need not be sorted.
pub fn ks_statistic(samples: &[f64], cdf: impl Fn(f64) -> f64) -> f64 {
    let mut xs = samples.to_vec();
    xs.sort_by(f64::total_cmp);
    let n = xs.len() as f64;
    let mut d = 0.0f64;
    let mut i = 0;
    while i < xs.len() {
        let x = xs[i];
        let mut j = i;
        while j < xs.len() && xs[j] == x {
            j += 1;
        }
        let f = cdf(x);
        // left and right limits of the empirical CDF at an atom
        d = d.max((f - j as f64 / n).abs()).max((i as f64 / n - cdf_left(&cdf, x)).abs());
        i = j;
    }
    d
}

fn cdf_left(cdf: &impl Fn(f64) -> f64, x: f64) -> f64 {
    cdf(x - 1e-9 * x.abs().max(1.0))
}

/// Pearson statistic `Σ (O − E)²/E` over cells with positive expectation.
pub fn chi_square(observed: &[u64], expected: &[f64]) -> f64 {
    observed
        .iter()
        .zip(expected)
        .filter(|(_, &e)| e > 0.0)
        .map(|(&o, &e)| {
            let d = o as f64 - e;
            d * d / e
        })
        .sum()
}

/// Upper `alpha` quantile of the chi-square law with `df` degrees of freedom, by the
/// Wilson–Hilferty cube-root approximation.
pub fn chi_square_critical(df: usize, alpha: f64) -> f64 {
    let k = df as f64;
    let z = normal_quantile(1.0 - alpha);
    let a = 2.0 / (9.0 * k);
    k * (1.0 - a + z * a.sqrt()).powi(3)
}

/// Standard normal quantile (Acklam's rational approximation, |error| < 1.2e-9).
#[allow(clippy::excessive_precision)]
pub fn normal_quantile(p: f64) -> f64 {
    const A: [f64; 6] = [-3.969683028665376e1, 2.209460984245205e2, -2.759285104469687e2, 1.383577518672690e2, -3.066479806614716e1, 2.506628277459239];
    const B: [f64; 5] = [-5.447609879822406e1, 1.615858368580409e2, -1.556989798598866e2, 6.680131188771972e1, -1.328068155288572e1];
    const C: [f64; 6] = [-7.784894002430293e-3, -3.223964580411365e-1, -2.400758277161838, -2.549732539343734, 4.374664141464968, 2.938163982698783];
    const D: [f64; 4] = [7.784695709041462e-3, 3.224671290700398e-1, 2.445134137142996, 3.754408661907416];
    let tail = |q: f64| {
        (((((C[0] * q + C[1]) * q + C[2]) * q + C[3]) * q + C[4]) * q + C[5]) / ((((D[0] * q + D[1]) * q + D[2]) * q + D[3]) * q + 1.0)
    };
    if p < 0.02425 {
        tail((-2.0 * libm::log(p)).sqrt())
    } else if p > 1.0 - 0.02425 {
        -tail((-2.0 * libm::log(1.0 - p)).sqrt())
    } else {
        let q = p - 0.5;
        let r = q * q;
        (((((A[0] * r + A[1]) * r + A[2]) * r + A[3]) * r + A[4]) * r + A[5]) * q
            / (((((B[0] * r + B[1]) * r + B[2]) * r + B[3]) * r + B[4]) * r + 1.0)
    }
}

/// Lag-1 sample autocorrelation.
pub fn lag1_correlation(xs: &[f64]) -> f64 {
    let n = xs.len();
    if n < 3 {
        return 0.0;
    }
    let mean = xs.iter().sum::<f64>() / n as f64;
    let var: f64 = xs.iter().map(|x| (x - mean) * (x - mean)).sum();
    if var == 0.0 {
        return 0.0;
    }
    let cov: f64 = xs.windows(2).map(|w| (w[0] - mean) * (w[1] - mean)).sum();
    cov / var
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn dkw_at_one_million() {
        // sqrt(ln(200)/2e6)
        assert!((dkw_half_width(1_000_000, 0.01) - 0.0016276).abs() < 1e-6);
    }

    #[test]
    fn ks_of_exact_atoms_is_zero() {
        let xs = vec![1.0, 1.0, 2.0, 2.0];
        let cdf = |x: f64| if x < 1.0 { 0.0 } else if x < 2.0 { 0.5 } else { 1.0 };
        assert!(ks_statistic(&xs, cdf) < 1e-15);
        let d = ks_statistic(&[1.0], |x: f64| if x < 2.0 { 0.0 } else { 1.0 });
        assert_eq!(d, 1.0);
    }

    #[test]
    fn quantiles() {
        assert!((normal_quantile(0.975) - 1.959964).abs() < 1e-6);
        assert!((normal_quantile(0.001) + 3.090232).abs() < 1e-6);
        // tabulated chi-square upper 0.1% point for 10 degrees of freedom is 29.588
        assert!((chi_square_critical(10, 1e-3) - 29.588).abs() < 0.3);
    }

    #[test]
    fn correlation_of_alternating_sequence() {
        let xs: Vec<f64> = (0..1000).map(|i| if i % 2 == 0 { 1.0 } else { -1.0 }).collect();
        assert!(lag1_correlation(&xs) < -0.99);
    }
}
