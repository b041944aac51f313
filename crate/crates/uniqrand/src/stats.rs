//! Goodness-of-fit tests and summary statistics used by the experiments.

use std::collections::BTreeMap;

use statrs::distribution::{ChiSquared, ContinuousCDF};

/// Expected counts below this are pooled into one cell.
pub const MIN_EXPECTED: f64 = 5.0;

/// Pearson chi-square p-value of observed `counts` against `expected`
/// probabilities. Sparse cells are pooled. An observation outside the
/// support of `expected` yields 0.
pub fn chi_square_p<K: Ord>(counts: &BTreeMap<K, u64>, expected: &BTreeMap<K, f64>) -> f64 {
    if counts.keys().any(|k| !expected.contains_key(k)) {
        return 0.0;
    }
    let n = counts.values().sum::<u64>() as f64;
    let mut stat = 0.0;
    let mut cells = 0usize;
    let (mut pooled_obs, mut pooled_exp) = (0.0, 0.0);
    for (key, &p) in expected {
        let obs = counts.get(key).copied().unwrap_or(0) as f64;
        let exp = p * n;
        if exp < MIN_EXPECTED {
            pooled_obs += obs;
            pooled_exp += exp;
        } else {
            stat += (obs - exp).powi(2) / exp;
            cells += 1;
        }
    }
    if pooled_exp > 0.0 {
        stat += (pooled_obs - pooled_exp).powi(2) / pooled_exp;
        cells += 1;
    }
    if cells < 2 {
        return 1.0;
    }
    1.0 - ChiSquared::new((cells - 1) as f64)
        .expect("positive degrees of freedom")
        .cdf(stat)
}

pub fn counts<K: Ord>(items: impl IntoIterator<Item = K>) -> BTreeMap<K, u64> {
    let mut out = BTreeMap::new();
    for key in items {
        *out.entry(key).or_insert(0) += 1;
    }
    out
}

/// Tail of the Kolmogorov distribution, `P(K > x)`.
fn kolmogorov_tail(x: f64) -> f64 {
    if x < 0.2 {
        return 1.0;
    }
    let mut sum = 0.0;
    let mut sign = 1.0;
    for j in 1..=100 {
        let term = sign * 2.0 * (-2.0 * (j * j) as f64 * x * x).exp();
        sum += term;
        if term.abs() < 1e-16 {
            break;
        }
        sign = -sign;
    }
    sum.clamp(0.0, 1.0)
}

/// Asymptotic p-value for statistic `d` at effective sample size `n`, with
/// the usual small-sample correction.
fn ks_p_value(d: f64, n: f64) -> f64 {
    let s = n.sqrt();
    kolmogorov_tail((s + 0.12 + 0.11 / s) * d)
}

/// Kolmogorov-Smirnov p-value of `sample` against a continuous `cdf`.
pub fn ks_one_sample(sample: &[f64], cdf: impl Fn(f64) -> f64) -> f64 {
    let mut xs = sample.to_vec();
    xs.sort_by(f64::total_cmp);
    let n = xs.len() as f64;
    let mut d = 0.0f64;
    for (i, &x) in xs.iter().enumerate() {
        let f = cdf(x);
        d = d.max((i + 1) as f64 / n - f).max(f - i as f64 / n);
    }
    ks_p_value(d, n)
}

/// Two-sample Kolmogorov-Smirnov p-value.
pub fn ks_two_sample(a: &[f64], b: &[f64]) -> f64 {
    let mut a = a.to_vec();
    let mut b = b.to_vec();
    a.sort_by(f64::total_cmp);
    b.sort_by(f64::total_cmp);
    let (n, m) = (a.len(), b.len());
    let (mut i, mut j, mut d) = (0, 0, 0.0f64);
    while i < n && j < m {
        let x = a[i].min(b[j]);
        while i < n && a[i] <= x {
            i += 1;
        }
        while j < m && b[j] <= x {
            j += 1;
        }
        d = d.max((i as f64 / n as f64 - j as f64 / m as f64).abs());
    }
    ks_p_value(d, (n * m) as f64 / (n + m) as f64)
}

/// Running mean; exact when all values are equal.
pub fn mean(xs: &[f64]) -> f64 {
    let mut m = 0.0;
    for (i, x) in xs.iter().enumerate() {
        m += (x - m) / (i + 1) as f64;
    }
    m
}

/// Unbiased sample variance.
pub fn variance(xs: &[f64]) -> f64 {
    let m = mean(xs);
    xs.iter().map(|x| (x - m).powi(2)).sum::<f64>() / (xs.len() as f64 - 1.0)
}

pub fn standard_error(xs: &[f64]) -> f64 {
    (variance(xs) / xs.len() as f64).sqrt()
}

/// Linear-interpolation quantile of an ascending slice.
pub fn quantile(sorted: &[f64], q: f64) -> f64 {
    let pos = q.clamp(0.0, 1.0) * (sorted.len() - 1) as f64;
    let lo = pos.floor() as usize;
    let hi = pos.ceil() as usize;
    sorted[lo] + (sorted[hi] - sorted[lo]) * (pos - lo as f64)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn chi_square_accepts_exact_counts_and_rejects_skew() {
        let expected: BTreeMap<u8, f64> = [(0, 0.5), (1, 0.3), (2, 0.2)].into();
        let exact: BTreeMap<u8, u64> = [(0, 500), (1, 300), (2, 200)].into();
        assert!((chi_square_p(&exact, &expected) - 1.0).abs() < 1e-12);
        let skewed: BTreeMap<u8, u64> = [(0, 700), (1, 200), (2, 100)].into();
        assert!(chi_square_p(&skewed, &expected) < 1e-6);
        let outside: BTreeMap<u8, u64> = [(3, 1)].into();
        assert_eq!(chi_square_p(&outside, &expected), 0.0);
    }

    #[test]
    fn chi_square_matches_reference_value() {
        // stat = 4, df = 1: P(X > 4) = 0.0455003.
        let expected: BTreeMap<u8, f64> = [(0, 0.5), (1, 0.5)].into();
        let obs: BTreeMap<u8, u64> = [(0, 60), (1, 40)].into();
        assert!((chi_square_p(&obs, &expected) - 0.045500264).abs() < 1e-8);
    }

    #[test]
    fn kolmogorov_tail_reference_values() {
        assert!((kolmogorov_tail(1.36) - 0.0494).abs() < 1e-3);
        assert!((kolmogorov_tail(1.63) - 0.0098).abs() < 1e-3);
    }

    #[test]
    fn ks_detects_shift() {
        let a: Vec<f64> = (0..1000).map(|i| i as f64 / 1000.0).collect();
        let b: Vec<f64> = a.iter().map(|x| x + 0.2).collect();
        assert!(ks_two_sample(&a, &a) > 0.99);
        assert!(ks_two_sample(&a, &b) < 1e-6);
        assert!(ks_one_sample(&a, |x| x.clamp(0.0, 1.0)) > 0.99);
    }

    #[test]
    fn constant_data_has_zero_spread() {
        let xs = [0.1 + 0.2; 2000];
        assert_eq!(mean(&xs), 0.1 + 0.2);
        assert_eq!(variance(&xs), 0.0);
    }

    #[test]
    fn quantiles_interpolate() {
        let xs = [1.0, 2.0, 3.0, 4.0];
        assert_eq!(quantile(&xs, 0.0), 1.0);
        assert_eq!(quantile(&xs, 1.0), 4.0);
        assert_eq!(quantile(&xs, 0.5), 2.5);
    }
}
