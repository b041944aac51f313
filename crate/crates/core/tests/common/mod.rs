#![allow(dead_code)]

use std::collections::BTreeMap;

use statrs::distribution::{ChiSquared, ContinuousCDF};

/// Pearson chi-square p-value of `counts` against `expected` probabilities.
/// Cells with an expected count below 5 are pooled into one cell. Observed
/// keys missing from `expected` make the test fail outright.
pub fn chi_square_p<K: Ord>(counts: &BTreeMap<K, u64>, expected: &BTreeMap<K, f64>) -> f64 {
    if counts.keys().any(|k| !expected.contains_key(k)) {
        return 0.0;
    }
    let n: u64 = counts.values().sum();
    let n = n as f64;
    let (mut stat, mut bins) = (0.0, 0usize);
    let (mut pooled_obs, mut pooled_exp) = (0.0, 0.0);
    for (k, &p) in expected {
        let obs = counts.get(k).copied().unwrap_or(0) as f64;
        let exp = p * n;
        if exp < 5.0 {
            pooled_obs += obs;
            pooled_exp += exp;
        } else {
            stat += (obs - exp).powi(2) / exp;
            bins += 1;
        }
    }
    if pooled_exp > 0.0 {
        stat += (pooled_obs - pooled_exp).powi(2) / pooled_exp;
        bins += 1;
    }
    if bins < 2 {
        return 1.0;
    }
    1.0 - ChiSquared::new((bins - 1) as f64).unwrap().cdf(stat)
}

/// Asymptotic Kolmogorov tail `P(K > x)`.
fn kolmogorov_tail(x: f64) -> f64 {
    if x < 0.2 {
        return 1.0;
    }
    let mut sum = 0.0;
    for j in 1..=100 {
        let j = j as f64;
        let term = 2.0 * (-1f64).powf(j - 1.0) * (-2.0 * j * j * x * x).exp();
        sum += term;
        if term.abs() < 1e-16 {
            break;
        }
    }
    sum.clamp(0.0, 1.0)
}

fn ks_p(d: f64, n: f64) -> f64 {
    let s = n.sqrt();
    kolmogorov_tail((s + 0.12 + 0.11 / s) * d)
}

/// One-sample Kolmogorov-Smirnov p-value of `sample` against `cdf`.
pub fn ks_one_sample(sample: &mut [f64], cdf: impl Fn(f64) -> f64) -> f64 {
    sample.sort_by(f64::total_cmp);
    let n = sample.len() as f64;
    let mut d = 0.0f64;
    for (i, &x) in sample.iter().enumerate() {
        let f = cdf(x);
        d = d.max((i as f64 + 1.0) / n - f).max(f - i as f64 / n);
    }
    ks_p(d, n)
}

/// Two-sample Kolmogorov-Smirnov p-value.
pub fn ks_two_sample(a: &mut [f64], b: &mut [f64]) -> f64 {
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
    ks_p(d, (n * m) as f64 / (n + m) as f64)
}

pub fn count<K: Ord>(items: impl IntoIterator<Item = K>) -> BTreeMap<K, u64> {
    let mut out = BTreeMap::new();
    for k in items {
        *out.entry(k).or_insert(0) += 1;
    }
    out
}
