//! Estimating expectations from samples drawn without replacement.
//!
//! Samples are reweighted by `w(s) = p(s) / q(s)` where
//! `q(s) = P(Gumbel(ln p(s)) > kappa)`. With beam search `kappa` is the
//! largest pruned key. For any other sampler a decreasing Gumbel sequence is
//! drawn after the fact, conditioned on the sampling order, and its last
//! element serves as `kappa`.

use alloc::vec::Vec;

use rand::Rng;

use crate::choice::SUM_TOLERANCE;
use crate::error::{Error, Result};
use crate::gumbel::{gumbel_survival, sample_gumbel, sample_truncated_gumbel};
use crate::sbs::SbsResult;

/// A sample paired with its importance weight.
#[derive(Debug, Clone, PartialEq)]
pub struct WeightedSample<T> {
    pub value: T,
    pub probability: f64,
    pub weight: f64,
}

/// Decreasing Gumbels `G_1 > ... > G_{k+1}` matching `k` ordered samples.
#[derive(Debug, Clone, PartialEq)]
pub struct HindsightSequence {
    pub gumbels: Vec<f64>,
    pub kappa: f64,
}

/// Draws the hindsight Gumbel sequence for samples with the given
/// probabilities, in sampling order.
///
/// `G_1 ~ Gumbel(0)` and each later `G_i` is drawn from
/// `Gumbel(ln(1 - sum_{j<i} p_j))` truncated below `G_{i-1}`. If the samples
/// use up the whole space (remaining mass within [`SUM_TOLERANCE`] of zero)
/// the final element is `-inf`.
pub fn hindsight_gumbels<R: Rng + ?Sized>(probs: &[f64], rng: &mut R) -> Result<HindsightSequence> {
    validate(probs)?;
    let mut gumbels = Vec::with_capacity(probs.len() + 1);
    let mut g = sample_gumbel(0.0, rng).0;
    gumbels.push(g);
    let mut used = 0.0;
    for &p in probs {
        used += p;
        let remaining = 1.0 - used;
        g = if remaining <= SUM_TOLERANCE || g == f64::NEG_INFINITY {
            f64::NEG_INFINITY
        } else {
            sample_truncated_gumbel(libm::log(remaining), g, rng).0
        };
        gumbels.push(g);
    }
    Ok(HindsightSequence { kappa: g, gumbels })
}

fn validate(probs: &[f64]) -> Result<()> {
    if probs.iter().any(|&p| !(p > 0.0 && p <= 1.0)) {
        return Err(Error::InvalidProbabilities(
            "every probability must lie in (0, 1]",
        ));
    }
    if probs.iter().sum::<f64>() > 1.0 + SUM_TOLERANCE {
        return Err(Error::InvalidProbabilities(
            "probabilities sum to more than one",
        ));
    }
    Ok(())
}

/// Attaches `p / q_kappa` weights to samples.
pub fn weighted_samples<T: Clone>(samples: &[(T, f64)], kappa: f64) -> Vec<WeightedSample<T>> {
    samples
        .iter()
        .map(|(value, p)| WeightedSample {
            value: value.clone(),
            probability: *p,
            weight: p / gumbel_survival(libm::log(*p), kappa),
        })
        .collect()
}

/// Sum with Neumaier compensation after sorting the terms, so the result
/// does not depend on the order the terms arrive in.
pub fn canonical_sum(terms: &mut [f64]) -> f64 {
    terms.sort_by(f64::total_cmp);
    let mut sum = 0.0;
    let mut compensation = 0.0;
    for &t in terms.iter() {
        let next = sum + t;
        if libm::fabs(sum) >= libm::fabs(t) {
            compensation += (sum - next) + t;
        } else {
            compensation += (t - next) + sum;
        }
        sum = next;
    }
    sum + compensation
}

/// `sum w_i f_i`, or `sum w_i f_i / sum w_i` when normalized.
pub fn threshold_estimate(values: &[f64], probs: &[f64], kappa: f64, normalized: bool) -> f64 {
    let weights: Vec<f64> = probs
        .iter()
        .map(|&p| p / gumbel_survival(libm::log(p), kappa))
        .collect();
    let mut terms: Vec<f64> = weights.iter().zip(values).map(|(w, f)| w * f).collect();
    let numerator = canonical_sum(&mut terms);
    if normalized {
        let mut w = weights;
        numerator / canonical_sum(&mut w)
    } else {
        numerator
    }
}

/// Exact expectation `sum p f` with the same summation as the estimators.
pub fn exact_expectation(probs: &[f64], values: &[f64]) -> f64 {
    let mut terms: Vec<f64> = probs.iter().zip(values).map(|(p, f)| p * f).collect();
    canonical_sum(&mut terms)
}

/// Hindsight Gumbel estimate of `E_p[f]` from samples in sampling order.
pub fn hge_estimate<T, F, R>(
    samples: &[(T, f64)],
    f: F,
    normalized: bool,
    rng: &mut R,
) -> Result<f64>
where
    F: Fn(&T) -> f64,
    R: Rng + ?Sized,
{
    let values: Vec<f64> = samples.iter().map(|(v, _)| f(v)).collect();
    let probs: Vec<f64> = samples.iter().map(|(_, p)| *p).collect();
    let hindsight = hindsight_gumbels(&probs, rng)?;
    Ok(threshold_estimate(
        &values,
        &probs,
        hindsight.kappa,
        normalized,
    ))
}

/// Mean of `repeats` hindsight estimates on the same samples.
pub fn repeated_hge_estimate<T, F, R>(
    samples: &[(T, f64)],
    f: F,
    normalized: bool,
    repeats: usize,
    rng: &mut R,
) -> Result<f64>
where
    F: Fn(&T) -> f64,
    R: Rng + ?Sized,
{
    if repeats == 0 {
        return Err(Error::EmptySample);
    }
    let values: Vec<f64> = samples.iter().map(|(v, _)| f(v)).collect();
    let probs: Vec<f64> = samples.iter().map(|(_, p)| *p).collect();
    let mut mean = 0.0;
    for n in 1..=repeats {
        let kappa = hindsight_gumbels(&probs, rng)?.kappa;
        let estimate = threshold_estimate(&values, &probs, kappa, normalized);
        mean += (estimate - mean) / n as f64;
    }
    Ok(mean)
}

/// Threshold Gumbel estimate from a beam search result. A search that
/// exhausted the space has no threshold and every `q` is one.
pub fn tge_estimate<T, F>(sbs: &SbsResult<T>, f: F, normalized: bool) -> f64
where
    F: Fn(&T) -> f64,
{
    let kappa = sbs.pruned_max.map_or(f64::NEG_INFINITY, |k| k.0);
    let values: Vec<f64> = sbs.samples.iter().map(|s| f(&s.output)).collect();
    let probs: Vec<f64> = sbs.samples.iter().map(|s| s.probability).collect();
    threshold_estimate(&values, &probs, kappa, normalized)
}

/// Plain average of `f` over i.i.d. samples.
pub fn monte_carlo_estimate<T, F: Fn(&T) -> f64>(samples: &[T], f: F) -> Result<f64> {
    if samples.is_empty() {
        return Err(Error::EmptySample);
    }
    let mut mean = 0.0;
    for (n, s) in samples.iter().enumerate() {
        mean += (f(s) - mean) / (n + 1) as f64;
    }
    Ok(mean)
}

/// Synthetic estimation benchmark: `n` elements with `p ∝ rank^-2` and
/// `f(s) = p(s) * rank(s)`, ranks starting at 1.
///
/// The largest probability absorbs the normalization residue so that the
/// probabilities sum to exactly one under [`canonical_sum`].
pub fn rank_power_benchmark(n: usize) -> (Vec<f64>, Vec<f64>) {
    let raw: Vec<f64> = (1..=n).map(|r| 1.0 / (r as f64 * r as f64)).collect();
    let total: f64 = raw.iter().sum();
    let mut probs: Vec<f64> = raw.iter().map(|r| r / total).collect();
    if n > 1 {
        let mut rest = probs[1..].to_vec();
        probs[0] = 1.0 - canonical_sum(&mut rest);
        for _ in 0..4 {
            let mut all = probs.clone();
            let s = canonical_sum(&mut all);
            if s == 1.0 {
                break;
            }
            probs[0] += 1.0 - s;
        }
    }
    let values = probs
        .iter()
        .enumerate()
        .map(|(i, p)| p * (i + 1) as f64)
        .collect();
    (probs, values)
}
