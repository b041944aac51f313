//! Gumbel sampling in natural-log space.
//!
//! Zero probabilities are represented by a location of `-inf`, which always
//! produces a key of `-inf`.

use alloc::vec::Vec;
use core::cmp::Ordering;

use rand::Rng;

use crate::error::{Error, Result};

/// Largest exponent argument evaluated directly; beyond it the stable
/// branches of the truncation formulas take over.
pub const EXP_GUARD: f64 = 700.0;

/// A perturbed log-probability.
#[derive(Debug, Clone, Copy, PartialEq, PartialOrd)]
pub struct GumbelKey(pub f64);

impl GumbelKey {
    pub const NEG_INFINITY: GumbelKey = GumbelKey(f64::NEG_INFINITY);

    pub fn value(self) -> f64 {
        self.0
    }

    /// Total order with larger keys first.
    pub fn cmp_desc(&self, other: &Self) -> Ordering {
        other.0.total_cmp(&self.0)
    }
}

/// Uniform variate on the open interval `(0, 1)`.
pub fn open_uniform<R: Rng + ?Sized>(rng: &mut R) -> f64 {
    ((rng.next_u64() >> 11) as f64 + 0.5) * (1.0 / (1u64 << 53) as f64)
}

/// Inverse CDF of `Gumbel(location)` at `u`.
pub fn gumbel_from_uniform(location: f64, u: f64) -> f64 {
    if location == f64::NEG_INFINITY {
        return f64::NEG_INFINITY;
    }
    location - libm::log(-libm::log(u))
}

pub fn sample_gumbel<R: Rng + ?Sized>(location: f64, rng: &mut R) -> GumbelKey {
    if location == f64::NEG_INFINITY {
        return GumbelKey::NEG_INFINITY;
    }
    GumbelKey(gumbel_from_uniform(location, open_uniform(rng)))
}

/// Inverse CDF of `Gumbel(location)` conditioned on being below `bound`.
///
/// The CDF is `exp(e^(location-bound) - e^(location-g))`, so
/// `g = location - ln(e^(location-bound) - ln u)`. When `location >= bound`
/// that exponent can overflow and the equivalent form
/// `g = bound - ln1p(-ln(u) * e^(bound-location))` is used instead.
/// The result is always strictly below `bound`.
pub fn truncated_gumbel_from_uniform(location: f64, bound: f64, u: f64) -> f64 {
    if location == f64::NEG_INFINITY {
        return f64::NEG_INFINITY;
    }
    let neg_log_u = -libm::log(u);
    let g = if location >= bound {
        bound - libm::log1p(neg_log_u * libm::exp(bound - location))
    } else {
        location - libm::log(libm::exp(location - bound) + neg_log_u)
    };
    if g < bound {
        g
    } else {
        next_below(bound)
    }
}

pub fn sample_truncated_gumbel<R: Rng + ?Sized>(
    location: f64,
    bound: f64,
    rng: &mut R,
) -> GumbelKey {
    GumbelKey(truncated_gumbel_from_uniform(
        location,
        bound,
        open_uniform(rng),
    ))
}

fn next_below(x: f64) -> f64 {
    if x.is_nan() || x == f64::NEG_INFINITY {
        return x;
    }
    if x == 0.0 {
        return -f64::from_bits(1);
    }
    let bits = x.to_bits();
    if x > 0.0 {
        f64::from_bits(bits - 1)
    } else {
        f64::from_bits(bits + 1)
    }
}

/// `ln(1 - e^a)` for `a <= 0`.
pub fn log1mexp(a: f64) -> f64 {
    if a > -core::f64::consts::LN_2 {
        libm::log(-libm::expm1(a))
    } else {
        libm::log1p(-libm::exp(a))
    }
}

/// Samples keys for a set of sibling states whose maximum equals `bound`.
///
/// Each child draws `G_i ~ Gumbel(log_masses[i])`; with `Z = max G_i` the
/// keys are shifted to `-ln(e^-bound - e^-Z + e^-G_i)`, evaluated in the
/// overflow-free form `bound - max(v, 0) - ln1p(e^-|v|)` with
/// `v = bound - G_i + ln(1 - e^(G_i - Z))`. The argmax child receives
/// exactly `bound`; the rest fall strictly below it.
pub fn truncate_children<R: Rng + ?Sized>(log_masses: &[f64], bound: f64, rng: &mut R) -> Vec<f64> {
    let raw: Vec<f64> = log_masses
        .iter()
        .map(|&lm| sample_gumbel(lm, rng).0)
        .collect();
    shift_to_bound(&raw, bound)
}

/// The deterministic part of [`truncate_children`].
pub fn shift_to_bound(raw: &[f64], bound: f64) -> Vec<f64> {
    let z = raw.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    raw.iter()
        .map(|&g| {
            if g == f64::NEG_INFINITY {
                return f64::NEG_INFINITY;
            }
            if g == z {
                return bound;
            }
            let v = bound - g + log1mexp(g - z);
            let shifted = bound - v.max(0.0) - libm::log1p(libm::exp(-v.abs()));
            shifted.min(next_below(bound))
        })
        .collect()
}

/// Perturbs each log-probability with independent Gumbel noise and returns
/// the `k` largest as `(index, key)`, largest first.
pub fn gumbel_top_k<R: Rng + ?Sized>(
    log_probs: &[f64],
    k: usize,
    rng: &mut R,
) -> Result<Vec<(usize, GumbelKey)>> {
    let available = log_probs
        .iter()
        .filter(|&&lp| lp > f64::NEG_INFINITY)
        .count();
    if k > available {
        return Err(Error::KTooLarge { k, available });
    }
    let mut keyed: Vec<(usize, GumbelKey)> = log_probs
        .iter()
        .enumerate()
        .map(|(i, &lp)| (i, sample_gumbel(lp, rng)))
        .collect();
    keyed.sort_by(|a, b| a.1.cmp_desc(&b.1).then(a.0.cmp(&b.0)));
    keyed.truncate(k);
    Ok(keyed)
}

/// `P(Gumbel(location) > kappa) = 1 - exp(-exp(location - kappa))`.
pub fn gumbel_survival(location: f64, kappa: f64) -> f64 {
    if location == f64::NEG_INFINITY {
        return 0.0;
    }
    if kappa == f64::NEG_INFINITY {
        return 1.0;
    }
    -libm::expm1(-libm::exp(location - kappa))
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn analytic_inverse() {
        assert_eq!(gumbel_from_uniform(0.0, libm::exp(-1.0)), 0.0);
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        assert_eq!(
            sample_gumbel(f64::NEG_INFINITY, &mut rng),
            GumbelKey::NEG_INFINITY
        );
    }

    #[test]
    fn gumbel_mean_is_euler_mascheroni() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let n = 1_000_000;
        let mean = (0..n).map(|_| sample_gumbel(0.0, &mut rng).0).sum::<f64>() / n as f64;
        assert!((mean - 0.577_215_664_9).abs() < 0.01, "{mean}");
    }

    #[test]
    fn truncated_draws_stay_below_bound() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        for i in 0..1_000_000u32 {
            let location = (i % 2001) as f64 * 0.7 - 700.0;
            let bound = ((i / 7) % 301) as f64 * 0.5 - 75.0;
            let g = sample_truncated_gumbel(location, bound, &mut rng).0;
            assert!(g < bound && g.is_finite(), "{location} {bound} {g}");
        }
    }

    #[test]
    fn extreme_truncation_is_finite() {
        for &u in &[1e-300, 1e-12, 0.5, 1.0 - 1e-16] {
            for &(loc, bound) in &[
                (-600.0, 0.0),
                (0.0, -600.0),
                (700.0, -700.0),
                (-700.0, 700.0),
            ] {
                let g = truncated_gumbel_from_uniform(loc, bound, u);
                assert!(g.is_finite() && g < bound, "{loc} {bound} {u} {g}");
            }
        }
    }

    #[test]
    fn survival_values() {
        assert!((gumbel_survival(1.5, 1.5) - (1.0 - libm::exp(-1.0))).abs() < 1e-15);
        assert_eq!(gumbel_survival(0.0, f64::INFINITY), 0.0);
        assert_eq!(gumbel_survival(0.0, f64::NEG_INFINITY), 1.0);
        assert_eq!(gumbel_survival(f64::NEG_INFINITY, 0.0), 0.0);
        assert!((gumbel_survival(libm::log(0.3), 0.0) - 0.259_181_779_318_282).abs() < 1e-12);
    }

    #[test]
    fn survival_matches_numeric_integration_of_density() {
        // Trapezoid rule on the Gumbel(ln 0.3) density over (0, 60].
        let loc = libm::log(0.3);
        let density = |x: f64| {
            let z = x - loc;
            libm::exp(-(z + libm::exp(-z)))
        };
        let n = 600_000;
        let h = 60.0 / n as f64;
        let mut integral = 0.5 * (density(0.0) + density(60.0));
        for i in 1..n {
            integral += density(i as f64 * h);
        }
        integral *= h;
        assert!((integral - gumbel_survival(loc, 0.0)).abs() < 1e-8);
    }

    #[test]
    fn survival_is_monotone() {
        let mut prev = 1.0;
        for i in 0..200 {
            let kappa = -10.0 + i as f64 * 0.1;
            let q = gumbel_survival(-1.0, kappa);
            assert!(q <= prev);
            prev = q;
        }
    }

    #[test]
    fn top_k_of_everything_is_a_permutation() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let lp = [-1.0, -2.0, -0.5, -3.0];
        let mut idx: Vec<usize> = gumbel_top_k(&lp, 4, &mut rng)
            .unwrap()
            .iter()
            .map(|x| x.0)
            .collect();
        idx.sort_unstable();
        assert_eq!(idx, [0, 1, 2, 3]);
        assert_eq!(
            gumbel_top_k(&[0.0, f64::NEG_INFINITY], 2, &mut rng),
            Err(Error::KTooLarge { k: 2, available: 1 })
        );
    }

    #[test]
    fn children_keys_max_out_at_bound() {
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        for _ in 0..10_000 {
            let lm = [
                libm::log(0.2),
                libm::log(0.5),
                f64::NEG_INFINITY,
                libm::log(0.3),
            ];
            let keys = truncate_children(&lm, 1.25, &mut rng);
            let max = keys.iter().copied().fold(f64::NEG_INFINITY, f64::max);
            assert_eq!(max, 1.25);
            assert_eq!(keys[2], f64::NEG_INFINITY);
            assert_eq!(keys.iter().filter(|&&k| k == 1.25).count(), 1);
        }
    }

    #[test]
    fn log1mexp_branches() {
        for &a in &[-1e-10, -0.1, -0.69, -0.7, -5.0, -50.0] {
            let expected = libm::log(1.0 - libm::exp(a));
            assert!((log1mexp(a) - expected).abs() < 1e-6 * expected.abs().max(1e-6));
        }
        assert_eq!(log1mexp(0.0), f64::NEG_INFINITY);
    }
}
