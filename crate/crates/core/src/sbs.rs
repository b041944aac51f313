//! Stochastic Beam Search.
//!
//! Beam search where each state is scored by a Gumbel-perturbed
//! log-probability. The root draws `Gumbel(0)`; children draw Gumbels that
//! are conditioned so their maximum equals the parent's key. Keeping the `k`
//! best keys per level yields `k` distinct terminals sampled without
//! replacement.
//!
//! Child keys are drawn from a random stream keyed by the parent's prefix, so
//! a search gives the same result whether levels are expanded serially or in
//! parallel.

use alloc::vec::Vec;
use core::cmp::Ordering;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::choice::{probe, Probe, RandomizedProgram, Trace};
use crate::error::{Error, Result};
use crate::gumbel::{sample_gumbel, shift_to_bound, GumbelKey};

/// Either an expandable context or a finished output.
#[derive(Debug, Clone, PartialEq)]
pub enum Step<C, O> {
    Open(C),
    Done(O),
}

/// One outgoing edge of an expanded state.
#[derive(Debug, Clone, PartialEq)]
pub struct Branch<C, O> {
    pub choice: usize,
    /// Log-probability of taking this edge from its parent.
    pub log_prob: f64,
    pub next: Step<C, O>,
}

/// Result of expanding a state.
#[derive(Debug, Clone, PartialEq)]
pub enum Expansion<C, O> {
    Children(Vec<Branch<C, O>>),
    /// The state turned out to be terminal only once it was expanded.
    Terminal(O),
}

/// Next-state function for beam search.
pub trait Expander {
    type Context: Clone;
    type Output: Clone;

    fn root(&self) -> Result<Step<Self::Context, Self::Output>>;

    fn expand(&self, context: &Self::Context) -> Result<Expansion<Self::Context, Self::Output>>;
}

/// A terminal returned by a beam search, with its Gumbel key.
#[derive(Debug, Clone, PartialEq)]
pub struct KeyedSample<O> {
    pub output: O,
    pub trace: Trace,
    pub probability: f64,
    pub key: GumbelKey,
}

/// Output of [`stochastic_beam_search`].
#[derive(Debug, Clone, PartialEq)]
pub struct SbsResult<O> {
    /// Samples sorted by key, largest first.
    pub samples: Vec<KeyedSample<O>>,
    /// Largest key among pruned states, i.e. the `(k+1)`-th largest terminal
    /// key. `None` when nothing was pruned and the space was exhausted.
    pub pruned_max: Option<GumbelKey>,
    /// Number of `expand` calls.
    pub expansions: u64,
}

impl<O> SbsResult<O> {
    pub fn threshold(&self) -> Result<GumbelKey> {
        self.pruned_max.ok_or(Error::MissingThreshold)
    }
}

#[derive(Debug, Clone)]
pub(crate) struct BeamEntry<S> {
    pub(crate) prefix: Vec<usize>,
    pub(crate) log_prob: f64,
    pub(crate) key: f64,
    pub(crate) state: S,
}

/// Larger keys first; equal keys resolved by lexicographically smaller prefix.
pub(crate) fn beam_order<S>(a: &BeamEntry<S>, b: &BeamEntry<S>) -> Ordering {
    b.key
        .total_cmp(&a.key)
        .then_with(|| a.prefix.cmp(&b.prefix))
}

/// Sorts candidates, keeps the best `k` and returns the largest pruned key.
pub(crate) fn prune<S>(candidates: &mut Vec<BeamEntry<S>>, k: usize) -> Option<f64> {
    candidates.sort_by(beam_order);
    let pruned = candidates.get(k).map(|e| e.key);
    candidates.truncate(k);
    pruned
}

/// Per-search seed from which per-state streams are derived.
pub(crate) fn stream_seed<R: Rng + ?Sized>(rng: &mut R) -> [u8; 32] {
    let mut seed = [0u8; 32];
    rng.fill_bytes(&mut seed);
    seed
}

/// Random stream for the children of the state at `prefix`.
pub(crate) fn state_rng(seed: &[u8; 32], prefix: &[usize]) -> ChaCha8Rng {
    // FNV-1a over the prefix, length included so that prefixes of different
    // lengths do not collide trivially.
    let mut hash: u64 = 0xcbf2_9ce4_8422_2325;
    for &x in core::iter::once(&prefix.len()).chain(prefix) {
        for byte in (x as u64).to_le_bytes() {
            hash ^= byte as u64;
            hash = hash.wrapping_mul(0x0000_0100_0000_01b3);
        }
    }
    let mut rng = ChaCha8Rng::from_seed(*seed);
    rng.set_stream(hash);
    rng
}

/// Child keys for a state with key `parent_key`, drawn from its own stream.
pub(crate) fn child_keys(
    seed: &[u8; 32],
    prefix: &[usize],
    log_masses: &[f64],
    parent_key: f64,
) -> Vec<f64> {
    let mut rng = state_rng(seed, prefix);
    let raw: Vec<f64> = log_masses
        .iter()
        .map(|&lm| sample_gumbel(lm, &mut rng).0)
        .collect();
    shift_to_bound(&raw, parent_key)
}

/// Samples up to `k` distinct terminals without replacement.
pub fn stochastic_beam_search<E, R>(
    expander: &E,
    k: usize,
    rng: &mut R,
) -> Result<SbsResult<E::Output>>
where
    E: Expander,
    R: Rng + ?Sized,
{
    search_with(expander, k, rng, |contexts| {
        contexts.iter().map(|c| expander.expand(c)).collect()
    })
}

/// [`stochastic_beam_search`] with the states of each level expanded on the
/// rayon thread pool. Produces identical results.
#[cfg(feature = "parallel")]
pub fn stochastic_beam_search_par<E, R>(
    expander: &E,
    k: usize,
    rng: &mut R,
) -> Result<SbsResult<E::Output>>
where
    E: Expander + Sync,
    E::Context: Send + Sync,
    E::Output: Send,
    R: Rng + ?Sized,
{
    use rayon::prelude::*;
    search_with(expander, k, rng, |contexts| {
        contexts.par_iter().map(|c| expander.expand(c)).collect()
    })
}

type Expanded<E> = Result<Expansion<<E as Expander>::Context, <E as Expander>::Output>>;

fn search_with<E, R, F>(
    expander: &E,
    k: usize,
    rng: &mut R,
    expand_level: F,
) -> Result<SbsResult<E::Output>>
where
    E: Expander,
    R: Rng + ?Sized,
    F: Fn(&[E::Context]) -> Vec<Expanded<E>>,
{
    if k == 0 {
        return Ok(SbsResult {
            samples: Vec::new(),
            pruned_max: None,
            expansions: 0,
        });
    }
    let root_key = sample_gumbel(0.0, rng).0;
    let seed = stream_seed(rng);
    let mut beam = alloc::vec![BeamEntry {
        prefix: Vec::new(),
        log_prob: 0.0,
        key: root_key,
        state: expander.root()?,
    }];
    let mut pruned_max: Option<f64> = None;
    let mut expansions = 0u64;

    while beam.iter().any(|e| matches!(e.state, Step::Open(_))) {
        let (open, mut candidates): (Vec<_>, Vec<_>) = beam
            .into_iter()
            .partition(|e| matches!(e.state, Step::Open(_)));
        let contexts: Vec<E::Context> = open
            .iter()
            .map(|e| match &e.state {
                Step::Open(c) => c.clone(),
                Step::Done(_) => unreachable!(),
            })
            .collect();
        let results = expand_level(&contexts);
        expansions += open.len() as u64;

        for (entry, result) in open.into_iter().zip(results) {
            match result? {
                Expansion::Terminal(output) => candidates.push(BeamEntry {
                    state: Step::Done(output),
                    ..entry
                }),
                Expansion::Children(branches) => {
                    let log_masses: Vec<f64> = branches
                        .iter()
                        .map(|b| entry.log_prob + b.log_prob)
                        .collect();
                    let keys = child_keys(&seed, &entry.prefix, &log_masses, entry.key);
                    for ((branch, log_prob), key) in branches.into_iter().zip(log_masses).zip(keys)
                    {
                        if log_prob == f64::NEG_INFINITY {
                            continue;
                        }
                        debug_assert!(key <= entry.key);
                        let mut prefix = entry.prefix.clone();
                        prefix.push(branch.choice);
                        candidates.push(BeamEntry {
                            prefix,
                            log_prob,
                            key,
                            state: branch.next,
                        });
                    }
                }
            }
        }
        if let Some(p) = prune(&mut candidates, k) {
            pruned_max = Some(pruned_max.map_or(p, |m: f64| m.max(p)));
        }
        beam = candidates;
    }

    if beam.is_empty() {
        return Err(Error::EmptySpace);
    }
    let samples = beam
        .into_iter()
        .map(|e| match e.state {
            Step::Done(output) => KeyedSample {
                output,
                probability: libm::exp(e.log_prob),
                trace: Trace(e.prefix),
                key: GumbelKey(e.key),
            },
            Step::Open(_) => unreachable!(),
        })
        .collect();
    Ok(SbsResult {
        samples,
        pruned_max: pruned_max.map(GumbelKey),
        expansions,
    })
}

/// Expander over any randomized program, pausing it by replaying prefixes.
///
/// Terminal states are discovered when they are expanded.
#[derive(Debug, Clone, Copy)]
pub struct ProgramExpander<P>(pub P);

impl<P: RandomizedProgram> Expander for ProgramExpander<P> {
    type Context = Vec<usize>;
    type Output = P::Output;

    fn root(&self) -> Result<Step<Vec<usize>, P::Output>> {
        Ok(Step::Open(Vec::new()))
    }

    fn expand(&self, prefix: &Vec<usize>) -> Result<Expansion<Vec<usize>, P::Output>> {
        Ok(match probe(&self.0, prefix)? {
            Probe::Terminal(output) => Expansion::Terminal(output),
            Probe::Choice(dist) => Expansion::Children(
                dist.weights()
                    .iter()
                    .enumerate()
                    .map(|(i, &p)| {
                        let mut next = prefix.clone();
                        next.push(i);
                        Branch {
                            choice: i,
                            log_prob: libm::log(p),
                            next: Step::Open(next),
                        }
                    })
                    .collect(),
            ),
        })
    }
}
