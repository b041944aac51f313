//! The randomized-program abstraction: distributions, traces, choice sources
//! and deterministic replay.

use alloc::vec::Vec;
use core::fmt;
use core::ops::Deref;

use rand::Rng;

use crate::error::{Error, Result};

/// Tolerance for "sums to one" checks after normalization.
pub const SUM_TOLERANCE: f64 = 1e-9;

/// A finite discrete distribution over outcome indices `0..len`.
#[derive(Debug, Clone, PartialEq)]
pub struct Distribution {
    weights: Vec<f64>,
}

impl Distribution {
    /// Normalizes non-negative weights into a distribution. Weights that
    /// already sum to one within [`SUM_TOLERANCE`] are kept as given, which
    /// makes normalization idempotent.
    pub fn new(raw: impl Into<Vec<f64>>) -> Result<Self> {
        let mut weights = raw.into();
        if weights.is_empty() {
            return Err(Error::EmptyDistribution);
        }
        for (index, &weight) in weights.iter().enumerate() {
            if !weight.is_finite() || weight < 0.0 {
                return Err(Error::InvalidWeight { index, weight });
            }
        }
        let total: f64 = weights.iter().sum();
        if total <= 0.0 {
            return Err(Error::ZeroMass);
        }
        if (total - 1.0).abs() > SUM_TOLERANCE {
            for w in &mut weights {
                *w /= total;
            }
        }
        Ok(Self { weights })
    }

    /// Builds a distribution from unnormalized natural-log weights.
    ///
    /// Entries equal to `-inf` become exact zeros.
    pub fn from_log_weights(log_weights: &[f64]) -> Result<Self> {
        if log_weights.is_empty() {
            return Err(Error::EmptyDistribution);
        }
        let max = log_weights
            .iter()
            .copied()
            .fold(f64::NEG_INFINITY, f64::max);
        if max == f64::NEG_INFINITY || max.is_nan() {
            return Err(Error::ZeroMass);
        }
        let shifted: Vec<f64> = log_weights
            .iter()
            .map(|&lw| {
                if lw == f64::NEG_INFINITY {
                    0.0
                } else {
                    libm::exp(lw - max)
                }
            })
            .collect();
        Self::new(shifted)
    }

    pub fn uniform(n: usize) -> Result<Self> {
        Self::new(alloc::vec![1.0; n])
    }

    /// The distribution that always returns `index`.
    pub fn point(n: usize, index: usize) -> Result<Self> {
        let mut weights = alloc::vec![0.0; n];
        *weights.get_mut(index).ok_or(Error::EmptyDistribution)? = 1.0;
        Self::new(weights)
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn len(&self) -> usize {
        self.weights.len()
    }

    pub fn is_empty(&self) -> bool {
        self.weights.is_empty()
    }

    pub fn prob(&self, index: usize) -> f64 {
        self.weights.get(index).copied().unwrap_or(0.0)
    }

    /// Draws an index with one uniform variate.
    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> usize {
        let u: f64 = rng.random();
        select_proportional(&self.weights, u).expect("distribution has positive mass")
    }
}

/// Picks an index with probability proportional to `weights` using the
/// uniform variate `u` in `[0, 1)`.
///
/// Linear scan; the last positive-weight entry absorbs any rounding residue.
/// Returns `None` when no weight is positive.
pub fn select_proportional(weights: &[f64], u: f64) -> Option<usize> {
    let total: f64 = weights.iter().sum();
    if total <= 0.0 || total.is_nan() {
        return None;
    }
    let target = u * total;
    let mut cumulative = 0.0;
    let mut last_positive = None;
    for (i, &w) in weights.iter().enumerate() {
        if w > 0.0 {
            cumulative += w;
            last_positive = Some(i);
            if target < cumulative {
                return Some(i);
            }
        }
    }
    last_positive
}

/// The sequence of choice indices produced by one execution.
#[derive(Debug, Clone, Default, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct Trace(pub Vec<usize>);

impl Trace {
    pub fn new(choices: impl Into<Vec<usize>>) -> Self {
        Self(choices.into())
    }

    pub fn into_inner(self) -> Vec<usize> {
        self.0
    }
}

impl Deref for Trace {
    type Target = [usize];

    fn deref(&self) -> &[usize] {
        &self.0
    }
}

impl From<Vec<usize>> for Trace {
    fn from(v: Vec<usize>) -> Self {
        Self(v)
    }
}

impl fmt::Display for Trace {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for (i, c) in self.0.iter().enumerate() {
            if i > 0 {
                f.write_str(" ")?;
            }
            write!(f, "{c}")?;
        }
        Ok(())
    }
}

/// Provider of the random choice operation.
///
/// Programs call [`ChoiceSource::choose`] with a fully computed distribution, or
/// [`ChoiceSource::choose_lazy`] to let the source skip the computation when it
/// already knows the outcome probabilities.
pub trait ChoiceSource {
    /// Returns an index into `dist`. `None` is a placeholder that is only valid
    /// when [`needs_distribution`](Self::needs_distribution) is false.
    fn choose_from(&mut self, dist: Option<&Distribution>) -> Result<usize>;

    /// Whether the next choice needs the caller to compute its distribution.
    fn needs_distribution(&self) -> bool {
        true
    }

    fn choose(&mut self, dist: &Distribution) -> Result<usize> {
        self.choose_from(Some(dist))
    }

    fn choose_lazy(&mut self, compute: &mut dyn FnMut() -> Distribution) -> Result<usize> {
        if self.needs_distribution() {
            let dist = compute();
            self.choose_from(Some(&dist))
        } else {
            self.choose_from(None)
        }
    }
}

/// A discrete randomized program: deterministic except for its calls to the
/// choice source.
pub trait RandomizedProgram {
    type Output: Clone + Ord + fmt::Debug;

    fn run(&self, choices: &mut dyn ChoiceSource) -> Result<Self::Output>;
}

impl<P: RandomizedProgram + ?Sized> RandomizedProgram for &P {
    type Output = P::Output;

    fn run(&self, choices: &mut dyn ChoiceSource) -> Result<Self::Output> {
        (**self).run(choices)
    }
}

/// Plain sampling with replacement from an RNG.
#[derive(Debug)]
pub struct RngSource<R> {
    rng: R,
    trace: Vec<usize>,
    probability: f64,
    distribution_computations: u64,
}

impl<R: Rng> RngSource<R> {
    pub fn new(rng: R) -> Self {
        Self {
            rng,
            trace: Vec::new(),
            probability: 1.0,
            distribution_computations: 0,
        }
    }

    /// Runs `program` once, returning its output, trace and trace probability.
    pub fn sample<P: RandomizedProgram + ?Sized>(
        &mut self,
        program: &P,
    ) -> Result<(P::Output, Trace, f64)> {
        self.trace.clear();
        self.probability = 1.0;
        let output = program.run(self)?;
        Ok((
            output,
            Trace(core::mem::take(&mut self.trace)),
            self.probability,
        ))
    }

    pub fn distribution_computations(&self) -> u64 {
        self.distribution_computations
    }

    pub fn rng_mut(&mut self) -> &mut R {
        &mut self.rng
    }
}

impl<R: Rng> ChoiceSource for RngSource<R> {
    fn choose_from(&mut self, dist: Option<&Distribution>) -> Result<usize> {
        let dist = dist.ok_or(Error::MissingDistribution)?;
        self.distribution_computations += 1;
        let index = dist.sample(&mut self.rng);
        self.trace.push(index);
        self.probability *= dist.prob(index);
        Ok(index)
    }
}

/// Replays a fixed sequence of choices.
///
/// In probe mode the source stops the program with [`Error::Paused`] at the
/// first choice past the end of the trace and records that choice's
/// distribution.
#[derive(Debug)]
pub(crate) struct ReplaySource<'a> {
    trace: &'a [usize],
    pos: usize,
    probability: f64,
    probe: bool,
    captured: Option<Distribution>,
}

impl<'a> ReplaySource<'a> {
    fn new(trace: &'a [usize], probe: bool) -> Self {
        Self {
            trace,
            pos: 0,
            probability: 1.0,
            probe,
            captured: None,
        }
    }
}

impl ChoiceSource for ReplaySource<'_> {
    fn needs_distribution(&self) -> bool {
        !self.probe || self.pos >= self.trace.len()
    }

    fn choose_from(&mut self, dist: Option<&Distribution>) -> Result<usize> {
        let Some(&index) = self.trace.get(self.pos) else {
            if self.probe {
                self.captured = Some(dist.ok_or(Error::MissingDistribution)?.clone());
                return Err(Error::Paused);
            }
            return Err(Error::TraceMismatch("trace is shorter than the execution"));
        };
        if let Some(dist) = dist {
            if index >= dist.len() {
                return Err(Error::TraceMismatch("choice index out of range"));
            }
            self.probability *= dist.prob(index);
        }
        self.pos += 1;
        Ok(index)
    }
}

/// Re-executes `program` under exactly the choices in `trace`.
///
/// Returns the output and the number of choices consumed, which is smaller
/// than `trace.len()` if the program terminated early.
pub fn run_with_replay<P: RandomizedProgram + ?Sized>(
    program: &P,
    trace: &[usize],
) -> Result<(P::Output, usize)> {
    let mut source = ReplaySource::new(trace, false);
    let output = program.run(&mut source)?;
    Ok((output, source.pos))
}

/// Probability of a complete trace: the product of the chosen entries.
pub fn trace_probability<P: RandomizedProgram + ?Sized>(
    program: &P,
    trace: &[usize],
) -> Result<f64> {
    let mut source = ReplaySource::new(trace, false);
    program.run(&mut source)?;
    if source.pos != trace.len() {
        return Err(Error::TraceMismatch("trace is longer than the execution"));
    }
    Ok(source.probability)
}

/// What a program does after a given prefix of choices.
#[derive(Debug, Clone, PartialEq)]
pub enum Probe<O> {
    /// The program terminates after exactly the prefix.
    Terminal(O),
    /// The program requests another choice with this distribution.
    Choice(Distribution),
}

/// Replays `prefix` and reports whether the program terminates there or which
/// distribution it presents next. Distributions along the prefix are not
/// requested from lazily-computing programs.
pub fn probe<P: RandomizedProgram + ?Sized>(
    program: &P,
    prefix: &[usize],
) -> Result<Probe<P::Output>> {
    let mut source = ReplaySource::new(prefix, true);
    match program.run(&mut source) {
        Ok(output) if source.pos == prefix.len() => Ok(Probe::Terminal(output)),
        Ok(_) => Err(Error::TraceMismatch("program terminated inside the prefix")),
        Err(Error::Paused) => Ok(Probe::Choice(
            source.captured.take().ok_or(Error::MissingDistribution)?,
        )),
        Err(e) => Err(e),
    }
}
