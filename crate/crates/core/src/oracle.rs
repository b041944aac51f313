//! Brute-force reference implementations for desk-scale verification.
//!
//! Everything here is exhaustive and deliberately independent of the
//! samplers: trace tables come from replaying every prefix, WOR
//! distributions from explicit successive renormalization, and TSP optima
//! from Held-Karp or permutation enumeration.

use alloc::collections::{BTreeMap, BTreeSet};
use alloc::vec::Vec;

use crate::choice::{probe, Probe, RandomizedProgram, Trace};
use crate::error::{Error, Result};
use crate::programs::{Tour, TspInstance};

/// Default cap on the number of traces [`enumerate_traces`] will produce.
pub const DEFAULT_MAX_TRACES: usize = 1_000_000;

/// Largest instance [`held_karp`] accepts.
pub const HELD_KARP_LIMIT: usize = 13;

/// Largest instance [`brute_force_tsp`] accepts.
pub const BRUTE_FORCE_LIMIT: usize = 9;

#[derive(Debug, Clone, PartialEq)]
pub struct TraceEntry<O> {
    pub trace: Trace,
    pub output: O,
    pub probability: f64,
}

/// Every positive-probability complete trace of a program, in
/// lexicographic trace order.
#[derive(Debug, Clone, PartialEq)]
pub struct TraceTable<O> {
    pub entries: Vec<TraceEntry<O>>,
    /// Proper prefixes at which the program made a choice.
    pub internal_prefixes: Vec<Vec<usize>>,
}

/// Outcome of [`check_trace_injective`].
#[derive(Debug, Clone, PartialEq)]
pub enum Injectivity<O> {
    Injective,
    Collision {
        first: Trace,
        second: Trace,
        output: O,
    },
}

impl<O> Injectivity<O> {
    pub fn is_injective(&self) -> bool {
        matches!(self, Injectivity::Injective)
    }
}

/// Depth-first replay of every prefix. Zero-probability branches are skipped.
pub fn enumerate_traces<P: RandomizedProgram + ?Sized>(
    program: &P,
    max_traces: usize,
) -> Result<TraceTable<P::Output>> {
    let mut entries = Vec::new();
    let mut internal_prefixes = Vec::new();
    let mut stack = alloc::vec![(Vec::new(), 1.0)];
    while let Some((prefix, probability)) = stack.pop() {
        match probe(program, &prefix)? {
            Probe::Terminal(output) => {
                if entries.len() == max_traces {
                    return Err(Error::SpaceTooLarge(max_traces));
                }
                entries.push(TraceEntry {
                    trace: Trace(prefix),
                    output,
                    probability,
                });
            }
            Probe::Choice(dist) => {
                for (i, &p) in dist.weights().iter().enumerate().rev() {
                    if p > 0.0 {
                        let mut child = prefix.clone();
                        child.push(i);
                        stack.push((child, probability * p));
                    }
                }
                internal_prefixes.push(prefix);
            }
        }
    }
    Ok(TraceTable {
        entries,
        internal_prefixes,
    })
}

impl<O> TraceTable<O> {
    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn probabilities(&self) -> Vec<f64> {
        self.entries.iter().map(|e| e.probability).collect()
    }

    pub fn total_probability(&self) -> f64 {
        self.entries.iter().map(|e| e.probability).sum()
    }

    pub fn index_of(&self, trace: &[usize]) -> Option<usize> {
        self.entries.iter().position(|e| e.trace.0 == trace)
    }

    /// Total probability of the traces starting with `prefix` that are not
    /// in `drawn`.
    pub fn remaining_mass(&self, prefix: &[usize], drawn: &BTreeSet<Vec<usize>>) -> f64 {
        self.entries
            .iter()
            .filter(|e| e.trace.0.starts_with(prefix) && !drawn.contains(&e.trace.0))
            .map(|e| e.probability)
            .sum()
    }
}

impl<O: Ord + Clone> TraceTable<O> {
    /// At every internal prefix, the output sets reachable through different
    /// next choices must be disjoint. Returns the first prefix where they are
    /// not.
    pub fn check_prefix_partition(&self) -> Option<Vec<usize>> {
        for prefix in &self.internal_prefixes {
            let mut owner: BTreeMap<&O, usize> = BTreeMap::new();
            for e in self
                .entries
                .iter()
                .filter(|e| e.trace.0.starts_with(prefix))
            {
                let next = e.trace.0[prefix.len()];
                if *owner.entry(&e.output).or_insert(next) != next {
                    return Some(prefix.clone());
                }
            }
        }
        None
    }

    pub fn injectivity(&self) -> Injectivity<O> {
        let mut seen: BTreeMap<&O, &Trace> = BTreeMap::new();
        for e in &self.entries {
            if let Some(first) = seen.insert(&e.output, &e.trace) {
                return Injectivity::Collision {
                    first: first.clone(),
                    second: e.trace.clone(),
                    output: e.output.clone(),
                };
            }
        }
        Injectivity::Injective
    }
}

/// Whether distinct traces of `program` always produce distinct outputs.
pub fn check_trace_injective<P: RandomizedProgram + ?Sized>(
    program: &P,
    max_traces: usize,
) -> Result<Injectivity<P::Output>> {
    Ok(enumerate_traces(program, max_traces)?.injectivity())
}

/// Exact probability of every ordered sequence of `k` draws without
/// replacement from `probs`, obtained by zeroing each drawn entry and
/// renormalizing.
pub fn wor_sequence_distribution(probs: &[f64], k: usize) -> Result<BTreeMap<Vec<usize>, f64>> {
    let available = probs.iter().filter(|&&p| p > 0.0).count();
    if k > available {
        return Err(Error::KTooLarge { k, available });
    }
    let mut out = BTreeMap::new();
    let mut current = probs.to_vec();
    let mut prefix = Vec::with_capacity(k);
    extend_sequences(&mut current, k, 1.0, &mut prefix, &mut out);
    Ok(out)
}

fn extend_sequences(
    current: &mut [f64],
    k: usize,
    probability: f64,
    prefix: &mut Vec<usize>,
    out: &mut BTreeMap<Vec<usize>, f64>,
) {
    if prefix.len() == k {
        out.insert(prefix.clone(), probability);
        return;
    }
    let total: f64 = current.iter().sum();
    for i in 0..current.len() {
        let p = current[i];
        if p <= 0.0 {
            continue;
        }
        current[i] = 0.0;
        prefix.push(i);
        extend_sequences(current, k, probability * p / total, prefix, out);
        prefix.pop();
        current[i] = p;
    }
}

/// Exact probability of every unordered set of `k` draws without
/// replacement. Keys are sorted index lists.
pub fn wor_set_distribution(probs: &[f64], k: usize) -> Result<BTreeMap<Vec<usize>, f64>> {
    let mut out: BTreeMap<Vec<usize>, f64> = BTreeMap::new();
    for (mut seq, p) in wor_sequence_distribution(probs, k)? {
        seq.sort_unstable();
        *out.entry(seq).or_insert(0.0) += p;
    }
    Ok(out)
}

/// Optimal tour by dynamic programming over subsets.
pub fn held_karp(instance: &TspInstance) -> Result<Tour> {
    let n = instance.len();
    if n > HELD_KARP_LIMIT {
        return Err(Error::TooLarge {
            n,
            limit: HELD_KARP_LIMIT,
        });
    }
    // Paths start at node 0; subsets range over nodes 1..n, bit i-1 for node i.
    let m = n - 1;
    let full = (1usize << m) - 1;
    let mut cost = alloc::vec![f64::INFINITY; (1 << m) * m];
    let mut prev = alloc::vec![usize::MAX; (1 << m) * m];
    for j in 0..m {
        cost[(1 << j) * m + j] = instance.distance(0, j + 1);
    }
    for set in 1..=full {
        for j in (0..m).filter(|j| set & (1 << j) != 0) {
            let here = cost[set * m + j];
            if here == f64::INFINITY {
                continue;
            }
            for t in (0..m).filter(|t| set & (1 << t) == 0) {
                let next = set | (1 << t);
                let c = here + instance.distance(j + 1, t + 1);
                if c < cost[next * m + t] {
                    cost[next * m + t] = c;
                    prev[next * m + t] = j;
                }
            }
        }
    }
    let mut last = 0;
    for j in 1..m {
        let a = cost[full * m + j] + instance.distance(j + 1, 0);
        let b = cost[full * m + last] + instance.distance(last + 1, 0);
        if a < b {
            last = j;
        }
    }
    let mut order = Vec::with_capacity(n);
    let (mut set, mut j) = (full, last);
    while j != usize::MAX {
        order.push(j + 1);
        let p = prev[set * m + j];
        set &= !(1 << j);
        j = p;
    }
    order.push(0);
    order.reverse();
    Tour::new(instance, order)
}

/// Optimal tour by trying every permutation with node 0 fixed first.
pub fn brute_force_tsp(instance: &TspInstance) -> Result<Tour> {
    let n = instance.len();
    if n > BRUTE_FORCE_LIMIT {
        return Err(Error::TooLarge {
            n,
            limit: BRUTE_FORCE_LIMIT,
        });
    }
    let mut rest: Vec<usize> = (1..n).collect();
    let mut best: Option<(f64, Vec<usize>)> = None;
    permute(&mut rest, 0, &mut |perm| {
        let mut order = alloc::vec![0];
        order.extend_from_slice(perm);
        let c = crate::programs::tour_cost(instance, &order).expect("permutation is a tour");
        if best.as_ref().is_none_or(|(b, _)| c < *b) {
            best = Some((c, order));
        }
    });
    Tour::new(instance, best.expect("at least one permutation").1)
}

fn permute(items: &mut [usize], start: usize, visit: &mut dyn FnMut(&[usize])) {
    if start == items.len() {
        visit(items);
        return;
    }
    for i in start..items.len() {
        items.swap(start, i);
        permute(items, start + 1, visit);
        items.swap(start, i);
    }
}

/// Optimal tour for instances up to [`HELD_KARP_LIMIT`] nodes.
pub fn exact_tsp(instance: &TspInstance) -> Result<Tour> {
    held_karp(instance)
}
