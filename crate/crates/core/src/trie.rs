//! The augmented trie behind incremental sampling without replacement.
//!
//! Every node stores the unsampled probability mass of the traces below it.
//! Children are created the first time a node is visited, a child is picked
//! with probability proportional to its mass, and when a run terminates the
//! sampled leaf's mass is subtracted from the leaf and all of its ancestors.
//! Exhausted nodes are tracked exactly: a leaf is set to zero and an ancestor
//! whose children all hold exactly zero is set to zero instead of subtracted.

use alloc::vec::Vec;

use rand::Rng;

use crate::choice::{select_proportional, ChoiceSource, Distribution, RandomizedProgram, Trace};
use crate::error::{Error, Result};

/// Index of a node in the trie arena.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct NodeId(pub(crate) usize);

impl NodeId {
    pub const ROOT: NodeId = NodeId(0);
}

#[derive(Debug, Clone)]
pub(crate) struct TrieNode {
    pub(crate) mass: f64,
    pub(crate) parent: Option<NodeId>,
    /// `(first, len)` into the arena; children are allocated contiguously.
    pub(crate) children: Option<(usize, usize)>,
    pub(crate) leaf: bool,
}

/// Operation counts used to check the cost contract and to compare samplers.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct Counters {
    /// Completed runs (terminations processed).
    pub runs: u64,
    /// Calls to the random choice operation.
    pub choices: u64,
    /// Nodes whose children were initialized.
    pub expansions: u64,
    /// Distributions handed over by the program.
    pub distribution_computations: u64,
    /// Trie nodes allocated, including the root.
    pub nodes_allocated: u64,
    /// Child entries visited while selecting an index.
    pub scan_steps: u64,
    /// Nodes updated while processing terminations.
    pub termination_steps: u64,
}

/// One sampled trace with its program output.
#[derive(Debug, Clone, PartialEq)]
pub struct Sample<O> {
    pub output: O,
    pub trace: Trace,
    pub probability: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum RunState {
    Idle,
    Running,
}

/// Sampler without replacement backed by the augmented trie.
///
/// The sampler is itself a [`ChoiceSource`]: hand it to a program, then call
/// [`process_termination`](Self::process_termination) when the program
/// returns. [`sample_wor`](Self::sample_wor) wraps that loop.
#[derive(Debug, Clone)]
pub struct UniqueSampler<R> {
    pub(crate) nodes: Vec<TrieNode>,
    cur: NodeId,
    trace: Vec<usize>,
    state: RunState,
    forced: Option<Vec<usize>>,
    pub(crate) rng: R,
    pub(crate) counters: Counters,
}

impl<R: Rng> UniqueSampler<R> {
    pub fn new(rng: R) -> Self {
        Self {
            nodes: alloc::vec![TrieNode {
                mass: 1.0,
                parent: None,
                children: None,
                leaf: false,
            }],
            cur: NodeId::ROOT,
            trace: Vec::new(),
            state: RunState::Idle,
            forced: None,
            rng,
            counters: Counters {
                nodes_allocated: 1,
                ..Counters::default()
            },
        }
    }

    pub fn root(&self) -> NodeId {
        NodeId::ROOT
    }

    pub fn remaining_mass(&self) -> f64 {
        self.nodes[0].mass
    }

    pub fn mass(&self, id: NodeId) -> f64 {
        self.nodes[id.0].mass
    }

    pub fn is_leaf(&self, id: NodeId) -> bool {
        self.nodes[id.0].leaf
    }

    pub fn is_expanded(&self, id: NodeId) -> bool {
        self.nodes[id.0].children.is_some()
    }

    pub fn parent(&self, id: NodeId) -> Option<NodeId> {
        self.nodes[id.0].parent
    }

    /// Children of `id`, or `None` if it has never been sampled from.
    pub fn children(&self, id: NodeId) -> Option<impl Iterator<Item = NodeId>> {
        self.nodes[id.0]
            .children
            .map(|(first, len)| (first..first + len).map(NodeId))
    }

    pub fn child(&self, id: NodeId, index: usize) -> Option<NodeId> {
        let (first, len) = self.nodes[id.0].children?;
        (index < len).then_some(NodeId(first + index))
    }

    /// Follows `path` from the root.
    pub fn node_at(&self, path: &[usize]) -> Option<NodeId> {
        path.iter()
            .try_fold(NodeId::ROOT, |id, &index| self.child(id, index))
    }

    /// The choice path from the root to `id`.
    pub fn path_of(&self, id: NodeId) -> Vec<usize> {
        let mut path = Vec::new();
        let mut node = id;
        while let Some(parent) = self.nodes[node.0].parent {
            let (first, _) = self.nodes[parent.0].children.expect("parent is expanded");
            path.push(node.0 - first);
            node = parent;
        }
        path.reverse();
        path
    }

    /// Whether every trace below `id` has been sampled.
    ///
    /// True for leaves and for sampled-from nodes whose children all hold
    /// exactly zero mass; false for nodes that were never sampled from.
    pub fn is_exhausted(&self, id: NodeId) -> bool {
        let node = &self.nodes[id.0];
        if node.leaf {
            return true;
        }
        match node.children {
            None => false,
            Some((first, len)) => self.nodes[first..first + len].iter().all(|c| c.mass == 0.0),
        }
    }

    pub fn node_count(&self) -> usize {
        self.nodes.len()
    }

    pub fn counters(&self) -> Counters {
        self.counters
    }

    pub fn rng_mut(&mut self) -> &mut R {
        &mut self.rng
    }

    /// Whether a run is in progress.
    pub fn is_mid_run(&self) -> bool {
        self.state == RunState::Running
    }

    /// Choices made so far in the current run.
    pub fn current_prefix(&self) -> &[usize] {
        &self.trace
    }

    /// Starts a run. Called implicitly by the first choice of a run; needed
    /// explicitly only for programs that may terminate without any choice.
    pub fn begin_run(&mut self) -> Result<()> {
        if self.state == RunState::Running {
            return Ok(());
        }
        if self.is_exhausted(NodeId::ROOT) {
            return Err(Error::Exhausted);
        }
        self.state = RunState::Running;
        self.cur = NodeId::ROOT;
        self.trace.clear();
        Ok(())
    }

    /// Abandons the current run without touching any mass.
    pub fn abort_run(&mut self) {
        self.state = RunState::Idle;
        self.cur = NodeId::ROOT;
        self.trace.clear();
        self.forced = None;
    }

    pub(crate) fn expand(&mut self, id: NodeId, dist: &Distribution) {
        let first = self.nodes.len();
        let parent_mass = self.nodes[id.0].mass;
        self.nodes.extend(dist.weights().iter().map(|&p| TrieNode {
            mass: p * parent_mass,
            parent: Some(id),
            children: None,
            leaf: false,
        }));
        self.nodes[id.0].children = Some((first, dist.len()));
        self.counters.expansions += 1;
        self.counters.nodes_allocated += dist.len() as u64;
    }

    /// The random choice operation.
    pub fn random_choice(&mut self, dist: Option<&Distribution>) -> Result<usize> {
        self.begin_run()?;
        if dist.is_some() {
            self.counters.distribution_computations += 1;
        }
        let cur = self.cur;
        if self.is_exhausted(cur) {
            return Err(Error::Exhausted);
        }
        match (self.nodes[cur.0].children, dist) {
            (None, None) => return Err(Error::MissingDistribution),
            (None, Some(dist)) => self.expand(cur, dist),
            (Some((_, len)), Some(dist)) if dist.len() != len => {
                return Err(Error::DistributionMismatch {
                    expected: len,
                    found: dist.len(),
                })
            }
            _ => {}
        }
        let (first, len) = self.nodes[cur.0].children.expect("expanded above");
        let children = &self.nodes[first..first + len];
        self.counters.choices += 1;
        self.counters.scan_steps += len as u64;

        let index = match &self.forced {
            Some(forced) => {
                let index = *forced
                    .get(self.trace.len())
                    .ok_or(Error::TraceMismatch("trace is shorter than the execution"))?;
                match children.get(index) {
                    Some(child) if child.mass > 0.0 => index,
                    Some(_) => {
                        return Err(Error::TraceMismatch(
                            "trace was already sampled or has zero probability",
                        ))
                    }
                    None => return Err(Error::TraceMismatch("choice index out of range")),
                }
            }
            None => {
                let masses: Vec<f64> = children.iter().map(|c| c.mass).collect();
                let u: f64 = self.rng.random();
                select_proportional(&masses, u).ok_or(Error::Exhausted)?
            }
        };
        self.cur = NodeId(first + index);
        self.trace.push(index);
        Ok(index)
    }

    /// Marks the current node as a sampled leaf and removes its mass from
    /// every ancestor. Returns the completed trace and its probability.
    pub fn process_termination(&mut self) -> Result<(Trace, f64)> {
        if self.state != RunState::Running {
            return Err(Error::NotMidRun);
        }
        let leaf = self.cur;
        if let Some((_, len)) = self.nodes[leaf.0].children {
            self.abort_run();
            return Err(Error::DistributionMismatch {
                expected: len,
                found: 0,
            });
        }
        let probability = self.mark_sampled(leaf);
        self.state = RunState::Idle;
        self.cur = NodeId::ROOT;
        self.forced = None;
        self.counters.runs += 1;
        Ok((Trace(core::mem::take(&mut self.trace)), probability))
    }

    /// Removes the mass of the unexpanded node `leaf` from the trie and marks
    /// it as a leaf. Returns the removed mass.
    pub(crate) fn mark_sampled(&mut self, leaf: NodeId) -> f64 {
        let probability = self.nodes[leaf.0].mass;
        self.nodes[leaf.0].leaf = true;
        let mut node = Some(leaf);
        while let Some(id) = node {
            self.counters.termination_steps += 1;
            let updated = if self.is_exhausted(id) {
                0.0
            } else {
                (self.nodes[id.0].mass - probability).max(0.0)
            };
            self.nodes[id.0].mass = updated;
            node = self.nodes[id.0].parent;
        }
        probability
    }

    /// Draws up to `k` further distinct traces, stopping early once the trace
    /// space is exhausted. The trie is kept, so later calls continue where
    /// this one stopped.
    pub fn sample_wor<P: RandomizedProgram + ?Sized>(
        &mut self,
        program: &P,
        k: usize,
    ) -> Result<Vec<Sample<P::Output>>> {
        let mut samples = Vec::with_capacity(k.min(1024));
        for _ in 0..k {
            match self.sample_one(program) {
                Ok(sample) => samples.push(sample),
                Err(Error::Exhausted) => break,
                Err(e) => return Err(e),
            }
        }
        Ok(samples)
    }

    /// Draws one further distinct trace.
    pub fn sample_one<P: RandomizedProgram + ?Sized>(
        &mut self,
        program: &P,
    ) -> Result<Sample<P::Output>> {
        self.abort_run();
        self.begin_run()?;
        let output = match program.run(self) {
            Ok(output) => output,
            Err(e) => {
                self.abort_run();
                return Err(e);
            }
        };
        let (trace, probability) = self.process_termination()?;
        Ok(Sample {
            output,
            trace,
            probability,
        })
    }

    /// Runs `program` along the given trace and records it as sampled, so it
    /// is excluded from all later draws.
    pub fn insert_trace<P: RandomizedProgram + ?Sized>(
        &mut self,
        program: &P,
        trace: &[usize],
    ) -> Result<Sample<P::Output>> {
        self.abort_run();
        self.begin_run()?;
        self.forced = Some(trace.to_vec());
        let output = match program.run(self) {
            Ok(output) if self.trace.len() == trace.len() => output,
            Ok(_) => {
                self.abort_run();
                return Err(Error::TraceMismatch("trace is longer than the execution"));
            }
            Err(e) => {
                self.abort_run();
                return Err(e);
            }
        };
        let (trace, probability) = self.process_termination()?;
        Ok(Sample {
            output,
            trace,
            probability,
        })
    }

    /// Largest violation of the mass invariants over all expanded nodes:
    /// `|mass - sum(children)|`, or infinity if a node with all-zero children
    /// holds nonzero mass or any mass leaves `[0, 1]`.
    pub fn mass_invariant_error(&self) -> f64 {
        let mut worst = 0.0f64;
        for node in &self.nodes {
            if !(0.0..=1.0).contains(&node.mass) {
                return f64::INFINITY;
            }
            if node.leaf && node.mass != 0.0 {
                return f64::INFINITY;
            }
            if let Some((first, len)) = node.children {
                let children = &self.nodes[first..first + len];
                if children.iter().all(|c| c.mass == 0.0) {
                    if node.mass != 0.0 {
                        return f64::INFINITY;
                    }
                    continue;
                }
                let sum: f64 = children.iter().map(|c| c.mass).sum();
                worst = worst.max((node.mass - sum).abs());
            }
        }
        worst
    }
}

impl<R: Rng> ChoiceSource for UniqueSampler<R> {
    fn choose_from(&mut self, dist: Option<&Distribution>) -> Result<usize> {
        self.random_choice(dist)
    }

    fn needs_distribution(&self) -> bool {
        if self.state == RunState::Idle {
            return self.nodes[0].children.is_none();
        }
        self.nodes[self.cur.0].children.is_none()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::programs::{Figure3Program, MarkovSequenceModel};
    use alloc::collections::BTreeSet;
    use alloc::vec;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn sampler(seed: u64) -> UniqueSampler<ChaCha8Rng> {
        UniqueSampler::new(ChaCha8Rng::seed_from_u64(seed))
    }

    fn close(a: f64, b: f64) -> bool {
        (a - b).abs() < 1e-12
    }

    #[test]
    fn fresh_sampler() {
        let s = sampler(0);
        assert_eq!(s.remaining_mass(), 1.0);
        assert!(!s.is_exhausted(s.root()));
        assert!(s.needs_distribution());
        assert_eq!(s.node_count(), 1);
    }

    #[test]
    fn first_choice_creates_children_from_distribution() {
        let mut s = sampler(1);
        let d = Distribution::new([0.5, 0.4, 0.1]).unwrap();
        s.random_choice(Some(&d)).unwrap();
        let masses: Vec<f64> = s.children(s.root()).unwrap().map(|c| s.mass(c)).collect();
        assert_eq!(masses, vec![0.5, 0.4, 0.1]);
    }

    #[test]
    fn figure3_termination_subtracts_leaf_mass() {
        let mut s = sampler(2);
        let sample = s.insert_trace(&Figure3Program, &[1, 0, 1]).unwrap();
        assert_eq!(sample.trace, Trace::new([1, 0, 1]));
        assert_eq!(sample.output, vec![0, 1]);
        assert!(close(sample.probability, 0.27));
        assert!(close(s.remaining_mass(), 0.73));
        let masses: Vec<f64> = s.children(s.root()).unwrap().map(|c| s.mass(c)).collect();
        assert!(close(masses[0], 0.5) && close(masses[1], 0.13) && close(masses[2], 0.1));
        let leaf = s.node_at(&[1, 0, 1]).unwrap();
        assert!(s.is_leaf(leaf));
        assert!(s.is_exhausted(leaf));
        assert_eq!(s.mass(leaf), 0.0);
    }

    #[test]
    fn single_outcome_program_exhausts_after_one_run() {
        let p = MarkovSequenceModel::deterministic(1, 1).unwrap();
        let mut s = sampler(3);
        let out = s.sample_wor(&p, 5).unwrap();
        assert_eq!(out.len(), 1);
        assert_eq!(s.remaining_mass().to_bits(), 0.0f64.to_bits());
        assert!(s.is_exhausted(s.root()));
        assert_eq!(
            s.random_choice(Some(&Distribution::new([1.0]).unwrap())),
            Err(Error::Exhausted)
        );
    }

    #[test]
    fn figure3_exhaustion_is_exact() {
        for seed in 0..20 {
            let mut s = sampler(seed);
            let out = s.sample_wor(&Figure3Program, 20).unwrap();
            assert_eq!(out.len(), 14);
            let traces: BTreeSet<_> = out.iter().map(|x| x.trace.clone()).collect();
            assert_eq!(traces.len(), 14);
            let total: f64 = out.iter().map(|x| x.probability).sum();
            assert!((total - 1.0).abs() < 1e-9);
            assert_eq!(s.remaining_mass().to_bits(), 0u64);
            assert!(s.is_exhausted(s.root()));
            assert_eq!(s.sample_one(&Figure3Program).unwrap_err(), Error::Exhausted);
            assert_eq!(s.mass_invariant_error(), 0.0);
        }
    }

    #[test]
    fn zero_samples_leave_sampler_untouched() {
        let mut s = sampler(4);
        assert!(s.sample_wor(&Figure3Program, 0).unwrap().is_empty());
        assert_eq!(s.node_count(), 1);
        assert_eq!(
            s.counters(),
            Counters {
                nodes_allocated: 1,
                ..Counters::default()
            }
        );
    }

    #[test]
    fn revisits_use_stored_masses() {
        let mut s = sampler(5);
        s.sample_wor(&Figure3Program, 1).unwrap();
        s.begin_run().unwrap();
        assert!(!s.needs_distribution());
        s.random_choice(None).unwrap();
    }

    #[test]
    fn distribution_length_mismatch_is_rejected() {
        let mut s = sampler(6);
        s.random_choice(Some(&Distribution::uniform(3).unwrap()))
            .unwrap();
        s.process_termination().unwrap();
        assert_eq!(
            s.random_choice(Some(&Distribution::uniform(2).unwrap())),
            Err(Error::DistributionMismatch {
                expected: 3,
                found: 2
            })
        );
    }

    #[test]
    fn unexpanded_node_needs_a_distribution() {
        let mut s = sampler(7);
        assert_eq!(s.random_choice(None), Err(Error::MissingDistribution));
    }

    #[test]
    fn termination_twice_is_an_error() {
        let mut s = sampler(8);
        s.sample_wor(&Figure3Program, 1).unwrap();
        assert_eq!(s.process_termination(), Err(Error::NotMidRun));
    }

    #[test]
    fn zero_probability_children_are_never_selected() {
        let d = Distribution::new([0.0, 1.0, 0.0]).unwrap();
        for seed in 0..50 {
            let mut s = sampler(seed);
            assert_eq!(s.random_choice(Some(&d)).unwrap(), 1);
            s.process_termination().unwrap();
            assert!(s.is_exhausted(s.root()));
            assert_eq!(s.remaining_mass(), 0.0);
        }
    }

    #[test]
    fn each_internal_node_computes_its_distribution_once() {
        let mut s = sampler(9);
        s.sample_wor(&Figure3Program, 14).unwrap();
        // 12 distinct proper prefixes among the 14 complete traces.
        assert_eq!(s.counters().distribution_computations, 12);
        assert_eq!(s.counters().expansions, 12);
    }

    #[test]
    fn path_round_trips() {
        let mut s = sampler(10);
        s.sample_wor(&Figure3Program, 5).unwrap();
        for i in 0..s.node_count() {
            let id = NodeId(i);
            assert_eq!(s.node_at(&s.path_of(id)), Some(id));
        }
    }

    #[test]
    fn inserting_a_sampled_trace_fails() {
        let mut s = sampler(11);
        s.insert_trace(&Figure3Program, &[0, 1]).unwrap();
        assert!(matches!(
            s.insert_trace(&Figure3Program, &[0, 1]),
            Err(Error::TraceMismatch(_))
        ));
        assert!(!s.is_mid_run());
        assert!(matches!(
            s.insert_trace(&Figure3Program, &[0, 0, 1]),
            Err(Error::TraceMismatch(_))
        ));
    }
}
