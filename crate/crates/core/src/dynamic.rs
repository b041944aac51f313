//! Trie variant that supports editing the factorized distribution.
//!
//! Nodes store the unsampled *fraction* of their total probability and edges
//! store the probability of following them. The unsampled mass of a node is
//! the product of edge probabilities from the root times its fraction, so
//! the plain sampler's behavior is recovered while edge probabilities stay
//! editable after sampling has begun.

use alloc::vec::Vec;

use rand::Rng;

use crate::choice::{select_proportional, ChoiceSource, Distribution, RandomizedProgram, Trace};
use crate::error::{Error, Result};
use crate::trie::{NodeId, Sample};

#[derive(Debug, Clone)]
struct DynamicNode {
    fraction: f64,
    /// Probability of the edge from the parent into this node.
    edge: f64,
    parent: Option<NodeId>,
    children: Option<(usize, usize)>,
    leaf: bool,
}

/// Sampler without replacement over an editable factorized distribution.
#[derive(Debug, Clone)]
pub struct DynamicSampler<R> {
    nodes: Vec<DynamicNode>,
    cur: NodeId,
    trace: Vec<usize>,
    running: bool,
    forced: Option<Vec<usize>>,
    rng: R,
}

impl<R: Rng> DynamicSampler<R> {
    pub fn new(rng: R) -> Self {
        Self {
            nodes: alloc::vec![DynamicNode {
                fraction: 1.0,
                edge: 1.0,
                parent: None,
                children: None,
                leaf: false,
            }],
            cur: NodeId::ROOT,
            trace: Vec::new(),
            running: false,
            forced: None,
            rng,
        }
    }

    fn child(&self, id: NodeId, index: usize) -> Option<NodeId> {
        let (first, len) = self.nodes[id.0].children?;
        (index < len).then_some(NodeId(first + index))
    }

    fn node_at(&self, path: &[usize]) -> Result<NodeId> {
        path.iter()
            .try_fold(NodeId::ROOT, |id, &index| self.child(id, index))
            .ok_or_else(|| Error::UnknownPath(path.to_vec()))
    }

    fn is_exhausted(&self, id: NodeId) -> bool {
        let node = &self.nodes[id.0];
        if node.leaf {
            return true;
        }
        match node.children {
            None => false,
            Some((first, len)) => self.nodes[first..first + len]
                .iter()
                .all(|c| c.edge * c.fraction == 0.0),
        }
    }

    /// Unsampled fraction stored at the node reached by `path`.
    pub fn unsampled_fraction(&self, path: &[usize]) -> Result<f64> {
        Ok(self.nodes[self.node_at(path)?.0].fraction)
    }

    /// Outgoing edge probabilities at `path`, if the node is expanded.
    pub fn edge_probabilities(&self, path: &[usize]) -> Result<Option<Vec<f64>>> {
        let id = self.node_at(path)?;
        Ok(self.nodes[id.0].children.map(|(first, len)| {
            self.nodes[first..first + len]
                .iter()
                .map(|c| c.edge)
                .collect()
        }))
    }

    /// Unsampled probability mass of the node at `path`: the product of edge
    /// probabilities along the path times the node's unsampled fraction.
    pub fn effective_mass(&self, path: &[usize]) -> Result<f64> {
        let mut id = NodeId::ROOT;
        let mut product = 1.0;
        for &index in path {
            id = self
                .child(id, index)
                .ok_or_else(|| Error::UnknownPath(path.to_vec()))?;
            product *= self.nodes[id.0].edge;
        }
        Ok(product * self.nodes[id.0].fraction)
    }

    pub fn remaining_mass(&self) -> f64 {
        self.nodes[0].fraction
    }

    pub fn is_root_exhausted(&self) -> bool {
        self.is_exhausted(NodeId::ROOT)
    }

    pub fn node_count(&self) -> usize {
        self.nodes.len()
    }

    fn recompute(&mut self, id: NodeId) {
        let node = &self.nodes[id.0];
        let fraction = if node.leaf {
            0.0
        } else if let Some((first, len)) = node.children {
            let sum: f64 = self.nodes[first..first + len]
                .iter()
                .map(|c| c.edge * c.fraction)
                .sum();
            sum.clamp(0.0, 1.0)
        } else {
            return;
        };
        self.nodes[id.0].fraction = fraction;
    }

    fn recompute_upwards(&mut self, from: NodeId) {
        let mut node = Some(from);
        while let Some(id) = node {
            self.recompute(id);
            node = self.nodes[id.0].parent;
        }
    }

    /// Replaces the outgoing edge probabilities of the expanded node at
    /// `path` and refreshes the fractions of the node and its ancestors.
    ///
    /// Only allowed between runs.
    pub fn update_edge_probabilities(
        &mut self,
        path: &[usize],
        new_probs: &Distribution,
    ) -> Result<()> {
        if self.running {
            return Err(Error::MidRun);
        }
        let id = self.node_at(path)?;
        let (first, len) = self.nodes[id.0]
            .children
            .ok_or_else(|| Error::UnknownPath(path.to_vec()))?;
        if new_probs.len() != len {
            return Err(Error::LengthMismatch {
                expected: len,
                found: new_probs.len(),
            });
        }
        for (node, &p) in self.nodes[first..first + len]
            .iter_mut()
            .zip(new_probs.weights())
        {
            node.edge = p;
        }
        self.recompute_upwards(id);
        Ok(())
    }

    /// Largest deviation from the weighted-average law over expanded nodes.
    pub fn weighted_average_error(&self) -> f64 {
        let mut worst = 0.0f64;
        for node in &self.nodes {
            if !(0.0..=1.0).contains(&node.fraction) || (node.leaf && node.fraction != 0.0) {
                return f64::INFINITY;
            }
            if let Some((first, len)) = node.children {
                let sum: f64 = self.nodes[first..first + len]
                    .iter()
                    .map(|c| c.edge * c.fraction)
                    .sum();
                worst = worst.max((node.fraction - sum).abs());
            }
        }
        worst
    }

    fn begin_run(&mut self) -> Result<()> {
        if self.running {
            return Ok(());
        }
        if self.is_exhausted(NodeId::ROOT) {
            return Err(Error::Exhausted);
        }
        self.running = true;
        self.cur = NodeId::ROOT;
        self.trace.clear();
        Ok(())
    }

    fn abort_run(&mut self) {
        self.running = false;
        self.cur = NodeId::ROOT;
        self.trace.clear();
        self.forced = None;
    }

    /// The random choice operation; children are weighted by edge
    /// probability times unsampled fraction.
    pub fn random_choice(&mut self, dist: Option<&Distribution>) -> Result<usize> {
        self.begin_run()?;
        let cur = self.cur;
        if self.is_exhausted(cur) {
            return Err(Error::Exhausted);
        }
        match (self.nodes[cur.0].children, dist) {
            (None, None) => return Err(Error::MissingDistribution),
            (None, Some(dist)) => {
                let first = self.nodes.len();
                self.nodes
                    .extend(dist.weights().iter().map(|&p| DynamicNode {
                        fraction: 1.0,
                        edge: p,
                        parent: Some(cur),
                        children: None,
                        leaf: false,
                    }));
                self.nodes[cur.0].children = Some((first, dist.len()));
            }
            (Some((_, len)), Some(dist)) if dist.len() != len => {
                return Err(Error::DistributionMismatch {
                    expected: len,
                    found: dist.len(),
                })
            }
            _ => {}
        }
        let (first, len) = self.nodes[cur.0].children.expect("expanded above");
        let weights: Vec<f64> = self.nodes[first..first + len]
            .iter()
            .map(|c| c.edge * c.fraction)
            .collect();
        let index = match &self.forced {
            Some(forced) => {
                let index = *forced
                    .get(self.trace.len())
                    .ok_or(Error::TraceMismatch("trace is shorter than the execution"))?;
                match weights.get(index) {
                    Some(&w) if w > 0.0 => index,
                    Some(_) => {
                        return Err(Error::TraceMismatch(
                            "trace was already sampled or has zero probability",
                        ))
                    }
                    None => return Err(Error::TraceMismatch("choice index out of range")),
                }
            }
            None => {
                let u: f64 = self.rng.random();
                select_proportional(&weights, u).ok_or(Error::Exhausted)?
            }
        };
        self.cur = NodeId(first + index);
        self.trace.push(index);
        Ok(index)
    }

    /// Marks the current node as a sampled leaf and refreshes its ancestors.
    /// Returns the completed trace and the probability mass it held.
    pub fn process_termination(&mut self) -> Result<(Trace, f64)> {
        if !self.running {
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
        let probability = self.effective_mass(&self.trace)?;
        self.nodes[leaf.0].leaf = true;
        self.nodes[leaf.0].fraction = 0.0;
        if let Some(parent) = self.nodes[leaf.0].parent {
            self.recompute_upwards(parent);
        }
        self.running = false;
        self.cur = NodeId::ROOT;
        self.forced = None;
        Ok((Trace(core::mem::take(&mut self.trace)), probability))
    }

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

    pub fn sample_wor<P: RandomizedProgram + ?Sized>(
        &mut self,
        program: &P,
        k: usize,
    ) -> Result<Vec<Sample<P::Output>>> {
        let mut samples = Vec::new();
        for _ in 0..k {
            match self.sample_one(program) {
                Ok(sample) => samples.push(sample),
                Err(Error::Exhausted) => break,
                Err(e) => return Err(e),
            }
        }
        Ok(samples)
    }

    /// Records `trace` as sampled by running the program along it.
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
}

impl<R: Rng> ChoiceSource for DynamicSampler<R> {
    fn choose_from(&mut self, dist: Option<&Distribution>) -> Result<usize> {
        self.random_choice(dist)
    }

    fn needs_distribution(&self) -> bool {
        let id = if self.running { self.cur } else { NodeId::ROOT };
        self.nodes[id.0].children.is_none()
    }
}
