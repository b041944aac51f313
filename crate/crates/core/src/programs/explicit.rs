use alloc::collections::{BTreeMap, BTreeSet};
use alloc::vec::Vec;

use rand::Rng;

use crate::choice::{ChoiceSource, Distribution, RandomizedProgram};
use crate::error::{Error, Result};

/// A program given by its complete list of traces and their probabilities.
///
/// At every prefix the next choice is distributed according to the total
/// probability of the leaves below each child. The output is the trace.
#[derive(Debug, Clone, PartialEq)]
pub struct ExplicitProgram {
    leaves: Vec<(Vec<usize>, f64)>,
    leaf_set: BTreeSet<Vec<usize>>,
    choices: BTreeMap<Vec<usize>, Distribution>,
}

impl ExplicitProgram {
    /// Builds the program from `(trace, weight)` pairs. Weights are
    /// normalized; traces must be distinct and no trace may be a prefix of
    /// another.
    pub fn new(leaves: Vec<(Vec<usize>, f64)>) -> Result<Self> {
        if leaves.is_empty() {
            return Err(Error::EmptyDistribution);
        }
        let weights: Vec<f64> = leaves.iter().map(|(_, w)| *w).collect();
        let normalized = Distribution::new(weights)?;
        let leaves: Vec<(Vec<usize>, f64)> = leaves
            .into_iter()
            .zip(normalized.weights())
            .map(|((t, _), &p)| (t, p))
            .collect();

        let leaf_set: BTreeSet<Vec<usize>> = leaves.iter().map(|(t, _)| t.clone()).collect();
        if leaf_set.len() != leaves.len() {
            return Err(Error::InvalidProgram("duplicate trace"));
        }
        let mut child_mass: BTreeMap<Vec<usize>, Vec<f64>> = BTreeMap::new();
        for (trace, p) in &leaves {
            for depth in 0..trace.len() {
                let prefix = &trace[..depth];
                if leaf_set.contains(prefix) {
                    return Err(Error::InvalidProgram(
                        "a trace is a prefix of another trace",
                    ));
                }
                let slot = child_mass.entry(prefix.to_vec()).or_default();
                let index = trace[depth];
                if slot.len() <= index {
                    slot.resize(index + 1, 0.0);
                }
                slot[index] += p;
            }
        }
        let choices = child_mass
            .into_iter()
            .map(|(prefix, masses)| Ok((prefix, Distribution::new(masses)?)))
            .collect::<Result<_>>()?;
        Ok(Self {
            leaves,
            leaf_set,
            choices,
        })
    }

    /// A random prefix-free trace tree with at most `max_leaves` leaves,
    /// branching factor 1 to 3 and depth at most `max_depth`.
    pub fn random<R: Rng + ?Sized>(
        max_leaves: usize,
        max_depth: usize,
        rng: &mut R,
    ) -> Result<Self> {
        let mut leaves = Vec::new();
        let mut frontier = alloc::vec![Vec::new()];
        while let Some(prefix) = frontier.pop() {
            let room = max_leaves.saturating_sub(leaves.len() + frontier.len());
            let stop = prefix.len() >= max_depth
                || room < 2
                || (!prefix.is_empty() && rng.random_bool(0.35));
            if stop {
                let w: f64 = rng.random_range(0.05..1.0);
                leaves.push((prefix, w * w));
                continue;
            }
            let arity = rng.random_range(2..=3usize).min(room);
            for i in 0..arity {
                let mut child = prefix.clone();
                child.push(i);
                frontier.push(child);
            }
        }
        Self::new(leaves)
    }

    pub fn leaves(&self) -> &[(Vec<usize>, f64)] {
        &self.leaves
    }
}

impl RandomizedProgram for ExplicitProgram {
    type Output = Vec<usize>;

    fn run(&self, c: &mut dyn ChoiceSource) -> Result<Vec<usize>> {
        let mut prefix = Vec::new();
        while !self.leaf_set.contains(&prefix) {
            let dist = self
                .choices
                .get(&prefix)
                .ok_or(Error::TraceMismatch("prefix leads to no trace"))?;
            let index = c.choose_lazy(&mut || dist.clone())?;
            prefix.push(index);
        }
        Ok(prefix)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::choice::trace_probability;
    use alloc::vec;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn leaf_probabilities_are_reproduced() {
        let p = ExplicitProgram::new(vec![(vec![0], 2.0), (vec![1, 0], 1.0), (vec![1, 2], 1.0)])
            .unwrap();
        assert!((trace_probability(&p, &[0]).unwrap() - 0.5).abs() < 1e-15);
        assert!((trace_probability(&p, &[1, 2]).unwrap() - 0.25).abs() < 1e-15);
        assert!(trace_probability(&p, &[1, 1]).is_err());
    }

    #[test]
    fn rejects_prefix_and_duplicates() {
        assert!(ExplicitProgram::new(vec![(vec![0], 1.0), (vec![0, 1], 1.0)]).is_err());
        assert!(ExplicitProgram::new(vec![(vec![0], 1.0), (vec![0], 1.0)]).is_err());
        assert!(ExplicitProgram::new(vec![]).is_err());
    }

    #[test]
    fn random_trees_respect_the_cap() {
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        for _ in 0..200 {
            let p = ExplicitProgram::random(50, 6, &mut rng).unwrap();
            assert!(p.leaves().len() <= 50 && !p.leaves().is_empty());
        }
    }
}
