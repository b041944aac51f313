//! Incremental batched sampling: stochastic beam search over the residual
//! masses stored in the trie.
//!
//! Beam states are trie nodes scored with their unsampled mass, so every
//! batch is drawn without replacement with respect to all earlier batches and
//! single draws. Nodes that were never visited are probed by running the
//! program up to them once; probes within a level are independent. Trie
//! masses are updated only after the batch is complete.

use alloc::vec::Vec;

use rand::Rng;

use crate::choice::{probe, Probe, RandomizedProgram, Trace};
use crate::error::{Error, Result};
use crate::gumbel::{sample_gumbel, GumbelKey};
use crate::sbs::{child_keys, prune, stream_seed, BeamEntry, KeyedSample};
use crate::trie::{NodeId, UniqueSampler};

#[derive(Debug, Clone)]
enum NodeState<O> {
    Open(NodeId),
    Done(NodeId, O),
}

impl<R: Rng> UniqueSampler<R> {
    /// Draws `batch_size` further distinct traces in one beam search (fewer if
    /// fewer remain), then removes them from the trie.
    pub fn sample_batch_wor<P: RandomizedProgram + ?Sized>(
        &mut self,
        program: &P,
        batch_size: usize,
    ) -> Result<Vec<KeyedSample<P::Output>>> {
        self.batch_with(batch_size, |paths| {
            paths.iter().map(|p| probe(program, p)).collect()
        })
    }

    /// [`sample_batch_wor`](Self::sample_batch_wor) with the probes of each
    /// level run on the rayon thread pool. Produces identical results.
    #[cfg(feature = "parallel")]
    pub fn sample_batch_wor_par<P>(
        &mut self,
        program: &P,
        batch_size: usize,
    ) -> Result<Vec<KeyedSample<P::Output>>>
    where
        P: RandomizedProgram + Sync + ?Sized,
        P::Output: Send,
    {
        use rayon::prelude::*;
        self.batch_with(batch_size, |paths| {
            paths.par_iter().map(|p| probe(program, p)).collect()
        })
    }

    fn batch_with<O, F>(&mut self, batch_size: usize, probe_level: F) -> Result<Vec<KeyedSample<O>>>
    where
        F: Fn(&[Vec<usize>]) -> Vec<Result<Probe<O>>>,
    {
        if self.is_mid_run() {
            return Err(Error::MidRun);
        }
        if self.is_exhausted(NodeId::ROOT) {
            return Err(Error::Exhausted);
        }
        if batch_size == 0 {
            return Ok(Vec::new());
        }
        let root_mass = self.remaining_mass();
        let root_key = sample_gumbel(libm::log(root_mass), &mut self.rng).0;
        let seed = stream_seed(&mut self.rng);
        let mut beam = alloc::vec![BeamEntry {
            prefix: Vec::new(),
            log_prob: libm::log(root_mass),
            key: root_key,
            state: NodeState::Open(NodeId::ROOT),
        }];

        while beam.iter().any(|e| matches!(e.state, NodeState::Open(_))) {
            let (open, mut candidates): (Vec<_>, Vec<_>) = beam
                .into_iter()
                .partition(|e| matches!(e.state, NodeState::Open(_)));

            // Unvisited nodes need one probe each; these are independent.
            let unvisited: Vec<usize> = open
                .iter()
                .enumerate()
                .filter(|(_, e)| match e.state {
                    NodeState::Open(id) => !self.is_expanded(id),
                    NodeState::Done(..) => false,
                })
                .map(|(i, _)| i)
                .collect();
            let paths: Vec<Vec<usize>> =
                unvisited.iter().map(|&i| open[i].prefix.clone()).collect();
            let mut probes = probe_level(&paths).into_iter();
            let mut outcomes: Vec<Option<Probe<O>>> = (0..open.len()).map(|_| None).collect();
            for &i in &unvisited {
                outcomes[i] = Some(probes.next().expect("one probe per path")?);
            }

            for (entry, outcome) in open.into_iter().zip(outcomes) {
                let NodeState::Open(id) = entry.state else {
                    unreachable!()
                };
                match outcome {
                    Some(Probe::Terminal(output)) => {
                        candidates.push(BeamEntry {
                            state: NodeState::Done(id, output),
                            ..entry
                        });
                        continue;
                    }
                    Some(Probe::Choice(dist)) => {
                        self.counters.distribution_computations += 1;
                        self.expand(id, &dist);
                    }
                    None => {}
                }
                let children: Vec<NodeId> = self.children(id).expect("expanded").collect();
                let log_masses: Vec<f64> =
                    children.iter().map(|&c| libm::log(self.mass(c))).collect();
                let keys = child_keys(&seed, &entry.prefix, &log_masses, entry.key);
                for (i, ((&child, log_mass), key)) in
                    children.iter().zip(log_masses).zip(keys).enumerate()
                {
                    if log_mass == f64::NEG_INFINITY {
                        continue;
                    }
                    let mut prefix = entry.prefix.clone();
                    prefix.push(i);
                    candidates.push(BeamEntry {
                        prefix,
                        log_prob: log_mass,
                        key,
                        state: NodeState::Open(child),
                    });
                }
            }
            prune(&mut candidates, batch_size);
            beam = candidates;
        }

        let mut samples = Vec::with_capacity(beam.len());
        for entry in beam {
            let NodeState::Done(id, output) = entry.state else {
                unreachable!()
            };
            let probability = self.mark_sampled(id);
            self.counters.runs += 1;
            samples.push(KeyedSample {
                output,
                trace: Trace(entry.prefix),
                probability,
                key: GumbelKey(entry.key),
            });
        }
        Ok(samples)
    }
}

#[cfg(test)]
mod tests {
    use crate::programs::Figure3Program;
    use crate::trie::UniqueSampler;
    use alloc::collections::BTreeSet;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn two_batches_cover_figure3() {
        for seed in 0..50 {
            let mut s = UniqueSampler::new(ChaCha8Rng::seed_from_u64(seed));
            let a = s.sample_batch_wor(&Figure3Program, 7).unwrap();
            let b = s.sample_batch_wor(&Figure3Program, 7).unwrap();
            assert_eq!((a.len(), b.len()), (7, 7));
            let traces: BTreeSet<_> = a.iter().chain(&b).map(|x| x.trace.clone()).collect();
            assert_eq!(traces.len(), 14);
            let total: f64 = a.iter().chain(&b).map(|x| x.probability).sum();
            assert!((total - 1.0).abs() < 1e-9);
            assert_eq!(s.remaining_mass(), 0.0);
            assert!(s.sample_batch_wor(&Figure3Program, 1).is_err());
            for w in a.windows(2) {
                assert!(w[0].key.0 > w[1].key.0);
            }
        }
    }

    #[test]
    fn batches_skip_earlier_single_draws() {
        for seed in 0..2000 {
            let mut s = UniqueSampler::new(ChaCha8Rng::seed_from_u64(seed));
            let first = s.sample_one(&Figure3Program).unwrap();
            let batch = s.sample_batch_wor(&Figure3Program, 5).unwrap();
            assert!(batch.iter().all(|x| x.trace != first.trace));
            assert!(s.mass_invariant_error() < 1e-12);
        }
    }

    #[test]
    fn oversized_batch_is_truncated_to_what_remains() {
        let mut s = UniqueSampler::new(ChaCha8Rng::seed_from_u64(3));
        s.sample_wor(&Figure3Program, 10).unwrap();
        let rest = s.sample_batch_wor(&Figure3Program, 10).unwrap();
        assert_eq!(rest.len(), 4);
        assert_eq!(s.remaining_mass().to_bits(), 0);
    }

    #[cfg(feature = "parallel")]
    #[test]
    fn parallel_batches_match_serial() {
        for seed in 0..20 {
            let mut a = UniqueSampler::new(ChaCha8Rng::seed_from_u64(seed));
            let mut b = UniqueSampler::new(ChaCha8Rng::seed_from_u64(seed));
            for _ in 0..3 {
                assert_eq!(
                    a.sample_batch_wor(&Figure3Program, 4).unwrap(),
                    b.sample_batch_wor_par(&Figure3Program, 4).unwrap()
                );
            }
        }
    }
}
