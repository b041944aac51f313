use std::collections::BTreeSet;

use proptest::prelude::*;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use uniqrand_core::estimators::{hindsight_gumbels, weighted_samples};
use uniqrand_core::gumbel::{gumbel_survival, truncated_gumbel_from_uniform};
use uniqrand_core::oracle::{check_trace_injective, enumerate_traces, DEFAULT_MAX_TRACES};
use uniqrand_core::programs::{
    ExplicitProgram, FarthestInsertion, Figure3Program, MarkovSequenceModel, TspInstance,
};
use uniqrand_core::{
    run_with_replay, trace_probability, Distribution, DynamicSampler, Error, UniqueSampler,
};

fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

fn fuzzed(seed: u64) -> ExplicitProgram {
    ExplicitProgram::random(50, 6, &mut rng(seed)).unwrap()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn normalization_is_idempotent(w in prop::collection::vec(0.0f64..10.0, 1..12)) {
        prop_assume!(w.iter().any(|&x| x > 0.0));
        let d = Distribution::new(w).unwrap();
        let again = Distribution::new(d.weights().to_vec()).unwrap();
        prop_assert_eq!(d.weights(), again.weights());
        prop_assert!((d.weights().iter().sum::<f64>() - 1.0).abs() <= 1e-9);
    }

    #[test]
    fn enumerated_traces_form_a_distribution(seed in any::<u64>()) {
        let p = fuzzed(seed);
        let table = enumerate_traces(&p, DEFAULT_MAX_TRACES).unwrap();
        prop_assert_eq!(table.len(), p.leaves().len());
        prop_assert!((table.total_probability() - 1.0).abs() <= 1e-9);
        for e in &table.entries {
            prop_assert!(e.probability > 0.0 && e.probability <= 1.0);
            let replayed = trace_probability(&p, &e.trace).unwrap();
            prop_assert!((replayed - e.probability).abs() <= 1e-12);
            prop_assert_eq!(run_with_replay(&p, &e.trace).unwrap(), run_with_replay(&p, &e.trace).unwrap());
        }
        prop_assert!(table.injectivity().is_injective());
        prop_assert_eq!(table.check_prefix_partition(), None);
    }

    #[test]
    fn trie_masses_track_the_oracle(seed in any::<u64>()) {
        let p = fuzzed(seed);
        let table = enumerate_traces(&p, DEFAULT_MAX_TRACES).unwrap();
        let mut s = UniqueSampler::new(rng(seed ^ 0x5eed));
        let mut drawn = BTreeSet::new();
        let mut consumed = 0.0;
        for _ in 0..table.len() {
            let sample = s.sample_one(&p).unwrap();
            prop_assert!(drawn.insert(sample.trace.0.clone()), "duplicate trace");
            consumed += sample.probability;
            prop_assert!(s.mass_invariant_error() <= 1e-9);
            prop_assert!((s.remaining_mass() - (1.0 - consumed)).abs() <= 1e-9);
            for prefix in &table.internal_prefixes {
                if let Some(id) = s.node_at(prefix) {
                    let want = table.remaining_mass(prefix, &drawn);
                    prop_assert!((s.mass(id) - want).abs() <= 1e-9);
                }
            }
        }
        prop_assert_eq!(drawn.len(), table.len());
        prop_assert_eq!(s.remaining_mass().to_bits(), 0);
        prop_assert_eq!(s.sample_one(&p).unwrap_err(), Error::Exhausted);
    }

    #[test]
    fn operation_counts_are_linear_in_trace_length(seed in any::<u64>()) {
        let p = fuzzed(seed);
        let mut s = UniqueSampler::new(rng(seed));
        let samples = s.sample_wor(&p, 20).unwrap();
        let c = s.counters();
        let choices: u64 = samples.iter().map(|x| x.trace.len() as u64).sum();
        prop_assert_eq!(c.choices, choices);
        // One termination step per node on the path, root included.
        prop_assert_eq!(c.termination_steps, choices + samples.len() as u64);
        prop_assert!(c.distribution_computations <= choices);
    }

    #[test]
    fn dynamic_trie_without_edits_matches_plain_trie(seed in any::<u64>()) {
        let p = fuzzed(seed);
        let mut plain = UniqueSampler::new(rng(seed));
        let mut dynamic = DynamicSampler::new(rng(seed));
        let table = enumerate_traces(&p, DEFAULT_MAX_TRACES).unwrap();
        while let Ok(sample) = plain.sample_one(&p) {
            dynamic.insert_trace(&p, &sample.trace).unwrap();
            prop_assert!(dynamic.weighted_average_error() <= 1e-12);
            for prefix in &table.internal_prefixes {
                if let Some(id) = plain.node_at(prefix) {
                    let eff = dynamic.effective_mass(prefix).unwrap();
                    prop_assert!((plain.mass(id) - eff).abs() <= 1e-9);
                }
            }
        }
        prop_assert!(dynamic.is_root_exhausted());
    }

    #[test]
    fn dynamic_trie_edits_keep_weighted_average_law(seed in any::<u64>(), raw in prop::collection::vec(0.01f64..1.0, 3)) {
        let mut s = DynamicSampler::new(rng(seed));
        s.sample_wor(&Figure3Program, 4).unwrap();
        s.update_edge_probabilities(&[], &Distribution::new(raw).unwrap()).unwrap();
        prop_assert!(s.weighted_average_error() <= 1e-12);
        let more = s.sample_wor(&Figure3Program, 20).unwrap();
        prop_assert_eq!(more.len(), 10);
        prop_assert!(s.is_root_exhausted());
    }

    #[test]
    fn batches_never_repeat_and_keys_decrease(seed in any::<u64>(), sizes in prop::collection::vec(1usize..6, 1..5)) {
        let p = fuzzed(seed);
        let mut s = UniqueSampler::new(rng(seed));
        let mut seen = BTreeSet::new();
        for (i, &b) in sizes.iter().enumerate() {
            let fresh: Vec<_> = if i % 2 == 0 {
                match s.sample_batch_wor(&p, b) {
                    Ok(batch) => {
                        for w in batch.windows(2) {
                            prop_assert!(w[0].key.0 > w[1].key.0);
                        }
                        batch.into_iter().map(|x| x.trace).collect()
                    }
                    Err(Error::Exhausted) => break,
                    Err(e) => return Err(TestCaseError::fail(e.to_string())),
                }
            } else {
                s.sample_wor(&p, b).unwrap().into_iter().map(|x| x.trace).collect()
            };
            for t in fresh {
                prop_assert!(seen.insert(t));
            }
            prop_assert!(s.mass_invariant_error() <= 1e-9);
        }
    }

    #[test]
    fn estimator_weights_dominate_probabilities(seed in any::<u64>(), k in 1usize..30) {
        let p = fuzzed(seed);
        let mut s = UniqueSampler::new(rng(seed));
        let samples: Vec<(usize, f64)> =
            s.sample_wor(&p, k).unwrap().into_iter().enumerate().map(|(i, x)| (i, x.probability)).collect();
        let probs: Vec<f64> = samples.iter().map(|x| x.1).collect();
        let seq = hindsight_gumbels(&probs, &mut rng(!seed)).unwrap();
        let weighted = weighted_samples(&samples, seq.kappa);
        for w in &weighted {
            prop_assert!(w.weight >= w.probability);
        }
        let total: f64 = weighted.iter().map(|w| w.weight).sum();
        let normalized: f64 = weighted.iter().map(|w| w.weight / total).sum();
        prop_assert!((normalized - 1.0).abs() <= 1e-12);
    }

    #[test]
    fn truncated_gumbel_stays_below_bound(loc in -50.0f64..50.0, bound in -50.0f64..50.0, u in 1e-12f64..1.0) {
        let g = truncated_gumbel_from_uniform(loc, bound, u);
        prop_assert!(g < bound);
    }

    #[test]
    fn survival_is_monotone(loc in -20.0f64..20.0, kappa in -20.0f64..20.0, step in 0.01f64..5.0) {
        let q = gumbel_survival(loc, kappa);
        prop_assert!(q > 0.0 && q <= 1.0);
        prop_assert!(gumbel_survival(loc, kappa + step) <= q);
        prop_assert!(gumbel_survival(loc - step, kappa) <= q);
    }
}

#[test]
fn bundled_programs_are_injective() {
    assert!(check_trace_injective(&Figure3Program, 100)
        .unwrap()
        .is_injective());
    let mut r = rng(11);
    for (v, l, order) in [(2, 4, 0), (3, 3, 1), (3, 3, 2), (4, 2, 2)] {
        let m = MarkovSequenceModel::random(v, l, order, 1.0, &mut r).unwrap();
        assert!(check_trace_injective(&m, 1000).unwrap().is_injective());
    }
    for n in 4..=7 {
        let inst = TspInstance::random(n, &mut r).unwrap();
        for tau in [0.3, f64::INFINITY] {
            let p = FarthestInsertion::new(inst.clone(), tau);
            let table = enumerate_traces(&p, 10_000).unwrap();
            assert!(table.injectivity().is_injective());
            assert_eq!(table.check_prefix_partition(), None);
        }
    }
}

#[test]
fn tsp_wor_samples_are_distinct_tours() {
    let mut r = rng(12);
    for _ in 0..20 {
        let inst = TspInstance::random(8, &mut r).unwrap();
        let p = FarthestInsertion::new(inst, 0.3);
        let mut s = UniqueSampler::new(rng(3));
        let tours = s.sample_wor(&p, 60).unwrap();
        let distinct: BTreeSet<_> = tours.iter().map(|t| t.output.order.clone()).collect();
        assert_eq!(distinct.len(), tours.len());
        assert!(tours.iter().all(|t| t.trace.len() == 5));
    }
}
