//! The computations behind the command-line tools. Each function is a pure
//! function of its configuration, seed included; trials run on the rayon
//! pool but every trial owns a random stream derived from the seed and its
//! index, and results are collected in trial order.

use std::collections::{BTreeMap, BTreeSet};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use uniqrand_core::estimators::{
    exact_expectation, hge_estimate, rank_power_benchmark, repeated_hge_estimate, tge_estimate,
};
use uniqrand_core::oracle::{exact_tsp, HELD_KARP_LIMIT};
use uniqrand_core::programs::{
    greedy_farthest_insertion, CategoricalProgram, ExplicitProgram, FarthestInsertion,
    MarkovSequenceModel, TspInstance,
};
use uniqrand_core::{
    stochastic_beam_search, Distribution, Error, ProgramExpander, RandomizedProgram, RngSource,
    Trace, UniqueSampler,
};

/// How samples are drawn.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, clap::ValueEnum)]
pub enum Method {
    /// Independent runs, with replacement.
    Iid,
    /// One run at a time through the trie.
    Wor,
    /// Stochastic Beam Search.
    Sbs,
    /// Beam-search batches over the trie.
    Batched,
}

impl Method {
    pub const ALL: [Method; 4] = [Method::Iid, Method::Wor, Method::Sbs, Method::Batched];

    pub fn name(self) -> &'static str {
        match self {
            Method::Iid => "iid",
            Method::Wor => "wor",
            Method::Sbs => "sbs",
            Method::Batched => "batched",
        }
    }
}

/// Random stream for trial `index` of an experiment seeded with `seed`.
pub fn trial_rng(seed: u64, index: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(index);
    rng
}

fn fork(rng: &mut ChaCha8Rng) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(rng.random())
}

#[derive(Debug, Clone, PartialEq)]
pub struct SampleRow<O> {
    pub output: O,
    pub trace: Trace,
    pub probability: f64,
    /// Total probability of the distinct traces drawn so far.
    pub cumulative_mass: f64,
    pub duplicate: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SampleRun<O> {
    pub rows: Vec<SampleRow<O>>,
    /// Fewer than `k` distinct traces existed.
    pub exhausted: bool,
}

/// Draws `k` samples with `method`. `batch_size` only affects
/// [`Method::Batched`]; it is capped by `k`.
pub fn sample_program<P: RandomizedProgram>(
    program: &P,
    method: Method,
    k: usize,
    batch_size: usize,
    seed: u64,
) -> Result<SampleRun<P::Output>, Error> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut drawn: Vec<(P::Output, Trace, f64)> = Vec::with_capacity(k.min(1 << 16));
    let mut exhausted = false;
    match method {
        Method::Iid => {
            let mut source = RngSource::new(rng);
            for _ in 0..k {
                drawn.push(source.sample(program)?);
            }
        }
        Method::Wor => {
            let mut sampler = UniqueSampler::new(rng);
            drawn.extend(
                sampler
                    .sample_wor(program, k)?
                    .into_iter()
                    .map(|s| (s.output, s.trace, s.probability)),
            );
            exhausted = drawn.len() < k;
        }
        Method::Sbs => {
            if k > 0 {
                let result = stochastic_beam_search(&ProgramExpander(program), k, &mut rng)?;
                drawn.extend(
                    result
                        .samples
                        .into_iter()
                        .map(|s| (s.output, s.trace, s.probability)),
                );
            }
            exhausted = drawn.len() < k;
        }
        Method::Batched => {
            let size = batch_size.clamp(1, k.max(1));
            let mut sampler = UniqueSampler::new(rng);
            while drawn.len() < k {
                let want = size.min(k - drawn.len());
                let batch = match sampler.sample_batch_wor(program, want) {
                    Ok(batch) => batch,
                    Err(Error::Exhausted) => Vec::new(),
                    Err(e) => return Err(e),
                };
                let got = batch.len();
                drawn.extend(
                    batch
                        .into_iter()
                        .map(|s| (s.output, s.trace, s.probability)),
                );
                if got < want {
                    exhausted = true;
                    break;
                }
            }
        }
    }
    let mut seen = BTreeSet::new();
    let mut cumulative_mass = 0.0;
    let rows = drawn
        .into_iter()
        .map(|(output, trace, probability)| {
            let duplicate = !seen.insert(trace.clone());
            if !duplicate {
                cumulative_mass += probability;
            }
            SampleRow {
                output,
                trace,
                probability,
                cumulative_mass,
                duplicate,
            }
        })
        .collect();
    Ok(SampleRun { rows, exhausted })
}

/// Results of one method on one TSP instance.
#[derive(Debug, Clone, PartialEq)]
pub struct TspOutcome {
    pub method: &'static str,
    pub samples: usize,
    pub best_cost: f64,
    pub mean_cost: f64,
    pub duplicates: usize,
    pub distribution_computations: u64,
    pub expansions: u64,
    /// Relative excess of `best_cost` over the optimum, when it is known.
    pub gap: Option<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct TspConfig {
    pub samples: usize,
    pub temperature: f64,
    pub batch_size: usize,
    pub methods: Vec<Method>,
}

fn tsp_outcome(
    method: &'static str,
    tours: &[(Vec<usize>, f64)],
    counts: (u64, u64),
    optimum: Option<f64>,
) -> TspOutcome {
    let best_cost = tours.iter().map(|t| t.1).fold(f64::INFINITY, f64::min);
    let distinct: BTreeSet<&Vec<usize>> = tours.iter().map(|t| &t.0).collect();
    TspOutcome {
        method,
        samples: tours.len(),
        best_cost,
        mean_cost: tours.iter().map(|t| t.1).sum::<f64>() / tours.len() as f64,
        duplicates: tours.len() - distinct.len(),
        distribution_computations: counts.0,
        expansions: counts.1,
        gap: optimum.map(|opt| best_cost / opt - 1.0),
    }
}

/// A tour's node order and its cost.
type TourCost = (Vec<usize>, f64);

/// Greedy insertion followed by each configured sampling method.
pub fn tsp_compare(
    instance: &TspInstance,
    config: &TspConfig,
    seed: u64,
) -> Result<Vec<TspOutcome>, Error> {
    let optimum = if instance.len() <= HELD_KARP_LIMIT {
        Some(exact_tsp(instance)?.cost)
    } else {
        None
    };
    let greedy = greedy_farthest_insertion(instance);
    let mut out = vec![tsp_outcome(
        "greedy",
        &[(greedy.order, greedy.cost)],
        (0, 0),
        optimum,
    )];
    let program = FarthestInsertion::new(instance.clone(), config.temperature);
    let k = config.samples;
    for &method in &config.methods {
        let mut rng = trial_rng(seed, method as u64);
        let (tours, counts): (Vec<TourCost>, (u64, u64)) = match method {
            Method::Iid => {
                let mut source = RngSource::new(fork(&mut rng));
                let tours = (0..k)
                    .map(|_| source.sample(&program).map(|(t, _, _)| (t.order, t.cost)))
                    .collect::<Result<_, _>>()?;
                let dc = source.distribution_computations();
                (tours, (dc, dc))
            }
            Method::Wor => {
                let mut sampler = UniqueSampler::new(fork(&mut rng));
                let tours = sampler
                    .sample_wor(&program, k)?
                    .into_iter()
                    .map(|s| (s.output.order, s.output.cost))
                    .collect();
                let c = sampler.counters();
                (tours, (c.distribution_computations, c.expansions))
            }
            Method::Sbs => {
                let result = stochastic_beam_search(&ProgramExpander(&program), k, &mut rng)?;
                let tours = result
                    .samples
                    .into_iter()
                    .map(|s| (s.output.order, s.output.cost))
                    .collect();
                (tours, (result.expansions, result.expansions))
            }
            Method::Batched => {
                let mut sampler = UniqueSampler::new(fork(&mut rng));
                let size = config.batch_size.clamp(1, k.max(1));
                let mut tours = Vec::with_capacity(k);
                while tours.len() < k {
                    let batch = match sampler.sample_batch_wor(&program, size.min(k - tours.len()))
                    {
                        Ok(batch) if !batch.is_empty() => batch,
                        Ok(_) | Err(Error::Exhausted) => break,
                        Err(e) => return Err(e),
                    };
                    tours.extend(batch.into_iter().map(|s| (s.output.order, s.output.cost)));
                }
                let c = sampler.counters();
                (tours, (c.distribution_computations, c.expansions))
            }
        };
        out.push(tsp_outcome(method.name(), &tours, counts, optimum));
    }
    Ok(out)
}

/// Per-method averages over a set of instances.
#[derive(Debug, Clone, PartialEq)]
pub struct TspAggregate {
    pub method: &'static str,
    pub instances: usize,
    pub mean_samples: f64,
    pub mean_best_cost: f64,
    pub mean_mean_cost: f64,
    pub total_duplicates: usize,
    pub mean_distribution_computations: f64,
    pub mean_expansions: f64,
    pub mean_gap: Option<f64>,
}

pub fn aggregate_tsp(per_instance: &[Vec<TspOutcome>]) -> Vec<TspAggregate> {
    let Some(first) = per_instance.first() else {
        return Vec::new();
    };
    let n = per_instance.len() as f64;
    (0..first.len())
        .map(|m| {
            let rows: Vec<&TspOutcome> = per_instance.iter().map(|r| &r[m]).collect();
            let mean = |f: &dyn Fn(&TspOutcome) -> f64| rows.iter().map(|r| f(r)).sum::<f64>() / n;
            TspAggregate {
                method: rows[0].method,
                instances: rows.len(),
                mean_samples: mean(&|r| r.samples as f64),
                mean_best_cost: mean(&|r| r.best_cost),
                mean_mean_cost: mean(&|r| r.mean_cost),
                total_duplicates: rows.iter().map(|r| r.duplicates).sum(),
                mean_distribution_computations: mean(&|r| r.distribution_computations as f64),
                mean_expansions: mean(&|r| r.expansions as f64),
                mean_gap: rows
                    .iter()
                    .map(|r| r.gap)
                    .collect::<Option<Vec<f64>>>()
                    .map(|g| g.iter().sum::<f64>() / n),
            }
        })
        .collect()
}

/// Runs [`tsp_compare`] on `trials` random instances with `n` nodes.
pub fn tsp_trials(
    n: usize,
    trials: usize,
    config: &TspConfig,
    seed: u64,
) -> Result<Vec<Vec<TspOutcome>>, Error> {
    (0..trials)
        .into_par_iter()
        .map(|t| {
            let mut rng = trial_rng(seed, t as u64);
            let instance = TspInstance::random(n, &mut rng)?;
            tsp_compare(&instance, config, rng.random())
        })
        .collect()
}

/// Estimators compared by [`estimate_experiment`].
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord)]
pub enum Estimator {
    MonteCarlo,
    Hindsight,
    HindsightNormalized,
    HindsightRepeatedNormalized,
    Threshold,
}

impl Estimator {
    pub const ALL: [Estimator; 5] = [
        Estimator::MonteCarlo,
        Estimator::Hindsight,
        Estimator::HindsightNormalized,
        Estimator::HindsightRepeatedNormalized,
        Estimator::Threshold,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Estimator::MonteCarlo => "mc",
            Estimator::Hindsight => "hge",
            Estimator::HindsightNormalized => "hge_normalized",
            Estimator::HindsightRepeatedNormalized => "hge_repeated_normalized",
            Estimator::Threshold => "tge",
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct EstimateConfig {
    pub elements: usize,
    pub sequences: usize,
    pub ks: Vec<usize>,
    pub repeats: usize,
}

impl Default for EstimateConfig {
    fn default() -> Self {
        Self {
            elements: 100,
            sequences: 2000,
            ks: vec![1, 2, 5, 10, 20, 50, 100],
            repeats: 10,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct EstimateResults {
    pub truth: f64,
    /// One estimate per sequence, in sequence order.
    pub estimates: BTreeMap<(Estimator, usize), Vec<f64>>,
}

/// Estimates `E_p[f]` on the rank-power benchmark from growing prefixes of
/// sampled sequences. Each sequence draws one WOR ordering and one i.i.d.
/// sample stream; the threshold estimator runs its own beam search per `k`.
pub fn estimate_experiment(config: &EstimateConfig, seed: u64) -> Result<EstimateResults, Error> {
    let (probs, values) = rank_power_benchmark(config.elements);
    let truth = exact_expectation(&probs, &values);
    let dist = Distribution::new(probs.clone())?;
    let program = CategoricalProgram(dist.clone());
    let max_k = config.ks.iter().copied().max().unwrap_or(0);
    if max_k > config.elements {
        return Err(Error::KTooLarge {
            k: max_k,
            available: config.elements,
        });
    }
    let f = |i: &usize| values[*i];
    let per_sequence: Vec<Vec<(Estimator, usize, f64)>> = (0..config.sequences)
        .into_par_iter()
        .map(|s| {
            let mut rng = trial_rng(seed, s as u64);
            let mut sampler = UniqueSampler::new(fork(&mut rng));
            let ordered: Vec<(usize, f64)> = sampler
                .sample_wor(&program, max_k)?
                .into_iter()
                .map(|x| (x.output, x.probability))
                .collect();
            let iid: Vec<usize> = (0..max_k).map(|_| dist.sample(&mut rng)).collect();
            let mut row = Vec::with_capacity(config.ks.len() * Estimator::ALL.len());
            for &k in &config.ks {
                let prefix = &ordered[..k];
                let mc = iid[..k].iter().map(f).sum::<f64>() / k as f64;
                row.push((Estimator::MonteCarlo, k, mc));
                row.push((
                    Estimator::Hindsight,
                    k,
                    hge_estimate(prefix, f, false, &mut rng)?,
                ));
                row.push((
                    Estimator::HindsightNormalized,
                    k,
                    hge_estimate(prefix, f, true, &mut rng)?,
                ));
                row.push((
                    Estimator::HindsightRepeatedNormalized,
                    k,
                    repeated_hge_estimate(prefix, f, true, config.repeats, &mut rng)?,
                ));
                let beam = stochastic_beam_search(&ProgramExpander(&program), k, &mut rng)?;
                row.push((Estimator::Threshold, k, tge_estimate(&beam, f, false)));
            }
            Ok(row)
        })
        .collect::<Result<_, Error>>()?;
    let mut estimates: BTreeMap<(Estimator, usize), Vec<f64>> = BTreeMap::new();
    for row in per_sequence {
        for (e, k, v) in row {
            estimates.entry((e, k)).or_default().push(v);
        }
    }
    Ok(EstimateResults { truth, estimates })
}

/// Operation counts of one sampler configuration.
#[derive(Debug, Clone, PartialEq)]
pub struct BenchRow {
    pub method: &'static str,
    pub batches: Option<usize>,
    pub expansions: f64,
    pub distribution_computations: f64,
    pub nodes_allocated: Option<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct BenchConfig {
    pub length: usize,
    pub vocab: usize,
    pub k: usize,
    pub trials: usize,
}

/// A space where every trace shares its first `length - 1` choices, which
/// are forced, and the last choice is uniform over `vocab` outcomes.
pub fn best_case_program(length: usize, vocab: usize) -> Result<ExplicitProgram, Error> {
    let leaves = (0..vocab)
        .map(|i| {
            let mut trace = vec![0; length.saturating_sub(1)];
            trace.push(i);
            (trace, 1.0)
        })
        .collect();
    ExplicitProgram::new(leaves)
}

/// Divisors of `k`, each a number of equal batches.
pub fn batch_counts(k: usize) -> Vec<usize> {
    (1..=k).filter(|b| k.is_multiple_of(*b)).collect()
}

/// Counts expansions of each sampler drawing `k` sequences from a random
/// first-order Markov model, averaged over `trials` sampler seeds.
pub fn bench(config: &BenchConfig, seed: u64) -> Result<Vec<BenchRow>, Error> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let model = MarkovSequenceModel::random(config.vocab, config.length, 1, 1.0, &mut rng)?;
    let best_case = best_case_program(config.length, config.vocab.max(config.k))?;
    let trials = config.trials.max(1);
    let k = config.k;

    let mut rows = Vec::new();
    let mut average =
        |method: &'static str,
         batches: Option<usize>,
         run: &(dyn Fn(u64) -> Result<(u64, u64, Option<u64>), Error> + Sync)| {
            let counts = (0..trials as u64)
                .into_par_iter()
                .map(run)
                .collect::<Result<Vec<_>, Error>>()?;
            let n = trials as f64;
            rows.push(BenchRow {
                method,
                batches,
                expansions: counts.iter().map(|c| c.0 as f64).sum::<f64>() / n,
                distribution_computations: counts.iter().map(|c| c.1 as f64).sum::<f64>() / n,
                nodes_allocated: counts
                    .iter()
                    .map(|c| c.2)
                    .collect::<Option<Vec<u64>>>()
                    .map(|v| v.iter().sum::<u64>() as f64 / n),
            });
            Ok::<(), Error>(())
        };

    average("sbs", None, &|t| {
        let r = stochastic_beam_search(&model, k, &mut trial_rng(seed, t))?;
        Ok((r.expansions, r.expansions, None))
    })?;
    average("wor", None, &|t| {
        let mut s = UniqueSampler::new(trial_rng(seed, t));
        s.sample_wor(&model, k)?;
        let c = s.counters();
        Ok((
            c.expansions,
            c.distribution_computations,
            Some(c.nodes_allocated),
        ))
    })?;
    average("wor_best_case", None, &|t| {
        let mut s = UniqueSampler::new(trial_rng(seed, t));
        s.sample_wor(&best_case, k)?;
        let c = s.counters();
        Ok((
            c.expansions,
            c.distribution_computations,
            Some(c.nodes_allocated),
        ))
    })?;
    for b in batch_counts(k) {
        average("batched", Some(b), &|t| {
            let mut s = UniqueSampler::new(trial_rng(seed, t));
            for _ in 0..b {
                s.sample_batch_wor(&model, k / b)?;
            }
            let c = s.counters();
            Ok((
                c.expansions,
                c.distribution_computations,
                Some(c.nodes_allocated),
            ))
        })?;
    }
    Ok(rows)
}

#[cfg(test)]
mod tests {
    use super::*;
    use uniqrand_core::programs::Figure3Program;

    #[test]
    fn every_method_covers_figure3() {
        for method in [Method::Wor, Method::Sbs, Method::Batched] {
            let run = sample_program(&Figure3Program, method, 14, 3, 1).unwrap();
            assert_eq!(run.rows.len(), 14);
            assert!(!run.exhausted);
            assert!(run.rows.iter().all(|r| !r.duplicate));
            assert!((run.rows.last().unwrap().cumulative_mass - 1.0).abs() < 1e-9);
            let more = sample_program(&Figure3Program, method, 20, 3, 1).unwrap();
            assert_eq!(more.rows.len(), 14);
            assert!(more.exhausted);
        }
        let iid = sample_program(&Figure3Program, Method::Iid, 200, 1, 1).unwrap();
        assert!(iid.rows.iter().any(|r| r.duplicate));
        assert!(sample_program(&Figure3Program, Method::Iid, 0, 1, 1)
            .unwrap()
            .rows
            .is_empty());
    }

    #[test]
    fn best_case_space_needs_one_expansion_per_level() {
        let rows = bench(
            &BenchConfig {
                length: 6,
                vocab: 4,
                k: 4,
                trials: 3,
            },
            0,
        )
        .unwrap();
        let best = rows.iter().find(|r| r.method == "wor_best_case").unwrap();
        assert_eq!(best.expansions, 6.0);
        let sbs = rows.iter().find(|r| r.method == "sbs").unwrap();
        assert_eq!(sbs.expansions, (1 + 5 * 4) as f64);
    }

    #[test]
    fn tsp_methods_report_all_rows() {
        let instance = TspInstance::random(8, &mut ChaCha8Rng::seed_from_u64(4)).unwrap();
        let config = TspConfig {
            samples: 30,
            temperature: 0.3,
            batch_size: 10,
            methods: Method::ALL.to_vec(),
        };
        let rows = tsp_compare(&instance, &config, 9).unwrap();
        assert_eq!(
            rows.iter().map(|r| r.method).collect::<Vec<_>>(),
            ["greedy", "iid", "wor", "sbs", "batched"]
        );
        for r in &rows[2..] {
            assert_eq!(r.duplicates, 0);
            assert_eq!(r.samples, 30);
        }
        assert!(rows.iter().all(|r| r.gap.unwrap() >= -1e-12));
    }
}
