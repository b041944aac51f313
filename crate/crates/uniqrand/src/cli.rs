//! Command-line interface. Every command writes one CSV table.
//!
//! Exit codes: 0 on success (including early exhaustion), 1 on usage
//! errors, 2 when an input file cannot be parsed.

use std::ffi::OsString;
use std::io::Write;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};

use crate::experiments::{
    aggregate_tsp, bench, estimate_experiment, sample_program, tsp_compare, tsp_trials,
    BenchConfig, EstimateConfig, Estimator, Method, TspAggregate, TspConfig,
};
use crate::formats::{parse_program_spec, parse_tsp_instance, FormatError, LoadedProgram};
use crate::report::{list, num, Table};
use crate::stats::{mean, quantile, variance};
use uniqrand_core::programs::default_temperature;

pub const EXIT_OK: i32 = 0;
pub const EXIT_USAGE: i32 = 1;
pub const EXIT_PARSE: i32 = 2;

#[derive(Debug, Parser)]
#[command(
    name = "uniqrand",
    version,
    about = "Sampling without replacement from randomized programs"
)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Args)]
pub struct Common {
    /// Seed for all randomness.
    #[arg(long, default_value_t = 0, global = true)]
    pub seed: u64,
    /// Write the CSV here instead of standard output.
    #[arg(long, global = true)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Draw samples from a program spec file.
    Sample {
        /// JSON program spec; the built-in toy program when omitted.
        #[arg(long)]
        program: Option<PathBuf>,
        #[arg(long, value_enum, default_value_t = Method::Wor)]
        method: Method,
        #[arg(long, default_value_t = 10)]
        k: usize,
        /// Batch size for `--method batched`; defaults to `k`.
        #[arg(long)]
        batch_size: Option<usize>,
        #[command(flatten)]
        common: Common,
    },
    /// Compare samplers on the farthest-insertion TSP heuristic.
    Tsp {
        /// Instance file; random instances are generated when omitted.
        #[arg(long)]
        instance: Option<PathBuf>,
        /// Nodes per random instance.
        #[arg(long, default_value_t = 10)]
        n: usize,
        /// Number of random instances.
        #[arg(long, default_value_t = 1)]
        trials: usize,
        /// Samples per method.
        #[arg(long, default_value_t = 100)]
        k: usize,
        /// Insertion temperature; defaults by instance size.
        #[arg(long)]
        temperature: Option<f64>,
        #[arg(long, default_value_t = 10)]
        batch_size: usize,
        /// Methods to run after the greedy baseline; all when omitted.
        #[arg(long, value_enum, value_delimiter = ',')]
        method: Vec<Method>,
        #[command(flatten)]
        common: Common,
    },
    /// Estimator trajectories on the rank-power benchmark.
    Estimate {
        /// Number of sampled sequences.
        #[arg(long, default_value_t = 2000)]
        trials: usize,
        /// Sample sizes to report.
        #[arg(long, value_delimiter = ',', default_values_t = [1, 2, 5, 10, 20, 50, 100])]
        k: Vec<usize>,
        /// Hindsight redraws for the repeated estimator.
        #[arg(long, default_value_t = 10)]
        repeats: usize,
        #[arg(long, default_value_t = 100)]
        elements: usize,
        #[command(flatten)]
        common: Common,
    },
    /// Operation counts of the samplers on a synthetic sequence model.
    Bench {
        #[arg(long, default_value_t = 5)]
        length: usize,
        #[arg(long, default_value_t = 8)]
        vocab: usize,
        #[arg(long, default_value_t = 4)]
        k: usize,
        #[arg(long, default_value_t = 20)]
        trials: usize,
        #[command(flatten)]
        common: Common,
    },
}

#[derive(Debug, thiserror::Error)]
enum CliError {
    #[error("{0}")]
    Usage(String),
    #[error("{path}: {source}")]
    Parse { path: String, source: FormatError },
    #[error("{0}")]
    Io(#[from] std::io::Error),
    #[error(transparent)]
    Sampling(#[from] uniqrand_core::Error),
}

impl CliError {
    fn exit_code(&self) -> i32 {
        match self {
            CliError::Parse { .. } => EXIT_PARSE,
            _ => EXIT_USAGE,
        }
    }
}

/// Parses `args` (program name first) and runs the command.
pub fn run<I, T>(args: I, stdout: &mut dyn Write, stderr: &mut dyn Write) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            if e.use_stderr() {
                let _ = write!(stderr, "{}", e.render());
                return EXIT_USAGE;
            }
            let _ = write!(stdout, "{}", e.render());
            return EXIT_OK;
        }
    };
    match execute(cli.command, stdout) {
        Ok(()) => EXIT_OK,
        Err(e) => {
            let _ = writeln!(stderr, "error: {e}");
            e.exit_code()
        }
    }
}

fn read(path: &PathBuf) -> Result<String, CliError> {
    std::fs::read_to_string(path)
        .map_err(|e| CliError::Usage(format!("cannot read {}: {e}", path.display())))
}

fn parse_error(path: &Path) -> impl FnOnce(FormatError) -> CliError + '_ {
    move |source| CliError::Parse {
        path: path.display().to_string(),
        source,
    }
}

fn emit(table: Table, out: Option<&PathBuf>, stdout: &mut dyn Write) -> Result<(), CliError> {
    match out {
        Some(path) => std::fs::write(path, table.into_string())?,
        None => table.write_to(stdout)?,
    }
    Ok(())
}

fn execute(command: Command, stdout: &mut dyn Write) -> Result<(), CliError> {
    match command {
        Command::Sample {
            program,
            method,
            k,
            batch_size,
            common,
        } => {
            let program = match &program {
                Some(path) => parse_program_spec(&read(path)?).map_err(parse_error(path))?,
                None => LoadedProgram::Figure3,
            };
            let run = sample_program(&program, method, k, batch_size.unwrap_or(k), common.seed)?;
            let mut table = Table::new(&[
                "index",
                "output",
                "trace",
                "probability",
                "cumulative_mass",
                "duplicate",
            ]);
            for (i, row) in run.rows.iter().enumerate() {
                table.row([
                    i.to_string(),
                    list(&row.output),
                    list(&row.trace),
                    num(row.probability),
                    num(row.cumulative_mass),
                    row.duplicate.to_string(),
                ]);
            }
            if run.exhausted {
                let mass = run.rows.last().map_or(0.0, |r| r.cumulative_mass);
                table.row([
                    "exhausted".into(),
                    String::new(),
                    String::new(),
                    String::new(),
                    num(mass),
                    String::new(),
                ]);
            }
            emit(table, common.out.as_ref(), stdout)
        }
        Command::Tsp {
            instance,
            n,
            trials,
            k,
            temperature,
            batch_size,
            method,
            common,
        } => {
            let methods = if method.is_empty() {
                Method::ALL.to_vec()
            } else {
                method
            };
            let config = |n: usize| TspConfig {
                samples: k,
                temperature: temperature.unwrap_or_else(|| default_temperature(n)),
                batch_size,
                methods: methods.clone(),
            };
            if temperature.is_some_and(|t| t.is_nan() || t < 0.0) {
                return Err(CliError::Usage("temperature must be non-negative".into()));
            }
            let results = match &instance {
                Some(path) => {
                    let inst = parse_tsp_instance(&read(path)?).map_err(parse_error(path))?;
                    vec![tsp_compare(&inst, &config(inst.len()), common.seed)?]
                }
                None => tsp_trials(n, trials, &config(n), common.seed)?,
            };
            emit(
                tsp_table(&aggregate_tsp(&results)),
                common.out.as_ref(),
                stdout,
            )
        }
        Command::Estimate {
            trials,
            k,
            repeats,
            elements,
            common,
        } => {
            if repeats == 0 || k.iter().any(|&k| k == 0 || k > elements) {
                return Err(CliError::Usage(
                    "need 1 <= k <= elements and repeats >= 1".into(),
                ));
            }
            let config = EstimateConfig {
                elements,
                sequences: trials,
                ks: k,
                repeats,
            };
            let results = estimate_experiment(&config, common.seed)?;
            let mut table = Table::new(&[
                "estimator",
                "k",
                "mean",
                "std",
                "q05",
                "q25",
                "q50",
                "q75",
                "q95",
                "truth",
            ]);
            for e in Estimator::ALL {
                for &k in &config.ks {
                    let mut xs = results.estimates[&(e, k)].clone();
                    xs.sort_by(f64::total_cmp);
                    let std = if xs.len() > 1 {
                        variance(&xs).sqrt()
                    } else {
                        0.0
                    };
                    let mut row =
                        vec![e.name().to_owned(), k.to_string(), num(mean(&xs)), num(std)];
                    row.extend([0.05, 0.25, 0.5, 0.75, 0.95].map(|q| num(quantile(&xs, q))));
                    row.push(num(results.truth));
                    table.row(row);
                }
            }
            emit(table, common.out.as_ref(), stdout)
        }
        Command::Bench {
            length,
            vocab,
            k,
            trials,
            common,
        } => {
            if length == 0 || vocab == 0 || k == 0 {
                return Err(CliError::Usage(
                    "length, vocab and k must be positive".into(),
                ));
            }
            let rows = bench(
                &BenchConfig {
                    length,
                    vocab,
                    k,
                    trials,
                },
                common.seed,
            )?;
            let mut table = Table::new(&[
                "method",
                "length",
                "vocab",
                "k",
                "batches",
                "expansions",
                "distribution_computations",
                "nodes_allocated",
            ]);
            for r in rows {
                table.row([
                    r.method.to_owned(),
                    length.to_string(),
                    vocab.to_string(),
                    k.to_string(),
                    r.batches.map_or(String::new(), |b| b.to_string()),
                    num(r.expansions),
                    num(r.distribution_computations),
                    r.nodes_allocated.map_or(String::new(), num),
                ]);
            }
            emit(table, common.out.as_ref(), stdout)
        }
    }
}

fn tsp_table(rows: &[TspAggregate]) -> Table {
    let mut table = Table::new(&[
        "method",
        "instances",
        "samples",
        "best_cost",
        "mean_cost",
        "duplicates",
        "distribution_computations",
        "expansions",
        "gap",
    ]);
    for r in rows {
        table.row([
            r.method.to_owned(),
            r.instances.to_string(),
            num(r.mean_samples),
            num(r.mean_best_cost),
            num(r.mean_mean_cost),
            r.total_duplicates.to_string(),
            num(r.mean_distribution_computations),
            num(r.mean_expansions),
            r.mean_gap.map_or(String::new(), num),
        ]);
    }
    table
}
