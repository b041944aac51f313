//! Program spec files and TSP instance files.
//!
//! A program spec is a JSON object whose `kind` is one of `figure3`,
//! `markov` or `explicit`:
//!
//! ```json
//! {"kind": "figure3"}
//! {"kind": "markov", "vocab": 2, "length": 3, "order": 1,
//!  "tables": [[0.9, 0.1], [0.2, 0.8], [0.5, 0.5]]}
//! {"kind": "explicit", "leaves": [{"trace": [0], "probability": 0.5},
//!                                 {"trace": [1, 0], "probability": 0.5}]}
//! ```
//!
//! Markov tables are listed by context index: with order `o` the context of
//! the previous `o` tokens `c_1 .. c_o` (oldest first, the padding symbol is
//! `vocab`) has index `sum c_i (vocab+1)^(o-i)`. A TSP instance file has the
//! node count on its first line followed by one `x y` pair per line.

use serde::Deserialize;
use uniqrand_core::programs::{ExplicitProgram, Figure3Program, MarkovSequenceModel, TspInstance};
use uniqrand_core::{ChoiceSource, Distribution, RandomizedProgram};

#[derive(Debug, thiserror::Error)]
pub enum FormatError {
    #[error("malformed program spec: {0}")]
    Json(#[from] serde_json::Error),
    #[error("line {line}: {message}")]
    Syntax { line: usize, message: String },
    #[error(transparent)]
    Invalid(#[from] uniqrand_core::Error),
}

#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase", deny_unknown_fields)]
pub enum ProgramSpec {
    Figure3,
    Markov {
        vocab: usize,
        length: usize,
        #[serde(default)]
        order: usize,
        tables: Vec<Vec<f64>>,
    },
    Explicit {
        leaves: Vec<LeafSpec>,
    },
}

#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LeafSpec {
    pub trace: Vec<usize>,
    pub probability: f64,
}

/// A program loaded from a spec. Outputs are token sequences.
#[derive(Debug, Clone, PartialEq)]
pub enum LoadedProgram {
    Figure3,
    Markov(MarkovSequenceModel),
    Explicit(ExplicitProgram),
}

impl ProgramSpec {
    pub fn build(self) -> Result<LoadedProgram, FormatError> {
        Ok(match self {
            ProgramSpec::Figure3 => LoadedProgram::Figure3,
            ProgramSpec::Markov {
                vocab,
                length,
                order,
                tables,
            } => {
                let tables = tables
                    .into_iter()
                    .map(Distribution::new)
                    .collect::<Result<Vec<_>, _>>()?;
                LoadedProgram::Markov(MarkovSequenceModel::new(vocab, length, order, tables)?)
            }
            ProgramSpec::Explicit { leaves } => LoadedProgram::Explicit(ExplicitProgram::new(
                leaves
                    .into_iter()
                    .map(|l| (l.trace, l.probability))
                    .collect(),
            )?),
        })
    }
}

pub fn parse_program_spec(text: &str) -> Result<LoadedProgram, FormatError> {
    serde_json::from_str::<ProgramSpec>(text)?.build()
}

impl RandomizedProgram for LoadedProgram {
    type Output = Vec<usize>;

    fn run(&self, c: &mut dyn ChoiceSource) -> uniqrand_core::Result<Vec<usize>> {
        match self {
            LoadedProgram::Figure3 => Ok(Figure3Program
                .run(c)?
                .into_iter()
                .map(usize::from)
                .collect()),
            LoadedProgram::Markov(m) => m.run(c),
            LoadedProgram::Explicit(e) => e.run(c),
        }
    }
}

pub fn parse_tsp_instance(text: &str) -> Result<TspInstance, FormatError> {
    let syntax = |line: usize, message: &str| FormatError::Syntax {
        line,
        message: message.to_owned(),
    };
    let mut lines = text
        .lines()
        .enumerate()
        .filter(|(_, l)| !l.trim().is_empty());
    let (first, header) = lines
        .next()
        .ok_or_else(|| syntax(1, "empty instance file"))?;
    let n: usize = header
        .trim()
        .parse()
        .map_err(|_| syntax(first + 1, "expected the node count"))?;
    let mut points = Vec::with_capacity(n);
    for (i, line) in lines {
        let mut fields = line.split_whitespace().map(str::parse::<f64>);
        match (fields.next(), fields.next(), fields.next()) {
            (Some(Ok(x)), Some(Ok(y)), None) if x.is_finite() && y.is_finite() => {
                points.push((x, y))
            }
            _ => return Err(syntax(i + 1, "expected two coordinates")),
        }
    }
    if points.len() != n {
        return Err(syntax(
            first + 1,
            &format!("declared {n} nodes but found {}", points.len()),
        ));
    }
    Ok(TspInstance::new(points)?)
}

pub fn write_tsp_instance(instance: &TspInstance) -> String {
    let mut out = format!("{}\n", instance.len());
    for (x, y) in instance.points() {
        out.push_str(&format!("{x} {y}\n"));
    }
    out
}
