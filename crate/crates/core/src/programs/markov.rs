use alloc::vec::Vec;

use rand::Rng;

use crate::choice::{ChoiceSource, Distribution, RandomizedProgram};
use crate::error::{Error, Result};
use crate::gumbel::open_uniform;
use crate::sbs::{Branch, Expander, Expansion, Step};

/// Table-driven sequence model emitting a fixed number of tokens.
///
/// The next token is drawn from a table selected by the previous `order`
/// tokens (at most 2). Positions before the start of the sequence read as
/// the padding symbol `vocab`, so there are `(vocab + 1)^order` tables.
#[derive(Debug, Clone, PartialEq)]
pub struct MarkovSequenceModel {
    vocab: usize,
    length: usize,
    order: usize,
    tables: Vec<Distribution>,
}

impl MarkovSequenceModel {
    pub fn new(
        vocab: usize,
        length: usize,
        order: usize,
        tables: Vec<Distribution>,
    ) -> Result<Self> {
        if vocab == 0 {
            return Err(Error::InvalidProgram("vocabulary must not be empty"));
        }
        if order > 2 {
            return Err(Error::InvalidProgram("context order must be at most 2"));
        }
        let expected = Self::context_count(vocab, order);
        if tables.len() != expected {
            return Err(Error::LengthMismatch {
                expected,
                found: tables.len(),
            });
        }
        if let Some(t) = tables.iter().find(|t| t.len() != vocab) {
            return Err(Error::LengthMismatch {
                expected: vocab,
                found: t.len(),
            });
        }
        Ok(Self {
            vocab,
            length,
            order,
            tables,
        })
    }

    pub fn context_count(vocab: usize, order: usize) -> usize {
        (vocab + 1).pow(order as u32)
    }

    pub fn uniform(vocab: usize, length: usize) -> Result<Self> {
        Self::new(vocab, length, 0, alloc::vec![Distribution::uniform(vocab)?])
    }

    /// Every table puts all its mass on token 0.
    pub fn deterministic(vocab: usize, length: usize) -> Result<Self> {
        Self::new(
            vocab,
            length,
            0,
            alloc::vec![Distribution::point(vocab, 0)?],
        )
    }

    /// Random tables with weights `(-ln u)^skew`; `skew = 1` draws each
    /// table from a flat Dirichlet and larger values sharpen it.
    pub fn random<R: Rng + ?Sized>(
        vocab: usize,
        length: usize,
        order: usize,
        skew: f64,
        rng: &mut R,
    ) -> Result<Self> {
        let tables = (0..Self::context_count(vocab, order))
            .map(|_| {
                let w: Vec<f64> = (0..vocab)
                    .map(|_| libm::pow(-libm::log(open_uniform(rng)), skew))
                    .collect();
                Distribution::new(w)
            })
            .collect::<Result<Vec<_>>>()?;
        Self::new(vocab, length, order, tables)
    }

    pub fn vocab(&self) -> usize {
        self.vocab
    }

    pub fn length(&self) -> usize {
        self.length
    }

    pub fn order(&self) -> usize {
        self.order
    }

    pub fn tables(&self) -> &[Distribution] {
        &self.tables
    }

    fn context_index(&self, tokens: &[usize]) -> usize {
        let mut index = 0;
        for back in (1..=self.order).rev() {
            let token = tokens
                .len()
                .checked_sub(back)
                .map_or(self.vocab, |i| tokens[i]);
            index = index * (self.vocab + 1) + token;
        }
        index
    }

    /// Distribution of the next token after `tokens`.
    pub fn next_distribution(&self, tokens: &[usize]) -> &Distribution {
        &self.tables[self.context_index(tokens)]
    }

    /// Probability of a complete token sequence.
    pub fn sequence_probability(&self, tokens: &[usize]) -> f64 {
        (0..tokens.len())
            .map(|i| self.next_distribution(&tokens[..i]).prob(tokens[i]))
            .product()
    }
}

impl RandomizedProgram for MarkovSequenceModel {
    type Output = Vec<usize>;

    fn run(&self, c: &mut dyn ChoiceSource) -> Result<Vec<usize>> {
        let mut tokens = Vec::with_capacity(self.length);
        for _ in 0..self.length {
            let token = c.choose_lazy(&mut || self.next_distribution(&tokens).clone())?;
            tokens.push(token);
        }
        Ok(tokens)
    }
}

impl Expander for MarkovSequenceModel {
    type Context = Vec<usize>;
    type Output = Vec<usize>;

    fn root(&self) -> Result<Step<Vec<usize>, Vec<usize>>> {
        Ok(if self.length == 0 {
            Step::Done(Vec::new())
        } else {
            Step::Open(Vec::new())
        })
    }

    fn expand(&self, tokens: &Vec<usize>) -> Result<Expansion<Vec<usize>, Vec<usize>>> {
        let last = tokens.len() + 1 == self.length;
        let dist = self.next_distribution(tokens);
        Ok(Expansion::Children(
            dist.weights()
                .iter()
                .enumerate()
                .map(|(i, &p)| {
                    let mut next = tokens.clone();
                    next.push(i);
                    Branch {
                        choice: i,
                        log_prob: libm::log(p),
                        next: if last {
                            Step::Done(next)
                        } else {
                            Step::Open(next)
                        },
                    }
                })
                .collect(),
        ))
    }
}
