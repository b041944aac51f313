//! Bundled randomized programs.

mod explicit;
mod figure3;
mod markov;
mod tsp;

pub use explicit::ExplicitProgram;
pub use figure3::Figure3Program;
pub use markov::MarkovSequenceModel;
pub use tsp::{
    canonical_tour, default_temperature, farthest_insertion, greedy_farthest_insertion, tour_cost,
    FarthestInsertion, Tour, TspInstance, DELTA_FLOOR,
};

use crate::choice::{ChoiceSource, Distribution, RandomizedProgram};
use crate::error::Result;

/// A single choice from a fixed distribution; the output is the index.
#[derive(Debug, Clone, PartialEq)]
pub struct CategoricalProgram(pub Distribution);

impl RandomizedProgram for CategoricalProgram {
    type Output = usize;

    fn run(&self, c: &mut dyn ChoiceSource) -> Result<usize> {
        c.choose_lazy(&mut || self.0.clone())
    }
}
