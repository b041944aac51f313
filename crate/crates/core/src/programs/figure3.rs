use alloc::vec::Vec;

use crate::choice::{ChoiceSource, Distribution, RandomizedProgram};
use crate::error::Result;

/// Binary sequences of length 1 to 3.
///
/// ```text
/// length = C([0.5, 0.4, 0.1])
/// repeat length times: append C([0.75, 0.25])
/// append C([0.1, 0.9])
/// ```
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct Figure3Program;

fn dist(weights: &[f64]) -> Distribution {
    Distribution::new(weights).expect("constant weights are valid")
}

impl RandomizedProgram for Figure3Program {
    type Output = Vec<u8>;

    fn run(&self, c: &mut dyn ChoiceSource) -> Result<Vec<u8>> {
        let length = c.choose_lazy(&mut || dist(&[0.5, 0.4, 0.1]))?;
        let mut sequence = Vec::with_capacity(length + 1);
        for _ in 0..length {
            sequence.push(c.choose_lazy(&mut || dist(&[0.75, 0.25]))? as u8);
        }
        sequence.push(c.choose_lazy(&mut || dist(&[0.1, 0.9]))? as u8);
        Ok(sequence)
    }
}
