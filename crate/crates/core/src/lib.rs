//! Incremental sampling without replacement from discrete randomized programs.
//!
//! A randomized program draws all of its randomness through a
//! [`ChoiceSource`]. [`UniqueSampler`] records the executions it has produced
//! in a trie of unsampled probability mass, so every further run yields a new
//! trace until the space is exhausted. The crate also provides Stochastic
//! Beam Search, batched sampling over the trie, a trie whose probabilities
//! can be edited between runs, Gumbel-based expectation estimators and
//! brute-force oracles for small spaces.
//!
//! The crate is `no_std` with `alloc`. The `parallel` feature enables rayon
//! variants of the beam searches.

#![cfg_attr(not(feature = "std"), no_std)]

extern crate alloc;

mod batched;
pub mod choice;
pub mod dynamic;
mod error;
pub mod estimators;
pub mod gumbel;
pub mod oracle;
pub mod programs;
pub mod sbs;
pub mod trie;

pub use choice::{
    probe, run_with_replay, select_proportional, trace_probability, ChoiceSource, Distribution,
    Probe, RandomizedProgram, RngSource, Trace,
};
pub use dynamic::DynamicSampler;
pub use error::{Error, Result};
pub use gumbel::GumbelKey;
#[cfg(feature = "parallel")]
pub use sbs::stochastic_beam_search_par;
pub use sbs::{stochastic_beam_search, Expander, KeyedSample, ProgramExpander, SbsResult};
pub use trie::{Counters, NodeId, Sample, UniqueSampler};
