//! Generators for the two shipped examples.

pub mod arm;
pub mod gridworld;

use crate::model::{CognitiveModel, LabeledMdp, RabinAutomaton};

/// The four inputs of a synthesis run.
#[derive(Clone, Debug, PartialEq)]
pub struct Example {
    pub autonomous: LabeledMdp,
    pub human: LabeledMdp,
    pub attention: CognitiveModel,
    pub automaton: RabinAutomaton,
}
