//! Synthesis of Pareto-optimal control-handoff policies for systems shared
//! between an autonomous controller and a human operator.
//!
//! The pipeline composes the autonomous and human system models with an
//! operator attention model, takes the product with a deterministic Rabin
//! automaton, finds accepting end components, computes minimum-effort
//! recurrence policies inside them, and finally trades discounted
//! reachability against discounted attention cost with an augmented
//! Tchebychev scalarization.

pub mod aec;
pub mod builtin;
pub mod compose;
pub mod ec;
pub mod error;
pub mod format;
mod linalg;
pub mod lp;
pub mod model;
pub mod pareto;
pub mod policy;
pub mod report;
pub mod sim;
pub mod synth;

pub use compose::{
    compose_shared_autonomy, product_with_dra, ControlMode, ProductMdp, SaAction,
    SharedAutonomyMdp,
};
pub use error::{Error, Result};
pub use model::{
    dra_step, enabled_actions, validate_cognitive, validate_mdp, validate_rabin, CognitiveModel,
    Distribution, LabeledMdp, RabinAutomaton, Violation,
};
pub use policy::MemorylessPolicy;
pub use synth::{synthesize, Synthesis, SynthesisConfig};
