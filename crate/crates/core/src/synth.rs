//! End-to-end two-stage synthesis.

use crate::aec::{terminal_costs, AecConfig, TerminalCostMap};
use crate::compose::{compose_shared_autonomy, product_with_dra, ProductMdp, StateSet};
use crate::ec::{accepting_end_components, accepting_states_union, EndComponent};
use crate::error::Result;
use crate::model::{CognitiveModel, LabeledMdp, RabinAutomaton};
use crate::pareto::{
    build_reward_vector, ideal_and_nadir, pareto_sweep, solve_single_objective, solve_tchebychev,
    Reference, ScalarizationContext, SingleObjective, Stage1, SweepPoint, TchebychevSolution,
};

#[derive(Clone, Debug, PartialEq)]
pub struct SynthesisConfig {
    pub eps_aug: f64,
    pub aec: AecConfig,
}

impl Default for SynthesisConfig {
    fn default() -> Self {
        SynthesisConfig {
            eps_aug: 1e-4,
            aec: AecConfig::default(),
        }
    }
}

/// Everything that does not depend on the user's weights: the product,
/// its accepting components with their recurrence policies and terminal
/// costs, the two single-objective optima and the reference points.
#[derive(Clone, Debug)]
pub struct Synthesis {
    pub config: SynthesisConfig,
    pub product: ProductMdp,
    pub aecs: Vec<EndComponent>,
    pub accepting: StateSet,
    pub terminal: TerminalCostMap,
    pub stage: Stage1,
    pub optima: [SingleObjective; 2],
    pub reference: Reference,
}

pub fn synthesize(
    ma: &LabeledMdp,
    mh: &LabeledMdp,
    att: &CognitiveModel,
    dra: &RabinAutomaton,
    config: &SynthesisConfig,
) -> Result<Synthesis> {
    let sa = compose_shared_autonomy(ma, mh, att)?;
    let product = product_with_dra(&sa, dra)?;
    Synthesis::from_product(product, config)
}

impl Synthesis {
    pub fn from_product(product: ProductMdp, config: &SynthesisConfig) -> Result<Synthesis> {
        let aecs = accepting_end_components(&product);
        let accepting = accepting_states_union(&aecs);
        let terminal = terminal_costs(&product, &aecs, &config.aec)?;
        let rewards = build_reward_vector(&product, &accepting, &terminal)?;
        let stage = Stage1::new(&product, rewards, &terminal)?;
        let f1 = solve_single_objective(&product, &stage, 0)?;
        let f2 = solve_single_objective(&product, &stage, 1)?;
        let reference = ideal_and_nadir(&product, &stage, [&f1, &f2])?;
        Ok(Synthesis {
            config: config.clone(),
            product,
            aecs,
            accepting,
            terminal,
            stage,
            optima: [f1, f2],
            reference,
        })
    }

    pub fn context(&self, weights: [f64; 2]) -> Result<ScalarizationContext> {
        ScalarizationContext::new(self.reference.ideal, self.reference.nadir, weights, self.config.eps_aug)
    }

    /// Pareto-optimal policy for one weight vector.
    pub fn scalarize(&self, weights: [f64; 2]) -> Result<TchebychevSolution> {
        solve_tchebychev(&self.product, &self.stage, &self.context(weights)?)
    }

    pub fn sweep(&self, weights: &[[f64; 2]]) -> Vec<SweepPoint> {
        pareto_sweep(&self.product, &self.stage, &self.reference, weights, self.config.eps_aug)
    }

    /// Human-readable caveats about the result.
    pub fn warnings(&self) -> Vec<String> {
        let mut out = Vec::new();
        if self.aecs.is_empty() {
            out.push(
                "no accepting end component is reachable: the task formula cannot be \
                 satisfied and the policy only minimizes attention cost"
                    .to_owned(),
            );
        }
        for s in &self.terminal.solutions {
            if s.mixed {
                let names: Vec<&str> = s.component.states.iter().map(|&v| self.product.name(v)).collect();
                let shown = if names.len() > 4 {
                    format!("{}, ... ({} states)", names[..3].join(", "), names.len())
                } else {
                    names.join(", ")
                };
                out.push(format!(
                    "recurrence policy on {{{shown}}} mixes in the uniform staying policy with weight {} \
                     so that every state is revisited",
                    self.config.aec.recurrence_mix
                ));
            }
        }
        out
    }
}
