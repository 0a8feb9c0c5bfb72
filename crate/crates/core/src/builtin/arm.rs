//! Pick-and-place arm: one small and one large object must be moved.
//!
//! System states `(n,m)` count the small and large objects still to be
//! placed. Action `a` picks the small object and `b` the large one; a failed
//! attempt leaves the state unchanged. The operator is either idle (`0`) or
//! attentive (`1`) and can take over only when attentive. Event `1` asks for
//! attention, event `0` releases it.

use serde::{Deserialize, Serialize};

use super::Example;
use crate::error::Result;
use crate::model::{CognitiveModel, LabeledMdp, RabinAutomaton};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ArmParams {
    pub auto_small: f64,
    pub auto_large: f64,
    pub human_small: f64,
    pub human_large: f64,
    /// Probability that a request for attention is granted.
    pub attend: f64,
    /// Probability that a release of attention is followed.
    pub release: f64,
    pub cost_attentive: f64,
    pub cost_idle: f64,
    pub gamma: f64,
}

impl Default for ArmParams {
    fn default() -> Self {
        ArmParams {
            auto_small: 0.85,
            auto_large: 0.5,
            human_small: 0.95,
            human_large: 0.75,
            attend: 0.85,
            release: 1.0,
            cost_attentive: 10.0,
            cost_idle: 5.0,
            gamma: 0.98,
        }
    }
}

pub const STATES: [&str; 4] = ["(1,1)", "(1,0)", "(0,1)", "(0,0)"];

fn system(p_small: f64, p_large: f64, gamma: f64) -> Result<LabeledMdp> {
    let mut b = LabeledMdp::builder(STATES, ["a", "b", "stay"], ["done"])
        .initial("(1,1)", 1.0)
        .label("(0,0)", "done")
        .gamma(gamma);
    let moves = [
        ("(1,1)", "a", "(0,1)", p_small),
        ("(1,1)", "b", "(1,0)", p_large),
        ("(1,0)", "a", "(0,0)", p_small),
        ("(0,1)", "b", "(0,0)", p_large),
    ];
    for (s, a, t, p) in moves {
        b = b.transition(s, a, t, p);
        if p < 1.0 {
            b = b.transition(s, a, s, 1.0 - p);
        }
    }
    b.transition("(0,0)", "stay", "(0,0)", 1.0).build()
}

impl ArmParams {
    pub fn build(&self) -> Result<Example> {
        let autonomous = system(self.auto_small, self.auto_large, self.gamma)?;
        let human = system(self.human_small, self.human_large, self.gamma)?;

        let mut att = CognitiveModel::builder(["0", "1"], ["0", "1"])
            .initial("0", 1.0)
            .takeover("1")
            .gamma(self.gamma);
        for h in ["0", "1"] {
            att = att
                .transition(h, "1", "1", self.attend)
                .transition(h, "1", "0", 1.0 - self.attend)
                .transition(h, "0", "0", self.release)
                .transition(h, "0", "1", 1.0 - self.release);
            for e in ["0", "1"] {
                att = att
                    .cost(h, e, "1", self.cost_attentive)
                    .cost(h, e, "0", self.cost_idle);
            }
        }
        let attention = att.build()?;

        let automaton = RabinAutomaton::builder(["q0", "acc"], ["done"], "q0")
            .edge("q0", &["done"], "acc")
            .default_edge("q0", "q0")
            .default_edge("acc", "acc")
            .pair(&[] as &[&str], &["acc"])
            .build()?;

        Ok(Example {
            autonomous,
            human,
            attention,
            automaton,
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{enabled_actions, validate_cognitive, validate_mdp, validate_rabin};

    #[test]
    fn default_models_validate() {
        let ex = ArmParams::default().build().unwrap();
        assert!(validate_mdp(&ex.autonomous).is_empty());
        assert!(validate_mdp(&ex.human).is_empty());
        assert!(validate_cognitive(&ex.attention).is_empty());
        assert!(validate_rabin(&ex.automaton).is_empty());
    }

    #[test]
    fn enabled_actions_per_state() {
        let ex = ArmParams::default().build().unwrap();
        assert_eq!(enabled_actions(&ex.autonomous, "(1,1)").unwrap(), ["a", "b"]);
        assert_eq!(enabled_actions(&ex.autonomous, "(0,0)").unwrap(), ["stay"]);
        assert_eq!(enabled_actions(&ex.human, "(0,1)").unwrap(), ["b"]);
    }
}
