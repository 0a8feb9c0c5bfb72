//! Shared-autonomy composition of the autonomous model, the human model and
//! the operator's cognitive model, and the product with a Rabin automaton.

use std::collections::{BTreeSet, HashMap, VecDeque};
use std::fmt;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::{
    validate_cognitive, validate_mdp, validate_rabin, CognitiveModel, Distribution, LabeledMdp,
    Letter, RabinAutomaton, PROB_TOL,
};

/// Who drives the physical system when an action is taken.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ControlMode {
    Autonomous,
    Human,
}

impl ControlMode {
    pub fn tag(self) -> &'static str {
        match self {
            ControlMode::Autonomous => "A",
            ControlMode::Human => "H",
        }
    }
}

/// A composite action: a physical action tagged with its controller, paired
/// with the event sent to the operator.
#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub struct SaAction {
    pub base: String,
    pub mode: ControlMode,
    pub event: String,
}

impl SaAction {
    pub fn new(base: impl Into<String>, mode: ControlMode, event: impl Into<String>) -> Self {
        SaAction {
            base: base.into(),
            mode,
            event: event.into(),
        }
    }
}

impl fmt::Display for SaAction {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "({}_{},{})", self.base, self.mode.tag(), self.event)
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Transition {
    pub target: usize,
    pub prob: f64,
    pub cost: f64,
}

/// An enabled action at some state together with its successor distribution.
#[derive(Clone, Debug, PartialEq)]
pub struct Choice {
    pub action: usize,
    pub succ: Vec<Transition>,
}

impl Choice {
    /// Expected one-step cost.
    pub fn expected_cost(&self) -> f64 {
        self.succ.iter().map(|t| t.prob * t.cost).sum()
    }

    pub fn prob_sum(&self) -> f64 {
        self.succ.iter().map(|t| t.prob).sum()
    }
}

/// The composite MDP over system × cognitive states.
#[derive(Clone, Debug)]
pub struct SharedAutonomyMdp {
    pub(crate) sys_states: Vec<String>,
    pub(crate) att_states: Vec<String>,
    pub(crate) actions: Vec<SaAction>,
    /// Indexed by `s * |H| + h`.
    pub(crate) choices: Vec<Vec<Choice>>,
    pub(crate) initial: Distribution,
    pub(crate) ap: Vec<String>,
    pub(crate) labels: Vec<BTreeSet<String>>,
    pub(crate) gamma: f64,
}

impl SharedAutonomyMdp {
    pub fn num_states(&self) -> usize {
        self.choices.len()
    }

    pub fn index(&self, s: usize, h: usize) -> usize {
        s * self.att_states.len() + h
    }

    /// `(system state, cognitive state)` of a composite index.
    pub fn split(&self, i: usize) -> (usize, usize) {
        (i / self.att_states.len(), i % self.att_states.len())
    }

    pub fn state_name(&self, i: usize) -> String {
        let (s, h) = self.split(i);
        format!("({},{})", self.sys_states[s], self.att_states[h])
    }

    pub fn state_index(&self, s: &str, h: &str) -> Result<usize> {
        let si = self
            .sys_states
            .iter()
            .position(|x| x == s)
            .ok_or_else(|| Error::not_found("state", s))?;
        let hi = self
            .att_states
            .iter()
            .position(|x| x == h)
            .ok_or_else(|| Error::not_found("cognitive state", h))?;
        Ok(self.index(si, hi))
    }

    pub fn actions(&self) -> &[SaAction] {
        &self.actions
    }

    pub fn action_index(&self, a: &SaAction) -> Option<usize> {
        self.actions.iter().position(|x| x == a)
    }

    pub fn choices(&self, i: usize) -> &[Choice] {
        &self.choices[i]
    }

    pub fn initial(&self) -> &Distribution {
        &self.initial
    }

    pub fn gamma(&self) -> f64 {
        self.gamma
    }

    pub fn ap(&self) -> &[String] {
        &self.ap
    }

    /// Labels of composite state `i`, inherited from its system state.
    pub fn label(&self, i: usize) -> &BTreeSet<String> {
        &self.labels[self.split(i).0]
    }

    /// Probability of moving from `i` to `j` under action `a` (0 if disabled).
    pub fn prob(&self, i: usize, a: usize, j: usize) -> f64 {
        self.choices[i]
            .iter()
            .find(|c| c.action == a)
            .map(|c| c.succ.iter().filter(|t| t.target == j).map(|t| t.prob).sum())
            .unwrap_or(0.0)
    }
}

fn expect_valid(errors: &mut Vec<String>, what: &str, v: Vec<crate::model::Violation>) {
    errors.extend(v.into_iter().map(|v| format!("{what}: {v}")));
}

/// Composes the autonomous model, the human model and the cognitive model
/// into the shared-autonomy MDP.
pub fn compose_shared_autonomy(
    ma: &LabeledMdp,
    mh: &LabeledMdp,
    att: &CognitiveModel,
) -> Result<SharedAutonomyMdp> {
    let mut errors = Vec::new();
    expect_valid(&mut errors, "autonomous model", validate_mdp(ma));
    expect_valid(&mut errors, "human model", validate_mdp(mh));
    expect_valid(&mut errors, "cognitive model", validate_cognitive(att));
    if ma.states != mh.states {
        errors.push("autonomous and human models have different state sets".into());
    } else {
        for (s, name) in ma.states.iter().enumerate() {
            if ma.labels[s] != mh.labels[s] {
                errors.push(format!("label mismatch at state {name}"));
            }
        }
    }
    if ma.ap != mh.ap {
        errors.push("autonomous and human models have different propositions".into());
    }
    if ma.initial != mh.initial {
        errors.push("autonomous and human models have different initial distributions".into());
    }
    if !errors.is_empty() {
        return Err(Error::Composition(errors));
    }

    let nh = att.states.len();
    let mut actions = Vec::new();
    let mut table: HashMap<(ControlMode, usize, usize), usize> = HashMap::new();
    for (mode, m) in [(ControlMode::Autonomous, ma), (ControlMode::Human, mh)] {
        for (a, name) in m.actions.iter().enumerate() {
            for (e, ev) in att.events.iter().enumerate() {
                table.insert((mode, a, e), actions.len());
                actions.push(SaAction::new(name.clone(), mode, ev.clone()));
            }
        }
    }

    let mut choices = vec![Vec::new(); ma.states.len() * nh];
    for s in 0..ma.states.len() {
        for h in 0..nh {
            let row = &mut choices[s * nh + h];
            for (mode, m) in [(ControlMode::Autonomous, ma), (ControlMode::Human, mh)] {
                if mode == ControlMode::Human && !att.is_takeover(h) {
                    continue;
                }
                for a in m.enabled(s) {
                    let side = m.transition(s, a).expect("enabled action has a row");
                    for e in 0..att.events.len() {
                        let cog = att.transition(h, e).expect("validated cognitive model");
                        let mut succ = Vec::new();
                        for &(s2, ps) in side.entries() {
                            for &(h2, ph) in cog.entries() {
                                let p = ps * ph;
                                if p > 0.0 {
                                    succ.push(Transition {
                                        target: s2 * nh + h2,
                                        prob: p,
                                        cost: att.cost(h, e, h2),
                                    });
                                }
                            }
                        }
                        row.push(Choice {
                            action: table[&(mode, a, e)],
                            succ,
                        });
                    }
                }
            }
        }
    }

    let mut init = Vec::new();
    for &(s, ps) in ma.initial.entries() {
        for &(h, ph) in att.initial.entries() {
            init.push((s * nh + h, ps * ph));
        }
    }

    Ok(SharedAutonomyMdp {
        sys_states: ma.states.clone(),
        att_states: att.states.clone(),
        actions,
        choices,
        initial: Distribution::from_raw(init),
        ap: ma.ap.clone(),
        labels: ma.labels.clone(),
        gamma: att.gamma,
    })
}

/// Set of product states, kept sorted.
pub type StateSet = BTreeSet<usize>;

/// Lifted Rabin pair over product states.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct AcceptancePair {
    pub avoid: StateSet,
    pub recur: StateSet,
}

/// Where a product state came from, when it was built by composition.
#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub struct ProductKey {
    pub sys: usize,
    pub att: usize,
    pub dra: usize,
}

#[derive(Clone, Debug)]
pub struct ProductOrigin {
    pub sys_states: Vec<String>,
    pub att_states: Vec<String>,
    pub dra_states: Vec<String>,
    pub keys: Vec<ProductKey>,
}

/// Product of a shared-autonomy MDP with a Rabin automaton, restricted to
/// the states reachable from the initial support.
///
/// Also usable as a plain finite MDP with costs and acceptance pairs; see
/// [`ProductMdp::from_parts`].
#[derive(Clone, Debug)]
pub struct ProductMdp {
    pub(crate) names: Vec<String>,
    pub(crate) actions: Vec<SaAction>,
    pub(crate) choices: Vec<Vec<Choice>>,
    pub(crate) initial: Distribution,
    pub(crate) gamma: f64,
    pub(crate) pairs: Vec<AcceptancePair>,
    pub(crate) origin: Option<ProductOrigin>,
}

impl ProductMdp {
    /// Builds a product-shaped MDP directly. Every state needs at least one
    /// choice and every choice a normalized successor list.
    pub fn from_parts(
        names: Vec<String>,
        actions: Vec<SaAction>,
        choices: Vec<Vec<Choice>>,
        initial: Distribution,
        gamma: f64,
        pairs: Vec<AcceptancePair>,
    ) -> Result<Self> {
        let p = ProductMdp {
            names,
            actions,
            choices,
            initial,
            gamma,
            pairs,
            origin: None,
        };
        p.check()?;
        Ok(p)
    }

    fn check(&self) -> Result<()> {
        let n = self.choices.len();
        if self.names.len() != n {
            return Err(Error::InvalidModel("state name count mismatch".into()));
        }
        if !(self.gamma > 0.0 && self.gamma < 1.0) {
            return Err(Error::InvalidModel(format!("discount {} outside (0, 1)", self.gamma)));
        }
        if let Some(msg) = self.initial.defect() {
            return Err(Error::InvalidModel(format!("initial distribution: {msg}")));
        }
        if self.initial.entries().iter().any(|e| e.0 >= n) {
            return Err(Error::InvalidModel("initial distribution names unknown state".into()));
        }
        for (v, row) in self.choices.iter().enumerate() {
            if row.is_empty() {
                return Err(Error::InvalidModel(format!("deadlock at {}", self.names[v])));
            }
            for c in row {
                if c.action >= self.actions.len() {
                    return Err(Error::InvalidModel(format!("unknown action at {}", self.names[v])));
                }
                if c.succ.iter().any(|t| t.target >= n || !(t.prob >= 0.0) || !t.cost.is_finite()) {
                    return Err(Error::InvalidModel(format!("bad successor at {}", self.names[v])));
                }
                if (c.prob_sum() - 1.0).abs() > PROB_TOL {
                    return Err(Error::InvalidModel(format!(
                        "row sum {} at ({}, {})",
                        c.prob_sum(),
                        self.names[v],
                        self.actions[c.action]
                    )));
                }
            }
        }
        for p in &self.pairs {
            if p.avoid.iter().chain(&p.recur).any(|&v| v >= n) {
                return Err(Error::InvalidModel("acceptance pair names unknown state".into()));
            }
        }
        Ok(())
    }

    pub fn num_states(&self) -> usize {
        self.choices.len()
    }

    pub fn name(&self, v: usize) -> &str {
        &self.names[v]
    }

    pub fn names(&self) -> &[String] {
        &self.names
    }

    pub fn state_index(&self, name: &str) -> Result<usize> {
        self.names
            .iter()
            .position(|n| n == name)
            .ok_or_else(|| Error::not_found("product state", name))
    }

    pub fn actions(&self) -> &[SaAction] {
        &self.actions
    }

    pub fn action(&self, a: usize) -> &SaAction {
        &self.actions[a]
    }

    pub fn choices(&self, v: usize) -> &[Choice] {
        &self.choices[v]
    }

    pub fn choice(&self, v: usize, a: usize) -> Option<&Choice> {
        self.choices[v].iter().find(|c| c.action == a)
    }

    pub fn initial(&self) -> &Distribution {
        &self.initial
    }

    pub fn gamma(&self) -> f64 {
        self.gamma
    }

    pub fn pairs(&self) -> &[AcceptancePair] {
        &self.pairs
    }

    pub fn origin(&self) -> Option<&ProductOrigin> {
        self.origin.as_ref()
    }

    /// Number of state-action pairs.
    pub fn num_choices(&self) -> usize {
        self.choices.iter().map(Vec::len).sum()
    }
}

/// Builds the reachable fragment of the product of `sa` with `dra`.
pub fn product_with_dra(sa: &SharedAutonomyMdp, dra: &RabinAutomaton) -> Result<ProductMdp> {
    let violations = validate_rabin(dra);
    if !violations.is_empty() {
        return Err(Error::Composition(
            violations.into_iter().map(|v| format!("automaton: {v}")).collect(),
        ));
    }
    let mut letters: Vec<Letter> = Vec::with_capacity(sa.sys_states.len());
    for (s, label) in sa.labels.iter().enumerate() {
        let l = dra.letter(label).map_err(|_| {
            Error::Composition(vec![format!(
                "label {:?} of state {} uses a proposition outside the automaton alphabet {:?}",
                label, sa.sys_states[s], dra.ap
            )])
        })?;
        letters.push(l);
    }
    let step = |q: usize, s: usize| -> Result<usize> {
        dra.step(q, letters[s]).ok_or_else(|| {
            Error::Composition(vec![format!("automaton has no successor from {}", dra.states[q])])
        })
    };

    let mut index: HashMap<(usize, usize), usize> = HashMap::new();
    let mut keys: Vec<(usize, usize)> = Vec::new();
    let mut queue = VecDeque::new();
    let mut visit = |key: (usize, usize), keys: &mut Vec<(usize, usize)>, queue: &mut VecDeque<usize>| {
        *index.entry(key).or_insert_with(|| {
            keys.push(key);
            queue.push_back(keys.len() - 1);
            keys.len() - 1
        })
    };

    let mut init = Vec::new();
    for &(i, p) in sa.initial.entries() {
        let (s, _) = sa.split(i);
        let q = step(dra.initial, s)?;
        init.push((visit((i, q), &mut keys, &mut queue), p));
    }

    let mut choices: Vec<Vec<Choice>> = Vec::new();
    while let Some(v) = queue.pop_front() {
        let (i, q) = keys[v];
        let mut row = Vec::with_capacity(sa.choices[i].len());
        for c in &sa.choices[i] {
            let mut succ = Vec::with_capacity(c.succ.len());
            for t in &c.succ {
                let (s2, _) = sa.split(t.target);
                let q2 = step(q, s2)?;
                succ.push(Transition {
                    target: visit((t.target, q2), &mut keys, &mut queue),
                    ..*t
                });
            }
            row.push(Choice {
                action: c.action,
                succ,
            });
        }
        if choices.len() <= v {
            choices.resize(v + 1, Vec::new());
        }
        choices[v] = row;
    }

    let pairs = dra
        .pairs
        .iter()
        .map(|pair| AcceptancePair {
            avoid: (0..keys.len()).filter(|&v| pair.avoid.contains(&keys[v].1)).collect(),
            recur: (0..keys.len()).filter(|&v| pair.recur.contains(&keys[v].1)).collect(),
        })
        .collect();

    let names = keys
        .iter()
        .map(|&(i, q)| format!("{}|{}", sa.state_name(i), dra.states[q]))
        .collect();
    let origin = ProductOrigin {
        sys_states: sa.sys_states.clone(),
        att_states: sa.att_states.clone(),
        dra_states: dra.states.clone(),
        keys: keys
            .iter()
            .map(|&(i, q)| {
                let (s, h) = sa.split(i);
                ProductKey { sys: s, att: h, dra: q }
            })
            .collect(),
    };

    Ok(ProductMdp {
        names,
        actions: sa.actions.clone(),
        choices,
        initial: Distribution::from_raw(init),
        gamma: sa.gamma,
        pairs,
        origin: Some(origin),
    })
}
