//! Core domain types: labeled MDPs, operator cognitive models and
//! deterministic Rabin automata.
//!
//! Models are built from string identifiers and stored with dense indices.
//! Builders only reject structurally broken input (unknown ids); semantic
//! invariants such as row sums are reported by the `validate_*` functions so
//! a defective file can be diagnosed in full rather than failing on the
//! first problem.

use std::collections::{BTreeMap, BTreeSet, HashMap};
use std::fmt;

use crate::error::{Error, Result};

/// Absolute tolerance on probability row sums.
pub const PROB_TOL: f64 = 1e-9;

/// Sparse probability distribution over dense indices.
///
/// Entries are kept sorted by index with duplicates merged. Zero-probability
/// entries are kept so that a model round-trips through its file format.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct Distribution {
    entries: Vec<(usize, f64)>,
}

impl Distribution {
    /// Builds a distribution and checks that it is normalized.
    pub fn new(entries: impl IntoIterator<Item = (usize, f64)>) -> Result<Self> {
        let d = Self::from_raw(entries);
        match d.defect() {
            None => Ok(d),
            Some(msg) => Err(Error::InvalidModel(msg)),
        }
    }

    /// Builds a distribution without checking normalization.
    pub fn from_raw(entries: impl IntoIterator<Item = (usize, f64)>) -> Self {
        let mut merged: BTreeMap<usize, f64> = BTreeMap::new();
        for (i, p) in entries {
            *merged.entry(i).or_insert(0.0) += p;
        }
        Distribution {
            entries: merged.into_iter().collect(),
        }
    }

    pub fn point(i: usize) -> Self {
        Distribution {
            entries: vec![(i, 1.0)],
        }
    }

    pub fn uniform(items: &[usize]) -> Self {
        let p = 1.0 / items.len() as f64;
        Self::from_raw(items.iter().map(|&i| (i, p)))
    }

    pub fn entries(&self) -> &[(usize, f64)] {
        &self.entries
    }

    pub fn prob(&self, i: usize) -> f64 {
        self.entries
            .binary_search_by_key(&i, |e| e.0)
            .map(|k| self.entries[k].1)
            .unwrap_or(0.0)
    }

    pub fn total(&self) -> f64 {
        self.entries.iter().map(|e| e.1).sum()
    }

    /// Elements with strictly positive probability.
    pub fn support(&self) -> impl Iterator<Item = usize> + '_ {
        self.entries.iter().filter(|e| e.1 > 0.0).map(|e| e.0)
    }

    pub fn is_empty(&self) -> bool {
        self.support().next().is_none()
    }

    /// Describes why this is not a probability distribution, if it is not.
    pub fn defect(&self) -> Option<String> {
        if let Some(&(i, p)) = self.entries.iter().find(|e| !(e.1.is_finite() && e.1 >= 0.0)) {
            return Some(format!("entry {i} has invalid probability {p}"));
        }
        let total = self.total();
        if (total - 1.0).abs() > PROB_TOL {
            return Some(format!("probabilities sum to {total}"));
        }
        None
    }

    pub fn is_valid(&self) -> bool {
        self.defect().is_none()
    }

    /// Maps indices through `f`, merging collisions.
    pub fn map(&self, mut f: impl FnMut(usize) -> usize) -> Self {
        Self::from_raw(self.entries.iter().map(|&(i, p)| (f(i), p)))
    }
}

/// An invariant violation found by one of the `validate_*` functions.
#[derive(Clone, Debug, PartialEq)]
pub struct Violation {
    pub state: Option<String>,
    pub action: Option<String>,
    pub message: String,
}

impl Violation {
    fn new(state: Option<&str>, action: Option<&str>, message: impl Into<String>) -> Self {
        Violation {
            state: state.map(str::to_owned),
            action: action.map(str::to_owned),
            message: message.into(),
        }
    }
}

impl fmt::Display for Violation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match (&self.state, &self.action) {
            (Some(s), Some(a)) => write!(f, "({s}, {a}): {}", self.message),
            (Some(s), None) => write!(f, "{s}: {}", self.message),
            (None, Some(a)) => write!(f, "action {a}: {}", self.message),
            (None, None) => f.write_str(&self.message),
        }
    }
}

pub(crate) fn index_of(ids: &[String]) -> HashMap<&str, usize> {
    ids.iter().enumerate().map(|(i, s)| (s.as_str(), i)).collect()
}

fn lookup(map: &HashMap<&str, usize>, kind: &'static str, id: &str) -> Result<usize> {
    map.get(id).copied().ok_or_else(|| Error::not_found(kind, id))
}

fn check_gamma(gamma: f64, out: &mut Vec<Violation>) {
    if !(gamma > 0.0 && gamma < 1.0) {
        out.push(Violation::new(None, None, format!("discount {gamma} outside (0, 1)")));
    }
}

/// Finite labeled MDP: states, actions, initial distribution, partial
/// transition function, atomic propositions, labels and discount.
#[derive(Clone, Debug, PartialEq)]
pub struct LabeledMdp {
    pub(crate) states: Vec<String>,
    pub(crate) actions: Vec<String>,
    pub(crate) ap: Vec<String>,
    pub(crate) labels: Vec<BTreeSet<String>>,
    pub(crate) initial: Distribution,
    pub(crate) transitions: BTreeMap<(usize, usize), Distribution>,
    pub(crate) gamma: f64,
}

impl LabeledMdp {
    pub fn builder(
        states: impl IntoIterator<Item = impl Into<String>>,
        actions: impl IntoIterator<Item = impl Into<String>>,
        ap: impl IntoIterator<Item = impl Into<String>>,
    ) -> MdpBuilder {
        let states: Vec<String> = states.into_iter().map(Into::into).collect();
        MdpBuilder {
            labels: vec![BTreeSet::new(); states.len()],
            states,
            actions: actions.into_iter().map(Into::into).collect(),
            ap: ap.into_iter().map(Into::into).collect(),
            initial: Vec::new(),
            transitions: Vec::new(),
            gamma: 0.95,
            error: None,
        }
    }

    pub fn states(&self) -> &[String] {
        &self.states
    }

    pub fn actions(&self) -> &[String] {
        &self.actions
    }

    pub fn ap(&self) -> &[String] {
        &self.ap
    }

    pub fn gamma(&self) -> f64 {
        self.gamma
    }

    pub fn initial(&self) -> &Distribution {
        &self.initial
    }

    pub fn label(&self, s: usize) -> &BTreeSet<String> {
        &self.labels[s]
    }

    pub fn state_index(&self, id: &str) -> Result<usize> {
        self.states
            .iter()
            .position(|s| s == id)
            .ok_or_else(|| Error::not_found("state", id))
    }

    pub fn transition(&self, s: usize, a: usize) -> Option<&Distribution> {
        self.transitions.get(&(s, a))
    }

    /// Indices of actions with a non-empty successor distribution at `s`.
    pub fn enabled(&self, s: usize) -> Vec<usize> {
        self.transitions
            .range((s, 0)..(s + 1, 0))
            .filter(|(_, d)| !d.is_empty())
            .map(|(&(_, a), _)| a)
            .collect()
    }
}

pub struct MdpBuilder {
    states: Vec<String>,
    actions: Vec<String>,
    ap: Vec<String>,
    labels: Vec<BTreeSet<String>>,
    initial: Vec<(String, f64)>,
    transitions: Vec<(String, String, String, f64)>,
    gamma: f64,
    error: Option<Error>,
}

impl MdpBuilder {
    pub fn label(mut self, state: &str, prop: &str) -> Self {
        match self.states.iter().position(|s| s == state) {
            Some(i) => {
                self.labels[i].insert(prop.to_owned());
            }
            None => self.error = self.error.or(Some(Error::not_found("state", state))),
        }
        self
    }

    pub fn initial(mut self, state: &str, p: f64) -> Self {
        self.initial.push((state.to_owned(), p));
        self
    }

    pub fn transition(mut self, s: &str, a: &str, t: &str, p: f64) -> Self {
        self.transitions
            .push((s.to_owned(), a.to_owned(), t.to_owned(), p));
        self
    }

    pub fn gamma(mut self, gamma: f64) -> Self {
        self.gamma = gamma;
        self
    }

    pub fn build(self) -> Result<LabeledMdp> {
        if let Some(e) = self.error {
            return Err(e);
        }
        let si = index_of(&self.states);
        let ai = index_of(&self.actions);
        if si.len() != self.states.len() {
            return Err(Error::InvalidModel("duplicate state id".into()));
        }
        if ai.len() != self.actions.len() {
            return Err(Error::InvalidModel("duplicate action id".into()));
        }
        let mut initial = Vec::new();
        for (s, p) in &self.initial {
            initial.push((lookup(&si, "state", s)?, *p));
        }
        let mut rows: BTreeMap<(usize, usize), Vec<(usize, f64)>> = BTreeMap::new();
        for (s, a, t, p) in &self.transitions {
            let key = (lookup(&si, "state", s)?, lookup(&ai, "action", a)?);
            rows.entry(key)
                .or_default()
                .push((lookup(&si, "state", t)?, *p));
        }
        Ok(LabeledMdp {
            initial: Distribution::from_raw(initial),
            transitions: rows
                .into_iter()
                .map(|(k, v)| (k, Distribution::from_raw(v)))
                .collect(),
            states: self.states,
            actions: self.actions,
            ap: self.ap,
            labels: self.labels,
            gamma: self.gamma,
        })
    }
}

/// Reports every invariant violation of `m`; an empty list means the model
/// is well formed.
pub fn validate_mdp(m: &LabeledMdp) -> Vec<Violation> {
    let mut out = Vec::new();
    if let Some(msg) = m.initial.defect() {
        out.push(Violation::new(None, None, format!("initial distribution: {msg}")));
    }
    for (&(s, a), d) in &m.transitions {
        if let Some(msg) = d.defect() {
            out.push(Violation::new(
                Some(&m.states[s]),
                Some(&m.actions[a]),
                format!("row-sum violation: {msg}"),
            ));
        }
    }
    let ap: BTreeSet<&str> = m.ap.iter().map(String::as_str).collect();
    for (s, name) in m.states.iter().enumerate() {
        if m.enabled(s).is_empty() {
            out.push(Violation::new(Some(name), None, "deadlock: no enabled action"));
        }
        for sym in &m.labels[s] {
            if !ap.contains(sym.as_str()) {
                out.push(Violation::new(
                    Some(name),
                    None,
                    format!("label `{sym}` is not an atomic proposition"),
                ));
            }
        }
    }
    check_gamma(m.gamma, &mut out);
    out
}

/// Actions enabled at state `s`, in declaration order.
pub fn enabled_actions(m: &LabeledMdp, s: &str) -> Result<Vec<String>> {
    let i = m.state_index(s)?;
    Ok(m.enabled(i).into_iter().map(|a| m.actions[a].clone()).collect())
}

/// Operator attention model: cognitive states driven by events, with effort
/// costs and the set of states at which the operator can take over.
#[derive(Clone, Debug, PartialEq)]
pub struct CognitiveModel {
    pub(crate) states: Vec<String>,
    pub(crate) events: Vec<String>,
    pub(crate) initial: Distribution,
    pub(crate) transitions: BTreeMap<(usize, usize), Distribution>,
    pub(crate) costs: BTreeMap<(usize, usize, usize), f64>,
    pub(crate) gamma: f64,
    pub(crate) takeover: BTreeSet<usize>,
}

impl CognitiveModel {
    pub fn builder(
        states: impl IntoIterator<Item = impl Into<String>>,
        events: impl IntoIterator<Item = impl Into<String>>,
    ) -> CognitiveBuilder {
        CognitiveBuilder {
            states: states.into_iter().map(Into::into).collect(),
            events: events.into_iter().map(Into::into).collect(),
            initial: Vec::new(),
            transitions: Vec::new(),
            costs: Vec::new(),
            takeover: Vec::new(),
            gamma: 0.95,
        }
    }

    pub fn states(&self) -> &[String] {
        &self.states
    }

    pub fn events(&self) -> &[String] {
        &self.events
    }

    pub fn gamma(&self) -> f64 {
        self.gamma
    }

    pub fn initial(&self) -> &Distribution {
        &self.initial
    }

    pub fn is_takeover(&self, h: usize) -> bool {
        self.takeover.contains(&h)
    }

    pub fn transition(&self, h: usize, e: usize) -> Option<&Distribution> {
        self.transitions.get(&(h, e))
    }

    /// Effort cost of moving from `h` to `h2` under event `e` (0 if unset).
    pub fn cost(&self, h: usize, e: usize, h2: usize) -> f64 {
        self.costs.get(&(h, e, h2)).copied().unwrap_or(0.0)
    }
}

pub struct CognitiveBuilder {
    states: Vec<String>,
    events: Vec<String>,
    initial: Vec<(String, f64)>,
    transitions: Vec<(String, String, String, f64)>,
    costs: Vec<(String, String, String, f64)>,
    takeover: Vec<String>,
    gamma: f64,
}

impl CognitiveBuilder {
    pub fn initial(mut self, h: &str, p: f64) -> Self {
        self.initial.push((h.to_owned(), p));
        self
    }

    pub fn transition(mut self, h: &str, e: &str, h2: &str, p: f64) -> Self {
        self.transitions
            .push((h.to_owned(), e.to_owned(), h2.to_owned(), p));
        self
    }

    pub fn cost(mut self, h: &str, e: &str, h2: &str, c: f64) -> Self {
        self.costs.push((h.to_owned(), e.to_owned(), h2.to_owned(), c));
        self
    }

    pub fn takeover(mut self, h: &str) -> Self {
        self.takeover.push(h.to_owned());
        self
    }

    pub fn gamma(mut self, gamma: f64) -> Self {
        self.gamma = gamma;
        self
    }

    pub fn build(self) -> Result<CognitiveModel> {
        let hi = index_of(&self.states);
        let ei = index_of(&self.events);
        if hi.len() != self.states.len() || ei.len() != self.events.len() {
            return Err(Error::InvalidModel("duplicate cognitive state or event id".into()));
        }
        let mut initial = Vec::new();
        for (h, p) in &self.initial {
            initial.push((lookup(&hi, "cognitive state", h)?, *p));
        }
        let mut rows: BTreeMap<(usize, usize), Vec<(usize, f64)>> = BTreeMap::new();
        for (h, e, h2, p) in &self.transitions {
            let key = (lookup(&hi, "cognitive state", h)?, lookup(&ei, "event", e)?);
            rows.entry(key)
                .or_default()
                .push((lookup(&hi, "cognitive state", h2)?, *p));
        }
        let mut costs = BTreeMap::new();
        for (h, e, h2, c) in &self.costs {
            let key = (
                lookup(&hi, "cognitive state", h)?,
                lookup(&ei, "event", e)?,
                lookup(&hi, "cognitive state", h2)?,
            );
            costs.insert(key, *c);
        }
        let mut takeover = BTreeSet::new();
        for h in &self.takeover {
            takeover.insert(lookup(&hi, "cognitive state", h)?);
        }
        Ok(CognitiveModel {
            initial: Distribution::from_raw(initial),
            transitions: rows
                .into_iter()
                .map(|(k, v)| (k, Distribution::from_raw(v)))
                .collect(),
            costs,
            takeover,
            states: self.states,
            events: self.events,
            gamma: self.gamma,
        })
    }
}

pub fn validate_cognitive(m: &CognitiveModel) -> Vec<Violation> {
    let mut out = Vec::new();
    if let Some(msg) = m.initial.defect() {
        out.push(Violation::new(None, None, format!("initial distribution: {msg}")));
    }
    for (h, hn) in m.states.iter().enumerate() {
        for (e, en) in m.events.iter().enumerate() {
            match m.transitions.get(&(h, e)) {
                None => out.push(Violation::new(Some(hn), Some(en), "event not applicable")),
                Some(d) => {
                    if let Some(msg) = d.defect() {
                        out.push(Violation::new(
                            Some(hn),
                            Some(en),
                            format!("row-sum violation: {msg}"),
                        ));
                    }
                }
            }
        }
    }
    for (&(h, e, h2), &c) in &m.costs {
        if !(c.is_finite() && c >= 0.0) {
            out.push(Violation::new(
                Some(&m.states[h]),
                Some(&m.events[e]),
                format!("cost to `{}` is {c}; must be finite and non-negative", m.states[h2]),
            ));
        }
    }
    if m.takeover.is_empty() {
        out.push(Violation::new(None, None, "takeover set is empty"));
    }
    check_gamma(m.gamma, &mut out);
    out
}

/// Letters of a Rabin automaton are proposition subsets, encoded as bit
/// masks over the automaton's proposition list.
pub type Letter = u64;

/// One acceptance pair: `avoid` must be visited finitely often and `recur`
/// infinitely often.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct RabinPair {
    pub avoid: BTreeSet<usize>,
    pub recur: BTreeSet<usize>,
}

/// Deterministic Rabin automaton over the alphabet 2^AP.
///
/// Each state lists explicit letter transitions and may declare a default
/// successor used for every letter it does not list.
#[derive(Clone, Debug, PartialEq)]
pub struct RabinAutomaton {
    pub(crate) states: Vec<String>,
    pub(crate) ap: Vec<String>,
    pub(crate) initial: usize,
    pub(crate) edges: Vec<Vec<(Letter, usize)>>,
    pub(crate) defaults: Vec<Option<usize>>,
    pub(crate) pairs: Vec<RabinPair>,
}

impl RabinAutomaton {
    pub fn builder(
        states: impl IntoIterator<Item = impl Into<String>>,
        ap: impl IntoIterator<Item = impl Into<String>>,
        initial: &str,
    ) -> RabinBuilder {
        RabinBuilder {
            states: states.into_iter().map(Into::into).collect(),
            ap: ap.into_iter().map(Into::into).collect(),
            initial: initial.to_owned(),
            edges: Vec::new(),
            defaults: Vec::new(),
            pairs: Vec::new(),
        }
    }

    pub fn states(&self) -> &[String] {
        &self.states
    }

    pub fn ap(&self) -> &[String] {
        &self.ap
    }

    pub fn initial(&self) -> usize {
        self.initial
    }

    pub fn pairs(&self) -> &[RabinPair] {
        &self.pairs
    }

    pub fn state_index(&self, id: &str) -> Result<usize> {
        self.states
            .iter()
            .position(|s| s == id)
            .ok_or_else(|| Error::not_found("automaton state", id))
    }

    /// Encodes a proposition set as a letter; unknown propositions are an error.
    pub fn letter<S: AsRef<str>>(&self, props: impl IntoIterator<Item = S>) -> Result<Letter> {
        let mut mask = 0;
        for p in props {
            let p = p.as_ref();
            let i = self
                .ap
                .iter()
                .position(|x| x == p)
                .ok_or_else(|| Error::not_found("automaton proposition", p))?;
            mask |= 1 << i;
        }
        Ok(mask)
    }

    /// Successor of `q` on `letter`, or `None` if the automaton is partial there.
    pub fn step(&self, q: usize, letter: Letter) -> Option<usize> {
        self.edges[q]
            .iter()
            .find(|e| e.0 == letter)
            .map(|e| e.1)
            .or(self.defaults[q])
    }
}

pub struct RabinBuilder {
    states: Vec<String>,
    ap: Vec<String>,
    initial: String,
    edges: Vec<(String, Vec<String>, String)>,
    defaults: Vec<(String, String)>,
    pairs: Vec<(Vec<String>, Vec<String>)>,
}

impl RabinBuilder {
    pub fn edge<S: AsRef<str>>(mut self, q: &str, letter: &[S], q2: &str) -> Self {
        self.edges.push((
            q.to_owned(),
            letter.iter().map(|s| s.as_ref().to_owned()).collect(),
            q2.to_owned(),
        ));
        self
    }

    pub fn default_edge(mut self, q: &str, q2: &str) -> Self {
        self.defaults.push((q.to_owned(), q2.to_owned()));
        self
    }

    pub fn pair<S: AsRef<str>>(mut self, avoid: &[S], recur: &[S]) -> Self {
        self.pairs.push((
            avoid.iter().map(|s| s.as_ref().to_owned()).collect(),
            recur.iter().map(|s| s.as_ref().to_owned()).collect(),
        ));
        self
    }

    pub fn build(self) -> Result<RabinAutomaton> {
        let qi = index_of(&self.states);
        if qi.len() != self.states.len() {
            return Err(Error::InvalidModel("duplicate automaton state id".into()));
        }
        if self.ap.len() > 63 {
            return Err(Error::InvalidModel("at most 63 propositions are supported".into()));
        }
        let n = self.states.len();
        let mut a = RabinAutomaton {
            initial: lookup(&qi, "automaton state", &self.initial)?,
            edges: vec![Vec::new(); n],
            defaults: vec![None; n],
            pairs: Vec::new(),
            states: Vec::new(),
            ap: self.ap,
        };
        for (q, letter, q2) in &self.edges {
            let l = a.letter(letter)?;
            let q = lookup(&qi, "automaton state", q)?;
            a.edges[q].push((l, lookup(&qi, "automaton state", q2)?));
        }
        for (q, q2) in &self.defaults {
            let q = lookup(&qi, "automaton state", q)?;
            a.defaults[q] = Some(lookup(&qi, "automaton state", q2)?);
        }
        for (avoid, recur) in &self.pairs {
            let mut p = RabinPair::default();
            for q in avoid {
                p.avoid.insert(lookup(&qi, "automaton state", q)?);
            }
            for q in recur {
                p.recur.insert(lookup(&qi, "automaton state", q)?);
            }
            a.pairs.push(p);
        }
        a.states = self.states;
        Ok(a)
    }
}

pub fn validate_rabin(a: &RabinAutomaton) -> Vec<Violation> {
    let mut out = Vec::new();
    let full = 1u64.checked_shl(a.ap.len() as u32).unwrap_or(0);
    for (q, name) in a.states.iter().enumerate() {
        let mut seen: BTreeMap<Letter, usize> = BTreeMap::new();
        for &(l, q2) in &a.edges[q] {
            if let Some(&prev) = seen.get(&l) {
                if prev != q2 {
                    out.push(Violation::new(
                        Some(name),
                        None,
                        format!("letter {:?} has two successors", a.letter_names(l)),
                    ));
                }
            }
            seen.insert(l, q2);
        }
        if a.defaults[q].is_none() && (seen.len() as u64) < full {
            let missing = (0..full).find(|l| !seen.contains_key(l)).unwrap_or(0);
            out.push(Violation::new(
                Some(name),
                None,
                format!(
                    "transition function is partial: no successor for {:?} and no default",
                    a.letter_names(missing)
                ),
            ));
        }
    }
    if a.pairs.is_empty() {
        out.push(Violation::new(None, None, "acceptance condition has no pairs"));
    }
    out
}

impl RabinAutomaton {
    pub fn letter_names(&self, l: Letter) -> Vec<&str> {
        self.ap
            .iter()
            .enumerate()
            .filter(|(i, _)| l & (1 << i) != 0)
            .map(|(_, s)| s.as_str())
            .collect()
    }
}

/// Successor of automaton state `q` when reading the proposition set `letter`.
pub fn dra_step<S: AsRef<str>>(a: &RabinAutomaton, q: &str, letter: &[S]) -> Result<String> {
    let qi = a.state_index(q)?;
    let l = a.letter(letter)?;
    a.step(qi, l)
        .map(|q2| a.states[q2].clone())
        .ok_or_else(|| Error::InvalidModel(format!("automaton has no successor from `{q}`")))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn self_loop() -> LabeledMdp {
        LabeledMdp::builder(["s"], ["a"], Vec::<&str>::new())
            .initial("s", 1.0)
            .transition("s", "a", "s", 1.0)
            .gamma(0.9)
            .build()
            .unwrap()
    }

    #[test]
    fn single_state_is_valid() {
        assert!(validate_mdp(&self_loop()).is_empty());
    }

    #[test]
    fn row_sum_defect_is_reported() {
        let m = LabeledMdp::builder(["s", "t"], ["a"], Vec::<&str>::new())
            .initial("s", 1.0)
            .transition("s", "a", "s", 0.5)
            .transition("s", "a", "t", 0.4)
            .transition("t", "a", "t", 1.0)
            .gamma(0.9)
            .build()
            .unwrap();
        let v = validate_mdp(&m);
        assert_eq!(v.len(), 1);
        assert_eq!(v[0].state.as_deref(), Some("s"));
        assert_eq!(v[0].action.as_deref(), Some("a"));
        assert!(v[0].message.contains("row-sum"));
    }

    #[test]
    fn deadlock_and_unknown_label() {
        let m = LabeledMdp::builder(["s", "t"], ["a"], ["p"])
            .initial("s", 1.0)
            .transition("s", "a", "t", 1.0)
            .label("t", "q")
            .gamma(1.0)
            .build()
            .unwrap();
        let v = validate_mdp(&m);
        let msgs: Vec<String> = v.iter().map(|v| v.to_string()).collect();
        assert_eq!(v.len(), 3, "{msgs:?}");
        assert!(msgs.iter().any(|m| m.contains("deadlock")));
        assert!(msgs.iter().any(|m| m.contains("`q`")));
        assert!(msgs.iter().any(|m| m.contains("discount")));
    }

    #[test]
    fn enabled_actions_unknown_state() {
        let m = self_loop();
        assert_eq!(enabled_actions(&m, "s").unwrap(), vec!["a".to_string()]);
        assert!(matches!(
            enabled_actions(&m, "nope"),
            Err(Error::NotFound { .. })
        ));
    }

    #[test]
    fn unknown_ids_fail_the_builder() {
        let r = LabeledMdp::builder(["s"], ["a"], Vec::<&str>::new())
            .transition("s", "b", "s", 1.0)
            .build();
        assert!(matches!(r, Err(Error::NotFound { kind: "action", .. })));
    }

    #[test]
    fn distribution_merges_and_checks() {
        let d = Distribution::from_raw([(2, 0.25), (1, 0.5), (2, 0.25)]);
        assert_eq!(d.entries(), &[(1, 0.5), (2, 0.5)]);
        assert!(d.is_valid());
        assert!(Distribution::new([(0, 0.7), (1, 0.2)]).is_err());
        assert!(Distribution::new([(0, 1.2), (1, -0.2)]).is_err());
    }

    fn reach_automaton() -> RabinAutomaton {
        RabinAutomaton::builder(["q0", "acc"], ["goal"], "q0")
            .edge("q0", &["goal"], "acc")
            .default_edge("q0", "q0")
            .default_edge("acc", "acc")
            .pair(&[] as &[&str], &["acc"])
            .build()
            .unwrap()
    }

    #[test]
    fn dra_step_cases() {
        let universal = RabinAutomaton::builder(["i"], Vec::<&str>::new(), "i")
            .default_edge("i", "i")
            .pair(&[] as &[&str], &["i"])
            .build()
            .unwrap();
        assert!(validate_rabin(&universal).is_empty());
        assert_eq!(dra_step(&universal, "i", &[] as &[&str]).unwrap(), "i");

        let a = reach_automaton();
        assert!(validate_rabin(&a).is_empty());
        assert_eq!(dra_step(&a, "q0", &["goal"]).unwrap(), "acc");
        assert_eq!(dra_step(&a, "q0", &[] as &[&str]).unwrap(), "q0");
        assert!(dra_step(&a, "zz", &["goal"]).is_err());
        assert!(dra_step(&a, "q0", &["nope"]).is_err());
    }

    #[test]
    fn partial_automaton_is_reported() {
        let a = RabinAutomaton::builder(["q0"], ["p"], "q0")
            .edge("q0", &["p"], "q0")
            .build()
            .unwrap();
        let v = validate_rabin(&a);
        assert_eq!(v.len(), 2);
        assert!(v[0].message.contains("partial"));
        assert!(v[1].message.contains("no pairs"));
    }

    #[test]
    fn cognitive_validation() {
        let m = CognitiveModel::builder(["lo", "hi"], ["up"])
            .initial("lo", 1.0)
            .transition("lo", "up", "hi", 1.0)
            .cost("lo", "up", "hi", -1.0)
            .gamma(0.9)
            .build()
            .unwrap();
        let v = validate_cognitive(&m);
        let msgs: Vec<String> = v.iter().map(|v| v.to_string()).collect();
        assert_eq!(v.len(), 3, "{msgs:?}");
        assert!(msgs.iter().any(|m| m.contains("not applicable")));
        assert!(msgs.iter().any(|m| m.contains("non-negative")));
        assert!(msgs.iter().any(|m| m.contains("takeover")));
    }
}
