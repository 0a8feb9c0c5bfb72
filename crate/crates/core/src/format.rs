//! JSON file formats for models, automata and synthesized policy bundles.
//!
//! Every file carries a `kind` field (`mdp`, `cognitive`, `rabin` or
//! `bundle`). Unknown fields are rejected; parse errors report line and
//! column.

use std::collections::BTreeMap;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::aec::{terminal_costs, TerminalCostMap};
use crate::compose::{compose_shared_autonomy, product_with_dra, ProductMdp};
use crate::ec::accepting_end_components;
use crate::error::{Error, Result};
use crate::model::{
    validate_cognitive, validate_mdp, validate_rabin, CognitiveModel, Distribution, LabeledMdp,
    RabinAutomaton, Violation,
};
use crate::pareto::ValueProfile;
use crate::policy::MemorylessPolicy;
use crate::sim::{Estimate, Trace};
use crate::synth::{Synthesis, SynthesisConfig};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MdpFile {
    pub kind: String,
    pub states: Vec<String>,
    pub actions: Vec<String>,
    #[serde(default)]
    pub ap: Vec<String>,
    #[serde(default)]
    pub labels: BTreeMap<String, Vec<String>>,
    pub initial: Vec<(String, f64)>,
    /// `[state, action, successor, probability]`.
    pub transitions: Vec<(String, String, String, f64)>,
    pub gamma: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CognitiveFile {
    pub kind: String,
    pub states: Vec<String>,
    pub events: Vec<String>,
    pub initial: Vec<(String, f64)>,
    pub transitions: Vec<(String, String, String, f64)>,
    /// `[state, event, successor, cost]`.
    pub costs: Vec<(String, String, String, f64)>,
    pub takeover: Vec<String>,
    pub gamma: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PairFile {
    pub avoid: Vec<String>,
    pub recur: Vec<String>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RabinFile {
    pub kind: String,
    pub states: Vec<String>,
    pub ap: Vec<String>,
    pub initial: String,
    /// `[state, letter, successor]` where the letter lists the true
    /// propositions.
    #[serde(default)]
    pub edges: Vec<(String, Vec<String>, String)>,
    /// Successor for every letter a state does not list.
    #[serde(default)]
    pub defaults: BTreeMap<String, String>,
    pub pairs: Vec<PairFile>,
}

impl MdpFile {
    pub fn from_model(m: &LabeledMdp) -> Self {
        let st = &m.states;
        let mut labels = BTreeMap::new();
        for (s, l) in m.labels.iter().enumerate() {
            if !l.is_empty() {
                labels.insert(st[s].clone(), l.iter().cloned().collect());
            }
        }
        let mut transitions = Vec::new();
        for (&(s, a), d) in &m.transitions {
            for &(t, p) in d.entries() {
                transitions.push((st[s].clone(), m.actions[a].clone(), st[t].clone(), p));
            }
        }
        MdpFile {
            kind: "mdp".into(),
            states: st.clone(),
            actions: m.actions.clone(),
            ap: m.ap.clone(),
            labels,
            initial: m.initial.entries().iter().map(|&(s, p)| (st[s].clone(), p)).collect(),
            transitions,
            gamma: m.gamma,
        }
    }

    pub fn to_model(&self) -> Result<LabeledMdp> {
        expect_kind(&self.kind, "mdp")?;
        let mut b = LabeledMdp::builder(self.states.clone(), self.actions.clone(), self.ap.clone())
            .gamma(self.gamma);
        for (s, props) in &self.labels {
            for a in props {
                b = b.label(s, a);
            }
        }
        for (s, p) in &self.initial {
            b = b.initial(s, *p);
        }
        for (s, a, t, p) in &self.transitions {
            b = b.transition(s, a, t, *p);
        }
        b.build()
    }
}

impl CognitiveFile {
    pub fn from_model(m: &CognitiveModel) -> Self {
        let hs = &m.states;
        let ev = &m.events;
        let mut transitions = Vec::new();
        for (&(h, e), d) in &m.transitions {
            for &(h2, p) in d.entries() {
                transitions.push((hs[h].clone(), ev[e].clone(), hs[h2].clone(), p));
            }
        }
        CognitiveFile {
            kind: "cognitive".into(),
            states: hs.clone(),
            events: ev.clone(),
            initial: m.initial.entries().iter().map(|&(h, p)| (hs[h].clone(), p)).collect(),
            transitions,
            costs: m
                .costs
                .iter()
                .map(|(&(h, e, h2), &c)| (hs[h].clone(), ev[e].clone(), hs[h2].clone(), c))
                .collect(),
            takeover: m.takeover.iter().map(|&h| hs[h].clone()).collect(),
            gamma: m.gamma,
        }
    }

    pub fn to_model(&self) -> Result<CognitiveModel> {
        expect_kind(&self.kind, "cognitive")?;
        let mut b = CognitiveModel::builder(self.states.clone(), self.events.clone()).gamma(self.gamma);
        for (h, p) in &self.initial {
            b = b.initial(h, *p);
        }
        for (h, e, h2, p) in &self.transitions {
            b = b.transition(h, e, h2, *p);
        }
        for (h, e, h2, c) in &self.costs {
            b = b.cost(h, e, h2, *c);
        }
        for h in &self.takeover {
            b = b.takeover(h);
        }
        b.build()
    }
}

impl RabinFile {
    pub fn from_model(a: &RabinAutomaton) -> Self {
        let qs = &a.states;
        let mut edges = Vec::new();
        for (q, out) in a.edges.iter().enumerate() {
            for &(l, q2) in out {
                let letter = a.letter_names(l).into_iter().map(str::to_owned).collect();
                edges.push((qs[q].clone(), letter, qs[q2].clone()));
            }
        }
        let defaults = a
            .defaults
            .iter()
            .enumerate()
            .filter_map(|(q, d)| d.map(|q2| (qs[q].clone(), qs[q2].clone())))
            .collect();
        let names = |set: &std::collections::BTreeSet<usize>| set.iter().map(|&q| qs[q].clone()).collect();
        RabinFile {
            kind: "rabin".into(),
            states: qs.clone(),
            ap: a.ap.clone(),
            initial: qs[a.initial].clone(),
            edges,
            defaults,
            pairs: a
                .pairs
                .iter()
                .map(|p| PairFile {
                    avoid: names(&p.avoid),
                    recur: names(&p.recur),
                })
                .collect(),
        }
    }

    pub fn to_model(&self) -> Result<RabinAutomaton> {
        expect_kind(&self.kind, "rabin")?;
        let mut b = RabinAutomaton::builder(self.states.clone(), self.ap.clone(), &self.initial);
        for (q, letter, q2) in &self.edges {
            b = b.edge(q, letter, q2);
        }
        for (q, q2) in &self.defaults {
            b = b.default_edge(q, q2);
        }
        for p in &self.pairs {
            b = b.pair(&p.avoid, &p.recur);
        }
        b.build()
    }
}

fn expect_kind(found: &str, want: &str) -> Result<()> {
    if found == want {
        Ok(())
    } else {
        Err(Error::Format(format!("expected a `{want}` file, found kind `{found}`")))
    }
}

/// Any of the three input file kinds, after parsing.
#[derive(Clone, Debug, PartialEq)]
pub enum ModelFile {
    Mdp(LabeledMdp),
    Cognitive(CognitiveModel),
    Rabin(RabinAutomaton),
}

impl ModelFile {
    pub fn kind(&self) -> &'static str {
        match self {
            ModelFile::Mdp(_) => "mdp",
            ModelFile::Cognitive(_) => "cognitive",
            ModelFile::Rabin(_) => "rabin",
        }
    }

    pub fn validate(&self) -> Vec<Violation> {
        match self {
            ModelFile::Mdp(m) => validate_mdp(m),
            ModelFile::Cognitive(m) => validate_cognitive(m),
            ModelFile::Rabin(a) => validate_rabin(a),
        }
    }

    pub fn to_json(&self) -> Result<String> {
        match self {
            ModelFile::Mdp(m) => to_json(&MdpFile::from_model(m)),
            ModelFile::Cognitive(m) => to_json(&CognitiveFile::from_model(m)),
            ModelFile::Rabin(a) => to_json(&RabinFile::from_model(a)),
        }
    }
}

#[derive(Deserialize)]
struct KindOnly {
    kind: Option<String>,
}

/// Raw document of any input kind, before the models are built.
#[derive(Clone, Debug, PartialEq)]
pub enum Document {
    Mdp(MdpFile),
    Cognitive(CognitiveFile),
    Rabin(RabinFile),
}

impl Document {
    /// Parses a document, dispatching on its `kind` field.
    pub fn parse(text: &str) -> Result<Document> {
        let head: KindOnly = serde_json::from_str(text)?;
        match head.kind.as_deref() {
            Some("mdp") => Ok(Document::Mdp(serde_json::from_str(text)?)),
            Some("cognitive") => Ok(Document::Cognitive(serde_json::from_str(text)?)),
            Some("rabin") => Ok(Document::Rabin(serde_json::from_str(text)?)),
            Some(k) => Err(Error::Format(format!("unknown file kind `{k}`"))),
            None => Err(Error::Format("missing `kind` field".into())),
        }
    }

    /// Builds the model. Unknown identifiers fail here; semantic defects
    /// are left to validation.
    pub fn build(&self) -> Result<ModelFile> {
        Ok(match self {
            Document::Mdp(f) => ModelFile::Mdp(f.to_model()?),
            Document::Cognitive(f) => ModelFile::Cognitive(f.to_model()?),
            Document::Rabin(f) => ModelFile::Rabin(f.to_model()?),
        })
    }
}

pub fn to_json<T: Serialize>(value: &T) -> Result<String> {
    let mut s = serde_json::to_string_pretty(value)?;
    s.push('\n');
    Ok(s)
}

/// Compact single-line JSON, for line-delimited exports.
pub fn to_json_line<T: Serialize>(value: &T) -> Result<String> {
    let mut s = serde_json::to_string(value)?;
    s.push('\n');
    Ok(s)
}

/// Output of `simulate`: Monte-Carlo estimates next to the values the
/// bundle predicts.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct SimulationReport {
    pub estimate: Estimate,
    pub lp_profile: ValueProfile,
}

/// One simulated step with names instead of indices.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct StepRecord {
    pub t: usize,
    pub state: String,
    pub action: String,
    pub cost: f64,
    /// Whether the recurrence policy was in control.
    pub recurrence: bool,
}

/// One trace as a single line-delimited record.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct TraceRecord {
    pub trace: usize,
    pub seed: u64,
    pub switch_index: Option<usize>,
    pub last: String,
    pub steps: Vec<StepRecord>,
}

impl TraceRecord {
    pub fn new(p: &ProductMdp, index: usize, seed: u64, trace: &Trace) -> Self {
        TraceRecord {
            trace: index,
            seed,
            switch_index: trace.switch_index,
            last: p.name(trace.last).to_owned(),
            steps: trace
                .steps
                .iter()
                .enumerate()
                .map(|(t, s)| StepRecord {
                    t,
                    state: p.name(s.state).to_owned(),
                    action: p.action(s.action).to_string(),
                    cost: s.cost,
                    recurrence: trace.switch_index.is_some_and(|k| t >= k),
                })
                .collect(),
        }
    }
}

pub fn parse_mdp(text: &str) -> Result<LabeledMdp> {
    serde_json::from_str::<MdpFile>(text)?.to_model()
}

pub fn parse_cognitive(text: &str) -> Result<CognitiveModel> {
    serde_json::from_str::<CognitiveFile>(text)?.to_model()
}

pub fn parse_rabin(text: &str) -> Result<RabinAutomaton> {
    serde_json::from_str::<RabinFile>(text)?.to_model()
}

pub fn mdp_to_json(m: &LabeledMdp) -> Result<String> {
    to_json(&MdpFile::from_model(m))
}

pub fn cognitive_to_json(m: &CognitiveModel) -> Result<String> {
    to_json(&CognitiveFile::from_model(m))
}

pub fn rabin_to_json(a: &RabinAutomaton) -> Result<String> {
    to_json(&RabinFile::from_model(a))
}

pub fn read_text(path: &Path) -> Result<String> {
    std::fs::read_to_string(path).map_err(|e| {
        Error::Io(std::io::Error::new(e.kind(), format!("{}: {e}", path.display())))
    })
}

/// The four synthesis inputs as files.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Inputs {
    pub ma: MdpFile,
    pub mh: MdpFile,
    pub att: CognitiveFile,
    pub dra: RabinFile,
}

impl Inputs {
    pub fn new(ma: &LabeledMdp, mh: &LabeledMdp, att: &CognitiveModel, dra: &RabinAutomaton) -> Self {
        Inputs {
            ma: MdpFile::from_model(ma),
            mh: MdpFile::from_model(mh),
            att: CognitiveFile::from_model(att),
            dra: RabinFile::from_model(dra),
        }
    }

    pub fn models(&self) -> Result<(LabeledMdp, LabeledMdp, CognitiveModel, RabinAutomaton)> {
        Ok((self.ma.to_model()?, self.mh.to_model()?, self.att.to_model()?, self.dra.to_model()?))
    }

    pub fn product(&self) -> Result<ProductMdp> {
        let (ma, mh, att, dra) = self.models()?;
        product_with_dra(&compose_shared_autonomy(&ma, &mh, &att)?, &dra)
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ConfigFile {
    pub eps_aug: f64,
    pub eps_visit: f64,
    pub max_backoff: u32,
    pub recurrence_mix: f64,
}

impl ConfigFile {
    pub fn from_config(c: &SynthesisConfig) -> Self {
        ConfigFile {
            eps_aug: c.eps_aug,
            eps_visit: c.aec.eps_visit,
            max_backoff: c.aec.max_backoff,
            recurrence_mix: c.aec.recurrence_mix,
        }
    }

    pub fn to_config(&self) -> SynthesisConfig {
        let mut c = SynthesisConfig {
            eps_aug: self.eps_aug,
            ..SynthesisConfig::default()
        };
        c.aec.eps_visit = self.eps_visit;
        c.aec.max_backoff = self.max_backoff;
        c.aec.recurrence_mix = self.recurrence_mix;
        c
    }
}

/// Action distribution at one product state, by name.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PolicyRow {
    pub state: String,
    pub actions: Vec<(String, f64)>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ComponentRecord {
    pub states: Vec<String>,
    /// Acceptance pairs the component satisfies.
    pub pairs: Vec<usize>,
    pub lp_objective: f64,
    pub eps_visit: f64,
    /// Whether the uniform staying policy was mixed in.
    pub mixed: bool,
    pub policy: Vec<PolicyRow>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TerminalRow {
    pub state: String,
    pub cost: f64,
    pub component: usize,
}

/// Everything `synthesize` produces for one weight vector, self-contained
/// enough to be simulated later.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PolicyBundle {
    pub kind: String,
    pub inputs: Inputs,
    pub config: ConfigFile,
    pub weights: [f64; 2],
    pub lambda: [f64; 2],
    pub ideal: [f64; 2],
    pub nadir: [f64; 2],
    pub profile: ValueProfile,
    pub stage1_policy: Vec<PolicyRow>,
    pub components: Vec<ComponentRecord>,
    pub terminal: Vec<TerminalRow>,
    pub warnings: Vec<String>,
}

pub fn policy_rows(p: &ProductMdp, g: &MemorylessPolicy) -> Vec<PolicyRow> {
    g.iter()
        .map(|(v, d)| PolicyRow {
            state: p.name(v).to_owned(),
            actions: d
                .entries()
                .iter()
                .map(|&(a, q)| (p.action(a).to_string(), q))
                .collect(),
        })
        .collect()
}

pub fn policy_from_rows(p: &ProductMdp, rows: &[PolicyRow]) -> Result<MemorylessPolicy> {
    let names: BTreeMap<String, usize> = p
        .actions()
        .iter()
        .enumerate()
        .map(|(i, a)| (a.to_string(), i))
        .collect();
    let mut g = MemorylessPolicy::new();
    for row in rows {
        let v = p.state_index(&row.state)?;
        let mut entries = Vec::new();
        for (a, q) in &row.actions {
            let i = *names.get(a).ok_or_else(|| Error::not_found("action", a.clone()))?;
            entries.push((i, *q));
        }
        g.set(v, Distribution::from_raw(entries));
    }
    g.check(p)?;
    Ok(g)
}

impl PolicyBundle {
    pub fn new(
        inputs: Inputs,
        synthesis: &Synthesis,
        weights: [f64; 2],
        lambda: [f64; 2],
        profile: ValueProfile,
        policy: &MemorylessPolicy,
    ) -> Self {
        let p = &synthesis.product;
        let components = synthesis
            .terminal
            .solutions
            .iter()
            .map(|s| ComponentRecord {
                states: s.component.states.iter().map(|&v| p.name(v).to_owned()).collect(),
                pairs: s.component.pairs.clone(),
                lp_objective: s.objective,
                eps_visit: s.eps_visit,
                mixed: s.mixed,
                policy: policy_rows(p, &s.policy),
            })
            .collect();
        let terminal = synthesis
            .terminal
            .values
            .iter()
            .map(|(&v, &cost)| TerminalRow {
                state: p.name(v).to_owned(),
                cost,
                component: synthesis.terminal.chosen[&v],
            })
            .collect();
        PolicyBundle {
            kind: "bundle".into(),
            inputs,
            config: ConfigFile::from_config(&synthesis.config),
            weights,
            lambda,
            ideal: synthesis.reference.ideal,
            nadir: synthesis.reference.nadir,
            profile,
            stage1_policy: policy_rows(p, policy),
            components,
            terminal,
            warnings: synthesis.warnings(),
        }
    }

    pub fn parse(text: &str) -> Result<PolicyBundle> {
        let b: PolicyBundle = serde_json::from_str(text)?;
        expect_kind(&b.kind, "bundle")?;
        Ok(b)
    }

    /// Rebuilds the product and maps the stored policies back onto it.
    ///
    /// The accepting components are recomputed from the inputs and must
    /// agree with the stored ones; the stored recurrence policies and
    /// terminal costs then replace the recomputed ones.
    pub fn restore(&self) -> Result<Restored> {
        let product = self.inputs.product()?;
        let cfg = self.config.to_config();
        let aecs = accepting_end_components(&product);
        let mut terminal = terminal_costs(&product, &aecs, &cfg.aec)?;
        if terminal.solutions.len() != self.components.len() {
            return Err(Error::Format(format!(
                "bundle lists {} components, the inputs give {}",
                self.components.len(),
                terminal.solutions.len()
            )));
        }
        for (sol, rec) in terminal.solutions.iter_mut().zip(&self.components) {
            let names: Vec<&str> = sol.component.states.iter().map(|&v| product.name(v)).collect();
            if names != rec.states {
                return Err(Error::Format("bundle components do not match the inputs".into()));
            }
            sol.policy = policy_from_rows(&product, &rec.policy)?;
        }
        terminal.values.clear();
        terminal.chosen.clear();
        for row in &self.terminal {
            let v = product.state_index(&row.state)?;
            if row.component >= terminal.solutions.len() || !terminal.solutions[row.component].component.contains(v) {
                return Err(Error::Format(format!("terminal row for {} names a wrong component", row.state)));
            }
            terminal.values.insert(v, row.cost);
            terminal.chosen.insert(v, row.component);
        }
        let policy = policy_from_rows(&product, &self.stage1_policy)?;
        Ok(Restored {
            product,
            policy,
            terminal,
        })
    }
}

/// A bundle mapped back onto its product.
#[derive(Clone, Debug)]
pub struct Restored {
    pub product: ProductMdp,
    pub policy: MemorylessPolicy,
    pub terminal: TerminalCostMap,
}
