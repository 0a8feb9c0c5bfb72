//! Maximal end components and accepting end components for Rabin pairs.

use std::collections::{BTreeMap, BTreeSet};

use petgraph::algo::tarjan_scc;
use petgraph::graph::{DiGraph, NodeIndex};

use crate::compose::{ProductMdp, StateSet};
use crate::model::PROB_TOL;

/// A set of states with, for each, the non-empty set of actions that keep
/// the process inside the set.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct EndComponent {
    pub states: StateSet,
    pub actions: BTreeMap<usize, BTreeSet<usize>>,
    /// Indices of the acceptance pairs this component satisfies (empty for
    /// plain maximal end components).
    pub pairs: Vec<usize>,
}

impl EndComponent {
    pub fn contains(&self, v: usize) -> bool {
        self.states.contains(&v)
    }

    pub fn staying(&self, v: usize) -> impl Iterator<Item = usize> + '_ {
        self.actions.get(&v).into_iter().flatten().copied()
    }
}

fn support_within(p: &ProductMdp, v: usize, a: usize, keep: impl Fn(usize) -> bool) -> bool {
    p.choice(v, a).is_some_and(|c| {
        c.succ
            .iter()
            .filter(|t| t.prob > PROB_TOL)
            .all(|t| keep(t.target))
    })
}

/// Strongly connected components of the graph over `states` whose edges
/// follow the positive-probability successors of `actions`. Each component
/// is returned sorted and the list is ordered by smallest member.
pub(crate) fn sccs(
    p: &ProductMdp,
    states: &StateSet,
    actions: &BTreeMap<usize, BTreeSet<usize>>,
) -> Vec<StateSet> {
    let mut g = DiGraph::<usize, ()>::with_capacity(states.len(), 0);
    let mut node: BTreeMap<usize, NodeIndex> = BTreeMap::new();
    for &v in states {
        node.insert(v, g.add_node(v));
    }
    for &v in states {
        for &a in actions.get(&v).into_iter().flatten() {
            if let Some(c) = p.choice(v, a) {
                for t in &c.succ {
                    if t.prob > PROB_TOL {
                        if let Some(&w) = node.get(&t.target) {
                            g.update_edge(node[&v], w, ());
                        }
                    }
                }
            }
        }
    }
    let mut out: Vec<StateSet> = tarjan_scc(&g)
        .into_iter()
        .map(|c| c.into_iter().map(|n| g[n]).collect())
        .collect();
    out.sort_by_key(|c: &StateSet| *c.iter().next().unwrap());
    out
}

/// Maximal end components of the sub-MDP induced by `allowed` states.
pub fn maximal_end_components_within(p: &ProductMdp, allowed: &StateSet) -> Vec<EndComponent> {
    let mut states: StateSet = allowed.clone();
    let mut actions: BTreeMap<usize, BTreeSet<usize>> = BTreeMap::new();
    for &v in &states {
        let acts: BTreeSet<usize> = p
            .choices(v)
            .iter()
            .map(|c| c.action)
            .filter(|&a| support_within(p, v, a, |t| allowed.contains(&t)))
            .collect();
        actions.insert(v, acts);
    }
    loop {
        let comps = sccs(p, &states, &actions);
        let mut comp_of: BTreeMap<usize, usize> = BTreeMap::new();
        for (k, c) in comps.iter().enumerate() {
            for &v in c {
                comp_of.insert(v, k);
            }
        }
        let mut changed = false;
        let mut dead = Vec::new();
        for &v in &states {
            let k = comp_of[&v];
            let acts = actions.get_mut(&v).unwrap();
            let before = acts.len();
            acts.retain(|&a| support_within(p, v, a, |t| comp_of.get(&t) == Some(&k)));
            changed |= acts.len() != before;
            if acts.is_empty() {
                dead.push(v);
            }
        }
        for v in dead {
            states.remove(&v);
            actions.remove(&v);
            changed = true;
        }
        if !changed {
            return comps
                .into_iter()
                .filter(|c| c.iter().all(|v| states.contains(v)))
                .map(|c| EndComponent {
                    actions: c.iter().map(|v| (*v, actions[v].clone())).collect(),
                    states: c,
                    pairs: Vec::new(),
                })
                .collect();
        }
    }
}

pub fn maximal_end_components(p: &ProductMdp) -> Vec<EndComponent> {
    maximal_end_components_within(p, &(0..p.num_states()).collect())
}

fn aecs_for_pair(p: &ProductMdp, i: usize) -> Vec<EndComponent> {
    let pair = &p.pairs()[i];
    let allowed: StateSet = (0..p.num_states())
        .filter(|v| !pair.avoid.contains(v))
        .collect();
    maximal_end_components_within(p, &allowed)
        .into_iter()
        .filter(|ec| {
            debug_assert!(ec.states.is_disjoint(&pair.avoid));
            !ec.states.is_disjoint(&pair.recur)
        })
        .map(|mut ec| {
            ec.pairs.push(i);
            ec
        })
        .collect()
}

/// Accepting end components: per pair, the maximal end components of the
/// sub-MDP without the pair's avoid states that meet its recur states.
/// Components found for several pairs are merged.
pub fn accepting_end_components(p: &ProductMdp) -> Vec<EndComponent> {
    #[cfg(feature = "parallel")]
    let per_pair: Vec<Vec<EndComponent>> = {
        use rayon::prelude::*;
        (0..p.pairs().len())
            .into_par_iter()
            .map(|i| aecs_for_pair(p, i))
            .collect()
    };
    #[cfg(not(feature = "parallel"))]
    let per_pair: Vec<Vec<EndComponent>> =
        (0..p.pairs().len()).map(|i| aecs_for_pair(p, i)).collect();

    let mut merged: BTreeMap<Vec<usize>, EndComponent> = BTreeMap::new();
    for ec in per_pair.into_iter().flatten() {
        let key: Vec<usize> = ec.states.iter().copied().collect();
        match merged.get_mut(&key) {
            Some(existing) => {
                for (v, acts) in ec.actions {
                    existing.actions.entry(v).or_default().extend(acts);
                }
                existing.pairs.extend(ec.pairs);
            }
            None => {
                merged.insert(key, ec);
            }
        }
    }
    merged.into_values().collect()
}

/// Union of the state sets of `aecs`.
pub fn accepting_states_union(aecs: &[EndComponent]) -> StateSet {
    aecs.iter().flat_map(|ec| ec.states.iter().copied()).collect()
}

/// Checks closure and strong connectivity of `(states, actions)`.
pub fn is_end_component(
    p: &ProductMdp,
    states: &StateSet,
    actions: &BTreeMap<usize, BTreeSet<usize>>,
) -> bool {
    if states.is_empty() {
        return false;
    }
    for &v in states {
        match actions.get(&v) {
            Some(acts) if !acts.is_empty() => {
                if !acts
                    .iter()
                    .all(|&a| support_within(p, v, a, |t| states.contains(&t)))
                {
                    return false;
                }
            }
            _ => return false,
        }
    }
    sccs(p, states, actions).len() == 1
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::compose::{AcceptancePair, Choice, ControlMode, SaAction, Transition};
    use crate::model::Distribution;

    fn det(edges: &[&[usize]]) -> ProductMdp {
        let choices = edges
            .iter()
            .map(|outs| {
                outs.iter()
                    .enumerate()
                    .map(|(a, &t)| Choice {
                        action: a,
                        succ: vec![Transition {
                            target: t,
                            prob: 1.0,
                            cost: 0.0,
                        }],
                    })
                    .collect()
            })
            .collect();
        ProductMdp::from_parts(
            (0..edges.len()).map(|i| format!("v{i}")).collect(),
            vec![
                SaAction::new("x", ControlMode::Autonomous, "e"),
                SaAction::new("y", ControlMode::Autonomous, "e"),
            ],
            choices,
            Distribution::point(0),
            0.9,
            vec![AcceptancePair::default()],
        )
        .unwrap()
    }

    #[test]
    fn absorbing_state_is_a_singleton_mec() {
        let p = det(&[&[1], &[1]]);
        let mecs = maximal_end_components(&p);
        assert_eq!(mecs.len(), 1);
        assert_eq!(mecs[0].states, [1].into_iter().collect());
        assert_eq!(mecs[0].actions[&1], [0].into_iter().collect());
    }

    #[test]
    fn two_cycles_joined_one_way() {
        let p = det(&[&[1], &[0, 2], &[3], &[2]]);
        let mecs = maximal_end_components(&p);
        assert_eq!(mecs.len(), 2);
        assert_eq!(mecs[0].states, [0, 1].into_iter().collect());
        assert_eq!(mecs[0].actions[&1], [0].into_iter().collect());
        assert_eq!(mecs[1].states, [2, 3].into_iter().collect());
    }

    #[test]
    fn avoid_states_exclude_components() {
        let mut p = det(&[&[1], &[0], &[2]]);
        p.pairs = vec![
            AcceptancePair {
                avoid: [0].into_iter().collect(),
                recur: [1].into_iter().collect(),
            },
            AcceptancePair {
                avoid: StateSet::new(),
                recur: [2].into_iter().collect(),
            },
        ];
        let aecs = accepting_end_components(&p);
        assert_eq!(aecs.len(), 1);
        assert_eq!(aecs[0].states, [2].into_iter().collect());
        assert_eq!(aecs[0].pairs, vec![1]);
    }

    #[test]
    fn overlapping_pairs_merge() {
        let mut p = det(&[&[1], &[0, 2], &[2]]);
        p.pairs = vec![
            AcceptancePair {
                avoid: [0].into_iter().collect(),
                recur: [2].into_iter().collect(),
            },
            AcceptancePair {
                avoid: StateSet::new(),
                recur: [0, 2].into_iter().collect(),
            },
        ];
        let aecs = accepting_end_components(&p);
        let w = accepting_states_union(&aecs);
        assert_eq!(w, [0, 1, 2].into_iter().collect());
        let singleton = aecs.iter().find(|e| e.states.len() == 1).unwrap();
        assert_eq!(singleton.pairs, vec![0, 1]);
        assert!(accepting_states_union(&[]).is_empty());
    }
}
