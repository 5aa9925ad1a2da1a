//! The static termination conditions beyond the polynomial graph tests:
//! stratification over chase graphs, restriction systems, inductive
//! restriction, and the level hierarchy decided by the check/sub recursion.
//!
//! A k-restriction system pairs a constraint graph with position sets that
//! overestimate, per constraint, where labeled nulls can sit when it fires.
//! The minimal system is the least fixpoint of two rules: the k-ary firing
//! relation (evaluated with the source constraint's position set) adds path
//! edges, and every edge propagates the head closure of its source into its
//! target's set. Cyclic components of the minimal system are the units the
//! decomposition algorithms recurse on.

use std::collections::{BTreeMap, BTreeSet, HashMap};
use std::fmt::Write as _;

use serde::Serialize;

use crate::firing::{chase_graph, fires_before_kp, ConstraintGraph, FiringMode};
use crate::graphs::{dependency_graph, propagation_graph, safe, weakly_acyclic};
use crate::model::{Constraint, ConstraintSet, Position, Term, Tgd};

/// Constraint graph plus the per-constraint position sets it was closed
/// under.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct RestrictionSystem {
    pub k: usize,
    pub edges: BTreeSet<(String, String)>,
    pub f: BTreeMap<String, BTreeSet<Position>>,
}

impl RestrictionSystem {
    /// The single position set view: union over all constraints.
    pub fn f_union(&self) -> BTreeSet<Position> {
        self.f.values().flatten().cloned().collect()
    }

    pub fn graph(&self, sigma: &ConstraintSet) -> ConstraintGraph {
        ConstraintGraph {
            nodes: sigma.labels().iter().map(|s| s.to_string()).collect(),
            edges: self.edges.clone(),
        }
    }

    pub fn to_dot(&self, name: &str) -> String {
        let mut out = String::new();
        let _ = writeln!(out, "digraph {} {{", name);
        for (label, ps) in &self.f {
            let pos: Vec<String> = ps.iter().map(|p| p.to_string()).collect();
            let _ = writeln!(out, "  \"{}\" [label=\"{} {{{}}}\"];", label, label, pos.join(","));
        }
        for (a, b) in &self.edges {
            let _ = writeln!(out, "  \"{}\" -> \"{}\";", a, b);
        }
        let _ = writeln!(out, "}}");
        out
    }
}

/// Head positions of a TGD into which a null confined to `p` can propagate:
/// positions holding an existential variable, or whose universal variables
/// all occur in the body only at positions from `p`.
pub fn aff_cl(t: &Tgd, p: &BTreeSet<Position>) -> BTreeSet<Position> {
    let mut body_occ: BTreeMap<&str, BTreeSet<Position>> = BTreeMap::new();
    for a in &t.body {
        for (i, term) in a.args.iter().enumerate() {
            if let Term::Var(v) = term {
                body_occ
                    .entry(v.as_str())
                    .or_default()
                    .insert(Position::new(a.predicate.clone(), i + 1));
            }
        }
    }
    let mut head_universals: BTreeMap<Position, BTreeSet<&str>> = BTreeMap::new();
    let mut head_existentials: BTreeSet<Position> = BTreeSet::new();
    for a in &t.head {
        for (i, term) in a.args.iter().enumerate() {
            let pos = Position::new(a.predicate.clone(), i + 1);
            if let Term::Var(v) = term {
                if t.existentials.contains(v) {
                    head_existentials.insert(pos);
                } else {
                    head_universals.entry(pos).or_default().insert(v.as_str());
                }
            } else {
                head_universals.entry(pos).or_default();
            }
        }
    }
    let mut out = head_existentials.clone();
    for (pos, vars) in head_universals {
        if vars
            .iter()
            .all(|v| body_occ.get(v).map(|occ| occ.is_subset(p)).unwrap_or(true))
        {
            out.insert(pos);
        }
    }
    out
}

/// Memo shared by a classification session.
#[derive(Default)]
pub struct AnalysisCache {
    systems: HashMap<(Vec<String>, usize), RestrictionSystem>,
    subs: HashMap<(Vec<String>, usize), bool>,
    chains: HashMap<(Vec<String>, Vec<String>, Vec<Position>), bool>,
}

fn chain_fires_memo(
    cache: &mut AnalysisCache,
    sigma: &ConstraintSet,
    chain: &[&str],
    p: &BTreeSet<Position>,
) -> bool {
    let key = (
        sigma.labels().iter().map(|s| s.to_string()).collect(),
        chain.iter().map(|s| s.to_string()).collect(),
        p.iter().cloned().collect::<Vec<_>>(),
    );
    if let Some(&v) = cache.chains.get(&key) {
        return v;
    }
    let v = fires_before_kp(sigma, chain, p);
    cache.chains.insert(key, v);
    v
}

fn chains_of(labels: &[String], k: usize) -> Vec<Vec<String>> {
    let mut out: Vec<Vec<String>> = vec![Vec::new()];
    for _ in 0..k {
        let mut next = Vec::new();
        for prefix in &out {
            for l in labels {
                let mut c = prefix.clone();
                c.push(l.clone());
                next.push(c);
            }
        }
        out = next;
    }
    out
}

/// Least fixpoint computation of the minimal k-restriction system.
pub fn minimal_restriction_system(
    sigma: &ConstraintSet,
    k: usize,
    cache: &mut AnalysisCache,
) -> RestrictionSystem {
    assert!(k >= 2, "restriction systems are defined for k >= 2");
    let labels: Vec<String> = sigma.labels().iter().map(|s| s.to_string()).collect();
    let key = (labels.clone(), k);
    if let Some(sys) = cache.systems.get(&key) {
        return sys.clone();
    }
    let pos_sigma = sigma.body_positions();
    let mut edges: BTreeSet<(String, String)> = BTreeSet::new();
    let mut f: BTreeMap<String, BTreeSet<Position>> = labels
        .iter()
        .map(|l| (l.clone(), BTreeSet::new()))
        .collect();
    let all_chains = chains_of(&labels, k);
    loop {
        let mut changed = false;
        for chain in &all_chains {
            let path: Vec<(String, String)> = chain
                .windows(2)
                .map(|w| (w[0].clone(), w[1].clone()))
                .collect();
            if path.iter().all(|e| edges.contains(e)) {
                continue;
            }
            let p = f[&chain[0]].clone();
            let refs: Vec<&str> = chain.iter().map(|s| s.as_str()).collect();
            if chain_fires_memo(cache, sigma, &refs, &p) {
                for e in path {
                    changed |= edges.insert(e);
                }
            }
        }
        for (a, b) in edges.clone() {
            if let Some(Constraint::Tgd(t)) = sigma.get(&a) {
                let add: BTreeSet<Position> = aff_cl(t, &f[&a])
                    .intersection(&pos_sigma)
                    .cloned()
                    .collect();
                let target = f.get_mut(&b).unwrap();
                for p in add {
                    changed |= target.insert(p);
                }
            }
        }
        if !changed {
            break;
        }
    }
    let sys = RestrictionSystem { k, edges, f };
    cache.systems.insert(key, sys.clone());
    sys
}

fn cyclic_components(sigma: &ConstraintSet, edges: &BTreeSet<(String, String)>) -> Vec<BTreeSet<String>> {
    let g = ConstraintGraph {
        nodes: sigma.labels().iter().map(|s| s.to_string()).collect(),
        edges: edges.clone(),
    };
    g.cyclic_components()
}

/// Recursive decomposition into the cyclically connected constraint subsets
/// of minimal k-restriction systems.
pub fn part(sigma: &ConstraintSet, k: usize, cache: &mut AnalysisCache) -> Vec<ConstraintSet> {
    let sys = minimal_restriction_system(sigma, k, cache);
    let comps = cyclic_components(sigma, &sys.edges);
    match comps.len() {
        0 => Vec::new(),
        1 => {
            let c1 = sigma.restrict(&comps[0]);
            if c1.constraints.len() != sigma.constraints.len() {
                part(&c1, k, cache)
            } else {
                vec![sigma.clone()]
            }
        }
        _ => comps
            .into_iter()
            .flat_map(|c| part(&sigma.restrict(&c), k, cache))
            .collect(),
    }
}

/// Every subset produced by the binary decomposition is safe.
pub fn inductively_restricted(sigma: &ConstraintSet) -> bool {
    let mut cache = AnalysisCache::default();
    part(sigma, 2, &mut cache).iter().all(safe)
}

fn sub(sigma: &ConstraintSet, k: usize, cache: &mut AnalysisCache) -> bool {
    let key = (
        sigma.labels().iter().map(|s| s.to_string()).collect::<Vec<_>>(),
        k,
    );
    if let Some(&v) = cache.subs.get(&key) {
        return v;
    }
    let v = sub_inner(sigma, k, cache);
    cache.subs.insert(key, v);
    v
}

fn sub_inner(sigma: &ConstraintSet, k: usize, cache: &mut AnalysisCache) -> bool {
    if safe(sigma) {
        return true;
    }
    let sys = minimal_restriction_system(sigma, k, cache);
    let comps = cyclic_components(sigma, &sys.edges);
    match comps.len() {
        0 => true,
        1 => {
            let c1 = sigma.restrict(&comps[0]);
            if c1.constraints.len() != sigma.constraints.len() {
                check(&c1, k, cache)
            } else {
                false
            }
        }
        _ => comps
            .iter()
            .all(|c| check(&sigma.restrict(c), k, cache)),
    }
}

fn check(sigma: &ConstraintSet, k: usize, cache: &mut AnalysisCache) -> bool {
    for i in (2..=k).rev() {
        if sub(sigma, i, cache) {
            return true;
        }
    }
    false
}

/// Membership in the k-th hierarchy level.
pub fn t_member(sigma: &ConstraintSet, k: usize) -> bool {
    let mut cache = AnalysisCache::default();
    t_member_cached(sigma, k, &mut cache)
}

pub fn t_member_cached(sigma: &ConstraintSet, k: usize, cache: &mut AnalysisCache) -> bool {
    assert!(k >= 2);
    check(sigma, k, cache)
}

/// Every cyclically connected component of the chase graph is weakly
/// acyclic.
pub fn stratified(sigma: &ConstraintSet, mode: FiringMode) -> bool {
    let g = chase_graph(sigma, mode);
    g.cyclic_components()
        .into_iter()
        .all(|comp| weakly_acyclic(&sigma.restrict(&comp)))
}

/// Condensation classes of the standard chase graph in topological order;
/// always defined, and a terminating schedule whenever the set is
/// stratified.
pub fn chase_condensation_order(sigma: &ConstraintSet) -> Vec<Vec<String>> {
    chase_graph(sigma, FiringMode::Standard).condensation_order()
}

/// The ordered partition a terminating sequence can follow, available
/// exactly for stratified sets.
pub fn terminating_order(sigma: &ConstraintSet) -> Option<Vec<Vec<String>>> {
    if stratified(sigma, FiringMode::Standard) {
        Some(chase_condensation_order(sigma))
    } else {
        None
    }
}

#[derive(Clone, Debug, Default, Serialize, PartialEq, Eq)]
pub struct Witnesses {
    /// Special dependency edge lying on a cycle (weak acyclicity failure).
    #[serde(skip_serializing_if = "Option::is_none")]
    pub dependency_special_cycle: Option<(String, String)>,
    /// Special propagation edge lying on a cycle (safety failure).
    #[serde(skip_serializing_if = "Option::is_none")]
    pub propagation_special_cycle: Option<(String, String)>,
    /// Chase-graph component that is not weakly acyclic.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub non_weakly_acyclic_component: Option<Vec<String>>,
    /// Oblivious chase-graph component that is not weakly acyclic.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub c_non_weakly_acyclic_component: Option<Vec<String>>,
    /// Unsafe subset produced by the binary decomposition.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub unsafe_part_component: Option<Vec<String>>,
}

#[derive(Clone, Debug, Serialize, PartialEq, Eq)]
pub struct ClassificationReport {
    pub weakly_acyclic: bool,
    pub safe: bool,
    pub stratified: bool,
    pub c_stratified: bool,
    pub inductively_restricted: bool,
    pub t_level: Option<usize>,
    /// Guardedness classes, absent when the set contains EGDs.
    pub wgtgd: Option<bool>,
    pub rgtgd: Option<bool>,
    pub witnesses: Witnesses,
}

impl ClassificationReport {
    /// Some condition guaranteeing termination (of at least one sequence)
    /// holds.
    pub fn any_positive(&self) -> bool {
        self.weakly_acyclic
            || self.safe
            || self.stratified
            || self.c_stratified
            || self.inductively_restricted
            || self.t_level.is_some()
    }

    /// Conditions that bound every chase sequence, as opposed to
    /// stratification's weaker some-sequence guarantee.
    pub fn every_sequence_terminates(&self) -> bool {
        self.weakly_acyclic || self.safe || self.c_stratified || self.t_level.is_some()
    }
}

/// Runs every verdict, cheap conditions first, sharing firing-relation work.
pub fn classify(sigma: &ConstraintSet, max_k: usize) -> ClassificationReport {
    assert!(max_k >= 2);
    let mut cache = AnalysisCache::default();
    let wa = weakly_acyclic(sigma);
    let sf = safe(sigma);
    let mut witnesses = Witnesses::default();
    if !wa {
        witnesses.dependency_special_cycle = dependency_graph(sigma)
            .special_edge_on_cycle()
            .map(|(a, b)| (a.to_string(), b.to_string()));
    }
    if !sf {
        witnesses.propagation_special_cycle = propagation_graph(sigma)
            .special_edge_on_cycle()
            .map(|(a, b)| (a.to_string(), b.to_string()));
    }

    let strat = if wa {
        true
    } else {
        let g = chase_graph(sigma, FiringMode::Standard);
        let mut ok = true;
        for comp in g.cyclic_components() {
            if !weakly_acyclic(&sigma.restrict(&comp)) {
                witnesses.non_weakly_acyclic_component =
                    Some(comp.iter().cloned().collect());
                ok = false;
                break;
            }
        }
        ok
    };
    let c_strat = if wa {
        true
    } else {
        let g = chase_graph(sigma, FiringMode::Oblivious);
        let mut ok = true;
        for comp in g.cyclic_components() {
            if !weakly_acyclic(&sigma.restrict(&comp)) {
                witnesses.c_non_weakly_acyclic_component =
                    Some(comp.iter().cloned().collect());
                ok = false;
                break;
            }
        }
        ok
    };

    let ind = if sf {
        true
    } else {
        let parts = part(sigma, 2, &mut cache);
        let mut ok = true;
        for p in &parts {
            if !safe(p) {
                witnesses.unsafe_part_component =
                    Some(p.labels().iter().map(|s| s.to_string()).collect());
                ok = false;
                break;
            }
        }
        ok
    };

    let t_level = (2..=max_k).find(|&k| t_member_cached(sigma, k, &mut cache));

    let (wgtgd, rgtgd) = if sigma.is_tgd_only() {
        let w = crate::guard::weakly_guarded(sigma)
            .map(|r| r.guarded())
            .unwrap_or(false);
        let r = crate::guard::restrictedly_guarded(sigma)
            .map(|r| r.guarded())
            .unwrap_or(false);
        (Some(w), Some(r))
    } else {
        (None, None)
    };

    ClassificationReport {
        weakly_acyclic: wa,
        safe: sf,
        stratified: strat,
        c_stratified: c_strat,
        inductively_restricted: ind,
        t_level,
        wgtgd,
        rgtgd,
        witnesses,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::Position;
    use crate::parser::parse_constraints;

    fn pos(p: &str, i: usize) -> Position {
        Position::new(p, i)
    }
    fn ps(items: &[(&str, usize)]) -> BTreeSet<Position> {
        items.iter().map(|(p, i)| pos(p, *i)).collect()
    }
    fn e(pairs: &[(&str, &str)]) -> BTreeSet<(String, String)> {
        pairs
            .iter()
            .map(|(a, b)| (a.to_string(), b.to_string()))
            .collect()
    }

    const PAIR: &str = "a1: S(x), E(x,y) -> E(y,x).\n\
                        a2: S(x), E(x,y) -> exists z: E(y,z), E(z,x).";
    const TRIPLE: &str = "a1: S(x), E(x,y) -> E(y,x).\n\
                          a2: S(x), E(x,y) -> exists z: E(y,z), E(z,x).\n\
                          a3: true -> exists x, y: S(x), E(x,y).";
    const CYCLE_SET: &str = "a1: R(x1) -> S(x1,x1).\n\
                             a2: S(x1,x2) -> exists z: T(x2,z).\n\
                             a3: S(x1,x2) -> T(x1,x2), T(x2,x1).\n\
                             a4: T(x1,x2), T(x1,x3), T(x3,x1) -> R(x2).";

    #[test]
    fn aff_cl_examples() {
        let sigma = parse_constraints(PAIR).unwrap();
        let a2 = sigma.get("a2").unwrap().as_tgd().unwrap();
        // with nothing admitted, only the existential-variable positions
        assert_eq!(aff_cl(a2, &BTreeSet::new()), ps(&[("E", 1), ("E", 2)]));
        let a1 = sigma.get("a1").unwrap().as_tgd().unwrap();
        assert_eq!(aff_cl(a1, &BTreeSet::new()), BTreeSet::new());
        // with all body positions admitted, every head position closes
        let all = sigma.body_positions();
        assert_eq!(aff_cl(a1, &all), ps(&[("E", 1), ("E", 2)]));
    }

    #[test]
    fn minimal_two_restriction_system_of_the_pair() {
        let sigma = parse_constraints(PAIR).unwrap();
        let mut cache = AnalysisCache::default();
        let sys = minimal_restriction_system(&sigma, 2, &mut cache);
        assert_eq!(sys.edges, e(&[("a2", "a1")]));
        assert_eq!(sys.f_union(), ps(&[("E", 1), ("E", 2)]));
    }

    #[test]
    fn minimal_two_restriction_system_of_the_triple() {
        let sigma = parse_constraints(TRIPLE).unwrap();
        let mut cache = AnalysisCache::default();
        let sys = minimal_restriction_system(&sigma, 2, &mut cache);
        assert_eq!(
            sys.edges,
            e(&[("a1", "a2"), ("a2", "a1"), ("a3", "a1"), ("a3", "a2")])
        );
        assert_eq!(sys.f_union(), ps(&[("E", 1), ("E", 2), ("S", 1)]));
    }

    #[test]
    fn part_of_triple_is_empty() {
        let sigma = parse_constraints(TRIPLE).unwrap();
        let mut cache = AnalysisCache::default();
        assert!(part(&sigma, 2, &mut cache).is_empty());
        assert!(inductively_restricted(&sigma));
        // yet neither safe nor stratified
        assert!(!safe(&sigma));
        assert!(!stratified(&sigma, FiringMode::Standard));
    }

    #[test]
    fn safe_sets_are_inductively_restricted() {
        let sigma =
            parse_constraints("b: R(x1,x2,x3), S(x2) -> exists y: R(x2,y,x1).").unwrap();
        assert!(safe(&sigma));
        assert!(inductively_restricted(&sigma));
        assert!(t_member(&sigma, 2));
        assert!(t_member(&sigma, 3));
    }

    #[test]
    fn self_feeding_rule_sits_at_level_three() {
        let sigma = parse_constraints("a: S(x2), E(x1,x2) -> exists y: E(y,x1).").unwrap();
        assert!(!inductively_restricted(&sigma));
        assert!(!t_member(&sigma, 2));
        assert!(t_member(&sigma, 3));
    }

    #[test]
    fn rotation_rules_climb_the_hierarchy() {
        let s3 = parse_constraints("a: S(x3), R(x1,x2,x3) -> exists y: R(y,x1,x2).").unwrap();
        assert!(!t_member(&s3, 2));
        assert!(t_member(&s3, 3));
        let s4 =
            parse_constraints("a: S(x4), R(x1,x2,x3,x4) -> exists y: R(y,x1,x2,x3).").unwrap();
        assert!(!t_member(&s4, 2));
        assert!(!t_member(&s4, 3));
        assert!(t_member(&s4, 4));
    }

    #[test]
    fn cycle_set_is_stratified_but_not_c_stratified() {
        let sigma = parse_constraints(CYCLE_SET).unwrap();
        assert!(stratified(&sigma, FiringMode::Standard));
        assert!(!stratified(&sigma, FiringMode::Oblivious));
        assert!(!inductively_restricted(&sigma));
        assert!(!t_member(&sigma, 3));
    }

    #[test]
    fn terminating_order_for_the_cycle_set() {
        let sigma = parse_constraints(CYCLE_SET).unwrap();
        let order = terminating_order(&sigma).unwrap();
        let pos_cycle = order
            .iter()
            .position(|c| c.contains(&"a1".to_string()))
            .unwrap();
        let pos_a2 = order
            .iter()
            .position(|c| c.contains(&"a2".to_string()))
            .unwrap();
        assert_eq!(order[pos_cycle].len(), 3); // a1, a3, a4 share the cycle
        assert!(pos_cycle < pos_a2);
    }

    #[test]
    fn non_stratified_sets_have_no_terminating_order() {
        let sigma = parse_constraints("a: S(x2), E(x1,x2) -> exists y: E(y,x1).").unwrap();
        assert!(terminating_order(&sigma).is_none());
    }

    #[test]
    fn three_cycle_rule_is_stratified_not_safe() {
        let sigma = parse_constraints(
            "g: T(x1,x2), T(x2,x1) -> exists y1, y2: T(x1,y1), T(y1,y2), T(y2,x1).",
        )
        .unwrap();
        assert!(stratified(&sigma, FiringMode::Standard));
        assert!(!safe(&sigma));
        // and c-stratified: the oblivious relation cannot re-trigger it
        assert!(stratified(&sigma, FiringMode::Oblivious));
    }

    #[test]
    fn extended_triple_remains_inductively_restricted() {
        let sigma = parse_constraints(&format!(
            "{}\na4: E(x1,x2) -> T(x1,x2).\na5: T(x1,x2) -> T(x2,x1).",
            TRIPLE
        ))
        .unwrap();
        assert!(inductively_restricted(&sigma));
        assert!(t_member(&sigma, 2));
    }

    #[test]
    fn classify_fills_the_lattice_consistently() {
        let sigma = parse_constraints(CYCLE_SET).unwrap();
        let report = classify(&sigma, 3);
        assert!(report.stratified);
        assert!(!report.c_stratified);
        assert!(!report.inductively_restricted);
        assert!(report.t_level.is_none());
        assert!(report.witnesses.c_non_weakly_acyclic_component.is_some());
        assert!(report.any_positive());
        assert!(!report.every_sequence_terminates());

        let beta =
            parse_constraints("b: R(x1,x2,x3), S(x2) -> exists y: R(x2,y,x1).").unwrap();
        let report = classify(&beta, 3);
        assert!(report.safe && !report.weakly_acyclic);
        assert_eq!(report.t_level, Some(2));

        let fig1 = parse_constraints("a: S(x2), E(x1,x2) -> exists y: E(y,x1).").unwrap();
        let report = classify(&fig1, 3);
        assert!(!report.weakly_acyclic && !report.safe);
        assert!(!report.stratified && !report.c_stratified);
        assert!(!report.inductively_restricted);
        assert_eq!(report.t_level, Some(3));
    }

    #[test]
    fn report_serializes_to_stable_json() {
        let sigma = parse_constraints("a: R(x) -> S(x).").unwrap();
        let report = classify(&sigma, 2);
        let json = serde_json::to_value(&report).unwrap();
        assert_eq!(json["weakly_acyclic"], true);
        assert_eq!(json["t_level"], 2);
    }
}
