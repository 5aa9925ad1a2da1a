//! Position-level data-flow graphs and the two polynomial termination tests.
//!
//! The dependency graph tracks how values can move between predicate
//! positions when TGDs fire: a normal edge copies a value, a special edge
//! records that a fresh null is invented at the target position. Weak
//! acyclicity forbids cycles through special edges. The propagation graph
//! restricts attention to affected positions (those that may ever hold an
//! invented null) and yields the strictly weaker safety test.
//!
//! EGDs contribute no edges; both graphs are built from the TGDs alone.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt::Write as _;

use crate::model::{Constraint, ConstraintSet, Position, Term, Tgd};

#[derive(Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Debug, Hash)]
pub enum EdgeFlavor {
    Normal,
    Special,
}

/// Directed graph over predicate positions with normal and special edges.
#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct PositionGraph {
    pub nodes: BTreeSet<Position>,
    pub edges: BTreeSet<(Position, Position, EdgeFlavor)>,
}

impl PositionGraph {
    pub fn add_edge(&mut self, from: Position, to: Position, flavor: EdgeFlavor) {
        self.nodes.insert(from.clone());
        self.nodes.insert(to.clone());
        self.edges.insert((from, to, flavor));
    }

    /// True iff `other` contains every node and edge of `self`.
    pub fn subgraph_of(&self, other: &PositionGraph) -> bool {
        self.nodes.is_subset(&other.nodes) && self.edges.is_subset(&other.edges)
    }

    fn adjacency(&self) -> (Vec<Position>, Vec<Vec<usize>>) {
        let nodes: Vec<Position> = self.nodes.iter().cloned().collect();
        let idx: BTreeMap<&Position, usize> =
            nodes.iter().enumerate().map(|(i, p)| (p, i)).collect();
        let mut adj = vec![Vec::new(); nodes.len()];
        for (a, b, _) in &self.edges {
            let (i, j) = (idx[a], idx[b]);
            if !adj[i].contains(&j) {
                adj[i].push(j);
            }
        }
        (nodes, adj)
    }

    /// A special edge lying on a cycle, if any: the witness that the
    /// acyclicity test fails.
    pub fn special_edge_on_cycle(&self) -> Option<(Position, Position)> {
        let (nodes, adj) = self.adjacency();
        let comps = crate::scc::tarjan_scc(&adj);
        let mut comp_of: BTreeMap<&Position, usize> = BTreeMap::new();
        for (ci, comp) in comps.iter().enumerate() {
            for &v in comp {
                comp_of.insert(&nodes[v], ci);
            }
        }
        for (a, b, flavor) in &self.edges {
            if *flavor == EdgeFlavor::Special && comp_of[a] == comp_of[b] {
                return Some((a.clone(), b.clone()));
            }
        }
        None
    }

    pub fn has_special_cycle(&self) -> bool {
        self.special_edge_on_cycle().is_some()
    }

    /// DOT rendering: normal edges solid, special edges labeled `*`.
    pub fn to_dot(&self, name: &str) -> String {
        let mut out = String::new();
        let _ = writeln!(out, "digraph {} {{", name);
        for n in &self.nodes {
            let _ = writeln!(out, "  \"{}\";", n);
        }
        for (a, b, flavor) in &self.edges {
            match flavor {
                EdgeFlavor::Normal => {
                    let _ = writeln!(out, "  \"{}\" -> \"{}\";", a, b);
                }
                EdgeFlavor::Special => {
                    let _ = writeln!(out, "  \"{}\" -> \"{}\" [label=\"*\"];", a, b);
                }
            }
        }
        let _ = writeln!(out, "}}");
        out
    }
}

fn body_occurrences(t: &Tgd, var: &str) -> Vec<Position> {
    let mut out = Vec::new();
    for a in &t.body {
        for (i, term) in a.args.iter().enumerate() {
            if matches!(term, Term::Var(v) if v == var) {
                out.push(Position::new(a.predicate.clone(), i + 1));
            }
        }
    }
    out
}

fn head_occurrences(t: &Tgd, var: &str) -> Vec<Position> {
    let mut out = Vec::new();
    for a in &t.head {
        for (i, term) in a.args.iter().enumerate() {
            if matches!(term, Term::Var(v) if v == var) {
                out.push(Position::new(a.predicate.clone(), i + 1));
            }
        }
    }
    out
}

fn tgd_positions(t: &Tgd) -> impl Iterator<Item = Position> + '_ {
    t.body
        .iter()
        .chain(t.head.iter())
        .flat_map(|a| (1..=a.args.len()).map(move |i| Position::new(a.predicate.clone(), i)))
}

/// Dependency graph over all positions occurring in some TGD.
pub fn dependency_graph(sigma: &ConstraintSet) -> PositionGraph {
    let mut g = PositionGraph::default();
    for c in &sigma.constraints {
        let t = match c {
            Constraint::Tgd(t) => t,
            Constraint::Egd(_) => continue,
        };
        for p in tgd_positions(t) {
            g.nodes.insert(p);
        }
        for x in t.frontier() {
            for from in body_occurrences(t, x) {
                for to in head_occurrences(t, x) {
                    g.add_edge(from.clone(), to, EdgeFlavor::Normal);
                }
                for y in &t.existentials {
                    for to in head_occurrences(t, y) {
                        g.add_edge(from.clone(), to, EdgeFlavor::Special);
                    }
                }
            }
        }
    }
    g
}

/// No cycle of the dependency graph passes through a special edge.
pub fn weakly_acyclic(sigma: &ConstraintSet) -> bool {
    !dependency_graph(sigma).has_special_cycle()
}

/// Least fixpoint of the two marking rules: positions holding existential
/// variables are affected, and a head position of a universal variable is
/// affected once every body occurrence of that variable is.
pub fn affected_positions(sigma: &ConstraintSet) -> BTreeSet<Position> {
    let mut aff: BTreeSet<Position> = BTreeSet::new();
    for c in &sigma.constraints {
        if let Constraint::Tgd(t) = c {
            for y in &t.existentials {
                for p in head_occurrences(t, y) {
                    aff.insert(p);
                }
            }
        }
    }
    loop {
        let mut changed = false;
        for c in &sigma.constraints {
            let t = match c {
                Constraint::Tgd(t) => t,
                Constraint::Egd(_) => continue,
            };
            for x in t.frontier() {
                let occ = body_occurrences(t, x);
                if !occ.is_empty() && occ.iter().all(|p| aff.contains(p)) {
                    for p in head_occurrences(t, x) {
                        changed |= aff.insert(p);
                    }
                }
            }
        }
        if !changed {
            return aff;
        }
    }
}

/// Dependency-style graph restricted to the flow of invented nulls: edges are
/// only generated for body variables whose occurrences are all affected.
pub fn propagation_graph(sigma: &ConstraintSet) -> PositionGraph {
    let aff = affected_positions(sigma);
    let mut g = PositionGraph::default();
    g.nodes = aff.clone();
    for c in &sigma.constraints {
        let t = match c {
            Constraint::Tgd(t) => t,
            Constraint::Egd(_) => continue,
        };
        for x in t.frontier() {
            let occ = body_occurrences(t, x);
            if occ.is_empty() || !occ.iter().all(|p| aff.contains(p)) {
                continue;
            }
            for from in &occ {
                for to in head_occurrences(t, x) {
                    g.add_edge(from.clone(), to, EdgeFlavor::Normal);
                }
                for y in &t.existentials {
                    for to in head_occurrences(t, y) {
                        g.add_edge(from.clone(), to, EdgeFlavor::Special);
                    }
                }
            }
        }
    }
    g
}

/// No cycle of the propagation graph passes through a special edge.
pub fn safe(sigma: &ConstraintSet) -> bool {
    !propagation_graph(sigma).has_special_cycle()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::parser::parse_constraints;

    fn pos(p: &str, i: usize) -> Position {
        Position::new(p, i)
    }

    // single constraint that copies through its own null position:
    // not weakly acyclic, but the propagation graph is edgeless
    const BETA: &str = "b: R(x1,x2,x3), S(x2) -> exists y: R(x2,y,x1).";
    // two-cycle forces a three-cycle: stratified but unsafe
    const GAMMA: &str = "g: T(x1,x2), T(x2,x1) -> exists y1, y2: T(x1,y1), T(y1,y2), T(y2,x1).";

    #[test]
    fn beta_dependency_graph_has_special_cycle() {
        let sigma = parse_constraints(BETA).unwrap();
        let dep = dependency_graph(&sigma);
        assert!(dep.has_special_cycle());
        assert!(!weakly_acyclic(&sigma));
        assert!(dep
            .edges
            .contains(&(pos("R", 2), pos("R", 2), EdgeFlavor::Special)));
    }

    #[test]
    fn full_tgds_have_no_special_edges() {
        let sigma = parse_constraints("a: R(x,y) -> S(y,x).").unwrap();
        let dep = dependency_graph(&sigma);
        assert!(dep
            .edges
            .iter()
            .all(|(_, _, f)| *f == EdgeFlavor::Normal));
        assert!(weakly_acyclic(&sigma));
    }

    #[test]
    fn gamma_not_weakly_acyclic() {
        let sigma = parse_constraints(GAMMA).unwrap();
        assert!(!weakly_acyclic(&sigma));
        // dep and prop coincide here
        assert_eq!(dependency_graph(&sigma), propagation_graph(&sigma));
        assert!(!safe(&sigma));
    }

    #[test]
    fn empty_set_weakly_acyclic() {
        let sigma = ConstraintSet::default();
        assert!(weakly_acyclic(&sigma));
        assert!(safe(&sigma));
    }

    #[test]
    fn beta_affected_positions() {
        let sigma = parse_constraints(BETA).unwrap();
        let aff = affected_positions(&sigma);
        assert_eq!(aff, [pos("R", 2)].into_iter().collect());
    }

    #[test]
    fn two_and_three_cycle_rules_affect_edge_positions() {
        let sigma = parse_constraints(
            "a1: S(x), E(x,y) -> E(y,x).\n\
             a2: S(x), E(x,y) -> exists z: E(y,z), E(z,x).",
        )
        .unwrap();
        let aff = affected_positions(&sigma);
        assert_eq!(aff, [pos("E", 1), pos("E", 2)].into_iter().collect());
    }

    #[test]
    fn full_tgd_sets_have_no_affected_positions() {
        let sigma = parse_constraints("a: R(x,y) -> S(y,x). b: S(x,y) -> R(x,y).").unwrap();
        assert!(affected_positions(&sigma).is_empty());
    }

    #[test]
    fn beta_prop_graph_single_node_no_edges() {
        let sigma = parse_constraints(BETA).unwrap();
        let prop = propagation_graph(&sigma);
        assert_eq!(prop.nodes, [pos("R", 2)].into_iter().collect());
        assert!(prop.edges.is_empty());
        assert!(safe(&sigma));
    }

    #[test]
    fn safe_but_not_stratified_pair_is_safe() {
        let sigma = parse_constraints(
            "a: S(x2,x3), R(x1,x2,x3) -> exists y: R(x2,y,x1).\n\
             b: R(x1,x2,x3) -> S(x1,x3).",
        )
        .unwrap();
        assert!(safe(&sigma));
        assert!(!weakly_acyclic(&sigma));
    }

    #[test]
    fn prop_is_subgraph_of_dep() {
        for text in [
            BETA,
            GAMMA,
            "a1: S(x), E(x,y) -> E(y,x).\na2: S(x), E(x,y) -> exists z: E(y,z), E(z,x).",
        ] {
            let sigma = parse_constraints(text).unwrap();
            assert!(propagation_graph(&sigma).subgraph_of(&dependency_graph(&sigma)));
        }
    }

    #[test]
    fn dot_marks_special_edges() {
        let sigma = parse_constraints(BETA).unwrap();
        let dot = dependency_graph(&sigma).to_dot("dep");
        assert!(dot.contains("label=\"*\""));
    }
}
