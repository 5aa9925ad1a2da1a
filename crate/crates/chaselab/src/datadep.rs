//! Termination analysis relative to one fixed instance: constraints that can
//! never fire from it, the static verdict built on them, and the runtime
//! monitor that aborts a run when null creation starts to look cyclic.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt::Write as _;

use serde::Serialize;

use crate::chase::{chase_with_observer, ChaseOutcome, ChaseStepRecord, SchedulingPolicy};
use crate::firing::{chase_graph, FiringMode};
use crate::hierarchy::t_member;
use crate::hom::{apply_all, homomorphism_from_args};
use crate::model::{Atom, Constraint, ConstraintSet, Instance, Position, Term};

#[derive(Debug, thiserror::Error, PartialEq, Eq)]
pub enum DataDepError {
    #[error("the instance is empty")]
    EmptyInstance,
    #[error("constraint {0} has an empty body; irrelevance analysis requires non-empty bodies")]
    EmptyBody(String),
    #[error("label {0} collides with the instance constraint")]
    LabelCollision(String),
}

/// The instance folded into a single body-free rule: nulls become
/// existential variables, constants stay themselves.
pub fn alpha_i(inst: &Instance) -> Result<Constraint, DataDepError> {
    if inst.is_empty() {
        return Err(DataDepError::EmptyInstance);
    }
    let nulls: Vec<String> = inst.nulls().into_iter().collect();
    let renaming: BTreeMap<&str, String> = nulls
        .iter()
        .enumerate()
        .map(|(i, n)| (n.as_str(), format!("y{}", i + 1)))
        .collect();
    let head: Vec<Atom> = inst
        .iter()
        .map(|a| {
            Atom::new(
                a.predicate.clone(),
                a.args
                    .iter()
                    .map(|t| match t {
                        Term::Null(n) => Term::Var(renaming[n.as_str()].clone()),
                        Term::Const(c) => Term::Const(c.clone()),
                        Term::Var(_) => unreachable!("instances are ground"),
                    })
                    .collect(),
            )
        })
        .collect();
    let existentials: Vec<&str> = renaming.values().map(|s| s.as_str()).collect();
    Ok(crate::model::tgd("instance", vec![], &existentials, head))
}

/// Labels of constraints that can never fire in any chase of `inst`:
/// those unreachable from the instance rule in the oblivious chase graph.
/// Sound but incomplete; exact irrelevance is undecidable.
pub fn irrelevant_constraints(
    inst: &Instance,
    sigma: &ConstraintSet,
    mode: FiringMode,
) -> Result<BTreeSet<String>, DataDepError> {
    for c in &sigma.constraints {
        if c.body().is_empty() {
            return Err(DataDepError::EmptyBody(c.label().to_string()));
        }
    }
    let start = alpha_i(inst)?;
    let start_label = start.label().to_string();
    if sigma.get(&start_label).is_some() {
        return Err(DataDepError::LabelCollision(start_label));
    }
    let mut constraints = sigma.constraints.clone();
    constraints.push(start);
    let extended = ConstraintSet::new(constraints).expect("extension preserves validity");
    let g = chase_graph(&extended, mode);
    let reachable = g.reachable_from(&start_label);
    Ok(sigma
        .labels()
        .into_iter()
        .filter(|l| !reachable.contains(*l))
        .map(|l| l.to_string())
        .collect())
}

#[derive(Clone, Copy, PartialEq, Eq, Debug, Serialize)]
#[serde(rename_all = "SCREAMING_SNAKE_CASE")]
pub enum Verdict {
    Terminates,
    Unknown,
}

/// Sufficient data-dependent termination: the constraints that can still
/// fire sit in some hierarchy level up to `max_k`. Never claims
/// non-termination.
pub fn data_dependent_verdict(
    inst: &Instance,
    sigma: &ConstraintSet,
    max_k: usize,
) -> Result<Verdict, DataDepError> {
    let irrelevant = irrelevant_constraints(inst, sigma, FiringMode::Oblivious)?;
    let keep: BTreeSet<String> = sigma
        .labels()
        .into_iter()
        .filter(|l| !irrelevant.contains(*l))
        .map(|l| l.to_string())
        .collect();
    let rest = sigma.restrict(&keep);
    if t_member(&rest, max_k) {
        Ok(Verdict::Terminates)
    } else {
        Ok(Verdict::Unknown)
    }
}

/// Node: a run-created null with the positions it was first created in.
pub type MonitorNode = (String, BTreeSet<Position>);

/// Edge source, edge label (constraint and the body positions the source
/// null occupied), edge target.
#[derive(Clone, PartialEq, Eq, PartialOrd, Ord, Debug)]
pub struct MonitorEdge {
    pub from: MonitorNode,
    pub constraint: String,
    pub body_positions: BTreeSet<Position>,
    pub to: MonitorNode,
}

impl MonitorEdge {
    /// The projection cyclicity compares: everything except the two null
    /// names.
    fn class(&self) -> (BTreeSet<Position>, String, BTreeSet<Position>, BTreeSet<Position>) {
        (
            self.from.1.clone(),
            self.constraint.clone(),
            self.body_positions.clone(),
            self.to.1.clone(),
        )
    }
}

/// Provenance graph of run-created nulls.
#[derive(Clone, Debug, Default)]
pub struct MonitorGraph {
    pub nodes: BTreeSet<MonitorNode>,
    pub edges: BTreeSet<MonitorEdge>,
}

#[derive(Clone, Copy, Debug)]
pub struct MonitorConfig {
    /// Highest tolerated cycle order; the monitored run aborts upon reaching
    /// it.
    pub k: usize,
}

impl MonitorGraph {
    /// Folds one chase step into the graph. EGD steps and steps without
    /// fresh nulls change nothing.
    pub fn extend(&mut self, step: &ChaseStepRecord, grounded_body: &[Atom]) {
        if step.fresh_nulls.is_empty() {
            return;
        }
        let sources: Vec<(MonitorNode, BTreeSet<Position>)> = self
            .nodes
            .iter()
            .filter_map(|node| {
                let term = Term::Null(node.0.clone());
                let mut occ = BTreeSet::new();
                for a in grounded_body {
                    for (i, t) in a.args.iter().enumerate() {
                        if *t == term {
                            occ.insert(Position::new(a.predicate.clone(), i + 1));
                        }
                    }
                }
                if occ.is_empty() {
                    None
                } else {
                    Some((node.clone(), occ))
                }
            })
            .collect();
        for (null, positions) in &step.fresh_nulls {
            let name = match null {
                Term::Null(n) => n.clone(),
                _ => continue,
            };
            let target: MonitorNode = (name, positions.clone());
            self.nodes.insert(target.clone());
            for (source, occ) in &sources {
                self.edges.insert(MonitorEdge {
                    from: source.clone(),
                    constraint: step.constraint.clone(),
                    body_positions: occ.clone(),
                    to: target.clone(),
                });
            }
        }
    }

    fn out_edges<'a>(&'a self, node: &'a MonitorNode) -> impl Iterator<Item = &'a MonitorEdge> {
        self.edges.iter().filter(move |e| &e.from == node)
    }

    /// Some path sequentially contains `k` pairwise distinct edges whose
    /// projections coincide. Paths here are edge sequences glued target to
    /// source; the counted edges need not be adjacent on the path.
    pub fn is_k_cyclic(&self, k: usize) -> bool {
        if k == 0 {
            return true;
        }
        let classes: BTreeSet<_> = self.edges.iter().map(|e| e.class()).collect();
        for class in classes {
            let mut memo: BTreeMap<&MonitorNode, usize> = BTreeMap::new();
            let mut best = 0;
            for node in &self.nodes {
                best = best.max(self.count_from(node, &class, &mut memo, 0));
                if best >= k {
                    return true;
                }
            }
        }
        false
    }

    fn count_from<'a>(
        &'a self,
        node: &'a MonitorNode,
        class: &(BTreeSet<Position>, String, BTreeSet<Position>, BTreeSet<Position>),
        memo: &mut BTreeMap<&'a MonitorNode, usize>,
        depth: usize,
    ) -> usize {
        if let Some(&v) = memo.get(node) {
            return v;
        }
        if depth > self.nodes.len() + 1 {
            // provenance graphs are acyclic by construction; guard anyway
            return 0;
        }
        let mut best = 0;
        for e in self.out_edges(node) {
            let hit = usize::from(e.class() == *class);
            best = best.max(hit + self.count_from(&e.to, class, memo, depth + 1));
        }
        memo.insert(node, best);
        best
    }

    /// Depth of a node: longest edge path leading into it.
    pub fn depth(&self, node: &MonitorNode) -> usize {
        self.edges
            .iter()
            .filter(|e| &e.to == node)
            .map(|e| 1 + self.depth(&e.from))
            .max()
            .unwrap_or(0)
    }

    pub fn to_dot(&self, name: &str) -> String {
        let mut out = String::new();
        let _ = writeln!(out, "digraph {} {{", name);
        let node_id = |n: &MonitorNode| {
            let pos: Vec<String> = n.1.iter().map(|p| p.to_string()).collect();
            format!("{} {{{}}}", n.0, pos.join(","))
        };
        for n in &self.nodes {
            let _ = writeln!(out, "  \"{}\";", node_id(n));
        }
        for e in &self.edges {
            let pos: Vec<String> = e.body_positions.iter().map(|p| p.to_string()).collect();
            let _ = writeln!(
                out,
                "  \"{}\" -> \"{}\" [label=\"{},{{{}}}\"];",
                node_id(&e.from),
                node_id(&e.to),
                e.constraint,
                pos.join(",")
            );
        }
        let _ = writeln!(out, "}}");
        out
    }

    pub fn to_json(&self) -> serde_json::Value {
        let nodes: Vec<_> = self
            .nodes
            .iter()
            .map(|(n, ps)| {
                serde_json::json!({
                    "null": n,
                    "positions": ps.iter().map(|p| p.to_string()).collect::<Vec<_>>(),
                })
            })
            .collect();
        let edges: Vec<_> = self
            .edges
            .iter()
            .map(|e| {
                serde_json::json!({
                    "from": e.from.0,
                    "constraint": e.constraint,
                    "body_positions": e.body_positions.iter().map(|p| p.to_string()).collect::<Vec<_>>(),
                    "to": e.to.0,
                })
            })
            .collect();
        serde_json::json!({ "nodes": nodes, "edges": edges })
    }
}

/// Runs the chase, growing the monitor after every null-introducing step and
/// aborting as soon as the graph reaches the configured cycle order.
pub fn monitored_chase(
    inst: &Instance,
    sigma: &ConstraintSet,
    policy: SchedulingPolicy,
    config: MonitorConfig,
    budget: usize,
) -> (ChaseOutcome, MonitorGraph) {
    let mut monitor = MonitorGraph::default();
    let outcome = {
        let mut observer = |rec: &ChaseStepRecord, _before: &Instance, _after: &Instance| {
            if rec.fresh_nulls.is_empty() {
                return true;
            }
            let c = sigma.get(&rec.constraint).expect("record labels are valid");
            let grounded = match c {
                Constraint::Tgd(t) => {
                    let h = homomorphism_from_args(c, &rec.args)
                        .expect("record args match the constraint");
                    apply_all(&h, &t.body)
                }
                Constraint::Egd(_) => return true,
            };
            monitor.extend(rec, &grounded);
            !monitor.is_k_cyclic(config.k)
        };
        chase_with_observer(inst, sigma, policy, budget, Some(&mut observer))
    };
    (outcome, monitor)
}

/// The rule and instance family exercising monitor depth: an m-ary rotation
/// rule with m seeds chases exactly m steps and is (m-1)- but not m-cyclic.
pub fn rotation_family(m: usize) -> (ConstraintSet, Instance) {
    let mut body_args: Vec<Term> = (1..=m).map(|i| Term::Var(format!("x{}", i))).collect();
    let head_args: Vec<Term> = std::iter::once(Term::Var("y".into()))
        .chain((1..m).map(|i| Term::Var(format!("x{}", i))))
        .collect();
    let body = vec![
        Atom::new("S", vec![Term::Var(format!("x{}", m))]),
        Atom::new("R", std::mem::take(&mut body_args)),
    ];
    let head = vec![Atom::new("R", head_args)];
    let sigma = ConstraintSet::new(vec![crate::model::tgd("a", body, &["y"], head)]).unwrap();
    let mut inst = Instance::new();
    for i in 1..=m {
        inst.insert(Atom::new("S", vec![Term::Const(format!("c{}", i))]));
    }
    inst.insert(Atom::new(
        "R",
        (1..=m).map(|i| Term::Const(format!("c{}", i))).collect(),
    ));
    (sigma, inst)
}

pub use crate::chase::ChaseStatus;

#[cfg(test)]
mod tests {
    use super::*;
    use crate::chase::ChaseStatus;
    use crate::parser::{parse_constraints, parse_instance};

    const TRAVEL: &str = "a1: fly(c1,c2,d) -> hasAirport(c1), hasAirport(c2).\n\
                          a2: rail(c1,c2,d) -> rail(c2,c1,d).\n\
                          a3: fly(c1,c2,d) -> exists c3, dd: fly(c2,c3,dd).";
    const Q1: &str = "rail(c1,_x1,_y1). fly(_x1,_x2,_y2).";
    const Q2: &str =
        "rail(c1,_x1,_y1). fly(_x1,_x2,_y2). fly(_x2,_x1,_y2). rail(_x1,c1,_y1).";

    #[test]
    fn instance_rule_shape() {
        let inst = parse_instance(Q2, None).unwrap();
        let a = alpha_i(&inst).unwrap();
        let t = a.as_tgd().unwrap();
        assert!(t.body.is_empty());
        assert_eq!(t.head.len(), 4);
        assert_eq!(t.existentials.len(), 4); // x1, x2, y1, y2
        // constants stay constants
        assert!(t
            .head
            .iter()
            .any(|atom| atom.args.contains(&Term::Const("c1".into()))));
    }

    #[test]
    fn all_constant_instance_gives_variable_free_head() {
        let inst = parse_instance("R(a).", None).unwrap();
        let a = alpha_i(&inst).unwrap();
        let t = a.as_tgd().unwrap();
        assert!(t.existentials.is_empty());
        assert_eq!(t.head[0].args[0], Term::Const("a".into()));
        assert!(alpha_i(&Instance::new()).is_err());
    }

    #[test]
    fn travel_q2_irrelevance() {
        let sigma = parse_constraints(TRAVEL).unwrap();
        let inst = parse_instance(Q2, None).unwrap();
        let irr = irrelevant_constraints(&inst, &sigma, FiringMode::Oblivious).unwrap();
        assert_eq!(
            irr,
            ["a2".to_string(), "a3".to_string()].into_iter().collect()
        );
    }

    #[test]
    fn travel_q1_everything_reachable() {
        let sigma = parse_constraints(TRAVEL).unwrap();
        let inst = parse_instance(Q1, None).unwrap();
        let irr = irrelevant_constraints(&inst, &sigma, FiringMode::Oblivious).unwrap();
        assert!(irr.is_empty());
    }

    #[test]
    fn empty_bodies_are_rejected() {
        let sigma = parse_constraints("a: true -> exists x: S(x).").unwrap();
        let inst = parse_instance("S(a).", None).unwrap();
        assert!(matches!(
            irrelevant_constraints(&inst, &sigma, FiringMode::Oblivious),
            Err(DataDepError::EmptyBody(_))
        ));
    }

    #[test]
    fn verdicts_for_the_travel_queries() {
        let sigma = parse_constraints(TRAVEL).unwrap();
        let q2 = parse_instance(Q2, None).unwrap();
        assert_eq!(
            data_dependent_verdict(&q2, &sigma, 2).unwrap(),
            Verdict::Terminates
        );
        let q1 = parse_instance(Q1, None).unwrap();
        assert_eq!(
            data_dependent_verdict(&q1, &sigma, 3).unwrap(),
            Verdict::Unknown
        );
    }

    #[test]
    fn monitor_records_provenance_with_shortcut_edge() {
        // ternary rotation chased from three seeds: a three-node chain plus
        // one shortcut edge, 2-cyclic but not 3-cyclic
        let sigma =
            parse_constraints("a: S(x3), E(x1,x2,x3) -> exists y: E(y,x1,x2).").unwrap();
        let inst = parse_instance("S(a1). S(a2). S(a3). E(a1,a2,a3).", None).unwrap();
        let (outcome, monitor) = monitored_chase(
            &inst,
            &sigma,
            SchedulingPolicy::RoundRobin,
            MonitorConfig { k: 10 },
            100,
        );
        assert_eq!(outcome.status, ChaseStatus::Terminated);
        assert_eq!(outcome.log.len(), 3);
        assert_eq!(monitor.nodes.len(), 3);
        assert_eq!(monitor.edges.len(), 3);
        assert!(monitor.is_k_cyclic(2));
        assert!(!monitor.is_k_cyclic(3));
        // one edge label differs: the shortcut sees the elder null at E^2
        let labels: BTreeSet<&BTreeSet<Position>> =
            monitor.edges.iter().map(|e| &e.body_positions).collect();
        assert_eq!(labels.len(), 2);
    }

    #[test]
    fn empty_graph_is_never_cyclic() {
        let g = MonitorGraph::default();
        for k in 1..5 {
            assert!(!g.is_k_cyclic(k));
        }
    }

    #[test]
    fn rotation_family_cyclicity_boundary() {
        for m in 2..=5 {
            let (sigma, inst) = rotation_family(m);
            let (outcome, monitor) = monitored_chase(
                &inst,
                &sigma,
                SchedulingPolicy::RoundRobin,
                MonitorConfig { k: m },
                10_000,
            );
            assert_eq!(outcome.status, ChaseStatus::Terminated, "m={}", m);
            assert!(monitor.is_k_cyclic(m - 1), "m={}", m);
            assert!(!monitor.is_k_cyclic(m), "m={}", m);

            let (outcome, _) = monitored_chase(
                &inst,
                &sigma,
                SchedulingPolicy::RoundRobin,
                MonitorConfig { k: m - 1 },
                10_000,
            );
            assert_eq!(outcome.status, ChaseStatus::AbortedByMonitor, "m={}", m);
        }
    }

    #[test]
    fn monitor_aborts_divergent_travel_run() {
        let sigma = parse_constraints(TRAVEL).unwrap();
        let inst = parse_instance(Q1, None).unwrap();
        let (outcome, _) = monitored_chase(
            &inst,
            &sigma,
            SchedulingPolicy::RoundRobin,
            MonitorConfig { k: 3 },
            10_000,
        );
        assert_eq!(outcome.status, ChaseStatus::AbortedByMonitor);
        assert!(outcome.log.len() < 10_000);
    }

    #[test]
    fn depth_respects_edges() {
        let sigma =
            parse_constraints("a: S(x3), E(x1,x2,x3) -> exists y: E(y,x1,x2).").unwrap();
        let inst = parse_instance("S(a1). S(a2). S(a3). E(a1,a2,a3).", None).unwrap();
        let (_, monitor) = monitored_chase(
            &inst,
            &sigma,
            SchedulingPolicy::RoundRobin,
            MonitorConfig { k: 10 },
            100,
        );
        for e in &monitor.edges {
            assert!(monitor.depth(&e.from) < monitor.depth(&e.to));
        }
    }
}
