//! Homomorphism search and constraint satisfaction.
//!
//! A homomorphism maps variables to domain values and is the identity on
//! constants and nulls appearing in the source atoms. The search backtracks
//! over the source atoms, most-constrained atom first, and the result stream
//! is canonicalized: homomorphisms are ordered lexicographically by the
//! values assigned to the variables in variable-name order.

use std::collections::BTreeMap;

use crate::model::{Atom, Constraint, Instance, Term};

/// Variable assignment produced by the search. Values are constants or nulls.
pub type Homomorphism = BTreeMap<String, Term>;

/// Applies `h` to an atom; unmapped variables are left in place.
pub fn apply(h: &Homomorphism, atom: &Atom) -> Atom {
    let args = atom
        .args
        .iter()
        .map(|t| match t {
            Term::Var(v) => h.get(v).cloned().unwrap_or_else(|| t.clone()),
            other => other.clone(),
        })
        .collect();
    Atom::new(atom.predicate.clone(), args)
}

/// Applies `h` to a list of atoms.
pub fn apply_all(h: &Homomorphism, atoms: &[Atom]) -> Vec<Atom> {
    atoms.iter().map(|a| apply(h, a)).collect()
}

fn match_atom(pattern: &Atom, target: &Atom, h: &mut Homomorphism) -> Option<Vec<String>> {
    if pattern.predicate != target.predicate || pattern.args.len() != target.args.len() {
        return None;
    }
    let mut bound = Vec::new();
    for (p, t) in pattern.args.iter().zip(target.args.iter()) {
        match p {
            Term::Var(v) => match h.get(v) {
                Some(existing) => {
                    if existing != t {
                        for b in bound {
                            h.remove(&b);
                        }
                        return None;
                    }
                }
                None => {
                    h.insert(v.clone(), t.clone());
                    bound.push(v.clone());
                }
            },
            other => {
                if other != t {
                    for b in bound {
                        h.remove(&b);
                    }
                    return None;
                }
            }
        }
    }
    Some(bound)
}

fn search(order: &[&Atom], idx: usize, target: &Instance, h: &mut Homomorphism, out: &mut Vec<Homomorphism>) {
    if idx == order.len() {
        out.push(h.clone());
        return;
    }
    let pattern = order[idx];
    for cand in target.atoms_with_predicate(&pattern.predicate) {
        if let Some(bound) = match_atom(pattern, cand, h) {
            search(order, idx + 1, target, h, out);
            for b in bound {
                h.remove(&b);
            }
        }
    }
}

/// Every total extension of `seed` mapping all of `source` into `target`,
/// deduplicated and in canonical order.
pub fn find_homomorphisms(source: &[Atom], target: &Instance, seed: &Homomorphism) -> Vec<Homomorphism> {
    // fail-fast ordering: atoms with the fewest candidate target atoms first
    let mut order: Vec<&Atom> = source.iter().collect();
    order.sort_by_key(|a| target.atoms_with_predicate(&a.predicate).count());
    let mut h = seed.clone();
    let mut out = Vec::new();
    search(&order, 0, target, &mut h, &mut out);
    out.sort();
    out.dedup();
    out
}

/// True when some extension of `fixed` maps all of `atoms` into `target`.
pub fn embeds(atoms: &[Atom], target: &Instance, fixed: &Homomorphism) -> bool {
    let mut order: Vec<&Atom> = atoms.iter().collect();
    order.sort_by_key(|a| target.atoms_with_predicate(&a.predicate).count());
    fn any(order: &[&Atom], idx: usize, target: &Instance, h: &mut Homomorphism) -> bool {
        if idx == order.len() {
            return true;
        }
        let pattern = order[idx];
        let cands: Vec<Atom> = target.atoms_with_predicate(&pattern.predicate).cloned().collect();
        for cand in &cands {
            if let Some(bound) = match_atom(pattern, cand, h) {
                if any(order, idx + 1, target, h) {
                    return true;
                }
                for b in bound {
                    h.remove(&b);
                }
            }
        }
        false
    }
    let mut h = fixed.clone();
    any(&order, 0, target, &mut h)
}

/// Grounding of a constraint's universal variables, in `universal_order`.
pub fn grounding_of(c: &Constraint, h: &Homomorphism) -> Vec<Term> {
    c.universal_order()
        .iter()
        .map(|v| h.get(*v).cloned().expect("homomorphism must cover all universals"))
        .collect()
}

/// Inverse of [`grounding_of`].
pub fn homomorphism_from_args(c: &Constraint, args: &[Term]) -> Option<Homomorphism> {
    let order = c.universal_order();
    if order.len() != args.len() {
        return None;
    }
    Some(
        order
            .into_iter()
            .map(|v| v.to_string())
            .zip(args.iter().cloned())
            .collect(),
    )
}

/// Homomorphisms from the body under which the constraint is violated:
/// for a TGD the head has no extension into `inst`, for an EGD the two sides
/// differ. The order is canonical.
pub fn violations(inst: &Instance, c: &Constraint) -> Vec<Homomorphism> {
    match c {
        Constraint::Tgd(t) => find_homomorphisms(&t.body, inst, &Homomorphism::new())
            .into_iter()
            .filter(|h| !embeds(&t.head, inst, h))
            .collect(),
        Constraint::Egd(e) => find_homomorphisms(&e.body, inst, &Homomorphism::new())
            .into_iter()
            .filter(|h| h[&e.lhs] != h[&e.rhs])
            .collect(),
    }
}

/// First-order satisfaction of a single constraint.
pub fn satisfies(inst: &Instance, c: &Constraint) -> bool {
    violations(inst, c).is_empty()
}

pub fn satisfies_all(inst: &Instance, cs: &[Constraint]) -> bool {
    cs.iter().all(|c| satisfies(inst, c))
}

/// Truth of the grounded sentence `c(args)` on `inst`; `args` instantiates
/// exactly the universal variables.
pub fn satisfies_grounded(inst: &Instance, c: &Constraint, args: &[Term]) -> Result<bool, String> {
    let h = homomorphism_from_args(c, args).ok_or_else(|| {
        format!(
            "constraint {} takes {} arguments, got {}",
            c.label(),
            c.universal_order().len(),
            args.len()
        )
    })?;
    Ok(match c {
        Constraint::Tgd(t) => {
            let body = apply_all(&h, &t.body);
            if body.iter().all(|a| inst.contains(a)) {
                embeds(&t.head, inst, &h)
            } else {
                true
            }
        }
        Constraint::Egd(e) => {
            let body = apply_all(&h, &e.body);
            if body.iter().all(|a| inst.contains(a)) {
                h[&e.lhs] == h[&e.rhs]
            } else {
                true
            }
        }
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{tgd, Atom, Instance, Term};
    use crate::parser::{parse_constraints, parse_instance};

    fn v(n: &str) -> Term {
        Term::Var(n.into())
    }
    fn c(n: &str) -> Term {
        Term::Const(n.into())
    }

    #[test]
    fn enumerates_all_matches() {
        let target = parse_instance("E(a,b). E(b,a).", None).unwrap();
        let source = vec![Atom::new("E", vec![v("x"), v("y")])];
        let homs = find_homomorphisms(&source, &target, &Homomorphism::new());
        assert_eq!(homs.len(), 2);
        // canonical order: by x then y
        assert_eq!(homs[0][&"x".to_string()], c("a"));
        assert_eq!(homs[1][&"x".to_string()], c("b"));
    }

    #[test]
    fn no_match_means_empty_stream() {
        let target = parse_instance("E(a,b).", None).unwrap();
        let source = vec![Atom::new("S", vec![v("x")])];
        assert!(find_homomorphisms(&source, &target, &Homomorphism::new()).is_empty());
    }

    #[test]
    fn query_body_embeds_into_itself() {
        let body = vec![
            Atom::new("rail", vec![c("c1"), v("x1"), v("y1")]),
            Atom::new("fly", vec![v("x1"), v("x2"), v("y2")]),
        ];
        let mut inst = Instance::new();
        inst.insert(Atom::new(
            "rail",
            vec![c("c1"), Term::Null("x1".into()), Term::Null("y1".into())],
        ));
        inst.insert(Atom::new(
            "fly",
            vec![
                Term::Null("x1".into()),
                Term::Null("x2".into()),
                Term::Null("y2".into()),
            ],
        ));
        let homs = find_homomorphisms(&body, &inst, &Homomorphism::new());
        let identity: Homomorphism = [
            ("x1".to_string(), Term::Null("x1".into())),
            ("y1".to_string(), Term::Null("y1".into())),
            ("x2".to_string(), Term::Null("x2".into())),
            ("y2".to_string(), Term::Null("y2".into())),
        ]
        .into_iter()
        .collect();
        assert!(homs.contains(&identity));
    }

    #[test]
    fn unsatisfied_existential() {
        // special nodes need an outgoing edge; n2 has none
        let inst = parse_instance("S(_n1). S(_n2). E(_n1,_n2).", None).unwrap();
        let a = tgd(
            "a",
            vec![Atom::new("S", vec![v("x")])],
            &["y"],
            vec![Atom::new("E", vec![v("x"), v("y")])],
        );
        assert!(!satisfies(&inst, &a));
    }

    #[test]
    fn chase_fixpoint_of_paper_cycle_example_is_satisfied() {
        let set = parse_constraints(
            "a1: R(x1) -> S(x1,x1).\n\
             a2: S(x1,x2) -> exists z: T(x2,z).\n\
             a3: S(x1,x2) -> T(x1,x2), T(x2,x1).\n\
             a4: T(x1,x2), T(x1,x3), T(x3,x1) -> R(x2).",
        )
        .unwrap();
        let inst =
            parse_instance("R(a). T(b,b). S(a,a). T(a,a). R(b). S(b,b).", None).unwrap();
        assert!(satisfies_all(&inst, &set.constraints));
    }

    #[test]
    fn empty_body_tgd_with_satisfiable_head() {
        let set = parse_constraints("b: true -> exists x: S(x).").unwrap();
        let inst = parse_instance("S(a).", None).unwrap();
        assert!(satisfies(&inst, &set.constraints[0]));
        let empty = Instance::new();
        assert!(!satisfies(&empty, &set.constraints[0]));
    }

    #[test]
    fn grounded_satisfaction() {
        // single-rule grounding check: body present, head missing
        let set = parse_constraints("a1: R(x1) -> S(x1,x1).").unwrap();
        let inst = parse_instance("R(a).", None).unwrap();
        let args = vec![c("a")];
        assert!(!satisfies_grounded(&inst, &set.constraints[0], &args).unwrap());
        // vacuous when the grounded body is absent
        let args = vec![c("b")];
        assert!(satisfies_grounded(&inst, &set.constraints[0], &args).unwrap());
        // arity mismatch is an error
        assert!(satisfies_grounded(&inst, &set.constraints[0], &[]).is_err());
    }
}
