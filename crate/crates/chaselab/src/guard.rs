//! Syntactic guardedness of TGD sets.
//!
//! A set is weakly guarded when every rule has a body atom covering all
//! variables standing at affected positions, and restrictedly guarded when a
//! body atom covers the variables at the rule's restriction-system
//! positions, a strictly larger class since the restriction system confines
//! null flow more tightly than the affected-position overestimate.

use std::collections::{BTreeMap, BTreeSet};

use serde::Serialize;

use crate::graphs::affected_positions;
use crate::hierarchy::{minimal_restriction_system, AnalysisCache};
use crate::model::{Constraint, ConstraintSet, Position, Term};

#[derive(Clone, Copy, PartialEq, Eq, Debug, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum GuardClass {
    WeaklyGuarded,
    RestrictedlyGuarded,
    Neither,
}

#[derive(Clone, Debug, Serialize)]
pub struct GuardReport {
    pub class: GuardClass,
    /// Body atom index serving as guard, per constraint, when one exists.
    pub guards: BTreeMap<String, Option<usize>>,
    /// The positions whose variables each guard must cover.
    #[serde(serialize_with = "ser_basis")]
    pub basis: BTreeMap<String, BTreeSet<Position>>,
}

fn ser_basis<S: serde::Serializer>(
    basis: &BTreeMap<String, BTreeSet<Position>>,
    s: S,
) -> Result<S::Ok, S::Error> {
    s.collect_map(
        basis
            .iter()
            .map(|(k, v)| (k, v.iter().map(|p| p.to_string()).collect::<Vec<_>>())),
    )
}

impl GuardReport {
    pub fn guarded(&self) -> bool {
        self.class != GuardClass::Neither
    }
}

#[derive(Debug, thiserror::Error, PartialEq, Eq)]
#[error("guardedness is defined for TGD-only sets; {0} is an EGD")]
pub struct NonTgdError(pub String);

fn ensure_tgd_only(sigma: &ConstraintSet) -> Result<(), NonTgdError> {
    for c in &sigma.constraints {
        if !c.is_tgd() {
            return Err(NonTgdError(c.label().to_string()));
        }
    }
    Ok(())
}

/// Variables occurring in the body of `c` at one of the given positions.
fn vars_at_positions<'a>(c: &'a Constraint, positions: &BTreeSet<Position>) -> BTreeSet<&'a str> {
    let mut out = BTreeSet::new();
    for a in c.body() {
        for (i, t) in a.args.iter().enumerate() {
            if let Term::Var(v) = t {
                if positions.contains(&Position::new(a.predicate.clone(), i + 1)) {
                    out.insert(v.as_str());
                }
            }
        }
    }
    out
}

/// First body atom containing every required variable, if any.
fn find_guard(c: &Constraint, required: &BTreeSet<&str>) -> Option<usize> {
    c.body().iter().position(|a| {
        let vars: BTreeSet<&str> = a.variables().into_iter().collect();
        required.iter().all(|v| vars.contains(v))
    })
}

fn guard_all(
    sigma: &ConstraintSet,
    relevant: impl Fn(&Constraint) -> BTreeSet<Position>,
    class_if_all: GuardClass,
) -> GuardReport {
    let mut guards = BTreeMap::new();
    let mut basis = BTreeMap::new();
    let mut all = true;
    for c in &sigma.constraints {
        let positions = relevant(c);
        let required = vars_at_positions(c, &positions);
        let guard = if c.body().is_empty() && required.is_empty() {
            // nothing to guard in an empty body
            Some(usize::MAX)
        } else {
            find_guard(c, &required)
        };
        if guard.is_none() {
            all = false;
        }
        guards.insert(
            c.label().to_string(),
            guard.filter(|&g| g != usize::MAX),
        );
        basis.insert(c.label().to_string(), positions);
    }
    GuardReport {
        class: if all { class_if_all } else { GuardClass::Neither },
        guards,
        basis,
    }
}

/// Every rule owns a body atom covering all variables at affected positions
/// of the set that occur in the rule's body.
pub fn weakly_guarded(sigma: &ConstraintSet) -> Result<GuardReport, NonTgdError> {
    ensure_tgd_only(sigma)?;
    let aff = affected_positions(sigma);
    Ok(guard_all(
        sigma,
        |c| {
            let body_pos: BTreeSet<Position> = c
                .body()
                .iter()
                .flat_map(|a| (1..=a.args.len()).map(move |i| Position::new(a.predicate.clone(), i)))
                .collect();
            aff.intersection(&body_pos).cloned().collect()
        },
        GuardClass::WeaklyGuarded,
    ))
}

/// Every rule owns a body atom covering all universal variables at its
/// minimal 2-restriction-system positions.
pub fn restrictedly_guarded(sigma: &ConstraintSet) -> Result<GuardReport, NonTgdError> {
    ensure_tgd_only(sigma)?;
    let mut cache = AnalysisCache::default();
    let sys = minimal_restriction_system(sigma, 2, &mut cache);
    Ok(guard_all(
        sigma,
        |c| sys.f[c.label()].clone(),
        GuardClass::RestrictedlyGuarded,
    ))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::parser::parse_constraints;

    const SPLIT_SET: &str = "a1: R(x1,x2), S(x1,x2) -> exists y: S(x2,y).\n\
                             a2: S(x1,x2), S(x3,x1) -> R(x2,x1).\n\
                             a3: T(x1,x2) -> exists y: S(y,x2).";

    #[test]
    fn split_set_is_restrictedly_but_not_weakly_guarded() {
        let sigma = parse_constraints(SPLIT_SET).unwrap();
        let w = weakly_guarded(&sigma).unwrap();
        assert_eq!(w.class, GuardClass::Neither);
        // a2 is the offender: no body atom holds x1, x2, and x3 together
        assert_eq!(w.guards["a2"], None);

        let r = restrictedly_guarded(&sigma).unwrap();
        assert_eq!(r.class, GuardClass::RestrictedlyGuarded);
        // S(x1,x2) guards a2
        assert_eq!(r.guards["a2"], Some(0));
    }

    #[test]
    fn full_tgd_sets_are_weakly_guarded() {
        let sigma = parse_constraints("a: R(x,y) -> S(y,x). b: S(x,y) -> R(x,y).").unwrap();
        let w = weakly_guarded(&sigma).unwrap();
        assert_eq!(w.class, GuardClass::WeaklyGuarded);
    }

    #[test]
    fn single_body_atom_rules_are_weakly_guarded() {
        let sigma = parse_constraints("a: E(x,y) -> exists z: E(y,z).").unwrap();
        let w = weakly_guarded(&sigma).unwrap();
        assert_eq!(w.class, GuardClass::WeaklyGuarded);
        assert_eq!(w.guards["a"], Some(0));
    }

    #[test]
    fn weakly_guarded_implies_restrictedly_guarded() {
        for text in [
            "a: E(x,y) -> exists z: E(y,z).",
            "a: R(x,y) -> S(y,x). b: S(x,y) -> R(x,y).",
            "a: S(x2), E(x1,x2) -> exists y: E(y,x1).",
        ] {
            let sigma = parse_constraints(text).unwrap();
            if weakly_guarded(&sigma).unwrap().guarded() {
                assert!(restrictedly_guarded(&sigma).unwrap().guarded(), "{}", text);
            }
        }
    }

    #[test]
    fn empty_set_is_vacuously_guarded() {
        let sigma = ConstraintSet::default();
        assert!(restrictedly_guarded(&sigma).unwrap().guarded());
        assert!(weakly_guarded(&sigma).unwrap().guarded());
    }

    #[test]
    fn egds_are_rejected() {
        let sigma = parse_constraints("e: T(x,y), T(x,z) -> y = z.").unwrap();
        assert!(weakly_guarded(&sigma).is_err());
        assert!(restrictedly_guarded(&sigma).is_err());
    }

    #[test]
    fn restriction_positions_stay_within_affected_ones() {
        for text in [
            SPLIT_SET,
            "a1: S(x), E(x,y) -> E(y,x).\na2: S(x), E(x,y) -> exists z: E(y,z), E(z,x).",
        ] {
            let sigma = parse_constraints(text).unwrap();
            let aff = affected_positions(&sigma);
            let r = restrictedly_guarded(&sigma).unwrap();
            for ps in r.basis.values() {
                assert!(ps.is_subset(&aff));
            }
        }
    }
}
