//! Relational vocabulary shared by every analysis: terms, atoms, positions,
//! constraints, and instances.
//!
//! Two constraint forms exist. A tuple-generating dependency (TGD)
//! `body -> exists ys: head` asserts that every match of its body extends to
//! a match of its head; when it fires, fresh labeled nulls stand in for the
//! existential variables. An equality-generating dependency (EGD)
//! `body -> x = y` forces the two matched values to coincide; equating two
//! distinct constants is a hard failure.
//!
//! All values here are immutable once constructed and are freely shared
//! between threads.

use std::collections::{BTreeMap, BTreeSet, HashMap, HashSet};
use std::fmt;

use thiserror::Error;

/// A constant, labeled null, or variable.
///
/// The three kinds are disjoint: equality is (kind, name) equality. Nulls
/// never appear inside constraints and variables never appear inside
/// instances; the constructors in [`ConstraintSet`] and [`Instance`] enforce
/// this.
#[derive(Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Debug)]
pub enum Term {
    Const(String),
    Null(String),
    Var(String),
}

impl Term {
    pub fn is_const(&self) -> bool {
        matches!(self, Term::Const(_))
    }
    pub fn is_null(&self) -> bool {
        matches!(self, Term::Null(_))
    }
    pub fn is_var(&self) -> bool {
        matches!(self, Term::Var(_))
    }
    pub fn name(&self) -> &str {
        match self {
            Term::Const(n) | Term::Null(n) | Term::Var(n) => n,
        }
    }
}

impl fmt::Display for Term {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Term::Const(n) => write!(f, "'{}'", n),
            Term::Null(n) => write!(f, "_{}", n),
            Term::Var(n) => write!(f, "{}", n),
        }
    }
}

/// A predicate applied to an ordered list of terms.
#[derive(Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Debug)]
pub struct Atom {
    pub predicate: String,
    pub args: Vec<Term>,
}

impl Atom {
    pub fn new(predicate: impl Into<String>, args: Vec<Term>) -> Self {
        Atom {
            predicate: predicate.into(),
            args,
        }
    }

    /// Variables occurring in this atom, in first-occurrence order.
    pub fn variables(&self) -> Vec<&str> {
        let mut seen = BTreeSet::new();
        let mut out = Vec::new();
        for t in &self.args {
            if let Term::Var(v) = t {
                if seen.insert(v.as_str()) {
                    out.push(v.as_str());
                }
            }
        }
        out
    }

    pub fn is_ground(&self) -> bool {
        self.args.iter().all(|t| !t.is_var())
    }
}

impl fmt::Display for Atom {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}(", self.predicate)?;
        for (i, t) in self.args.iter().enumerate() {
            if i > 0 {
                write!(f, ",")?;
            }
            write!(f, "{}", t)?;
        }
        write!(f, ")")
    }
}

/// A predicate-argument slot `R^i` (1-based), the unit of data-flow analysis.
#[derive(Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Debug)]
pub struct Position {
    pub predicate: String,
    pub index: usize,
}

impl Position {
    pub fn new(predicate: impl Into<String>, index: usize) -> Self {
        Position {
            predicate: predicate.into(),
            index,
        }
    }
}

impl fmt::Display for Position {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}^{}", self.predicate, self.index)
    }
}

/// Tuple-generating dependency.
#[derive(Clone, PartialEq, Eq, Debug)]
pub struct Tgd {
    pub label: String,
    pub body: Vec<Atom>,
    pub head: Vec<Atom>,
    pub universals: BTreeSet<String>,
    pub existentials: BTreeSet<String>,
}

impl Tgd {
    /// Universal variables in a fixed order; groundings list values in this
    /// order.
    pub fn universal_order(&self) -> Vec<&str> {
        self.universals.iter().map(|s| s.as_str()).collect()
    }

    /// Universals that occur somewhere in the head.
    pub fn frontier(&self) -> BTreeSet<&str> {
        let mut out = BTreeSet::new();
        for a in &self.head {
            for v in a.variables() {
                if self.universals.contains(v) {
                    out.insert(v);
                }
            }
        }
        out
    }
}

/// Equality-generating dependency.
#[derive(Clone, PartialEq, Eq, Debug)]
pub struct Egd {
    pub label: String,
    pub body: Vec<Atom>,
    pub lhs: String,
    pub rhs: String,
}

impl Egd {
    pub fn universal_order(&self) -> Vec<&str> {
        let mut seen = BTreeSet::new();
        for a in &self.body {
            for v in a.variables() {
                seen.insert(v);
            }
        }
        seen.into_iter().collect()
    }
}

#[derive(Clone, PartialEq, Eq, Debug)]
pub enum Constraint {
    Tgd(Tgd),
    Egd(Egd),
}

impl Constraint {
    pub fn label(&self) -> &str {
        match self {
            Constraint::Tgd(t) => &t.label,
            Constraint::Egd(e) => &e.label,
        }
    }

    pub fn body(&self) -> &[Atom] {
        match self {
            Constraint::Tgd(t) => &t.body,
            Constraint::Egd(e) => &e.body,
        }
    }

    pub fn is_tgd(&self) -> bool {
        matches!(self, Constraint::Tgd(_))
    }

    pub fn as_tgd(&self) -> Option<&Tgd> {
        match self {
            Constraint::Tgd(t) => Some(t),
            _ => None,
        }
    }

    pub fn as_egd(&self) -> Option<&Egd> {
        match self {
            Constraint::Egd(e) => Some(e),
            _ => None,
        }
    }

    /// Universal variables in grounding order.
    pub fn universal_order(&self) -> Vec<&str> {
        match self {
            Constraint::Tgd(t) => t.universal_order(),
            Constraint::Egd(e) => e.universal_order(),
        }
    }

    /// Universals that occur in the head (for an EGD, both equated variables).
    pub fn head_variables(&self) -> BTreeSet<&str> {
        match self {
            Constraint::Tgd(t) => t.frontier(),
            Constraint::Egd(e) => [e.lhs.as_str(), e.rhs.as_str()].into_iter().collect(),
        }
    }

    /// Constants mentioned anywhere in the constraint.
    pub fn constants(&self) -> BTreeSet<&str> {
        let mut out = BTreeSet::new();
        let heads: &[Atom] = match self {
            Constraint::Tgd(t) => &t.head,
            Constraint::Egd(_) => &[],
        };
        for a in self.body().iter().chain(heads.iter()) {
            for t in &a.args {
                if let Term::Const(c) = t {
                    out.insert(c.as_str());
                }
            }
        }
        out
    }
}

impl fmt::Display for Constraint {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}: ", self.label())?;
        if self.body().is_empty() {
            write!(f, "true")?;
        } else {
            for (i, a) in self.body().iter().enumerate() {
                if i > 0 {
                    write!(f, ", ")?;
                }
                write!(f, "{}", a)?;
            }
        }
        write!(f, " -> ")?;
        match self {
            Constraint::Tgd(t) => {
                if !t.existentials.is_empty() {
                    write!(f, "exists ")?;
                    for (i, v) in t.existentials.iter().enumerate() {
                        if i > 0 {
                            write!(f, ", ")?;
                        }
                        write!(f, "{}", v)?;
                    }
                    write!(f, ": ")?;
                }
                for (i, a) in t.head.iter().enumerate() {
                    if i > 0 {
                        write!(f, ", ")?;
                    }
                    write!(f, "{}", a)?;
                }
            }
            Constraint::Egd(e) => {
                write!(f, "{} = {}", e.lhs, e.rhs)?;
            }
        }
        write!(f, ".")
    }
}

/// Predicate arities, inferred from atom usage.
pub type Schema = BTreeMap<String, usize>;

#[derive(Error, Debug, Clone, PartialEq, Eq)]
pub enum ModelError {
    #[error("constraint {label}: head is empty")]
    EmptyHead { label: String },
    #[error("constraint {label}: head variable {var} neither occurs in the body nor is declared existential")]
    HeadVarNotInBody { label: String, var: String },
    #[error("constraint {label}: existential variable {var} also occurs in the body")]
    ExistentialInBody { label: String, var: String },
    #[error("constraint {label}: equated variable {var} does not occur in the body")]
    EqVarNotInBody { label: String, var: String },
    #[error("constraint {label}: EGD body is empty")]
    EmptyEgdBody { label: String },
    #[error("predicate {predicate} used with arities {first} and {second}")]
    ArityMismatch {
        predicate: String,
        first: usize,
        second: usize,
    },
    #[error("duplicate constraint label {label}")]
    DuplicateLabel { label: String },
    #[error("constraint {label}: labeled null {null} may not occur in a constraint")]
    NullInConstraint { label: String, null: String },
    #[error("instance atom {atom} contains variable {var}")]
    VarInInstance { atom: String, var: String },
}

/// An ordered set of constraints with the schema they induce.
#[derive(Clone, PartialEq, Eq, Debug, Default)]
pub struct ConstraintSet {
    pub schema: Schema,
    pub constraints: Vec<Constraint>,
}

impl ConstraintSet {
    /// Builds a set from raw constraints, inferring the schema and checking
    /// every structural invariant.
    pub fn new(constraints: Vec<Constraint>) -> Result<Self, ModelError> {
        let mut schema = Schema::new();
        let mut labels = HashSet::new();
        for c in &constraints {
            if !labels.insert(c.label().to_string()) {
                return Err(ModelError::DuplicateLabel {
                    label: c.label().to_string(),
                });
            }
            let heads: &[Atom] = match c {
                Constraint::Tgd(t) => &t.head,
                Constraint::Egd(_) => &[],
            };
            for a in c.body().iter().chain(heads.iter()) {
                for t in &a.args {
                    if let Term::Null(n) = t {
                        return Err(ModelError::NullInConstraint {
                            label: c.label().to_string(),
                            null: n.clone(),
                        });
                    }
                }
                match schema.get(&a.predicate) {
                    None => {
                        schema.insert(a.predicate.clone(), a.args.len());
                    }
                    Some(&ar) if ar != a.args.len() => {
                        return Err(ModelError::ArityMismatch {
                            predicate: a.predicate.clone(),
                            first: ar,
                            second: a.args.len(),
                        });
                    }
                    _ => {}
                }
            }
            validate_constraint(c)?;
        }
        Ok(ConstraintSet {
            schema,
            constraints,
        })
    }

    pub fn get(&self, label: &str) -> Option<&Constraint> {
        self.constraints.iter().find(|c| c.label() == label)
    }

    pub fn labels(&self) -> Vec<&str> {
        self.constraints.iter().map(|c| c.label()).collect()
    }

    /// Restriction to the constraints whose labels appear in `keep`,
    /// preserving declaration order and the full schema.
    pub fn restrict(&self, keep: &BTreeSet<String>) -> ConstraintSet {
        ConstraintSet {
            schema: self.schema.clone(),
            constraints: self
                .constraints
                .iter()
                .filter(|c| keep.contains(c.label()))
                .cloned()
                .collect(),
        }
    }

    /// Body positions of every constraint: `pos` of the set.
    pub fn body_positions(&self) -> BTreeSet<Position> {
        let mut out = BTreeSet::new();
        for c in &self.constraints {
            for a in c.body() {
                for i in 1..=a.args.len() {
                    out.insert(Position::new(a.predicate.clone(), i));
                }
            }
        }
        out
    }

    /// Positions occurring anywhere, heads included. Graph construction
    /// needs head positions even though the classical `pos` covers bodies
    /// only.
    pub fn all_positions(&self) -> BTreeSet<Position> {
        let mut out = self.body_positions();
        for c in &self.constraints {
            if let Constraint::Tgd(t) = c {
                for a in &t.head {
                    for i in 1..=a.args.len() {
                        out.insert(Position::new(a.predicate.clone(), i));
                    }
                }
            }
        }
        out
    }

    pub fn constants(&self) -> BTreeSet<String> {
        let mut out = BTreeSet::new();
        for c in &self.constraints {
            for k in c.constants() {
                out.insert(k.to_string());
            }
        }
        out
    }

    pub fn is_tgd_only(&self) -> bool {
        self.constraints.iter().all(|c| c.is_tgd())
    }
}

fn validate_constraint(c: &Constraint) -> Result<(), ModelError> {
    match c {
        Constraint::Tgd(t) => {
            if t.head.is_empty() {
                return Err(ModelError::EmptyHead {
                    label: t.label.clone(),
                });
            }
            let body_vars: BTreeSet<&str> =
                t.body.iter().flat_map(|a| a.variables()).collect();
            for v in &t.universals {
                // universals are exactly the body variables by construction,
                // so a declared existential clashing with the body is the
                // real error surface
                debug_assert!(body_vars.contains(v.as_str()));
            }
            for v in &t.existentials {
                if body_vars.contains(v.as_str()) {
                    return Err(ModelError::ExistentialInBody {
                        label: t.label.clone(),
                        var: v.clone(),
                    });
                }
            }
            for a in &t.head {
                for v in a.variables() {
                    if !t.universals.contains(v) && !t.existentials.contains(v) {
                        return Err(ModelError::HeadVarNotInBody {
                            label: t.label.clone(),
                            var: v.to_string(),
                        });
                    }
                }
            }
            Ok(())
        }
        Constraint::Egd(e) => {
            if e.body.is_empty() {
                return Err(ModelError::EmptyEgdBody {
                    label: e.label.clone(),
                });
            }
            let body_vars: BTreeSet<&str> =
                e.body.iter().flat_map(|a| a.variables()).collect();
            for v in [&e.lhs, &e.rhs] {
                if !body_vars.contains(v.as_str()) {
                    return Err(ModelError::EqVarNotInBody {
                        label: e.label.clone(),
                        var: v.clone(),
                    });
                }
            }
            Ok(())
        }
    }
}

/// Convenience constructor: a TGD whose universals are inferred from the body.
pub fn tgd(
    label: impl Into<String>,
    body: Vec<Atom>,
    existentials: &[&str],
    head: Vec<Atom>,
) -> Constraint {
    let universals: BTreeSet<String> = body
        .iter()
        .flat_map(|a| a.variables())
        .map(|s| s.to_string())
        .collect();
    Constraint::Tgd(Tgd {
        label: label.into(),
        body,
        head,
        universals,
        existentials: existentials.iter().map(|s| s.to_string()).collect(),
    })
}

/// Convenience constructor for an EGD.
pub fn egd(label: impl Into<String>, body: Vec<Atom>, lhs: &str, rhs: &str) -> Constraint {
    Constraint::Egd(Egd {
        label: label.into(),
        body,
        lhs: lhs.to_string(),
        rhs: rhs.to_string(),
    })
}

/// A finite set of ground atoms over constants and labeled nulls.
///
/// Insertion order is preserved (it drives the deterministic enumeration
/// order of homomorphisms) while membership is set semantics.
#[derive(Clone, Debug, Default)]
pub struct Instance {
    atoms: Vec<Atom>,
    seen: HashSet<Atom>,
    by_pred: HashMap<String, Vec<usize>>,
}

impl Instance {
    pub fn new() -> Self {
        Instance::default()
    }

    pub fn from_atoms(atoms: impl IntoIterator<Item = Atom>) -> Result<Self, ModelError> {
        let mut inst = Instance::new();
        for a in atoms {
            inst.try_insert(a)?;
        }
        Ok(inst)
    }

    pub fn try_insert(&mut self, atom: Atom) -> Result<bool, ModelError> {
        for t in &atom.args {
            if let Term::Var(v) = t {
                return Err(ModelError::VarInInstance {
                    atom: atom.to_string(),
                    var: v.clone(),
                });
            }
        }
        Ok(self.insert(atom))
    }

    /// Inserts a ground atom; returns false if it was already present.
    pub fn insert(&mut self, atom: Atom) -> bool {
        debug_assert!(atom.is_ground());
        if self.seen.contains(&atom) {
            return false;
        }
        self.seen.insert(atom.clone());
        self.by_pred
            .entry(atom.predicate.clone())
            .or_default()
            .push(self.atoms.len());
        self.atoms.push(atom);
        true
    }

    pub fn contains(&self, atom: &Atom) -> bool {
        self.seen.contains(atom)
    }

    pub fn iter(&self) -> impl Iterator<Item = &Atom> {
        self.atoms.iter()
    }

    pub fn len(&self) -> usize {
        self.atoms.len()
    }

    pub fn is_empty(&self) -> bool {
        self.atoms.is_empty()
    }

    /// Indices of atoms with the given predicate, in insertion order.
    pub fn atoms_with_predicate(&self, pred: &str) -> impl Iterator<Item = &Atom> {
        self.by_pred
            .get(pred)
            .into_iter()
            .flatten()
            .map(move |&i| &self.atoms[i])
    }

    /// All constants and nulls occurring in the instance.
    pub fn domain(&self) -> BTreeSet<Term> {
        self.atoms
            .iter()
            .flat_map(|a| a.args.iter().cloned())
            .collect()
    }

    pub fn nulls(&self) -> BTreeSet<String> {
        self.atoms
            .iter()
            .flat_map(|a| a.args.iter())
            .filter_map(|t| match t {
                Term::Null(n) => Some(n.clone()),
                _ => None,
            })
            .collect()
    }

    /// Positions at which `term` occurs.
    pub fn positions_of_term(&self, term: &Term) -> BTreeSet<Position> {
        let mut out = BTreeSet::new();
        for a in &self.atoms {
            for (i, t) in a.args.iter().enumerate() {
                if t == term {
                    out.insert(Position::new(a.predicate.clone(), i + 1));
                }
            }
        }
        out
    }

    /// Global replacement of one term by another (the EGD repair step).
    /// Merged duplicates keep the first occurrence's position in the order.
    pub fn substitute(&self, from: &Term, to: &Term) -> Instance {
        let mut out = Instance::new();
        for a in &self.atoms {
            let args = a
                .args
                .iter()
                .map(|t| if t == from { to.clone() } else { t.clone() })
                .collect();
            out.insert(Atom::new(a.predicate.clone(), args));
        }
        out
    }

    /// Schema induced by the atoms, for arity checks against constraint files.
    pub fn inferred_schema(&self) -> Schema {
        let mut s = Schema::new();
        for a in &self.atoms {
            s.entry(a.predicate.clone()).or_insert(a.args.len());
        }
        s
    }
}

impl PartialEq for Instance {
    fn eq(&self, other: &Self) -> bool {
        self.seen == other.seen
    }
}

impl Eq for Instance {}

impl fmt::Display for Instance {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let mut sorted: Vec<&Atom> = self.atoms.iter().collect();
        sorted.sort();
        for a in sorted {
            writeln!(f, "{}.", a)?;
        }
        Ok(())
    }
}

/// True when the two instances are identical up to a bijective renaming of
/// labeled nulls (constants fixed).
pub fn isomorphic_up_to_nulls(a: &Instance, b: &Instance) -> bool {
    if a.len() != b.len() {
        return false;
    }
    let nulls_a: Vec<String> = a.nulls().into_iter().collect();
    let nulls_b: BTreeSet<String> = b.nulls();
    if nulls_a.len() != nulls_b.len() {
        return false;
    }
    let mut mapping: BTreeMap<String, String> = BTreeMap::new();
    let mut used: BTreeSet<String> = BTreeSet::new();
    fn assign(
        idx: usize,
        nulls_a: &[String],
        nulls_b: &BTreeSet<String>,
        mapping: &mut BTreeMap<String, String>,
        used: &mut BTreeSet<String>,
        a: &Instance,
        b: &Instance,
    ) -> bool {
        if idx == nulls_a.len() {
            return a.iter().all(|atom| {
                let args = atom
                    .args
                    .iter()
                    .map(|t| match t {
                        Term::Null(n) => Term::Null(mapping[n].clone()),
                        other => other.clone(),
                    })
                    .collect();
                b.contains(&Atom::new(atom.predicate.clone(), args))
            });
        }
        for cand in nulls_b.iter() {
            if used.contains(cand) {
                continue;
            }
            mapping.insert(nulls_a[idx].clone(), cand.clone());
            used.insert(cand.clone());
            if assign(idx + 1, nulls_a, nulls_b, mapping, used, a, b) {
                return true;
            }
            mapping.remove(&nulls_a[idx]);
            used.remove(cand);
        }
        false
    }
    assign(0, &nulls_a, &nulls_b, &mut mapping, &mut used, a, b)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn v(n: &str) -> Term {
        Term::Var(n.into())
    }
    fn c(n: &str) -> Term {
        Term::Const(n.into())
    }
    fn nl(n: &str) -> Term {
        Term::Null(n.into())
    }

    #[test]
    fn tgd_head_var_must_occur_in_body() {
        let bad = tgd(
            "t",
            vec![Atom::new("R", vec![v("x")])],
            &[],
            vec![Atom::new("S", vec![v("y")])],
        );
        assert!(matches!(
            ConstraintSet::new(vec![bad]),
            Err(ModelError::HeadVarNotInBody { .. })
        ));
    }

    #[test]
    fn existential_may_not_occur_in_body() {
        let bad = tgd(
            "t",
            vec![Atom::new("R", vec![v("x")])],
            &["x"],
            vec![Atom::new("S", vec![v("x")])],
        );
        assert!(matches!(
            ConstraintSet::new(vec![bad]),
            Err(ModelError::ExistentialInBody { .. })
        ));
    }

    #[test]
    fn arity_mismatch_detected() {
        let a = tgd(
            "a",
            vec![Atom::new("R", vec![v("x")])],
            &[],
            vec![Atom::new("S", vec![v("x")])],
        );
        let b = tgd(
            "b",
            vec![Atom::new("R", vec![v("x"), v("y")])],
            &[],
            vec![Atom::new("S", vec![v("x")])],
        );
        assert!(matches!(
            ConstraintSet::new(vec![a, b]),
            Err(ModelError::ArityMismatch { .. })
        ));
    }

    #[test]
    fn egd_sides_must_occur_in_body() {
        let bad = egd("e", vec![Atom::new("T", vec![v("x"), v("y")])], "x", "z");
        assert!(matches!(
            ConstraintSet::new(vec![bad]),
            Err(ModelError::EqVarNotInBody { .. })
        ));
    }

    #[test]
    fn instance_rejects_variables_and_dedupes() {
        let mut inst = Instance::new();
        assert!(inst.try_insert(Atom::new("R", vec![c("a"), nl("n1")])).unwrap());
        assert!(!inst.try_insert(Atom::new("R", vec![c("a"), nl("n1")])).unwrap());
        assert!(inst.try_insert(Atom::new("R", vec![v("x"), c("a")])).is_err());
        assert_eq!(inst.len(), 1);
    }

    #[test]
    fn substitution_merges_atoms() {
        let mut inst = Instance::new();
        inst.insert(Atom::new("R", vec![nl("n1"), c("a")]));
        inst.insert(Atom::new("R", vec![c("b"), c("a")]));
        let out = inst.substitute(&nl("n1"), &c("b"));
        assert_eq!(out.len(), 1);
        assert!(out.contains(&Atom::new("R", vec![c("b"), c("a")])));
    }

    #[test]
    fn null_isomorphism() {
        let a = Instance::from_atoms(vec![
            Atom::new("E", vec![c("a"), nl("n1")]),
            Atom::new("E", vec![nl("n1"), nl("n2")]),
        ])
        .unwrap();
        let b = Instance::from_atoms(vec![
            Atom::new("E", vec![c("a"), nl("m7")]),
            Atom::new("E", vec![nl("m7"), nl("m3")]),
        ])
        .unwrap();
        let c_ = Instance::from_atoms(vec![
            Atom::new("E", vec![c("a"), nl("m7")]),
            Atom::new("E", vec![nl("m3"), nl("m7")]),
        ])
        .unwrap();
        assert!(isomorphic_up_to_nulls(&a, &b));
        assert!(!isomorphic_up_to_nulls(&a, &c_));
    }
}
