//! Firing relations between constraints and the graphs built on them.
//!
//! `fires_before(a, b)` asks whether one application of `a` can turn a
//! satisfied grounding of `b` into a violated one. The standard flavor fires
//! `a` only where `a` itself is violated; the oblivious flavor fires wherever
//! the body of `a` matches. The k-ary generalization `chain_fires` chains
//! k-1 oblivious steps in front of a final violation whose grounding carries
//! a labeled null confined to a given position set.
//!
//! Deciding these relations needs only candidate instances assembled from
//! homomorphic images of the participating bodies, so the search below never
//! enumerates raw instances. It grounds each body atom against either an
//! instance atom invented on demand, or an atom produced by an earlier step,
//! deferring symbol identity to a union-find so that any needed equalities
//! among invented symbols are discovered rather than guessed. Results depend
//! only on the constraints, never on user data.

use std::collections::{BTreeSet, HashMap};
use std::fmt::Write as _;
use std::rc::Rc;

use crate::hom::{self, Homomorphism};
use crate::model::{Atom, Constraint, ConstraintSet, Egd, Instance, Position, Term};

#[derive(Clone, Copy, PartialEq, Eq, Debug, Hash)]
pub enum FiringMode {
    Standard,
    Oblivious,
}

/// Directed graph over constraint labels.
#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct ConstraintGraph {
    pub nodes: Vec<String>,
    pub edges: BTreeSet<(String, String)>,
}

impl ConstraintGraph {
    fn adjacency(&self) -> Vec<Vec<usize>> {
        let idx: HashMap<&str, usize> = self
            .nodes
            .iter()
            .enumerate()
            .map(|(i, n)| (n.as_str(), i))
            .collect();
        let mut adj = vec![Vec::new(); self.nodes.len()];
        for (a, b) in &self.edges {
            adj[idx[a.as_str()]].push(idx[b.as_str()]);
        }
        adj
    }

    /// Components containing a cycle, as label sets.
    pub fn cyclic_components(&self) -> Vec<BTreeSet<String>> {
        crate::scc::cyclic_sccs(&self.adjacency())
            .into_iter()
            .map(|comp| comp.into_iter().map(|i| self.nodes[i].clone()).collect())
            .collect()
    }

    /// All condensation classes in topological order.
    pub fn condensation_order(&self) -> Vec<Vec<String>> {
        crate::scc::condensation_topo_order(&self.adjacency())
            .into_iter()
            .map(|comp| comp.into_iter().map(|i| self.nodes[i].clone()).collect())
            .collect()
    }

    /// Labels reachable from `start` by a path of length at least one.
    pub fn reachable_from(&self, start: &str) -> BTreeSet<String> {
        let mut out = BTreeSet::new();
        let mut stack: Vec<&str> = self
            .edges
            .iter()
            .filter(|(a, _)| a == start)
            .map(|(_, b)| b.as_str())
            .collect();
        while let Some(n) = stack.pop() {
            if out.insert(n.to_string()) {
                for (a, b) in &self.edges {
                    if a == n && !out.contains(b) {
                        stack.push(b);
                    }
                }
            }
        }
        out
    }

    pub fn to_dot(&self, name: &str) -> String {
        let mut out = String::new();
        let _ = writeln!(out, "digraph {} {{", name);
        for n in &self.nodes {
            let _ = writeln!(out, "  \"{}\";", n);
        }
        for (a, b) in &self.edges {
            let _ = writeln!(out, "  \"{}\" -> \"{}\";", a, b);
        }
        let _ = writeln!(out, "}}");
        out
    }
}

/// A witness instance for a firing-relation query, with the body atoms each
/// instance atom was imaged from.
#[derive(Clone, Debug)]
pub struct CandidateInstance {
    pub instance: Instance,
    pub provenance: Vec<(Atom, (String, usize))>,
}

/// One application of `a` can newly violate `b`.
pub fn fires_before(sigma: &ConstraintSet, a: &str, b: &str, mode: FiringMode) -> bool {
    let ca = sigma.get(a).expect("unknown label");
    let cb = sigma.get(b).expect("unknown label");
    match ca {
        Constraint::Tgd(_) => {
            let mut search = ChainSearch::new(vec![ca, cb], None, mode, None);
            search.run()
        }
        Constraint::Egd(e) => egd_step_fires(sigma, e, cb, None),
    }
}

pub fn fires_before_witness(
    sigma: &ConstraintSet,
    a: &str,
    b: &str,
    mode: FiringMode,
) -> Option<CandidateInstance> {
    let ca = sigma.get(a)?;
    let cb = sigma.get(b)?;
    match ca {
        Constraint::Tgd(_) => {
            let mut search = ChainSearch::new(vec![ca, cb], None, mode, None);
            if search.run() {
                search.witness
            } else {
                None
            }
        }
        Constraint::Egd(e) => {
            if egd_step_fires(sigma, e, cb, None) {
                // the bounded search does not retain its witness
                Some(CandidateInstance {
                    instance: Instance::new(),
                    provenance: Vec::new(),
                })
            } else {
                None
            }
        }
    }
}

/// Edge (a, b) iff `fires_before(a, b, mode)`.
pub fn chase_graph(sigma: &ConstraintSet, mode: FiringMode) -> ConstraintGraph {
    let labels: Vec<String> = sigma.labels().iter().map(|s| s.to_string()).collect();
    let mut g = ConstraintGraph {
        nodes: labels.clone(),
        edges: BTreeSet::new(),
    };
    for a in &labels {
        for b in &labels {
            if fires_before(sigma, a, b, mode) {
                g.edges.insert((a.clone(), b.clone()));
            }
        }
    }
    g
}

/// The k-ary firing relation: k-1 oblivious steps enable a final violation
/// whose grounding holds a null confined to `p` in the start instance. For
/// k >= 3 the chain must additionally be tight (no step can be dropped) and
/// must continue: firing the violated grounding enables a further
/// null-carrying violation over `sigma`.
pub fn fires_before_kp(sigma: &ConstraintSet, chain: &[&str], p: &BTreeSet<Position>) -> bool {
    assert!(chain.len() >= 2, "chain relations need k >= 2");
    let members: Vec<&Constraint> = chain
        .iter()
        .map(|l| sigma.get(l).expect("unknown label"))
        .collect();
    let k = members.len();
    let steps_all_tgd = members[..k - 1].iter().all(|c| c.is_tgd());
    if steps_all_tgd && (k == 2 || members[k - 1].is_tgd()) {
        let mut search = ChainSearch::new(members, Some(p.clone()), FiringMode::Oblivious, Some(sigma));
        search.run()
    } else if k == 2 {
        match members[0] {
            Constraint::Egd(e) => egd_step_fires(sigma, e, members[1], Some(p)),
            Constraint::Tgd(_) => unreachable!(),
        }
    } else {
        // Chains mixing EGD steps at k >= 3 are over-approximated: reporting
        // the relation keeps every edge a faithful decision would add, so
        // termination is never claimed spuriously.
        true
    }
}

// ---------------------------------------------------------------------------
// symbolic search

type Sym = u32;

#[derive(Clone, PartialEq, Eq, Debug)]
enum Anchor {
    ConstVal(Rc<str>),
    StepNull(u32),
}

#[derive(Clone, PartialEq, Eq, Debug)]
enum Cell {
    Lit(Rc<str>),
    Sym(Sym),
}

#[derive(Clone, Debug)]
struct SAtom {
    pred: Rc<str>,
    cells: Vec<Cell>,
}

enum Undo {
    Parent(Sym),
    Anchor(Sym),
    Flag(Sym),
}

#[derive(Default)]
struct Uf {
    parent: Vec<Sym>,
    anchor: Vec<Option<Anchor>>,
    in_start: Vec<bool>,
    trail: Vec<Undo>,
    null_ids: u32,
}

impl Uf {
    fn fresh_free(&mut self) -> Sym {
        let id = self.parent.len() as Sym;
        self.parent.push(id);
        self.anchor.push(None);
        self.in_start.push(false);
        id
    }

    fn fresh_step_null(&mut self) -> Sym {
        let id = self.fresh_free();
        self.null_ids += 1;
        self.anchor[id as usize] = Some(Anchor::StepNull(self.null_ids));
        id
    }

    fn find(&self, mut x: Sym) -> Sym {
        while self.parent[x as usize] != x {
            x = self.parent[x as usize];
        }
        x
    }

    fn mark(&self) -> usize {
        self.trail.len()
    }

    fn rollback(&mut self, mark: usize) {
        while self.trail.len() > mark {
            match self.trail.pop().unwrap() {
                Undo::Parent(x) => self.parent[x as usize] = x,
                Undo::Anchor(x) => self.anchor[x as usize] = None,
                Undo::Flag(x) => self.in_start[x as usize] = false,
            }
        }
    }

    /// Marks a symbol as occurring in the start instance; fails on nulls
    /// invented by chase steps, which cannot predate the run.
    fn flag_start(&mut self, x: Sym) -> bool {
        let r = self.find(x);
        if matches!(self.anchor[r as usize], Some(Anchor::StepNull(_))) {
            return false;
        }
        if !self.in_start[r as usize] {
            self.in_start[r as usize] = true;
            self.trail.push(Undo::Flag(r));
        }
        true
    }

    fn union(&mut self, a: Sym, b: Sym) -> bool {
        let ra = self.find(a);
        let rb = self.find(b);
        if ra == rb {
            return true;
        }
        let (keep, drop) = match (&self.anchor[ra as usize], &self.anchor[rb as usize]) {
            (Some(x), Some(y)) => {
                if x != y {
                    return false;
                }
                (ra, rb)
            }
            (Some(_), None) => (ra, rb),
            _ => (rb, ra),
        };
        if matches!(self.anchor[keep as usize], Some(Anchor::StepNull(_)))
            && (self.in_start[drop as usize] || self.in_start[keep as usize])
        {
            return false;
        }
        if self.in_start[drop as usize] && !self.in_start[keep as usize] {
            self.in_start[keep as usize] = true;
            self.trail.push(Undo::Flag(keep));
        }
        self.parent[drop as usize] = keep;
        self.trail.push(Undo::Parent(drop));
        true
    }

    fn unify(&mut self, a: &Cell, b: &Cell) -> bool {
        match (a, b) {
            (Cell::Lit(x), Cell::Lit(y)) => x == y,
            (Cell::Sym(s), Cell::Lit(c)) | (Cell::Lit(c), Cell::Sym(s)) => {
                let r = self.find(*s);
                match &self.anchor[r as usize] {
                    Some(Anchor::ConstVal(d)) => d == c,
                    Some(Anchor::StepNull(_)) => false,
                    None => {
                        self.anchor[r as usize] = Some(Anchor::ConstVal(c.clone()));
                        self.trail.push(Undo::Anchor(r));
                        true
                    }
                }
            }
            (Cell::Sym(x), Cell::Sym(y)) => self.union(*x, *y),
        }
    }

    fn resolve(&self, c: &Cell) -> Term {
        match c {
            Cell::Lit(s) => Term::Const(s.to_string()),
            Cell::Sym(s) => {
                let r = self.find(*s);
                match &self.anchor[r as usize] {
                    Some(Anchor::ConstVal(c)) => Term::Const(c.to_string()),
                    Some(Anchor::StepNull(id)) => Term::Null(format!("v{}", id)),
                    None => Term::Const(format!("#f{}", r)),
                }
            }
        }
    }

    /// Whether the cell could be read as a labeled null confined to `p` in
    /// the start instance: a step-invented null always qualifies, a free
    /// symbol qualifies when its start-instance occurrences stay inside `p`.
    fn null_candidate(
        &self,
        c: &Cell,
        start: &Instance,
        p: &BTreeSet<Position>,
    ) -> bool {
        let Cell::Sym(s) = c else { return false };
        let r = self.find(*s);
        match &self.anchor[r as usize] {
            Some(Anchor::StepNull(_)) => true,
            Some(Anchor::ConstVal(_)) => false,
            None => {
                let t = self.resolve(c);
                start.positions_of_term(&t).is_subset(p)
            }
        }
    }
}

struct ChainSearch<'a> {
    chain: Vec<&'a Constraint>,
    p: Option<BTreeSet<Position>>,
    mode: FiringMode,
    ctx: Option<&'a ConstraintSet>,
    uf: Uf,
    start_atoms: Vec<SAtom>,
    start_prov: Vec<(usize, usize)>,
    produced: Vec<Vec<SAtom>>,
    grounded_bodies: Vec<Vec<SAtom>>,
    envs: Vec<HashMap<String, Sym>>,
    budget: usize,
    witness: Option<CandidateInstance>,
}

impl<'a> ChainSearch<'a> {
    fn new(
        chain: Vec<&'a Constraint>,
        p: Option<BTreeSet<Position>>,
        mode: FiringMode,
        ctx: Option<&'a ConstraintSet>,
    ) -> Self {
        let k = chain.len();
        ChainSearch {
            chain,
            p,
            mode,
            ctx,
            uf: Uf::default(),
            start_atoms: Vec::new(),
            start_prov: Vec::new(),
            produced: vec![Vec::new(); k - 1],
            grounded_bodies: vec![Vec::new(); k],
            envs: vec![HashMap::new(); k],
            budget: 4_000_000,
            witness: None,
        }
    }

    fn run(&mut self) -> bool {
        self.ground_position(0)
    }

    fn spend(&mut self) -> bool {
        if self.budget == 0 {
            return false;
        }
        self.budget -= 1;
        true
    }

    fn sym_for(&mut self, pos: usize, var: &str) -> Sym {
        if let Some(&s) = self.envs[pos].get(var) {
            return s;
        }
        let s = self.uf.fresh_free();
        self.envs[pos].insert(var.to_string(), s);
        s
    }

    fn pattern_cells(&mut self, pos: usize, atom: &Atom) -> Vec<Cell> {
        atom.args
            .iter()
            .map(|t| match t {
                Term::Var(v) => Cell::Sym(self.sym_for(pos, v)),
                Term::Const(c) => Cell::Lit(Rc::from(c.as_str())),
                Term::Null(_) => unreachable!("constraints hold no nulls"),
            })
            .collect()
    }

    fn unify_atom(&mut self, pattern: &[Cell], target: &SAtom) -> bool {
        for (p, t) in pattern.iter().zip(target.cells.iter()) {
            if !self.uf.unify(p, t) {
                return false;
            }
        }
        true
    }

    fn ground_position(&mut self, pos: usize) -> bool {
        if pos == self.chain.len() {
            return self.leaf();
        }
        self.ground_atoms(pos, 0)
    }

    fn ground_atoms(&mut self, pos: usize, atom_idx: usize) -> bool {
        if !self.spend() {
            // search budget exhausted: stay conservative
            return true;
        }
        let body = self.chain[pos].body();
        if atom_idx == body.len() {
            return self.after_body(pos);
        }
        let atom = body[atom_idx].clone();
        let vars_before: Vec<String> = self.envs[pos].keys().cloned().collect();
        let cells = {
            let mark = self.uf.mark();
            let _ = mark;
            self.pattern_cells(pos, &atom)
        };

        // alternative 1: reuse an atom produced by an earlier step
        for j in 0..pos.min(self.produced.len()) {
            for t in 0..self.produced[j].len() {
                let target = self.produced[j][t].clone();
                if target.pred.as_ref() != atom.predicate || target.cells.len() != cells.len() {
                    continue;
                }
                let mark = self.uf.mark();
                if self.unify_atom(&cells, &target) {
                    self.grounded_bodies[pos].push(target.clone());
                    if self.ground_atoms(pos, atom_idx + 1) {
                        return true;
                    }
                    self.grounded_bodies[pos].pop();
                }
                self.uf.rollback(mark);
            }
        }

        // alternative 2: reuse an existing start-instance atom
        for t in 0..self.start_atoms.len() {
            let target = self.start_atoms[t].clone();
            if target.pred.as_ref() != atom.predicate || target.cells.len() != cells.len() {
                continue;
            }
            let mark = self.uf.mark();
            if self.unify_atom(&cells, &target) {
                self.grounded_bodies[pos].push(target.clone());
                if self.ground_atoms(pos, atom_idx + 1) {
                    return true;
                }
                self.grounded_bodies[pos].pop();
            }
            self.uf.rollback(mark);
        }

        // alternative 3: invent a start-instance atom for this image
        {
            let mark = self.uf.mark();
            let mut ok = true;
            for c in &cells {
                if let Cell::Sym(s) = c {
                    if !self.uf.flag_start(*s) {
                        ok = false;
                        break;
                    }
                }
            }
            if ok {
                let invented = SAtom {
                    pred: Rc::from(atom.predicate.as_str()),
                    cells: cells.clone(),
                };
                self.start_atoms.push(invented.clone());
                self.start_prov.push((pos, atom_idx));
                self.grounded_bodies[pos].push(invented);
                if self.ground_atoms(pos, atom_idx + 1) {
                    return true;
                }
                self.grounded_bodies[pos].pop();
                self.start_atoms.pop();
                self.start_prov.pop();
            }
            self.uf.rollback(mark);
        }

        // drop variable bindings introduced while building the pattern
        let added: Vec<String> = self.envs[pos]
            .keys()
            .filter(|k| !vars_before.contains(k))
            .cloned()
            .collect();
        for v in added {
            self.envs[pos].remove(&v);
        }
        false
    }

    fn after_body(&mut self, pos: usize) -> bool {
        if pos == self.chain.len() - 1 {
            return self.ground_position(pos + 1);
        }
        // a proper step: produce the head image with fresh step nulls
        let t = self.chain[pos].as_tgd().expect("chain steps are TGDs here");
        let mut ex_syms: HashMap<&str, Sym> = HashMap::new();
        for y in &t.existentials {
            ex_syms.insert(y.as_str(), self.uf.fresh_step_null());
        }
        let mut head_atoms = Vec::new();
        for a in &t.head {
            let cells = a
                .args
                .iter()
                .map(|term| match term {
                    Term::Var(v) => {
                        if let Some(&s) = ex_syms.get(v.as_str()) {
                            Cell::Sym(s)
                        } else {
                            Cell::Sym(self.envs[pos][v])
                        }
                    }
                    Term::Const(c) => Cell::Lit(Rc::from(c.as_str())),
                    Term::Null(_) => unreachable!(),
                })
                .collect();
            head_atoms.push(SAtom {
                pred: Rc::from(a.predicate.as_str()),
                cells,
            });
        }
        self.produced[pos] = head_atoms;
        let hit = self.ground_position(pos + 1);
        if !hit {
            self.produced[pos].clear();
        }
        hit
    }

    fn resolve_atoms(&self, atoms: &[SAtom]) -> Vec<Atom> {
        atoms
            .iter()
            .map(|a| {
                Atom::new(
                    a.pred.to_string(),
                    a.cells.iter().map(|c| self.uf.resolve(c)).collect(),
                )
            })
            .collect()
    }

    fn resolved_env(&self, pos: usize) -> Homomorphism {
        self.envs[pos]
            .iter()
            .map(|(v, s)| (v.clone(), self.uf.resolve(&Cell::Sym(*s))))
            .collect()
    }

    fn instance_of(&self, parts: &[&[SAtom]]) -> Instance {
        let mut inst = Instance::new();
        for part in parts {
            for a in self.resolve_atoms(part) {
                inst.insert(a);
            }
        }
        inst
    }

    /// All core conditions, evaluated on the resolved witness.
    fn core_checks(&self) -> bool {
        let k = self.chain.len();
        let start = self.instance_of(&[&self.start_atoms]);
        let mut before_final_parts: Vec<&[SAtom]> = vec![&self.start_atoms];
        for p in &self.produced {
            before_final_parts.push(p);
        }
        let before_final = self.instance_of(&before_final_parts);
        let final_c = self.chain[k - 1];
        let h_final = self.resolved_env(k - 1);

        // final grounding is violated after the steps
        match final_c {
            Constraint::Tgd(t) => {
                if hom::embeds(&t.head, &before_final, &h_final) {
                    return false;
                }
            }
            Constraint::Egd(e) => {
                if h_final[&e.lhs] == h_final[&e.rhs] {
                    return false;
                }
            }
        }

        // and was satisfied at the start: its body must not hold there
        let final_body = self.resolve_atoms(&self.grounded_bodies[k - 1]);
        if final_body.iter().all(|a| start.contains(a)) {
            return false;
        }

        // standard flavor fires the first constraint only where violated
        if self.mode == FiringMode::Standard {
            let t0 = self.chain[0].as_tgd().expect("standard gate implies TGD");
            let h0 = self.resolved_env(0);
            if hom::embeds(&t0.head, &start, &h0) {
                return false;
            }
        }

        // the violated grounding carries a null confined to `p`
        if let Some(p) = &self.p {
            let frontier = final_c.head_variables();
            let found = frontier.iter().any(|v| {
                self.envs[k - 1]
                    .get(*v)
                    .map(|s| self.uf.null_candidate(&Cell::Sym(*s), &start, p))
                    .unwrap_or(false)
            });
            if !found {
                return false;
            }
        }

        // tightness: dropping any single step (replaying the rest, skipping
        // steps whose bodies no longer map) must leave the final grounding
        // satisfied, i.e. its body incomplete
        if k >= 3 {
            for dropped in 0..k - 1 {
                let mut j = start.clone();
                for l in 0..k - 1 {
                    if l == dropped {
                        continue;
                    }
                    let body = self.resolve_atoms(&self.grounded_bodies[l]);
                    if body.iter().all(|a| j.contains(a)) {
                        for a in self.resolve_atoms(&self.produced[l]) {
                            j.insert(a);
                        }
                    }
                }
                if final_body.iter().all(|a| j.contains(a)) {
                    return false;
                }
            }
        }
        true
    }

    fn leaf(&mut self) -> bool {
        if !self.core_checks() {
            return false;
        }
        let k = self.chain.len();
        if k >= 3 {
            if !self.continuation() {
                return false;
            }
            // invented atoms may have been added; re-verify everything
            if !self.core_checks() {
                return false;
            }
        }
        let instance = self.instance_of(&[&self.start_atoms]);
        let provenance = self
            .start_atoms
            .iter()
            .zip(self.start_prov.iter())
            .map(|(a, (pos, idx))| {
                let resolved = &self.resolve_atoms(std::slice::from_ref(a))[0];
                (
                    resolved.clone(),
                    (self.chain[(*pos).min(self.chain.len() - 1)].label().to_string(), *idx),
                )
            })
            .collect();
        self.witness = Some(CandidateInstance {
            instance,
            provenance,
        });
        true
    }

    /// Fires the violated grounding and looks for a further null-carrying
    /// violation over the context set, letting it pull fresh start atoms in.
    fn continuation(&mut self) -> bool {
        let k = self.chain.len();
        let ctx = self.ctx.expect("chain relations carry their context");
        let p = self.p.clone().expect("chain relations carry a position set");
        let t = self.chain[k - 1]
            .as_tgd()
            .expect("EGD-final chains use the concrete fallback");
        let mut ex_syms: HashMap<&str, Sym> = HashMap::new();
        for y in &t.existentials {
            ex_syms.insert(y.as_str(), self.uf.fresh_step_null());
        }
        let fired: Vec<SAtom> = t
            .head
            .iter()
            .map(|a| SAtom {
                pred: Rc::from(a.predicate.as_str()),
                cells: a
                    .args
                    .iter()
                    .map(|term| match term {
                        Term::Var(v) => {
                            if let Some(&s) = ex_syms.get(v.as_str()) {
                                Cell::Sym(s)
                            } else {
                                Cell::Sym(self.envs[k - 1][v])
                            }
                        }
                        Term::Const(c) => Cell::Lit(Rc::from(c.as_str())),
                        Term::Null(_) => unreachable!(),
                    })
                    .collect(),
            })
            .collect();

        for beta in &ctx.constraints {
            let mark = self.uf.mark();
            let atoms_before = self.start_atoms.len();
            let mut env: HashMap<String, Sym> = HashMap::new();
            let mut grounded: Vec<SAtom> = Vec::new();
            if self.ground_extension(beta, 0, &fired, &mut env, &mut grounded, &p) {
                return true;
            }
            self.uf.rollback(mark);
            self.start_atoms.truncate(atoms_before);
            self.start_prov.truncate(atoms_before);
        }
        false
    }

    #[allow(clippy::too_many_arguments)]
    fn ground_extension(
        &mut self,
        beta: &Constraint,
        atom_idx: usize,
        fired: &[SAtom],
        env: &mut HashMap<String, Sym>,
        grounded: &mut Vec<SAtom>,
        p: &BTreeSet<Position>,
    ) -> bool {
        if !self.spend() {
            return true;
        }
        let body = beta.body();
        if atom_idx == body.len() {
            return self.extension_leaf(beta, fired, env, grounded, p);
        }
        let atom = body[atom_idx].clone();
        let vars_before: Vec<String> = env.keys().cloned().collect();
        let cells: Vec<Cell> = atom
            .args
            .iter()
            .map(|t| match t {
                Term::Var(v) => {
                    if let Some(&s) = env.get(v) {
                        Cell::Sym(s)
                    } else {
                        let s = self.uf.fresh_free();
                        env.insert(v.clone(), s);
                        Cell::Sym(s)
                    }
                }
                Term::Const(c) => Cell::Lit(Rc::from(c.as_str())),
                Term::Null(_) => unreachable!(),
            })
            .collect();

        let mut targets: Vec<SAtom> = Vec::new();
        for part in self.produced.iter() {
            targets.extend(part.iter().cloned());
        }
        targets.extend(fired.iter().cloned());
        targets.extend(self.start_atoms.iter().cloned());
        for target in targets {
            if target.pred.as_ref() != atom.predicate || target.cells.len() != cells.len() {
                continue;
            }
            let mark = self.uf.mark();
            if self.unify_atom(&cells, &target) {
                grounded.push(target.clone());
                if self.ground_extension(beta, atom_idx + 1, fired, env, grounded, p) {
                    return true;
                }
                grounded.pop();
            }
            self.uf.rollback(mark);
        }

        // invent
        {
            let mark = self.uf.mark();
            let mut ok = true;
            for c in &cells {
                if let Cell::Sym(s) = c {
                    if !self.uf.flag_start(*s) {
                        ok = false;
                        break;
                    }
                }
            }
            if ok {
                let invented = SAtom {
                    pred: Rc::from(atom.predicate.as_str()),
                    cells: cells.clone(),
                };
                self.start_atoms.push(invented.clone());
                self.start_prov.push((self.chain.len(), atom_idx));
                grounded.push(invented);
                if self.ground_extension(beta, atom_idx + 1, fired, env, grounded, p) {
                    return true;
                }
                grounded.pop();
                self.start_atoms.pop();
                self.start_prov.pop();
            }
            self.uf.rollback(mark);
        }

        for key in env.keys().cloned().collect::<Vec<_>>() {
            if !vars_before.contains(&key) {
                env.remove(&key);
            }
        }
        false
    }

    fn extension_leaf(
        &mut self,
        beta: &Constraint,
        fired: &[SAtom],
        env: &HashMap<String, Sym>,
        grounded: &[SAtom],
        p: &BTreeSet<Position>,
    ) -> bool {
        let start = self.instance_of(&[&self.start_atoms]);
        // continuation must lean on the run: its body cannot sit entirely in
        // the start instance
        let body_resolved = self.resolve_atoms(grounded);
        if body_resolved.iter().all(|a| start.contains(a)) {
            return false;
        }
        // violated after firing
        let mut parts: Vec<&[SAtom]> = vec![&self.start_atoms];
        for pr in &self.produced {
            parts.push(pr);
        }
        parts.push(fired);
        let after = self.instance_of(&parts);
        let h: Homomorphism = env
            .iter()
            .map(|(v, s)| (v.clone(), self.uf.resolve(&Cell::Sym(*s))))
            .collect();
        match beta {
            Constraint::Tgd(t) => {
                if hom::embeds(&t.head, &after, &h) {
                    return false;
                }
            }
            Constraint::Egd(e) => {
                if h[&e.lhs] == h[&e.rhs] {
                    return false;
                }
            }
        }
        // and carries a null confined to `p`
        let frontier = beta.head_variables();
        frontier.iter().any(|v| {
            env.get(*v)
                .map(|s| self.uf.null_candidate(&Cell::Sym(*s), &start, p))
                .unwrap_or(false)
        })
    }
}

// ---------------------------------------------------------------------------
// concrete fallback for EGD first steps

fn canonical_maps(vars: &[String], pool: &[Term]) -> Vec<Homomorphism> {
    // enumerate assignments, admitting the i-th fresh symbol only after the
    // (i-1)-th appeared: witnesses are closed under renaming fresh symbols
    fn rec(
        vars: &[String],
        idx: usize,
        pool: &[Term],
        current: &mut Homomorphism,
        out: &mut Vec<Homomorphism>,
    ) {
        if idx == vars.len() {
            out.push(current.clone());
            return;
        }
        let used: BTreeSet<Term> = current.values().cloned().collect();
        let mut first_unused_const = true;
        let mut first_unused_null = true;
        for t in pool {
            let fresh = matches!(t, Term::Const(c) if c.starts_with("#c"))
                || matches!(t, Term::Null(n) if n.starts_with("#u"));
            if fresh && !used.contains(t) {
                match t {
                    Term::Const(_) => {
                        if !first_unused_const {
                            continue;
                        }
                        first_unused_const = false;
                    }
                    Term::Null(_) => {
                        if !first_unused_null {
                            continue;
                        }
                        first_unused_null = false;
                    }
                    _ => {}
                }
            }
            current.insert(vars[idx].clone(), t.clone());
            rec(vars, idx + 1, pool, current, out);
            current.remove(&vars[idx]);
        }
    }
    let mut out = Vec::new();
    rec(vars, 0, pool, &mut Homomorphism::new(), &mut out);
    out
}

/// Bounded decision of the step relation when the first constraint is an
/// EGD: the step substitutes one value for another, so the instance is
/// rewritten rather than extended and the symbolic search above does not
/// apply. Candidate instances stay within homomorphic images of the two
/// bodies over a small canonical pool.
fn egd_step_fires(
    _sigma: &ConstraintSet,
    e: &Egd,
    beta: &Constraint,
    p: Option<&BTreeSet<Position>>,
) -> bool {
    let e_c = Constraint::Egd(e.clone());
    let vars_a: Vec<String> = e_c.universal_order().iter().map(|s| s.to_string()).collect();
    let vars_b: Vec<String> = beta
        .universal_order()
        .iter()
        .map(|s| s.to_string())
        .collect();
    let m = (vars_a.len() + vars_b.len()).min(6);
    let mut pool: Vec<Term> = Vec::new();
    for c in e_c.constants().iter().chain(beta.constants().iter()) {
        pool.push(Term::Const(c.to_string()));
    }
    for i in 0..m {
        pool.push(Term::Const(format!("#c{}", i)));
        pool.push(Term::Null(format!("#u{}", i)));
    }

    for ha in canonical_maps(&vars_a, &pool) {
        let (lv, rv) = (ha[&e.lhs].clone(), ha[&e.rhs].clone());
        if lv == rv {
            continue;
        }
        // both orientations of a null-null substitution are admissible
        let mut orientations: Vec<(Term, Term)> = Vec::new();
        match (&lv, &rv) {
            (Term::Const(_), Term::Const(_)) => continue, // step undefined
            (Term::Null(_), Term::Const(_)) => orientations.push((lv.clone(), rv.clone())),
            (Term::Const(_), Term::Null(_)) => orientations.push((rv.clone(), lv.clone())),
            _ => {
                orientations.push((lv.clone(), rv.clone()));
                orientations.push((rv.clone(), lv.clone()));
            }
        }
        let base_atoms = hom::apply_all(&ha, &e.body);
        for (from, to) in orientations {
            for hb in canonical_maps(&vars_b, &pool) {
                // assemble the start instance: both body images, where the
                // beta image may be given pre-substitution shape atom by atom
                let beta_atoms = hom::apply_all(&hb, beta.body());
                let mut choices: Vec<Vec<Atom>> = Vec::new();
                for a in &beta_atoms {
                    let mut alts = vec![a.clone()];
                    // any subset of `to` occurrences may have been `from`
                    let positions: Vec<usize> = a
                        .args
                        .iter()
                        .enumerate()
                        .filter(|(_, t)| **t == to)
                        .map(|(i, _)| i)
                        .collect();
                    for mask in 1..(1u32 << positions.len().min(4)) {
                        let mut args = a.args.clone();
                        for (bit, &idx) in positions.iter().enumerate() {
                            if mask & (1 << bit) != 0 {
                                args[idx] = from.clone();
                            }
                        }
                        alts.push(Atom::new(a.predicate.clone(), args));
                    }
                    choices.push(alts);
                }
                let mut pick = vec![0usize; choices.len()];
                loop {
                    let mut start = Instance::new();
                    for a in &base_atoms {
                        start.insert(a.clone());
                    }
                    for (i, alts) in choices.iter().enumerate() {
                        start.insert(alts[pick[i]].clone());
                    }
                    let after = start.substitute(&from, &to);
                    let args_b = hom::grounding_of(beta, &hb);
                    let sat_before = hom::satisfies_grounded(&start, beta, &args_b).unwrap();
                    let sat_after = hom::satisfies_grounded(&after, beta, &args_b).unwrap();
                    let null_ok = match p {
                        None => true,
                        Some(p) => beta.head_variables().iter().any(|v|

                            matches!(&hb[*v], Term::Null(_))
                                && start.positions_of_term(&hb[*v]).is_subset(p),
                        ),
                    };
                    if sat_before && !sat_after && null_ok {
                        return true;
                    }
                    // next combination
                    let mut i = 0;
                    loop {
                        if i == pick.len() {
                            break;
                        }
                        pick[i] += 1;
                        if pick[i] < choices[i].len() {
                            break;
                        }
                        pick[i] = 0;
                        i += 1;
                    }
                    if i == pick.len() {
                        break;
                    }
                }
            }
        }
    }
    false
}
