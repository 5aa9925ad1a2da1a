//! Text formats for constraint sets and instances.
//!
//! Constraint files hold one statement per `.`:
//!
//! ```text
//! stmt := [label ':'] (body | 'true') '->' head '.'
//! body := atom (',' atom)*
//! head := ['exists' var (',' var)* ':'] atom (',' atom)*  |  var '=' var
//! atom := pred '(' term (',' term)* ')'
//! ```
//!
//! Inside constraints every bare identifier is a variable; constants are
//! single-quoted (`'paris'`). Instance files hold one ground atom per line
//! terminated by `.`; there every bare identifier is a constant and tokens
//! prefixed `_` are labeled nulls. `#` starts a comment in both formats.
//! Unlabeled constraints are assigned `c<ordinal>`.

use std::fmt;

use thiserror::Error;

use crate::model::{
    egd, tgd, Atom, Constraint, ConstraintSet, Instance, ModelError, Schema, Term,
};

#[derive(Error, Debug, Clone, PartialEq, Eq)]
pub enum ParseError {
    #[error("{line}:{col}: {msg}")]
    Syntax { line: usize, col: usize, msg: String },
    #[error(transparent)]
    Model(#[from] ModelError),
}

#[derive(Clone, Debug, PartialEq, Eq)]
enum Tok {
    Ident(String),
    Quoted(String),
    NullName(String),
    LParen,
    RParen,
    Comma,
    Colon,
    Dot,
    Arrow,
    Equals,
}

impl fmt::Display for Tok {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Tok::Ident(s) => write!(f, "{}", s),
            Tok::Quoted(s) => write!(f, "'{}'", s),
            Tok::NullName(s) => write!(f, "_{}", s),
            Tok::LParen => write!(f, "("),
            Tok::RParen => write!(f, ")"),
            Tok::Comma => write!(f, ","),
            Tok::Colon => write!(f, ":"),
            Tok::Dot => write!(f, "."),
            Tok::Arrow => write!(f, "->"),
            Tok::Equals => write!(f, "="),
        }
    }
}

struct Lexer<'a> {
    src: &'a str,
    chars: std::iter::Peekable<std::str::CharIndices<'a>>,
    line: usize,
    col: usize,
}

type Spanned = (Tok, usize, usize);

impl<'a> Lexer<'a> {
    fn new(src: &'a str) -> Self {
        Lexer {
            src,
            chars: src.char_indices().peekable(),
            line: 1,
            col: 1,
        }
    }

    fn bump(&mut self) -> Option<(usize, char)> {
        let next = self.chars.next();
        if let Some((_, ch)) = next {
            if ch == '\n' {
                self.line += 1;
                self.col = 1;
            } else {
                self.col += 1;
            }
        }
        next
    }

    fn err(&self, msg: impl Into<String>) -> ParseError {
        ParseError::Syntax {
            line: self.line,
            col: self.col,
            msg: msg.into(),
        }
    }

    fn tokens(mut self) -> Result<Vec<Spanned>, ParseError> {
        let mut out = Vec::new();
        while let Some(&(i, ch)) = self.chars.peek() {
            let (line, col) = (self.line, self.col);
            match ch {
                ' ' | '\t' | '\r' | '\n' => {
                    self.bump();
                }
                '#' => {
                    while let Some(&(_, c)) = self.chars.peek() {
                        if c == '\n' {
                            break;
                        }
                        self.bump();
                    }
                }
                '(' => {
                    self.bump();
                    out.push((Tok::LParen, line, col));
                }
                ')' => {
                    self.bump();
                    out.push((Tok::RParen, line, col));
                }
                ',' => {
                    self.bump();
                    out.push((Tok::Comma, line, col));
                }
                ':' => {
                    self.bump();
                    out.push((Tok::Colon, line, col));
                }
                '.' => {
                    self.bump();
                    out.push((Tok::Dot, line, col));
                }
                '=' => {
                    self.bump();
                    out.push((Tok::Equals, line, col));
                }
                '-' => {
                    self.bump();
                    match self.chars.peek() {
                        Some(&(_, '>')) => {
                            self.bump();
                            out.push((Tok::Arrow, line, col));
                        }
                        _ => return Err(self.err("expected '>' after '-'")),
                    }
                }
                '\'' => {
                    self.bump();
                    let start = i + 1;
                    let end;
                    loop {
                        match self.bump() {
                            Some((j, '\'')) => {
                                end = j;
                                break;
                            }
                            Some((_, '\n')) | None => {
                                return Err(self.err("unterminated quoted constant"))
                            }
                            Some(_) => {}
                        }
                    }
                    out.push((Tok::Quoted(self.src[start..end].to_string()), line, col));
                }
                '_' => {
                    self.bump();
                    let mut name = String::new();
                    while let Some(&(_, c)) = self.chars.peek() {
                        if c.is_alphanumeric() || c == '_' {
                            name.push(c);
                            self.bump();
                        } else {
                            break;
                        }
                    }
                    if name.is_empty() {
                        return Err(self.err("expected null name after '_'"));
                    }
                    out.push((Tok::NullName(name), line, col));
                }
                c if c.is_alphanumeric() => {
                    let mut name = String::new();
                    while let Some(&(_, c)) = self.chars.peek() {
                        if c.is_alphanumeric() || c == '_' {
                            name.push(c);
                            self.bump();
                        } else {
                            break;
                        }
                    }
                    out.push((Tok::Ident(name), line, col));
                }
                other => return Err(self.err(format!("unexpected character {:?}", other))),
            }
        }
        Ok(out)
    }
}

struct Parser {
    toks: Vec<Spanned>,
    pos: usize,
}

impl Parser {
    fn peek(&self) -> Option<&Tok> {
        self.toks.get(self.pos).map(|(t, _, _)| t)
    }

    fn peek2(&self) -> Option<&Tok> {
        self.toks.get(self.pos + 1).map(|(t, _, _)| t)
    }

    fn next(&mut self) -> Option<&Spanned> {
        let t = self.toks.get(self.pos);
        if t.is_some() {
            self.pos += 1;
        }
        t
    }

    fn here(&self) -> (usize, usize) {
        self.toks
            .get(self.pos)
            .or_else(|| self.toks.last())
            .map(|&(_, l, c)| (l, c))
            .unwrap_or((1, 1))
    }

    fn err(&self, msg: impl Into<String>) -> ParseError {
        let (line, col) = self.here();
        ParseError::Syntax {
            line,
            col,
            msg: msg.into(),
        }
    }

    fn expect(&mut self, want: &Tok) -> Result<(), ParseError> {
        match self.peek() {
            Some(t) if t == want => {
                self.next();
                Ok(())
            }
            Some(t) => Err(self.err(format!("expected '{}', found '{}'", want, t))),
            None => Err(self.err(format!("expected '{}', found end of input", want))),
        }
    }

    fn ident(&mut self) -> Result<String, ParseError> {
        match self.peek().cloned() {
            Some(Tok::Ident(s)) => {
                self.next();
                Ok(s)
            }
            Some(t) => Err(self.err(format!("expected identifier, found '{}'", t))),
            None => Err(self.err("expected identifier, found end of input")),
        }
    }

    /// Parses one atom; `term` maps a bare identifier to a variable or a
    /// constant depending on the file kind.
    fn atom(&mut self, bare_is_var: bool) -> Result<Atom, ParseError> {
        let pred = self.ident()?;
        self.expect(&Tok::LParen)?;
        let mut args = Vec::new();
        loop {
            match self.peek().cloned() {
                Some(Tok::Ident(s)) => {
                    self.next();
                    args.push(if bare_is_var {
                        Term::Var(s)
                    } else {
                        Term::Const(s)
                    });
                }
                Some(Tok::Quoted(s)) => {
                    self.next();
                    args.push(Term::Const(s));
                }
                Some(Tok::NullName(s)) => {
                    if bare_is_var {
                        return Err(self.err("labeled nulls may not occur in constraints"));
                    }
                    self.next();
                    args.push(Term::Null(s));
                }
                _ => return Err(self.err("expected a term")),
            }
            match self.peek() {
                Some(Tok::Comma) => {
                    self.next();
                }
                Some(Tok::RParen) => break,
                _ => return Err(self.err("expected ',' or ')'")),
            }
        }
        self.expect(&Tok::RParen)?;
        Ok(Atom::new(pred, args))
    }

    fn statement(&mut self, ordinal: usize) -> Result<Constraint, ParseError> {
        // optional label: IDENT ':' not followed by '('-style atom start
        let label = match (self.peek(), self.peek2()) {
            (Some(Tok::Ident(_)), Some(Tok::Colon)) => {
                let l = self.ident()?;
                self.next(); // colon
                Some(l)
            }
            _ => None,
        };
        let label = label.unwrap_or_else(|| format!("c{}", ordinal));

        // body
        let mut body = Vec::new();
        match self.peek() {
            Some(Tok::Ident(s)) if s == "true" && self.peek2() == Some(&Tok::Arrow) => {
                self.next();
            }
            _ => loop {
                body.push(self.atom(true)?);
                match self.peek() {
                    Some(Tok::Comma) => {
                        self.next();
                    }
                    Some(Tok::Arrow) => break,
                    _ => return Err(self.err("expected ',' or '->'")),
                }
            },
        }
        self.expect(&Tok::Arrow)?;

        // head: equality, or optional exists-prefix plus atoms
        if let (Some(Tok::Ident(_)), Some(Tok::Equals)) = (self.peek(), self.peek2()) {
            let lhs = self.ident()?;
            self.next(); // '='
            let rhs = self.ident()?;
            self.expect(&Tok::Dot)?;
            return Ok(egd(label, body, &lhs, &rhs));
        }

        let mut existentials: Vec<String> = Vec::new();
        if let Some(Tok::Ident(s)) = self.peek() {
            if s == "exists" {
                self.next();
                loop {
                    existentials.push(self.ident()?);
                    match self.peek() {
                        Some(Tok::Comma) => {
                            self.next();
                        }
                        Some(Tok::Colon) => {
                            self.next();
                            break;
                        }
                        _ => return Err(self.err("expected ',' or ':' in exists clause")),
                    }
                }
            }
        }
        let mut head = Vec::new();
        loop {
            head.push(self.atom(true)?);
            match self.peek() {
                Some(Tok::Comma) => {
                    self.next();
                }
                Some(Tok::Dot) => break,
                _ => return Err(self.err("expected ',' or '.'")),
            }
        }
        self.expect(&Tok::Dot)?;
        let ex: Vec<&str> = existentials.iter().map(|s| s.as_str()).collect();
        Ok(tgd(label, body, &ex, head))
    }
}

/// Parses a constraint file into a validated set.
pub fn parse_constraints(text: &str) -> Result<ConstraintSet, ParseError> {
    let toks = Lexer::new(text).tokens()?;
    let mut p = Parser { toks, pos: 0 };
    let mut out = Vec::new();
    while p.peek().is_some() {
        let c = p.statement(out.len() + 1)?;
        out.push(c);
    }
    Ok(ConstraintSet::new(out)?)
}

/// Parses an instance file. When a schema is supplied, atom arities are
/// checked against it; predicates unknown to the schema are accepted and
/// inferred.
pub fn parse_instance(text: &str, schema: Option<&Schema>) -> Result<Instance, ParseError> {
    let toks = Lexer::new(text).tokens()?;
    let mut p = Parser { toks, pos: 0 };
    let mut inst = Instance::new();
    let mut inferred = Schema::new();
    while p.peek().is_some() {
        let (line, col) = p.here();
        let atom = p.atom(false)?;
        p.expect(&Tok::Dot)?;
        let expected = schema
            .and_then(|s| s.get(&atom.predicate))
            .or_else(|| inferred.get(&atom.predicate));
        if let Some(&ar) = expected {
            if ar != atom.args.len() {
                return Err(ParseError::Syntax {
                    line,
                    col,
                    msg: format!(
                        "predicate {} has arity {}, found {} arguments",
                        atom.predicate,
                        ar,
                        atom.args.len()
                    ),
                });
            }
        } else {
            inferred.insert(atom.predicate.clone(), atom.args.len());
        }
        inst.try_insert(atom)?;
    }
    Ok(inst)
}

/// Canonical text for a constraint set; `parse_constraints` inverts it.
pub fn serialize_constraints(set: &ConstraintSet) -> String {
    let mut out = String::new();
    for c in &set.constraints {
        out.push_str(&c.to_string());
        out.push('\n');
    }
    out
}

/// Canonical text for an instance; `parse_instance` inverts it. Constants are
/// written bare, so they must be identifier-shaped to round-trip.
pub fn serialize_instance(inst: &Instance) -> String {
    let mut out = String::new();
    for a in inst.iter() {
        out.push_str(&a.predicate);
        out.push('(');
        for (i, t) in a.args.iter().enumerate() {
            if i > 0 {
                out.push_str(", ");
            }
            match t {
                Term::Const(c) => out.push_str(c),
                Term::Null(n) => {
                    out.push('_');
                    out.push_str(n);
                }
                Term::Var(_) => unreachable!("instances are ground"),
            }
        }
        out.push_str(").\n");
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::Term;

    #[test]
    fn parses_tgd_with_existential() {
        let set = parse_constraints("a1: S(x2), E(x1,x2) -> exists y: E(y,x1).").unwrap();
        assert_eq!(set.constraints.len(), 1);
        let t = set.constraints[0].as_tgd().unwrap();
        assert_eq!(t.label, "a1");
        assert_eq!(t.body.len(), 2);
        assert_eq!(t.head.len(), 1);
        assert!(t.existentials.contains("y"));
        assert_eq!(set.schema["E"], 2);
        assert_eq!(set.schema["S"], 1);
    }

    #[test]
    fn parses_egd() {
        let set = parse_constraints("e1: T(x,y), T(x,z) -> y = z.").unwrap();
        let e = set.constraints[0].as_egd().unwrap();
        assert_eq!(e.lhs, "y");
        assert_eq!(e.rhs, "z");
    }

    #[test]
    fn parses_empty_body() {
        let set = parse_constraints("b3: true -> exists x,y: S(x), E(x,y).").unwrap();
        let t = set.constraints[0].as_tgd().unwrap();
        assert!(t.body.is_empty());
        assert_eq!(t.existentials.len(), 2);
    }

    #[test]
    fn labels_defaulted_and_quoted_constants() {
        let set = parse_constraints("R(x) -> S(x, 'paris').").unwrap();
        assert_eq!(set.constraints[0].label(), "c1");
        let t = set.constraints[0].as_tgd().unwrap();
        assert_eq!(t.head[0].args[1], Term::Const("paris".into()));
    }

    #[test]
    fn head_variable_not_in_body_is_an_error() {
        let err = parse_constraints("a: R(x) -> S(y).").unwrap_err();
        assert!(matches!(err, ParseError::Model(_)));
    }

    #[test]
    fn equality_atoms_cannot_appear_in_bodies() {
        assert!(parse_constraints("a: x = y -> S(x).").is_err());
    }

    #[test]
    fn syntax_error_carries_position() {
        match parse_constraints("a: R(x -> S(x).") {
            Err(ParseError::Syntax { line, col, .. }) => {
                assert_eq!(line, 1);
                assert!(col > 1);
            }
            other => panic!("expected syntax error, got {:?}", other),
        }
    }

    #[test]
    fn parses_instance_atoms() {
        let inst = parse_instance("R(a).\nE(a, _n1). # trailing comment\n", None).unwrap();
        assert_eq!(inst.len(), 2);
        assert!(inst.contains(&Atom::new(
            "E",
            vec![Term::Const("a".into()), Term::Null("n1".into())]
        )));
    }

    #[test]
    fn empty_instance_file() {
        let inst = parse_instance("", None).unwrap();
        assert!(inst.is_empty());
    }

    #[test]
    fn instance_arity_checked_against_schema() {
        let set = parse_constraints("a: R(x,y) -> S(x).").unwrap();
        assert!(parse_instance("R(a).", Some(&set.schema)).is_err());
        assert!(parse_instance("R(a,b).", Some(&set.schema)).is_ok());
    }

    #[test]
    fn constraint_round_trip() {
        let text = "a1: S(x2), E(x1,x2) -> exists y: E(y,x1).\n\
                    e1: T(x,y), T(x,z) -> y = z.\n\
                    b3: true -> exists x, y: S(x), E(x,y).\n\
                    c: R(x) -> W(x, 'paris').\n";
        let set = parse_constraints(text).unwrap();
        let again = parse_constraints(&serialize_constraints(&set)).unwrap();
        assert_eq!(set, again);
    }

    #[test]
    fn instance_round_trip() {
        let inst = parse_instance("R(a). E(a, _n1). E(_n1, _n2).", None).unwrap();
        let again = parse_instance(&serialize_instance(&inst), None).unwrap();
        assert_eq!(inst, again);
    }
}
