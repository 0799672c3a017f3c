//! Parser for the Prolog-like surface syntax (`.ncsp` files).
//!
//! Clauses separate constraint atoms from program atoms with a semicolon,
//! constraints first: `head :- guard ; body.` A guard-only clause ends in
//! `;.` and a plain fact in `.`. Domain constraints are written in bra-ket
//! style `<lo|X|hi>` with `-inf` / `inf` / `+inf` for missing bounds;
//! arithmetic constraints are `sum/3`, `prod/3`, `inv/2` or infix
//! (in)equalities over `+ - * /`. Terms use `:` for pairs and a
//! right-associative `.` for list cells ending in `nil`; a `.` followed by
//! layout terminates the clause instead. `%` starts a comment. The
//! inventory directive `:- inventory(part:qty, ...).` declares stock for
//! the `merge/3` built-in.

use crate::decompose::{ArithExpr, NumConstraint, RelOp};
use crate::logic::Term;
use std::collections::BTreeMap;
use std::fmt;

/// One goal-list entry: a program atom or one of the constraint forms.
#[derive(Clone, Debug, PartialEq, Eq)]
pub enum GoalAtom {
    Prog(Term),
    /// `<lo|X|hi>`
    Braket { lo: Endpoint, var: String, hi: Endpoint },
    /// `sum(a,b,c)`, `prod(a,b,c)`, `inv(a,b)` with expression arguments
    PrimCall { kind: PrimKind, args: Vec<ArithExpr> },
    /// infix relation over arithmetic expressions
    Rel(NumConstraint),
    /// engine-internal: membership emitted by unification (never parsed)
    DomainIn(String, crate::interval::Interval),
    /// engine-internal: numeric equality emitted by unification
    EqVars(String, String),
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum PrimKind {
    Sum,
    Prod,
    Inv,
}

impl PrimKind {
    pub fn arity(self) -> usize {
        match self {
            PrimKind::Sum | PrimKind::Prod => 3,
            PrimKind::Inv => 2,
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            PrimKind::Sum => "sum",
            PrimKind::Prod => "prod",
            PrimKind::Inv => "inv",
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub enum Endpoint {
    NegInf,
    PosInf,
    Dec(String),
}

impl fmt::Display for Endpoint {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Endpoint::NegInf => write!(f, "-inf"),
            Endpoint::PosInf => write!(f, "+inf"),
            Endpoint::Dec(s) => write!(f, "{s}"),
        }
    }
}

/// A guarded Horn clause. The numeric variable set is computed at parse
/// time: a variable is numeric when it occurs in any constraint-atom
/// position (bra-ket subject or arithmetic argument).
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Clause {
    pub head: Term,
    pub guard: Vec<GoalAtom>,
    pub body: Vec<GoalAtom>,
    pub numeric: Vec<String>,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Query {
    pub guard: Vec<GoalAtom>,
    pub body: Vec<GoalAtom>,
    pub numeric: Vec<String>,
}

#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct SourceProgram {
    pub inventory: BTreeMap<String, u64>,
    pub clauses: Vec<Clause>,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct ParseError {
    pub line: usize,
    pub col: usize,
    pub message: String,
}

impl fmt::Display for ParseError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}:{}: {}", self.line, self.col, self.message)
    }
}

impl std::error::Error for ParseError {}

#[derive(Clone, Debug, PartialEq, Eq)]
enum Tok {
    LIdent(String),
    UIdent(String),
    Num(String),
    LParen,
    RParen,
    Comma,
    Semi,
    Pipe,
    Lt,
    Gt,
    Plus,
    Minus,
    Star,
    Slash,
    Eq,
    Le,
    Ge,
    ColonDash,
    Colon,
    ConsDot,
    ClauseDot,
}

impl fmt::Display for Tok {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Tok::LIdent(s) | Tok::UIdent(s) | Tok::Num(s) => write!(f, "{s}"),
            Tok::LParen => write!(f, "("),
            Tok::RParen => write!(f, ")"),
            Tok::Comma => write!(f, ","),
            Tok::Semi => write!(f, ";"),
            Tok::Pipe => write!(f, "|"),
            Tok::Lt => write!(f, "<"),
            Tok::Gt => write!(f, ">"),
            Tok::Plus => write!(f, "+"),
            Tok::Minus => write!(f, "-"),
            Tok::Star => write!(f, "*"),
            Tok::Slash => write!(f, "/"),
            Tok::Eq => write!(f, "="),
            Tok::Le => write!(f, "=<"),
            Tok::Ge => write!(f, ">="),
            Tok::ColonDash => write!(f, ":-"),
            Tok::Colon => write!(f, ":"),
            Tok::ConsDot => write!(f, "."),
            Tok::ClauseDot => write!(f, "."),
        }
    }
}

struct Lexer<'a> {
    src: &'a [u8],
    pos: usize,
    line: usize,
    col: usize,
}

impl<'a> Lexer<'a> {
    fn new(src: &'a str) -> Lexer<'a> {
        Lexer { src: src.as_bytes(), pos: 0, line: 1, col: 1 }
    }

    fn error(&self, message: impl Into<String>) -> ParseError {
        ParseError { line: self.line, col: self.col, message: message.into() }
    }

    fn bump(&mut self) -> u8 {
        let c = self.src[self.pos];
        self.pos += 1;
        if c == b'\n' {
            self.line += 1;
            self.col = 1;
        } else {
            self.col += 1;
        }
        c
    }

    fn peek(&self) -> Option<u8> {
        self.src.get(self.pos).copied()
    }

    fn peek2(&self) -> Option<u8> {
        self.src.get(self.pos + 1).copied()
    }

    fn skip_layout(&mut self) {
        loop {
            match self.peek() {
                Some(c) if c.is_ascii_whitespace() => {
                    self.bump();
                }
                Some(b'%') => {
                    while let Some(c) = self.peek() {
                        if c == b'\n' {
                            break;
                        }
                        self.bump();
                    }
                }
                _ => break,
            }
        }
    }

    fn lex(mut self) -> Result<Vec<(Tok, usize, usize)>, ParseError> {
        let mut out = Vec::new();
        loop {
            self.skip_layout();
            let (line, col) = (self.line, self.col);
            let c = match self.peek() {
                None => return Ok(out),
                Some(c) => c,
            };
            let tok = match c {
                b'(' => {
                    self.bump();
                    Tok::LParen
                }
                b')' => {
                    self.bump();
                    Tok::RParen
                }
                b',' => {
                    self.bump();
                    Tok::Comma
                }
                b';' => {
                    self.bump();
                    Tok::Semi
                }
                b'|' => {
                    self.bump();
                    Tok::Pipe
                }
                b'<' => {
                    self.bump();
                    Tok::Lt
                }
                b'>' => {
                    self.bump();
                    if self.peek() == Some(b'=') {
                        self.bump();
                        Tok::Ge
                    } else {
                        Tok::Gt
                    }
                }
                b'+' => {
                    self.bump();
                    Tok::Plus
                }
                b'-' => {
                    self.bump();
                    Tok::Minus
                }
                b'*' => {
                    self.bump();
                    Tok::Star
                }
                b'/' => {
                    self.bump();
                    Tok::Slash
                }
                b'=' => {
                    self.bump();
                    if self.peek() == Some(b'<') {
                        self.bump();
                        Tok::Le
                    } else {
                        Tok::Eq
                    }
                }
                b':' => {
                    self.bump();
                    if self.peek() == Some(b'-') {
                        self.bump();
                        Tok::ColonDash
                    } else {
                        Tok::Colon
                    }
                }
                b'.' => {
                    self.bump();
                    // a dot followed by layout, a comment, or end of input
                    // terminates the clause; otherwise it is the list cell
                    // operator
                    match self.peek() {
                        None | Some(b'%') => Tok::ClauseDot,
                        Some(c) if c.is_ascii_whitespace() => Tok::ClauseDot,
                        _ => Tok::ConsDot,
                    }
                }
                b'0'..=b'9' => {
                    let mut s = String::new();
                    while matches!(self.peek(), Some(b'0'..=b'9')) {
                        s.push(self.bump() as char);
                    }
                    // fraction only when a digit follows the dot, so that
                    // "1." still closes a clause
                    if self.peek() == Some(b'.') && matches!(self.peek2(), Some(b'0'..=b'9')) {
                        s.push(self.bump() as char);
                        while matches!(self.peek(), Some(b'0'..=b'9')) {
                            s.push(self.bump() as char);
                        }
                    }
                    if matches!(self.peek(), Some(b'e') | Some(b'E')) {
                        let mark = self.pos;
                        let mut e = String::new();
                        e.push(self.bump() as char);
                        if matches!(self.peek(), Some(b'+') | Some(b'-')) {
                            e.push(self.bump() as char);
                        }
                        if matches!(self.peek(), Some(b'0'..=b'9')) {
                            while matches!(self.peek(), Some(b'0'..=b'9')) {
                                e.push(self.bump() as char);
                            }
                            s.push_str(&e);
                        } else {
                            // not an exponent after all (e.g. "2e" as atom?)
                            self.pos = mark;
                        }
                    }
                    Tok::Num(s)
                }
                b'a'..=b'z' => {
                    let mut s = String::new();
                    while matches!(self.peek(), Some(c) if c.is_ascii_alphanumeric() || c == b'_') {
                        s.push(self.bump() as char);
                    }
                    Tok::LIdent(s)
                }
                b'A'..=b'Z' | b'_' => {
                    let mut s = String::new();
                    while matches!(self.peek(), Some(c) if c.is_ascii_alphanumeric() || c == b'_') {
                        s.push(self.bump() as char);
                    }
                    Tok::UIdent(s)
                }
                other => return Err(self.error(format!("unexpected character {:?}", other as char))),
            };
            out.push((tok, line, col));
        }
    }
}

struct Parser {
    toks: Vec<(Tok, usize, usize)>,
    pos: usize,
    anon: u64,
}

impl Parser {
    fn new(src: &str) -> Result<Parser, ParseError> {
        Ok(Parser { toks: Lexer::new(src).lex()?, pos: 0, anon: 0 })
    }

    fn error_here(&self, message: impl Into<String>) -> ParseError {
        let (line, col) = self
            .toks
            .get(self.pos)
            .map(|&(_, l, c)| (l, c))
            .or_else(|| self.toks.last().map(|&(_, l, c)| (l, c + 1)))
            .unwrap_or((1, 1));
        ParseError { line, col, message: message.into() }
    }

    fn peek(&self) -> Option<&Tok> {
        self.toks.get(self.pos).map(|(t, _, _)| t)
    }

    fn at_end(&self) -> bool {
        self.pos >= self.toks.len()
    }

    fn next(&mut self) -> Result<Tok, ParseError> {
        match self.toks.get(self.pos) {
            Some((t, _, _)) => {
                let t = t.clone();
                self.pos += 1;
                Ok(t)
            }
            None => Err(self.error_here("unexpected end of input")),
        }
    }

    fn expect(&mut self, want: &Tok, what: &str) -> Result<(), ParseError> {
        match self.peek() {
            Some(t) if t == want => {
                self.pos += 1;
                Ok(())
            }
            Some(t) => Err(self.error_here(format!("expected {what}, found `{t}`"))),
            None => Err(self.error_here(format!("expected {what} at end of input"))),
        }
    }

    fn eat(&mut self, want: &Tok) -> bool {
        if self.peek() == Some(want) {
            self.pos += 1;
            true
        } else {
            false
        }
    }

    // ----- terms -----

    fn term(&mut self) -> Result<Term, ParseError> {
        let head = self.pair_term()?;
        if self.eat(&Tok::ConsDot) {
            let tail = self.term()?; // right associative
            Ok(Term::cons(head, tail))
        } else {
            Ok(head)
        }
    }

    fn pair_term(&mut self) -> Result<Term, ParseError> {
        let left = self.primary_term()?;
        if self.eat(&Tok::Colon) {
            let right = self.primary_term()?;
            Ok(Term::pair(left, right))
        } else {
            Ok(left)
        }
    }

    fn primary_term(&mut self) -> Result<Term, ParseError> {
        match self.peek().cloned() {
            Some(Tok::UIdent(v)) => {
                self.pos += 1;
                if v == "_" {
                    self.anon += 1;
                    Ok(Term::Var(format!("_G{}", self.anon)))
                } else {
                    Ok(Term::Var(v))
                }
            }
            Some(Tok::Num(n)) => {
                self.pos += 1;
                Ok(Term::Num(n))
            }
            Some(Tok::Minus) => {
                self.pos += 1;
                match self.next()? {
                    Tok::Num(n) => Ok(Term::Num(format!("-{n}"))),
                    t => Err(self.error_here(format!("expected numeral after `-`, found `{t}`"))),
                }
            }
            Some(Tok::LIdent(f)) => {
                self.pos += 1;
                if self.eat(&Tok::LParen) {
                    let mut args = vec![self.term()?];
                    while self.eat(&Tok::Comma) {
                        args.push(self.term()?);
                    }
                    self.expect(&Tok::RParen, "`)`")?;
                    Ok(Term::App(f, args))
                } else {
                    Ok(Term::atom(&f))
                }
            }
            Some(Tok::LParen) => {
                self.pos += 1;
                let t = self.term()?;
                self.expect(&Tok::RParen, "`)`")?;
                Ok(t)
            }
            Some(t) => Err(self.error_here(format!("expected a term, found `{t}`"))),
            None => Err(self.error_here("expected a term at end of input")),
        }
    }

    // ----- arithmetic expressions -----

    fn arith_expr(&mut self) -> Result<ArithExpr, ParseError> {
        let mut acc = self.arith_mul()?;
        loop {
            if self.eat(&Tok::Plus) {
                let rhs = self.arith_mul()?;
                acc = ArithExpr::Add(Box::new(acc), Box::new(rhs));
            } else if self.eat(&Tok::Minus) {
                let rhs = self.arith_mul()?;
                acc = ArithExpr::Sub(Box::new(acc), Box::new(rhs));
            } else {
                return Ok(acc);
            }
        }
    }

    fn arith_mul(&mut self) -> Result<ArithExpr, ParseError> {
        let mut acc = self.arith_unary()?;
        loop {
            if self.eat(&Tok::Star) {
                let rhs = self.arith_unary()?;
                acc = ArithExpr::Mul(Box::new(acc), Box::new(rhs));
            } else if self.eat(&Tok::Slash) {
                let rhs = self.arith_unary()?;
                acc = ArithExpr::Div(Box::new(acc), Box::new(rhs));
            } else {
                return Ok(acc);
            }
        }
    }

    fn arith_unary(&mut self) -> Result<ArithExpr, ParseError> {
        if self.eat(&Tok::Minus) {
            // fold a leading minus into a constant, keep Neg elsewhere
            if let Some(Tok::Num(n)) = self.peek().cloned() {
                self.pos += 1;
                return Ok(ArithExpr::Const(format!("-{n}")));
            }
            let e = self.arith_unary()?;
            return Ok(ArithExpr::Neg(Box::new(e)));
        }
        match self.peek().cloned() {
            Some(Tok::Num(n)) => {
                self.pos += 1;
                Ok(ArithExpr::Const(n))
            }
            Some(Tok::UIdent(v)) => {
                self.pos += 1;
                Ok(ArithExpr::Var(v))
            }
            Some(Tok::LParen) => {
                self.pos += 1;
                let e = self.arith_expr()?;
                self.expect(&Tok::RParen, "`)`")?;
                Ok(e)
            }
            Some(t) => Err(self.error_here(format!(
                "expected a numeral, variable or `(` in arithmetic, found `{t}`"
            ))),
            None => Err(self.error_here("expected arithmetic expression at end of input")),
        }
    }

    // ----- goal atoms -----

    fn endpoint(&mut self) -> Result<Endpoint, ParseError> {
        match self.next()? {
            Tok::Minus => match self.next()? {
                Tok::Num(n) => Ok(Endpoint::Dec(format!("-{n}"))),
                Tok::LIdent(s) if s == "inf" => Ok(Endpoint::NegInf),
                t => Err(self.error_here(format!("expected numeral or `inf` after `-`, found `{t}`"))),
            },
            Tok::Plus => match self.next()? {
                Tok::Num(n) => Ok(Endpoint::Dec(n)),
                Tok::LIdent(s) if s == "inf" => Ok(Endpoint::PosInf),
                t => Err(self.error_here(format!("expected numeral or `inf` after `+`, found `{t}`"))),
            },
            Tok::Num(n) => Ok(Endpoint::Dec(n)),
            Tok::LIdent(s) if s == "inf" => Ok(Endpoint::PosInf),
            t => Err(self.error_here(format!("expected an interval endpoint, found `{t}`"))),
        }
    }

    /// True when a relation operator occurs before the atom ends (at
    /// parenthesis depth zero), which makes the atom an arithmetic
    /// (in)equality rather than a program atom.
    fn lookahead_relation(&self) -> bool {
        let mut depth = 0usize;
        for (t, _, _) in &self.toks[self.pos..] {
            match t {
                Tok::LParen => depth += 1,
                Tok::RParen => {
                    if depth == 0 {
                        return false;
                    }
                    depth -= 1;
                }
                Tok::Comma | Tok::Semi | Tok::ClauseDot if depth == 0 => return false,
                Tok::Eq | Tok::Le | Tok::Ge if depth == 0 => return true,
                _ => {}
            }
        }
        false
    }

    fn goal_atom(&mut self) -> Result<GoalAtom, ParseError> {
        match self.peek().cloned() {
            Some(Tok::Lt) => {
                self.pos += 1;
                let lo = self.endpoint()?;
                self.expect(&Tok::Pipe, "`|`")?;
                let var = match self.next()? {
                    Tok::UIdent(v) => v,
                    t => return Err(self.error_here(format!("expected a variable in bra-ket, found `{t}`"))),
                };
                self.expect(&Tok::Pipe, "`|`")?;
                let hi = self.endpoint()?;
                self.expect(&Tok::Gt, "`>`")?;
                Ok(GoalAtom::Braket { lo, var, hi })
            }
            Some(Tok::LIdent(f)) if prim_kind(&f).is_some() && !self.lookahead_relation() => {
                self.pos += 1;
                let kind = prim_kind(&f).unwrap();
                self.expect(&Tok::LParen, "`(`")?;
                let mut args = vec![self.arith_expr()?];
                while self.eat(&Tok::Comma) {
                    args.push(self.arith_expr()?);
                }
                self.expect(&Tok::RParen, "`)`")?;
                if args.len() != kind.arity() {
                    return Err(self.error_here(format!(
                        "{} takes {} arguments, found {}",
                        kind.name(),
                        kind.arity(),
                        args.len()
                    )));
                }
                Ok(GoalAtom::PrimCall { kind, args })
            }
            _ if self.lookahead_relation() => {
                let lhs = self.arith_expr()?;
                let rel = match self.next()? {
                    Tok::Eq => RelOp::Eq,
                    Tok::Le => RelOp::Le,
                    Tok::Ge => RelOp::Ge,
                    t => return Err(self.error_here(format!("expected a relation, found `{t}`"))),
                };
                let rhs = self.arith_expr()?;
                Ok(GoalAtom::Rel(NumConstraint { lhs, rel, rhs }))
            }
            Some(Tok::LIdent(_)) => {
                let t = self.primary_term()?;
                match &t {
                    Term::App(_, _) => Ok(GoalAtom::Prog(t)),
                    _ => Err(self.error_here("expected a program atom")),
                }
            }
            Some(t) => Err(self.error_here(format!("expected a goal atom, found `{t}`"))),
            None => Err(self.error_here("expected a goal atom at end of input")),
        }
    }

    fn goal_list(&mut self) -> Result<Vec<GoalAtom>, ParseError> {
        let mut atoms = vec![self.goal_atom()?];
        while self.eat(&Tok::Comma) {
            atoms.push(self.goal_atom()?);
        }
        Ok(atoms)
    }

    /// `guard ; body` | `guard ;` | `body` (no semicolon).
    fn guard_and_body(&mut self) -> Result<(Vec<GoalAtom>, Vec<GoalAtom>), ParseError> {
        if self.eat(&Tok::Semi) {
            // empty guard written `:- ; body.`
            let body = if self.peek() == Some(&Tok::ClauseDot) { Vec::new() } else { self.goal_list()? };
            return Ok((Vec::new(), body));
        }
        let first = self.goal_list()?;
        if self.eat(&Tok::Semi) {
            for a in &first {
                if matches!(a, GoalAtom::Prog(_)) {
                    return Err(self.error_here("program atom in the constraint part (before `;`)"));
                }
            }
            let body = if self.peek() == Some(&Tok::ClauseDot) { Vec::new() } else { self.goal_list()? };
            Ok((first, body))
        } else {
            // no separator: a plain body with constraints inline
            Ok((Vec::new(), first))
        }
    }

    fn head(&mut self) -> Result<Term, ParseError> {
        match self.peek().cloned() {
            Some(Tok::LIdent(_)) => {
                let t = self.primary_term()?;
                match &t {
                    Term::App(_, _) => Ok(t),
                    _ => Err(self.error_here("clause head must be a program atom")),
                }
            }
            Some(t) => Err(self.error_here(format!("expected a clause head, found `{t}`"))),
            None => Err(self.error_here("expected a clause head at end of input")),
        }
    }

    fn directive(&mut self, program: &mut SourceProgram) -> Result<(), ParseError> {
        // `:-` already consumed, next is `inventory`
        self.expect(&Tok::LParen, "`(`")?;
        loop {
            let part = match self.next()? {
                Tok::LIdent(p) => p,
                t => return Err(self.error_here(format!("expected a part name, found `{t}`"))),
            };
            self.expect(&Tok::Colon, "`:`")?;
            let qty = match self.next()? {
                Tok::Num(n) => n
                    .parse::<u64>()
                    .map_err(|_| self.error_here(format!("inventory quantity `{n}` is not a whole number")))?,
                t => return Err(self.error_here(format!("expected a quantity, found `{t}`"))),
            };
            program.inventory.insert(part, qty);
            if !self.eat(&Tok::Comma) {
                break;
            }
        }
        self.expect(&Tok::RParen, "`)`")?;
        self.expect(&Tok::ClauseDot, "`.`")?;
        Ok(())
    }

    fn program(&mut self) -> Result<SourceProgram, ParseError> {
        let mut program = SourceProgram::default();
        while !self.at_end() {
            if self.eat(&Tok::ColonDash) {
                match self.peek().cloned() {
                    Some(Tok::LIdent(d)) if d == "inventory" => {
                        self.pos += 1;
                        self.directive(&mut program)?;
                    }
                    _ => return Err(self.error_here("only the `inventory` directive is supported in programs")),
                }
                continue;
            }
            let head = self.head()?;
            let (guard, body) = if self.eat(&Tok::ColonDash) {
                self.guard_and_body()?
            } else {
                (Vec::new(), Vec::new())
            };
            self.expect(&Tok::ClauseDot, "`.` to end the clause")?;
            program.clauses.push(make_clause(head, guard, body));
        }
        Ok(program)
    }

    fn query(&mut self) -> Result<Query, ParseError> {
        // the `:-` prefix is conventional but optional
        let _ = self.eat(&Tok::ColonDash);
        let (guard, body) = self.guard_and_body()?;
        self.expect(&Tok::ClauseDot, "`.` to end the query")?;
        if !self.at_end() {
            return Err(self.error_here("trailing input after the query"));
        }
        let numeric = numeric_vars(guard.iter().chain(&body));
        Ok(Query { guard, body, numeric })
    }
}

fn prim_kind(name: &str) -> Option<PrimKind> {
    match name {
        "sum" => Some(PrimKind::Sum),
        "prod" => Some(PrimKind::Prod),
        "inv" => Some(PrimKind::Inv),
        _ => None,
    }
}

fn make_clause(head: Term, guard: Vec<GoalAtom>, body: Vec<GoalAtom>) -> Clause {
    let numeric = numeric_vars(guard.iter().chain(&body));
    Clause { head, guard, body, numeric }
}

/// Variables occurring in constraint-atom positions.
pub fn numeric_vars<'a>(atoms: impl Iterator<Item = &'a GoalAtom>) -> Vec<String> {
    let mut out = Vec::new();
    let mut add = |v: &str| {
        if !out.iter().any(|w| w == v) {
            out.push(v.to_string());
        }
    };
    for atom in atoms {
        match atom {
            GoalAtom::Braket { var, .. } => add(var),
            GoalAtom::PrimCall { args, .. } => {
                for a in args {
                    let mut vs = Vec::new();
                    a.variables(&mut vs);
                    for v in vs {
                        add(&v);
                    }
                }
            }
            GoalAtom::Rel(nc) => {
                let mut vs = Vec::new();
                nc.lhs.variables(&mut vs);
                nc.rhs.variables(&mut vs);
                for v in vs {
                    add(&v);
                }
            }
            GoalAtom::DomainIn(v, _) => add(v),
            GoalAtom::EqVars(a, b) => {
                add(a);
                add(b);
            }
            GoalAtom::Prog(_) => {}
        }
    }
    out
}

pub fn parse_program(text: &str) -> Result<SourceProgram, ParseError> {
    Parser::new(text)?.program()
}

pub fn parse_query(text: &str) -> Result<Query, ParseError> {
    Parser::new(text)?.query()
}

// ----- pretty printing (round-trip tested) -----

impl fmt::Display for GoalAtom {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            GoalAtom::Prog(t) => write!(f, "{t}"),
            GoalAtom::Braket { lo, var, hi } => write!(f, "<{lo}|{var}|{hi}>"),
            GoalAtom::PrimCall { kind, args } => {
                write!(f, "{}(", kind.name())?;
                for (i, a) in args.iter().enumerate() {
                    if i > 0 {
                        write!(f, ", ")?;
                    }
                    write!(f, "{}", print_arith(a))?;
                }
                write!(f, ")")
            }
            GoalAtom::Rel(nc) => {
                write!(f, "{} {} {}", print_arith(&nc.lhs), nc.rel, print_arith(&nc.rhs))
            }
            GoalAtom::DomainIn(v, a) => write!(f, "{v} in {a}"),
            GoalAtom::EqVars(a, b) => write!(f, "{a} = {b}"),
        }
    }
}

/// Arithmetic with explicit parentheses everywhere compound, so the
/// printed form re-parses to the identical tree.
fn print_arith(e: &ArithExpr) -> String {
    match e {
        ArithExpr::Var(v) => v.clone(),
        ArithExpr::Const(c) => c.clone(),
        ArithExpr::Neg(a) => format!("-({})", print_arith(a)),
        ArithExpr::Add(a, b) => format!("({} + {})", print_arith(a), print_arith(b)),
        ArithExpr::Sub(a, b) => format!("({} - {})", print_arith(a), print_arith(b)),
        ArithExpr::Mul(a, b) => format!("({} * {})", print_arith(a), print_arith(b)),
        ArithExpr::Div(a, b) => format!("({} / {})", print_arith(a), print_arith(b)),
    }
}

impl fmt::Display for Clause {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.head)?;
        if self.guard.is_empty() && self.body.is_empty() {
            return write!(f, ".");
        }
        write!(f, " :- ")?;
        for (i, g) in self.guard.iter().enumerate() {
            if i > 0 {
                write!(f, ", ")?;
            }
            write!(f, "{g}")?;
        }
        write!(f, ";")?;
        for (i, b) in self.body.iter().enumerate() {
            if i > 0 {
                write!(f, ", ")?;
            } else {
                write!(f, " ")?;
            }
            write!(f, "{b}")?;
        }
        write!(f, ".")
    }
}

impl fmt::Display for SourceProgram {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if !self.inventory.is_empty() {
            write!(f, ":- inventory(")?;
            for (i, (p, q)) in self.inventory.iter().enumerate() {
                if i > 0 {
                    write!(f, ", ")?;
                }
                write!(f, "{p}:{q}")?;
            }
            writeln!(f, ").")?;
        }
        for c in &self.clauses {
            writeln!(f, "{c}")?;
        }
        Ok(())
    }
}
