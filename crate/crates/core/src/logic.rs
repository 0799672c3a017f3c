//! Herbrand terms, substitutions, and unification with occurs check.
//!
//! Numeric leaves do not unify structurally: a numeric-classified variable
//! meeting a numeric literal emits a membership constraint, and two
//! numeric variables meeting emit an equality constraint, both handed to
//! the constraint store instead of the binding environment. That keeps
//! every numeric fact inside the interval machinery where rounding is
//! controlled.

use crate::interval::{decimal_to_rational, parse_decimal_outward, Interval};
use std::collections::HashMap;
use std::fmt;

/// A term: variable, numeric literal (source text retained), or compound.
/// Atoms are zero-arity compounds; pairs and cons cells are the binary
/// compounds `:` and `.` with the atom `nil` closing lists.
#[derive(Clone, Debug, PartialEq, Eq)]
pub enum Term {
    Var(String),
    Num(String),
    App(String, Vec<Term>),
}

impl Term {
    pub fn atom(name: &str) -> Term {
        Term::App(name.to_string(), Vec::new())
    }

    pub fn var(name: &str) -> Term {
        Term::Var(name.to_string())
    }

    pub fn nil() -> Term {
        Term::atom("nil")
    }

    pub fn pair(a: Term, b: Term) -> Term {
        Term::App(":".to_string(), vec![a, b])
    }

    pub fn cons(head: Term, tail: Term) -> Term {
        Term::App(".".to_string(), vec![head, tail])
    }

    pub fn functor(&self) -> Option<(&str, usize)> {
        match self {
            Term::App(f, args) => Some((f.as_str(), args.len())),
            _ => None,
        }
    }

    pub fn is_ground(&self) -> bool {
        match self {
            Term::Var(_) => false,
            Term::Num(_) => true,
            Term::App(_, args) => args.iter().all(Term::is_ground),
        }
    }

    pub fn variables(&self, out: &mut Vec<String>) {
        match self {
            Term::Var(v) => {
                if !out.iter().any(|w| w == v) {
                    out.push(v.clone());
                }
            }
            Term::Num(_) => {}
            Term::App(_, args) => {
                for a in args {
                    a.variables(out);
                }
            }
        }
    }

    fn contains_var(&self, name: &str) -> bool {
        match self {
            Term::Var(v) => v == name,
            Term::Num(_) => false,
            Term::App(_, args) => args.iter().any(|a| a.contains_var(name)),
        }
    }

    /// Rename every variable by appending `_<k>` (fresh per derivation
    /// step, so two uses of one clause constrain distinct variables).
    pub fn rename_apart(&self, k: u64) -> Term {
        match self {
            Term::Var(v) => Term::Var(format!("{v}_{k}")),
            Term::Num(_) => self.clone(),
            Term::App(f, args) => {
                Term::App(f.clone(), args.iter().map(|a| a.rename_apart(k)).collect())
            }
        }
    }
}

impl fmt::Display for Term {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Term::Var(v) => write!(f, "{v}"),
            Term::Num(n) => write!(f, "{n}"),
            Term::App(op, args) if op == ":" && args.len() == 2 => {
                write!(f, "{}:{}", args[0], args[1])
            }
            Term::App(op, args) if op == "." && args.len() == 2 => {
                // cons cells print with parenthesized heads: (a:1).(b:2).nil
                write!(f, "({}).{}", args[0], args[1])
            }
            Term::App(name, args) if args.is_empty() => write!(f, "{name}"),
            Term::App(name, args) => {
                write!(f, "{name}(")?;
                for (i, a) in args.iter().enumerate() {
                    if i > 0 {
                        write!(f, ", ")?;
                    }
                    write!(f, "{a}")?;
                }
                write!(f, ")")
            }
        }
    }
}

/// An idempotent binding environment built by unification. Bindings are
/// resolved by walking; no bound variable's term mentions that variable
/// (the occurs check rejects such bindings at creation).
#[derive(Clone, Debug, Default)]
pub struct Subst {
    map: HashMap<String, Term>,
}

impl Subst {
    pub fn new() -> Subst {
        Subst::default()
    }

    pub fn len(&self) -> usize {
        self.map.len()
    }

    pub fn is_empty(&self) -> bool {
        self.map.is_empty()
    }

    /// Follow variable bindings until a non-variable or unbound variable.
    pub fn walk<'a>(&'a self, t: &'a Term) -> &'a Term {
        let mut cur = t;
        while let Term::Var(v) = cur {
            match self.map.get(v) {
                Some(next) => cur = next,
                None => break,
            }
        }
        cur
    }

    /// Apply the substitution everywhere in the term.
    pub fn deep_apply(&self, t: &Term) -> Term {
        let t = self.walk(t);
        match t {
            Term::App(f, args) => {
                Term::App(f.clone(), args.iter().map(|a| self.deep_apply(a)).collect())
            }
            other => other.clone(),
        }
    }

    fn bind(&mut self, v: &str, t: Term) -> Result<(), UnifyFail> {
        // occurs check on the fully resolved term
        let resolved = self.deep_apply(&t);
        if resolved.contains_var(v) {
            return Err(UnifyFail::OccursCheck);
        }
        self.map.insert(v.to_string(), resolved);
        Ok(())
    }
}

/// Numeric facts unification hands to the constraint store instead of the
/// binding environment.
#[derive(Clone, Debug, PartialEq, Eq)]
pub enum NumericLink {
    /// variable constrained to the outward enclosure of a literal
    Membership(String, Interval),
    /// two numeric variables made equal
    Equal(String, String),
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum UnifyFail {
    Clash,
    OccursCheck,
    MalformedNumeral,
}

impl fmt::Display for UnifyFail {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            UnifyFail::Clash => write!(f, "terms do not unify"),
            UnifyFail::OccursCheck => write!(f, "occurs check"),
            UnifyFail::MalformedNumeral => write!(f, "malformed numeral"),
        }
    }
}

/// Structural unification with occurs check, extending `subst` in place on
/// success (callers clone beforehand when they need to backtrack).
/// `is_numeric` classifies variables; numeric pairs come back in `links`.
pub fn unify(
    t1: &Term,
    t2: &Term,
    subst: &mut Subst,
    is_numeric: &dyn Fn(&str) -> bool,
    links: &mut Vec<NumericLink>,
) -> Result<(), UnifyFail> {
    let a = subst.walk(t1).clone();
    let b = subst.walk(t2).clone();
    match (&a, &b) {
        (Term::Var(x), Term::Var(y)) if x == y => Ok(()),
        (Term::Var(x), Term::Var(y)) => match (is_numeric(x), is_numeric(y)) {
            (true, true) => {
                links.push(NumericLink::Equal(x.clone(), y.clone()));
                Ok(())
            }
            // bind the non-numeric one so the numeric identity survives
            (true, false) => subst.bind(y, a.clone()),
            _ => subst.bind(x, b.clone()),
        },
        (Term::Var(x), Term::Num(n)) | (Term::Num(n), Term::Var(x)) => {
            if is_numeric(x) {
                let enclosure =
                    parse_decimal_outward(n).map_err(|_| UnifyFail::MalformedNumeral)?;
                links.push(NumericLink::Membership(x.clone(), enclosure));
                Ok(())
            } else {
                subst.bind(x, Term::Num(n.clone()))
            }
        }
        (Term::Var(x), t @ Term::App(_, _)) | (t @ Term::App(_, _), Term::Var(x)) => {
            if is_numeric(x) {
                // a real-valued variable never denotes a tree
                Err(UnifyFail::Clash)
            } else {
                subst.bind(x, t.clone())
            }
        }
        (Term::Num(m), Term::Num(n)) => {
            // numerals denote exact decimal values; compare those
            let (vm, vn) = (
                decimal_to_rational(m).map_err(|_| UnifyFail::MalformedNumeral)?,
                decimal_to_rational(n).map_err(|_| UnifyFail::MalformedNumeral)?,
            );
            if vm == vn {
                Ok(())
            } else {
                Err(UnifyFail::Clash)
            }
        }
        (Term::Num(_), Term::App(_, _)) | (Term::App(_, _), Term::Num(_)) => Err(UnifyFail::Clash),
        (Term::App(f, xs), Term::App(g, ys)) => {
            if f != g || xs.len() != ys.len() {
                return Err(UnifyFail::Clash);
            }
            for (x, y) in xs.iter().zip(ys) {
                unify(x, y, subst, is_numeric, links)?;
            }
            Ok(())
        }
    }
}
