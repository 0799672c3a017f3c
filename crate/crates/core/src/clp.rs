//! The derivation engine: Horn-clause resolution over guarded clauses,
//! with numeric constraints routed into an interval store.
//!
//! A state carries the remaining goal, the active constraint (one interval
//! per numeric variable), the passive constraint store (primitive
//! constraints), and the Herbrand bindings. The leftmost goal atom drives
//! the next transition: program atoms resolve against clauses (or the
//! `merge/3` built-in), constraint atoms transfer into the store and
//! immediately run propagation, failing the derivation as soon as a
//! domain empties. At an empty goal, branch-and-prune enumeration turns
//! the store into answer boxes.
//!
//! The search explores derivations by iterative deepening on the number
//! of resolution steps, reporting each answer at the level equal to its
//! derivation length. Within a level exploration is depth-first in clause
//! order, so the answer stream is graded by derivation size and
//! deterministic. (A single depth-limited pass would be exploration-order
//! equivalent but diverges on recursive generator programs, whose failing
//! branches spawn unbounded spines of fresh unconstrained variables; the
//! deepening schedule bounds every probe while preserving which
//! derivations exist at each depth.)

use crate::csp::{
    consolidate, enumerate, propagate_raw, Csp, EnumerateOpts, IntervalBox, PropagateOpts,
};
use crate::decompose::{flatten, ArithExpr, FreshNames, NumConstraint};
use crate::dro::Prim;
use crate::interval::{decimal_to_rational, parse_decimal_outward, Interval};
use crate::logic::{unify, NumericLink, Subst, Term};
use crate::parser::{Clause, Endpoint, GoalAtom, PrimKind, Query, SourceProgram};
use std::collections::{BTreeMap, HashMap, HashSet};
use std::fmt;

/// A loaded program: clauses indexed by head predicate and arity, plus the
/// declared part inventory for `merge/3`.
#[derive(Clone, Debug)]
pub struct Program {
    clauses: Vec<Clause>,
    by_pred: HashMap<(String, usize), Vec<usize>>,
    inventory: BTreeMap<String, u64>,
    /// Program atoms each clause adds to the goal (its minimum cost in
    /// future resolution steps).
    prog_counts: Vec<u32>,
}

impl Program {
    pub fn new(source: SourceProgram) -> Program {
        let mut by_pred: HashMap<(String, usize), Vec<usize>> = HashMap::new();
        for (i, c) in source.clauses.iter().enumerate() {
            let (f, n) = c.head.functor().expect("clause heads are compound");
            by_pred.entry((f.to_string(), n)).or_default().push(i);
        }
        let prog_counts = source
            .clauses
            .iter()
            .map(|c| c.guard.iter().chain(&c.body).filter(|a| matches!(a, GoalAtom::Prog(_))).count() as u32)
            .collect();
        Program { clauses: source.clauses, by_pred, inventory: source.inventory, prog_counts }
    }

    pub fn inventory(&self) -> &BTreeMap<String, u64> {
        &self.inventory
    }
}

#[derive(Clone, Copy, Debug)]
pub struct SolveOpts {
    /// Stop splitting answer-box domains below this width.
    pub eps_split: f64,
    /// Propagation re-queue improvement threshold (0 = exact fixpoint).
    pub tau: f64,
    pub max_answers: usize,
    /// Box budget per answer enumeration; exceeding it coarsens the cover
    /// instead of failing (the answer is flagged).
    pub max_boxes: usize,
    /// Resolution steps allowed per derivation.
    pub depth: u32,
    /// Merge adjacent answer boxes.
    pub consolidate: bool,
    pub trace: bool,
}

impl Default for SolveOpts {
    fn default() -> Self {
        SolveOpts {
            eps_split: 1e-6,
            tau: 0.0,
            max_answers: 10,
            max_boxes: 4096,
            depth: 64,
            consolidate: true,
            trace: false,
        }
    }
}

/// One reported answer: bindings for the query variables, boxes over the
/// reported numeric variables (query variables plus numeric variables
/// visible in the bindings), and the residual constraint store.
#[derive(Clone, Debug)]
pub struct Answer {
    pub bindings: Vec<(String, Term)>,
    pub box_vars: Vec<String>,
    pub boxes: Vec<Vec<Interval>>,
    pub residual: Vec<String>,
    /// True when the box budget forced a coarser cover than `eps_split`.
    pub coarse: bool,
    /// Resolution steps in this answer's derivation.
    pub depth: u32,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum SearchStatus {
    /// The whole derivation space within the depth budget was explored.
    Exhausted,
    /// Stopped after `max_answers` answers.
    AnswerLimit,
    /// The depth budget cut unexplored derivations.
    DepthLimit,
}

#[derive(Clone, Debug)]
pub struct SolveResult {
    pub answers: Vec<Answer>,
    pub status: SearchStatus,
    /// Successful derivations (empty goal reached and enumeration produced
    /// a nonempty cover). Equals `answers.len()` unless the answer limit
    /// stopped the search mid-level.
    pub successes: usize,
    pub diagnostics: Vec<String>,
}

pub fn solve(program: &Program, query: &Query, opts: SolveOpts) -> SolveResult {
    let mut answers = Vec::new();
    let mut trace_sink = |_: &str| {};
    let status = solve_with(program, query, opts, &mut |a| answers.push(a), &mut trace_sink);
    SolveResult { answers, status: status.0, successes: status.1, diagnostics: status.2 }
}

/// Streaming form: answers go to `on_answer` as they are found, trace
/// lines (one per transition, prefixed by its name) to `on_trace` when
/// tracing is enabled.
pub fn solve_with(
    program: &Program,
    query: &Query,
    opts: SolveOpts,
    on_answer: &mut dyn FnMut(Answer),
    on_trace: &mut dyn FnMut(&str),
) -> (SearchStatus, usize, Vec<String>) {
    let mut query_vars = Vec::new();
    for atom in query.guard.iter().chain(&query.body) {
        goal_atom_vars(atom, &mut query_vars);
    }
    let mut engine = Engine {
        program,
        opts,
        query_numeric: query.numeric.iter().cloned().collect(),
        query_vars,
        level: 0,
        cut: false,
        emitted: 0,
        successes: 0,
        diagnostics: Vec::new(),
        on_answer,
        on_trace,
    };
    let goal: Vec<GoalAtom> = query.guard.iter().chain(&query.body).cloned().collect();
    let pending = goal.iter().filter(|a| matches!(a, GoalAtom::Prog(_))).count() as u32;
    let init = State {
        goal,
        num: NumSpace::default(),
        subst: Subst::new(),
        steps: 0,
        pending,
        renames: 0,
        aux: 0,
    };
    let mut status = SearchStatus::Exhausted;
    for level in 0..=opts.depth {
        engine.level = level;
        engine.cut = false;
        if engine.dfs(init.clone()) == Flow::Stop {
            status = SearchStatus::AnswerLimit;
            break;
        }
        if !engine.cut {
            status = SearchStatus::Exhausted;
            break;
        }
        status = SearchStatus::DepthLimit;
    }
    engine.diagnostics.sort();
    engine.diagnostics.dedup();
    (status, engine.successes, engine.diagnostics)
}

/// The numeric side of a state: named variables with their interval
/// domains (the active constraint) and the primitive store with its
/// variable adjacency (the passive constraint).
#[derive(Clone, Debug, Default)]
struct NumSpace {
    names: Vec<String>,
    ids: HashMap<String, usize>,
    doms: Vec<Interval>,
    prims: Vec<Prim>,
    adj: Vec<Vec<usize>>,
}

impl NumSpace {
    fn ensure(&mut self, name: &str) -> usize {
        if let Some(&id) = self.ids.get(name) {
            return id;
        }
        let id = self.names.len();
        self.names.push(name.to_string());
        self.ids.insert(name.to_string(), id);
        self.doms.push(Interval::FULL);
        self.adj.push(Vec::new());
        id
    }

    /// Append a primitive (deduplicated); returns its index when new.
    fn push_prim(&mut self, p: Prim) -> Option<usize> {
        if self.prims.contains(&p) {
            return None;
        }
        let ci = self.prims.len();
        for v in p.vars() {
            if !self.adj[v].contains(&ci) {
                self.adj[v].push(ci);
            }
        }
        self.prims.push(p);
        Some(ci)
    }

    /// Run propagation seeded with the given constraints; `false` means a
    /// domain emptied.
    fn infer(&mut self, seed: &[usize], tau: f64) -> bool {
        if seed.is_empty() {
            return true;
        }
        let boxv = IntervalBox::new(self.doms.clone());
        let opts = PropagateOpts { tau, ..PropagateOpts::default() };
        let (mut count, mut capped) = (0, false);
        match propagate_raw(&self.prims, &self.adj, boxv, seed, opts, &mut count, &mut capped) {
            Some(out) => {
                self.doms = out.into_domains();
                true
            }
            None => false,
        }
    }
}

#[derive(Clone, Debug)]
struct State {
    goal: Vec<GoalAtom>,
    num: NumSpace,
    subst: Subst,
    /// Resolution steps taken on this derivation path.
    steps: u32,
    /// Program atoms still in the goal: a lower bound on the steps any
    /// completion still needs (each must resolve at least once).
    pending: u32,
    /// Clause renaming counter (fresh per resolution).
    renames: u64,
    /// Auxiliary numeric variable counter (flattening).
    aux: u64,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
enum Flow {
    Continue,
    Stop,
}

/// Errors that abort one derivation with a report, distinct from failure.
enum DerivationError {
    Instantiation(String),
    TypeClash(String),
    Numeral(String),
}

impl fmt::Display for DerivationError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            DerivationError::Instantiation(m) => write!(f, "instantiation error: {m}"),
            DerivationError::TypeClash(m) => write!(f, "type error: {m}"),
            DerivationError::Numeral(m) => write!(f, "numeral error: {m}"),
        }
    }
}

struct Engine<'a> {
    program: &'a Program,
    opts: SolveOpts,
    query_numeric: HashSet<String>,
    query_vars: Vec<String>,
    level: u32,
    cut: bool,
    emitted: usize,
    successes: usize,
    diagnostics: Vec<String>,
    on_answer: &'a mut dyn FnMut(Answer),
    on_trace: &'a mut dyn FnMut(&str),
}

impl<'a> Engine<'a> {
    fn trace(&mut self, line: impl FnOnce() -> String) {
        if self.opts.trace {
            let s = line();
            (self.on_trace)(&s);
        }
    }

    /// Depth-first exploration of one state at the current level.
    /// Deterministic transitions loop in place; resolution clones per
    /// clause alternative.
    fn dfs(&mut self, mut state: State) -> Flow {
        loop {
            // no completion of this state fits in the current level: the
            // pending program atoms each cost at least one more step
            if state.steps + state.pending > self.level {
                self.cut = true;
                return Flow::Continue;
            }
            if state.goal.is_empty() {
                return self.leaf(state);
            }
            let atom = state.goal.remove(0);
            match atom {
                GoalAtom::Prog(term) => {
                    state.pending -= 1;
                    let resolved = state.subst.walk(&term).clone();
                    let (f, n) = match resolved.functor() {
                        Some(fa) => fa,
                        None => {
                            self.diagnostics
                                .push(format!("instantiation error: unbound goal atom {resolved}"));
                            return Flow::Continue;
                        }
                    };
                    if f == "merge" && n == 3 {
                        // built-in: one deterministic continuation
                        state.steps += 1;
                        match self.merge_builtin(&mut state, &resolved) {
                            Ok(true) => continue,
                            Ok(false) => return Flow::Continue,
                            Err(e) => {
                                self.diagnostics.push(e.to_string());
                                return Flow::Continue;
                            }
                        }
                    }
                    let f = f.to_string();
                    let indices = match self.program.by_pred.get(&(f.clone(), n)) {
                        // no clause for this predicate: finite failure
                        None => return Flow::Continue,
                        Some(ix) => ix.clone(),
                    };
                    for ci in indices {
                        if let Some(child) = self.try_resolve(&state, &resolved, ci) {
                            if self.dfs(child) == Flow::Stop {
                                return Flow::Stop;
                            }
                        }
                    }
                    return Flow::Continue;
                }
                constraint => {
                    self.trace(|| format!("c {constraint}"));
                    match self.transfer(&mut state, &constraint) {
                        Ok(true) => {
                            self.trace(|| {
                                format!("i store now {} constraints, {} variables", state.num.prims.len(), state.num.names.len())
                            });
                            self.trace(|| "s consistent".to_string());
                            continue;
                        }
                        Ok(false) => {
                            self.trace(|| "s fail".to_string());
                            return Flow::Continue;
                        }
                        Err(e) => {
                            self.diagnostics.push(e.to_string());
                            return Flow::Continue;
                        }
                    }
                }
            }
        }
    }

    /// The resolution transition: rename the clause apart, unify its head
    /// with the selected atom, and prepend emitted numeric links, guard,
    /// then body to the goal.
    fn try_resolve(&mut self, state: &State, atom: &Term, clause_idx: usize) -> Option<State> {
        let clause = &self.program.clauses[clause_idx];
        // even the cheapest completion of the new goal would overshoot the
        // level: skip without cloning (the level prune would catch it too)
        if state.steps + 1 + state.pending + self.program.prog_counts[clause_idx] > self.level {
            self.cut = true;
            return None;
        }
        let mut child = state.clone();
        child.steps += 1;
        child.pending += self.program.prog_counts[clause_idx];
        child.renames += 1;
        let k = child.renames_key();
        let head = clause.head.rename_apart(k);
        let clause_numeric: HashSet<String> =
            clause.numeric.iter().map(|v| format!("{v}_{k}")).collect();
        let mut links = Vec::new();
        {
            let num_ids = &child.num.ids;
            let query_numeric = &self.query_numeric;
            let is_numeric = |v: &str| {
                num_ids.contains_key(v) || clause_numeric.contains(v) || query_numeric.contains(v)
            };
            if unify(atom, &head, &mut child.subst, &is_numeric, &mut links).is_err() {
                return None;
            }
        }
        self.trace(|| format!("r {atom} ~ clause {}", clause_idx + 1));
        let mut new_goal: Vec<GoalAtom> = Vec::with_capacity(
            links.len() + clause.guard.len() + clause.body.len() + child.goal.len(),
        );
        for l in links {
            new_goal.push(match l {
                NumericLink::Membership(v, a) => GoalAtom::DomainIn(v, a),
                NumericLink::Equal(a, b) => GoalAtom::EqVars(a, b),
            });
        }
        for g in clause.guard.iter().chain(&clause.body) {
            new_goal.push(rename_goal_atom(g, k));
        }
        new_goal.append(&mut child.goal);
        child.goal = new_goal;
        Some(child)
    }

    /// Constraint transfer fused with inference: flatten the atom into
    /// primitives, extend the store, and propagate to the new fixpoint.
    /// `Ok(false)` is inconsistency (derivation fails).
    fn transfer(&mut self, state: &mut State, atom: &GoalAtom) -> Result<bool, DerivationError> {
        let mut named: Vec<Prim<String>> = Vec::new();
        match atom {
            GoalAtom::Braket { lo, var, hi } => {
                let band = braket_interval(lo, hi)
                    .map_err(|e| DerivationError::Numeral(e.to_string()))?;
                return self.membership(state, var, band);
            }
            GoalAtom::DomainIn(var, band) => {
                return self.membership(state, var, *band);
            }
            GoalAtom::EqVars(a, b) => {
                let (ta, tb) = (state.subst.walk(&Term::var(a)).clone(), state.subst.walk(&Term::var(b)).clone());
                match (&ta, &tb) {
                    (Term::Var(x), Term::Var(y)) => {
                        if x == y {
                            return Ok(true);
                        }
                        named.push(Prim::Eq(x.clone(), y.clone()));
                    }
                    (Term::Var(x), Term::Num(n)) | (Term::Num(n), Term::Var(x)) => {
                        let band = parse_decimal_outward(n)
                            .map_err(|e| DerivationError::Numeral(e.to_string()))?;
                        return self.membership(state, x, band);
                    }
                    (Term::Num(m), Term::Num(n)) => {
                        let (vm, vn) = (
                            decimal_to_rational(m).map_err(|e| DerivationError::Numeral(e.to_string()))?,
                            decimal_to_rational(n).map_err(|e| DerivationError::Numeral(e.to_string()))?,
                        );
                        return Ok(vm == vn);
                    }
                    _ => {
                        return Err(DerivationError::TypeClash(format!(
                            "numeric equality between {ta} and {tb}"
                        )))
                    }
                }
            }
            GoalAtom::PrimCall { kind, args } => {
                let mut supply = FreshNames::starting_at("_a", state.aux);
                let mut flat = crate::decompose::Flattened::default();
                let mut names = Vec::with_capacity(args.len());
                for a in args {
                    let e = self.subst_expr(state, a)?;
                    names.push(
                        flat.arg(&e, &mut supply)
                            .map_err(|e| DerivationError::Numeral(e.to_string()))?,
                    );
                }
                state.aux = supply.counter();
                named = flat.prims;
                named.push(match kind {
                    PrimKind::Sum => Prim::Sum(names[0].clone(), names[1].clone(), names[2].clone()),
                    PrimKind::Prod => Prim::Prod(names[0].clone(), names[1].clone(), names[2].clone()),
                    PrimKind::Inv => Prim::Inv(names[0].clone(), names[1].clone()),
                });
            }
            GoalAtom::Rel(nc) => {
                let lhs = self.subst_expr(state, &nc.lhs)?;
                let rhs = self.subst_expr(state, &nc.rhs)?;
                let mut supply = FreshNames::starting_at("_a", state.aux);
                let flat = flatten(&NumConstraint { lhs, rel: nc.rel, rhs }, &mut supply)
                    .map_err(|e| DerivationError::Numeral(e.to_string()))?;
                state.aux = supply.counter();
                named = flat.prims;
            }
            GoalAtom::Prog(_) => unreachable!("program atoms resolve, not transfer"),
        }
        let mut seed = Vec::new();
        for p in named {
            let mapped = p.map_vars(|v| state.num.ensure(v));
            if let Some(ci) = state.num.push_prim(mapped) {
                seed.push(ci);
            }
        }
        Ok(state.num.infer(&seed, self.opts.tau))
    }

    /// `x in band` where `x` may be bound to another variable or a literal.
    fn membership(&mut self, state: &mut State, var: &str, band: Interval) -> Result<bool, DerivationError> {
        match state.subst.walk(&Term::var(var)).clone() {
            Term::Var(v) => {
                let id = state.num.ensure(&v);
                let seed = state.num.push_prim(Prim::In(id, band)).into_iter().collect::<Vec<_>>();
                Ok(state.num.infer(&seed, self.opts.tau))
            }
            Term::Num(n) => {
                let value = decimal_to_rational(&n)
                    .map_err(|e| DerivationError::Numeral(e.to_string()))?;
                Ok(band.contains_rational(&value))
            }
            t @ Term::App(_, _) => Err(DerivationError::TypeClash(format!(
                "interval membership for non-numeric term {t}"
            ))),
        }
    }

    /// Substitute current bindings into an arithmetic expression.
    fn subst_expr(&self, state: &State, e: &ArithExpr) -> Result<ArithExpr, DerivationError> {
        Ok(match e {
            ArithExpr::Var(v) => match state.subst.walk(&Term::var(v)).clone() {
                Term::Var(w) => ArithExpr::Var(w),
                Term::Num(n) => ArithExpr::Const(n),
                t @ Term::App(_, _) => {
                    return Err(DerivationError::TypeClash(format!(
                        "arithmetic over non-numeric term {t}"
                    )))
                }
            },
            ArithExpr::Const(c) => ArithExpr::Const(c.clone()),
            ArithExpr::Neg(a) => ArithExpr::Neg(Box::new(self.subst_expr(state, a)?)),
            ArithExpr::Add(a, b) => ArithExpr::Add(
                Box::new(self.subst_expr(state, a)?),
                Box::new(self.subst_expr(state, b)?),
            ),
            ArithExpr::Sub(a, b) => ArithExpr::Sub(
                Box::new(self.subst_expr(state, a)?),
                Box::new(self.subst_expr(state, b)?),
            ),
            ArithExpr::Mul(a, b) => ArithExpr::Mul(
                Box::new(self.subst_expr(state, a)?),
                Box::new(self.subst_expr(state, b)?),
            ),
            ArithExpr::Div(a, b) => ArithExpr::Div(
                Box::new(self.subst_expr(state, a)?),
                Box::new(self.subst_expr(state, b)?),
            ),
        })
    }

    /// `merge(PL1, PL2, PL)`: sum two ground part lists, check the result
    /// against the inventory, unify the canonical merged list with `PL`.
    /// Parts not declared in the inventory are unrestricted.
    fn merge_builtin(&mut self, state: &mut State, atom: &Term) -> Result<bool, DerivationError> {
        let args = match atom {
            Term::App(_, a) => a,
            _ => unreachable!(),
        };
        self.trace(|| format!("r {atom} ~ built-in merge/3"));
        let a = state.subst.deep_apply(&args[0]);
        let b = state.subst.deep_apply(&args[1]);
        let mut tally: BTreeMap<String, u64> = BTreeMap::new();
        for (i, list) in [&a, &b].into_iter().enumerate() {
            parse_parts_list(list, &mut tally).map_err(|m| {
                DerivationError::Instantiation(format!("merge argument {} {m}: {list}", i + 1))
            })?;
        }
        for (part, qty) in &tally {
            if let Some(stock) = self.program.inventory.get(part) {
                if qty > stock {
                    return Ok(false);
                }
            }
        }
        let merged = tally.into_iter().rev().fold(Term::nil(), |acc, (part, qty)| {
            Term::cons(Term::pair(Term::atom(&part), Term::Num(qty.to_string())), acc)
        });
        let mut links = Vec::new();
        let num_ids = &state.num.ids;
        let query_numeric = &self.query_numeric;
        let is_numeric = |v: &str| num_ids.contains_key(v) || query_numeric.contains(v);
        let ok = unify(&args[2], &merged, &mut state.subst, &is_numeric, &mut links).is_ok();
        if !ok {
            return Ok(false);
        }
        // quantities are Herbrand values; numeric links cannot arise from a
        // canonical parts list unless the program is unusual, but keep them
        for l in links {
            state.goal.insert(
                0,
                match l {
                    NumericLink::Membership(v, band) => GoalAtom::DomainIn(v, band),
                    NumericLink::Equal(x, y) => GoalAtom::EqVars(x, y),
                },
            );
        }
        Ok(true)
    }

    /// Empty goal: enumerate the store into answer boxes (only at the
    /// level matching the derivation's exact length, so iterative
    /// deepening reports each derivation once).
    fn leaf(&mut self, state: State) -> Flow {
        if state.steps != self.level {
            return Flow::Continue;
        }
        let csp = Csp::new(state.num.names.clone(), state.num.prims.clone());
        let init = IntervalBox::new(state.num.doms.clone());
        let eopts = EnumerateOpts {
            eps_split: self.opts.eps_split,
            max_boxes: self.opts.max_boxes,
            tau: self.opts.tau,
        };
        let (boxes, coarse) = match enumerate(&csp, &init, eopts) {
            Ok(leaves) => (leaves, false),
            Err(overflow) => (overflow.cover, true),
        };
        if boxes.is_empty() {
            self.trace(|| "s enumeration refuted the store".to_string());
            return Flow::Continue;
        }
        self.successes += 1;
        let answer = self.build_answer(&state, boxes, coarse);
        self.emitted += 1;
        (self.on_answer)(answer);
        if self.emitted >= self.opts.max_answers {
            Flow::Stop
        } else {
            Flow::Continue
        }
    }

    fn build_answer(&mut self, state: &State, boxes: Vec<IntervalBox>, coarse: bool) -> Answer {
        // reported variables: numeric query variables plus numeric
        // variables visible in the bindings' terms, in discovery order;
        // a query variable aliased to a clause variable reports its box
        // under the query name
        let mut reported: Vec<(String, usize)> = Vec::new();
        let mut bindings = Vec::new();
        let mut report = |name: &str, id: usize, reported: &mut Vec<(String, usize)>| {
            if !reported.iter().any(|(_, i)| *i == id) {
                reported.push((name.to_string(), id));
            }
        };
        for qv in &self.query_vars {
            let t = state.subst.deep_apply(&Term::var(qv));
            if let Some(&id) = state.num.ids.get(qv) {
                report(qv, id, &mut reported);
            }
            match &t {
                Term::Var(w) if w == qv => {}
                Term::Var(w) => {
                    // pure aliasing: show the domain under the query name
                    if let Some(&id) = state.num.ids.get(w) {
                        report(qv, id, &mut reported);
                    } else {
                        bindings.push((qv.clone(), t.clone()));
                    }
                }
                _ => {
                    let mut vs = Vec::new();
                    t.variables(&mut vs);
                    for v in vs {
                        if let Some(&id) = state.num.ids.get(&v) {
                            report(&v, id, &mut reported);
                        }
                    }
                    bindings.push((qv.clone(), t.clone()));
                }
            }
        }
        let ids: Vec<usize> = reported.iter().map(|(_, id)| *id).collect();
        let reported: Vec<String> = reported.into_iter().map(|(n, _)| n).collect();
        let mut projected: Vec<IntervalBox> = boxes.iter().map(|b| b.project(&ids)).collect();
        if self.opts.consolidate {
            projected = consolidate(projected).expect("uniform arity");
        }
        let residual = state
            .num
            .prims
            .iter()
            .map(|p| p.map_vars(|&v| state.num.names[v].clone()).to_string())
            .collect();
        Answer {
            bindings,
            box_vars: reported,
            boxes: projected.into_iter().map(IntervalBox::into_domains).collect(),
            residual,
            coarse,
            depth: state.steps,
        }
    }
}

impl State {
    fn renames_key(&self) -> u64 {
        self.renames
    }
}

/// Outward interval for a bra-ket: the lower endpoint rounds down, the
/// upper rounds up, so the written decimal band is never narrowed.
pub fn braket_interval(lo: &Endpoint, hi: &Endpoint) -> Result<Interval, crate::interval::ParseNumError> {
    let lo = match lo {
        Endpoint::NegInf => f64::NEG_INFINITY,
        Endpoint::PosInf => f64::INFINITY,
        Endpoint::Dec(s) => parse_decimal_outward(s)?.lo(),
    };
    let hi = match hi {
        Endpoint::NegInf => f64::NEG_INFINITY,
        Endpoint::PosInf => f64::INFINITY,
        Endpoint::Dec(s) => parse_decimal_outward(s)?.hi(),
    };
    Ok(Interval::new(lo, hi))
}

fn rename_expr(e: &ArithExpr, k: u64) -> ArithExpr {
    match e {
        ArithExpr::Var(v) => ArithExpr::Var(format!("{v}_{k}")),
        ArithExpr::Const(c) => ArithExpr::Const(c.clone()),
        ArithExpr::Neg(a) => ArithExpr::Neg(Box::new(rename_expr(a, k))),
        ArithExpr::Add(a, b) => ArithExpr::Add(Box::new(rename_expr(a, k)), Box::new(rename_expr(b, k))),
        ArithExpr::Sub(a, b) => ArithExpr::Sub(Box::new(rename_expr(a, k)), Box::new(rename_expr(b, k))),
        ArithExpr::Mul(a, b) => ArithExpr::Mul(Box::new(rename_expr(a, k)), Box::new(rename_expr(b, k))),
        ArithExpr::Div(a, b) => ArithExpr::Div(Box::new(rename_expr(a, k)), Box::new(rename_expr(b, k))),
    }
}

fn rename_goal_atom(atom: &GoalAtom, k: u64) -> GoalAtom {
    match atom {
        GoalAtom::Prog(t) => GoalAtom::Prog(t.rename_apart(k)),
        GoalAtom::Braket { lo, var, hi } => GoalAtom::Braket {
            lo: lo.clone(),
            var: format!("{var}_{k}"),
            hi: hi.clone(),
        },
        GoalAtom::PrimCall { kind, args } => GoalAtom::PrimCall {
            kind: *kind,
            args: args.iter().map(|a| rename_expr(a, k)).collect(),
        },
        GoalAtom::Rel(nc) => GoalAtom::Rel(NumConstraint {
            lhs: rename_expr(&nc.lhs, k),
            rel: nc.rel,
            rhs: rename_expr(&nc.rhs, k),
        }),
        GoalAtom::DomainIn(v, a) => GoalAtom::DomainIn(format!("{v}_{k}"), *a),
        GoalAtom::EqVars(a, b) => GoalAtom::EqVars(format!("{a}_{k}"), format!("{b}_{k}")),
    }
}

/// Variables of a goal atom in order of appearance (for answer display).
fn goal_atom_vars(atom: &GoalAtom, out: &mut Vec<String>) {
    let mut add = |v: &str| {
        if !out.iter().any(|w| w == v) {
            out.push(v.to_string());
        }
    };
    match atom {
        GoalAtom::Prog(t) => {
            let mut vs = Vec::new();
            t.variables(&mut vs);
            for v in vs {
                add(&v);
            }
        }
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
    }
}

/// Ground cons-list of `part:qty` pairs into a tally.
fn parse_parts_list(list: &Term, tally: &mut BTreeMap<String, u64>) -> Result<(), String> {
    let mut cur = list;
    loop {
        match cur {
            Term::App(nil, args) if nil == "nil" && args.is_empty() => return Ok(()),
            Term::App(dot, args) if dot == "." && args.len() == 2 => {
                match &args[0] {
                    Term::App(colon, pq) if colon == ":" && pq.len() == 2 => {
                        let part = match &pq[0] {
                            Term::App(p, a) if a.is_empty() => p.clone(),
                            other => return Err(format!("is not a part name: {other}")),
                        };
                        let qty = match &pq[1] {
                            Term::Num(n) => n
                                .parse::<u64>()
                                .map_err(|_| format!("has non-integer quantity {n}"))?,
                            other => return Err(format!("is not ground: quantity {other}")),
                        };
                        *tally.entry(part).or_insert(0) += qty;
                    }
                    other => return Err(format!("is not a part:qty pair: {other}")),
                }
                cur = &args[1];
            }
            Term::Var(_) => return Err("is not ground".to_string()),
            other => return Err(format!("is not a parts list: {other}")),
        }
    }
}
