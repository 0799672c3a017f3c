//! Constraint satisfaction over interval boxes: worklist propagation to
//! the common fixpoint, branch-and-prune enumeration, and consolidation of
//! adjacent result boxes.
//!
//! Propagation applies each constraint's reduction operator until no
//! domain changes. Because the operators are contracting and
//! inclusion-monotone, the limit is the greatest common fixpoint inside
//! the initial box and does not depend on the order of application; the
//! worklist (re-queue a constraint whenever one of its variables shrank)
//! is just an efficient fair schedule reaching it.

use crate::dro::{apply_dro, Prim, VarId};
use crate::interval::Interval;
use std::collections::VecDeque;
use std::fmt;
use std::ops::{Index, IndexMut};

/// A nonempty Cartesian product of one interval per variable.
///
/// The empty box has no representation of its own: operations that can
/// empty a domain return `Option<IntervalBox>`, with `None` playing the
/// role of the bottom element (any box with an empty component normalizes
/// to it).
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct IntervalBox(Vec<Interval>);

impl IntervalBox {
    /// Wraps the domains. Panics if any component is empty; use
    /// [`IntervalBox::normalized`] when emptiness is data.
    pub fn new(doms: Vec<Interval>) -> IntervalBox {
        assert!(doms.iter().all(|d| !d.is_empty()), "empty component in box");
        IntervalBox(doms)
    }

    /// `None` when any component is empty (the canonical empty box).
    pub fn normalized(doms: Vec<Interval>) -> Option<IntervalBox> {
        if doms.iter().any(|d| d.is_empty()) {
            None
        } else {
            Some(IntervalBox(doms))
        }
    }

    pub fn full(n: usize) -> IntervalBox {
        IntervalBox(vec![Interval::FULL; n])
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn domains(&self) -> &[Interval] {
        &self.0
    }

    pub fn into_domains(self) -> Vec<Interval> {
        self.0
    }

    pub fn push(&mut self, d: Interval) {
        assert!(!d.is_empty());
        self.0.push(d);
    }

    /// Componentwise subset test.
    pub fn contained_in(&self, other: &IntervalBox) -> bool {
        self.0.len() == other.0.len()
            && self.0.iter().zip(&other.0).all(|(a, b)| b.contains_interval(a))
    }

    /// Project onto a subset of variables.
    pub fn project(&self, vars: &[VarId]) -> IntervalBox {
        IntervalBox(vars.iter().map(|&v| self.0[v]).collect())
    }
}

impl Index<VarId> for IntervalBox {
    type Output = Interval;
    fn index(&self, v: VarId) -> &Interval {
        &self.0[v]
    }
}

impl IndexMut<VarId> for IntervalBox {
    fn index_mut(&mut self, v: VarId) -> &mut Interval {
        &mut self.0[v]
    }
}

impl fmt::Display for IntervalBox {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "(")?;
        for (i, d) in self.0.iter().enumerate() {
            if i > 0 {
                write!(f, ", ")?;
            }
            write!(f, "{d}")?;
        }
        write!(f, ")")
    }
}

/// A CSP: named variables and a deduplicated set of primitive constraints
/// over them, with a variable-to-constraint index for the worklist.
#[derive(Clone, Debug)]
pub struct Csp {
    vars: Vec<String>,
    constraints: Vec<Prim>,
    adj: Vec<Vec<usize>>,
}

impl Csp {
    pub fn new(vars: Vec<String>, constraints: Vec<Prim>) -> Csp {
        let mut dedup: Vec<Prim> = Vec::with_capacity(constraints.len());
        for c in constraints {
            for v in c.vars() {
                assert!(v < vars.len(), "constraint mentions unknown variable");
            }
            if !dedup.contains(&c) {
                dedup.push(c);
            }
        }
        let mut adj = vec![Vec::new(); vars.len()];
        for (ci, c) in dedup.iter().enumerate() {
            for v in c.vars() {
                if !adj[v].contains(&ci) {
                    adj[v].push(ci);
                }
            }
        }
        Csp { vars, constraints: dedup, adj }
    }

    pub fn num_vars(&self) -> usize {
        self.vars.len()
    }

    pub fn var_names(&self) -> &[String] {
        &self.vars
    }

    pub fn var_index(&self, name: &str) -> Option<VarId> {
        self.vars.iter().position(|v| v == name)
    }

    pub fn constraints(&self) -> &[Prim] {
        &self.constraints
    }
}

/// Options shared by propagation and enumeration.
#[derive(Clone, Copy, Debug)]
pub struct PropagateOpts {
    /// Re-queue a constraint only when a variable's width improved by more
    /// than this fraction. Zero (the default) re-queues on any change and
    /// reaches the exact floating-point fixpoint.
    pub tau: f64,
    /// Safety valve against ulp-at-a-time convergence creep: after this
    /// many operator applications the worklist stops re-queueing and the
    /// current (sound, just possibly not fully reduced) box is returned.
    pub max_applications: u64,
}

impl Default for PropagateOpts {
    fn default() -> Self {
        PropagateOpts { tau: 0.0, max_applications: 1_000_000 }
    }
}

/// Run constraint propagation from `init` to the fixpoint. `None` means
/// some domain emptied: `init` contains no solutions.
pub fn propagate(csp: &Csp, init: &IntervalBox) -> Option<IntervalBox> {
    propagate_opts(csp, init, PropagateOpts::default())
}

pub fn propagate_opts(csp: &Csp, init: &IntervalBox, opts: PropagateOpts) -> Option<IntervalBox> {
    propagate_counted(csp, init, opts).0
}

/// Like [`propagate_opts`] but also reports how many operator applications
/// ran and whether the application cap cut the run short (in which case the
/// result may not be the exact fixpoint).
pub fn propagate_counted(
    csp: &Csp,
    init: &IntervalBox,
    opts: PropagateOpts,
) -> (Option<IntervalBox>, u64, bool) {
    let seed: Vec<usize> = (0..csp.constraints.len()).collect();
    let mut count = 0;
    let mut capped = false;
    let out = propagate_seeded_counted(csp, init.clone(), &seed, opts, &mut count, &mut capped);
    (out, count, capped)
}

pub(crate) fn propagate_seeded(
    csp: &Csp,
    boxv: IntervalBox,
    seed: &[usize],
    opts: PropagateOpts,
) -> Option<IntervalBox> {
    let mut count = 0;
    let mut capped = false;
    propagate_seeded_counted(csp, boxv, seed, opts, &mut count, &mut capped)
}

fn propagate_seeded_counted(
    csp: &Csp,
    boxv: IntervalBox,
    seed: &[usize],
    opts: PropagateOpts,
    count: &mut u64,
    capped: &mut bool,
) -> Option<IntervalBox> {
    assert_eq!(boxv.len(), csp.vars.len(), "box does not bind every variable");
    propagate_raw(&csp.constraints, &csp.adj, boxv, seed, opts, count, capped)
}

/// Propagation restarted from a box known to be a fixpoint of every
/// constraint not in `seed` (used after splitting a single variable, and
/// by the derivation engine after appending constraints to its store).
pub(crate) fn propagate_raw(
    constraints: &[Prim],
    adj: &[Vec<usize>],
    mut boxv: IntervalBox,
    seed: &[usize],
    opts: PropagateOpts,
    count: &mut u64,
    capped: &mut bool,
) -> Option<IntervalBox> {
    let m = constraints.len();
    let mut queue: VecDeque<usize> = VecDeque::with_capacity(m);
    let mut in_queue = vec![false; m];
    for &ci in seed {
        if !in_queue[ci] {
            in_queue[ci] = true;
            queue.push_back(ci);
        }
    }
    let mut changed: Vec<VarId> = Vec::new();
    while let Some(ci) = queue.pop_front() {
        in_queue[ci] = false;
        if *count >= opts.max_applications {
            *capped = true;
            return Some(boxv);
        }
        *count += 1;
        let before: Vec<Interval> = if opts.tau > 0.0 {
            constraints[ci].vars().iter().map(|&v| boxv[v]).collect()
        } else {
            Vec::new()
        };
        apply_dro(&constraints[ci], &mut boxv, &mut changed)?;
        for &v in &changed {
            if opts.tau > 0.0 {
                // significant-improvement filter: skip re-queue on creep
                let old = constraints[ci]
                    .vars()
                    .iter()
                    .position(|&w| w == v)
                    .map(|i| before[i]);
                if let Some(old) = old {
                    let became_bounded = (!old.lo().is_finite() && boxv[v].lo().is_finite())
                        || (!old.hi().is_finite() && boxv[v].hi().is_finite());
                    let shrink = old.width() - boxv[v].width();
                    if !(became_bounded || shrink > opts.tau * old.width()) {
                        continue;
                    }
                }
            }
            for &cj in &adj[v] {
                if !in_queue[cj] {
                    in_queue[cj] = true;
                    queue.push_back(cj);
                }
            }
        }
    }
    Some(boxv)
}

#[derive(Clone, Copy, Debug)]
pub struct EnumerateOpts {
    /// Stop splitting a domain once its width is at most this.
    pub eps_split: f64,
    /// Leaf budget; exceeding it is a resource error.
    pub max_boxes: usize,
    pub tau: f64,
}

impl Default for EnumerateOpts {
    fn default() -> Self {
        EnumerateOpts { eps_split: 1e-6, max_boxes: 4096, tau: 0.0 }
    }
}

/// Resource error from enumeration. `cover` still holds a sound cover of
/// all solutions in the initial box: the leaves found before the budget
/// tripped plus the unexplored subtrees frozen as coarse boxes.
#[derive(Clone, Debug)]
pub struct BoxBudgetExceeded {
    pub cover: Vec<IntervalBox>,
}

impl fmt::Display for BoxBudgetExceeded {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "box budget exceeded ({} boxes in partial cover)", self.cover.len())
    }
}

impl std::error::Error for BoxBudgetExceeded {}

/// Branch-and-prune enumeration: recursively split the widest domain,
/// propagating after every split, until every domain is at most
/// `eps_split` wide (or cannot be split further). The returned leaves
/// cover every solution in `init`; an empty list proves there are none.
/// Unbounded domains are always split first regardless of `eps_split`.
pub fn enumerate(
    csp: &Csp,
    init: &IntervalBox,
    opts: EnumerateOpts,
) -> Result<Vec<IntervalBox>, BoxBudgetExceeded> {
    let mut leaves = Vec::new();
    let mut overflowed = false;
    let seed: Vec<usize> = (0..csp.constraints.len()).collect();
    if let Some(root) = propagate_seeded(csp, init.clone(), &seed, PropagateOpts { tau: opts.tau, ..PropagateOpts::default() }) {
        enumerate_rec(csp, root, &opts, &mut leaves, &mut overflowed);
    }
    if overflowed {
        Err(BoxBudgetExceeded { cover: leaves })
    } else {
        Ok(leaves)
    }
}

/// Pick the split variable: widest domain, ties to the lowest index.
/// Unbounded domains have infinite width and therefore win. Returns `None`
/// when every domain is within `eps` or has no representable interior.
fn pick_split_var(boxv: &IntervalBox, eps: f64) -> Option<VarId> {
    let mut best: Option<(VarId, f64)> = None;
    for v in 0..boxv.len() {
        let w = boxv[v].width();
        if w > eps && boxv[v].split().is_ok() {
            match best {
                Some((_, bw)) if bw >= w => {}
                _ => best = Some((v, w)),
            }
        }
    }
    best.map(|(v, _)| v)
}

fn enumerate_rec(
    csp: &Csp,
    boxv: IntervalBox,
    opts: &EnumerateOpts,
    leaves: &mut Vec<IntervalBox>,
    overflowed: &mut bool,
) {
    let split_var = pick_split_var(&boxv, opts.eps_split);
    let v = match split_var {
        None => {
            leaves.push(boxv);
            return;
        }
        Some(v) => v,
    };
    if leaves.len() >= opts.max_boxes || *overflowed {
        // splitting would exceed the budget: freeze this subtree as one box
        *overflowed = true;
        leaves.push(boxv);
        return;
    }
    let (left, right) = boxv[v].split().expect("checked splittable");
    let popts = PropagateOpts { tau: opts.tau, ..PropagateOpts::default() };
    for half in [left, right] {
        let mut child = boxv.clone();
        child[v] = half;
        if let Some(child) = propagate_seeded(csp, child, &csp.adj[v], popts) {
            enumerate_rec(csp, child, opts, leaves, overflowed);
        }
    }
}

/// Parallel variant of [`enumerate`] without a box budget: subtrees are
/// explored on the rayon pool and results concatenated in canonical
/// depth-first order, so the output is identical to the sequential one.
/// Falls back to the sequential path when the `parallel` feature is off.
pub fn enumerate_parallel(csp: &Csp, init: &IntervalBox, opts: EnumerateOpts) -> Vec<IntervalBox> {
    let seed: Vec<usize> = (0..csp.constraints.len()).collect();
    let root = match propagate_seeded(csp, init.clone(), &seed, PropagateOpts { tau: opts.tau, ..PropagateOpts::default() }) {
        Some(b) => b,
        None => return Vec::new(),
    };
    #[cfg(feature = "parallel")]
    {
        return enumerate_par_rec(csp, root, &opts, 0);
    }
    #[cfg(not(feature = "parallel"))]
    {
        let mut leaves = Vec::new();
        let mut overflowed = false;
        let opts = EnumerateOpts { max_boxes: usize::MAX, ..opts };
        enumerate_rec(csp, root, &opts, &mut leaves, &mut overflowed);
        leaves
    }
}

#[cfg(feature = "parallel")]
fn enumerate_par_rec(csp: &Csp, boxv: IntervalBox, opts: &EnumerateOpts, depth: u32) -> Vec<IntervalBox> {
    const PAR_DEPTH: u32 = 12;
    let v = match pick_split_var(&boxv, opts.eps_split) {
        None => return vec![boxv],
        Some(v) => v,
    };
    if depth >= PAR_DEPTH {
        let mut leaves = Vec::new();
        let mut overflowed = false;
        let seq_opts = EnumerateOpts { max_boxes: usize::MAX, ..*opts };
        enumerate_rec(csp, boxv, &seq_opts, &mut leaves, &mut overflowed);
        return leaves;
    }
    let (left, right) = boxv[v].split().expect("checked splittable");
    let popts = PropagateOpts { tau: opts.tau, ..PropagateOpts::default() };
    let child = |half: Interval| -> Option<IntervalBox> {
        let mut c = boxv.clone();
        c[v] = half;
        propagate_seeded(csp, c, &csp.adj[v], popts)
    };
    let (mut ls, rs) = rayon::join(
        || child(left).map(|b| enumerate_par_rec(csp, b, opts, depth + 1)).unwrap_or_default(),
        || child(right).map(|b| enumerate_par_rec(csp, b, opts, depth + 1)).unwrap_or_default(),
    );
    ls.extend(rs);
    ls
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct MixedVariableSets;

impl fmt::Display for MixedVariableSets {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "consolidate: boxes over mixed variable sets")
    }
}

impl std::error::Error for MixedVariableSets {}

/// Merge boxes that are identical in all coordinates but one in which they
/// touch or overlap, repeating until no merge applies (one merge can
/// enable another). The union of covered points is preserved exactly.
pub fn consolidate(boxes: Vec<IntervalBox>) -> Result<Vec<IntervalBox>, MixedVariableSets> {
    let arity = match boxes.first() {
        None => return Ok(boxes),
        Some(b) => b.len(),
    };
    if boxes.iter().any(|b| b.len() != arity) {
        return Err(MixedVariableSets);
    }
    let mut out: Vec<IntervalBox> = Vec::with_capacity(boxes.len());
    // drop exact duplicates first; cheap and makes the quadratic pass small
    for b in boxes {
        if !out.contains(&b) {
            out.push(b);
        }
    }
    loop {
        let mut merged = false;
        'outer: for i in 0..out.len() {
            for j in (i + 1)..out.len() {
                if let Some(m) = merge_one(&out[i], &out[j]) {
                    out[i] = m;
                    out.swap_remove(j);
                    merged = true;
                    break 'outer;
                }
            }
        }
        if !merged {
            return Ok(out);
        }
    }
}

/// A merged box when `a` and `b` differ in at most one coordinate and the
/// differing intervals are adjacent (their union is an interval).
fn merge_one(a: &IntervalBox, b: &IntervalBox) -> Option<IntervalBox> {
    let mut diff = None;
    for v in 0..a.len() {
        if a[v] != b[v] {
            if diff.is_some() {
                return None;
            }
            diff = Some(v);
        }
    }
    match diff {
        None => Some(a.clone()), // identical
        Some(v) => {
            if a[v].adjacent(b[v]) {
                let mut m = a.clone();
                m[v] = a[v].hull(b[v]);
                Some(m)
            } else {
                None
            }
        }
    }
}
