//! Finite, variable-indexed relations with exact rational arithmetic.
//!
//! This is the brute-force ground truth the test suites measure the solver
//! against: small relations tabulated over finite universes, their joins,
//! exhaustive solution enumeration, and sampling checks that verify
//! computed box covers never lose a solution. Everything here computes
//! with exact rationals, never floats, so the oracle does not share the
//! solver's error model.

use crate::csp::{Csp, IntervalBox};
use crate::dro::Prim;
use num_rational::BigRational;
use num_traits::One;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use std::collections::{BTreeMap, BTreeSet};
use std::fmt;

pub type Val = BigRational;

/// One tuple: an assignment of values to the relation's index variables.
pub type Tuple = BTreeMap<String, Val>;

/// A finite relation whose tuples are indexed by variable names.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct FiniteRelation {
    index: BTreeSet<String>,
    tuples: BTreeSet<Tuple>,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub enum OracleError {
    ArityMismatch { relation_arity: usize, var_count: usize },
    BudgetExceeded { tuples: u128, budget: u128 },
}

impl fmt::Display for OracleError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            OracleError::ArityMismatch { relation_arity, var_count } => {
                write!(f, "arity mismatch: relation has {relation_arity} columns, {var_count} variables given")
            }
            OracleError::BudgetExceeded { tuples, budget } => {
                write!(f, "assignment space of {tuples} tuples exceeds the budget of {budget}")
            }
        }
    }
}

impl std::error::Error for OracleError {}

impl FiniteRelation {
    pub fn new(index: impl IntoIterator<Item = String>) -> FiniteRelation {
        FiniteRelation { index: index.into_iter().collect(), tuples: BTreeSet::new() }
    }

    pub fn index(&self) -> &BTreeSet<String> {
        &self.index
    }

    pub fn tuples(&self) -> &BTreeSet<Tuple> {
        &self.tuples
    }

    pub fn len(&self) -> usize {
        self.tuples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.tuples.is_empty()
    }

    pub fn insert(&mut self, t: Tuple) {
        assert!(
            t.keys().cloned().collect::<BTreeSet<_>>() == self.index,
            "tuple does not bind exactly the index set"
        );
        self.tuples.insert(t);
    }

    pub fn contains(&self, t: &Tuple) -> bool {
        self.tuples.contains(t)
    }

    /// Full relation: every assignment of the universe to the index.
    pub fn full(vars: &[String], universe: &[Val]) -> FiniteRelation {
        let mut rel = FiniteRelation::new(vars.iter().cloned());
        let vars: Vec<String> = rel.index.iter().cloned().collect();
        let mut idx = vec![0usize; vars.len()];
        loop {
            let t: Tuple = vars.iter().zip(&idx).map(|(v, &i)| (v.clone(), universe[i].clone())).collect();
            rel.tuples.insert(t);
            let mut carry = vars.len();
            while carry > 0 {
                idx[carry - 1] += 1;
                if idx[carry - 1] < universe.len() {
                    break;
                }
                idx[carry - 1] = 0;
                carry -= 1;
            }
            if carry == 0 {
                break;
            }
        }
        rel
    }
}

/// The relation `rho` on the variable sequence `v`: tuples indexed by the
/// set of variables in `v` such that assigning each position its
/// variable's value lands in `rho`. Repeated variables force equal
/// components.
pub fn relation_on(rho: &[Vec<Val>], v: &[String]) -> Result<FiniteRelation, OracleError> {
    let mut rel = FiniteRelation::new(v.iter().cloned());
    for row in rho {
        if row.len() != v.len() {
            return Err(OracleError::ArityMismatch { relation_arity: row.len(), var_count: v.len() });
        }
        let mut t: Tuple = BTreeMap::new();
        let mut consistent = true;
        for (var, val) in v.iter().zip(row) {
            match t.get(var) {
                Some(prev) if prev != val => {
                    consistent = false;
                    break;
                }
                _ => {
                    t.insert(var.clone(), val.clone());
                }
            }
        }
        if consistent {
            rel.tuples.insert(t);
        }
    }
    Ok(rel)
}

/// Natural join: tuples over the union of the indexes agreeing with some
/// tuple of each operand on its own index.
pub fn join(r1: &FiniteRelation, r2: &FiniteRelation) -> FiniteRelation {
    let mut out = FiniteRelation::new(r1.index.union(&r2.index).cloned());
    for t1 in &r1.tuples {
        for t2 in &r2.tuples {
            let compatible = r1
                .index
                .intersection(&r2.index)
                .all(|v| t1.get(v) == t2.get(v));
            if compatible {
                let mut t = t1.clone();
                for (k, val) in t2 {
                    t.insert(k.clone(), val.clone());
                }
                out.tuples.insert(t);
            }
        }
    }
    out
}

/// Exact satisfaction of one primitive at a rational point.
pub fn prim_satisfied(c: &Prim<String>, t: &dyn Fn(&str) -> Option<Val>) -> Option<bool> {
    Some(match c {
        Prim::Sum(x, y, z) => t(x)? + t(y)? == t(z)?,
        Prim::Prod(x, y, z) => t(x)? * t(y)? == t(z)?,
        Prim::Inv(x, y) => t(x)? * t(y)? == Val::one(),
        Prim::Le(x, y) => t(x)? <= t(y)?,
        Prim::Eq(x, y) => t(x)? == t(y)?,
        Prim::In(x, a) => a.contains_rational(&t(x)?),
    })
}

/// Tabulate a primitive's relation restricted to a finite universe, as
/// positional rows matching [`Prim::vars`] order.
pub fn tabulate(c: &Prim<String>, universe: &[Val]) -> Vec<Vec<Val>> {
    let arity = c.vars().len();
    let mut rows = Vec::new();
    let mut idx = vec![0usize; arity];
    loop {
        let row: Vec<Val> = idx.iter().map(|&i| universe[i].clone()).collect();
        // positional semantics: each occurrence gets its own column; the
        // repeated-variable collapse happens later in `relation_on`
        let positional = match c {
            Prim::Sum(_, _, _) => row[0].clone() + row[1].clone() == row[2],
            Prim::Prod(_, _, _) => row[0].clone() * row[1].clone() == row[2],
            Prim::Inv(_, _) => row[0].clone() * row[1].clone() == Val::one(),
            Prim::Le(_, _) => row[0] <= row[1],
            Prim::Eq(_, _) => row[0] == row[1],
            Prim::In(_, a) => a.contains_rational(&row[0]),
        };
        if positional {
            rows.push(row);
        }
        let mut carry = arity;
        while carry > 0 {
            idx[carry - 1] += 1;
            if idx[carry - 1] < universe.len() {
                break;
            }
            idx[carry - 1] = 0;
            carry -= 1;
        }
        if carry == 0 {
            break;
        }
    }
    rows
}

/// Enumerate every assignment of the finite universes and keep those
/// satisfying all constraints. Equals the join-fold of the constraints'
/// tabulated relations (asserted by the test suites).
pub fn brute_solutions(
    vars: &[(String, Vec<Val>)],
    constraints: &[Prim<String>],
    budget: u128,
) -> Result<FiniteRelation, OracleError> {
    let mut space: u128 = 1;
    for (_, u) in vars {
        space = space.saturating_mul(u.len() as u128);
        if space > budget {
            return Err(OracleError::BudgetExceeded { tuples: space, budget });
        }
    }
    let names: Vec<String> = vars.iter().map(|(n, _)| n.clone()).collect();
    let mut rel = FiniteRelation::new(names.iter().cloned());
    let mut idx = vec![0usize; vars.len()];
    loop {
        let t: Tuple = vars
            .iter()
            .zip(&idx)
            .map(|((n, u), &i)| (n.clone(), u[i].clone()))
            .collect();
        let get = |name: &str| t.get(name).cloned();
        if constraints.iter().all(|c| prim_satisfied(c, &get).unwrap_or(false)) {
            rel.tuples.insert(t);
        }
        let mut carry = vars.len();
        while carry > 0 {
            idx[carry - 1] += 1;
            if idx[carry - 1] < vars[carry - 1].1.len() {
                break;
            }
            idx[carry - 1] = 0;
            carry -= 1;
        }
        if carry == 0 {
            break;
        }
    }
    Ok(rel)
}

/// Exact membership of a rational point in a box (componentwise).
pub fn point_in_box(point: &[Val], boxv: &IntervalBox) -> bool {
    point.len() == boxv.len() && (0..point.len()).all(|v| boxv[v].contains_rational(&point[v]))
}

/// Count sampled solutions that escape the cover. Draws `n` dyadic points
/// in `init`; each point exactly satisfying every constraint of `csp`
/// (rational arithmetic) must lie in some box of `cover`. Deterministic
/// for a given seed. A correct cover yields zero.
pub fn sample_check(csp: &Csp, init: &IntervalBox, cover: &[IntervalBox], n: usize, seed: u64) -> usize {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let points: Vec<Vec<Val>> = (0..n).map(|_| sample_point(&mut rng, init)).collect();
    count_escaped(csp, cover, &points)
}

/// The violation count for externally constructed points (used to check
/// covers against points placed exactly on the solution set).
pub fn count_escaped(csp: &Csp, cover: &[IntervalBox], points: &[Vec<Val>]) -> usize {
    let check_one = |p: &Vec<Val>| -> usize {
        let names = csp.var_names();
        let get = |name: &str| names.iter().position(|v| v == name).map(|i| p[i].clone());
        let satisfied = csp
            .constraints()
            .iter()
            .all(|c| prim_satisfied(&c.map_vars(|&v| names[v].clone()), &get).unwrap_or(false));
        if satisfied && !cover.iter().any(|b| point_in_box(p, b)) {
            1
        } else {
            0
        }
    };
    #[cfg(feature = "parallel")]
    {
        use rayon::prelude::*;
        points.par_iter().map(check_one).sum()
    }
    #[cfg(not(feature = "parallel"))]
    {
        points.iter().map(check_one).sum()
    }
}

/// A dyadic rational point inside the box (finite stand-ins bound the
/// unbounded sides).
pub fn sample_point(rng: &mut ChaCha8Rng, boxv: &IntervalBox) -> Vec<Val> {
    (0..boxv.len())
        .map(|v| {
            let d = boxv[v];
            let (mut lo, mut hi) = (d.lo(), d.hi());
            if !lo.is_finite() {
                lo = if hi.is_finite() { hi - 2e6 } else { -1e6 };
            }
            if !hi.is_finite() {
                hi = lo + 2e6;
            }
            let steps = 1u32 << 16;
            let t = rng.gen_range(0..=steps) as f64 / steps as f64;
            BigRational::from_float(lo + t * (hi - lo)).unwrap()
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::csp::{enumerate, EnumerateOpts};
    use crate::interval::Interval;
    use num_bigint::BigInt;

    fn n(i: i64) -> Val {
        BigRational::from_integer(BigInt::from(i))
    }

    fn naturals(limit: i64) -> Vec<Val> {
        (0..=limit).map(n).collect()
    }

    /// The ternary addition relation over a finite universe.
    fn sum_rows(universe: &[Val]) -> Vec<Vec<Val>> {
        let mut rows = Vec::new();
        for a in universe {
            for b in universe {
                let c = a + b;
                if universe.contains(&c) {
                    rows.push(vec![a.clone(), b.clone(), c]);
                }
            }
        }
        rows
    }

    fn s(x: &str) -> String {
        x.to_string()
    }

    #[test]
    fn relation_on_repeated_variable() {
        // sum on <x2, x2, x1>: rows (x1, x2) = (0,0), (2,1), (4,2), ...
        let rel = relation_on(&sum_rows(&naturals(10)), &[s("x2"), s("x2"), s("x1")]).unwrap();
        let expect = |x1: i64, x2: i64| -> Tuple {
            [(s("x1"), n(x1)), (s("x2"), n(x2))].into_iter().collect()
        };
        assert!(rel.contains(&expect(0, 0)));
        assert!(rel.contains(&expect(2, 1)));
        assert!(rel.contains(&expect(4, 2)));
        assert!(rel.contains(&expect(6, 3)));
        assert!(!rel.contains(&expect(3, 1)));
        // odd x1 is impossible
        assert_eq!(rel.len(), 6); // x2 = 0..5 with 2*x2 <= 10
    }

    #[test]
    fn relation_on_renaming_and_killed_tuples() {
        let rho = vec![vec![n(1), n(2)]];
        let renamed = relation_on(&rho, &[s("a"), s("b")]).unwrap();
        assert_eq!(renamed.len(), 1);
        // repeated variable with unequal components kills the tuple
        let collapsed = relation_on(&rho, &[s("a"), s("a")]).unwrap();
        assert!(collapsed.is_empty());
        // arity mismatch is an error
        assert!(relation_on(&rho, &[s("a")]).is_err());
    }

    #[test]
    fn join_worked_example() {
        // c1: x2 + x2 = x1, c2: x3 + x4 = x1 over the naturals
        let u = naturals(10);
        let r1 = relation_on(&sum_rows(&u), &[s("x2"), s("x2"), s("x1")]).unwrap();
        let r2 = relation_on(&sum_rows(&u), &[s("x3"), s("x4"), s("x1")]).unwrap();
        let j = join(&r1, &r2);
        let expect = |x1: i64, x2: i64, x3: i64, x4: i64| -> Tuple {
            [(s("x1"), n(x1)), (s("x2"), n(x2)), (s("x3"), n(x3)), (s("x4"), n(x4))]
                .into_iter()
                .collect()
        };
        for row in [
            (0, 0, 0, 0),
            (2, 1, 0, 2),
            (2, 1, 1, 1),
            (2, 1, 2, 0),
            (4, 2, 0, 4),
            (4, 2, 1, 3),
        ] {
            assert!(j.contains(&expect(row.0, row.1, row.2, row.3)), "missing {row:?}");
        }
        // join with the full relation is the identity
        let full = FiniteRelation::full(&[s("x1"), s("x2")], &u);
        assert_eq!(join(&r1, &full), r1);
        // join with the empty relation is empty
        let empty = FiniteRelation::new([s("x1")]);
        assert!(join(&r1, &empty).is_empty());
    }

    #[test]
    fn join_commutative_associative() {
        let u = naturals(6);
        let r1 = relation_on(&sum_rows(&u), &[s("a"), s("b"), s("c")]).unwrap();
        let r2 = relation_on(&sum_rows(&u), &[s("b"), s("c"), s("d")]).unwrap();
        let r3 = relation_on(&sum_rows(&u), &[s("a"), s("a"), s("d")]).unwrap();
        assert_eq!(join(&r1, &r2), join(&r2, &r1));
        assert_eq!(join(&join(&r1, &r2), &r3), join(&r1, &join(&r2, &r3)));
    }

    #[test]
    fn brute_solutions_equals_join_fold() {
        // the example system: x2 + x2 = x1 and x3 + x4 = x1, universes 0..10
        let u = naturals(10);
        let vars: Vec<(String, Vec<Val>)> =
            ["x1", "x2", "x3", "x4"].iter().map(|v| (s(v), u.clone())).collect();
        let cons = vec![
            Prim::Sum(s("x2"), s("x2"), s("x1")),
            Prim::Sum(s("x3"), s("x4"), s("x1")),
        ];
        let brute = brute_solutions(&vars, &cons, 1 << 20).unwrap();
        // fold of join over the tabulated constraint relations
        let r1 = relation_on(&sum_rows(&u), &[s("x2"), s("x2"), s("x1")]).unwrap();
        let r2 = relation_on(&sum_rows(&u), &[s("x3"), s("x4"), s("x1")]).unwrap();
        let folded = join(&r1, &r2);
        assert_eq!(brute, folded);
        let expect = |x1: i64, x2: i64, x3: i64, x4: i64| -> Tuple {
            [(s("x1"), n(x1)), (s("x2"), n(x2)), (s("x3"), n(x3)), (s("x4"), n(x4))]
                .into_iter()
                .collect()
        };
        assert!(brute.contains(&expect(0, 0, 0, 0)));
        assert!(brute.contains(&expect(2, 1, 0, 2)));
    }

    #[test]
    fn brute_contradiction_and_unconstrained() {
        let u = naturals(3);
        let vars = vec![(s("x"), u.clone())];
        let contradictory = vec![
            Prim::In(s("x"), Interval::new(0.0, 1.0)),
            Prim::In(s("x"), Interval::new(2.0, 3.0)),
        ];
        assert!(brute_solutions(&vars, &contradictory, 1 << 10).unwrap().is_empty());
        let unconstrained = brute_solutions(&vars, &[], 1 << 10).unwrap();
        assert_eq!(unconstrained.len(), u.len());
        // budget enforcement
        let big: Vec<(String, Vec<Val>)> = (0..8).map(|i| (format!("v{i}"), naturals(40))).collect();
        assert!(matches!(
            brute_solutions(&big, &[], 10_000_000),
            Err(OracleError::BudgetExceeded { .. })
        ));
    }

    #[test]
    fn brute_matches_join_fold_on_random_systems() {
        use rand::{Rng, SeedableRng};
        let mut rng = ChaCha8Rng::seed_from_u64(77);
        let u = naturals(5);
        for _ in 0..50 {
            let nvars = rng.gen_range(2..4);
            let names: Vec<String> = (0..nvars).map(|i| format!("x{i}")).collect();
            let vars: Vec<(String, Vec<Val>)> = names.iter().map(|v| (v.clone(), u.clone())).collect();
            let pick = |rng: &mut ChaCha8Rng| names[rng.gen_range(0..nvars)].clone();
            let ncons = rng.gen_range(1..4);
            let cons: Vec<Prim<String>> = (0..ncons)
                .map(|_| match rng.gen_range(0..4) {
                    0 => Prim::Sum(pick(&mut rng), pick(&mut rng), pick(&mut rng)),
                    1 => Prim::Le(pick(&mut rng), pick(&mut rng)),
                    2 => Prim::Eq(pick(&mut rng), pick(&mut rng)),
                    _ => Prim::Prod(pick(&mut rng), pick(&mut rng), pick(&mut rng)),
                })
                .collect();
            let brute = brute_solutions(&vars, &cons, 1 << 20).unwrap();
            let mut folded = FiniteRelation::full(&names, &u);
            for c in &cons {
                let rel = relation_on(&tabulate(c, &u), &c.vars()).unwrap();
                folded = join(&folded, &rel);
            }
            assert_eq!(brute, folded, "mismatch for {cons:?}");
        }
    }

    #[test]
    fn sample_check_trivial_covers() {
        // cover = [init| covers everything trivially
        let csp = Csp::new(
            vec![s("x"), s("y")],
            vec![Prim::Le(0, 1)],
        );
        let init = IntervalBox::new(vec![Interval::new(0.0, 2.0), Interval::new(0.0, 2.0)]);
        assert_eq!(sample_check(&csp, &init, &[init.clone()], 2_000, 1), 0);
        // empty cover of a satisfiable system must show violations
        assert!(sample_check(&csp, &init, &[], 2_000, 1) > 0);
    }

    #[test]
    fn sample_check_enumeration_cover_is_sound() {
        // x * (x - 2) <= 0 decomposed; cover from branch-and-prune
        let csp = Csp::new(
            vec![s("x"), s("v"), s("w"), s("c2")],
            vec![
                Prim::Sum(1, 3, 0),
                Prim::Prod(0, 1, 2),
                Prim::In(2, Interval::new(f64::NEG_INFINITY, 0.0)),
                Prim::In(3, Interval::new(2.0, 2.0)),
            ],
        );
        let init = IntervalBox::new(vec![
            Interval::new(-10.0, 10.0),
            Interval::FULL,
            Interval::FULL,
            Interval::FULL,
        ]);
        let cover = enumerate(&csp, &init, EnumerateOpts { eps_split: 0.05, max_boxes: 1 << 20, tau: 0.0 })
            .unwrap();
        assert_eq!(sample_check(&csp, &init, &cover, 10_000, 99), 0);
        // constructed on-manifold points: x in [0,2], v = x-2, w = x*v, c2 = 2
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let points: Vec<Vec<Val>> = (0..2_000)
            .map(|_| {
                let x = BigRational::new(BigInt::from(rng.gen_range(0..=200)), BigInt::from(100));
                let v = &x - n(2);
                let w = &x * &v;
                vec![x, v, w, n(2)]
            })
            .collect();
        assert_eq!(count_escaped(&csp, &cover, &points), 0);
    }
}
