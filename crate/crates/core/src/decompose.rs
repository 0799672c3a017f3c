//! Flattening of arithmetic (in)equalities into primitive constraints.
//!
//! An expression tree over `+ - * /`, unary minus, decimal constants and
//! variables becomes a conjunction of `sum` / `prod` / `inv` / membership
//! primitives over the original variables plus fresh auxiliaries, one per
//! compound subterm. The conjunction is equivalent to the source
//! constraint over the reals once the auxiliaries are existentially
//! quantified. Constants keep their source text so membership intervals
//! can be converted outward from the decimal form.

use crate::dro::Prim;
use crate::interval::{parse_decimal_outward, Interval, ParseNumError};
use std::fmt;

/// Arithmetic expression in source form. `Const` retains the decimal text.
#[derive(Clone, Debug, PartialEq, Eq)]
pub enum ArithExpr {
    Var(String),
    Const(String),
    Neg(Box<ArithExpr>),
    Add(Box<ArithExpr>, Box<ArithExpr>),
    Sub(Box<ArithExpr>, Box<ArithExpr>),
    Mul(Box<ArithExpr>, Box<ArithExpr>),
    Div(Box<ArithExpr>, Box<ArithExpr>),
}

impl ArithExpr {
    pub fn var(n: &str) -> ArithExpr {
        ArithExpr::Var(n.to_string())
    }

    pub fn cons(n: &str) -> ArithExpr {
        ArithExpr::Const(n.to_string())
    }

    pub fn node_count(&self) -> usize {
        match self {
            ArithExpr::Var(_) | ArithExpr::Const(_) => 1,
            ArithExpr::Neg(e) => 1 + e.node_count(),
            ArithExpr::Add(a, b) | ArithExpr::Sub(a, b) | ArithExpr::Mul(a, b) | ArithExpr::Div(a, b) => {
                1 + a.node_count() + b.node_count()
            }
        }
    }

    pub fn variables(&self, out: &mut Vec<String>) {
        match self {
            ArithExpr::Var(v) => {
                if !out.contains(v) {
                    out.push(v.clone());
                }
            }
            ArithExpr::Const(_) => {}
            ArithExpr::Neg(e) => e.variables(out),
            ArithExpr::Add(a, b) | ArithExpr::Sub(a, b) | ArithExpr::Mul(a, b) | ArithExpr::Div(a, b) => {
                a.variables(out);
                b.variables(out);
            }
        }
    }
}

impl fmt::Display for ArithExpr {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            ArithExpr::Var(v) => write!(f, "{v}"),
            ArithExpr::Const(c) => write!(f, "{c}"),
            ArithExpr::Neg(e) => write!(f, "-({e})"),
            ArithExpr::Add(a, b) => write!(f, "({a} + {b})"),
            ArithExpr::Sub(a, b) => write!(f, "({a} - {b})"),
            ArithExpr::Mul(a, b) => write!(f, "({a} * {b})"),
            ArithExpr::Div(a, b) => write!(f, "({a} / {b})"),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum RelOp {
    Eq,
    Le,
    Ge,
}

impl fmt::Display for RelOp {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            RelOp::Eq => write!(f, "="),
            RelOp::Le => write!(f, "=<"),
            RelOp::Ge => write!(f, ">="),
        }
    }
}

/// A numeric constraint `lhs rel rhs` in source form.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct NumConstraint {
    pub lhs: ArithExpr,
    pub rel: RelOp,
    pub rhs: ArithExpr,
}

impl fmt::Display for NumConstraint {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{} {} {}", self.lhs, self.rel, self.rhs)
    }
}

/// Deterministic supply of auxiliary variable names.
#[derive(Clone, Debug)]
pub struct FreshNames {
    prefix: String,
    counter: u64,
}

impl FreshNames {
    pub fn new(prefix: &str) -> FreshNames {
        FreshNames { prefix: prefix.to_string(), counter: 0 }
    }

    /// Continue numbering from an existing counter (the derivation engine
    /// keeps one counter per derivation so replays are identical).
    pub fn starting_at(prefix: &str, counter: u64) -> FreshNames {
        FreshNames { prefix: prefix.to_string(), counter }
    }

    pub fn counter(&self) -> u64 {
        self.counter
    }

    fn next(&mut self) -> String {
        self.counter += 1;
        format!("{}{}", self.prefix, self.counter)
    }
}

/// Flattening output: primitives over variable names, plus the fresh
/// auxiliary names introduced (in introduction order).
#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct Flattened {
    pub prims: Vec<Prim<String>>,
    pub fresh: Vec<String>,
}

impl Flattened {
    /// Flatten one expression argument to a variable name, appending the
    /// defining primitives (used for expression arguments of the named
    /// constraint atoms `sum`/`prod`/`inv`).
    pub fn arg(&mut self, e: &ArithExpr, supply: &mut FreshNames) -> Result<String, ParseNumError> {
        self.expr(e, supply)
    }

    fn fresh_var(&mut self, supply: &mut FreshNames) -> String {
        let name = supply.next();
        self.fresh.push(name.clone());
        name
    }

    /// Name for a constant: a fresh variable pinned by a membership
    /// primitive. Exact decimals pin a singleton, everything else widens
    /// one step outward per side.
    fn constant(&mut self, text: &str, supply: &mut FreshNames) -> Result<String, ParseNumError> {
        let value = parse_decimal_outward(text)?;
        let v = self.fresh_var(supply);
        self.prims.push(Prim::In(v.clone(), value));
        Ok(v)
    }

    /// Flatten `e` to a variable name, introducing primitives as needed.
    fn expr(&mut self, e: &ArithExpr, supply: &mut FreshNames) -> Result<String, ParseNumError> {
        match e {
            ArithExpr::Var(v) => Ok(v.clone()),
            ArithExpr::Const(c) => self.constant(c, supply),
            _ => {
                let target = self.fresh_var(supply);
                self.expr_into(e, &target, supply)?;
                Ok(target)
            }
        }
    }

    /// Flatten `e` with its value bound to `target` (shared result slot).
    fn expr_into(&mut self, e: &ArithExpr, target: &str, supply: &mut FreshNames) -> Result<(), ParseNumError> {
        let t = target.to_string();
        match e {
            ArithExpr::Var(v) => self.prims.push(Prim::Eq(v.clone(), t)),
            ArithExpr::Const(c) => {
                let value = parse_decimal_outward(c)?;
                self.prims.push(Prim::In(t, value));
            }
            ArithExpr::Neg(a) => {
                // t + a = 0
                let an = self.expr(a, supply)?;
                let zero = self.constant("0", supply)?;
                self.prims.push(Prim::Sum(t, an, zero));
            }
            ArithExpr::Add(a, b) => {
                let an = self.expr(a, supply)?;
                let bn = self.expr(b, supply)?;
                self.prims.push(Prim::Sum(an, bn, t));
            }
            ArithExpr::Sub(a, b) => {
                // a - b = t  <=>  t + b = a
                let an = self.expr(a, supply)?;
                let bn = self.expr(b, supply)?;
                self.prims.push(Prim::Sum(t, bn, an));
            }
            ArithExpr::Mul(a, b) => {
                let an = self.expr(a, supply)?;
                let bn = self.expr(b, supply)?;
                self.prims.push(Prim::Prod(an, bn, t));
            }
            ArithExpr::Div(a, b) => {
                if is_literal_one(a) {
                    // the reciprocal pattern keeps its dedicated primitive
                    let bn = self.expr(b, supply)?;
                    self.prims.push(Prim::Inv(bn, t));
                } else {
                    // a / b = t  <=>  t * b = a
                    let an = self.expr(a, supply)?;
                    let bn = self.expr(b, supply)?;
                    self.prims.push(Prim::Prod(t, bn, an));
                }
            }
        }
        Ok(())
    }
}

fn is_literal_one(e: &ArithExpr) -> bool {
    matches!(e, ArithExpr::Const(c) if crate::interval::decimal_to_rational(c)
        .map(|r| r == num_rational::BigRational::from_integer(1.into()))
        .unwrap_or(false))
}

/// Interval form of a relation against a constant: `x <= c` is membership
/// of `(-inf, c_up]`, `x >= c` of `[c_down, +inf)`, `x = c` of the outward
/// enclosure of `c`.
fn const_band(rel: RelOp, text: &str, const_on_right: bool) -> Result<Interval, ParseNumError> {
    let c = parse_decimal_outward(text)?;
    // normalize to "expr REL const"
    let rel = if const_on_right {
        rel
    } else {
        match rel {
            RelOp::Le => RelOp::Ge,
            RelOp::Ge => RelOp::Le,
            RelOp::Eq => RelOp::Eq,
        }
    };
    Ok(match rel {
        RelOp::Eq => c,
        RelOp::Le => Interval::new(f64::NEG_INFINITY, c.hi()),
        RelOp::Ge => Interval::new(c.lo(), f64::INFINITY),
    })
}

/// Flatten a numeric constraint into primitives. `>=` is normalized to
/// `<=` with the sides swapped; a constant on one side of the relation
/// becomes a membership band on the other side's result variable.
pub fn flatten(nc: &NumConstraint, supply: &mut FreshNames) -> Result<Flattened, ParseNumError> {
    let mut out = Flattened::default();
    let (lhs, rel, rhs) = match nc.rel {
        RelOp::Ge => (&nc.rhs, RelOp::Le, &nc.lhs),
        r => (&nc.lhs, r, &nc.rhs),
    };
    match (lhs, rhs) {
        // expr REL const / const REL expr: fold into one membership band
        (e, ArithExpr::Const(c)) => {
            let band = const_band(rel, c, true)?;
            let en = out.expr(e, supply)?;
            out.prims.push(Prim::In(en, band));
        }
        (ArithExpr::Const(c), e) => {
            let band = const_band(rel, c, false)?;
            let en = out.expr(e, supply)?;
            out.prims.push(Prim::In(en, band));
        }
        (lhs, rhs) => match rel {
            RelOp::Eq => {
                // share the result slot so `a + b = 1 / z` style equations
                // wire both sides to one variable
                let rn = out.expr(rhs, supply)?;
                out.expr_into(lhs, &rn, supply)?;
            }
            RelOp::Le => {
                let ln = out.expr(lhs, supply)?;
                let rn = out.expr(rhs, supply)?;
                out.prims.push(Prim::Le(ln, rn));
            }
            RelOp::Ge => unreachable!("normalized above"),
        },
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use num_rational::BigRational;
    use num_traits::{One, Zero};
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;
    use ArithExpr::*;

    fn b(e: ArithExpr) -> Box<ArithExpr> {
        Box::new(e)
    }

    #[test]
    fn quadratic_inequality_matches_expected_shape() {
        // x*(x-2) <= 0  ->  sum(v, c2, x), prod(x, v, w), w in (-inf,0], c2 in [2,2]
        let nc = NumConstraint {
            lhs: Mul(b(ArithExpr::var("X")), b(Sub(b(ArithExpr::var("X")), b(ArithExpr::cons("2"))))),
            rel: RelOp::Le,
            rhs: ArithExpr::cons("0"),
        };
        let mut supply = FreshNames::new("_v");
        let out = flatten(&nc, &mut supply).unwrap();
        assert_eq!(out.fresh.len(), 3);
        let (w, v, c2) = (&out.fresh[0], &out.fresh[1], &out.fresh[2]);
        assert_eq!(
            out.prims,
            vec![
                Prim::In(c2.clone(), Interval::new(2.0, 2.0)),
                Prim::Sum(v.clone(), c2.clone(), "X".into()),
                Prim::Prod("X".into(), v.clone(), w.clone()),
                Prim::In(w.clone(), Interval::new(f64::NEG_INFINITY, 0.0)),
            ]
        );
    }

    #[test]
    fn parallel_resistance_equation_uses_inv_and_sum() {
        // 1/x + 1/y = 1/z  ->  inv(x,u), inv(y,v), inv(z,w), sum(u,v,w)
        let inv = |n: &str| Div(b(ArithExpr::cons("1")), b(ArithExpr::var(n)));
        let nc = NumConstraint {
            lhs: Add(b(inv("X")), b(inv("Y"))),
            rel: RelOp::Eq,
            rhs: inv("Z"),
        };
        let mut supply = FreshNames::new("_v");
        let out = flatten(&nc, &mut supply).unwrap();
        let (w, u, v) = (&out.fresh[0], &out.fresh[1], &out.fresh[2]);
        assert_eq!(out.fresh.len(), 3);
        assert_eq!(
            out.prims,
            vec![
                Prim::Inv("Z".into(), w.clone()),
                Prim::Inv("X".into(), u.clone()),
                Prim::Inv("Y".into(), v.clone()),
                Prim::Sum(u.clone(), v.clone(), w.clone()),
            ]
        );
    }

    #[test]
    fn representable_constant_folds_to_membership() {
        let nc = NumConstraint { lhs: ArithExpr::var("X"), rel: RelOp::Eq, rhs: ArithExpr::cons("3") };
        let mut supply = FreshNames::new("_v");
        let out = flatten(&nc, &mut supply).unwrap();
        assert_eq!(out.prims, vec![Prim::In("X".into(), Interval::new(3.0, 3.0))]);
        assert!(out.fresh.is_empty());
        // non-representable constants widen one step per side
        let nc = NumConstraint { lhs: ArithExpr::var("X"), rel: RelOp::Eq, rhs: ArithExpr::cons("0.1") };
        let out = flatten(&nc, &mut FreshNames::new("_v")).unwrap();
        match &out.prims[0] {
            Prim::In(_, a) => {
                assert!(!a.is_singleton());
                assert!(a.contains_rational(&crate::interval::decimal_to_rational("0.1").unwrap()));
            }
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn ge_normalizes_to_le() {
        let nc = NumConstraint { lhs: ArithExpr::var("X"), rel: RelOp::Ge, rhs: ArithExpr::var("Y") };
        let out = flatten(&nc, &mut FreshNames::new("_v")).unwrap();
        assert_eq!(out.prims, vec![Prim::Le("Y".into(), "X".into())]);
        // against a constant: X >= 3 is a lower band
        let nc = NumConstraint { lhs: ArithExpr::var("X"), rel: RelOp::Ge, rhs: ArithExpr::cons("3") };
        let out = flatten(&nc, &mut FreshNames::new("_v")).unwrap();
        assert_eq!(out.prims, vec![Prim::In("X".into(), Interval::new(3.0, f64::INFINITY))]);
    }

    #[test]
    fn size_linear_and_naming_deterministic() {
        let e = Mul(
            b(Add(b(ArithExpr::var("A")), b(ArithExpr::cons("1.5")))),
            b(Div(b(Sub(b(ArithExpr::var("B")), b(ArithExpr::var("C")))), b(ArithExpr::var("D")))),
        );
        let nc = NumConstraint { lhs: e.clone(), rel: RelOp::Eq, rhs: ArithExpr::var("R") };
        let out1 = flatten(&nc, &mut FreshNames::new("_v")).unwrap();
        let out2 = flatten(&nc, &mut FreshNames::new("_v")).unwrap();
        assert_eq!(out1, out2);
        let nodes = e.node_count() + 1;
        assert!(out1.prims.len() <= 2 * nodes, "{} primitives for {} nodes", out1.prims.len(), nodes);
    }

    /// Exact evaluation of an expression at a rational assignment.
    fn eval(e: &ArithExpr, env: &dyn Fn(&str) -> BigRational) -> Option<BigRational> {
        Some(match e {
            Var(v) => env(v),
            Const(c) => crate::interval::decimal_to_rational(c).ok()?,
            Neg(a) => -eval(a, env)?,
            Add(a, c) => eval(a, env)? + eval(c, env)?,
            Sub(a, c) => eval(a, env)? - eval(c, env)?,
            Mul(a, c) => eval(a, env)? * eval(c, env)?,
            Div(a, c) => {
                let d = eval(c, env)?;
                if d.is_zero() {
                    return None;
                }
                eval(a, env)? / d
            }
        })
    }

    /// Solve the flattened system functionally: every fresh variable is a
    /// defined subterm value, so witnesses are computable by iterating the
    /// defining primitives until the environment stops growing.
    fn witness_all(
        prims: &[Prim<String>],
        base: &std::collections::BTreeMap<String, BigRational>,
    ) -> std::collections::BTreeMap<String, BigRational> {
        let mut env = base.clone();
        for _ in 0..prims.len() + 2 {
            for p in prims {
                match p {
                    Prim::In(v, a) => {
                        if !env.contains_key(v) && a.is_singleton() {
                            env.insert(v.clone(), BigRational::from_float(a.lo()).unwrap());
                        }
                    }
                    Prim::Sum(x, y, z) => {
                        match (env.get(x).cloned(), env.get(y).cloned(), env.get(z).cloned()) {
                            (Some(a), Some(b), None) => {
                                env.insert(z.clone(), a + b);
                            }
                            (Some(a), None, Some(c)) => {
                                env.insert(y.clone(), c - a);
                            }
                            (None, Some(b), Some(c)) => {
                                env.insert(x.clone(), c - b);
                            }
                            _ => {}
                        }
                    }
                    Prim::Prod(x, y, z) => {
                        match (env.get(x).cloned(), env.get(y).cloned(), env.get(z).cloned()) {
                            (Some(a), Some(b), None) => {
                                env.insert(z.clone(), a * b);
                            }
                            (Some(a), None, Some(c)) if !a.is_zero() => {
                                env.insert(y.clone(), c / a);
                            }
                            (None, Some(b), Some(c)) if !b.is_zero() => {
                                env.insert(x.clone(), c / b);
                            }
                            _ => {}
                        }
                    }
                    Prim::Inv(x, y) => match (env.get(x).cloned(), env.get(y).cloned()) {
                        (Some(a), None) if !a.is_zero() => {
                            env.insert(y.clone(), BigRational::one() / a);
                        }
                        (None, Some(b)) if !b.is_zero() => {
                            env.insert(x.clone(), BigRational::one() / b);
                        }
                        _ => {}
                    },
                    Prim::Eq(x, y) => match (env.get(x).cloned(), env.get(y).cloned()) {
                        (Some(a), None) => {
                            env.insert(y.clone(), a);
                        }
                        (None, Some(b)) => {
                            env.insert(x.clone(), b);
                        }
                        _ => {}
                    },
                    Prim::Le(_, _) => {}
                }
            }
        }
        env
    }

    fn prim_holds(p: &Prim<String>, env: &std::collections::BTreeMap<String, BigRational>) -> Option<bool> {
        let g = |v: &String| env.get(v).cloned();
        Some(match p {
            Prim::Sum(x, y, z) => g(x)? + g(y)? == g(z)?,
            Prim::Prod(x, y, z) => g(x)? * g(y)? == g(z)?,
            Prim::Inv(x, y) => g(x)? * g(y)? == BigRational::one(),
            Prim::Le(x, y) => g(x)? <= g(y)?,
            Prim::Eq(x, y) => g(x)? == g(y)?,
            Prim::In(x, a) => a.contains_rational(&g(x)?),
        })
    }

    #[test]
    fn semantic_equivalence_on_sampled_assignments() {
        // random small expressions, random dyadic assignments: the source
        // constraint holds iff the flattened system has a witness
        let mut rng = ChaCha8Rng::seed_from_u64(0xf1a7);
        let mut checked = 0;
        while checked < 2_000 {
            let vars = ["X", "Y", "Z"];
            let e1 = random_expr(&mut rng, 3, &vars);
            let e2 = random_expr(&mut rng, 2, &vars);
            let rel = match rng.gen_range(0..3) {
                0 => RelOp::Eq,
                1 => RelOp::Le,
                _ => RelOp::Ge,
            };
            let nc = NumConstraint { lhs: e1.clone(), rel, rhs: e2.clone() };
            let out = match flatten(&nc, &mut FreshNames::new("_v")) {
                Ok(o) => o,
                Err(_) => continue,
            };
            let assignment: std::collections::BTreeMap<String, BigRational> = vars
                .iter()
                .map(|v| {
                    (v.to_string(), BigRational::from_float(rng.gen_range(-16i32..16) as f64 / 4.0).unwrap())
                })
                .collect();
            let env = |v: &str| assignment[v].clone();
            let (lv, rv) = match (eval(&e1, &env), eval(&e2, &env)) {
                (Some(l), Some(r)) => (l, r),
                _ => continue, // division by zero in the sample
            };
            let holds = match rel {
                RelOp::Eq => lv == rv,
                RelOp::Le => lv <= rv,
                RelOp::Ge => lv >= rv,
            };
            let full = witness_all(&out.prims, &assignment);
            if out.prims.iter().any(|p| prim_holds(p, &full).is_none()) {
                // witness propagation stalled on a zero divisor; skip
                continue;
            }
            let system_holds = out.prims.iter().all(|p| prim_holds(p, &full).unwrap());
            // all sampled constants are dyadic, so the membership bands are
            // exact and the equivalence is two-sided
            assert_eq!(system_holds, holds, "{nc} at {assignment:?} (prims {:?})", out.prims);
            checked += 1;
        }
    }

    fn random_expr(rng: &mut ChaCha8Rng, depth: usize, vars: &[&str]) -> ArithExpr {
        if depth == 0 || rng.gen_range(0..4) == 0 {
            if rng.gen() {
                ArithExpr::var(vars[rng.gen_range(0..vars.len())])
            } else {
                // dyadic constants stay exact in both float and rational forms
                ArithExpr::Const(format!("{}", rng.gen_range(-8i32..8) as f64 / 4.0))
            }
        } else {
            let a = b(random_expr(rng, depth - 1, vars));
            let c = b(random_expr(rng, depth - 1, vars));
            match rng.gen_range(0..5) {
                0 => Add(a, c),
                1 => Sub(a, c),
                2 => Mul(a, c),
                3 => Div(a, c),
                _ => Neg(a),
            }
        }
    }
}
