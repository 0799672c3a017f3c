//! Floating-point intervals with outward rounding.
//!
//! An `Interval` denotes the set of reals between two `f64` endpoints
//! (closed on both sides; infinities mark unbounded sides). The family of
//! all such intervals contains the full line and is closed under
//! intersection, so it forms the domain system the solver computes over.
//! Every arithmetic operation returns an interval that provably contains
//! the exact real result set.

use crate::rounding::{
    add_down, add_up, div_down, div_up, fix_zero, mul_down, mul_up, next_down, next_up, sub_down,
    sub_up,
};
use num_bigint::BigInt;
use num_rational::BigRational;
use num_traits::{One, Signed, ToPrimitive, Zero};
use std::fmt;

/// A closed floating-point interval, or the canonical empty interval.
///
/// Invariants: endpoints are never NaN, `lo <= hi` for nonempty intervals,
/// negative zero is normalized away, and the empty interval has exactly one
/// representation (so derived equality is set equality).
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Interval {
    lo: f64,
    hi: f64,
}

// No NaN can appear, so equality is total.
impl Eq for Interval {}

/// Result of extended interval division: at most two pieces.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct DivPieces {
    pub neg: Option<Interval>,
    pub pos: Option<Interval>,
}

impl DivPieces {
    pub fn none() -> Self {
        DivPieces { neg: None, pos: None }
    }

    fn one(i: Interval) -> Self {
        DivPieces { neg: Some(i), pos: None }
    }

    fn two(a: Interval, b: Interval) -> Self {
        DivPieces { neg: Some(a), pos: Some(b) }
    }

    pub fn iter(&self) -> impl Iterator<Item = Interval> {
        self.neg.into_iter().chain(self.pos)
    }

    /// Hull of all pieces (empty when there are none).
    pub fn hull(&self) -> Interval {
        self.iter().fold(Interval::EMPTY, |acc, p| acc.hull(p))
    }
}

impl Interval {
    pub const EMPTY: Interval = Interval { lo: f64::INFINITY, hi: f64::NEG_INFINITY };
    pub const FULL: Interval = Interval { lo: f64::NEG_INFINITY, hi: f64::INFINITY };

    /// `[lo, hi]` when `lo <= hi`, otherwise the empty interval. Degenerate
    /// all-infinite endpoints ([-inf,-inf], [+inf,+inf]) contain no reals and
    /// also normalize to empty.
    pub fn new(lo: f64, hi: f64) -> Interval {
        debug_assert!(!lo.is_nan() && !hi.is_nan());
        if lo > hi || lo == f64::INFINITY || hi == f64::NEG_INFINITY {
            Interval::EMPTY
        } else {
            Interval { lo: fix_zero(lo), hi: fix_zero(hi) }
        }
    }

    pub fn singleton(x: f64) -> Interval {
        Interval::new(x, x)
    }

    pub fn is_empty(&self) -> bool {
        self.lo > self.hi
    }

    /// Lower endpoint. Meaningless for the empty interval.
    pub fn lo(&self) -> f64 {
        self.lo
    }

    pub fn hi(&self) -> f64 {
        self.hi
    }

    pub fn is_singleton(&self) -> bool {
        self.lo == self.hi
    }

    pub fn is_bounded(&self) -> bool {
        !self.is_empty() && self.lo.is_finite() && self.hi.is_finite()
    }

    pub fn contains(&self, x: f64) -> bool {
        self.lo <= x && x <= self.hi
    }

    pub fn contains_interval(&self, other: &Interval) -> bool {
        other.is_empty() || (self.lo <= other.lo && other.hi <= self.hi)
    }

    /// Upper bound on the diameter (0 for empty and singletons, infinite for
    /// unbounded intervals).
    pub fn width(&self) -> f64 {
        if self.is_empty() {
            0.0
        } else {
            sub_up(self.hi, self.lo)
        }
    }

    pub fn intersect(&self, other: Interval) -> Interval {
        if self.is_empty() || other.is_empty() {
            return Interval::EMPTY;
        }
        Interval::new(self.lo.max(other.lo), self.hi.min(other.hi))
    }

    /// Smallest interval containing the union.
    pub fn hull(&self, other: Interval) -> Interval {
        if self.is_empty() {
            return other;
        }
        if other.is_empty() {
            return *self;
        }
        Interval::new(self.lo.min(other.lo), self.hi.max(other.hi))
    }

    /// True when the union of the two intervals is itself an interval of
    /// reals: they share an endpoint or overlap.
    pub fn adjacent(&self, other: Interval) -> bool {
        !self.is_empty() && !other.is_empty() && self.lo <= other.hi && other.lo <= self.hi
    }

    pub fn add(&self, other: Interval) -> Interval {
        if self.is_empty() || other.is_empty() {
            return Interval::EMPTY;
        }
        Interval::new(add_down(self.lo, other.lo), add_up(self.hi, other.hi))
    }

    pub fn sub(&self, other: Interval) -> Interval {
        if self.is_empty() || other.is_empty() {
            return Interval::EMPTY;
        }
        Interval::new(sub_down(self.lo, other.hi), sub_up(self.hi, other.lo))
    }

    pub fn neg(&self) -> Interval {
        if self.is_empty() {
            return Interval::EMPTY;
        }
        Interval::new(-self.hi, -self.lo)
    }

    pub fn mul(&self, other: Interval) -> Interval {
        if self.is_empty() || other.is_empty() {
            return Interval::EMPTY;
        }
        let (al, ah, bl, bh) = (self.lo, self.hi, other.lo, other.hi);
        let lo = mul_down(al, bl)
            .min(mul_down(al, bh))
            .min(mul_down(ah, bl))
            .min(mul_down(ah, bh));
        let hi = mul_up(al, bl)
            .max(mul_up(al, bh))
            .max(mul_up(ah, bl))
            .max(mul_up(ah, bh));
        Interval::new(lo, hi)
    }

    /// Extended division: pieces whose union contains every `x / y` with
    /// `x` in `self`, `y` in `other`, `y != 0`. A divisor interval spanning
    /// zero with the dividend on one side yields two unbounded pieces;
    /// `[0,0]` as divisor yields no pieces at all.
    pub fn div(&self, other: Interval) -> DivPieces {
        let (a, b) = (*self, other);
        if a.is_empty() || b.is_empty() || (b.lo == 0.0 && b.hi == 0.0) {
            return DivPieces::none();
        }
        if b.lo > 0.0 || b.hi < 0.0 {
            // divisor has one sign: ordinary division via directed candidates
            let lo = div_down(a.lo, b.lo)
                .min(div_down(a.lo, b.hi))
                .min(div_down(a.hi, b.lo))
                .min(div_down(a.hi, b.hi));
            let hi = div_up(a.lo, b.lo)
                .max(div_up(a.lo, b.hi))
                .max(div_up(a.hi, b.lo))
                .max(div_up(a.hi, b.hi));
            return DivPieces::one(Interval::new(lo, hi));
        }
        // divisor contains zero (but is not [0,0])
        if a.lo == 0.0 && a.hi == 0.0 {
            return DivPieces::one(Interval::singleton(0.0));
        }
        if a.contains(0.0) {
            return DivPieces::one(Interval::FULL);
        }
        if a.lo > 0.0 {
            let neg_piece = |den: f64| Interval::new(f64::NEG_INFINITY, div_up(a.lo, den));
            let pos_piece = |den: f64| Interval::new(div_down(a.lo, den), f64::INFINITY);
            return match (b.lo < 0.0, b.hi > 0.0) {
                (true, true) => DivPieces::two(neg_piece(b.lo), pos_piece(b.hi)),
                (true, false) => DivPieces::one(neg_piece(b.lo)),
                (false, true) => DivPieces::one(pos_piece(b.hi)),
                (false, false) => unreachable!(),
            };
        }
        // a.hi < 0.0
        let neg_piece = |den: f64| Interval::new(f64::NEG_INFINITY, div_up(a.hi, den));
        let pos_piece = |den: f64| Interval::new(div_down(a.hi, den), f64::INFINITY);
        match (b.lo < 0.0, b.hi > 0.0) {
            (true, true) => DivPieces::two(neg_piece(b.hi), pos_piece(b.lo)),
            (true, false) => DivPieces::one(pos_piece(b.lo)),
            (false, true) => DivPieces::one(neg_piece(b.hi)),
            (false, false) => unreachable!(),
        }
    }

    /// Projection of the relation `x * y = z` onto `x`, given domains for
    /// `z` (self) and `y`. Unlike `div`, this accounts for the pair
    /// `y = 0, z = 0`, which makes every `x` admissible.
    pub fn div_rel(&self, den: Interval) -> DivPieces {
        if !self.is_empty() && !den.is_empty() && self.contains(0.0) && den.contains(0.0) {
            return DivPieces::one(Interval::FULL);
        }
        self.div(den)
    }

    /// Split into two halves sharing the split point. Fails when the
    /// interval is empty, a singleton, or has no representable interior
    /// point. Unbounded intervals split at a finite point.
    pub fn split(&self) -> Result<(Interval, Interval), Unsplittable> {
        if self.is_empty() || self.is_singleton() {
            return Err(Unsplittable);
        }
        let (lo, hi) = (self.lo, self.hi);
        let mut m = if lo == f64::NEG_INFINITY && hi == f64::INFINITY {
            0.0
        } else if lo == f64::NEG_INFINITY {
            let m = -(hi.abs() * 2.0).max(1.0);
            if m.is_finite() {
                m
            } else {
                f64::MIN
            }
        } else if hi == f64::INFINITY {
            let m = (lo.abs() * 2.0).max(1.0);
            if m.is_finite() {
                m
            } else {
                f64::MAX
            }
        } else {
            0.5 * lo + 0.5 * hi
        };
        if m <= lo {
            m = next_up(lo);
        }
        if m >= hi {
            m = next_down(hi);
        }
        if m <= lo || m >= hi {
            return Err(Unsplittable);
        }
        Ok((Interval::new(lo, m), Interval::new(m, hi)))
    }

    /// Exact rational value of an endpoint (None for infinite endpoints).
    pub fn lo_rational(&self) -> Option<BigRational> {
        BigRational::from_float(self.lo)
    }

    pub fn hi_rational(&self) -> Option<BigRational> {
        BigRational::from_float(self.hi)
    }

    /// Exact membership test for a rational point.
    pub fn contains_rational(&self, x: &BigRational) -> bool {
        if self.is_empty() {
            return false;
        }
        let above_lo = match self.lo_rational() {
            Some(lo) => &lo <= x,
            None => self.lo == f64::NEG_INFINITY,
        };
        let below_hi = match self.hi_rational() {
            Some(hi) => x <= &hi,
            None => self.hi == f64::INFINITY,
        };
        above_lo && below_hi
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct Unsplittable;

impl fmt::Display for Unsplittable {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "unsplittable interval")
    }
}

impl std::error::Error for Unsplittable {}

impl fmt::Display for Interval {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", format_outward(self, 17))
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct ParseNumError {
    pub text: String,
    pub reason: &'static str,
}

impl fmt::Display for ParseNumError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "malformed numeral {:?}: {}", self.text, self.reason)
    }
}

impl std::error::Error for ParseNumError {}

/// Exact rational value of a decimal numeral (sign, digits, optional
/// fraction, optional exponent).
pub fn decimal_to_rational(text: &str) -> Result<BigRational, ParseNumError> {
    let err = |reason| ParseNumError { text: text.to_string(), reason };
    let s = text.trim();
    let (neg, s) = match s.strip_prefix('-') {
        Some(rest) => (true, rest),
        None => (false, s.strip_prefix('+').unwrap_or(s)),
    };
    let (mantissa_part, exp_part) = match s.find(['e', 'E']) {
        Some(i) => (&s[..i], Some(&s[i + 1..])),
        None => (s, None),
    };
    let (int_part, frac_part) = match mantissa_part.find('.') {
        Some(i) => (&mantissa_part[..i], &mantissa_part[i + 1..]),
        None => (mantissa_part, ""),
    };
    if int_part.is_empty() && frac_part.is_empty() {
        return Err(err("no digits"));
    }
    if !int_part.chars().all(|c| c.is_ascii_digit()) || !frac_part.chars().all(|c| c.is_ascii_digit()) {
        return Err(err("invalid digit"));
    }
    let exp: i64 = match exp_part {
        Some(e) if e.is_empty() => return Err(err("empty exponent")),
        Some(e) => e.parse().map_err(|_| err("invalid exponent"))?,
        None => 0,
    };
    let digits = format!("{int_part}{frac_part}");
    let mantissa: BigInt = digits.parse().map_err(|_| err("invalid digits"))?;
    let mantissa = if neg { -mantissa } else { mantissa };
    let ten = BigInt::from(10);
    let net_exp = exp - frac_part.len() as i64;
    let value = if net_exp >= 0 {
        BigRational::from_integer(mantissa * ten.pow(net_exp as u32))
    } else {
        BigRational::new(mantissa, ten.pow((-net_exp) as u32))
    };
    Ok(value)
}

/// Smallest interval with float endpoints containing the exact value of a
/// decimal numeral. Exactly representable decimals yield a singleton;
/// anything else yields two consecutive floats straddling the value.
pub fn parse_decimal_outward(text: &str) -> Result<Interval, ParseNumError> {
    let exact = decimal_to_rational(text)?;
    Ok(enclose_rational(&exact))
}

/// Tightest interval with float endpoints containing a rational.
pub fn enclose_rational(exact: &BigRational) -> Interval {
    // correctly rounded nearest conversion, then nudge by exact comparison
    let approx = rational_to_f64_nearest(exact);
    if approx.is_infinite() {
        return if approx > 0.0 {
            Interval::new(f64::MAX, f64::INFINITY)
        } else {
            Interval::new(f64::NEG_INFINITY, f64::MIN)
        };
    }
    match BigRational::from_float(approx) {
        Some(v) if &v == exact => Interval::singleton(approx),
        Some(v) if &v < exact => Interval::new(approx, next_up(approx)),
        Some(_) => Interval::new(next_down(approx), approx),
        None => unreachable!("approx is finite"),
    }
}

/// Round a rational to the nearest f64 (ties to even), overflowing to
/// infinity. Goes through the decimal string only for scale estimation;
/// correctness comes from the exact comparison in `enclose_rational`.
fn rational_to_f64_nearest(x: &BigRational) -> f64 {
    if x.is_zero() {
        return 0.0;
    }
    // Scale the rational into the u64 mantissa range, convert, then apply
    // the binary exponent. At most 1 ulp of slop here, corrected by caller.
    let neg = x.is_negative();
    let mag = x.abs();
    let (num, den) = (mag.numer().clone(), mag.denom().clone());
    let shift = (num.bits() as i64) - (den.bits() as i64) - 63;
    let scaled: BigInt = if shift >= 0 {
        num / (den << shift as u64)
    } else {
        (num << (-shift) as u64) / den
    };
    let lead = scaled.to_u64().unwrap_or(u64::MAX) as f64;
    let v = lead * pow2(shift);
    // v approximates |x| within a couple of ulps; refine by stepping while
    // the exact comparison says we are off by more than half an ulp.
    let mut v = v;
    for _ in 0..4 {
        let vr = match BigRational::from_float(v) {
            Some(r) => r,
            None => break,
        };
        if vr < mag {
            let up = next_up(v);
            match BigRational::from_float(up) {
                Some(ur) => {
                    // distance comparison: move up if up is closer or equal
                    if (&mag - &vr) > (&ur - &mag).abs() {
                        v = up;
                        continue;
                    }
                }
                None => {
                    // up is infinity; stay unless mag is beyond the midpoint of MAX..inf
                    if (&mag - &vr) > (&vr - BigRational::from_float(next_down(v)).unwrap()) {
                        // mag far above MAX
                        v = up;
                        continue;
                    }
                }
            }
        } else if vr > mag {
            let dn = next_down(v);
            match BigRational::from_float(dn) {
                Some(dr) => {
                    if (&vr - &mag) > (&mag - &dr).abs() {
                        v = dn;
                        continue;
                    }
                }
                None => {}
            }
        }
        break;
    }
    if neg {
        -v
    } else {
        v
    }
}

fn pow2(e: i64) -> f64 {
    // exact for the range used here; saturates at the format limits
    if e >= 1024 {
        f64::INFINITY
    } else if e < -1074 {
        0.0
    } else {
        f64::from_bits(if e >= -1022 {
            ((e + 1023) as u64) << 52
        } else {
            1u64 << (e + 1074) as u64
        })
    }
}

/// Render an interval as `[L,U]` with `L` rounded toward -inf and `U` toward
/// +inf at `digits` significant decimal digits, so that re-parsing the text
/// yields an interval containing the original.
pub fn format_outward(a: &Interval, digits: usize) -> String {
    if a.is_empty() {
        return "empty".to_string();
    }
    format!("[{},{}]", format_endpoint(a.lo, digits, false), format_endpoint(a.hi, digits, true))
}

/// One directed endpoint. `digits >= 17` uses the shortest exact-round-trip
/// form (its decimal value always lies between the endpoint's neighbors, so
/// outward re-parsing still contains the original endpoint).
pub fn format_endpoint(x: f64, digits: usize, round_up: bool) -> String {
    if x == f64::NEG_INFINITY {
        return "-inf".to_string();
    }
    if x == f64::INFINITY {
        return "+inf".to_string();
    }
    if x == 0.0 {
        return "0".to_string();
    }
    if digits >= 17 {
        return format!("{x}");
    }
    let digits = digits.max(1);
    let exact = BigRational::from_float(x).expect("finite");
    let mag = exact.abs();
    // decimal exponent e with 10^e <= |x| < 10^(e+1)
    let mut e = x.abs().log10().floor() as i64;
    let ten = BigInt::from(10);
    let pow = |k: i64| -> BigRational {
        if k >= 0 {
            BigRational::from_integer(ten.pow(k as u32))
        } else {
            BigRational::new(BigInt::one(), ten.pow((-k) as u32))
        }
    };
    while pow(e) > mag {
        e -= 1;
    }
    while pow(e + 1) <= mag {
        e += 1;
    }
    // scaled = x * 10^(digits-1-e); take floor/ceil to get the digit string
    let scale = (digits as i64) - 1 - e;
    let scaled = &exact * pow(scale);
    let n = if round_up {
        scaled.ceil().to_integer()
    } else {
        scaled.floor().to_integer()
    };
    render_scientific(&n, e, digits)
}

fn render_scientific(n: &BigInt, mut e: i64, digits: usize) -> String {
    let neg = n.is_negative();
    let mut ds = n.abs().to_string();
    if ds.len() > digits {
        // ceil carried into an extra digit (e.g. 999 -> 1000)
        e += (ds.len() - digits) as i64;
        ds.truncate(digits);
    }
    while ds.len() > 1 && ds.ends_with('0') {
        ds.pop();
    }
    let sign = if neg { "-" } else { "" };
    if (-4..=15).contains(&e) {
        // plain decimal
        let e = e;
        let s = if e >= 0 {
            let ipart_len = (e as usize) + 1;
            if ds.len() <= ipart_len {
                format!("{}{}", ds, "0".repeat(ipart_len - ds.len()))
            } else {
                format!("{}.{}", &ds[..ipart_len], &ds[ipart_len..])
            }
        } else {
            format!("0.{}{}", "0".repeat((-e - 1) as usize), ds)
        };
        format!("{sign}{s}")
    } else {
        let mantissa = if ds.len() == 1 {
            ds
        } else {
            format!("{}.{}", &ds[..1], &ds[1..])
        };
        format!("{sign}{mantissa}e{e}")
    }
}
