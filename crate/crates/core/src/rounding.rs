//! Directed rounding for `f64` endpoint arithmetic.
//!
//! Interval endpoints must round toward -inf (lower) or +inf (upper) so that
//! computed intervals always contain the exact real result. Instead of
//! flipping the hardware rounding mode, each operation is computed in the
//! default round-to-nearest mode and the exact residual is recovered
//! afterwards (2Sum for addition, FMA for multiplication and division). The
//! residual's sign tells whether the nearest result landed above or below the
//! exact value, and the result is stepped one ulp when it landed on the wrong
//! side. When the residual is zero the operation was exact and no widening
//! happens at all.
//!
//! Near the edges of the format (overflow, results in the subnormal range)
//! the residual is not trustworthy; those paths widen by one ulp instead,
//! which is still sound.
//!
//! Inputs are never NaN. Infinities are legal endpoint values; the
//! indeterminate combinations that arise from unbounded endpoints
//! (inf - inf, 0 * inf) resolve to the widest sound value in the requested
//! direction, matching their use as bounds of unbounded real sets.

/// Sign of `a + b - fl(a + b)` for finite inputs with finite sum, exact.
#[inline]
fn two_sum_err(a: f64, b: f64, s: f64) -> f64 {
    let bv = s - a;
    (a - (s - bv)) + (b - bv)
}

/// Below this magnitude the FMA residual of a product or quotient may
/// itself underflow and round to zero, so its sign cannot be trusted.
/// (The representability condition needs the result exponent to stay at
/// least ~53 bits above the subnormal range; 1e-290 clears that amply.)
const RESIDUAL_SAFE: f64 = 1e-290;

#[inline]
pub fn add_down(a: f64, b: f64) -> f64 {
    debug_assert!(!a.is_nan() && !b.is_nan());
    let s = a + b;
    if s.is_nan() {
        // inf + -inf: bound of an unbounded difference, widest downward
        return f64::NEG_INFINITY;
    }
    if s.is_infinite() {
        if s > 0.0 && a.is_finite() && b.is_finite() {
            // overflowed past MAX: the exact sum is finite, round down to MAX
            return f64::MAX;
        }
        return s;
    }
    let err = two_sum_err(a, b, s);
    if err < 0.0 {
        next_down(s)
    } else {
        fix_zero(s)
    }
}

#[inline]
pub fn add_up(a: f64, b: f64) -> f64 {
    debug_assert!(!a.is_nan() && !b.is_nan());
    let s = a + b;
    if s.is_nan() {
        return f64::INFINITY;
    }
    if s.is_infinite() {
        if s < 0.0 && a.is_finite() && b.is_finite() {
            return f64::MIN;
        }
        return s;
    }
    let err = two_sum_err(a, b, s);
    if err > 0.0 {
        next_up(s)
    } else {
        fix_zero(s)
    }
}

#[inline]
pub fn sub_down(a: f64, b: f64) -> f64 {
    add_down(a, -b)
}

#[inline]
pub fn sub_up(a: f64, b: f64) -> f64 {
    add_up(a, -b)
}

/// `0 * x = 0` for every endpoint `x`, including infinities: an exact zero
/// endpoint contributes the product 0 regardless of how unbounded the other
/// factor is (the underlying real sets never realize an infinite product).
#[inline]
pub fn mul_down(a: f64, b: f64) -> f64 {
    debug_assert!(!a.is_nan() && !b.is_nan());
    if a == 0.0 || b == 0.0 {
        return 0.0;
    }
    let p = a * b;
    if p.is_infinite() {
        if p > 0.0 && a.is_finite() && b.is_finite() {
            return f64::MAX;
        }
        return p;
    }
    if p.abs() < RESIDUAL_SAFE {
        // underflow range: residual unreliable, widen one step
        return if (a > 0.0) == (b > 0.0) {
            // exact product positive: zero is a sound floor
            if p == 0.0 {
                0.0
            } else {
                next_down(p)
            }
        } else {
            next_down(p)
        };
    }
    let err = a.mul_add(b, -p);
    if err < 0.0 {
        next_down(p)
    } else {
        fix_zero(p)
    }
}

#[inline]
pub fn mul_up(a: f64, b: f64) -> f64 {
    debug_assert!(!a.is_nan() && !b.is_nan());
    if a == 0.0 || b == 0.0 {
        return 0.0;
    }
    let p = a * b;
    if p.is_infinite() {
        if p < 0.0 && a.is_finite() && b.is_finite() {
            return f64::MIN;
        }
        return p;
    }
    if p.abs() < RESIDUAL_SAFE {
        return if (a > 0.0) == (b > 0.0) {
            next_up(p)
        } else if p == 0.0 {
            // exact product negative: zero is a sound ceiling
            0.0
        } else {
            next_up(p)
        };
    }
    let err = a.mul_add(b, -p);
    if err > 0.0 {
        next_up(p)
    } else {
        fix_zero(p)
    }
}

/// Directed division. `b` must be nonzero; zero-containing divisors are
/// handled by extended interval division before endpoints are divided.
#[inline]
pub fn div_down(a: f64, b: f64) -> f64 {
    debug_assert!(!a.is_nan() && !b.is_nan() && b != 0.0);
    if a == 0.0 {
        return 0.0;
    }
    if b.is_infinite() {
        if a.is_infinite() {
            // indeterminate bound: widest downward
            return f64::NEG_INFINITY;
        }
        // finite / inf: exact limit is 0 approached from one side
        return if (a > 0.0) == (b > 0.0) { 0.0 } else { next_down(0.0) };
    }
    let q = a / b;
    if q.is_infinite() {
        if q > 0.0 && a.is_finite() {
            return f64::MAX;
        }
        return q;
    }
    if q.abs() < RESIDUAL_SAFE || a.abs() < RESIDUAL_SAFE {
        return if (a > 0.0) == (b > 0.0) {
            if q == 0.0 {
                0.0
            } else {
                next_down(q)
            }
        } else {
            next_down(q)
        };
    }
    let r = q.mul_add(b, -a); // q*b - a, exact in the guarded range
    if r != 0.0 && (r > 0.0) == (b > 0.0) {
        next_down(q)
    } else {
        fix_zero(q)
    }
}

#[inline]
pub fn div_up(a: f64, b: f64) -> f64 {
    debug_assert!(!a.is_nan() && !b.is_nan() && b != 0.0);
    if a == 0.0 {
        return 0.0;
    }
    if b.is_infinite() {
        if a.is_infinite() {
            return f64::INFINITY;
        }
        return if (a > 0.0) == (b > 0.0) { next_up(0.0) } else { 0.0 };
    }
    let q = a / b;
    if q.is_infinite() {
        if q < 0.0 && a.is_finite() {
            return f64::MIN;
        }
        return q;
    }
    if q.abs() < RESIDUAL_SAFE || a.abs() < RESIDUAL_SAFE {
        return if (a > 0.0) == (b > 0.0) {
            next_up(q)
        } else if q == 0.0 {
            0.0
        } else {
            next_up(q)
        };
    }
    let r = q.mul_add(b, -a);
    if r != 0.0 && (r > 0.0) != (b > 0.0) {
        next_up(q)
    } else {
        fix_zero(q)
    }
}

#[inline]
pub fn next_up(x: f64) -> f64 {
    debug_assert!(!x.is_nan());
    x.next_up()
}

#[inline]
pub fn next_down(x: f64) -> f64 {
    debug_assert!(!x.is_nan());
    x.next_down()
}

/// Normalize -0.0 to +0.0 so endpoint equality is canonical.
#[inline]
pub fn fix_zero(x: f64) -> f64 {
    if x == 0.0 {
        0.0
    } else {
        x
    }
}
