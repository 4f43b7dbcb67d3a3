//! Exact rational arithmetic used throughout the mechanism and payment logic.
//!
//! All costs, values, budgets, and payments are arbitrary-precision rationals
//! kept in canonical form (reduced, denominator positive). Floating point is
//! confined to the LP relaxation / constant-evaluation paths; every comparison
//! that decides an allocation or a payment happens on `Rat`.

use crate::error::{Error, Result};
use num::bigint::BigInt;
use num::rational::BigRational;
use num::{One, ToPrimitive, Zero};

pub type Rat = BigRational;

/// `n / d` as an exact rational. Panics on `d == 0`; use for literals only.
pub fn rat(n: i64, d: i64) -> Rat {
    assert!(d != 0, "zero denominator");
    Rat::new(BigInt::from(n), BigInt::from(d))
}

pub fn rat_int(n: i64) -> Rat {
    Rat::from_integer(BigInt::from(n))
}

/// Parses `"p/q"` or `"p"` with optional sign. The result is canonicalized,
/// so `"2/4"` and `"-3/-6"` both parse to `1/2`.
pub fn parse_rat(s: &str) -> Result<Rat> {
    let bad = || Error::BadRational(s.to_string());
    let t = s.trim();
    if t.is_empty() {
        return Err(bad());
    }
    let (numer, denom) = match t.split_once('/') {
        Some((p, q)) => (
            p.trim().parse::<BigInt>().map_err(|_| bad())?,
            q.trim().parse::<BigInt>().map_err(|_| bad())?,
        ),
        None => (t.parse::<BigInt>().map_err(|_| bad())?, BigInt::one()),
    };
    if denom.is_zero() {
        return Err(bad());
    }
    Ok(Rat::new(numer, denom))
}

/// Formats a rational as `"p/q"`, or just `"p"` when the denominator is 1.
/// This is the inverse of [`parse_rat`] and is byte-stable under round trips.
pub fn format_rat(r: &Rat) -> String {
    r.to_string()
}

pub fn rat_to_f64(r: &Rat) -> f64 {
    r.to_f64().unwrap_or_else(|| {
        let n = r.numer().to_f64().unwrap_or(f64::MAX);
        let d = r.denom().to_f64().unwrap_or(f64::MAX);
        n / d
    })
}

/// Exact conversion of a finite double into a rational (doubles are dyadic).
pub fn rat_from_f64(x: f64) -> Rat {
    Rat::from_float(x).expect("finite float")
}

/// Rational lower bound on Euler's number, used so that bound checks of the
/// form `value >= g(e) * opt` are asserted conservatively (never stronger
/// than what holds for the true constant).
pub fn e_lower() -> Rat {
    rat(2_718_281_828, 1_000_000_000)
}

/// Rational upper bound on Euler's number. See [`e_lower`].
pub fn e_upper() -> Rat {
    rat(2_718_281_829, 1_000_000_000)
}

/// `1 / 2^k`, the relative width target used by payment bisection.
pub fn pow2_inv(k: usize) -> Rat {
    Rat::new(BigInt::one(), BigInt::one() << k)
}
