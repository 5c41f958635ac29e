//! Exact-or-float real numbers.
//!
//! Distances built from rational data stay exact; anything that passes
//! through a transcendental function (chordal circle metrics) is carried as
//! a 64-bit float and compared with the global tolerance [`TOLERANCE`].

use std::cmp::Ordering;
use std::fmt;
use std::ops::{Add, Mul, Sub};
use std::str::FromStr;

use num_rational::Rational64;
use num_traits::{CheckedAdd, CheckedMul, CheckedSub, Signed, ToPrimitive, Zero};
use serde::de::{self, Deserializer, Visitor};
use serde::{Deserialize, Serialize, Serializer};

/// Global comparison tolerance for float-valued distances.
pub const TOLERANCE: f64 = 1e-9;

#[derive(Clone, Copy, Debug)]
pub enum Real {
    Exact(Rational64),
    Float(f64),
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
#[error("cannot parse `{0}` as a real number")]
pub struct ParseRealError(pub String);

impl Real {
    pub const ZERO: Real = Real::Exact(Rational64::new_raw(0, 1));

    pub fn int(n: i64) -> Self {
        Real::Exact(Rational64::from_integer(n))
    }

    pub fn ratio(num: i64, den: i64) -> Self {
        Real::Exact(Rational64::new(num, den))
    }

    /// Float input; integral values that fit an `i64` are promoted to exact.
    pub fn float(x: f64) -> Self {
        assert!(x.is_finite(), "non-finite real {x}");
        if x.fract() == 0.0 && x.abs() < 9.0e15 {
            Real::int(x as i64)
        } else {
            Real::Float(x)
        }
    }

    pub fn is_exact(&self) -> bool {
        matches!(self, Real::Exact(_))
    }

    pub fn exact(&self) -> Option<Rational64> {
        match self {
            Real::Exact(r) => Some(*r),
            Real::Float(_) => None,
        }
    }

    pub fn to_f64(&self) -> f64 {
        match self {
            Real::Exact(r) => r.to_f64().unwrap_or(f64::NAN),
            Real::Float(x) => *x,
        }
    }

    pub fn is_zero(&self) -> bool {
        match self {
            Real::Exact(r) => r.is_zero(),
            Real::Float(x) => *x == 0.0,
        }
    }

    pub fn is_negative(&self) -> bool {
        match self {
            Real::Exact(r) => r.is_negative(),
            Real::Float(x) => *x < 0.0,
        }
    }

    pub fn abs(&self) -> Real {
        match self {
            Real::Exact(r) => Real::Exact(r.abs()),
            Real::Float(x) => Real::Float(x.abs()),
        }
    }

    /// `self <= other`, exact when both sides are exact and within
    /// [`TOLERANCE`] otherwise.
    pub fn le_tol(&self, other: &Real) -> bool {
        match (self, other) {
            (Real::Exact(a), Real::Exact(b)) => a <= b,
            _ => self.to_f64() <= other.to_f64() + TOLERANCE,
        }
    }

    pub fn lt_tol(&self, other: &Real) -> bool {
        !other.le_tol(self)
    }

    pub fn eq_tol(&self, other: &Real) -> bool {
        self.le_tol(other) && other.le_tol(self)
    }

    pub fn max(self, other: Real) -> Real {
        if other > self {
            other
        } else {
            self
        }
    }

    pub fn min(self, other: Real) -> Real {
        if other < self {
            other
        } else {
            self
        }
    }

    pub fn floor_to_i64(&self) -> i64 {
        match self {
            Real::Exact(r) => r.floor().to_integer(),
            Real::Float(x) => x.floor() as i64,
        }
    }
}

fn lift<F, G>(a: Real, b: Real, exact: F, float: G) -> Real
where
    F: Fn(&Rational64, &Rational64) -> Option<Rational64>,
    G: Fn(f64, f64) -> f64,
{
    match (a, b) {
        (Real::Exact(x), Real::Exact(y)) => match exact(&x, &y) {
            Some(r) => Real::Exact(r),
            None => Real::Float(float(a.to_f64(), b.to_f64())),
        },
        _ => Real::Float(float(a.to_f64(), b.to_f64())),
    }
}

impl Add for Real {
    type Output = Real;
    fn add(self, rhs: Real) -> Real {
        lift(self, rhs, |x, y| x.checked_add(y), |x, y| x + y)
    }
}

impl Sub for Real {
    type Output = Real;
    fn sub(self, rhs: Real) -> Real {
        lift(self, rhs, |x, y| x.checked_sub(y), |x, y| x - y)
    }
}

impl Mul for Real {
    type Output = Real;
    fn mul(self, rhs: Real) -> Real {
        lift(self, rhs, |x, y| x.checked_mul(y), |x, y| x * y)
    }
}

impl std::iter::Sum for Real {
    fn sum<I: Iterator<Item = Real>>(iter: I) -> Real {
        iter.fold(Real::ZERO, |acc, x| acc + x)
    }
}

impl PartialEq for Real {
    fn eq(&self, other: &Real) -> bool {
        self.partial_cmp(other) == Some(Ordering::Equal)
    }
}

impl PartialOrd for Real {
    fn partial_cmp(&self, other: &Real) -> Option<Ordering> {
        match (self, other) {
            (Real::Exact(a), Real::Exact(b)) => Some(a.cmp(b)),
            _ => self.to_f64().partial_cmp(&other.to_f64()),
        }
    }
}

impl From<i64> for Real {
    fn from(n: i64) -> Real {
        Real::int(n)
    }
}

impl From<Rational64> for Real {
    fn from(r: Rational64) -> Real {
        Real::Exact(r)
    }
}

impl fmt::Display for Real {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Real::Exact(r) if r.is_integer() => write!(f, "{}", r.numer()),
            Real::Exact(r) => write!(f, "{}/{}", r.numer(), r.denom()),
            Real::Float(x) => write!(f, "{x:?}"),
        }
    }
}

/// Parses `"3"`, `"-2/7"`, `"0.125"` exactly; scientific notation and
/// decimals too long for an `i64` denominator fall back to floats.
impl FromStr for Real {
    type Err = ParseRealError;

    fn from_str(s: &str) -> Result<Real, ParseRealError> {
        let t = s.trim();
        let err = || ParseRealError(s.to_string());
        if let Some((n, d)) = t.split_once('/') {
            let n: i64 = n.trim().parse().map_err(|_| err())?;
            let d: i64 = d.trim().parse().map_err(|_| err())?;
            if d == 0 {
                return Err(err());
            }
            return Ok(Real::ratio(n, d));
        }
        if let Ok(n) = t.parse::<i64>() {
            return Ok(Real::int(n));
        }
        if !t.contains(['e', 'E']) {
            if let Some((int_part, frac_part)) = t.split_once('.') {
                let negative = int_part.starts_with('-');
                let digits = format!("{}{}", int_part.trim_start_matches(['-', '+']), frac_part);
                if frac_part.len() <= 17 && digits.chars().all(|c| c.is_ascii_digit()) {
                    let den = 10i64.checked_pow(frac_part.len() as u32);
                    let num = if digits.is_empty() { Some(0) } else { digits.parse::<i64>().ok() };
                    if let (Some(num), Some(den)) = (num, den) {
                        let num = if negative { -num } else { num };
                        return Ok(Real::ratio(num, den));
                    }
                }
            }
        }
        let x: f64 = t.parse().map_err(|_| err())?;
        if !x.is_finite() {
            return Err(err());
        }
        Ok(Real::float(x))
    }
}

impl Serialize for Real {
    fn serialize<S: Serializer>(&self, serializer: S) -> Result<S::Ok, S::Error> {
        match self {
            Real::Exact(r) if r.is_integer() => serializer.serialize_i64(*r.numer()),
            Real::Exact(_) => serializer.serialize_str(&self.to_string()),
            Real::Float(x) => serializer.serialize_f64(*x),
        }
    }
}

struct RealVisitor;

impl Visitor<'_> for RealVisitor {
    type Value = Real;

    fn expecting(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str("a number or a string such as \"3/4\"")
    }

    fn visit_i64<E: de::Error>(self, v: i64) -> Result<Real, E> {
        Ok(Real::int(v))
    }

    fn visit_u64<E: de::Error>(self, v: u64) -> Result<Real, E> {
        i64::try_from(v).map(Real::int).map_err(E::custom)
    }

    fn visit_f64<E: de::Error>(self, v: f64) -> Result<Real, E> {
        // Decimal literals are read through their shortest representation,
        // so `0.6` becomes 3/5 rather than the nearest binary float.
        format!("{v:?}").parse().map_err(E::custom)
    }

    fn visit_str<E: de::Error>(self, v: &str) -> Result<Real, E> {
        v.parse().map_err(E::custom)
    }
}

impl<'de> Deserialize<'de> for Real {
    fn deserialize<D: Deserializer<'de>>(deserializer: D) -> Result<Real, D::Error> {
        deserializer.deserialize_any(RealVisitor)
    }
}

/// Serde adapter writing a `Rational64` the way [`Real`] does.
pub mod ratio_serde {
    use super::*;

    pub fn serialize<S: Serializer>(r: &Rational64, serializer: S) -> Result<S::Ok, S::Error> {
        Real::Exact(*r).serialize(serializer)
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(deserializer: D) -> Result<Rational64, D::Error> {
        Real::deserialize(deserializer)?.exact().ok_or_else(|| de::Error::custom("expected an exact rational"))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parses_exact_forms() {
        assert_eq!("3".parse::<Real>().unwrap().exact(), Some(Rational64::from_integer(3)));
        assert_eq!("-2/6".parse::<Real>().unwrap().exact(), Some(Rational64::new(-1, 3)));
        assert_eq!("0.6".parse::<Real>().unwrap().exact(), Some(Rational64::new(3, 5)));
        assert_eq!("-.5".parse::<Real>().unwrap().exact(), Some(Rational64::new(-1, 2)));
        assert!(!"1e-3".parse::<Real>().unwrap().is_exact());
        assert!("x".parse::<Real>().is_err());
        assert!("1/0".parse::<Real>().is_err());
    }

    #[test]
    fn mixed_arithmetic_degrades_to_float() {
        let a = Real::ratio(1, 3);
        let b = Real::Float(0.5);
        assert!(!(a + b).is_exact());
        assert!((a + a).is_exact());
        assert!((a + b).eq_tol(&Real::Float(5.0 / 6.0)));
    }

    #[test]
    fn tolerance_only_applies_to_floats() {
        let one = Real::int(1);
        assert!(Real::Float(1.0 + 1e-12).le_tol(&one));
        assert!(!Real::ratio(1_000_000_000_001, 1_000_000_000_000).le_tol(&one));
    }

    #[test]
    fn json_round_trip() {
        let values = vec![Real::int(4), Real::ratio(2, 3), Real::Float(0.1 + 0.2)];
        let text = serde_json::to_string(&values).unwrap();
        assert_eq!(text, r#"[4,"2/3",0.30000000000000004]"#);
        let back: Vec<Real> = serde_json::from_str(&text).unwrap();
        assert_eq!(back[0], values[0]);
        assert_eq!(back[1].exact(), Some(Rational64::new(2, 3)));
    }
}
