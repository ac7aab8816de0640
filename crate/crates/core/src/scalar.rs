//! Probability scalars.
//!
//! Everything that consumes probabilities is generic over [`Scalar`], which is
//! implemented for exact rationals ([`BigRational`]) and for `f64`. Exact values
//! compare with zero tolerance; floating-point values use small absolute
//! tolerances.

use std::fmt::{Debug, Display};
use std::str::FromStr;

use num_bigint::BigInt;
use num_rational::BigRational;
use num_traits::{Num, Signed, ToPrimitive, Zero};
use serde_json::Value;

use crate::error::{Error, Result};

/// Tolerance applied to simplex constraints of floating-point distributions.
pub const FLOAT_SIMPLEX_TOL: f64 = 1e-12;

pub trait Scalar: Num + Signed + Clone + PartialOrd + Debug + Display + Send + Sync + 'static {
    /// `true` when arithmetic is exact and tolerances collapse to zero.
    const EXACT: bool;

    fn from_i64(n: i64) -> Self;

    fn from_ratio(num: i64, den: i64) -> Self {
        Self::from_i64(num) / Self::from_i64(den)
    }

    fn as_f64(&self) -> f64;

    /// `|self| <= tol` for floats, `self == 0` for exact values.
    fn is_zero_within(&self, tol: f64) -> bool;

    /// `self <= bound + tol` for floats, `self <= bound` for exact values.
    fn le_within(&self, bound: &Self, tol: f64) -> bool;

    /// JSON form. Exact values become `"num/den"` strings.
    fn to_json(&self) -> Value;

    /// Accepts JSON numbers, decimal strings (`"0.125"`) and fraction strings (`"1/8"`).
    fn from_json(value: &Value) -> Result<Self>;

    fn max_of(a: Self, b: Self) -> Self {
        if b > a {
            b
        } else {
            a
        }
    }
}

impl Scalar for f64 {
    const EXACT: bool = false;

    fn from_i64(n: i64) -> Self {
        n as f64
    }

    fn as_f64(&self) -> f64 {
        *self
    }

    fn is_zero_within(&self, tol: f64) -> bool {
        self.abs() <= tol
    }

    fn le_within(&self, bound: &Self, tol: f64) -> bool {
        *self <= *bound + tol
    }

    fn to_json(&self) -> Value {
        serde_json::Number::from_f64(*self)
            .map(Value::Number)
            .unwrap_or(Value::Null)
    }

    fn from_json(value: &Value) -> Result<Self> {
        match value {
            Value::Number(n) => n
                .as_f64()
                .ok_or_else(|| Error::Parse(format!("not representable as f64: {n}"))),
            Value::String(s) => parse_rational(s).map(|r| r.as_f64()),
            other => Err(Error::Parse(format!("expected a probability, found {other}"))),
        }
    }
}

impl Scalar for BigRational {
    const EXACT: bool = true;

    fn from_i64(n: i64) -> Self {
        BigRational::from_integer(BigInt::from(n))
    }

    fn from_ratio(num: i64, den: i64) -> Self {
        BigRational::new(BigInt::from(num), BigInt::from(den))
    }

    fn as_f64(&self) -> f64 {
        ToPrimitive::to_f64(self).unwrap_or(f64::NAN)
    }

    fn is_zero_within(&self, _tol: f64) -> bool {
        self.is_zero()
    }

    fn le_within(&self, bound: &Self, _tol: f64) -> bool {
        self <= bound
    }

    fn to_json(&self) -> Value {
        Value::String(rational_string(self))
    }

    fn from_json(value: &Value) -> Result<Self> {
        match value {
            Value::String(s) => parse_rational(s),
            Value::Number(n) if n.is_i64() => Ok(Self::from_i64(n.as_i64().unwrap_or_default())),
            other => Err(Error::Parse(format!(
                "exact probabilities must be strings (\"0.25\" or \"1/4\"), found {other}"
            ))),
        }
    }
}

/// Always `num/den`, including integers (`"1/1"`, `"0/1"`).
pub fn rational_string(r: &BigRational) -> String {
    format!("{}/{}", r.numer(), r.denom())
}

/// Parses `"n/d"`, `"n"`, or a plain decimal such as `"-0.0625"` into an exact rational.
pub fn parse_rational(text: &str) -> Result<BigRational> {
    let s = text.trim();
    let bad = || Error::Parse(format!("not a rational number: {text:?}"));
    if let Some((n, d)) = s.split_once('/') {
        let n = BigInt::from_str(n.trim()).map_err(|_| bad())?;
        let d = BigInt::from_str(d.trim()).map_err(|_| bad())?;
        if d.is_zero() {
            return Err(Error::Parse(format!("zero denominator in {text:?}")));
        }
        return Ok(BigRational::new(n, d));
    }
    let (negative, body) = match s.strip_prefix('-') {
        Some(rest) => (true, rest),
        None => (false, s.strip_prefix('+').unwrap_or(s)),
    };
    let (int_part, frac_part) = body.split_once('.').unwrap_or((body, ""));
    if int_part.is_empty() && frac_part.is_empty() {
        return Err(bad());
    }
    if !int_part.chars().chain(frac_part.chars()).all(|c| c.is_ascii_digit()) {
        return Err(bad());
    }
    let digits = format!("{int_part}{frac_part}");
    let numer = BigInt::from_str(if digits.is_empty() { "0" } else { &digits }).map_err(|_| bad())?;
    let denom = num_traits::pow(BigInt::from(10), frac_part.len());
    let r = BigRational::new(numer, denom);
    Ok(if negative { -r } else { r })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parses_decimals_exactly() {
        assert_eq!(parse_rational("0.25").unwrap(), BigRational::from_ratio(1, 4));
        assert_eq!(parse_rational("-0.0625").unwrap(), BigRational::from_ratio(-1, 16));
        assert_eq!(parse_rational(".5").unwrap(), BigRational::from_ratio(1, 2));
        assert_eq!(parse_rational("3").unwrap(), BigRational::from_i64(3));
        assert_eq!(parse_rational("2/6").unwrap(), BigRational::from_ratio(1, 3));
    }

    #[test]
    fn rejects_garbage() {
        for s in ["", "-", "1/0", "abc", "1e-3", "0.5.5"] {
            assert!(parse_rational(s).is_err(), "{s}");
        }
    }

    #[test]
    fn exact_json_is_num_over_den() {
        assert_eq!(BigRational::from_i64(-1).to_json(), Value::String("-1/1".into()));
        assert_eq!(BigRational::from_ratio(3, 6).to_json(), Value::String("1/2".into()));
    }

    #[test]
    fn exact_rejects_floats_in_json() {
        assert!(BigRational::from_json(&serde_json::json!(0.5)).is_err());
        assert_eq!(f64::from_json(&serde_json::json!("1/4")).unwrap(), 0.25);
    }
}
