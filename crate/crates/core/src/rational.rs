//! Exact rational numbers shared by every module.
//!
//! Protocol values use `Ratio<i128>`; denominators stay bounded by
//! `4·T·c^K1` (and its square for ashore points) so `i128` never overflows in
//! the configurations the simulator accepts. Parameter analysis, where powers
//! of the convergence constant can get large, uses [`BigRational`].

use std::fmt;
use std::str::FromStr;

use num_bigint::BigInt;
use num_integer::Integer;
use num_traits::ToPrimitive;
use serde::{de, Deserialize, Deserializer, Serialize, Serializer};

pub type Rational = num_rational::Ratio<i128>;
pub type BigRational = num_rational::BigRational;

pub fn rat(numer: i128, denom: i128) -> Rational {
    Rational::new(numer, denom)
}

pub fn int(v: i128) -> Rational {
    Rational::from_integer(v)
}

/// Largest integer not above `r`.
pub fn floor(r: &Rational) -> i128 {
    Integer::div_floor(r.numer(), r.denom())
}

/// Smallest integer not below `r`.
pub fn ceil(r: &Rational) -> i128 {
    -Integer::div_floor(&-r.numer(), r.denom())
}

/// Nearest integer, halves rounded up.
pub fn round_half_up(r: &Rational) -> i128 {
    floor(&(r + rat(1, 2)))
}

pub fn to_f64(r: &Rational) -> f64 {
    *r.numer() as f64 / *r.denom() as f64
}

pub fn to_big(r: &Rational) -> BigRational {
    BigRational::new(BigInt::from(*r.numer()), BigInt::from(*r.denom()))
}

/// Narrows a big rational back to `i128` parts, failing on overflow.
pub fn from_big(r: &BigRational) -> Option<Rational> {
    Some(Rational::new(r.numer().to_i128()?, r.denom().to_i128()?))
}

pub fn big_to_f64(r: &BigRational) -> f64 {
    let n = r.numer().to_f64().unwrap_or(f64::NAN);
    let d = r.denom().to_f64().unwrap_or(f64::NAN);
    if n.is_finite() && d.is_finite() {
        n / d
    } else {
        // both sides huge: shift down before dividing
        let bits = r.denom().bits().max(r.numer().bits()) as i64 - 900;
        let shift = bits.max(0) as usize;
        let n = (r.numer() >> shift).to_f64().unwrap_or(0.0);
        let d = (r.denom() >> shift).to_f64().unwrap_or(1.0);
        n / d
    }
}

/// Parses `"p/q"`, `"p"` or a finite decimal such as `"0.0125"`.
pub fn parse_rational(s: &str) -> Result<Rational, String> {
    let s = s.trim();
    if let Some((n, d)) = s.split_once('/') {
        let n: i128 = n.trim().parse().map_err(|e| format!("bad numerator in `{s}`: {e}"))?;
        let d: i128 = d.trim().parse().map_err(|e| format!("bad denominator in `{s}`: {e}"))?;
        if d == 0 {
            return Err(format!("zero denominator in `{s}`"));
        }
        return Ok(rat(n, d));
    }
    let (neg, body) = match s.strip_prefix('-') {
        Some(rest) => (true, rest),
        None => (false, s),
    };
    let (whole, frac) = body.split_once('.').unwrap_or((body, ""));
    if whole.is_empty() && frac.is_empty() {
        return Err(format!("empty number `{s}`"));
    }
    if frac.len() > 30 {
        return Err(format!("too many decimal digits in `{s}`"));
    }
    let digits = format!("{whole}{frac}");
    let numer: i128 = if digits.is_empty() {
        0
    } else {
        digits.parse().map_err(|e| format!("bad number `{s}`: {e}"))?
    };
    let denom = 10i128.pow(frac.len() as u32);
    let r = rat(numer, denom);
    Ok(if neg { -r } else { r })
}

pub fn format_rational(r: &Rational) -> String {
    if r.is_integer() {
        r.numer().to_string()
    } else {
        format!("{}/{}", r.numer(), r.denom())
    }
}

/// Serde adapter writing rationals as `"p/q"` strings.
pub mod serde_rational {
    use super::*;

    pub fn serialize<S: Serializer>(r: &Rational, s: S) -> Result<S::Ok, S::Error> {
        s.serialize_str(&format_rational(r))
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<Rational, D::Error> {
        let v = NumOrStr::deserialize(d)?;
        v.into_rational().map_err(de::Error::custom)
    }
}

/// Same as [`serde_rational`] for optional fields.
pub mod serde_opt_rational {
    use super::*;

    pub fn serialize<S: Serializer>(r: &Option<Rational>, s: S) -> Result<S::Ok, S::Error> {
        match r {
            Some(r) => s.serialize_some(&format_rational(r)),
            None => s.serialize_none(),
        }
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<Option<Rational>, D::Error> {
        let v = Option::<NumOrStr>::deserialize(d)?;
        v.map(|v| v.into_rational().map_err(de::Error::custom)).transpose()
    }
}

pub fn format_big(r: &BigRational) -> String {
    if r.is_integer() {
        r.numer().to_string()
    } else {
        format!("{}/{}", r.numer(), r.denom())
    }
}

pub fn parse_big(s: &str) -> Result<BigRational, String> {
    let s = s.trim();
    if let Some((n, d)) = s.split_once('/') {
        let n: BigInt = n.trim().parse().map_err(|e| format!("bad numerator in `{s}`: {e}"))?;
        let d: BigInt = d.trim().parse().map_err(|e| format!("bad denominator in `{s}`: {e}"))?;
        if d == BigInt::from(0) {
            return Err(format!("zero denominator in `{s}`"));
        }
        return Ok(BigRational::new(n, d));
    }
    parse_rational(s).map(|r| to_big(&r))
}

/// Serde adapter for big rationals, written as `"p/q"` strings.
pub mod serde_big {
    use super::*;

    pub fn serialize<S: Serializer>(r: &BigRational, s: S) -> Result<S::Ok, S::Error> {
        s.serialize_str(&format_big(r))
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<BigRational, D::Error> {
        let s = String::deserialize(d)?;
        parse_big(&s).map_err(de::Error::custom)
    }
}

#[derive(Deserialize)]
#[serde(untagged)]
enum NumOrStr {
    Int(i64),
    Float(f64),
    Str(String),
}

impl NumOrStr {
    fn into_rational(self) -> Result<Rational, String> {
        match self {
            NumOrStr::Int(i) => Ok(int(i as i128)),
            // floats go through their shortest decimal rendering so 0.1 means 1/10
            NumOrStr::Float(f) => parse_rational(&format!("{f}")),
            NumOrStr::Str(s) => parse_rational(&s),
        }
    }
}

/// A rational newtype usable directly as a serde field.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct Exact(pub Rational);

impl Serialize for Exact {
    fn serialize<S: Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        serde_rational::serialize(&self.0, s)
    }
}

impl<'de> Deserialize<'de> for Exact {
    fn deserialize<D: Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        serde_rational::deserialize(d).map(Exact)
    }
}

impl fmt::Display for Exact {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&format_rational(&self.0))
    }
}

impl FromStr for Exact {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        parse_rational(s).map(Exact)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parses_fractions_and_decimals() {
        assert_eq!(parse_rational("3/4").unwrap(), rat(3, 4));
        assert_eq!(parse_rational("0.0125").unwrap(), rat(1, 80));
        assert_eq!(parse_rational("-2.5").unwrap(), rat(-5, 2));
        assert_eq!(parse_rational("7").unwrap(), int(7));
        assert!(parse_rational("1/0").is_err());
        assert!(parse_rational("abc").is_err());
    }

    #[test]
    fn floor_ceil_round() {
        assert_eq!(floor(&rat(-1, 2)), -1);
        assert_eq!(ceil(&rat(-1, 2)), 0);
        assert_eq!(ceil(&rat(7, 2)), 4);
        assert_eq!(round_half_up(&rat(5, 2)), 3);
        assert_eq!(round_half_up(&rat(-5, 2)), -2);
        assert_eq!(round_half_up(&rat(12, 5)), 2);
    }

    #[test]
    fn float_fields_read_as_decimals() {
        #[derive(Deserialize)]
        struct W {
            #[serde(with = "serde_rational")]
            v: Rational,
        }
        let w: W = serde_json::from_str(r#"{"v": 0.1}"#).unwrap();
        assert_eq!(w.v, rat(1, 10));
        let w: W = serde_json::from_str(r#"{"v": "1/3"}"#).unwrap();
        assert_eq!(w.v, rat(1, 3));
    }
}
