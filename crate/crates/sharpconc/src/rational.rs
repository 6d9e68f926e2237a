//! Arbitrary-precision rational numbers and their `"p/q"` text form.
//!
//! [`Rational`] is `num_rational::BigRational`, which keeps values in lowest
//! terms with a positive denominator. Every probability, atom location and
//! concentration level in this crate is one.

use num_bigint::BigInt;
use num_rational::BigRational;
use num_traits::{One, Zero};
use thiserror::Error;

pub type Rational = BigRational;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum ParseRationalError {
    #[error("empty rational literal")]
    Empty,
    #[error("invalid integer part in rational literal `{0}`")]
    BadInteger(String),
    #[error("zero denominator in rational literal `{0}`")]
    ZeroDenominator(String),
}

/// Parses `"p/q"` or plain `"p"` into a reduced rational.
pub fn parse_rational(s: &str) -> Result<Rational, ParseRationalError> {
    let s = s.trim();
    if s.is_empty() {
        return Err(ParseRationalError::Empty);
    }
    let (num_str, den_str) = match s.split_once('/') {
        Some((n, d)) => (n.trim(), Some(d.trim())),
        None => (s, None),
    };
    let num: BigInt = num_str
        .parse()
        .map_err(|_| ParseRationalError::BadInteger(s.to_string()))?;
    let den: BigInt = match den_str {
        Some(d) => d
            .parse()
            .map_err(|_| ParseRationalError::BadInteger(s.to_string()))?,
        None => BigInt::one(),
    };
    if den.is_zero() {
        return Err(ParseRationalError::ZeroDenominator(s.to_string()));
    }
    Ok(Rational::new(num, den))
}

/// Canonical text form: `"p/q"` in lowest terms, or `"p"` when q = 1.
pub fn format_rational(r: &Rational) -> String {
    r.to_string()
}

/// Rational from an integer.
pub fn int(n: i64) -> Rational {
    Rational::from_integer(BigInt::from(n))
}

/// Rational n/d. Panics if d = 0.
pub fn ratio(n: i64, d: i64) -> Rational {
    Rational::new(BigInt::from(n), BigInt::from(d))
}

/// Nearest-double approximation, robust to numerators and denominators far
/// beyond f64 range (exact convolutions of hundreds of factors produce such
/// values while the quotient stays in [0, 1]).
pub fn to_f64(r: &Rational) -> f64 {
    use num_traits::ToPrimitive;
    let num = r.numer();
    let den = r.denom();
    let max_bits = num.bits().max(den.bits());
    if max_bits <= 900 {
        // Both sides convert to finite doubles well inside range.
        if let Some(v) = r.to_f64() {
            return v;
        }
    }
    // Shift both sides down together; the quotient is unchanged up to the
    // truncated low bits, and 128 retained bits dominate f64 precision.
    let shift = max_bits.saturating_sub(128);
    let n = (num >> shift).to_f64().unwrap_or(0.0);
    let d = (den >> shift).to_f64().unwrap_or(0.0);
    n / d
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parse_and_format_round_trip() {
        for s in ["1/2", "-3/4", "7", "0", "-12", "22/7"] {
            let r = parse_rational(s).unwrap();
            assert_eq!(format_rational(&r), s);
        }
    }

    #[test]
    fn parse_reduces() {
        assert_eq!(parse_rational("2/4").unwrap(), ratio(1, 2));
        assert_eq!(format_rational(&parse_rational("6/3").unwrap()), "2");
        // negative denominator normalizes
        assert_eq!(parse_rational("1/-2").unwrap(), ratio(-1, 2));
    }

    #[test]
    fn parse_rejects_garbage() {
        assert!(parse_rational("").is_err());
        assert!(parse_rational("a/b").is_err());
        assert!(parse_rational("1/0").is_err());
        assert!(parse_rational("1.5").is_err());
    }

    #[test]
    fn f64_conversion() {
        assert_eq!(to_f64(&ratio(1, 2)), 0.5);
        assert!((to_f64(&ratio(1, 3)) - 1.0 / 3.0).abs() < 1e-15);
    }
}
