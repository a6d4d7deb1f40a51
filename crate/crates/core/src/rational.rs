//! Exact rational helpers.

use num_bigint::BigInt;
use num_integer::Roots;
use num_rational::BigRational;
use num_traits::{One, Signed, ToPrimitive, Zero};

use crate::error::{Error, Result};

pub type Rational = BigRational;

pub fn ratio(numer: i64, denom: i64) -> Rational {
    Rational::new(BigInt::from(numer), BigInt::from(denom))
}

pub fn int(n: i64) -> Rational {
    Rational::from_integer(BigInt::from(n))
}

pub fn zero() -> Rational {
    Rational::zero()
}

pub fn one() -> Rational {
    Rational::one()
}

/// `2^(-bits)`.
pub fn dyadic(bits: usize) -> Rational {
    Rational::new(BigInt::one(), BigInt::one() << bits)
}

/// Canonical `p/q` rendering used by every text format in the crate.
pub fn format(r: &Rational) -> String {
    format!("{}/{}", r.numer(), r.denom())
}

/// Parses `p/q`, an integer, or a finite decimal such as `0.25`.
pub fn parse(s: &str) -> Result<Rational> {
    let s = s.trim();
    let bad = || Error::Parse(format!("not a rational: {s:?}"));
    if let Some((p, q)) = s.split_once('/') {
        let p: BigInt = p.trim().parse().map_err(|_| bad())?;
        let q: BigInt = q.trim().parse().map_err(|_| bad())?;
        if q.is_zero() {
            return Err(bad());
        }
        return Ok(Rational::new(p, q));
    }
    if let Some((whole, frac)) = s.split_once('.') {
        if frac.is_empty() || !frac.chars().all(|c| c.is_ascii_digit()) {
            return Err(bad());
        }
        let negative = whole.starts_with('-');
        let whole: BigInt = if whole.is_empty() || whole == "-" {
            BigInt::zero()
        } else {
            whole.parse().map_err(|_| bad())?
        };
        let scale = BigInt::from(10u32).pow(frac.len() as u32);
        let frac: BigInt = frac.parse().map_err(|_| bad())?;
        let mut value = Rational::from_integer(whole.abs()) + Rational::new(frac, scale);
        if negative {
            value = -value;
        }
        return Ok(value);
    }
    let n: BigInt = s.parse().map_err(|_| bad())?;
    Ok(Rational::from_integer(n))
}

pub fn to_f64(r: &Rational) -> f64 {
    r.to_f64().unwrap_or(f64::NAN)
}

/// A rational strictly below ln 2 (ln 2 = 0.693147180559945...).
pub fn ln2_lower() -> Rational {
    Rational::new(BigInt::from(6_931_471_805u64), BigInt::from(10_000_000_000u64))
}

/// A rational strictly above ln 2.
pub fn ln2_upper() -> Rational {
    Rational::new(BigInt::from(6_931_471_806u64), BigInt::from(10_000_000_000u64))
}

/// A lower bound on `sqrt(x)` with absolute error below `10^-digits`.
pub fn sqrt_lower(x: &Rational, digits: u32) -> Rational {
    assert!(!x.is_negative(), "sqrt of a negative rational");
    let scale = BigInt::from(10u32).pow(digits);
    // sqrt(p/q) = sqrt(p*q)/q
    let pq = x.numer() * x.denom() * &scale * &scale;
    Rational::new(pq.sqrt(), x.denom() * scale)
}

/// Smallest integer `c` with `c*c >= n`.
pub fn ceil_sqrt(n: u64) -> u64 {
    let r = n.sqrt();
    if r * r == n {
        r
    } else {
        r + 1
    }
}

/// Smallest integer not below `r` (for non-negative `r`).
pub fn ceil_nonneg(r: &Rational) -> u64 {
    r.ceil()
        .to_integer()
        .to_u64()
        .expect("ceil of a small non-negative rational")
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parses_fraction_integer_and_decimal() {
        assert_eq!(parse("3/4").unwrap(), ratio(3, 4));
        assert_eq!(parse("2").unwrap(), int(2));
        assert_eq!(parse("0.25").unwrap(), ratio(1, 4));
        assert_eq!(parse("-1.5").unwrap(), ratio(-3, 2));
        assert!(parse("1/0").is_err());
        assert!(parse("x").is_err());
    }

    #[test]
    fn ln2_bounds_bracket_ln2() {
        let ln2 = std::f64::consts::LN_2;
        assert!(to_f64(&ln2_lower()) < ln2);
        assert!(to_f64(&ln2_upper()) > ln2);
    }

    #[test]
    fn sqrt_lower_is_a_tight_lower_bound() {
        let two = int(2);
        let s = sqrt_lower(&two, 12);
        assert!(&s * &s <= two);
        let bumped = &s + ratio(1, 1_000_000_000_000);
        assert!(&bumped * &bumped > two);
        assert_eq!(sqrt_lower(&ratio(9, 4), 6), ratio(3, 2));
    }

    #[test]
    fn ceil_sqrt_small_values() {
        let got: Vec<u64> = (1..=10).map(ceil_sqrt).collect();
        assert_eq!(got, vec![1, 2, 2, 2, 3, 3, 3, 3, 3, 4]);
    }
}
