//! Exact rational arithmetic helpers.
//!
//! All frequencies, usages and thresholds in this crate are exact
//! `BigRational`s. Decimal literals from input files are converted without
//! rounding ("0.35" becomes 35/100), and values are printed back as finite
//! decimals whenever the reduced denominator is of the form 2^a·5^b,
//! falling back to a "p/q" fraction otherwise.

use num_bigint::BigInt;
use num_integer::Integer;
use num_traits::{One, Signed, Zero};
use thiserror::Error;

pub type Rational = num_rational::BigRational;

#[derive(Debug, Error, PartialEq, Eq)]
pub enum ParseRationalError {
    #[error("empty numeric literal")]
    Empty,
    #[error("malformed numeric literal `{0}`")]
    Malformed(String),
    #[error("zero denominator in `{0}`")]
    ZeroDenominator(String),
}

/// Parse an exact rational from a decimal literal (`-3`, `0.25`, `1.2e-3`)
/// or a fraction literal (`3/8`).
pub fn parse_exact(s: &str) -> Result<Rational, ParseRationalError> {
    let s = s.trim();
    if s.is_empty() {
        return Err(ParseRationalError::Empty);
    }
    if let Some((num, den)) = s.split_once('/') {
        let n = parse_decimal(num)?;
        let d = parse_decimal(den)?;
        if d.is_zero() {
            return Err(ParseRationalError::ZeroDenominator(s.to_string()));
        }
        return Ok(n / d);
    }
    parse_decimal(s)
}

fn parse_decimal(s: &str) -> Result<Rational, ParseRationalError> {
    let s = s.trim();
    if s.is_empty() {
        return Err(ParseRationalError::Empty);
    }
    let bad = || ParseRationalError::Malformed(s.to_string());

    let (mantissa, exp10) = match s.find(['e', 'E']) {
        Some(pos) => {
            let exp: i64 = s[pos + 1..].parse().map_err(|_| bad())?;
            (&s[..pos], exp)
        }
        None => (s, 0),
    };

    let (sign, digits) = match mantissa.strip_prefix('-') {
        Some(rest) => (-1, rest),
        None => (1, mantissa.strip_prefix('+').unwrap_or(mantissa)),
    };

    let (int_part, frac_part) = match digits.split_once('.') {
        Some((i, f)) => (i, f),
        None => (digits, ""),
    };
    if int_part.is_empty() && frac_part.is_empty() {
        return Err(bad());
    }
    if !int_part.chars().all(|c| c.is_ascii_digit()) || !frac_part.chars().all(|c| c.is_ascii_digit()) {
        return Err(bad());
    }

    let mut num: BigInt = if int_part.is_empty() {
        BigInt::zero()
    } else {
        int_part.parse().map_err(|_| bad())?
    };
    let ten = BigInt::from(10);
    for d in frac_part.chars() {
        num = &num * &ten + BigInt::from(d.to_digit(10).unwrap());
    }
    let scale = frac_part.len() as i64 - exp10;
    let mut denom = BigInt::one();
    let mut numer = num * BigInt::from(sign);
    if scale > 0 {
        denom = ten.pow(scale as u32);
    } else if scale < 0 {
        numer *= ten.pow((-scale) as u32);
    }
    Ok(Rational::new(numer, denom))
}

/// Render a rational exactly: finite decimal when possible, else `p/q`.
pub fn format_exact(r: &Rational) -> String {
    let denom = r.denom();
    if denom.is_one() {
        return r.numer().to_string();
    }
    // A reduced fraction has a finite decimal expansion iff its denominator
    // is composed only of the factors 2 and 5.
    let two = BigInt::from(2);
    let five = BigInt::from(5);
    let mut d = denom.clone();
    let mut twos = 0u32;
    let mut fives = 0u32;
    while (&d % &two).is_zero() {
        d /= &two;
        twos += 1;
    }
    while (&d % &five).is_zero() {
        d /= &five;
        fives += 1;
    }
    if !d.is_one() {
        return format!("{}/{}", r.numer(), r.denom());
    }
    let digits = twos.max(fives);
    // numer * 10^digits / denom is an integer by construction.
    let scaled = (r.numer() * BigInt::from(10).pow(digits) / denom).abs();
    let mut body = scaled.to_string();
    let digits = digits as usize;
    if body.len() <= digits {
        body = format!("{}{}", "0".repeat(digits - body.len() + 1), body);
    }
    let point = body.len() - digits;
    let sign = if r.numer().is_negative() { "-" } else { "" };
    format!("{}{}.{}", sign, &body[..point], &body[point..])
}

/// Exact rational from an `f64` (every finite double is a dyadic rational).
pub fn from_f64(x: f64) -> Option<Rational> {
    Rational::from_float(x)
}

pub fn to_f64(r: &Rational) -> f64 {
    use num_traits::ToPrimitive;
    r.to_f64().unwrap_or(f64::NAN)
}

/// Least common multiple of the denominators of `values`.
pub fn common_denominator<'a>(values: impl Iterator<Item = &'a Rational>) -> BigInt {
    let mut lcm = BigInt::one();
    for v in values {
        lcm = lcm.lcm(v.denom());
    }
    lcm
}

/// Numerator of `value` when rescaled to the common denominator `denom`.
/// `denom` must be a multiple of `value.denom()`.
pub fn scale_to(value: &Rational, denom: &BigInt) -> BigInt {
    debug_assert!((denom % value.denom()).is_zero());
    value.numer() * (denom / value.denom())
}
