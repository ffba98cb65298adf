//! The scaled mutation parameter and the scalar types exact formulas run on.

use std::fmt;
use std::str::FromStr;

use num_bigint::BigInt;
use num_rational::BigRational;
use num_traits::{FromPrimitive, Num, Signed, ToPrimitive, Zero};
use serde::{Serialize, Serializer};

use crate::error::{Error, Result};

/// Scaled mutation rate θ > 0.
///
/// Carries both a float and an exact rational form. A θ written as a decimal
/// (`"0.1"`) is held exactly as `1/10`, not as the nearest binary fraction.
#[derive(Clone, Debug, PartialEq)]
pub struct Theta {
    value: f64,
    exact: BigRational,
}

impl Theta {
    pub fn new(value: f64) -> Result<Self> {
        if !value.is_finite() || value <= 0.0 {
            return Err(Error::Domain(format!("theta must be positive and finite, got {value}")));
        }
        // `Display` for f64 prints the shortest decimal that round-trips.
        format!("{value}").parse()
    }

    pub fn from_ratio(numer: i64, denom: i64) -> Result<Self> {
        if denom == 0 {
            return Err(Error::Domain("theta denominator is zero".into()));
        }
        Self::from_rational(BigRational::new(numer.into(), denom.into()))
    }

    pub fn from_rational(exact: BigRational) -> Result<Self> {
        if !exact.is_positive() {
            return Err(Error::Domain(format!("theta must be positive, got {exact}")));
        }
        let value = rational_to_f64(&exact);
        if !value.is_finite() || value <= 0.0 {
            return Err(Error::Domain(format!("theta {exact} is not representable")));
        }
        Ok(Self { value, exact })
    }

    pub fn value(&self) -> f64 {
        self.value
    }

    pub fn exact(&self) -> &BigRational {
        &self.exact
    }
}

impl fmt::Display for Theta {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.value)
    }
}

impl Serialize for Theta {
    fn serialize<S: Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        s.serialize_f64(self.value)
    }
}

impl FromStr for Theta {
    type Err = Error;

    /// Accepts decimals (`2`, `0.37`, `1.5e-3`) and fractions (`1/3`).
    fn from_str(s: &str) -> Result<Self> {
        let s = s.trim();
        let bad = || Error::ThetaParse(s.to_string());
        if let Some((num, den)) = s.split_once('/') {
            let num = parse_decimal(num.trim()).ok_or_else(bad)?;
            let den = parse_decimal(den.trim()).ok_or_else(bad)?;
            if den.is_zero() {
                return Err(bad());
            }
            return Self::from_rational(num / den);
        }
        Self::from_rational(parse_decimal(s).ok_or_else(bad)?)
    }
}

fn parse_decimal(s: &str) -> Option<BigRational> {
    let (mantissa, exponent) = match s.find(['e', 'E']) {
        Some(pos) => (&s[..pos], s[pos + 1..].parse::<i32>().ok()?),
        None => (s, 0),
    };
    let (negative, mantissa) = match mantissa.strip_prefix('-') {
        Some(rest) => (true, rest),
        None => (false, mantissa.strip_prefix('+').unwrap_or(mantissa)),
    };
    let (int_part, frac_part) = mantissa.split_once('.').unwrap_or((mantissa, ""));
    if int_part.is_empty() && frac_part.is_empty() {
        return None;
    }
    if !int_part.chars().chain(frac_part.chars()).all(|c| c.is_ascii_digit()) {
        return None;
    }
    let digits = format!("{int_part}{frac_part}");
    let mut numer = BigInt::from_str_radix(&digits, 10).ok()?;
    if negative {
        numer = -numer;
    }
    let scale = exponent - frac_part.len() as i32;
    let ten = BigInt::from(10);
    let value = if scale >= 0 {
        BigRational::from_integer(numer * num_traits::pow(ten, scale as usize))
    } else {
        BigRational::new(numer, num_traits::pow(ten, (-scale) as usize))
    };
    Some(value)
}

/// Convert a big rational to the nearest f64, tolerating huge numerators and
/// denominators that overflow a direct conversion.
pub fn rational_to_f64(r: &BigRational) -> f64 {
    if let Some(v) = r.to_f64() {
        if v.is_finite() && (v != 0.0 || r.is_zero()) {
            return v;
        }
    }
    if r.is_zero() {
        return 0.0;
    }
    let sign = if r.is_negative() { -1.0 } else { 1.0 };
    sign * rational_ln_abs(r).exp()
}

/// Natural log of |r| for r ≠ 0, computed from the leading bits of numerator
/// and denominator.
pub fn rational_ln_abs(r: &BigRational) -> f64 {
    bigint_ln(r.numer()) - bigint_ln(r.denom())
}

pub fn bigint_ln(x: &BigInt) -> f64 {
    let bits = x.bits();
    if bits <= 1000 {
        return x.abs().to_f64().unwrap_or(f64::INFINITY).ln();
    }
    let shift = bits - 64;
    let top: BigInt = x.abs() >> shift;
    top.to_f64().unwrap_or(f64::INFINITY).ln() + shift as f64 * std::f64::consts::LN_2
}

/// Scalar field the exact formulas are written over: `BigRational` for exact
/// evaluation, `f64` for fast evaluation and large arguments.
pub trait Field:
    Clone + Num + FromPrimitive + PartialOrd + fmt::Debug + Send + Sync
{
    fn from_theta(theta: &Theta) -> Self;
    fn to_f64_lossy(&self) -> f64;
    fn abs_value(&self) -> Self;

    fn from_usize_exact(n: usize) -> Self {
        Self::from_usize(n).expect("usize fits every field")
    }
}

impl Field for BigRational {
    fn from_theta(theta: &Theta) -> Self {
        theta.exact().clone()
    }
    fn to_f64_lossy(&self) -> f64 {
        rational_to_f64(self)
    }
    fn abs_value(&self) -> Self {
        self.abs()
    }
}

impl Field for f64 {
    fn from_theta(theta: &Theta) -> Self {
        theta.value()
    }
    fn to_f64_lossy(&self) -> f64 {
        *self
    }
    fn abs_value(&self) -> Self {
        self.abs()
    }
}
