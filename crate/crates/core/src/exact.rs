//! Values produced by exact formulas, tagged with the formula that made them.

use std::fmt;

use num_rational::BigRational;
use num_traits::{Signed, Zero};
use serde::{Serialize, Serializer};

use crate::theta::{rational_ln_abs, rational_to_f64};

/// Sample sizes up to this bound are evaluated in exact rational arithmetic.
pub const EXACT_THRESHOLD: usize = 100;

pub fn use_exact(n: usize) -> bool {
    n <= EXACT_THRESHOLD
}

/// A non-negative quantity, held either exactly or as a natural logarithm.
#[derive(Clone, Debug, PartialEq)]
pub enum Quantity {
    Rational(BigRational),
    /// Natural log of the value; `-inf` encodes zero.
    Log(f64),
}

impl Quantity {
    pub fn from_f64(v: f64) -> Self {
        Quantity::Log(v.ln())
    }

    pub fn value(&self) -> f64 {
        match self {
            Quantity::Rational(r) => rational_to_f64(r),
            Quantity::Log(l) => l.exp(),
        }
    }

    pub fn ln(&self) -> f64 {
        match self {
            Quantity::Rational(r) if r.is_zero() => f64::NEG_INFINITY,
            Quantity::Rational(r) => rational_ln_abs(r),
            Quantity::Log(l) => *l,
        }
    }

    pub fn rational(&self) -> Option<&BigRational> {
        match self {
            Quantity::Rational(r) => Some(r),
            Quantity::Log(_) => None,
        }
    }

    pub fn is_exact(&self) -> bool {
        matches!(self, Quantity::Rational(_))
    }
}

impl fmt::Display for Quantity {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Quantity::Rational(r) => write!(f, "{r}"),
            Quantity::Log(_) => write!(f, "{}", self.value()),
        }
    }
}

/// Which closed form produced a probability.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Formula {
    /// Ewens sampling formula.
    Esf,
    /// Law of the number of distinct alleles.
    AlleleCount,
    /// Partition law conditional on the allele count.
    ConditionalGivenK,
    /// Donnelly–Tavaré age-ordered sample law.
    AgeOrdered,
    /// Kelly: sample count of the oldest allele in the sample.
    OldestInSample,
    /// Donnelly: sample count of the oldest allele in the population.
    PopulationOldestInSample,
    /// Kelly: population count of the oldest allele in a Moran population.
    PopulationOldest,
    /// All genes of the oldest allele's type.
    AllSameOldest,
    /// All genes of one (unspecified) type.
    AllSameAny,
    /// All the same type, conditional probability it is the oldest.
    OldestGivenSame,
    /// Watterson–Donnelly law of the count of Eve's allele.
    EveCount,
}

/// A probability together with its provenance.
#[derive(Clone, Debug, PartialEq)]
pub struct ExactProbability {
    pub quantity: Quantity,
    pub formula: Formula,
}

impl ExactProbability {
    pub fn rational(r: BigRational, formula: Formula) -> Self {
        debug_assert!(!r.is_negative());
        Self { quantity: Quantity::Rational(r), formula }
    }

    pub fn log(ln_value: f64, formula: Formula) -> Self {
        Self { quantity: Quantity::Log(ln_value), formula }
    }

    pub fn value(&self) -> f64 {
        self.quantity.value()
    }

    pub fn ln(&self) -> f64 {
        self.quantity.ln()
    }

    pub fn as_rational(&self) -> Option<&BigRational> {
        self.quantity.rational()
    }

    pub fn is_exact(&self) -> bool {
        self.quantity.is_exact()
    }
}

impl Serialize for ExactProbability {
    fn serialize<S: Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        s.serialize_f64(self.value())
    }
}

impl fmt::Display for ExactProbability {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        self.quantity.fmt(f)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn log_and_rational_agree() {
        let r = BigRational::new(1.into(), 6.into());
        let a = ExactProbability::rational(r, Formula::Esf);
        let b = ExactProbability::log((1.0f64 / 6.0).ln(), Formula::Esf);
        assert!((a.value() - b.value()).abs() < 1e-15);
        assert!((a.ln() - b.ln()).abs() < 1e-14);
        assert!(a.is_exact() && !b.is_exact());
    }

    #[test]
    fn zero_has_negative_infinite_log() {
        let z = Quantity::Rational(BigRational::zero());
        assert_eq!(z.ln(), f64::NEG_INFINITY);
        assert_eq!(Quantity::Log(f64::NEG_INFINITY).value(), 0.0);
    }
}
