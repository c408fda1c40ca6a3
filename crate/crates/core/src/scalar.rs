//! Exact scalars for certificates: arbitrary-precision rationals and the
//! quadratic field ℚ(√2), both with exact sign determination.

use std::cmp::Ordering;
use std::fmt;
use std::ops::{Add, Div, Mul, Neg, Sub};
use std::str::FromStr;

use num_bigint::BigInt;
use num_rational::BigRational;
use num_traits::{One, Signed, ToPrimitive, Zero};

use crate::{Error, Result};

pub type Rational = BigRational;

/// Short constructor for small rationals.
pub fn rat(num: i64, den: i64) -> BigRational {
    BigRational::new(BigInt::from(num), BigInt::from(den))
}

/// Parses "p/q" or "p" into an exact rational.
pub fn parse_rational(s: &str) -> Result<BigRational> {
    BigRational::from_str(s.trim())
        .map_err(|e| Error::Parse(format!("bad rational {s:?}: {e}")))
}

/// Scalar field used by the exact certificate stage. Implemented for plain
/// rationals and for ℚ(√2); signs are always determined exactly.
pub trait CertScalar:
    Clone
    + PartialEq
    + fmt::Debug
    + fmt::Display
    + Zero
    + One
    + Neg<Output = Self>
    + Sub<Output = Self>
    + Div<Output = Self>
{
    const FIELD_NAME: &'static str;

    fn from_rational(r: BigRational) -> Self;

    /// Exact sign relative to zero.
    fn sign(&self) -> Ordering;

    /// Approximation for diagnostics only; never feeds a decision.
    fn to_f64(&self) -> f64;

    /// Certificate file encoding: "p/q" for rationals, ["p/q","r/s"] for
    /// a + b*sqrt(2).
    fn to_json(&self) -> serde_json::Value;

    fn from_json(v: &serde_json::Value) -> Result<Self>;

    fn is_positive_scalar(&self) -> bool {
        self.sign() == Ordering::Greater
    }

    fn is_negative_scalar(&self) -> bool {
        self.sign() == Ordering::Less
    }
}

impl CertScalar for BigRational {
    const FIELD_NAME: &'static str = "rational";

    fn from_rational(r: BigRational) -> Self {
        r
    }

    fn sign(&self) -> Ordering {
        if self.is_zero() {
            Ordering::Equal
        } else if self.is_positive() {
            Ordering::Greater
        } else {
            Ordering::Less
        }
    }

    fn to_f64(&self) -> f64 {
        ToPrimitive::to_f64(self).unwrap_or(f64::NAN)
    }

    fn to_json(&self) -> serde_json::Value {
        serde_json::Value::String(self.to_string())
    }

    fn from_json(v: &serde_json::Value) -> Result<Self> {
        match v {
            serde_json::Value::String(s) => parse_rational(s),
            other => Err(Error::Parse(format!("expected rational string, got {other}"))),
        }
    }
}

/// An element `a + b*sqrt(2)` of ℚ(√2) with exact field arithmetic.
#[derive(Clone, PartialEq, Eq, Debug)]
pub struct QuadRat {
    pub a: BigRational,
    pub b: BigRational,
}

impl QuadRat {
    pub fn new(a: BigRational, b: BigRational) -> Self {
        QuadRat { a, b }
    }

    pub fn from_parts(a: BigRational, b: BigRational) -> Self {
        Self::new(a, b)
    }

    pub fn rational(a: BigRational) -> Self {
        QuadRat {
            a,
            b: BigRational::zero(),
        }
    }

    pub fn sqrt2() -> Self {
        QuadRat {
            a: BigRational::zero(),
            b: BigRational::one(),
        }
    }

    /// Field conjugate `a - b*sqrt(2)`.
    pub fn conjugate(&self) -> Self {
        QuadRat {
            a: self.a.clone(),
            b: -self.b.clone(),
        }
    }

    /// Rational norm `a^2 - 2 b^2`.
    pub fn norm(&self) -> BigRational {
        &self.a * &self.a - rat(2, 1) * (&self.b * &self.b)
    }
}

impl fmt::Display for QuadRat {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.b.is_zero() {
            write!(f, "{}", self.a)
        } else if self.a.is_zero() {
            write!(f, "{}*sqrt2", self.b)
        } else {
            write!(f, "{}+{}*sqrt2", self.a, self.b)
        }
    }
}

impl Add for QuadRat {
    type Output = QuadRat;
    fn add(self, rhs: QuadRat) -> QuadRat {
        QuadRat {
            a: self.a + rhs.a,
            b: self.b + rhs.b,
        }
    }
}

impl Sub for QuadRat {
    type Output = QuadRat;
    fn sub(self, rhs: QuadRat) -> QuadRat {
        QuadRat {
            a: self.a - rhs.a,
            b: self.b - rhs.b,
        }
    }
}

impl Neg for QuadRat {
    type Output = QuadRat;
    fn neg(self) -> QuadRat {
        QuadRat {
            a: -self.a,
            b: -self.b,
        }
    }
}

impl Mul for QuadRat {
    type Output = QuadRat;
    fn mul(self, rhs: QuadRat) -> QuadRat {
        // (a + b√2)(c + d√2) = ac + 2bd + (ad + bc)√2
        let a = &self.a * &rhs.a + rat(2, 1) * (&self.b * &rhs.b);
        let b = &self.a * &rhs.b + &self.b * &rhs.a;
        QuadRat { a, b }
    }
}

impl Div for QuadRat {
    type Output = QuadRat;
    fn div(self, rhs: QuadRat) -> QuadRat {
        let norm = rhs.norm();
        assert!(!norm.is_zero(), "division by zero in Q(sqrt 2)");
        let num = self * rhs.conjugate();
        QuadRat {
            a: num.a / norm.clone(),
            b: num.b / norm,
        }
    }
}

impl Zero for QuadRat {
    fn zero() -> Self {
        QuadRat::rational(BigRational::zero())
    }

    fn is_zero(&self) -> bool {
        self.a.is_zero() && self.b.is_zero()
    }
}

impl One for QuadRat {
    fn one() -> Self {
        QuadRat::rational(BigRational::one())
    }
}

impl CertScalar for QuadRat {
    const FIELD_NAME: &'static str = "sqrt2";

    fn from_rational(r: BigRational) -> Self {
        QuadRat::rational(r)
    }

    fn sign(&self) -> Ordering {
        // sign(a + b√2): compare a^2 with 2 b^2 when the parts disagree.
        let sa = CertScalar::sign(&self.a);
        let sb = CertScalar::sign(&self.b);
        match (sa, sb) {
            (Ordering::Equal, s) | (s, Ordering::Equal) => s,
            (Ordering::Greater, Ordering::Greater) => Ordering::Greater,
            (Ordering::Less, Ordering::Less) => Ordering::Less,
            (Ordering::Greater, Ordering::Less) => CertScalar::sign(&self.norm()),
            (Ordering::Less, Ordering::Greater) => CertScalar::sign(&self.norm()).reverse(),
        }
    }

    fn to_f64(&self) -> f64 {
        CertScalar::to_f64(&self.a) + CertScalar::to_f64(&self.b) * std::f64::consts::SQRT_2
    }

    fn to_json(&self) -> serde_json::Value {
        serde_json::Value::Array(vec![
            serde_json::Value::String(self.a.to_string()),
            serde_json::Value::String(self.b.to_string()),
        ])
    }

    fn from_json(v: &serde_json::Value) -> Result<Self> {
        match v {
            serde_json::Value::Array(parts) if parts.len() == 2 => {
                let a = BigRational::from_json(&parts[0])?;
                let b = BigRational::from_json(&parts[1])?;
                Ok(QuadRat { a, b })
            }
            serde_json::Value::String(s) => Ok(QuadRat::rational(parse_rational(s)?)),
            other => Err(Error::Parse(format!(
                "expected [\"p/q\",\"r/s\"] pair for sqrt2 scalar, got {other}"
            ))),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn q(a: (i64, i64), b: (i64, i64)) -> QuadRat {
        QuadRat::new(rat(a.0, a.1), rat(b.0, b.1))
    }

    #[test]
    fn quad_field_arithmetic() {
        let x = q((1, 2), (3, 4)); // 1/2 + 3/4 √2
        let y = q((-2, 1), (1, 3));
        let prod = x.clone() * y.clone();
        let back = prod / y;
        assert_eq!(back, x);

        let s2 = QuadRat::sqrt2();
        assert_eq!(s2.clone() * s2, QuadRat::rational(rat(2, 1)));
    }

    #[test]
    fn exact_sign_matches_float() {
        let cases = [
            q((1, 1), (0, 1)),
            q((0, 1), (-1, 1)),
            q((3, 1), (-2, 1)),   // 3 - 2√2 > 0
            q((-3, 1), (2, 1)),   // 2√2 - 3 < 0... sign of -(3-2√2) = negative
            q((7, 5), (-1, 1)),   // 1.4 - √2 < 0
            q((-7, 5), (1, 1)),   // √2 - 1.4 > 0
            q((0, 1), (0, 1)),
            q((141421356, 100000000), (-1, 1)), // below √2
            q((141421357, 100000000), (-1, 1)), // above √2
        ];
        for c in cases {
            let float = CertScalar::to_f64(&c);
            match CertScalar::sign(&c) {
                Ordering::Equal => assert_eq!(float, 0.0),
                Ordering::Greater => assert!(float > -1e-12, "{c}"),
                Ordering::Less => assert!(float < 1e-12, "{c}"),
            }
        }
        assert_eq!(CertScalar::sign(&q((3, 1), (-2, 1))), Ordering::Greater);
        assert_eq!(CertScalar::sign(&q((-3, 1), (2, 1))), Ordering::Less);
        assert_eq!(
            CertScalar::sign(&q((141421356, 100000000), (-1, 1))),
            Ordering::Less
        );
        assert_eq!(
            CertScalar::sign(&q((141421357, 100000000), (-1, 1))),
            Ordering::Greater
        );
    }

    #[test]
    fn json_round_trip() {
        let x = q((5, 3), (-7, 2));
        let v = x.to_json();
        assert_eq!(QuadRat::from_json(&v).unwrap(), x);
        let r = rat(22, 7);
        assert_eq!(BigRational::from_json(&r.to_json()).unwrap(), r);
    }
}
