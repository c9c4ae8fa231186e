//! Coefficient scalars: exact quadratic surds over the rationals, and `f64`.
//!
//! Every coefficient of the planted density lives in `Q(√(pq))`, so the exact
//! mode is the field of numbers `a + b·√r` with a fixed squarefree radicand `r`.

use std::cmp::Ordering;
use std::fmt;

use num_bigint::BigInt;
use num_integer::Integer;
use num_rational::BigRational;
use num_traits::{One, Signed, ToPrimitive, Zero};

pub type Rational = BigRational;

/// Arithmetic needed by polynomials, oracles and experiments.
///
/// Implementations never mix: a polynomial is generic over exactly one scalar.
pub trait Scalar: Clone + PartialEq + fmt::Debug + Send + Sync + 'static {
    fn zero() -> Self;
    fn one() -> Self;
    fn from_rational(q: &Rational) -> Self;
    /// Square root of a nonnegative rational.
    fn sqrt_rational(q: &Rational) -> Self;
    fn add(&self, other: &Self) -> Self;
    fn sub(&self, other: &Self) -> Self;
    fn mul(&self, other: &Self) -> Self;
    fn neg(&self) -> Self;
    fn is_zero(&self) -> bool;
    fn to_f64(&self) -> f64;
    /// `|self| ≤ bound`; exact for surds.
    fn abs_le(&self, bound: &Self) -> bool;
    /// JSON rendering used by polynomial dumps.
    fn to_json(&self) -> serde_json::Value;

    fn scale(&self, q: &Rational) -> Self {
        self.mul(&Self::from_rational(q))
    }

    fn from_i64(v: i64) -> Self {
        Self::from_rational(&Rational::from_integer(BigInt::from(v)))
    }

    fn pow(&self, e: usize) -> Self {
        let mut acc = Self::one();
        for _ in 0..e {
            acc = acc.mul(self);
        }
        acc
    }
}

/// Exact number `rat + irr·√radicand` with `radicand` a squarefree integer > 1.
///
/// Invariant: `irr == 0` iff `radicand == 0`.
#[derive(Clone, PartialEq, Eq, Hash)]
pub struct Surd {
    rat: Rational,
    irr: Rational,
    radicand: BigInt,
}

/// Splits `m = s² · f` with `f` free of square factors found by trial division.
fn split_square(m: &BigInt) -> (BigInt, BigInt) {
    let mut rest = m.clone();
    let mut outside = BigInt::one();
    let mut f = BigInt::from(2u32);
    let limit = BigInt::from(1_000_000u32);
    while &f * &f <= rest && f <= limit {
        let sq = &f * &f;
        while rest.is_multiple_of(&sq) {
            rest /= &sq;
            outside *= &f;
        }
        f += 1u32;
    }
    let root = rest.sqrt();
    if &root * &root == rest {
        outside *= root;
        rest = BigInt::one();
    }
    (outside, rest)
}

impl Surd {
    pub fn rational(q: Rational) -> Self {
        Surd { rat: q, irr: Rational::zero(), radicand: BigInt::zero() }
    }

    pub fn rational_part(&self) -> &Rational {
        &self.rat
    }

    pub fn irrational_part(&self) -> (&Rational, &BigInt) {
        (&self.irr, &self.radicand)
    }

    pub fn is_rational(&self) -> bool {
        self.irr.is_zero()
    }

    /// Returns the value as a rational when it has no surd part.
    pub fn as_rational(&self) -> Option<&Rational> {
        self.is_rational().then_some(&self.rat)
    }

    fn build(rat: Rational, irr: Rational, radicand: BigInt) -> Self {
        if irr.is_zero() {
            Surd::rational(rat)
        } else {
            Surd { rat, irr, radicand }
        }
    }

    fn common_radicand(&self, other: &Surd) -> BigInt {
        match (self.irr.is_zero(), other.irr.is_zero()) {
            (true, _) => other.radicand.clone(),
            (_, true) => self.radicand.clone(),
            _ => {
                assert_eq!(self.radicand, other.radicand, "surds over different quadratic fields cannot be combined");
                self.radicand.clone()
            }
        }
    }

    /// Exact sign.
    pub fn signum(&self) -> Ordering {
        let sa = self.rat.cmp(&Rational::zero());
        let sb = self.irr.cmp(&Rational::zero());
        if sb == Ordering::Equal {
            return sa;
        }
        if sa == Ordering::Equal || sa == sb {
            return sb;
        }
        let a2 = &self.rat * &self.rat;
        let b2r = &self.irr * &self.irr * Rational::from_integer(self.radicand.clone());
        match a2.cmp(&b2r) {
            Ordering::Greater => sa,
            Ordering::Less => sb,
            Ordering::Equal => Ordering::Equal,
        }
    }

    pub fn abs(&self) -> Surd {
        if self.signum() == Ordering::Less {
            Scalar::neg(self)
        } else {
            self.clone()
        }
    }

    /// Exact total order.
    pub fn cmp_exact(&self, other: &Surd) -> Ordering {
        Scalar::sub(self, other).signum()
    }
}

impl fmt::Debug for Surd {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        fmt::Display::fmt(self, f)
    }
}

impl fmt::Display for Surd {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.irr.is_zero() {
            write!(f, "{}", self.rat)
        } else {
            write!(f, "{}+{}*sqrt({})", self.rat, self.irr, self.radicand)
        }
    }
}

impl Scalar for Surd {
    fn zero() -> Self {
        Surd::rational(Rational::zero())
    }

    fn one() -> Self {
        Surd::rational(Rational::one())
    }

    fn from_rational(q: &Rational) -> Self {
        Surd::rational(q.clone())
    }

    fn sqrt_rational(q: &Rational) -> Self {
        assert!(!q.is_negative(), "square root of a negative rational");
        if q.is_zero() {
            return Surd::zero();
        }
        // √(a/b) = √(a·b) / b
        let m = q.numer() * q.denom();
        let (outside, inside) = split_square(&m);
        let coeff = Rational::new(outside, q.denom().clone());
        if inside.is_one() {
            Surd::rational(coeff)
        } else {
            Surd { rat: Rational::zero(), irr: coeff, radicand: inside }
        }
    }

    fn add(&self, other: &Self) -> Self {
        let r = self.common_radicand(other);
        Surd::build(&self.rat + &other.rat, &self.irr + &other.irr, r)
    }

    fn sub(&self, other: &Self) -> Self {
        let r = self.common_radicand(other);
        Surd::build(&self.rat - &other.rat, &self.irr - &other.irr, r)
    }

    fn mul(&self, other: &Self) -> Self {
        let r = self.common_radicand(other);
        let rr = Rational::from_integer(r.clone());
        let rat = &self.rat * &other.rat + &self.irr * &other.irr * rr;
        let irr = &self.rat * &other.irr + &self.irr * &other.rat;
        Surd::build(rat, irr, r)
    }

    fn neg(&self) -> Self {
        Surd { rat: -self.rat.clone(), irr: -self.irr.clone(), radicand: self.radicand.clone() }
    }

    fn is_zero(&self) -> bool {
        self.rat.is_zero() && self.irr.is_zero()
    }

    fn to_f64(&self) -> f64 {
        let a = self.rat.to_f64().unwrap_or(f64::NAN);
        if self.irr.is_zero() {
            return a;
        }
        let b = self.irr.to_f64().unwrap_or(f64::NAN);
        let r = self.radicand.to_f64().unwrap_or(f64::NAN);
        a + b * r.sqrt()
    }

    fn abs_le(&self, bound: &Self) -> bool {
        self.abs().cmp_exact(bound) != Ordering::Greater
    }

    fn to_json(&self) -> serde_json::Value {
        serde_json::Value::String(self.to_string())
    }

    fn scale(&self, q: &Rational) -> Self {
        Surd::build(&self.rat * q, &self.irr * q, self.radicand.clone())
    }
}

impl Scalar for f64 {
    fn zero() -> Self {
        0.0
    }

    fn one() -> Self {
        1.0
    }

    fn from_rational(q: &Rational) -> Self {
        q.to_f64().unwrap_or(f64::NAN)
    }

    fn sqrt_rational(q: &Rational) -> Self {
        Self::from_rational(q).sqrt()
    }

    fn add(&self, other: &Self) -> Self {
        self + other
    }

    fn sub(&self, other: &Self) -> Self {
        self - other
    }

    fn mul(&self, other: &Self) -> Self {
        self * other
    }

    fn neg(&self) -> Self {
        -self
    }

    fn is_zero(&self) -> bool {
        *self == 0.0
    }

    fn to_f64(&self) -> f64 {
        *self
    }

    fn abs_le(&self, bound: &Self) -> bool {
        self.abs() <= *bound
    }

    fn to_json(&self) -> serde_json::Value {
        serde_json::Number::from_f64(*self).map(serde_json::Value::Number).unwrap_or(serde_json::Value::Null)
    }
}

/// Parses `"a/b"`, `"a"` or a finite decimal such as `"0.125"` into an exact rational.
pub fn parse_rational(s: &str) -> Option<Rational> {
    let s = s.trim();
    if let Some((n, d)) = s.split_once('/') {
        let n: BigInt = n.trim().parse().ok()?;
        let d: BigInt = d.trim().parse().ok()?;
        if d.is_zero() {
            return None;
        }
        return Some(Rational::new(n, d));
    }
    let (mantissa, exp) = match s.split_once(['e', 'E']) {
        Some((m, e)) => (m, e.parse::<i32>().ok()?),
        None => (s, 0),
    };
    let (neg, body) = match mantissa.strip_prefix('-') {
        Some(rest) => (true, rest),
        None => (false, mantissa.strip_prefix('+').unwrap_or(mantissa)),
    };
    let (int_part, frac_part) = body.split_once('.').unwrap_or((body, ""));
    if int_part.is_empty() && frac_part.is_empty() {
        return None;
    }
    let digits = format!("{int_part}{frac_part}");
    if !digits.chars().all(|c| c.is_ascii_digit()) {
        return None;
    }
    let mut value = Rational::from_integer(digits.parse::<BigInt>().ok()?);
    let shift = exp - frac_part.len() as i32;
    let ten = Rational::from_integer(BigInt::from(10));
    value *= num_traits::pow::Pow::pow(&ten, shift);
    Some(if neg { -value } else { value })
}

/// Renders a rational as `"num/den"` (always with a denominator).
pub fn rational_string(q: &Rational) -> String {
    format!("{}/{}", q.numer(), q.denom())
}

/// Shorthand for a small rational literal.
pub fn ratio(n: i64, d: i64) -> Rational {
    Rational::new(BigInt::from(n), BigInt::from(d))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn sqrt_of_perfect_square_is_rational() {
        assert_eq!(Surd::sqrt_rational(&ratio(1, 4)), Surd::rational(ratio(1, 2)));
        assert_eq!(Surd::sqrt_rational(&ratio(9, 16)), Surd::rational(ratio(3, 4)));
    }

    #[test]
    fn sqrt_normalizes_radicand() {
        // √(2/9) = √2 / 3
        let s = Surd::sqrt_rational(&ratio(2, 9));
        assert_eq!(s.irrational_part(), (&ratio(1, 3), &BigInt::from(2)));
        let sq = s.mul(&s);
        assert_eq!(sq, Surd::rational(ratio(2, 9)));
        // √8 = 2√2 shares the field with √(2/9)
        let t = Surd::sqrt_rational(&ratio(8, 1));
        assert_eq!(t.add(&s).irrational_part().0, &ratio(7, 3));
    }

    #[test]
    fn exact_sign_and_order() {
        let r2 = Surd::sqrt_rational(&ratio(2, 1));
        let a = Surd::one().sub(&r2); // 1 - √2 < 0
        assert_eq!(a.signum(), Ordering::Less);
        let b = Surd::from_rational(&ratio(3, 2)).sub(&r2); // 1.5 - 1.414 > 0
        assert_eq!(b.signum(), Ordering::Greater);
        assert!(r2.abs_le(&Surd::from_rational(&ratio(1415, 1000))));
        assert!(!r2.abs_le(&Surd::from_rational(&ratio(1414, 1000))));
    }

    #[test]
    fn parse_rational_forms() {
        assert_eq!(parse_rational("3/6"), Some(ratio(1, 2)));
        assert_eq!(parse_rational("0.125"), Some(ratio(1, 8)));
        assert_eq!(parse_rational("-1.5"), Some(ratio(-3, 2)));
        assert_eq!(parse_rational("2e-1"), Some(ratio(1, 5)));
        assert_eq!(parse_rational("7"), Some(ratio(7, 1)));
        assert_eq!(parse_rational("x"), None);
        assert_eq!(parse_rational("1/0"), None);
    }

    #[test]
    fn f64_mode_matches_surd_mode() {
        let s = Surd::sqrt_rational(&ratio(2, 9)).add(&Surd::from_rational(&ratio(1, 3)));
        let f = f64::sqrt_rational(&ratio(2, 9)) + 1.0 / 3.0;
        assert!((s.to_f64() - f).abs() < 1e-15);
    }
}
