//! Exact nonnegative scalars.
//!
//! Every distance, radius, and constant in this crate is an [`ExactReal`]:
//! either an arbitrary-precision nonnegative rational, or a symbolic radical
//! `radicand^(1/index)` produced by snowflaking a metric whose values have no
//! exact rational root. Comparisons are always exact; radicals are compared by
//! cross-powering to a common integer exponent. No floating point appears
//! anywhere in a comparison.

use std::cmp::Ordering;
use std::fmt;
use std::hash::Hash;
use std::ops::{Add, Div, Mul, Sub};
use std::str::FromStr;

use num_bigint::BigInt;
use num_integer::Integer;
use num_rational::BigRational;
use num_traits::{One, Signed, ToPrimitive, Zero};

use crate::error::{Error, Result};

#[derive(Clone, PartialEq, Eq, Hash)]
enum Kind {
    Rat(BigRational),
    /// `radicand^(1/index)` with `index >= 2` and `radicand` not a perfect
    /// p-th power for any prime p dividing `index` (minimal radical form, so
    /// structural equality coincides with value equality).
    Root { radicand: BigRational, index: u32 },
}

/// An exact nonnegative scalar.
#[derive(Clone, PartialEq, Eq, Hash)]
pub struct ExactReal(Kind);

fn exact_nth_root(v: &BigRational, n: u32) -> Option<BigRational> {
    if n == 0 {
        return None;
    }
    if n == 1 {
        return Some(v.clone());
    }
    let num = v.numer();
    let den = v.denom();
    if num.is_negative() {
        return None;
    }
    let rn = num.nth_root(n);
    let rd = den.nth_root(n);
    let pow = |b: &BigInt| -> BigInt { b.pow(n) };
    if &pow(&rn) == num && &pow(&rd) == den {
        Some(BigRational::new(rn, rd))
    } else {
        None
    }
}

fn rat_pow(v: &BigRational, e: u32) -> BigRational {
    BigRational::new(v.numer().pow(e), v.denom().pow(e))
}

impl ExactReal {
    pub fn zero() -> Self {
        ExactReal(Kind::Rat(BigRational::zero()))
    }

    pub fn one() -> Self {
        ExactReal(Kind::Rat(BigRational::one()))
    }

    pub fn from_int(n: u64) -> Self {
        ExactReal(Kind::Rat(BigRational::from_integer(BigInt::from(n))))
    }

    /// `p/q` as an exact scalar. Panics if `q == 0` or the value is negative.
    pub fn ratio(p: i64, q: i64) -> Self {
        assert!(q != 0, "zero denominator");
        let r = BigRational::new(BigInt::from(p), BigInt::from(q));
        assert!(!r.is_negative(), "ExactReal must be nonnegative");
        ExactReal(Kind::Rat(r))
    }

    pub fn from_big(r: BigRational) -> Result<Self> {
        if r.is_negative() {
            return Err(Error::InvalidParameter("negative scalar".into()));
        }
        Ok(ExactReal(Kind::Rat(r)))
    }

    fn root(radicand: BigRational, index: u32) -> Self {
        debug_assert!(!radicand.is_negative());
        if index <= 1 {
            return ExactReal(Kind::Rat(radicand));
        }
        if let Some(r) = exact_nth_root(&radicand, index) {
            return ExactReal(Kind::Rat(r));
        }
        // Minimal radical form: pull out every prime factor of the index whose
        // root is exact.
        let mut radicand = radicand;
        let mut index = index;
        let mut p = 2u32;
        while p <= index {
            while index % p == 0 && index / p > 1 {
                match exact_nth_root(&radicand, p) {
                    Some(r) => {
                        radicand = r;
                        index /= p;
                    }
                    None => break,
                }
            }
            p += 1;
        }
        if index == 1 {
            ExactReal(Kind::Rat(radicand))
        } else if let Some(r) = exact_nth_root(&radicand, index) {
            ExactReal(Kind::Rat(r))
        } else {
            ExactReal(Kind::Root { radicand, index })
        }
    }

    pub fn is_zero(&self) -> bool {
        match &self.0 {
            Kind::Rat(r) => r.is_zero(),
            Kind::Root { radicand, .. } => radicand.is_zero(),
        }
    }

    pub fn is_rational(&self) -> bool {
        matches!(self.0, Kind::Rat(_))
    }

    /// The underlying rational, when the value is rational.
    pub fn as_ratio(&self) -> Option<&BigRational> {
        match &self.0 {
            Kind::Rat(r) => Some(r),
            Kind::Root { .. } => None,
        }
    }

    pub fn expect_ratio(&self) -> Result<&BigRational> {
        self.as_ratio().ok_or_else(|| {
            Error::Unsupported("symbolic radical where a rational scalar is required".into())
        })
    }

    /// `self^k` for an integer exponent (negative exponents invert; zero gives 1).
    pub fn pow_int(&self, k: i64) -> Self {
        if k == 0 {
            return Self::one();
        }
        let e = k.unsigned_abs() as u32;
        let powed = match &self.0 {
            Kind::Rat(r) => ExactReal(Kind::Rat(rat_pow(r, e))),
            Kind::Root { radicand, index } => Self::root(rat_pow(radicand, e), *index),
        };
        if k > 0 {
            powed
        } else {
            powed.recip()
        }
    }

    /// `self^(num/den)` with `num, den > 0`, exact where possible, symbolic otherwise.
    pub fn pow_ratio(&self, num: u32, den: u32) -> Result<Self> {
        if num == 0 || den == 0 {
            return Err(Error::InvalidParameter("exponent must be positive".into()));
        }
        let g = num.gcd(&den);
        let (num, den) = (num / g, den / g);
        Ok(match &self.0 {
            Kind::Rat(r) => Self::root(rat_pow(r, num), den),
            Kind::Root { radicand, index } => {
                Self::root(rat_pow(radicand, num), index.checked_mul(den).ok_or_else(
                    || Error::InvalidParameter("radical index overflow".into()),
                )?)
            }
        })
    }

    pub fn recip(&self) -> Self {
        assert!(!self.is_zero(), "reciprocal of zero");
        match &self.0 {
            Kind::Rat(r) => ExactReal(Kind::Rat(r.recip())),
            Kind::Root { radicand, index } => Self::root(radicand.recip(), *index),
        }
    }

    pub fn max(self, other: Self) -> Self {
        if self >= other {
            self
        } else {
            other
        }
    }

    pub fn min(self, other: Self) -> Self {
        if self <= other {
            self
        } else {
            other
        }
    }

    pub fn checked_add(&self, other: &Self) -> Option<Self> {
        match (&self.0, &other.0) {
            (Kind::Rat(a), Kind::Rat(b)) => Some(ExactReal(Kind::Rat(a + b))),
            _ => None,
        }
    }

    pub fn checked_sub(&self, other: &Self) -> Option<Self> {
        match (&self.0, &other.0) {
            (Kind::Rat(a), Kind::Rat(b)) if a >= b => Some(ExactReal(Kind::Rat(a - b))),
            _ => None,
        }
    }

    /// Approximate value, for reporting only. Never used in a comparison.
    pub fn to_f64(&self) -> f64 {
        match &self.0 {
            Kind::Rat(r) => r.to_f64().unwrap_or(f64::NAN),
            Kind::Root { radicand, index } => radicand
                .to_f64()
                .map(|v| v.powf(1.0 / f64::from(*index)))
                .unwrap_or(f64::NAN),
        }
    }
}

impl PartialOrd for ExactReal {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl Ord for ExactReal {
    fn cmp(&self, other: &Self) -> Ordering {
        match (&self.0, &other.0) {
            (Kind::Rat(a), Kind::Rat(b)) => a.cmp(b),
            (Kind::Rat(a), Kind::Root { radicand, index }) => rat_pow(a, *index).cmp(radicand),
            (Kind::Root { radicand, index }, Kind::Rat(b)) => radicand.cmp(&rat_pow(b, *index)),
            (
                Kind::Root { radicand: a, index: m },
                Kind::Root { radicand: b, index: n },
            ) => {
                let l = (*m as u64).lcm(&(*n as u64)) as u32;
                rat_pow(a, l / m).cmp(&rat_pow(b, l / n))
            }
        }
    }
}

impl Add for &ExactReal {
    type Output = ExactReal;
    /// Panics on symbolic radicals; sums of distinct radicals are not closed
    /// under this representation. All additive paths in the crate are rational.
    fn add(self, rhs: &ExactReal) -> ExactReal {
        self.checked_add(rhs)
            .expect("addition requires rational scalars")
    }
}

impl Sub for &ExactReal {
    type Output = ExactReal;
    fn sub(self, rhs: &ExactReal) -> ExactReal {
        self.checked_sub(rhs)
            .expect("subtraction requires rational scalars and a nonnegative result")
    }
}

impl Mul for &ExactReal {
    type Output = ExactReal;
    fn mul(self, rhs: &ExactReal) -> ExactReal {
        match (&self.0, &rhs.0) {
            (Kind::Rat(a), Kind::Rat(b)) => ExactReal(Kind::Rat(a * b)),
            (Kind::Rat(a), Kind::Root { radicand, index }) => {
                ExactReal::root(rat_pow(a, *index) * radicand, *index)
            }
            (Kind::Root { radicand, index }, Kind::Rat(b)) => {
                ExactReal::root(radicand * rat_pow(b, *index), *index)
            }
            (
                Kind::Root { radicand: a, index: m },
                Kind::Root { radicand: b, index: n },
            ) => {
                let l = (*m as u64).lcm(&(*n as u64)) as u32;
                ExactReal::root(rat_pow(a, l / m) * rat_pow(b, l / n), l)
            }
        }
    }
}

impl Div for &ExactReal {
    type Output = ExactReal;
    fn div(self, rhs: &ExactReal) -> ExactReal {
        self * &rhs.recip()
    }
}

macro_rules! forward_owned {
    ($trait:ident, $method:ident) => {
        impl $trait for ExactReal {
            type Output = ExactReal;
            fn $method(self, rhs: ExactReal) -> ExactReal {
                $trait::$method(&self, &rhs)
            }
        }
    };
}
forward_owned!(Add, add);
forward_owned!(Sub, sub);
forward_owned!(Mul, mul);
forward_owned!(Div, div);

impl fmt::Display for ExactReal {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match &self.0 {
            Kind::Rat(r) => {
                if r.denom().is_one() {
                    write!(f, "{}", r.numer())
                } else {
                    write!(f, "{}/{}", r.numer(), r.denom())
                }
            }
            Kind::Root { radicand, index } => {
                write!(f, "({}/{})^(1/{})", radicand.numer(), radicand.denom(), index)
            }
        }
    }
}

impl fmt::Debug for ExactReal {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        fmt::Display::fmt(self, f)
    }
}

impl FromStr for ExactReal {
    type Err = Error;

    /// Parses `"p"`, `"p/q"`, and the radical form `"(p/q)^(1/r)"`.
    fn from_str(s: &str) -> Result<Self> {
        let bad = |m: &str| Error::Serialization(format!("invalid scalar {s:?}: {m}"));
        let s = s.trim();
        if let Some(rest) = s.strip_prefix('(') {
            let (base, exp) = rest
                .split_once(")^(1/")
                .ok_or_else(|| bad("expected (p/q)^(1/r)"))?;
            let exp = exp.strip_suffix(')').ok_or_else(|| bad("unterminated exponent"))?;
            let base: ExactReal = base.parse()?;
            let index: u32 = exp.parse().map_err(|_| bad("bad radical index"))?;
            return base.pow_ratio(1, index);
        }
        let (num, den) = match s.split_once('/') {
            Some((n, d)) => (n, d),
            None => (s, "1"),
        };
        let n = BigInt::from_str(num.trim()).map_err(|_| bad("bad numerator"))?;
        let d = BigInt::from_str(den.trim()).map_err(|_| bad("bad denominator"))?;
        if d.is_zero() {
            return Err(bad("zero denominator"));
        }
        let r = BigRational::new(n, d);
        if r.is_negative() {
            return Err(bad("negative"));
        }
        Ok(ExactReal(Kind::Rat(r)))
    }
}

impl serde::Serialize for ExactReal {
    fn serialize<S: serde::Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        s.serialize_str(&self.to_string())
    }
}

impl<'de> serde::Deserialize<'de> for ExactReal {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        let s = String::deserialize(d)?;
        s.parse().map_err(serde::de::Error::custom)
    }
}
