//! Scalar fields: exact Gaussian rationals and double-precision complex numbers.

use std::cmp::Ordering;
use std::fmt;
use std::ops::{Add, Div, Mul, Neg, Sub};
use std::str::FromStr;

use num_bigint::BigInt;
use num_complex::Complex64;
use num_rational::BigRational;
use num_traits::{One, Signed, ToPrimitive, Zero};
use serde::{Deserialize, Deserializer, Serialize, Serializer};

use crate::error::{Error, Result};

/// Absolute threshold below which a float scalar counts as zero.
pub const FLOAT_EPS: f64 = 1e-10;

/// Field operations shared by the exact and floating-point layers.
///
/// Arithmetic goes through the `*_ref` methods so the exact type never has to
/// clone big integers just to add two entries.
pub trait Field: Clone + fmt::Debug + PartialEq + Zero + One + Send + Sync + 'static {
    /// True for the exact layer; decides pivoting and zero tests.
    const EXACT: bool;

    fn add_ref(&self, rhs: &Self) -> Self;
    fn sub_ref(&self, rhs: &Self) -> Self;
    fn mul_ref(&self, rhs: &Self) -> Self;
    fn div_ref(&self, rhs: &Self) -> Self;
    fn neg_ref(&self) -> Self;
    fn conj(&self) -> Self;

    fn inv(&self) -> Self {
        Self::one().div_ref(self)
    }

    /// Exact zero test for ℚ(i); tolerance test for floats.
    fn is_negligible(&self) -> bool;
    /// Modulus as a float, used for pivot selection and reporting.
    fn magnitude(&self) -> f64;
    fn from_i64(n: i64) -> Self;
    fn from_qi(q: &Qi) -> Self;
    fn to_c64(&self) -> Complex64;
    /// The exact value, when there is one.
    fn to_qi(&self) -> Option<Qi>;
    /// Total order (real part first, then imaginary part).
    fn canonical_cmp(&self, other: &Self) -> Ordering;

    fn from_frac(n: i64, d: i64) -> Self {
        Self::from_i64(n).div_ref(&Self::from_i64(d))
    }
}

/// A Gaussian rational `re + im·i` with arbitrary-precision parts.
#[derive(Clone, PartialEq, Eq, Hash, Default)]
pub struct Qi {
    re: BigRational,
    im: BigRational,
}

impl Qi {
    pub fn new(re: BigRational, im: BigRational) -> Self {
        Qi { re, im }
    }

    pub fn real(re: BigRational) -> Self {
        Qi {
            re,
            im: BigRational::zero(),
        }
    }

    pub fn int(n: i64) -> Self {
        Qi::real(BigRational::from_integer(BigInt::from(n)))
    }

    pub fn frac(n: i64, d: i64) -> Self {
        Qi::real(BigRational::new(BigInt::from(n), BigInt::from(d)))
    }

    pub fn complex(re: i64, im: i64) -> Self {
        Qi::new(
            BigRational::from_integer(BigInt::from(re)),
            BigRational::from_integer(BigInt::from(im)),
        )
    }

    pub fn i() -> Self {
        Qi::complex(0, 1)
    }

    pub fn re(&self) -> &BigRational {
        &self.re
    }

    pub fn im(&self) -> &BigRational {
        &self.im
    }

    pub fn is_real(&self) -> bool {
        self.im.is_zero()
    }

    /// The integer value if this scalar is a rational integer.
    pub fn as_integer(&self) -> Option<BigInt> {
        if self.im.is_zero() && self.re.is_integer() {
            Some(self.re.to_integer())
        } else {
            None
        }
    }

    pub fn norm_sqr(&self) -> BigRational {
        &self.re * &self.re + &self.im * &self.im
    }

    /// Parse one rational component: `p`, `-p`, `+p/q` with `q > 0`.
    pub fn parse_rational(s: &str) -> Result<BigRational> {
        let t = s.trim();
        if t.is_empty() {
            return Err(Error::Parse("empty rational".into()));
        }
        let (num, den) = match t.split_once('/') {
            Some((n, d)) => (n.trim(), Some(d.trim())),
            None => (t, None),
        };
        let n = BigInt::from_str(num).map_err(|_| Error::Parse(format!("bad numerator in {s:?}")))?;
        let d = match den {
            Some(d) => {
                if d.starts_with('-') || d.starts_with('+') {
                    return Err(Error::Parse(format!("denominator must be a positive integer in {s:?}")));
                }
                BigInt::from_str(d).map_err(|_| Error::Parse(format!("bad denominator in {s:?}")))?
            }
            None => BigInt::one(),
        };
        if !d.is_positive() {
            return Err(Error::Parse(format!("denominator must be positive in {s:?}")));
        }
        Ok(BigRational::new(n, d))
    }

    pub fn parse_parts(re: &str, im: &str) -> Result<Self> {
        Ok(Qi::new(Qi::parse_rational(re)?, Qi::parse_rational(im)?))
    }

    pub fn rational_string(r: &BigRational) -> String {
        if r.is_integer() {
            r.numer().to_string()
        } else {
            format!("{}/{}", r.numer(), r.denom())
        }
    }
}

impl fmt::Display for Qi {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let re = Qi::rational_string(&self.re);
        if self.im.is_zero() {
            return write!(f, "{re}");
        }
        let im_abs = Qi::rational_string(&self.im.abs());
        let sign = if self.im.is_negative() { "-" } else { "+" };
        if self.re.is_zero() {
            let lead = if self.im.is_negative() { "-" } else { "" };
            write!(f, "{lead}{im_abs}i")
        } else {
            write!(f, "{re}{sign}{im_abs}i")
        }
    }
}

impl fmt::Debug for Qi {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        fmt::Display::fmt(self, f)
    }
}

/// Accepts `a`, `a/b`, or a complex literal `a/b+c/di` / `c/di`.
impl FromStr for Qi {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let t: String = s.chars().filter(|c| !c.is_whitespace()).collect();
        if t.is_empty() {
            return Err(Error::Parse("empty scalar".into()));
        }
        if let Some(body) = t.strip_suffix('i') {
            // split at the last sign that is not the leading one
            let split = body
                .char_indices()
                .skip(1)
                .filter(|(_, c)| *c == '+' || *c == '-')
                .map(|(k, _)| k)
                .last();
            let (re, im) = match split {
                Some(k) => (&body[..k], &body[k..]),
                None => ("0", body),
            };
            let im = match im {
                "" | "+" => "1",
                "-" => "-1",
                other => other,
            };
            let im = im.strip_prefix('+').unwrap_or(im);
            return Qi::parse_parts(re, im);
        }
        Ok(Qi::real(Qi::parse_rational(&t)?))
    }
}

#[derive(Serialize, Deserialize)]
struct QiRepr {
    re: String,
    im: String,
}

impl Serialize for Qi {
    fn serialize<S: Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        QiRepr {
            re: Qi::rational_string(&self.re),
            im: Qi::rational_string(&self.im),
        }
        .serialize(s)
    }
}

impl<'de> Deserialize<'de> for Qi {
    fn deserialize<D: Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        // documents may also write a scalar as a string such as "1/2-3i"
        #[derive(Deserialize)]
        #[serde(untagged)]
        enum Input {
            Parts(QiRepr),
            Text(String),
        }
        match Input::deserialize(d)? {
            Input::Parts(r) => Qi::parse_parts(&r.re, &r.im),
            Input::Text(t) => t.parse(),
        }
        .map_err(serde::de::Error::custom)
    }
}

impl Add for Qi {
    type Output = Qi;
    fn add(self, rhs: Qi) -> Qi {
        self.add_ref(&rhs)
    }
}

impl Sub for Qi {
    type Output = Qi;
    fn sub(self, rhs: Qi) -> Qi {
        self.sub_ref(&rhs)
    }
}

impl Mul for Qi {
    type Output = Qi;
    fn mul(self, rhs: Qi) -> Qi {
        self.mul_ref(&rhs)
    }
}

impl Div for Qi {
    type Output = Qi;
    fn div(self, rhs: Qi) -> Qi {
        self.div_ref(&rhs)
    }
}

impl Neg for Qi {
    type Output = Qi;
    fn neg(self) -> Qi {
        Qi {
            re: -self.re,
            im: -self.im,
        }
    }
}

impl<'a> Add<&'a Qi> for &'a Qi {
    type Output = Qi;
    fn add(self, rhs: &Qi) -> Qi {
        self.add_ref(rhs)
    }
}

impl<'a> Sub<&'a Qi> for &'a Qi {
    type Output = Qi;
    fn sub(self, rhs: &Qi) -> Qi {
        self.sub_ref(rhs)
    }
}

impl<'a> Mul<&'a Qi> for &'a Qi {
    type Output = Qi;
    fn mul(self, rhs: &Qi) -> Qi {
        self.mul_ref(rhs)
    }
}

impl<'a> Div<&'a Qi> for &'a Qi {
    type Output = Qi;
    fn div(self, rhs: &Qi) -> Qi {
        self.div_ref(rhs)
    }
}

impl Zero for Qi {
    fn zero() -> Self {
        Qi::default()
    }
    fn is_zero(&self) -> bool {
        self.re.is_zero() && self.im.is_zero()
    }
}

impl One for Qi {
    fn one() -> Self {
        Qi::real(BigRational::one())
    }
}

impl Field for Qi {
    const EXACT: bool = true;

    fn add_ref(&self, rhs: &Self) -> Self {
        if rhs.is_zero() {
            return self.clone();
        }
        if self.is_zero() {
            return rhs.clone();
        }
        Qi {
            re: &self.re + &rhs.re,
            im: &self.im + &rhs.im,
        }
    }

    fn sub_ref(&self, rhs: &Self) -> Self {
        if rhs.is_zero() {
            return self.clone();
        }
        Qi {
            re: &self.re - &rhs.re,
            im: &self.im - &rhs.im,
        }
    }

    fn mul_ref(&self, rhs: &Self) -> Self {
        if self.is_zero() || rhs.is_zero() {
            return Qi::zero();
        }
        match (self.im.is_zero(), rhs.im.is_zero()) {
            (true, true) => Qi::real(&self.re * &rhs.re),
            (true, false) => Qi {
                re: &self.re * &rhs.re,
                im: &self.re * &rhs.im,
            },
            (false, true) => Qi {
                re: &self.re * &rhs.re,
                im: &self.im * &rhs.re,
            },
            (false, false) => Qi {
                re: &self.re * &rhs.re - &self.im * &rhs.im,
                im: &self.re * &rhs.im + &self.im * &rhs.re,
            },
        }
    }

    fn div_ref(&self, rhs: &Self) -> Self {
        assert!(!rhs.is_zero(), "division by zero in Qi");
        if self.is_zero() {
            return Qi::zero();
        }
        if rhs.im.is_zero() {
            return Qi {
                re: &self.re / &rhs.re,
                im: &self.im / &rhs.re,
            };
        }
        let n = rhs.norm_sqr();
        let num = self.mul_ref(&rhs.conj());
        Qi {
            re: num.re / &n,
            im: num.im / n,
        }
    }

    fn neg_ref(&self) -> Self {
        Qi {
            re: -&self.re,
            im: -&self.im,
        }
    }

    fn conj(&self) -> Self {
        Qi {
            re: self.re.clone(),
            im: -&self.im,
        }
    }

    fn is_negligible(&self) -> bool {
        self.is_zero()
    }

    fn magnitude(&self) -> f64 {
        self.to_c64().norm()
    }

    fn from_i64(n: i64) -> Self {
        Qi::int(n)
    }

    fn from_qi(q: &Qi) -> Self {
        q.clone()
    }

    fn to_qi(&self) -> Option<Qi> {
        Some(self.clone())
    }

    fn to_c64(&self) -> Complex64 {
        Complex64::new(
            self.re.to_f64().unwrap_or(f64::NAN),
            self.im.to_f64().unwrap_or(f64::NAN),
        )
    }

    fn canonical_cmp(&self, other: &Self) -> Ordering {
        self.re.cmp(&other.re).then_with(|| self.im.cmp(&other.im))
    }
}

impl Field for Complex64 {
    const EXACT: bool = false;

    fn add_ref(&self, rhs: &Self) -> Self {
        self + rhs
    }
    fn sub_ref(&self, rhs: &Self) -> Self {
        self - rhs
    }
    fn mul_ref(&self, rhs: &Self) -> Self {
        self * rhs
    }
    fn div_ref(&self, rhs: &Self) -> Self {
        self / rhs
    }
    fn neg_ref(&self) -> Self {
        -self
    }
    fn conj(&self) -> Self {
        Complex64::conj(self)
    }
    fn is_negligible(&self) -> bool {
        self.norm() <= FLOAT_EPS
    }
    fn magnitude(&self) -> f64 {
        self.norm()
    }
    fn from_i64(n: i64) -> Self {
        Complex64::new(n as f64, 0.0)
    }
    fn from_qi(q: &Qi) -> Self {
        q.to_c64()
    }
    fn to_qi(&self) -> Option<Qi> {
        None
    }
    fn to_c64(&self) -> Complex64 {
        *self
    }
    fn canonical_cmp(&self, other: &Self) -> Ordering {
        self.re
            .total_cmp(&other.re)
            .then_with(|| self.im.total_cmp(&other.im))
    }
}

/// Best rational approximation of `x` with denominator at most `max_den`,
/// via continued fractions.
pub fn rationalize(x: f64, max_den: i64) -> Option<BigRational> {
    if !x.is_finite() {
        return None;
    }
    let sign = if x < 0.0 { -1 } else { 1 };
    let mut v = x.abs();
    let (mut p0, mut q0, mut p1, mut q1) = (0i128, 1i128, 1i128, 0i128);
    for _ in 0..64 {
        let a = v.floor();
        if a > 1e15 {
            break;
        }
        let a = a as i128;
        let p2 = a * p1 + p0;
        let q2 = a * q1 + q0;
        if q2 > max_den as i128 {
            break;
        }
        p0 = p1;
        q0 = q1;
        p1 = p2;
        q1 = q2;
        let frac = v - a as f64;
        if frac < 1e-13 {
            break;
        }
        v = 1.0 / frac;
    }
    if q1 == 0 {
        return None;
    }
    Some(BigRational::new(
        BigInt::from(sign * p1),
        BigInt::from(q1),
    ))
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn qi_strategy() -> impl Strategy<Value = Qi> {
        (-20i64..20, 1i64..7, -20i64..20, 1i64..7).prop_map(|(a, b, c, d)| {
            Qi::new(
                BigRational::new(a.into(), b.into()),
                BigRational::new(c.into(), d.into()),
            )
        })
    }

    #[test]
    fn parse_and_print() {
        let q: Qi = "3/4".parse().unwrap();
        assert_eq!(q, Qi::frac(3, 4));
        let z: Qi = "1/2-3i".parse().unwrap();
        assert_eq!(z, Qi::new(BigRational::new(1.into(), 2.into()), BigRational::from_integer((-3).into())));
        assert_eq!(z.to_string(), "1/2-3i");
        let w: Qi = "-i".parse().unwrap();
        assert_eq!(w, Qi::complex(0, -1));
        assert!("1/0".parse::<Qi>().is_err());
        assert!("1/-2".parse::<Qi>().is_err());
        assert_eq!(Qi::parse_rational("6/4").unwrap(), BigRational::new(3.into(), 2.into()));
    }

    #[test]
    fn json_round_trip() {
        let z = Qi::new(BigRational::new((-5).into(), 3.into()), BigRational::from_integer(2.into()));
        let s = serde_json::to_string(&z).unwrap();
        assert_eq!(s, r#"{"re":"-5/3","im":"2"}"#);
        let back: Qi = serde_json::from_str(&s).unwrap();
        assert_eq!(back, z);
        assert!(serde_json::from_str::<Qi>(r#"{"re":"1/0","im":"0"}"#).is_err());
        assert_eq!(serde_json::from_str::<Qi>(r#""1/2-3i""#).unwrap(), Qi::new(BigRational::new(1.into(), 2.into()), BigRational::from_integer((-3).into())));
    }

    #[test]
    fn division_by_complex() {
        let a = Qi::complex(1, 1);
        let b = Qi::complex(1, -1);
        assert_eq!(a.div_ref(&b), Qi::i());
    }

    #[test]
    fn rationalize_recovers_small_fractions() {
        assert_eq!(rationalize(-0.375, 1000).unwrap(), BigRational::new((-3).into(), 8.into()));
        assert_eq!(rationalize(2.0 / 3.0 + 1e-14, 1000).unwrap(), BigRational::new(2.into(), 3.into()));
    }

    proptest! {
        #[test]
        fn field_axioms(a in qi_strategy(), b in qi_strategy(), c in qi_strategy()) {
            prop_assert_eq!((&a + &b) + c.clone(), a.clone() + (&b + &c));
            prop_assert_eq!(a.mul_ref(&b.add_ref(&c)), a.mul_ref(&b).add_ref(&a.mul_ref(&c)));
            if !a.is_zero() {
                prop_assert_eq!(a.mul_ref(&a.inv()), Qi::one());
            }
        }

        #[test]
        fn display_parses_back(a in qi_strategy()) {
            let back: Qi = a.to_string().parse().unwrap();
            prop_assert_eq!(back, a);
        }
    }
}
