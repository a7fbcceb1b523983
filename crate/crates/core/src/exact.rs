//! Exact integer and rational arithmetic on unnormalized rays.
//!
//! Every ideal-model quantity (inner products, projection probabilities,
//! inequality values) is computed here without rounding. Rays stay
//! unnormalized; normalization only appears as the denominator of
//! [`overlap_prob`].

use std::fmt;
use std::ops::{Add, AddAssign};
use std::str::FromStr;

use num_bigint::BigInt;
use num_integer::Integer;
use num_rational::BigRational;
use num_traits::{One, Signed, ToPrimitive, Zero};
use serde::{Deserialize, Deserializer, Serialize, Serializer};

use crate::error::{Error, Result};

pub const DIM: usize = 8;

/// An unnormalized real vector in eight dimensions standing for the
/// rank-1 projector onto its span.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Ray {
    entries: [i32; DIM],
    label: Option<u8>,
}

impl Ray {
    pub fn new(entries: [i32; DIM]) -> Result<Self> {
        if entries.iter().all(|&e| e == 0) {
            return Err(Error::ZeroRay);
        }
        Ok(Ray {
            entries,
            label: None,
        })
    }

    /// Builds a ray from a slice, failing unless it has exactly 8 entries.
    pub fn from_slice(entries: &[i64]) -> Result<Self> {
        if entries.len() != DIM {
            return Err(Error::Validation(format!(
                "expected {DIM} entries, found {}",
                entries.len()
            )));
        }
        let mut out = [0i32; DIM];
        for (o, &e) in out.iter_mut().zip(entries) {
            *o = i32::try_from(e)
                .map_err(|_| Error::Validation(format!("entry {e} does not fit in 32 bits")))?;
        }
        Ray::new(out)
    }

    pub fn with_label(mut self, label: u8) -> Self {
        self.label = Some(label);
        self
    }

    pub fn entries(&self) -> &[i32; DIM] {
        &self.entries
    }

    pub fn label(&self) -> Option<u8> {
        self.label
    }

    pub fn norm_sq(&self) -> i128 {
        dot(self, self)
    }

    /// Multiplies every entry by `k`. Fails for `k == 0`.
    pub fn scaled(&self, k: i32) -> Result<Self> {
        let mut entries = self.entries;
        for e in &mut entries {
            *e = e
                .checked_mul(k)
                .ok_or_else(|| Error::Validation("scaling overflows".into()))?;
        }
        Ray::new(entries).map(|r| Ray {
            label: self.label,
            ..r
        })
    }

    /// Divides out the gcd of the entries and flips the sign so the first
    /// nonzero entry is positive. Two rays span the same line iff their
    /// canonical forms are equal.
    pub fn canonical(&self) -> Self {
        let g = self
            .entries
            .iter()
            .fold(0i32, |g, &e| g.gcd(&e))
            .max(1);
        let lead = self.entries.iter().find(|&&e| e != 0).copied().unwrap_or(1);
        let sign = if lead < 0 { -1 } else { 1 };
        let mut entries = self.entries;
        for e in &mut entries {
            *e = *e / g * sign;
        }
        Ray {
            entries,
            label: self.label,
        }
    }

    pub fn same_line(&self, other: &Ray) -> bool {
        self.canonical().entries == other.canonical().entries
    }

    pub fn support(&self) -> impl Iterator<Item = usize> + '_ {
        self.entries
            .iter()
            .enumerate()
            .filter(|(_, &e)| e != 0)
            .map(|(i, _)| i)
    }
}

impl fmt::Display for Ray {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "(")?;
        for (i, e) in self.entries.iter().enumerate() {
            if i > 0 {
                write!(f, ",")?;
            }
            write!(f, "{e}")?;
        }
        write!(f, ")")
    }
}

impl Serialize for Ray {
    fn serialize<S: Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        self.entries.serialize(s)
    }
}

impl<'de> Deserialize<'de> for Ray {
    fn deserialize<D: Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        let v = Vec::<i64>::deserialize(d)?;
        Ray::from_slice(&v).map_err(serde::de::Error::custom)
    }
}

/// Exact inner product. Entries are `i32`, so eight products always fit.
pub fn dot(a: &Ray, b: &Ray) -> i128 {
    a.entries
        .iter()
        .zip(&b.entries)
        .map(|(&x, &y)| i128::from(x) * i128::from(y))
        .sum()
}

pub fn orthogonal(a: &Ray, b: &Ray) -> bool {
    dot(a, b) == 0
}

/// |<v|s>|^2 / (<s|s><v|v>): the probability that the test `v` returns 1 on
/// the normalized state `s`.
pub fn overlap_prob(state: &Ray, v: &Ray) -> Rational {
    let d = BigInt::from(dot(state, v));
    let num = &d * &d;
    let den = BigInt::from(state.norm_sq()) * BigInt::from(v.norm_sq());
    // Ray::new rejects the zero vector, so den > 0.
    Rational(BigRational::new(num, den))
}

/// Exact rational in lowest terms with a positive denominator.
#[derive(Clone, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct Rational(BigRational);

impl Rational {
    pub fn new(num: i64, den: i64) -> Result<Self> {
        if den == 0 {
            return Err(Error::Validation("zero denominator".into()));
        }
        Ok(Rational(BigRational::new(num.into(), den.into())))
    }

    pub fn zero() -> Self {
        Rational(BigRational::zero())
    }

    pub fn one() -> Self {
        Rational(BigRational::one())
    }

    pub fn integer(n: i64) -> Self {
        Rational(BigRational::from_integer(n.into()))
    }

    pub fn numer(&self) -> &BigInt {
        self.0.numer()
    }

    pub fn denom(&self) -> &BigInt {
        self.0.denom()
    }

    pub fn is_zero(&self) -> bool {
        self.0.is_zero()
    }

    pub fn is_negative(&self) -> bool {
        self.0.is_negative()
    }

    pub fn to_f64(&self) -> f64 {
        self.0.to_f64().unwrap_or(f64::NAN)
    }
}

impl fmt::Display for Rational {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}/{}", self.0.numer(), self.0.denom())
    }
}

impl FromStr for Rational {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let bad = || Error::Validation(format!("not a rational: {s:?}"));
        let (n, d) = match s.split_once('/') {
            Some((n, d)) => (n.trim(), d.trim()),
            None => (s.trim(), "1"),
        };
        let n: BigInt = n.parse().map_err(|_| bad())?;
        let d: BigInt = d.parse().map_err(|_| bad())?;
        if d.is_zero() {
            return Err(bad());
        }
        Ok(Rational(BigRational::new(n, d)))
    }
}

impl Serialize for Rational {
    fn serialize<S: Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        s.collect_str(self)
    }
}

impl<'de> Deserialize<'de> for Rational {
    fn deserialize<D: Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        let s = String::deserialize(d)?;
        s.parse().map_err(serde::de::Error::custom)
    }
}

impl Add for Rational {
    type Output = Rational;
    fn add(self, rhs: Rational) -> Rational {
        Rational(self.0 + rhs.0)
    }
}

impl<'a> Add<&'a Rational> for Rational {
    type Output = Rational;
    fn add(self, rhs: &'a Rational) -> Rational {
        Rational(self.0 + &rhs.0)
    }
}

impl AddAssign<&Rational> for Rational {
    fn add_assign(&mut self, rhs: &Rational) {
        self.0 += &rhs.0;
    }
}

impl std::iter::Sum for Rational {
    fn sum<I: Iterator<Item = Rational>>(iter: I) -> Rational {
        iter.fold(Rational::zero(), |a, b| a + b)
    }
}

impl<'a> std::iter::Sum<&'a Rational> for Rational {
    fn sum<I: Iterator<Item = &'a Rational>>(iter: I) -> Rational {
        iter.fold(Rational::zero(), |a, b| a + b)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn ray(e: [i32; 8]) -> Ray {
        Ray::new(e).unwrap()
    }

    const V1: [i32; 8] = [0, 1, 1, 0, 1, 0, 0, -1];

    #[test]
    fn dot_examples() {
        let v9 = ray([1, 0, 0, 0, 0, 0, 0, 0]);
        let v10 = ray([0, 1, 0, 0, 0, 0, 0, 0]);
        assert_eq!(dot(&v9, &v10), 0);
        assert_eq!(dot(&ray(V1), &ray(V1)), 4);
        assert_eq!(dot(&ray(V1), &ray([0, 1, 1, 0, -1, 0, 0, 1])), 0);
    }

    #[test]
    fn overlap_examples() {
        let ghz = ray(V1);
        assert_eq!(overlap_prob(&ghz, &ghz), Rational::one());
        assert!(overlap_prob(&ghz, &ray([1, 0, 0, 0, 0, 0, 0, 0])).is_zero());
        assert_eq!(
            overlap_prob(&ghz, &ray([1, 0, 1, 0, 1, 0, 1, 0])),
            Rational::new(1, 4).unwrap()
        );
    }

    #[test]
    fn zero_ray_rejected() {
        assert!(matches!(Ray::new([0; 8]), Err(Error::ZeroRay)));
        assert!(Ray::from_slice(&[1, 0, 0]).is_err());
    }

    #[test]
    fn canonical_form() {
        let r = ray([0, -2, 0, 4, 0, 0, 0, -2]).canonical();
        assert_eq!(r.entries(), &[0, 1, 0, -2, 0, 0, 0, 1]);
        assert!(ray([-1, 0, 0, 1, 0, 1, 1, 0]).same_line(&ray([1, 0, 0, -1, 0, -1, -1, 0])));
    }

    #[test]
    fn rational_text_form() {
        let q = Rational::new(6, -8).unwrap();
        assert_eq!(q.to_string(), "-3/4");
        assert_eq!("-3/4".parse::<Rational>().unwrap(), q);
        assert_eq!(serde_json::to_string(&q).unwrap(), "\"-3/4\"");
        assert!("1/0".parse::<Rational>().is_err());
    }

    #[test]
    fn ray_json_is_plain_array() {
        let json = serde_json::to_string(&ray(V1)).unwrap();
        assert_eq!(json, "[0,1,1,0,1,0,0,-1]");
        let back: Ray = serde_json::from_str(&json).unwrap();
        assert_eq!(back, ray(V1));
        assert!(serde_json::from_str::<Ray>("[1,2,3]").is_err());
        assert!(serde_json::from_str::<Ray>("[0,0,0,0,0,0,0,0]").is_err());
    }

    fn arb_ray() -> impl Strategy<Value = Ray> {
        prop::array::uniform8(-20i32..=20)
            .prop_filter("nonzero", |e| e.iter().any(|&x| x != 0))
            .prop_map(|e| Ray::new(e).unwrap())
    }

    proptest! {
        #[test]
        fn dot_symmetric_and_scales(a in arb_ray(), b in arb_ray(), k in -9i32..=9) {
            prop_assert_eq!(dot(&a, &b), dot(&b, &a));
            prop_assume!(k != 0);
            prop_assert_eq!(dot(&a.scaled(k).unwrap(), &b), i128::from(k) * dot(&a, &b));
        }

        #[test]
        fn overlap_scale_invariant_and_bounded(a in arb_ray(), b in arb_ray(), k in 1i32..=9, m in -9i32..=-1) {
            let p = overlap_prob(&a, &b);
            prop_assert!(!p.is_negative());
            prop_assert!(p <= Rational::one());
            prop_assert_eq!(overlap_prob(&a.scaled(k).unwrap(), &b.scaled(m).unwrap()), p);
        }

        #[test]
        fn rational_display_parse_roundtrip(n in -1000i64..1000, d in 1i64..1000) {
            let q = Rational::new(n, d).unwrap();
            prop_assert_eq!(q.to_string().parse::<Rational>().unwrap(), q);
        }
    }
}
