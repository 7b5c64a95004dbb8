//! Scalar abstraction and the exact rational type used throughout the crate.
//!
//! Every algorithm is written against [`Scalar`], which is satisfied by any
//! ordered field-like number type from `num-traits`. The default (and the only
//! type the CLI and file formats use) is [`Rational`], an arbitrary precision
//! fraction kept in canonical form. `f64` also satisfies the bound and is handy
//! for quick experiments, but comparisons on floats are not exact.

use std::fmt::{Debug, Display};

use num_bigint::BigInt;
use num_rational::BigRational;
use num_traits::{FromPrimitive, Num, One, Signed, Zero};
use thiserror::Error;

/// Exact arbitrary precision rational number (always canonical: `gcd = 1`, `den > 0`).
pub type Rational = BigRational;

/// Number types the fair division algorithms can run on.
pub trait Scalar:
    Clone + Debug + Display + PartialOrd + Num + Signed + FromPrimitive + Send + Sync + 'static
{
    fn from_count(k: usize) -> Self {
        Self::from_usize(k).expect("count fits in scalar")
    }
}

impl<T> Scalar for T where
    T: Clone + Debug + Display + PartialOrd + Num + Signed + FromPrimitive + Send + Sync + 'static
{
}

/// `a / wa < b / wb` for strictly positive `wa`, `wb`, evaluated without division.
pub fn weighted_lt<T: Scalar>(a: &T, wa: &T, b: &T, wb: &T) -> bool {
    a.clone() * wb.clone() < b.clone() * wa.clone()
}

/// Sign of a scalar as -1, 0 or 1.
pub fn sign_of<T: Scalar>(x: &T) -> i8 {
    if x.is_positive() {
        1
    } else if x.is_negative() {
        -1
    } else {
        0
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
#[error("malformed rational `{0}`")]
pub struct MalformedRational(pub String);

/// Parse a canonical rational string: `"7"`, `"-3"`, `"2/5"`, `"-11/10"`.
///
/// Non-canonical spellings (`"2/4"`, `"+1"`, `"01"`, `"3/1"`, `"-0"`) are
/// rejected so that parsing and printing are exact inverses.
pub fn parse_rational(text: &str) -> Result<Rational, MalformedRational> {
    let err = || MalformedRational(text.to_string());
    let (num_txt, den_txt) = match text.split_once('/') {
        Some((n, d)) => (n, Some(d)),
        None => (text, None),
    };
    let num: BigInt = parse_int(num_txt).ok_or_else(err)?;
    let den: BigInt = match den_txt {
        Some(d) => {
            if d.starts_with('-') {
                return Err(err());
            }
            parse_int(d).ok_or_else(err)?
        }
        None => BigInt::one(),
    };
    if den.is_zero() {
        return Err(err());
    }
    let value = Rational::new(num, den);
    if format_rational(&value) != text {
        return Err(err());
    }
    Ok(value)
}

fn parse_int(text: &str) -> Option<BigInt> {
    let digits = text.strip_prefix('-').unwrap_or(text);
    if digits.is_empty() || !digits.bytes().all(|b| b.is_ascii_digit()) {
        return None;
    }
    text.parse().ok()
}

/// Canonical text form: integers without a denominator, otherwise `p/q`.
pub fn format_rational(q: &Rational) -> String {
    if q.is_integer() {
        q.numer().to_string()
    } else {
        format!("{}/{}", q.numer(), q.denom())
    }
}

pub fn rational_from_i64(n: i64) -> Rational {
    Rational::from_integer(BigInt::from(n))
}

pub fn ratio(n: i64, d: i64) -> Rational {
    Rational::new(BigInt::from(n), BigInt::from(d))
}

/// Serialize-only helpers that write any scalar through its `Display` form.
///
/// For [`Rational`] this is the canonical string form.
pub mod ser {
    use std::fmt::Display;

    use serde::ser::{SerializeSeq, Serializer};

    pub fn scalar<T: Display, S: Serializer>(x: &T, s: S) -> Result<S::Ok, S::Error> {
        s.collect_str(x)
    }

    pub fn opt_scalar<T: Display, S: Serializer>(x: &Option<T>, s: S) -> Result<S::Ok, S::Error> {
        match x {
            Some(x) => s.collect_str(x),
            None => s.serialize_none(),
        }
    }

    pub fn scalars<T: Display, S: Serializer>(xs: &[T], s: S) -> Result<S::Ok, S::Error> {
        let mut seq = s.serialize_seq(Some(xs.len()))?;
        for x in xs {
            seq.serialize_element(&x.to_string())?;
        }
        seq.end()
    }

    pub fn matrix<T: Display, S: Serializer>(rows: &[Vec<T>], s: S) -> Result<S::Ok, S::Error> {
        let mut seq = s.serialize_seq(Some(rows.len()))?;
        for row in rows {
            let row: Vec<String> = row.iter().map(ToString::to_string).collect();
            seq.serialize_element(&row)?;
        }
        seq.end()
    }
}
