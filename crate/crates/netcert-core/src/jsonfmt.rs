//! Canonical JSON number formatting.
//!
//! All floating-point values in report files are written with 17 significant
//! digits so that every double round-trips losslessly and reruns are
//! byte-identical.

use crate::error::Error;
use num_bigint::BigInt;
use num_rational::BigRational;
use serde::{Deserialize, Deserializer, Serialize, Serializer};
use std::str::FromStr;

/// An `f64` that serializes as a JSON number with 17 significant digits.
#[derive(Clone, Copy, Debug, PartialEq, PartialOrd)]
pub struct F64(pub f64);

/// Render with 17 significant digits (one leading digit plus 16 after the
/// point in scientific notation). Valid JSON number syntax.
pub fn format_f64(x: f64) -> String {
    assert!(x.is_finite(), "cannot serialize non-finite float {x}");
    format!("{:.16e}", x)
}

impl Serialize for F64 {
    fn serialize<S: Serializer>(&self, serializer: S) -> Result<S::Ok, S::Error> {
        let raw = serde_json::value::RawValue::from_string(format_f64(self.0))
            .map_err(serde::ser::Error::custom)?;
        raw.serialize(serializer)
    }
}

impl<'de> Deserialize<'de> for F64 {
    fn deserialize<D: Deserializer<'de>>(deserializer: D) -> Result<Self, D::Error> {
        Ok(F64(f64::deserialize(deserializer)?))
    }
}

impl From<f64> for F64 {
    fn from(x: f64) -> Self {
        F64(x)
    }
}

/// Canonical text form of an exact probability or weight: `"1/27"`, or a
/// bare integer when the denominator is 1.
pub fn format_ratio(r: &BigRational) -> String {
    if r.denom() == &BigInt::from(1) {
        r.numer().to_string()
    } else {
        format!("{}/{}", r.numer(), r.denom())
    }
}

pub fn parse_ratio(text: &str) -> crate::Result<BigRational> {
    let parse_int = |s: &str| {
        BigInt::from_str(s.trim())
            .map_err(|_| Error::InvalidDistribution(format!("bad rational {text:?}")))
    };
    match text.split_once('/') {
        Some((n, d)) => {
            let denom = parse_int(d)?;
            if denom == BigInt::from(0) {
                return Err(Error::InvalidDistribution(format!("bad rational {text:?}")));
            }
            Ok(BigRational::new(parse_int(n)?, denom))
        }
        None => Ok(BigRational::from(parse_int(text)?)),
    }
}
