//! Extended reals: a finite value, either infinity, or an indeterminate
//! `∞ − ∞` form.

use std::fmt;

use serde::de::{self, Deserializer, Visitor};
use serde::{Deserialize, Serialize, Serializer};

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum ExtReal {
    Finite(f64),
    PosInf,
    NegInf,
    Indeterminate,
}

impl ExtReal {
    pub const ZERO: ExtReal = ExtReal::Finite(0.0);

    pub fn from_f64(x: f64) -> Self {
        if x.is_nan() {
            ExtReal::Indeterminate
        } else if x == f64::INFINITY {
            ExtReal::PosInf
        } else if x == f64::NEG_INFINITY {
            ExtReal::NegInf
        } else {
            ExtReal::Finite(x)
        }
    }

    /// Combines a positive part and a negative part (both ≥ 0, possibly
    /// infinite) into `pos − neg`.
    pub fn from_parts(pos: ExtReal, neg: ExtReal) -> Self {
        match (pos, neg) {
            (ExtReal::PosInf, ExtReal::PosInf) => ExtReal::Indeterminate,
            (ExtReal::PosInf, _) => ExtReal::PosInf,
            (_, ExtReal::PosInf) => ExtReal::NegInf,
            (ExtReal::Finite(p), ExtReal::Finite(n)) => ExtReal::Finite(p - n),
            _ => ExtReal::Indeterminate,
        }
    }

    pub fn is_finite(&self) -> bool {
        matches!(self, ExtReal::Finite(_))
    }

    /// True unless the value is an indeterminate form.
    pub fn exists(&self) -> bool {
        !matches!(self, ExtReal::Indeterminate)
    }

    pub fn finite(&self) -> Option<f64> {
        match self {
            ExtReal::Finite(x) => Some(*x),
            _ => None,
        }
    }

    /// Ordering-compatible float view; `Indeterminate` maps to NaN.
    pub fn to_f64(&self) -> f64 {
        match self {
            ExtReal::Finite(x) => *x,
            ExtReal::PosInf => f64::INFINITY,
            ExtReal::NegInf => f64::NEG_INFINITY,
            ExtReal::Indeterminate => f64::NAN,
        }
    }

    pub fn is_negative(&self) -> bool {
        matches!(self, ExtReal::NegInf) || matches!(self, ExtReal::Finite(x) if *x < 0.0)
    }

    pub fn add(self, other: ExtReal) -> ExtReal {
        use ExtReal::*;
        match (self, other) {
            (Indeterminate, _) | (_, Indeterminate) => Indeterminate,
            (PosInf, NegInf) | (NegInf, PosInf) => Indeterminate,
            (PosInf, _) | (_, PosInf) => PosInf,
            (NegInf, _) | (_, NegInf) => NegInf,
            (Finite(a), Finite(b)) => Finite(a + b),
        }
    }

    /// Multiplication by a finite non-negative scalar (a probability weight).
    /// `0 · ∞` is taken as 0, the measure-theoretic convention.
    pub fn scale(self, w: f64) -> ExtReal {
        debug_assert!(w >= 0.0);
        match self {
            ExtReal::Finite(x) => ExtReal::Finite(w * x),
            _ if w == 0.0 => ExtReal::ZERO,
            other => other,
        }
    }
}

impl fmt::Display for ExtReal {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            ExtReal::Finite(x) => f.write_str(&crate::io::fmt_f64(*x)),
            ExtReal::PosInf => f.write_str("inf"),
            ExtReal::NegInf => f.write_str("-inf"),
            ExtReal::Indeterminate => f.write_str("indeterminate"),
        }
    }
}

impl Serialize for ExtReal {
    fn serialize<S: Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        match self {
            ExtReal::Finite(x) => s.serialize_f64(*x),
            ExtReal::PosInf => s.serialize_str("inf"),
            ExtReal::NegInf => s.serialize_str("-inf"),
            ExtReal::Indeterminate => s.serialize_str("indeterminate"),
        }
    }
}

impl<'de> Deserialize<'de> for ExtReal {
    fn deserialize<D: Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        struct V;
        impl Visitor<'_> for V {
            type Value = ExtReal;
            fn expecting(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
                f.write_str("a number or one of \"inf\", \"-inf\", \"indeterminate\"")
            }
            fn visit_f64<E: de::Error>(self, v: f64) -> Result<ExtReal, E> {
                Ok(ExtReal::Finite(v))
            }
            fn visit_i64<E: de::Error>(self, v: i64) -> Result<ExtReal, E> {
                Ok(ExtReal::Finite(v as f64))
            }
            fn visit_u64<E: de::Error>(self, v: u64) -> Result<ExtReal, E> {
                Ok(ExtReal::Finite(v as f64))
            }
            fn visit_str<E: de::Error>(self, v: &str) -> Result<ExtReal, E> {
                match v {
                    "inf" => Ok(ExtReal::PosInf),
                    "-inf" => Ok(ExtReal::NegInf),
                    "indeterminate" => Ok(ExtReal::Indeterminate),
                    other => Err(E::custom(format!("unexpected extended real `{other}`"))),
                }
            }
        }
        d.deserialize_any(V)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parts_combine() {
        assert_eq!(
            ExtReal::from_parts(ExtReal::PosInf, ExtReal::PosInf),
            ExtReal::Indeterminate
        );
        assert_eq!(ExtReal::from_parts(ExtReal::Finite(1.0), ExtReal::PosInf), ExtReal::NegInf);
        assert_eq!(
            ExtReal::from_parts(ExtReal::Finite(1.0), ExtReal::Finite(0.25)),
            ExtReal::Finite(0.75)
        );
    }

    #[test]
    fn zero_times_infinity_is_zero() {
        assert_eq!(ExtReal::PosInf.scale(0.0), ExtReal::ZERO);
        assert_eq!(ExtReal::PosInf.scale(0.5), ExtReal::PosInf);
    }

    #[test]
    fn json_roundtrip() {
        for v in [ExtReal::Finite(-0.25), ExtReal::PosInf, ExtReal::NegInf, ExtReal::Indeterminate] {
            let s = serde_json::to_string(&v).unwrap();
            let back: ExtReal = serde_json::from_str(&s).unwrap();
            assert_eq!(back, v);
        }
    }
}
