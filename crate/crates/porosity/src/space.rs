//! Finite-dimensional normed-space primitives: lp norms, distances, and
//! norm-one dual functionals.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// A point of the ambient space, identified with its coordinates.
pub type Vector = Vec<f64>;

/// Absolute tolerance for "unit norm" preconditions.
pub const UNIT_TOL: f64 = 1e-9;

/// The lp exponent of a norm.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Lp {
    One,
    Two,
    Inf,
    /// General p in (1, infinity), exact formulas unavailable for duals/operators.
    P(f64),
}

impl Lp {
    pub fn from_value(p: f64) -> Result<Lp> {
        if p.is_infinite() && p > 0.0 {
            Ok(Lp::Inf)
        } else if p == 1.0 {
            Ok(Lp::One)
        } else if p == 2.0 {
            Ok(Lp::Two)
        } else if p.is_finite() && p > 1.0 {
            Ok(Lp::P(p))
        } else {
            Err(Error::InvalidExponent { p })
        }
    }

    pub fn value(&self) -> f64 {
        match self {
            Lp::One => 1.0,
            Lp::Two => 2.0,
            Lp::Inf => f64::INFINITY,
            Lp::P(p) => *p,
        }
    }
}

impl Serialize for Lp {
    fn serialize<S: serde::Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        match self {
            Lp::Inf => s.serialize_str("inf"),
            other => s.serialize_f64(other.value()),
        }
    }
}

impl<'de> Deserialize<'de> for Lp {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        #[derive(Deserialize)]
        #[serde(untagged)]
        enum Raw {
            Num(f64),
            Text(String),
        }
        match Raw::deserialize(d)? {
            Raw::Num(p) => Lp::from_value(p).map_err(serde::de::Error::custom),
            Raw::Text(t) if t == "inf" => Ok(Lp::Inf),
            Raw::Text(t) => Err(serde::de::Error::custom(format!("unknown p: {t:?}"))),
        }
    }
}

/// A finite-dimensional lp space: dimension plus norm exponent.
///
/// Serializes as `{"dim": n, "p": number | "inf"}`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct NormSpec {
    pub dim: usize,
    pub p: Lp,
}

impl NormSpec {
    pub fn new(dim: usize, p: Lp) -> NormSpec {
        assert!(dim > 0, "dimension must be positive");
        NormSpec { dim, p }
    }

    pub fn check_dim(&self, v: &[f64]) -> Result<()> {
        if v.len() != self.dim {
            return Err(Error::DimensionMismatch {
                expected: self.dim,
                got: v.len(),
            });
        }
        if v.iter().any(|x| !x.is_finite()) {
            return Err(Error::NonFinite);
        }
        Ok(())
    }

    /// The lp norm of `v`.
    pub fn norm(&self, v: &[f64]) -> Result<f64> {
        self.check_dim(v)?;
        Ok(self.norm_unchecked(v))
    }

    /// Norm without the dimension/finiteness check; hot-path helper.
    pub fn norm_unchecked(&self, v: &[f64]) -> f64 {
        match self.p {
            Lp::One => v.iter().map(|x| x.abs()).sum(),
            Lp::Two => v.iter().map(|x| x * x).sum::<f64>().sqrt(),
            Lp::Inf => v.iter().fold(0.0, |m, x| m.max(x.abs())),
            Lp::P(p) => v.iter().map(|x| x.abs().powf(p)).sum::<f64>().powf(1.0 / p),
        }
    }

    /// distance(x, y) = |x - y|.
    pub fn distance(&self, x: &[f64], y: &[f64]) -> Result<f64> {
        self.check_dim(x)?;
        self.check_dim(y)?;
        Ok(self.distance_unchecked(x, y))
    }

    pub fn distance_unchecked(&self, x: &[f64], y: &[f64]) -> f64 {
        self.norm_unchecked(&sub(x, y))
    }

    /// Returns the norming functional e* with e*(e) = 1 and dual norm 1.
    ///
    /// For 1 < p < infinity this is the duality map (signed (p-1)-powers,
    /// normalized); for p = 1 the sign vector; for p = infinity a single
    /// signed coordinate functional at the first maximizing index.
    pub fn norming_functional(&self, e: &[f64]) -> Result<Covector> {
        self.check_dim(e)?;
        let n = self.norm_unchecked(e);
        if n == 0.0 {
            return Err(Error::NotUnitNorm { norm: 0.0 });
        }
        if (n - 1.0).abs() > UNIT_TOL {
            return Err(Error::NotUnitNorm { norm: n });
        }
        let coeffs = match self.p {
            Lp::Two => e.to_vec(),
            Lp::One => e.iter().map(|x| sign(*x)).collect(),
            Lp::Inf => {
                // first index attaining the max absolute value
                let mut best = 0;
                for (i, x) in e.iter().enumerate() {
                    if x.abs() > e[best].abs() {
                        best = i;
                    }
                }
                let mut c = vec![0.0; e.len()];
                c[best] = sign(e[best]);
                c
            }
            Lp::P(p) => e.iter().map(|x| sign(*x) * x.abs().powf(p - 1.0)).collect(),
        };
        // normalize the pairing to exactly one
        let pairing: f64 = coeffs.iter().zip(e).map(|(c, x)| c * x).sum();
        let coeffs = coeffs.iter().map(|c| c / pairing).collect();
        Ok(Covector { coeffs })
    }
}

/// A continuous linear functional, evaluated by the dot pairing.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Covector {
    pub coeffs: Vec<f64>,
}

impl Covector {
    pub fn eval(&self, v: &[f64]) -> f64 {
        self.coeffs.iter().zip(v).map(|(c, x)| c * x).sum()
    }
}

fn sign(x: f64) -> f64 {
    if x > 0.0 {
        1.0
    } else if x < 0.0 {
        -1.0
    } else {
        0.0
    }
}

// Small vector helpers used throughout the crate.

pub fn sub(x: &[f64], y: &[f64]) -> Vector {
    x.iter().zip(y).map(|(a, b)| a - b).collect()
}

pub fn add(x: &[f64], y: &[f64]) -> Vector {
    x.iter().zip(y).map(|(a, b)| a + b).collect()
}

pub fn scale(s: f64, x: &[f64]) -> Vector {
    x.iter().map(|a| s * a).collect()
}

/// x + s * y
pub fn axpy(x: &[f64], s: f64, y: &[f64]) -> Vector {
    x.iter().zip(y).map(|(a, b)| a + s * b).collect()
}

/// (1 - t) * x + t * y
pub fn lerp(x: &[f64], y: &[f64], t: f64) -> Vector {
    x.iter().zip(y).map(|(a, b)| (1.0 - t) * a + t * b).collect()
}

pub fn zeros(dim: usize) -> Vector {
    vec![0.0; dim]
}
