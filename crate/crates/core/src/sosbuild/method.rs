use std::fmt;

use serde::ser::SerializeMap;
use serde::{Serialize, Serializer};

use crate::poly::Polynomial;

/// Certificate family to search for.
#[derive(Clone, Debug, PartialEq)]
pub enum Method {
    /// Classical barrier: `v <= 0` on the initial set, `v > 0` on the
    /// boundary of the safe set, `v` strictly decreasing outside the target.
    Prajna,
    /// Exponential guidance-barrier: `grad v . f >= beta v`.
    ExpGbf { beta: f64 },
    /// Asymptotic guidance-barrier with auxiliary `w`: `grad v . f >= 0` and
    /// `grad w . f >= v`.
    AsymGbf,
    /// `v = v1 + v2` with `v1` asymptotic and `v2` exponential.
    Combined { beta: f64 },
    /// Asymptotic with the derivative bound `grad v . f >= m v`.
    GeneralGbf { multiplier: Polynomial },
}

impl Method {
    /// Short machine name used on the command line and in reports.
    pub fn name(&self) -> &'static str {
        match self {
            Method::Prajna => "prajna",
            Method::ExpGbf { .. } => "exp",
            Method::AsymGbf => "asym",
            Method::Combined { .. } => "combined",
            Method::GeneralGbf { .. } => "general",
        }
    }

    pub fn beta(&self) -> Option<f64> {
        match self {
            Method::ExpGbf { beta } | Method::Combined { beta } => Some(*beta),
            _ => None,
        }
    }

    pub fn multiplier(&self) -> Option<&Polynomial> {
        match self {
            Method::GeneralGbf { multiplier } => Some(multiplier),
            _ => None,
        }
    }

    /// Names of the value functions the method searches for.
    pub fn uses_w(&self) -> bool {
        matches!(self, Method::AsymGbf | Method::Combined { .. } | Method::GeneralGbf { .. })
    }
}

impl fmt::Display for Method {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Method::Prajna => write!(f, "Prajna"),
            Method::ExpGbf { beta } => write!(f, "ExpGBF(beta={beta})"),
            Method::AsymGbf => write!(f, "AsymGBF"),
            Method::Combined { beta } => write!(f, "Combined(beta={beta})"),
            Method::GeneralGbf { multiplier } => write!(f, "GeneralGBF(m={multiplier})"),
        }
    }
}

impl Serialize for Method {
    fn serialize<S: Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        let mut map = s.serialize_map(None)?;
        map.serialize_entry("name", self.name())?;
        if let Some(beta) = self.beta() {
            map.serialize_entry("beta", &beta)?;
        }
        if let Some(m) = self.multiplier() {
            map.serialize_entry("multiplier", &m.to_string())?;
        }
        map.end()
    }
}
