//! JSON problem files.
//!
//! ```json
//! {
//!   "version": 1,
//!   "name": "vdp",
//!   "variables": 2,
//!   "dynamics": ["-2*x2", "0.8*x1 + 10*(x1^2 - 0.21)*x2"],
//!   "safe": "x1^2 + x2^2 - 1",
//!   "initial": ["-x1 + 0.6", "x1 - 0.8", "-x2", "x2 - 0.2"],
//!   "target": ["x1^2 + x2^2 - 0.01"],
//!   "bounding_box": [[-1, 1], [-1, 1]]
//! }
//! ```
//!
//! Sets are strict sublevel sets: safe `{h < 0}`, initial `{l_i < 0}`,
//! target `{g_j < 0}`.

use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use thiserror::Error;

use crate::poly::{parse_polynomial, PolyError, PolyVector, Polynomial};
use crate::semialg::{BasicOpenSet, BoundingBox, ProblemInstance, SafeSet, SetError};

pub const FORMAT_VERSION: u32 = 1;

#[derive(Debug, Error)]
pub enum ProblemFileError {
    #[error("reading {path}: {source}")]
    Io { path: String, source: std::io::Error },
    #[error("malformed problem JSON: {0}")]
    Json(#[from] serde_json::Error),
    #[error("unsupported problem format version {0}")]
    Version(u32),
    #[error("{field}: {source}")]
    Poly { field: String, source: PolyError },
    #[error(transparent)]
    Set(#[from] SetError),
    #[error("dynamics has {found} components for {expected} variables")]
    Dimension { expected: usize, found: usize },
}

/// On-disk form of a problem.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ProblemFile {
    pub version: u32,
    pub name: String,
    pub variables: usize,
    pub dynamics: Vec<String>,
    pub safe: String,
    pub initial: Vec<String>,
    pub target: Vec<String>,
    pub bounding_box: Vec<(f64, f64)>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub defaults: Option<MethodDefaults>,
}

/// Method parameters used when the command line does not give them.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MethodDefaults {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub method: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub beta: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub alpha_m: Option<String>,
}

/// A parsed problem with its name.
#[derive(Debug, Clone, PartialEq)]
pub struct Problem {
    pub name: String,
    pub instance: ProblemInstance,
    pub defaults: Option<MethodDefaults>,
}

impl ProblemFile {
    pub fn parse(&self) -> Result<Problem, ProblemFileError> {
        if self.version != FORMAT_VERSION {
            return Err(ProblemFileError::Version(self.version));
        }
        let n = self.variables;
        if self.dynamics.len() != n {
            return Err(ProblemFileError::Dimension { expected: n, found: self.dynamics.len() });
        }
        let poly = |field: String, src: &str| {
            parse_polynomial(src, n).map_err(|source| ProblemFileError::Poly { field, source })
        };
        let list = |name: &str, srcs: &[String]| -> Result<Vec<Polynomial>, ProblemFileError> {
            srcs.iter().enumerate().map(|(i, s)| poly(format!("{name}[{i}]"), s)).collect()
        };
        let field = PolyVector::new(list("dynamics", &self.dynamics)?)
            .map_err(|source| ProblemFileError::Poly { field: "dynamics".into(), source })?;
        let safe = SafeSet::new(poly("safe".into(), &self.safe)?);
        let initial = BasicOpenSet::new(list("initial", &self.initial)?)?;
        let target = BasicOpenSet::new(list("target", &self.target)?)?;
        let bbox = BoundingBox::new(self.bounding_box.clone())?;
        let instance = ProblemInstance::new(field, safe, initial, target, bbox)?;
        Ok(Problem { name: self.name.clone(), instance, defaults: self.defaults.clone() })
    }
}

impl Problem {
    pub fn from_json(src: &str) -> Result<Self, ProblemFileError> {
        serde_json::from_str::<ProblemFile>(src)?.parse()
    }

    pub fn load(path: &Path) -> Result<Self, ProblemFileError> {
        let src = fs::read_to_string(path)
            .map_err(|source| ProblemFileError::Io { path: path.display().to_string(), source })?;
        Self::from_json(&src)
    }

    pub fn to_file(&self) -> ProblemFile {
        let inst = &self.instance;
        let strs = |ps: &[Polynomial]| ps.iter().map(|p| p.to_string()).collect();
        ProblemFile {
            version: FORMAT_VERSION,
            name: self.name.clone(),
            variables: inst.dimension(),
            dynamics: strs(inst.field.entries()),
            safe: inst.safe.h().to_string(),
            initial: strs(inst.initial.constraints()),
            target: strs(inst.target.constraints()),
            bounding_box: inst.bounding_box.bounds().to_vec(),
            defaults: self.defaults.clone(),
        }
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(&self.to_file()).expect("problem serializes")
    }

    /// SHA-256 of the canonical JSON form, hex encoded.
    pub fn digest(&self) -> String {
        let hash = Sha256::digest(self.to_json().as_bytes());
        hash.iter().map(|b| format!("{b:02x}")).collect()
    }
}

/// Built-in problems keyed by suite name.
pub fn builtin(name: &str) -> Option<Problem> {
    let src = match name {
        "illu1" => include_str!("../fixtures/illu1.json"),
        "illu4" => include_str!("../fixtures/illu4.json"),
        "vdp" => include_str!("../fixtures/vdp.json"),
        "tan1" => include_str!("../fixtures/tan1.json"),
        "tan2" => include_str!("../fixtures/tan2.json"),
        "dubins" => include_str!("../fixtures/dubins.json"),
        _ => return None,
    };
    Some(Problem::from_json(src).expect("built-in fixture parses"))
}

pub const BUILTIN_NAMES: [&str; 6] = ["illu1", "illu4", "vdp", "tan1", "tan2", "dubins"];
