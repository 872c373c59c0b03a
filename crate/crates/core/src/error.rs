use std::path::PathBuf;

use crate::poly::{ParsePolyError, VarId};

#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("zero polynomial where a nonzero one is required")]
    ZeroPolynomial,
    #[error("substitution would divide by a non-monomial (variable {0})")]
    NonMonomialDivision(VarId),
    #[error(transparent)]
    Parse(#[from] ParsePolyError),
    #[error("form degree {0} is outside the supported range 1..=12")]
    UnsupportedFormDegree(u32),
    #[error("invalid input: {0}")]
    InvalidInput(String),
    #[error("polynomial is not homogeneous in Y1, Y2")]
    NotHomogeneous,
    #[error("D is not nilpotent on the input within {bound} steps; not a semi-invariant")]
    NotSemiInvariant { bound: u64 },
    #[error("transvectant level {level} out of range (max {max})")]
    LevelOutOfRange { level: u32, max: u32 },
    #[error("polynomials do not share the same (degree, order)")]
    MixedShape,
    #[error("registry is incomplete at degree {degree}")]
    RegistryIncomplete { degree: u32 },
    #[error("candidate budget exhausted at ({degree},{order}): found {found} of {needed}")]
    BudgetExhausted {
        degree: u32,
        order: u32,
        found: usize,
        needed: usize,
    },
    #[error("construction of `{0}` evaluates to zero")]
    ZeroConstruction(String),
    #[error("unknown generator `{0}`")]
    UnknownName(String),
    #[error("duplicate generator name `{0}`")]
    DuplicateName(String),
    #[error("cannot infer transvectant level for `{0}`")]
    LevelInference(String),
    #[error("malformed construction `{text}`: {msg}")]
    Construction { text: String, msg: String },
    #[error("registry format error at line {line}: {msg}")]
    RegistryFormat { line: usize, msg: String },
    #[error("unsupported registry format version {0}")]
    RegistryVersion(u32),
    #[error("registry is for d={found}, expected d={expected}")]
    RegistryFormDegree { found: u32, expected: u32 },
    #[error("i/o error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
