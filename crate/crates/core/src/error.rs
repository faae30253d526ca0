use std::path::PathBuf;

use thiserror::Error;

use crate::model::{Unit, Violation};

/// Errors produced by the model, the folded-format reader and the statistics.
#[derive(Error, Debug)]
pub enum Error {
    #[error("invalid frame label {label:?}: {reason}")]
    InvalidFrame { label: String, reason: &'static str },

    #[error("stack depth {depth} outside 1..={max_depth}")]
    InvalidStackDepth { depth: usize, max_depth: usize },

    #[error("invalid flame graph: {}", join_violations(.0))]
    Invalid(Vec<Violation>),

    #[error("unit mismatch: {left} vs {right}")]
    UnitMismatch { left: Unit, right: Unit },

    #[error("non-finite weight {0}")]
    NonFiniteWeight(f64),

    #[error("scale factor {0} is negative")]
    NegativeScale(f64),

    #[error("scale factor {0} is not finite")]
    NonFiniteScale(f64),

    #[error("cannot normalize by a norm of {0}")]
    ZeroNorm(f64),

    #[error("timestamps out of order at event {index}: {previous} > {current}")]
    UnorderedChart {
        index: usize,
        previous: f64,
        current: f64,
    },

    #[error("{source_name}:{line_no}: malformed line: {reason}")]
    MalformedLine {
        source_name: String,
        line_no: usize,
        reason: String,
    },

    #[error("{source_name}:{line_no}: negative value {value} in a flame graph")]
    NegativeValue {
        source_name: String,
        line_no: usize,
        value: f64,
    },

    #[error("frame normalizer did not reach a fixed point on {0:?}")]
    NormalizerDiverged(String),

    #[error("invalid regex: {0}")]
    Regex(#[from] regex::Error),

    #[error("{}: {source}", .path.display())]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("sample set is empty")]
    EmptySample,

    #[error("need at least 2 runs per sample, got n1={n1}, n2={n2}")]
    InsufficientSamples { n1: usize, n2: usize },

    #[error("no stack survives frequency reduction (min_df={min_df})")]
    EmptyBasis { min_df: usize },

    #[error("degenerate degrees of freedom: n1={n1}, n2={n2}, p={p}")]
    DegenerateDof { n1: usize, n2: usize, p: usize },

    #[error("domain error: {0}")]
    Domain(String),

    #[error("pooled covariance matrix is singular")]
    SingularCovariance,

    #[error("invalid configuration: {0}")]
    Config(String),
}

pub type Result<T> = std::result::Result<T, Error>;

fn join_violations(v: &[Violation]) -> String {
    v.iter()
        .map(ToString::to_string)
        .collect::<Vec<_>>()
        .join("; ")
}

impl Error {
    /// True for failures of statistical preconditions (sample sizes,
    /// degrees of freedom, covariance rank).
    pub fn is_statistical(&self) -> bool {
        matches!(
            self,
            Error::EmptySample
                | Error::InsufficientSamples { .. }
                | Error::EmptyBasis { .. }
                | Error::DegenerateDof { .. }
                | Error::SingularCovariance
        )
    }
}
