use thiserror::Error;

use crate::graph::VarId;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("directed cycle through variable {0}")]
    Cyclic(String),

    #[error("duplicate variable name {0:?}")]
    DuplicateName(String),

    #[error("unknown variable {0:?}")]
    UnknownName(String),

    #[error("duplicate edge {0} -> {1}")]
    DuplicateEdge(String, String),

    #[error("self-loop on {0}")]
    SelfLoop(String),

    #[error("variable index {0} out of range for {1} variables")]
    OutOfRange(usize, usize),

    #[error("variable sets overlap on {0:?}")]
    Overlap(VarId),

    #[error("invalid trail: {0}")]
    InvalidTrail(String),

    #[error("enumeration needs n <= {cap}, got {n} (raise the cap explicitly to proceed)")]
    SizeCap { n: usize, cap: usize },

    #[error("graphs are over different variable universes")]
    UniverseMismatch,

    #[error("variable {0:?} is already eliminated")]
    AlreadyMarked(VarId),

    #[error("variable {0:?} appears twice in the elimination order")]
    DuplicateInOrder(VarId),

    #[error("model has no latent variables")]
    NoLatents,

    #[error("invalid latent partition: {0}")]
    InvalidPartition(String),

    #[error("ordering is not a permutation: {0}")]
    NotAPermutation(String),

    #[error("not a valid inverse: latent {latent} is a parent of observed {observed}")]
    InvalidInverse { latent: String, observed: String },

    #[error("inverse is not an I-map of the model")]
    NotAnImap,

    #[error("cardinality mismatch on {var:?}: {left} vs {right}")]
    CardinalityMismatch { var: VarId, left: usize, right: usize },

    #[error("variable {0:?} is not in the factor scope")]
    NotInScope(VarId),

    #[error("invalid factor: {0}")]
    InvalidFactor(String),

    #[error("invalid CPD for {var}: {reason}")]
    InvalidCpd { var: String, reason: String },

    #[error("joint table would have {0} entries, above the limit of {1}")]
    JointTooLarge(u128, usize),

    #[error("q assigns zero probability to a posterior-supported assignment: {0}")]
    Support(String),

    #[error("invalid mask spec: {0}")]
    InvalidMaskSpec(String),

    #[error("mask shapes do not chain: {0}")]
    Shape(String),

    #[error("json: {0}")]
    Json(String),
}

impl From<serde_json::Error> for Error {
    fn from(e: serde_json::Error) -> Self {
        Error::Json(e.to_string())
    }
}
