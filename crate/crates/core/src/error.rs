use thiserror::Error;

pub type Result<T> = std::result::Result<T, MoranError>;

#[derive(Debug, Error)]
pub enum MoranError {
    #[error("domain error: {0}")]
    Domain(String),

    #[error("invalid system: {0}")]
    InvalidSystem(String),

    #[error("parse error: {0}")]
    Parse(String),

    /// A query past the declared horizon of a finite-prefix sequence, or a
    /// lookahead that ran out before a claim could be certified.
    #[error("horizon error: {0}")]
    Horizon(String),

    #[error("resource limit exceeded: {0}")]
    Resource(String),

    #[error("s-values collide: s_{i} = s_{j} = {value}")]
    Collision { i: usize, j: usize, value: i64 },

    #[error("hypothesis |b_k| > (N-1)|t_k| fails at k = {k} (b_k = {b}, t_k = {t})")]
    HypothesisViolated { k: usize, b: i64, t: i64 },

    #[error("unsupported case: {0}")]
    Unsupported(String),

    #[error("precondition failed: {0}")]
    Precondition(String),

    #[error("equi-positivity search failed: {0}")]
    SearchFailed(String),

    #[error("certification failed: {0}")]
    Certification(String),

    #[error("fingerprint mismatch: certificate {certificate}, config {config}")]
    Fingerprint { certificate: String, config: String },

    #[error("internal consistency error: {0}")]
    Internal(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl MoranError {
    /// Process exit code: 1 mathematical refusal, 2 resource/horizon, 3 usage/parse.
    pub fn exit_code(&self) -> i32 {
        match self {
            MoranError::Collision { .. }
            | MoranError::HypothesisViolated { .. }
            | MoranError::Precondition(_)
            | MoranError::Certification(_)
            | MoranError::SearchFailed(_)
            | MoranError::Unsupported(_)
            | MoranError::Internal(_) => 1,
            MoranError::Horizon(_) | MoranError::Resource(_) => 2,
            MoranError::Domain(_)
            | MoranError::InvalidSystem(_)
            | MoranError::Parse(_)
            | MoranError::Fingerprint { .. }
            | MoranError::Io(_)
            | MoranError::Json(_) => 3,
        }
    }
}
