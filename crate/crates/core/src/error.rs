use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("syntax error at line {line}, column {column}: {message}")]
    Syntax {
        line: usize,
        column: usize,
        message: String,
    },
    #[error("unknown bus reference {bus} in branch {branch}")]
    UnknownBus { bus: i64, branch: usize },
    #[error("expected exactly one slack bus, found {0}")]
    SlackCount(usize),
    #[error("invalid network: {0}")]
    InvalidNetwork(String),
    #[error(
        "network is not connected: {components} components after dropping out-of-service branches"
    )]
    Disconnected { components: usize },
    #[error("invalid case json: {0}")]
    Json(#[from] serde_json::Error),

    #[error("infeasible partition: {0}")]
    InfeasiblePartition(String),
    #[error("area {area} is disconnected: {components:?}")]
    DisconnectedArea {
        area: usize,
        components: Vec<Vec<usize>>,
    },

    #[error("invalid measurement data: {0}")]
    InvalidMeasurement(String),

    #[error("matrix not positive definite at pivot {pivot}")]
    NotPositiveDefinite { pivot: usize },
    #[error("dimension mismatch: {0}")]
    Dimension(String),

    #[error(
        "area {area}: G_ii not SPD at pivot {pivot} (locally unobservable or ill-conditioned)"
    )]
    AreaNotSpd { area: usize, pivot: usize },
    #[error("boundary system not SPD at boundary pivot {pivot}")]
    BoundaryNotSpd { pivot: usize },
    #[error("gain matrix not SPD at pivot {pivot}: unobservable or ill-conditioned")]
    Unobservable { pivot: usize },

    #[error(transparent)]
    Io(#[from] std::io::Error),
}
