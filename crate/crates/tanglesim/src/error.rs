use thiserror::Error;

#[derive(Debug, Error)]
pub enum SimError {
    #[error("degenerate geometry: segments {0} and {1} are collinear and overlapping")]
    DegenerateGeometry(usize, usize),

    #[error("requested knots cannot fit the cable: {0}")]
    PlacementInfeasible(String),

    #[error("grasp target node {0} is outside the reachable workspace")]
    Unreachable(usize),

    #[error("no off-workspace cable to expose")]
    NoTargets,

    #[error("invalid configuration: {0}")]
    ConfigInvalid(String),

    #[error("empty input: {0}")]
    EmptyInput(String),

    #[error("io: {0}")]
    Io(#[from] std::io::Error),

    #[error("serialization: {0}")]
    Serde(#[from] serde_json::Error),
}

pub type Result<T> = std::result::Result<T, SimError>;
