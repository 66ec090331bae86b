use thiserror::Error;

/// Errors produced while building, simulating or reporting an interposer run.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("invalid device parameter `{field}`: {reason}")]
    InvalidParam { field: &'static str, reason: String },

    #[error("invalid device chain: {0}")]
    InvalidChain(String),

    #[error("invalid platform: {0}")]
    InvalidPlatform(String),

    #[error("invalid subnetwork count {requested} for {compute_gateways} compute gateways")]
    InvalidSubnetworkCount { requested: usize, compute_gateways: usize },

    #[error("operation requires a photonic topology")]
    NotPhotonic,

    #[error("layer `{layer}`: {reason}")]
    DimensionMismatch { layer: String, reason: String },

    #[error("layer {0} is not mapped to any compute chiplet")]
    UnmappedLayer(usize),

    #[error("unknown model `{0}`")]
    UnknownModel(String),

    #[error("unknown topology `{0}`")]
    UnknownTopology(String),

    #[error("model file line {line}: {reason}")]
    ModelParse { line: usize, reason: String },

    #[error("deadlock detected at t={time_s:e}s with {pending} transfers pending")]
    DeadlockDetected { time_s: f64, pending: usize },

    #[error("energy-per-bit undefined: no bits delivered")]
    ZeroBits,

    #[error("config line {line}: {reason}")]
    ConfigParse { line: usize, reason: String },

    #[error("config: missing section `[{0}]`")]
    MissingSection(String),

    #[error("config key `{section}.{key}`: {reason}")]
    ConfigValue {
        section: String,
        key: String,
        reason: String,
    },

    #[error("baseline `{0}` is not part of the run set")]
    MissingBaseline(String),

    #[error("i/o error on {path}: {reason}")]
    Io { path: String, reason: String },
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
