use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid configuration: {0}")]
    Config(String),

    #[error("domain error: {0}")]
    Domain(String),

    #[error("shape mismatch: {0}")]
    Shape(String),

    #[error("waveform too short: {len} samples, need at least {min}")]
    TooShort { len: usize, min: usize },

    #[error("singular system: {0}")]
    Singular(String),

    #[error("infeasible anchor e_hb = {anchor} V^2; feasible interval is [{lo}, {hi}] V^2")]
    InfeasibleAnchor { anchor: f64, lo: f64, hi: f64 },

    #[error("unknown scheme preset `{0}` (expected one of kljn, vmg1, vmg2, vmg3, fck1)")]
    UnknownPreset(String),

    #[error("calibration failed: {0}")]
    Calibration(String),

    #[error("degenerate attack: {0}")]
    Degenerate(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),

    #[error("config parse error: {0}")]
    TomlDe(#[from] toml::de::Error),

    #[error("config write error: {0}")]
    TomlSer(#[from] toml::ser::Error),
}
