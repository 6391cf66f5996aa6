use exoshape::analysis::AnalysisError;
use exoshape::dob::DobError;
use exoshape::shaping::ShapingError;
use exoshape::sim::SimError;
use exoshape::tf::TfError;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum CliError {
    #[error("{0}")]
    Io(String),
    #[error("parse error at line {line}, field `{field}`: {message}")]
    Parse { line: usize, field: String, message: String },
    #[error("validation error: {0}")]
    Validation(String),
    #[error("unknown parameter `{0}`")]
    UnknownParam(String),
    #[error("unknown metric `{0}`")]
    UnknownMetric(String),
    #[error("synthesis failed: {0}")]
    Synthesis(String),
    #[error("simulation diverged: {0}")]
    Simulation(String),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Io(_) => 1,
            CliError::Parse { .. } | CliError::Validation(_) | CliError::UnknownParam(_) | CliError::UnknownMetric(_) => 2,
            CliError::Synthesis(_) => 3,
            CliError::Simulation(_) => 4,
        }
    }

    pub fn context(self, what: &str) -> Self {
        match self {
            CliError::Synthesis(m) => CliError::Synthesis(format!("{what}: {m}")),
            CliError::Simulation(m) => CliError::Simulation(format!("{what}: {m}")),
            other => other,
        }
    }
}

impl From<std::io::Error> for CliError {
    fn from(e: std::io::Error) -> Self {
        CliError::Io(e.to_string())
    }
}

impl From<csv::Error> for CliError {
    fn from(e: csv::Error) -> Self {
        CliError::Io(e.to_string())
    }
}

impl From<serde_json::Error> for CliError {
    fn from(e: serde_json::Error) -> Self {
        CliError::Io(e.to_string())
    }
}

impl From<ShapingError> for CliError {
    fn from(e: ShapingError) -> Self {
        match e {
            ShapingError::InvalidSpec(m) => CliError::Validation(m),
            other => CliError::Synthesis(format!("shaping: {other}")),
        }
    }
}

impl From<TfError> for CliError {
    fn from(e: TfError) -> Self {
        CliError::Synthesis(format!("transfer function: {e}"))
    }
}

impl From<DobError> for CliError {
    fn from(e: DobError) -> Self {
        CliError::Synthesis(format!("dob: {e}"))
    }
}

impl From<AnalysisError> for CliError {
    fn from(e: AnalysisError) -> Self {
        match e {
            AnalysisError::Sim(e) => (*e).into(),
            AnalysisError::InvalidGrid(m) => CliError::Validation(m),
            AnalysisError::InvalidRange(a, b) => CliError::Validation(format!("invalid range [{a}, {b}]")),
            other => CliError::Synthesis(format!("analysis: {other}")),
        }
    }
}

impl From<SimError> for CliError {
    fn from(e: SimError) -> Self {
        match e {
            SimError::InstabilityDetected { .. } | SimError::NonFinite(_) => CliError::Simulation(e.to_string()),
            SimError::InvalidConfig(m) => CliError::Validation(m),
            SimError::Shaping(s) => s.into(),
            other => CliError::Synthesis(format!("sim: {other}")),
        }
    }
}
