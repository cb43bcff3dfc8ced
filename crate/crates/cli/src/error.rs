use gmdalign_core::corpus::CorpusError;
use gmdalign_core::gmd::GmdError;
use gmdalign_core::learners::LearnError;
use gmdalign_core::metric::MetricError;
use gmdalign_core::pipeline::PipelineError;
use gmdalign_core::synth::SynthError;
use thiserror::Error;

/// Exit statuses: 0 success, 1 compute, 2 I/O, 3 validation (including
/// command-line usage errors).
#[derive(Debug, Error)]
pub enum CliError {
    #[error("{0}")]
    Compute(String),
    #[error("{0}")]
    Io(String),
    #[error("{0}")]
    Validation(String),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Compute(_) => 1,
            CliError::Io(_) => 2,
            CliError::Validation(_) => 3,
        }
    }

    pub fn io(path: &std::path::Path, e: std::io::Error) -> Self {
        CliError::Io(format!("{}: {e}", path.display()))
    }
}

impl From<CorpusError> for CliError {
    fn from(e: CorpusError) -> Self {
        match e {
            CorpusError::Io { .. } => CliError::Io(e.to_string()),
            _ => CliError::Validation(e.to_string()),
        }
    }
}

impl From<MetricError> for CliError {
    fn from(e: MetricError) -> Self {
        match e {
            MetricError::Io { .. } => CliError::Io(e.to_string()),
            _ => CliError::Validation(e.to_string()),
        }
    }
}

impl From<GmdError> for CliError {
    fn from(e: GmdError) -> Self {
        match e {
            GmdError::Metric(m) => m.into(),
            _ => CliError::Compute(e.to_string()),
        }
    }
}

impl From<LearnError> for CliError {
    fn from(e: LearnError) -> Self {
        match e {
            LearnError::Corpus(c) => c.into(),
            LearnError::Metric(m) => m.into(),
            LearnError::NonConvergence { .. } | LearnError::DegenerateConstraints(_) => {
                CliError::Compute(e.to_string())
            }
            _ => CliError::Validation(e.to_string()),
        }
    }
}

impl From<PipelineError> for CliError {
    fn from(e: PipelineError) -> Self {
        match e {
            PipelineError::Gmd(g) => g.into(),
            PipelineError::Corpus(c) => c.into(),
            PipelineError::Io { .. } => CliError::Io(e.to_string()),
            PipelineError::Weighting(_) => CliError::Compute(e.to_string()),
            PipelineError::MissingDate { .. } | PipelineError::EmptyGold => CliError::Validation(e.to_string()),
        }
    }
}

impl From<SynthError> for CliError {
    fn from(e: SynthError) -> Self {
        match e {
            SynthError::Corpus(c) => c.into(),
            SynthError::InvalidConfig(_) => CliError::Validation(e.to_string()),
        }
    }
}
