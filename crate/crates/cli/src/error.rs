use epigraph_lab::Error;

/// Failure of a CLI invocation, mapped onto the process exit status.
#[derive(Debug, thiserror::Error)]
pub enum CliError {
    /// Bad configuration or arguments; nothing was computed.
    #[error("{0}")]
    Validation(String),
    /// A module failed while computing.
    #[error("{module}: {source}")]
    Numerical { module: &'static str, source: Error },
    #[error("io: {0}")]
    Io(String),
}

impl CliError {
    pub fn validation(msg: impl Into<String>) -> Self {
        CliError::Validation(msg.into())
    }

    /// Classifies a core error raised inside `module`. Setup errors detected
    /// by the core (bad arguments, misaligned isometries, balls leaving the
    /// window) count as validation errors.
    pub fn from_core(module: &'static str, source: Error) -> Self {
        match source {
            Error::InvalidArgument(_)
            | Error::DimensionMismatch { .. }
            | Error::IsometryNotGridAligned(_)
            | Error::BallExitsDomain { .. }
            | Error::ReflectionLeavesWindow { .. }
            | Error::BelowFirstStep { .. }
            | Error::EmptyInterior
            | Error::Csv(_)
            | Error::Json(_) => CliError::Validation(format!("{module}: {source}")),
            Error::Io(e) => CliError::Io(e.to_string()),
            source => CliError::Numerical { module, source },
        }
    }

    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Validation(_) => 2,
            CliError::Numerical { .. } | CliError::Io(_) => 3,
        }
    }
}

/// Tags core results with the module that produced them.
pub trait InModule<T> {
    fn in_module(self, module: &'static str) -> Result<T, CliError>;
}

impl<T> InModule<T> for epigraph_lab::Result<T> {
    fn in_module(self, module: &'static str) -> Result<T, CliError> {
        self.map_err(|e| CliError::from_core(module, e))
    }
}
