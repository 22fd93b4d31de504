use std::fmt;
use std::process::ExitCode;

use orthorecon::blueprint::BlueprintError;
use orthorecon::field::FieldError;
use orthorecon::geometry::GeometryError;
use orthorecon::image::ImageError;
use orthorecon::reconstruct::ReconstructError;
use orthorecon::sampling::SamplingError;

/// Process exit status classes.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord)]
pub enum Exit {
    Success = 0,
    Internal = 1,
    InvalidInput = 2,
    NeedsUser = 3,
}

impl From<Exit> for ExitCode {
    fn from(e: Exit) -> Self {
        ExitCode::from(e as u8)
    }
}

#[derive(Debug)]
pub struct CliError {
    pub exit: Exit,
    pub message: String,
}

impl CliError {
    pub fn internal(message: impl Into<String>) -> Self {
        Self { exit: Exit::Internal, message: message.into() }
    }

    pub fn input(message: impl Into<String>) -> Self {
        Self { exit: Exit::InvalidInput, message: message.into() }
    }

    pub fn needs_user(message: impl Into<String>) -> Self {
        Self { exit: Exit::NeedsUser, message: message.into() }
    }

    /// Prefixes the message, keeping the exit class.
    pub fn context(self, what: &str) -> Self {
        Self { exit: self.exit, message: format!("{what}: {}", self.message) }
    }

    /// Wraps a failed write of an output file.
    pub fn write(path: &std::path::Path, e: std::io::Error) -> Self {
        Self::internal(format!("cannot write {}: {e}", path.display()))
    }

    /// Wraps a failed read of an input file.
    pub fn read(path: &std::path::Path, e: std::io::Error) -> Self {
        Self::input(format!("cannot read {}: {e}", path.display()))
    }
}

impl fmt::Display for CliError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.message)
    }
}

impl std::error::Error for CliError {}

const REVIEW_HINT: &str = "open the blueprint in the review UI (`orthorecon serve`) or pass finalized views with --views";

impl From<BlueprintError> for CliError {
    fn from(e: BlueprintError) -> Self {
        match e {
            BlueprintError::CutFailed { .. }
            | BlueprintError::IdentificationFailed { .. }
            | BlueprintError::TieUnresolved { .. }
            | BlueprintError::ManualRequired { .. } => Self::needs_user(format!("{e}; {REVIEW_HINT}")),
            BlueprintError::Invalid(_) | BlueprintError::Geometry(_) | BlueprintError::Image(_) => Self::input(e.to_string()),
        }
    }
}

impl From<ReconstructError> for CliError {
    fn from(e: ReconstructError) -> Self {
        match e {
            ReconstructError::SizeMismatch { .. } => Self::needs_user(e.to_string()),
            ReconstructError::Unfinalized(_) => Self::needs_user(e.to_string()),
            ReconstructError::Blueprint(b) => b.into(),
            ReconstructError::Field(f) => f.into(),
            ReconstructError::Config(_) | ReconstructError::Degenerate(_) | ReconstructError::MalformedGrid(_) => {
                Self::input(e.to_string())
            }
            ReconstructError::EmptyMesh => Self::internal(e.to_string()),
        }
    }
}

impl From<FieldError> for CliError {
    fn from(e: FieldError) -> Self {
        match e {
            FieldError::Blueprint(b) => b.into(),
            e => Self::input(e.to_string()),
        }
    }
}

impl From<SamplingError> for CliError {
    fn from(e: SamplingError) -> Self {
        Self::input(e.to_string())
    }
}

impl From<GeometryError> for CliError {
    fn from(e: GeometryError) -> Self {
        Self::input(e.to_string())
    }
}

impl From<ImageError> for CliError {
    fn from(e: ImageError) -> Self {
        Self::input(e.to_string())
    }
}
