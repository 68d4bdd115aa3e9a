use mllab_core::Error;

pub const EXIT_CONFIG: i32 = 2;
pub const EXIT_DATA: i32 = 3;
pub const EXIT_NUMERICAL: i32 = 4;

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error("configuration error: {0}")]
    Config(String),
    #[error("data error: {0}")]
    Data(String),
    #[error("numerical failure: {0}")]
    Numerical(String),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Config(_) => EXIT_CONFIG,
            CliError::Data(_) => EXIT_DATA,
            CliError::Numerical(_) => EXIT_NUMERICAL,
        }
    }

    /// Like `From<Error>`, but blames the data for invalid arguments, which is
    /// where they come from once a panel has been loaded.
    pub fn from_data_stage(e: Error) -> Self {
        match e {
            Error::InvalidArgument(m) => CliError::Data(m),
            other => other.into(),
        }
    }
}

impl From<Error> for CliError {
    fn from(e: Error) -> Self {
        let msg = e.to_string();
        match e {
            Error::InvalidArgument(_) | Error::Configuration(_) => CliError::Config(msg),
            Error::Schema { .. } | Error::Data(_) | Error::Csv(_) | Error::Io(_) => CliError::Data(msg),
            Error::DegenerateUpdate { .. }
            | Error::SingularDesign { .. }
            | Error::Underidentified { .. }
            | Error::DegenerateTest(_) => CliError::Numerical(msg),
        }
    }
}

pub(crate) fn io_error(path: &std::path::Path, e: std::io::Error) -> CliError {
    CliError::Data(format!("{}: {e}", path.display()))
}
