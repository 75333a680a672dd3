use thiserror::Error;

/// Exit status for an undefined phase the config asked to be defined.
pub const EXIT_UNDEFINED: u8 = 3;
/// Exit status for schema or physics validation failures.
pub const EXIT_VALIDATION: u8 = 4;
/// Exit status for a failing selftest check.
pub const EXIT_SELFTEST: u8 = 5;
/// Exit status for I/O and numerical failures.
pub const EXIT_OTHER: u8 = 1;

#[derive(Debug, Error)]
pub enum CliError {
    /// Malformed document, unknown field, or broken cross reference.
    #[error("config error: {0}")]
    Schema(String),
    /// Well-formed config describing an unphysical object.
    #[error("physics validation error: {0}")]
    Physics(String),
    #[error("undefined result: {0}")]
    Undefined(String),
    #[error("selftest failed: {failed} of {total} checks")]
    Selftest { failed: usize, total: usize },
    #[error("numerical error: {0}")]
    Numerical(String),
    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),
}

impl CliError {
    pub fn exit_code(&self) -> u8 {
        match self {
            CliError::Schema(_) | CliError::Physics(_) => EXIT_VALIDATION,
            CliError::Undefined(_) => EXIT_UNDEFINED,
            CliError::Selftest { .. } => EXIT_SELFTEST,
            CliError::Numerical(_) | CliError::Io(_) => EXIT_OTHER,
        }
    }
}

impl From<offdiag_core::Error> for CliError {
    fn from(e: offdiag_core::Error) -> Self {
        use offdiag_core::Error as E;
        match e {
            E::Domain(_) | E::Singular(_) => CliError::Numerical(e.to_string()),
            _ => CliError::Physics(e.to_string()),
        }
    }
}
