use std::fmt;
use std::process::ExitCode;

#[derive(Debug)]
pub enum CliError {
    Config(String),
    Lib(quasipot::Error),
}

impl CliError {
    /// 2 configuration, 3 numerical failure, 4 eliminated equilibrium, 1 I/O.
    pub fn exit_code(&self) -> ExitCode {
        use quasipot::Error as E;
        let code = match self {
            CliError::Config(_) => 2,
            CliError::Lib(e) => match e {
                E::Eliminated { .. } => 4,
                E::Numerical(_) | E::NoGate | E::AnchorNotSink { .. } => 3,
                E::Io(_) | E::Csv(_) => 1,
                E::InvalidModel(_)
                | E::DimensionMismatch { .. }
                | E::InvalidConfig(_)
                | E::OutsideGrid { .. }
                | E::UnknownLabel(_)
                | E::Format(_)
                | E::Json(_) => 2,
            },
        };
        ExitCode::from(code)
    }
}

impl fmt::Display for CliError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            CliError::Config(m) => write!(f, "configuration error: {m}"),
            CliError::Lib(e) => e.fmt(f),
        }
    }
}

impl From<quasipot::Error> for CliError {
    fn from(e: quasipot::Error) -> Self {
        CliError::Lib(e)
    }
}

impl From<std::io::Error> for CliError {
    fn from(e: std::io::Error) -> Self {
        CliError::Lib(e.into())
    }
}

impl From<serde_json::Error> for CliError {
    fn from(e: serde_json::Error) -> Self {
        CliError::Lib(e.into())
    }
}
