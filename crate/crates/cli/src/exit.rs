use std::fmt;

/// Why a command failed, as reported by the process exit status.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Failure {
    Config,
    Data,
    Invariant,
}

impl Failure {
    pub fn code(self) -> u8 {
        match self {
            Failure::Config => 2,
            Failure::Data => 3,
            Failure::Invariant => 4,
        }
    }
}

#[derive(Debug)]
pub struct Tagged {
    pub failure: Failure,
    pub message: String,
}

impl fmt::Display for Tagged {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.message)
    }
}

impl std::error::Error for Tagged {}

pub fn config_error(message: impl Into<String>) -> anyhow::Error {
    tagged(Failure::Config, message)
}

pub fn data_error(message: impl Into<String>) -> anyhow::Error {
    tagged(Failure::Data, message)
}

pub fn invariant_error(message: impl Into<String>) -> anyhow::Error {
    tagged(Failure::Invariant, message)
}

fn tagged(failure: Failure, message: impl Into<String>) -> anyhow::Error {
    Tagged {
        failure,
        message: message.into(),
    }
    .into()
}

/// Tagged errors keep their tag; core errors are input problems; anything
/// else is treated as a broken invariant.
pub fn classify(err: &anyhow::Error) -> Failure {
    for cause in err.chain() {
        if let Some(t) = cause.downcast_ref::<Tagged>() {
            return t.failure;
        }
        if cause.downcast_ref::<predint_core::Error>().is_some() {
            return Failure::Data;
        }
    }
    Failure::Invariant
}
