use pcgscreen::ErrorClass;
use serde::Serialize;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Kind {
    Config,
    Data,
    Numeric,
}

impl Kind {
    pub fn exit_code(self) -> i32 {
        match self {
            Kind::Config => 1,
            Kind::Data => 2,
            Kind::Numeric => 3,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct CliError {
    pub kind: Kind,
    pub message: String,
}

impl CliError {
    pub fn config(message: impl Into<String>) -> Self {
        CliError {
            kind: Kind::Config,
            message: message.into(),
        }
    }

    pub fn data(message: impl Into<String>) -> Self {
        CliError {
            kind: Kind::Data,
            message: message.into(),
        }
    }

    /// Library error raised while checking configuration values.
    pub fn from_config(e: pcgscreen::Error) -> Self {
        CliError::config(e.to_string())
    }

    /// JSON line written to standard error.
    pub fn to_json(&self) -> String {
        serde_json::json!({
            "error": {
                "kind": self.kind,
                "exit_code": self.kind.exit_code(),
                "message": self.message,
            }
        })
        .to_string()
    }
}

impl From<pcgscreen::Error> for CliError {
    fn from(e: pcgscreen::Error) -> Self {
        let kind = match e.class() {
            ErrorClass::Config => Kind::Config,
            ErrorClass::Data => Kind::Data,
            ErrorClass::Numeric => Kind::Numeric,
        };
        CliError {
            kind,
            message: e.to_string(),
        }
    }
}

impl From<std::io::Error> for CliError {
    fn from(e: std::io::Error) -> Self {
        CliError::data(e.to_string())
    }
}
