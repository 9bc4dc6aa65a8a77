use crate::error::CliError;
use serde::Serialize;
use serde_json::Value;

#[derive(Debug, Serialize)]
pub struct Summary {
    pub command: String,
    pub status: &'static str,
    pub exit_code: u8,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub seed: Option<u64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub error: Option<String>,
    #[serde(skip_serializing_if = "Value::is_null")]
    pub details: Value,
    /// Produced files, relative to the output directory.
    #[serde(skip_serializing_if = "Vec::is_empty")]
    pub files: Vec<String>,
}

impl Summary {
    pub fn ok(command: &str, details: impl Serialize) -> Self {
        Self {
            command: command.to_string(),
            status: "ok",
            exit_code: 0,
            seed: None,
            error: None,
            details: serde_json::to_value(details).unwrap_or(Value::Null),
            files: Vec::new(),
        }
    }

    /// Some items failed; the rest of the output is usable.
    pub fn partial(self, reason: impl Into<String>) -> Self {
        self.failed("partial", 3, reason)
    }

    /// Details are still reported, but the command failed as a whole.
    pub fn failed(mut self, status: &'static str, exit_code: u8, reason: impl Into<String>) -> Self {
        self.status = status;
        self.exit_code = exit_code;
        self.error = Some(reason.into());
        self
    }

    pub fn error(command: &str, e: &CliError) -> Self {
        Self {
            command: command.to_string(),
            status: e.kind(),
            exit_code: e.exit_code(),
            seed: None,
            error: Some(e.to_string()),
            details: Value::Null,
            files: Vec::new(),
        }
    }

    pub fn seed(mut self, seed: u64) -> Self {
        self.seed = Some(seed);
        self
    }

    pub fn files(mut self, files: Vec<String>) -> Self {
        self.files = files;
        self
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("summary serializes")
    }
}
