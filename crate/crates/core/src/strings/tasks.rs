//! Task files: examples, held-out pairs and an optional witness program.

use std::path::Path;

use serde::{Deserialize, Serialize};

use super::domain::{Example, StringSpec};
use super::syntax::parse_tokens;
use crate::mdp::MdpError;

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct StringTask {
    pub id: String,
    pub examples: Vec<Example>,
    #[serde(default)]
    pub held_out: Vec<Example>,
    /// Token trace of a program known to solve the task.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub witness: Option<String>,
}

impl StringTask {
    pub fn spec(&self) -> Result<StringSpec, MdpError> {
        StringSpec::new(self.examples.clone())
    }

    pub fn held_out_spec(&self) -> Option<StringSpec> {
        StringSpec::new(self.held_out.clone()).ok()
    }

    pub fn validate(&self) -> Result<(), MdpError> {
        self.spec()?;
        if let Some(w) = &self.witness {
            parse_tokens(w)?;
        }
        Ok(())
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct TaskFile {
    pub domain: String,
    pub tasks: Vec<StringTask>,
}

impl TaskFile {
    pub fn new(tasks: Vec<StringTask>) -> Self {
        TaskFile { domain: "strings".into(), tasks }
    }

    pub fn from_json(text: &str) -> Result<Self, MdpError> {
        let file: TaskFile = serde_json::from_str(text).map_err(|e| MdpError::Parse(e.to_string()))?;
        if file.domain != "strings" {
            return Err(MdpError::Parse(format!("expected a strings task file, found {:?}", file.domain)));
        }
        file.tasks.iter().try_for_each(StringTask::validate)?;
        Ok(file)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("task file serializes")
    }

    pub fn load(path: &Path) -> Result<Self, MdpError> {
        let text = std::fs::read_to_string(path).map_err(|e| MdpError::Parse(format!("{}: {e}", path.display())))?;
        TaskFile::from_json(&text)
    }
}
