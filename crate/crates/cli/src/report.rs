use std::collections::BTreeMap;

use serde::Serialize;
use serde_json::Value;

pub const SCHEMA_VERSION: u32 = 1;

#[derive(Debug)]
pub enum CliError {
    Usage(String),
    Module(pclab::Error),
}

impl From<pclab::Error> for CliError {
    fn from(e: pclab::Error) -> Self {
        CliError::Module(e)
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct Check {
    pub name: String,
    pub pass: bool,
}

/// Schema-versioned result of one command; deterministic for a fixed
/// command line and seed.
#[derive(Debug, Clone, Serialize)]
pub struct RunReport {
    pub schema_version: u32,
    pub command: Vec<String>,
    pub seed: u64,
    pub checks: Vec<Check>,
    pub measured: BTreeMap<String, Value>,
    pub artifacts: Vec<String>,
}

impl RunReport {
    pub fn new(command: Vec<String>, seed: u64) -> Self {
        Self {
            schema_version: SCHEMA_VERSION,
            command,
            seed,
            checks: Vec::new(),
            measured: BTreeMap::new(),
            artifacts: Vec::new(),
        }
    }

    pub fn check(&mut self, name: &str, pass: bool) {
        self.checks.push(Check { name: name.to_string(), pass });
    }

    pub fn put<T: Serialize>(&mut self, key: &str, value: T) {
        let v = serde_json::to_value(value).unwrap_or(Value::Null);
        self.measured.insert(key.to_string(), v);
    }

    pub fn all_pass(&self) -> bool {
        self.checks.iter().all(|c| c.pass)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("report serialises")
    }
}
