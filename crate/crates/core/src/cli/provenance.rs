use std::collections::BTreeMap;

use serde::Serialize;
use sha2::{Digest, Sha256};

use super::CliError;

fn sha256_hex(bytes: &[u8]) -> String {
    Sha256::digest(bytes).iter().map(|b| format!("{b:02x}")).collect()
}

/// Canonical description of a run: command, parameters, and the content
/// hashes of its input files. Paths and the output directory are left out,
/// so the same inputs give the same digest wherever they live.
#[derive(Debug, Serialize)]
pub struct Provenance {
    command: String,
    params: serde_json::Value,
    inputs: BTreeMap<String, String>,
}

impl Provenance {
    pub fn new(command: &str, params: &impl Serialize) -> Self {
        Self {
            command: command.to_string(),
            params: serde_json::to_value(params).expect("arguments serialize"),
            inputs: BTreeMap::new(),
        }
    }

    pub fn input(&mut self, name: &str, bytes: &[u8]) {
        self.inputs.insert(name.to_string(), sha256_hex(bytes));
    }

    pub fn digest(&self) -> String {
        let canonical = serde_json::to_vec(self).expect("provenance serializes");
        format!("sha256:{}", sha256_hex(&canonical))
    }

    /// Pretty JSON object with `command` and `config_digest` added to the
    /// body's fields. Keys come out sorted.
    pub fn json_report(&self, body: &impl Serialize) -> Result<Vec<u8>, CliError> {
        let mut value = serde_json::to_value(body)
            .map_err(|e| CliError::from(crate::Error::NonFinite(format!("report: {e}"))))?;
        let object = value.as_object_mut().expect("reports are JSON objects");
        object.insert("command".into(), self.command.clone().into());
        object.insert("config_digest".into(), self.digest().into());
        let mut bytes = serde_json::to_vec_pretty(&value).expect("JSON value serializes");
        bytes.push(b'\n');
        Ok(bytes)
    }

    /// CSV preceded by a `# config_digest: …` comment line.
    pub fn csv_report(&self, csv: Vec<u8>) -> Vec<u8> {
        let mut bytes = format!("# config_digest: {}\n", self.digest()).into_bytes();
        bytes.extend(csv);
        bytes
    }
}
