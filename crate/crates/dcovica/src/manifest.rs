//! Provenance record attached to every output.

use std::collections::BTreeMap;
use std::time::{SystemTime, UNIX_EPOCH};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunManifest {
    pub command_line: Vec<String>,
    /// Effective settings after defaults were applied.
    pub config: BTreeMap<String, String>,
    pub seed: u64,
    pub version: String,
    /// SHA-256 of the input file, hex encoded.
    pub input_sha256: Option<String>,
    pub started_unix: f64,
    pub finished_unix: f64,
}

impl RunManifest {
    pub fn start(command_line: Vec<String>, seed: u64) -> RunManifest {
        RunManifest {
            command_line,
            config: BTreeMap::new(),
            seed,
            version: env!("CARGO_PKG_VERSION").to_owned(),
            input_sha256: None,
            started_unix: now(),
            finished_unix: 0.0,
        }
    }

    pub fn set(&mut self, key: &str, value: impl ToString) {
        self.config.insert(key.to_owned(), value.to_string());
    }

    pub fn finish(&mut self) {
        self.finished_unix = now();
    }
}

fn now() -> f64 {
    SystemTime::now().duration_since(UNIX_EPOCH).map(|d| d.as_secs_f64()).unwrap_or(0.0)
}

pub fn sha256_hex(bytes: &[u8]) -> String {
    Sha256::digest(bytes).iter().map(|b| format!("{b:02x}")).collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn digest_of_known_input() {
        assert_eq!(
            sha256_hex(b"abc"),
            "ba7816bf8f01cfea414140de5dae2223b00361a396177a9cb410ff61f20015ad"
        );
    }
}
