//! Machine-readable run reports: flat `key=value` lines in a fixed order.
//! Wall-clock time is never written here, so identical inputs and flags
//! give byte-identical reports.

use std::fmt::Write as _;
use std::path::Path;

use sha2::{Digest, Sha256};

#[derive(Debug, Default)]
pub struct RunReport {
    pub command: String,
    /// SHA-256 of the canonical instance text.
    pub instance: String,
    pub verdict: &'static str,
    pub witness: Option<String>,
    fields: Vec<(&'static str, String)>,
}

impl RunReport {
    pub fn new(command: &str, canonical_instance: &str) -> Self {
        RunReport {
            command: command.to_string(),
            instance: digest(canonical_instance),
            ..RunReport::default()
        }
    }

    /// Appends an extra field; fields keep insertion order.
    pub fn field(&mut self, key: &'static str, value: impl ToString) -> &mut Self {
        self.fields.push((key, value.to_string()));
        self
    }

    pub fn render(&self) -> String {
        let mut out = String::new();
        let _ = writeln!(out, "command={}", self.command);
        let _ = writeln!(out, "instance={}", self.instance);
        let _ = writeln!(out, "verdict={}", self.verdict);
        if let Some(w) = &self.witness {
            let _ = writeln!(out, "witness={w}");
        }
        for (k, v) in &self.fields {
            let _ = writeln!(out, "{k}={v}");
        }
        out
    }

    pub fn write_to(&self, path: &Path) -> std::io::Result<()> {
        std::fs::write(path, self.render())
    }
}

pub fn digest(text: &str) -> String {
    let hash = Sha256::digest(text.as_bytes());
    let mut out = String::from("sha256:");
    for b in hash {
        let _ = write!(out, "{b:02x}");
    }
    out
}
