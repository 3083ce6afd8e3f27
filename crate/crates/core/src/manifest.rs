//! Run manifests: the configuration, input checksums and output checksums
//! of one pipeline step, written as TOML `key = value` lines.
//!
//! The `[config]` table of a manifest can be passed back as a config file to
//! re-run the step. Wall-clock time is kept out of the manifest (see
//! [`write_timing`]) so manifests of identical runs are byte-identical.

use std::path::Path;
use std::time::Duration;

use sha2::{Digest, Sha256};
use toml::{Table, Value};

use crate::error::{write_file, Error, Result};

pub fn sha256_hex(bytes: &[u8]) -> String {
    hex::encode(Sha256::digest(bytes))
}

pub fn file_sha256(path: &Path) -> Result<String> {
    let bytes = std::fs::read(path).map_err(|e| Error::io(path, e))?;
    Ok(sha256_hex(&bytes))
}

pub trait ManifestValue {
    fn into_value(self) -> Value;
}

impl ManifestValue for &str {
    fn into_value(self) -> Value {
        Value::String(self.to_string())
    }
}

impl ManifestValue for String {
    fn into_value(self) -> Value {
        Value::String(self)
    }
}

impl ManifestValue for &Path {
    fn into_value(self) -> Value {
        Value::String(self.display().to_string())
    }
}

impl ManifestValue for Value {
    fn into_value(self) -> Value {
        self
    }
}

impl ManifestValue for bool {
    fn into_value(self) -> Value {
        Value::Boolean(self)
    }
}

impl ManifestValue for f64 {
    fn into_value(self) -> Value {
        Value::Float(self)
    }
}

macro_rules! int_value {
    ($($t:ty),*) => {$(
        impl ManifestValue for $t {
            fn into_value(self) -> Value {
                Value::Integer(self as i64)
            }
        }
    )*};
}
int_value!(u64, usize, u32, i64);

#[derive(Debug, Clone)]
pub struct Manifest {
    command: String,
    config: Table,
    inputs: Table,
    outputs: Table,
}

impl Manifest {
    pub fn new(command: &str) -> Self {
        Manifest {
            command: command.to_string(),
            config: Table::new(),
            inputs: Table::new(),
            outputs: Table::new(),
        }
    }

    pub fn config(&mut self, key: &str, value: impl ManifestValue) -> &mut Self {
        self.config.insert(key.to_string(), value.into_value());
        self
    }

    pub fn input_checksum(&mut self, name: &str, checksum: &str) -> &mut Self {
        self.inputs
            .insert(name.to_string(), Value::String(checksum.to_string()));
        self
    }

    pub fn input_file(&mut self, name: &str, path: &Path) -> Result<&mut Self> {
        let sum = file_sha256(path)?;
        Ok(self.input_checksum(name, &sum))
    }

    pub fn output_file(&mut self, name: &str, path: &Path) -> Result<&mut Self> {
        let sum = file_sha256(path)?;
        self.outputs.insert(name.to_string(), Value::String(sum));
        Ok(self)
    }

    pub fn render(&self) -> String {
        let mut root = Table::new();
        root.insert("command".into(), Value::String(self.command.clone()));
        root.insert("version".into(), Value::String(env!("CARGO_PKG_VERSION").to_string()));
        root.insert("config".into(), Value::Table(self.config.clone()));
        root.insert("inputs".into(), Value::Table(self.inputs.clone()));
        root.insert("outputs".into(), Value::Table(self.outputs.clone()));
        toml::to_string(&root).expect("manifest tables always serialize")
    }

    pub fn write(&self, path: &Path) -> Result<()> {
        write_file(path, self.render())
    }
}

/// Writes the wall time of a step next to its manifest.
pub fn write_timing(path: &Path, elapsed: Duration) -> Result<()> {
    write_file(path, format!("wall_time_secs = {:.3}\n", elapsed.as_secs_f64()))
}
