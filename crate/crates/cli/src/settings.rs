//! Resolution of run settings: command-line flag, then config file, then
//! built-in default. Every resolved value is recorded so that the manifest
//! written at the end can be fed back through `--config`.

use std::collections::BTreeSet;
use std::path::{Path, PathBuf};

use conceptlink::corpus::{Level, Ratios, SplitKind};
use conceptlink::embed::LayerChoice;
use conceptlink::eval::TableFormat;
use conceptlink::manifest::Manifest;
use conceptlink::recipe::Recipe;
use conceptlink::{Error, Result};
use toml::{Table, Value};

pub const DEFAULT_SEED: u64 = 42;

pub trait Setting: Sized {
    fn from_setting(s: &str) -> std::result::Result<Self, String>;
    fn to_setting(&self) -> String;
}

macro_rules! via_str {
    ($($t:ty),*) => {$(
        impl Setting for $t {
            fn from_setting(s: &str) -> std::result::Result<Self, String> {
                s.parse().map_err(|e| format!("{e}"))
            }

            fn to_setting(&self) -> String {
                self.to_string()
            }
        }
    )*};
}
via_str!(u64, usize, f64, String, Level, SplitKind, Ratios, Recipe, LayerChoice);

impl Setting for PathBuf {
    fn from_setting(s: &str) -> std::result::Result<Self, String> {
        Ok(PathBuf::from(s))
    }

    fn to_setting(&self) -> String {
        self.display().to_string()
    }
}

impl Setting for TableFormat {
    fn from_setting(s: &str) -> std::result::Result<Self, String> {
        s.parse().map_err(|e| format!("{e}"))
    }

    fn to_setting(&self) -> String {
        match self {
            TableFormat::Text => "text".into(),
            TableFormat::Csv => "csv".into(),
        }
    }
}

pub struct Settings {
    file: Table,
    source: Option<PathBuf>,
    used: BTreeSet<String>,
    resolved: Table,
}

impl Settings {
    pub fn empty() -> Self {
        Settings {
            file: Table::new(),
            source: None,
            used: BTreeSet::new(),
            resolved: Table::new(),
        }
    }

    /// Reads a TOML config. A file with a `[config]` table (such as a run
    /// manifest) contributes that table only.
    pub fn load(path: &Path, command: &str) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::Validation(format!("{}: {e}", path.display())))?;
        let mut root: Table = text.parse().map_err(|e: toml::de::Error| Error::Parse {
            path: path.display().to_string(),
            line: 0,
            msg: e.to_string(),
        })?;
        if let Some(other) = root.get("command").and_then(Value::as_str) {
            if other != command {
                log::warn!("{} was written by `{other}`, not `{command}`", path.display());
            }
        }
        let file = match root.remove("config") {
            Some(Value::Table(t)) => t,
            Some(_) => {
                return Err(Error::Config(format!("{}: `config` is not a table", path.display())));
            }
            None => root,
        };
        Ok(Settings {
            file,
            source: Some(path.to_path_buf()),
            used: BTreeSet::new(),
            resolved: Table::new(),
        })
    }

    fn from_file<T: Setting>(&self, key: &str) -> Result<Option<T>> {
        let Some(v) = self.file.get(key) else {
            return Ok(None);
        };
        let raw = match v {
            Value::String(s) => s.clone(),
            Value::Integer(_) | Value::Float(_) | Value::Boolean(_) => v.to_string(),
            _ => return Err(Error::Config(format!("config key {key} must be a scalar"))),
        };
        T::from_setting(&raw)
            .map(Some)
            .map_err(|e| Error::Config(format!("config key {key}: {e}")))
    }

    pub fn get<T: Setting>(&mut self, key: &str, flag: Option<T>) -> Result<Option<T>> {
        self.used.insert(key.to_string());
        let value = match flag {
            Some(v) => Some(v),
            None => self.from_file(key)?,
        };
        if let Some(v) = &value {
            self.resolved.insert(key.to_string(), Value::String(v.to_setting()));
        }
        Ok(value)
    }

    pub fn or<T: Setting>(&mut self, key: &str, flag: Option<T>, default: T) -> Result<T> {
        match self.get(key, flag)? {
            Some(v) => Ok(v),
            None => {
                self.resolved
                    .insert(key.to_string(), Value::String(default.to_setting()));
                Ok(default)
            }
        }
    }

    pub fn need<T: Setting>(&mut self, key: &str, flag: Option<T>) -> Result<T> {
        self.get(key, flag)?
            .ok_or_else(|| Error::Config(format!("missing --{}", key.replace('_', "-"))))
    }

    /// An input file that must already exist.
    pub fn input(&mut self, key: &str, flag: Option<PathBuf>) -> Result<PathBuf> {
        let p = self.need(key, flag)?;
        check_exists(&p)?;
        Ok(p)
    }

    pub fn input_opt(&mut self, key: &str, flag: Option<PathBuf>) -> Result<Option<PathBuf>> {
        let p = self.get(key, flag)?;
        if let Some(p) = &p {
            check_exists(p)?;
        }
        Ok(p)
    }

    pub fn seed(&mut self, flag: Option<u64>) -> Result<u64> {
        match self.get("seed", flag)? {
            Some(s) => Ok(s),
            None => {
                log::info!("no seed given; using {DEFAULT_SEED}");
                self.or("seed", None, DEFAULT_SEED)
            }
        }
    }

    /// A repeatable flag; in a config file either a string or an array.
    pub fn list(&mut self, key: &str, flag: Vec<String>) -> Result<Vec<String>> {
        self.used.insert(key.to_string());
        let values = if !flag.is_empty() {
            flag
        } else {
            match self.file.get(key) {
                None => Vec::new(),
                Some(Value::String(s)) => vec![s.clone()],
                Some(Value::Array(a)) => a
                    .iter()
                    .map(|v| {
                        v.as_str()
                            .map(str::to_string)
                            .ok_or_else(|| Error::Config(format!("config key {key} must hold strings")))
                    })
                    .collect::<Result<_>>()?,
                Some(_) => return Err(Error::Config(format!("config key {key} must be a string list"))),
            }
        };
        if !values.is_empty() {
            self.resolved.insert(
                key.to_string(),
                Value::Array(values.iter().cloned().map(Value::String).collect()),
            );
        }
        Ok(values)
    }

    /// A manifest holding every resolved setting. Warns about config keys
    /// the command never asked for.
    pub fn manifest(&self, command: &str) -> Manifest {
        for key in self.file.keys().filter(|k| !self.used.contains(*k)) {
            let src = self
                .source
                .as_deref()
                .map_or(String::new(), |p| p.display().to_string());
            log::warn!("{src}: setting {key:?} is not used by `{command}`");
        }
        let mut m = Manifest::new(command);
        for (k, v) in &self.resolved {
            m.config(k, v.clone());
        }
        m
    }
}

pub fn check_exists(p: &Path) -> Result<()> {
    if p.exists() {
        Ok(())
    } else {
        Err(Error::Validation(format!("{}: no such file", p.display())))
    }
}
