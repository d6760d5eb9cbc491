//! Key/value run configuration. Values resolve as defaults, then the config
//! file, then command-line flags, with the rightmost source winning.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use crate::CliError;

const KNOWN_KEYS: &[&str] = &[
    "seed",
    "out",
    "profile",
    "n",
    "train_fraction",
    "split_seed",
    "noise_std",
    "yaw",
    "court",
    "preprocess",
    "epochs",
    "batch_size",
    "learning_rate",
    "layers",
    "steps",
];

#[derive(Debug, Default, Clone)]
pub struct ConfigFile {
    path: Option<PathBuf>,
    values: BTreeMap<String, String>,
}

impl ConfigFile {
    /// Accepts `key value` or `key = value` lines; `#` starts a comment line.
    pub fn parse(text: &str, path: &Path) -> Result<Self, CliError> {
        let mut values = BTreeMap::new();
        for (i, raw) in text.lines().enumerate() {
            let line = raw.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let (key, value) = match line.split_once('=') {
                Some((k, v)) => (k.trim(), v.trim()),
                None => match line.split_once(char::is_whitespace) {
                    Some((k, v)) => (k.trim(), v.trim()),
                    None => (line, ""),
                },
            };
            if !KNOWN_KEYS.contains(&key) {
                return Err(CliError::Usage(format!(
                    "{}:{}: unknown config key `{key}`",
                    path.display(),
                    i + 1
                )));
            }
            if value.is_empty() {
                return Err(CliError::Usage(format!(
                    "{}:{}: `{key}` needs a value",
                    path.display(),
                    i + 1
                )));
            }
            values.insert(key.to_string(), value.to_string());
        }
        Ok(ConfigFile {
            path: Some(path.to_path_buf()),
            values,
        })
    }

    pub fn load(path: &Path) -> Result<Self, CliError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| CliError::Core(courtloc::Error::io(path, e)))?;
        Self::parse(&text, path)
    }

    pub fn get<T: FromStr>(&self, key: &str) -> Result<Option<T>, CliError> {
        match self.values.get(key) {
            None => Ok(None),
            Some(v) => v.parse().map(Some).map_err(|_| {
                let src = self
                    .path
                    .as_deref()
                    .map(|p| p.display().to_string())
                    .unwrap_or_default();
                CliError::Usage(format!("{src}: invalid value `{v}` for `{key}`"))
            }),
        }
    }

    /// Flag value if given, else the file value, else the default.
    pub fn resolve<T: FromStr>(&self, flag: Option<T>, key: &str, default: T) -> Result<T, CliError> {
        match flag {
            Some(v) => Ok(v),
            None => Ok(self.get(key)?.unwrap_or(default)),
        }
    }

    pub fn resolve_opt<T: FromStr>(&self, flag: Option<T>, key: &str) -> Result<Option<T>, CliError> {
        match flag {
            Some(v) => Ok(Some(v)),
            None => self.get(key),
        }
    }
}
