//! Key-value config files and flag > file > environment > default resolution.

use std::collections::BTreeMap;
use std::fmt::Display;
use std::path::Path;
use std::str::FromStr;

use crate::error::CliError;

/// Parsed `key = value` lines. `#` starts a comment; keys are matched with
/// `-` and `_` treated alike.
#[derive(Debug, Default, Clone)]
pub struct ConfigFile {
    values: BTreeMap<String, String>,
    source: String,
}

fn normalize(key: &str) -> String {
    key.trim().to_ascii_lowercase().replace('-', "_")
}

impl ConfigFile {
    pub fn load(path: Option<&Path>) -> Result<Self, CliError> {
        match path {
            None => Ok(Self::default()),
            Some(p) => {
                let text = std::fs::read_to_string(p)
                    .map_err(|e| CliError::io(format!("cannot read config {}: {e}", p.display())))?;
                Self::parse(&text, &p.display().to_string())
            }
        }
    }

    pub fn parse(text: &str, source: &str) -> Result<Self, CliError> {
        let mut values = BTreeMap::new();
        for (i, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let (k, v) = line
                .split_once('=')
                .ok_or_else(|| CliError::data(format!("{source}:{}: expected key = value", i + 1)))?;
            values.insert(normalize(k), v.trim().to_string());
        }
        Ok(ConfigFile {
            values,
            source: source.to_string(),
        })
    }

    pub fn get<T: FromStr>(&self, key: &str) -> Result<Option<T>, CliError>
    where
        T::Err: Display,
    {
        match self.values.get(&normalize(key)) {
            None => Ok(None),
            Some(v) => v
                .parse()
                .map(Some)
                .map_err(|e| CliError::data(format!("{}: bad value '{v}' for {key}: {e}", self.source))),
        }
    }

    /// Flag value, else the config file, else `default`.
    pub fn resolve<T: FromStr>(&self, flag: Option<T>, key: &str, default: T) -> Result<T, CliError>
    where
        T::Err: Display,
    {
        match flag {
            Some(v) => Ok(v),
            None => Ok(self.get(key)?.unwrap_or(default)),
        }
    }

    pub fn resolve_opt<T: FromStr>(&self, flag: Option<T>, key: &str) -> Result<Option<T>, CliError>
    where
        T::Err: Display,
    {
        match flag {
            Some(v) => Ok(Some(v)),
            None => self.get(key),
        }
    }

    /// `--workers`, then the config file, then `HIP_WORKERS`, then the number of CPUs.
    pub fn workers(&self, flag: Option<usize>) -> Result<usize, CliError> {
        if let Some(w) = self.resolve_opt(flag, "workers")? {
            return check_workers(w);
        }
        if let Ok(v) = std::env::var("HIP_WORKERS") {
            let w: usize = v
                .trim()
                .parse()
                .map_err(|_| CliError::data(format!("HIP_WORKERS='{v}' is not a positive integer")))?;
            return check_workers(w);
        }
        Ok(std::thread::available_parallelism().map_or(1, |n| n.get()))
    }
}

fn check_workers(w: usize) -> Result<usize, CliError> {
    if w == 0 {
        Err(CliError::data("worker count must be at least 1"))
    } else {
        Ok(w)
    }
}

/// Comma-separated list usable as a flag or config value.
#[derive(Debug, Clone, PartialEq)]
pub struct List<T>(pub Vec<T>);

impl<T: FromStr> FromStr for List<T>
where
    T::Err: Display,
{
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        s.split(',')
            .map(|p| p.trim().parse::<T>().map_err(|e| format!("'{p}': {e}")))
            .collect::<Result<Vec<_>, _>>()
            .map(List)
    }
}
