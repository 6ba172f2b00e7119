//! Layered settings: command-line flags override `TRAJVAULT_*` environment
//! variables, which override a `key = value` config file.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use crate::error::CliError;

pub const ENV_PREFIX: &str = "TRAJVAULT_";
pub const DEFAULT_CONFIG_FILE: &str = "trajvault.toml";

#[derive(Debug, Clone, Copy, PartialEq, Eq, clap::ValueEnum)]
pub enum Format {
    Text,
    Json,
}

impl std::str::FromStr for Format {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, String> {
        match s.trim().to_ascii_lowercase().as_str() {
            "text" => Ok(Format::Text),
            "json" => Ok(Format::Json),
            other => Err(format!("unknown format '{other}'")),
        }
    }
}

/// Values given on the command line; `None` means not given.
#[derive(Debug, Clone, Default)]
pub struct FlagValues {
    pub format: Option<Format>,
    pub threads: Option<usize>,
    pub cache_dir: Option<PathBuf>,
    pub bins: Option<usize>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Settings {
    pub format: Format,
    pub threads: Option<usize>,
    pub cache_dir: PathBuf,
    pub bins: usize,
}

/// Parses `key = value` lines. Blank lines and `#` comments are skipped,
/// keys are case-insensitive and values may be quoted.
pub fn parse_config(text: &str) -> Result<BTreeMap<String, String>, CliError> {
    let mut out = BTreeMap::new();
    for (i, raw) in text.lines().enumerate() {
        let line = raw.split('#').next().unwrap_or("").trim();
        if line.is_empty() || line.starts_with('[') {
            continue;
        }
        let (k, v) = line.split_once('=').ok_or_else(|| {
            CliError::user(format!("config line {}: expected key = value", i + 1))
        })?;
        let v = v.trim().trim_matches('"').trim_matches('\'');
        out.insert(k.trim().to_ascii_lowercase(), v.to_string());
    }
    Ok(out)
}

fn parse<T: std::str::FromStr>(key: &str, value: &str, origin: &str) -> Result<T, CliError> {
    value
        .parse()
        .map_err(|_| CliError::user(format!("{origin}: invalid value '{value}' for {key}")))
}

impl Settings {
    /// Resolves every setting from flags, then `env`, then `file`.
    pub fn resolve(
        flags: &FlagValues,
        env: impl Fn(&str) -> Option<String>,
        file: &BTreeMap<String, String>,
    ) -> Result<Self, CliError> {
        let lookup = |key: &str| -> Option<(String, String)> {
            env(&format!("{ENV_PREFIX}{}", key.to_ascii_uppercase()))
                .map(|v| (v, "environment".to_string()))
                .or_else(|| {
                    file.get(key)
                        .map(|v| (v.clone(), "config file".to_string()))
                })
        };

        let format = match flags.format {
            Some(f) => f,
            None => match lookup("format") {
                Some((v, origin)) => v
                    .parse()
                    .map_err(|e: String| CliError::user(format!("{origin}: {e}")))?,
                None => Format::Text,
            },
        };
        let threads = match flags.threads {
            Some(t) => Some(t),
            None => match lookup("threads") {
                Some((v, origin)) => Some(parse::<usize>("threads", &v, &origin)?),
                None => None,
            },
        };
        if threads == Some(0) {
            return Err(CliError::user("threads must be positive"));
        }
        let cache_dir = match &flags.cache_dir {
            Some(p) => p.clone(),
            None => lookup("cache_dir")
                .map(|(v, _)| PathBuf::from(v))
                .unwrap_or_else(default_cache_dir),
        };
        let bins = match flags.bins {
            Some(b) => b,
            None => match lookup("bins") {
                Some((v, origin)) => parse::<usize>("bins", &v, &origin)?,
                None => trajvault_core::stats::DEFAULT_BINS,
            },
        };
        if bins == 0 {
            return Err(CliError::user("bins must be positive"));
        }
        Ok(Settings {
            format,
            threads,
            cache_dir,
            bins,
        })
    }
}

fn default_cache_dir() -> PathBuf {
    std::env::var_os("HOME")
        .map(|h| Path::new(&h).join(".cache").join("trajvault"))
        .unwrap_or_else(|| PathBuf::from(".trajvault-cache"))
}

/// Reads the config file named by `--config`, else `TRAJVAULT_CONFIG`, else
/// `./trajvault.toml` when present.
pub fn load_config_file(explicit: Option<&Path>) -> Result<BTreeMap<String, String>, CliError> {
    let path = match explicit {
        Some(p) => Some(p.to_path_buf()),
        None => std::env::var_os(format!("{ENV_PREFIX}CONFIG"))
            .map(PathBuf::from)
            .or_else(|| {
                let p = PathBuf::from(DEFAULT_CONFIG_FILE);
                p.is_file().then_some(p)
            }),
    };
    match path {
        None => Ok(BTreeMap::new()),
        Some(p) => {
            let text = std::fs::read_to_string(&p)
                .map_err(|e| CliError::io(format!("cannot read config {}: {e}", p.display())))?;
            parse_config(&text)
        }
    }
}
