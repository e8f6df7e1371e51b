//! Run configuration: global settings plus one subcommand's settings, stored
//! as JSON so a run can be repeated with `--config`.

use std::fs;
use std::path::{Path, PathBuf};

use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};

use crate::error::CliError;

pub const CONFIG_FILE: &str = "config.json";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct RunConfig<T> {
    pub command: String,
    pub seed: u64,
    pub threads: Option<usize>,
    pub out_dir: PathBuf,
    pub settings: T,
}

impl<T: Default> Default for RunConfig<T> {
    fn default() -> Self {
        Self { command: String::new(), seed: 0, threads: None, out_dir: PathBuf::from("out"), settings: T::default() }
    }
}

/// Global flags shared by every subcommand; `None` keeps the file (or default) value.
#[derive(Debug, Clone, Default)]
pub struct GlobalOverrides {
    pub seed: Option<u64>,
    pub threads: Option<usize>,
    pub out_dir: Option<PathBuf>,
}

impl<T: Default + DeserializeOwned + Serialize> RunConfig<T> {
    /// Start from `path` (or defaults) and apply the global flags.
    pub fn load(path: Option<&Path>, command: &str, globals: &GlobalOverrides) -> Result<Self, CliError> {
        let mut cfg: RunConfig<T> = match path {
            Some(p) => {
                let text = fs::read_to_string(p)
                    .map_err(|e| CliError::Usage(format!("cannot read config {}: {e}", p.display())))?;
                serde_json::from_str(&text)
                    .map_err(|e| CliError::Usage(format!("bad config {}: {e}", p.display())))?
            }
            None => RunConfig::default(),
        };
        if !cfg.command.is_empty() && cfg.command != command {
            return Err(CliError::Usage(format!(
                "config file is for `{}`, not `{command}`",
                cfg.command
            )));
        }
        cfg.command = command.to_string();
        if let Some(s) = globals.seed {
            cfg.seed = s;
        }
        if let Some(t) = globals.threads {
            cfg.threads = Some(t);
        }
        if let Some(d) = &globals.out_dir {
            cfg.out_dir = d.clone();
        }
        if cfg.threads == Some(0) {
            return Err(CliError::Usage("--threads must be at least 1".into()));
        }
        Ok(cfg)
    }

    pub fn save(&self) -> Result<PathBuf, CliError> {
        let path = self.out_dir.join(CONFIG_FILE);
        write_text(&path, &(serde_json::to_string_pretty(self).map_err(CliError::runtime)? + "\n"))?;
        Ok(path)
    }
}

pub fn write_text(path: &Path, text: &str) -> Result<(), CliError> {
    write_bytes(path, text.as_bytes())
}

pub fn write_bytes(path: &Path, bytes: &[u8]) -> Result<(), CliError> {
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        fs::create_dir_all(dir).map_err(|e| CliError::Runtime(format!("cannot create {}: {e}", dir.display())))?;
    }
    fs::write(path, bytes).map_err(|e| CliError::Runtime(format!("cannot write {}: {e}", path.display())))
}

/// Overwrite `slot` when the flag was given.
pub fn set<T>(slot: &mut T, flag: Option<T>) {
    if let Some(v) = flag {
        *slot = v;
    }
}
