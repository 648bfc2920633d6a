//! `key = value` config files, spliced into the argument list ahead of the
//! command-line flags so that flags win.

use std::ffi::OsString;
use std::fs;
use std::path::Path;

use clap::{ArgAction, Command};

use crate::CliError;

/// Parse a config file against the flags of `command`.
pub fn config_args(command: &Command, path: &Path) -> Result<Vec<OsString>, CliError> {
    let text = fs::read_to_string(path)
        .map_err(|e| CliError::Usage(format!("cannot read config file {}: {e}", path.display())))?;
    let mut args = Vec::new();
    for (idx, raw) in text.lines().enumerate() {
        let line = raw.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let (key, value) = line.split_once('=').ok_or_else(|| {
            CliError::Usage(format!("{}:{}: expected `key = value`", path.display(), idx + 1))
        })?;
        let key = key.trim().replace('_', "-");
        let value = value.trim();
        if key == "config" {
            return Err(CliError::Usage(format!(
                "{}:{}: config files cannot include other config files",
                path.display(),
                idx + 1
            )));
        }
        let arg = command
            .get_arguments()
            .find(|a| a.get_long() == Some(key.as_str()))
            .ok_or_else(|| {
                CliError::Usage(format!(
                    "{}:{}: unknown key `{key}` for `{}`",
                    path.display(),
                    idx + 1,
                    command.get_name()
                ))
            })?;
        if matches!(arg.get_action(), ArgAction::SetTrue) {
            match value {
                "true" => args.push(OsString::from(format!("--{key}"))),
                "false" => {}
                other => {
                    return Err(CliError::Usage(format!(
                        "{}:{}: `{key}` takes true or false, got `{other}`",
                        path.display(),
                        idx + 1
                    )))
                }
            }
        } else {
            args.push(OsString::from(format!("--{key}={value}")));
        }
    }
    Ok(args)
}

/// Find the value of `--config` in the arguments after the subcommand.
pub fn find_config(args: &[OsString]) -> Option<OsString> {
    let mut iter = args.iter();
    while let Some(arg) = iter.next() {
        let s = arg.to_string_lossy();
        if s == "--" {
            return None;
        }
        if s == "--config" {
            return iter.next().cloned();
        }
        if let Some(v) = s.strip_prefix("--config=") {
            return Some(OsString::from(v));
        }
    }
    None
}
