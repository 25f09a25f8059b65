//! Key-value config files that mirror command-line flags.
//!
//! One `key = value` per line; `#` starts a comment. A key is any long flag
//! of the chosen subcommand without its leading dashes, with `_` accepted for
//! `-`. Every flag takes a value. File entries are placed ahead of the real
//! flags, so flags win.

use std::ffi::OsString;
use std::path::Path;

use anyhow::{bail, Context, Result};

/// Turns config text into flag arguments.
pub fn config_args(text: &str) -> Result<Vec<OsString>> {
    let mut args = Vec::new();
    for (i, raw) in text.lines().enumerate() {
        let line = raw.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        let Some((key, value)) = line.split_once('=') else {
            bail!("config line {}: expected key = value, got {raw:?}", i + 1);
        };
        let key = key.trim().replace('_', "-");
        let value = value.trim();
        if key.is_empty() || key.starts_with('-') {
            bail!("config line {}: bad key {key:?}", i + 1);
        }
        args.push(format!("--{key}").into());
        args.push(value.into());
    }
    Ok(args)
}

/// Removes `--config <path>` from `argv` and splices the file's flags in
/// right after the subcommand name.
pub fn expand(argv: Vec<OsString>) -> Result<Vec<OsString>> {
    let mut rest = Vec::with_capacity(argv.len());
    let mut config = None;
    let mut iter = argv.into_iter();
    while let Some(arg) = iter.next() {
        let text = arg.to_string_lossy();
        if text == "--config" {
            config = Some(iter.next().context("--config needs a path")?);
        } else if let Some(path) = text.strip_prefix("--config=") {
            config = Some(path.into());
        } else {
            rest.push(arg);
        }
    }
    let Some(path) = config else {
        return Ok(rest);
    };
    let text = std::fs::read_to_string(Path::new(&path))
        .with_context(|| format!("reading config {}", Path::new(&path).display()))?;
    let extra = config_args(&text)?;
    // the subcommand is the first bare word after the program name
    let at = rest
        .iter()
        .skip(1)
        .position(|a| !a.to_string_lossy().starts_with('-'))
        .map(|p| p + 2)
        .context("--config needs a subcommand")?;
    rest.splice(at..at, extra);
    Ok(rest)
}
