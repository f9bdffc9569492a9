//! Plain-text `key = value` config files.
//!
//! Each entry becomes `--key value` placed right after the subcommand, so
//! any flag given on the command line later overrides it. `key = true`
//! becomes a bare `--key`; `key = false` is dropped.

use std::ffi::OsString;
use std::fs;
use std::path::Path;

use anyhow::{bail, Context, Result};

pub fn parse_config(text: &str) -> Result<Vec<(String, String)>> {
    let mut out = Vec::new();
    for (n, line) in text.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let Some((k, v)) = line.split_once('=') else {
            bail!("line {}: expected key = value, got `{line}`", n + 1);
        };
        let key = k.trim().replace('_', "-");
        if key.is_empty() || key.starts_with('-') {
            bail!("line {}: invalid key `{}`", n + 1, k.trim());
        }
        out.push((key, v.trim().to_string()));
    }
    Ok(out)
}

fn config_path(args: &[OsString]) -> Option<OsString> {
    let mut it = args.iter();
    while let Some(a) = it.next() {
        let s = a.to_string_lossy();
        if s == "--config" {
            return it.next().cloned();
        }
        if let Some(p) = s.strip_prefix("--config=") {
            return Some(p.into());
        }
    }
    None
}

/// Returns `args` with the entries of the `--config` file (if any)
/// inserted after the subcommand.
pub fn expand_args(args: Vec<OsString>) -> Result<Vec<OsString>> {
    let Some(path) = config_path(&args) else {
        return Ok(args);
    };
    let path = Path::new(&path);
    let text = fs::read_to_string(path).with_context(|| format!("reading config {}", path.display()))?;
    let mut injected = Vec::new();
    for (k, v) in parse_config(&text)? {
        match v.as_str() {
            "true" => injected.push(OsString::from(format!("--{k}"))),
            "false" => {}
            _ => {
                injected.push(OsString::from(format!("--{k}")));
                injected.push(OsString::from(v));
            }
        }
    }
    let sub = args
        .iter()
        .skip(1)
        .position(|a| !a.to_string_lossy().starts_with('-'))
        .map(|i| i + 1)
        .unwrap_or(args.len());
    let mut out = args[..=sub.min(args.len() - 1)].to_vec();
    out.extend(injected);
    out.extend(args[sub + 1..].iter().cloned());
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parses_comments_and_blank_lines() {
        let entries = parse_config("# c\n\ntests = 50\nmodel=rn\nnegatives_mode = all\n").unwrap();
        assert_eq!(
            entries,
            vec![
                ("tests".into(), "50".into()),
                ("model".into(), "rn".into()),
                ("negatives-mode".into(), "all".into())
            ]
        );
        assert!(parse_config("no equals sign").is_err());
    }

    #[test]
    fn file_entries_precede_command_line_flags() {
        let dir = tempfile::tempdir().unwrap();
        let cfg = dir.path().join("run.cfg");
        fs::write(&cfg, "tests = 5\ntiming = true\nsvg = false\n").unwrap();
        let args: Vec<OsString> = ["sce", "solve", "--config", cfg.to_str().unwrap(), "--tests", "9"]
            .iter()
            .map(OsString::from)
            .collect();
        let out: Vec<String> = expand_args(args)
            .unwrap()
            .iter()
            .map(|a| a.to_string_lossy().into_owned())
            .collect();
        assert_eq!(out[..5], ["sce", "solve", "--tests", "5", "--timing"]);
        assert_eq!(out[out.len() - 2..], ["--tests", "9"]);
    }
}
