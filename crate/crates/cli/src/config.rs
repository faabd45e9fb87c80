//! `--config` files: flags given on the command line win, then keys from
//! the file, then the built-in defaults.
//!
//! The file is TOML. Keys may sit at the top level or in a table named
//! after the subcommand (`[construct]`); the table wins when both exist.
//! Keys use the long flag name with `-` or `_`.

use std::ffi::OsString;

use clap::parser::ValueSource;
use clap::{ArgMatches, CommandFactory};

use crate::Cli;

/// Arguments to append so the config file's keys take effect.
pub fn extra_args(matches: &ArgMatches) -> Result<Vec<OsString>, String> {
    let Some((name, sub)) = matches.subcommand() else {
        return Ok(Vec::new());
    };
    let Some(path) = sub.get_one::<std::path::PathBuf>("config") else {
        return Ok(Vec::new());
    };
    let text = std::fs::read_to_string(path).map_err(|e| format!("cannot read {}: {e}", path.display()))?;
    let doc: toml::Table = text
        .parse()
        .map_err(|e| format!("{} is not valid TOML: {e}", path.display()))?;
    let table = match doc.get(name) {
        Some(toml::Value::Table(t)) => t.clone(),
        Some(_) => return Err(format!("`{name}` in {} must be a table", path.display())),
        None => doc,
    };

    let cmd = Cli::command();
    let sub_cmd = cmd.find_subcommand(name).expect("matched subcommand exists");
    let mut out = Vec::new();
    for (key, value) in &table {
        if matches!(value, toml::Value::Table(_)) {
            // tables for other subcommands
            continue;
        }
        let long = key.replace('_', "-");
        let arg = sub_cmd
            .get_arguments()
            .find(|a| a.get_long() == Some(long.as_str()))
            .ok_or_else(|| format!("unknown key `{key}` for `{name}` in {}", path.display()))?;
        if long == "config" {
            return Err("a config file cannot name another config file".into());
        }
        if sub.value_source(arg.get_id().as_str()) == Some(ValueSource::CommandLine) {
            continue;
        }
        let flag = format!("--{long}");
        let is_switch = matches!(arg.get_action(), clap::ArgAction::SetTrue);
        match value {
            toml::Value::Boolean(b) if is_switch => {
                if *b {
                    out.push(flag.into());
                }
            }
            toml::Value::Array(items) => {
                let parts: Vec<String> = items.iter().map(scalar).collect::<Result<_, _>>()?;
                out.push(format!("{flag}={}", parts.join(",")).into());
            }
            v => out.push(format!("{flag}={}", scalar(v)?).into()),
        }
    }
    Ok(out)
}

fn scalar(v: &toml::Value) -> Result<String, String> {
    Ok(match v {
        toml::Value::String(s) => s.clone(),
        toml::Value::Integer(i) => i.to_string(),
        toml::Value::Float(f) => f.to_string(),
        toml::Value::Boolean(b) => b.to_string(),
        other => return Err(format!("unsupported config value `{other}`")),
    })
}
