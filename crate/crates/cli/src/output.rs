//! Output sinks. Every artifact carries the resolved configuration: CSV
//! files as leading `# key=value` lines, JSON documents under `config`.

use std::fs::File;
use std::io::{self, BufWriter, Write};
use std::path::Path;

use serde::Serialize;
use serde_json::{json, Value};

pub fn open(path: Option<&Path>) -> io::Result<Box<dyn Write>> {
    Ok(match path {
        Some(p) => Box::new(BufWriter::new(File::create(p)?)),
        None => Box::new(BufWriter::new(io::stdout().lock())),
    })
}

pub fn config_value<C: Serialize>(config: &C) -> Value {
    serde_json::to_value(config).expect("config serializes")
}

pub fn write_csv_header(w: &mut dyn Write, command: &str, config: &Value) -> io::Result<()> {
    writeln!(w, "# polarbec {command}")?;
    if let Value::Object(map) = config {
        for (k, v) in map {
            let shown = match v {
                Value::String(s) => s.clone(),
                other => other.to_string(),
            };
            writeln!(w, "# {k}={shown}")?;
        }
    }
    Ok(())
}

pub fn write_json<R: Serialize>(w: &mut dyn Write, command: &str, config: &Value, result: &R) -> io::Result<()> {
    let doc = json!({
        "command": command,
        "config": config,
        "result": result,
    });
    serde_json::to_writer_pretty(&mut *w, &doc)?;
    writeln!(w)
}
