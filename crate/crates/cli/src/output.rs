use std::fs::File;
use std::io::{self, BufWriter, Write};

use serde_json::{json, Value};

use crate::commands::{CliError, Report, Result};
use crate::{Cli, Format, SCHEMA_VERSION};

fn io_err(e: impl std::fmt::Display) -> CliError {
    CliError::Io(e.to_string())
}

fn header(cli: &Cli, report: &Report) -> Value {
    let mut h = json!({
        "schema_version": SCHEMA_VERSION,
        "config": serde_json::to_value(cli).expect("config serializes"),
    });
    if let (Value::Object(dst), Value::Object(src)) = (&mut h, report.extra_header.clone()) {
        dst.extend(src);
    }
    h
}

/// CSV cell: strings bare, null empty, everything else as JSON text.
fn cell(v: &Value) -> String {
    match v {
        Value::Null => String::new(),
        Value::String(s) => s.clone(),
        other => other.to_string(),
    }
}

/// Nested objects become dotted columns.
fn flatten(prefix: &str, v: &Value, out: &mut Vec<(String, Value)>) {
    match v {
        Value::Object(m) => {
            for (k, v) in m {
                let key = if prefix.is_empty() { k.clone() } else { format!("{prefix}.{k}") };
                flatten(&key, v, out);
            }
        }
        other => out.push((prefix.to_string(), other.clone())),
    }
}

fn write_csv(out: &mut dyn Write, head: &Value, records: &[Value]) -> Result<()> {
    writeln!(out, "# {head}").map_err(io_err)?;
    let mut w = csv::Writer::from_writer(out);
    for (k, r) in records.iter().enumerate() {
        let mut cols = Vec::new();
        flatten("", r, &mut cols);
        if k == 0 {
            w.write_record(cols.iter().map(|(name, _)| name)).map_err(io_err)?;
        }
        w.write_record(cols.iter().map(|(_, v)| cell(v))).map_err(io_err)?;
    }
    w.flush().map_err(io_err)
}

pub fn emit(cli: &Cli, report: &Report) -> Result<()> {
    let mut out: Box<dyn Write> = match &cli.output {
        Some(path) => Box::new(BufWriter::new(
            File::create(path).map_err(|e| CliError::Io(format!("{}: {e}", path.display())))?,
        )),
        None => Box::new(BufWriter::new(io::stdout().lock())),
    };
    let head = header(cli, report);
    match cli.format.unwrap_or(report.default_format) {
        Format::Json => {
            let mut doc = head;
            doc["result"] = report.result.clone();
            serde_json::to_writer_pretty(&mut out, &doc).map_err(io_err)?;
            writeln!(out).map_err(io_err)?;
        }
        Format::Jsonl => {
            writeln!(out, "{head}").map_err(io_err)?;
            for r in &report.records {
                writeln!(out, "{r}").map_err(io_err)?;
            }
            if let Some(s) = &report.summary {
                writeln!(out, "{}", json!({ "summary": s })).map_err(io_err)?;
            }
        }
        Format::Csv => write_csv(&mut out, &head, &report.records)?,
    }
    out.flush().map_err(io_err)
}
