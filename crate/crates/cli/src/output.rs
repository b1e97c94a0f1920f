use std::fs::File;
use std::io::{self, Write};
use std::path::Path;

use serde_json::Value;
use treeplication::report::{Report, Tolerance};

use crate::CliError;

#[derive(Clone, Copy, Debug, PartialEq, Eq, clap::ValueEnum)]
pub enum Format {
    Json,
    Csv,
}

/// A finished command: what was asked and what came out.
pub struct Document {
    pub command: &'static str,
    pub config: Value,
    pub result: Value,
    /// Set for reports, which have a natural row layout in CSV.
    pub report: Option<Report>,
}

fn open(out: Option<&Path>) -> Result<Box<dyn Write>, CliError> {
    Ok(match out {
        Some(p) => Box::new(File::create(p).map_err(|e| CliError::io(p, e))?),
        None => Box::new(io::stdout().lock()),
    })
}

pub fn emit(doc: &Document, format: Format, out: Option<&Path>) -> Result<(), CliError> {
    let mut w = open(out)?;
    let io_err = |e: io::Error| CliError::io(out.unwrap_or(Path::new("<stdout>")), e);
    match format {
        Format::Json => {
            let body = serde_json::json!({
                "command": doc.command,
                "config": doc.config,
                "result": doc.result,
            });
            serde_json::to_writer_pretty(&mut w, &body).map_err(|e| io_err(e.into()))?;
            writeln!(w).map_err(io_err)?;
        }
        Format::Csv => {
            let mut csv = csv::Writer::from_writer(w);
            let res: csv::Result<()> = match &doc.report {
                Some(r) => report_rows(&mut csv, r),
                None => flat_rows(&mut csv, doc),
            };
            res.and_then(|_| csv.flush().map_err(Into::into))
                .map_err(|e| io_err(io::Error::other(e)))?;
        }
    }
    Ok(())
}

fn report_rows<W: Write>(csv: &mut csv::Writer<W>, r: &Report) -> csv::Result<()> {
    csv.write_record(["row", "column", "value", "reference", "tolerance", "pass"])?;
    for c in &r.cells {
        let tolerance = match c.tolerance {
            None => String::new(),
            Some(Tolerance::Exact) => "exact".into(),
            Some(Tolerance::Absolute(t)) => format!("absolute:{t}"),
            Some(Tolerance::Relative(t)) => format!("relative:{t}"),
        };
        csv.write_record([
            c.row.clone(),
            c.column.clone(),
            c.value.to_string(),
            c.reference.map(|x| x.to_string()).unwrap_or_default(),
            tolerance,
            c.pass.map(|p| p.to_string()).unwrap_or_default(),
        ])?;
    }
    Ok(())
}

fn flat_rows<W: Write>(csv: &mut csv::Writer<W>, doc: &Document) -> csv::Result<()> {
    csv.write_record(["key", "value"])?;
    let mut rows = vec![("command".to_string(), doc.command.to_string())];
    flatten("config", &doc.config, &mut rows);
    flatten("result", &doc.result, &mut rows);
    for row in rows {
        csv.write_record([row.0, row.1])?;
    }
    Ok(())
}

/// Dotted-path leaves of a JSON value.
pub fn flatten(prefix: &str, v: &Value, out: &mut Vec<(String, String)>) {
    match v {
        Value::Object(map) => {
            for (k, x) in map {
                flatten(&format!("{prefix}.{k}"), x, out);
            }
        }
        Value::Array(items) => {
            for (i, x) in items.iter().enumerate() {
                flatten(&format!("{prefix}.{i}"), x, out);
            }
        }
        Value::String(s) => out.push((prefix.to_string(), s.clone())),
        Value::Null => out.push((prefix.to_string(), String::new())),
        other => out.push((prefix.to_string(), other.to_string())),
    }
}
