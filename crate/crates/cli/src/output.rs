use std::path::Path;

use serde_json::{json, Value};

use crate::commands::Outcome;
use crate::params::Params;
use crate::CliError;

fn csv_text(header: &[String], rows: &[Vec<String>]) -> Result<String, CliError> {
    let mut w = csv::WriterBuilder::new()
        .terminator(csv::Terminator::Any(b'\n'))
        .from_writer(Vec::new());
    w.write_record(header).map_err(|e| CliError::Io(e.into()))?;
    for row in rows {
        w.write_record(row).map_err(|e| CliError::Io(e.into()))?;
    }
    let bytes = w.into_inner().map_err(|e| CliError::Io(e.into_error()))?;
    Ok(String::from_utf8(bytes).expect("csv is utf-8"))
}

fn scalar_text(v: &Value) -> String {
    match v {
        Value::String(s) => s.clone(),
        other => other.to_string(),
    }
}

/// The result file. JSON documents carry a `run` echo of inputs, parameters
/// and seed; every CSV row carries the same echo in its params column.
pub fn render(outcome: &Outcome, command: &str, params: &Params, seed: u64, format: &str) -> Result<String, CliError> {
    let echo = json!({ "command": command, "inputs": params.inputs, "params": params.values, "seed": seed });
    match (outcome, format) {
        (Outcome::Doc(doc) | Outcome::Bounds(doc, _), "json") => {
            let mut doc = doc.clone();
            if let Value::Object(m) = &mut doc {
                m.insert("run".into(), echo);
            }
            Ok(serde_json::to_string_pretty(&doc).expect("json") + "\n")
        }
        (Outcome::Bounds(_, reports), _) => {
            let header: Vec<String> = smallball::report::BoundReport::CSV_HEADER
                .iter()
                .map(|s| s.to_string())
                .collect();
            let rows: Vec<Vec<String>> = reports
                .iter()
                .map(|r| {
                    let mut r = r.clone();
                    r.params.insert("run".into(), echo.clone());
                    r.csv_record()
                })
                .collect();
            csv_text(&header, &rows)
        }
        (Outcome::Doc(doc), _) => {
            let header = vec!["field".to_string(), "value".to_string()];
            let mut rows: Vec<Vec<String>> = match doc {
                Value::Object(m) => m.iter().map(|(k, v)| vec![k.clone(), scalar_text(v)]).collect(),
                other => vec![vec!["value".into(), scalar_text(other)]],
            };
            rows.push(vec!["run".into(), echo.to_string()]);
            csv_text(&header, &rows)
        }
        (Outcome::Table { header, rows }, "csv") => csv_text(header, rows),
        (Outcome::Table { header, rows }, _) => {
            let objects: Vec<Value> = rows
                .iter()
                .map(|row| {
                    let m: serde_json::Map<String, Value> = header
                        .iter()
                        .zip(row)
                        .map(|(h, v)| (h.clone(), Value::String(v.clone())))
                        .collect();
                    Value::Object(m)
                })
                .collect();
            Ok(serde_json::to_string_pretty(&json!({ "rows": objects, "run": echo })).expect("json") + "\n")
        }
    }
}

/// `<out>.manifest.json`: config echo, tool version and seed. The timestamp
/// is the only field that changes between identical runs and sits on its own
/// line.
pub fn write_manifest(out: &Path, command: &str, params: &Params, seed: u64, format: &str) -> Result<(), CliError> {
    let manifest = json!({
        "tool": "smallball",
        "version": env!("CARGO_PKG_VERSION"),
        "command": command,
        "seed": seed,
        "format": format,
        "output": out.file_name().map(|f| f.to_string_lossy().into_owned()),
        "inputs": params.inputs,
        "params": params.values,
        "timestamp": chrono::Utc::now().to_rfc3339_opts(chrono::SecondsFormat::Secs, true),
    });
    let mut path = out.as_os_str().to_owned();
    path.push(".manifest.json");
    std::fs::write(path, serde_json::to_string_pretty(&manifest).expect("json") + "\n")?;
    Ok(())
}
