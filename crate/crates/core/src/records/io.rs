//! JSON Lines and CSV encodings of a log.
//!
//! JSONL uses the record's field names verbatim. CSV uses the same names as
//! header columns, with maps flattened into `metric.<name>` and
//! `event.<name>` columns. Line numbers in errors are 1-based and count the
//! CSV header.

use std::collections::BTreeSet;
use std::io::{BufRead, BufReader, Read, Write};
use std::str::FromStr;

use serde_json::Value;

use super::{Completeness, EvaluationLog, MissingPair, ModelRunRecord};
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum LogFormat {
    Jsonl,
    Csv,
}

impl FromStr for LogFormat {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, Self::Err> {
        match s.to_ascii_lowercase().as_str() {
            "jsonl" | "ndjson" => Ok(LogFormat::Jsonl),
            "csv" => Ok(LogFormat::Csv),
            other => Err(format!("unknown log format `{other}` (expected jsonl or csv)")),
        }
    }
}

const REQUIRED: [&str; 5] = ["query_id", "model_id", "is_error", "cost_usd", "latency_sec"];
const METRIC_PREFIX: &str = "metric.";
const EVENT_PREFIX: &str = "event.";

/// Reads a strictly dense log.
pub fn ingest_log<R: Read>(source: R, format: LogFormat) -> Result<EvaluationLog> {
    ingest_log_with(source, format, Completeness::Strict).map(|(log, _)| log)
}

/// Reads a log, reporting the pairs dropped under [`Completeness::Permissive`].
pub fn ingest_log_with<R: Read>(
    source: R,
    format: LogFormat,
    completeness: Completeness,
) -> Result<(EvaluationLog, Vec<MissingPair>)> {
    let records = match format {
        LogFormat::Jsonl => parse_jsonl(source)?,
        LogFormat::Csv => parse_csv(source)?,
    };
    EvaluationLog::assemble(records, completeness)
}

fn parse_jsonl<R: Read>(source: R) -> Result<Vec<(usize, ModelRunRecord)>> {
    let mut out = Vec::new();
    for (i, line) in BufReader::new(source).lines().enumerate() {
        let line_no = i + 1;
        let line = line.map_err(|e| Error::Malformed {
            line: line_no,
            message: e.to_string(),
        })?;
        if line.trim().is_empty() {
            continue;
        }
        let mut value: Value = serde_json::from_str(&line).map_err(|e| Error::Malformed {
            line: line_no,
            message: e.to_string(),
        })?;
        let obj = value.as_object_mut().ok_or_else(|| Error::Malformed {
            line: line_no,
            message: "expected a JSON object".into(),
        })?;
        for field in REQUIRED {
            match obj.get(field) {
                None | Some(Value::Null) => {
                    return Err(Error::MissingField {
                        line: line_no,
                        field: field.into(),
                    })
                }
                _ => {}
            }
        }
        // Identifiers are opaque; numeric ids are accepted and kept as text.
        for id in ["query_id", "model_id"] {
            if let Some(Value::Number(n)) = obj.get(id) {
                let text = n.to_string();
                obj.insert(id.into(), Value::String(text));
            }
        }
        let record: ModelRunRecord = serde_json::from_value(value).map_err(|e| Error::Malformed {
            line: line_no,
            message: e.to_string(),
        })?;
        out.push((line_no, record));
    }
    Ok(out)
}

#[derive(Debug, Clone)]
enum Column {
    QueryId,
    ModelId,
    IsError,
    Abstained,
    Cost,
    Latency,
    Confidence,
    TokensIn,
    TokensOut,
    Metric(String),
    Event(String),
}

impl Column {
    fn parse(name: &str) -> Option<Self> {
        Some(match name {
            "query_id" => Column::QueryId,
            "model_id" => Column::ModelId,
            "is_error" => Column::IsError,
            "abstained" => Column::Abstained,
            "cost_usd" => Column::Cost,
            "latency_sec" => Column::Latency,
            "confidence" => Column::Confidence,
            "tokens_in" => Column::TokensIn,
            "tokens_out" => Column::TokensOut,
            other => {
                if let Some(m) = other.strip_prefix(METRIC_PREFIX).filter(|m| !m.is_empty()) {
                    Column::Metric(m.to_string())
                } else {
                    Column::Event(other.strip_prefix(EVENT_PREFIX).filter(|e| !e.is_empty())?.to_string())
                }
            }
        })
    }
}

fn parse_csv<R: Read>(source: R) -> Result<Vec<(usize, ModelRunRecord)>> {
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(true)
        .trim(csv::Trim::All)
        .from_reader(source);
    let headers = reader
        .headers()
        .map_err(|e| Error::Malformed {
            line: 1,
            message: e.to_string(),
        })?
        .clone();
    let mut columns = Vec::with_capacity(headers.len());
    for name in headers.iter() {
        let col = Column::parse(name).ok_or_else(|| Error::InvalidField {
            line: 1,
            field: name.to_string(),
            reason: "unknown column".into(),
        })?;
        columns.push(col);
    }
    for field in REQUIRED {
        if !headers.iter().any(|h| h == field) {
            return Err(Error::MissingField {
                line: 1,
                field: field.into(),
            });
        }
    }

    let mut out = Vec::new();
    for row in reader.records() {
        let row = row.map_err(|e| Error::Malformed {
            line: e.position().map_or(0, |p| p.line() as usize),
            message: e.to_string(),
        })?;
        let line = row.position().map_or(0, |p| p.line() as usize);
        let mut record = ModelRunRecord::new(String::new(), String::new(), false, 0.0, 0.0);
        for (col, cell) in columns.iter().zip(row.iter()) {
            let name = || column_name(col);
            if cell.is_empty() {
                match col {
                    Column::QueryId
                    | Column::ModelId
                    | Column::IsError
                    | Column::Cost
                    | Column::Latency => {
                        return Err(Error::MissingField {
                            line,
                            field: name(),
                        })
                    }
                    _ => continue,
                }
            }
            match col {
                Column::QueryId => record.query_id = cell.to_string(),
                Column::ModelId => record.model_id = cell.to_string(),
                Column::IsError => record.is_error = parse_bool(cell, line, &name())?,
                Column::Abstained => record.abstained = parse_bool(cell, line, &name())?,
                Column::Cost => record.cost_usd = parse_num(cell, line, &name())?,
                Column::Latency => record.latency_sec = parse_num(cell, line, &name())?,
                Column::Confidence => record.confidence = Some(parse_num(cell, line, &name())?),
                Column::TokensIn => record.tokens_in = Some(parse_num(cell, line, &name())?),
                Column::TokensOut => record.tokens_out = Some(parse_num(cell, line, &name())?),
                Column::Metric(m) => {
                    record.numeric_metrics.insert(m.clone(), parse_num(cell, line, &name())?);
                }
                Column::Event(e) => {
                    record.binary_events.insert(e.clone(), parse_bool(cell, line, &name())?);
                }
            }
        }
        out.push((line, record));
    }
    Ok(out)
}

fn column_name(col: &Column) -> String {
    match col {
        Column::QueryId => "query_id".into(),
        Column::ModelId => "model_id".into(),
        Column::IsError => "is_error".into(),
        Column::Abstained => "abstained".into(),
        Column::Cost => "cost_usd".into(),
        Column::Latency => "latency_sec".into(),
        Column::Confidence => "confidence".into(),
        Column::TokensIn => "tokens_in".into(),
        Column::TokensOut => "tokens_out".into(),
        Column::Metric(m) => format!("{METRIC_PREFIX}{m}"),
        Column::Event(e) => format!("{EVENT_PREFIX}{e}"),
    }
}

fn parse_bool(cell: &str, line: usize, field: &str) -> Result<bool> {
    match cell.to_ascii_lowercase().as_str() {
        "true" | "1" => Ok(true),
        "false" | "0" => Ok(false),
        _ => Err(Error::InvalidField {
            line,
            field: field.into(),
            reason: format!("expected a boolean, got `{cell}`"),
        }),
    }
}

fn parse_num<N: FromStr>(cell: &str, line: usize, field: &str) -> Result<N> {
    cell.parse().map_err(|_| Error::InvalidField {
        line,
        field: field.into(),
        reason: format!("expected a number, got `{cell}`"),
    })
}

fn io_error(e: impl std::fmt::Display) -> Error {
    Error::Malformed {
        line: 0,
        message: format!("write failed: {e}"),
    }
}

pub fn write_jsonl<W: Write>(log: &EvaluationLog, mut out: W) -> Result<()> {
    for record in log.records() {
        serde_json::to_writer(&mut out, record).map_err(io_error)?;
        out.write_all(b"\n").map_err(io_error)?;
    }
    Ok(())
}

pub fn write_csv<W: Write>(log: &EvaluationLog, out: W) -> Result<()> {
    let metrics: BTreeSet<String> = log.metric_names();
    let events: BTreeSet<String> = log.event_names();
    let mut writer = csv::Writer::from_writer(out);
    let mut header: Vec<String> = [
        "query_id",
        "model_id",
        "is_error",
        "abstained",
        "cost_usd",
        "latency_sec",
        "confidence",
        "tokens_in",
        "tokens_out",
    ]
    .iter()
    .map(|s| s.to_string())
    .collect();
    header.extend(metrics.iter().map(|m| format!("{METRIC_PREFIX}{m}")));
    header.extend(events.iter().map(|e| format!("{EVENT_PREFIX}{e}")));
    writer.write_record(&header).map_err(io_error)?;

    let opt = |v: Option<String>| v.unwrap_or_default();
    for r in log.records() {
        let mut row = vec![
            r.query_id.clone(),
            r.model_id.clone(),
            r.is_error.to_string(),
            r.abstained.to_string(),
            r.cost_usd.to_string(),
            r.latency_sec.to_string(),
            opt(r.confidence.map(|c| c.to_string())),
            opt(r.tokens_in.map(|t| t.to_string())),
            opt(r.tokens_out.map(|t| t.to_string())),
        ];
        row.extend(metrics.iter().map(|m| opt(r.numeric_metrics.get(m).map(|v| v.to_string()))));
        row.extend(events.iter().map(|e| opt(r.binary_events.get(e).map(|v| v.to_string()))));
        writer.write_record(&row).map_err(io_error)?;
    }
    writer.flush().map_err(io_error)?;
    Ok(())
}
