//! Report assembly and output.

use std::io::Write;
use std::path::PathBuf;

use cantor_ft::{ScheduleSpec, Verdict};
use serde::Serialize;
use serde_json::Value;

use crate::config::{config_to_toml, Format, RunConfig};
use crate::CliError;

/// Rows for the CSV output; every cell already formatted.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct Table {
    pub headers: Vec<String>,
    pub rows: Vec<Vec<String>>,
}

impl Table {
    pub fn new(headers: &[&str]) -> Self {
        Table { headers: headers.iter().map(|h| h.to_string()).collect(), rows: Vec::new() }
    }

    pub fn push<I: IntoIterator<Item = String>>(&mut self, row: I) {
        self.rows.push(row.into_iter().collect());
    }

    pub fn to_csv(&self) -> Result<String, CliError> {
        let mut w = csv::Writer::from_writer(Vec::new());
        w.write_record(&self.headers).map_err(io)?;
        for r in &self.rows {
            w.write_record(r).map_err(io)?;
        }
        let bytes = w.into_inner().map_err(|e| CliError::Io(e.to_string()))?;
        Ok(String::from_utf8(bytes).expect("csv output is utf-8"))
    }
}

fn io<E: std::fmt::Display>(e: E) -> CliError {
    CliError::Io(e.to_string())
}

/// What a command produced: a JSON body, optional rows, and an overall verdict.
#[derive(Debug, Clone)]
pub struct Report {
    pub verdict: Verdict,
    pub summary: String,
    pub body: Value,
    pub table: Option<Table>,
    /// Format used on standard output when none is configured.
    pub preferred: Format,
}

impl Report {
    pub fn new<T: Serialize>(verdict: Verdict, summary: impl Into<String>, body: &T) -> Self {
        Report {
            verdict,
            summary: summary.into(),
            body: serde_json::to_value(body).expect("reports are serializable"),
            table: None,
            preferred: Format::Json,
        }
    }

    pub fn with_table(mut self, t: Table) -> Self {
        self.table = Some(t);
        self
    }

    pub fn prefer_csv(mut self) -> Self {
        self.preferred = Format::Csv;
        self
    }
}

#[derive(Serialize)]
struct Envelope<'a> {
    tool: &'static str,
    version: &'static str,
    command: &'a str,
    config: &'a RunConfig,
    schedule: &'a ScheduleSpec,
    verdict: Verdict,
    summary: &'a str,
    result: &'a Value,
}

/// The JSON document: the report plus the full resolved config and schedule.
/// Keys come out sorted, so equal inputs give byte-identical text.
pub fn to_json(report: &Report, config: &RunConfig, schedule: &ScheduleSpec, command: &str) -> String {
    let env = Envelope {
        tool: "cantor-ft",
        version: env!("CARGO_PKG_VERSION"),
        command,
        config,
        schedule,
        verdict: report.verdict,
        summary: &report.summary,
        result: &report.body,
    };
    let v = serde_json::to_value(env).expect("reports are serializable");
    let mut s = serde_json::to_string_pretty(&v).expect("reports are serializable");
    s.push('\n');
    s
}

/// Writes the report to the configured directory, next to the config that reproduces it,
/// or to standard output.
/// Returns the files written.
pub fn emit_report(report: &Report, config: &RunConfig, schedule: &ScheduleSpec, command: &str) -> Result<Vec<PathBuf>, CliError> {
    let json = to_json(report, config, schedule, command);
    let csv = report.table.as_ref().map(Table::to_csv).transpose()?;
    match &config.output.dir {
        Some(dir) => {
            std::fs::create_dir_all(dir).map_err(io)?;
            let stem = config.output.stem.as_deref().unwrap_or(command);
            let format = config.output.format.unwrap_or(Format::Both);
            let config_path = dir.join(format!("{stem}.config.toml"));
            std::fs::write(&config_path, config_to_toml(config)).map_err(io)?;
            let mut written = vec![config_path];
            if matches!(format, Format::Json | Format::Both) {
                let path = dir.join(format!("{stem}.json"));
                std::fs::write(&path, &json).map_err(io)?;
                written.push(path);
            }
            if let (true, Some(text)) = (matches!(format, Format::Csv | Format::Both), &csv) {
                let path = dir.join(format!("{stem}.csv"));
                std::fs::write(&path, text).map_err(io)?;
                written.push(path);
            }
            Ok(written)
        }
        None => {
            let format = config.output.format.unwrap_or(report.preferred);
            let mut out = std::io::stdout().lock();
            match (format, &csv) {
                (Format::Csv, Some(text)) => out.write_all(text.as_bytes()),
                (Format::Both, Some(text)) => out.write_all(json.as_bytes()).and_then(|_| out.write_all(text.as_bytes())),
                _ => out.write_all(json.as_bytes()),
            }
            .map_err(io)?;
            Ok(Vec::new())
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn csv_quotes_when_needed() {
        let mut t = Table::new(&["a", "b"]);
        t.push(["1/2^3".to_string(), "x, \"y\"".to_string()]);
        assert_eq!(t.to_csv().unwrap(), "a,b\n1/2^3,\"x, \"\"y\"\"\"\n");
    }

    #[test]
    fn json_keys_are_sorted_and_stable() {
        let config = RunConfig::default();
        let spec = ScheduleSpec::preset("default", 10).unwrap();
        let r = Report::new(Verdict::Verified, "ok", &serde_json::json!({"zeta": 1, "alpha": [1, 2]}));
        let a = to_json(&r, &config, &spec, "test");
        assert_eq!(a, to_json(&r, &config, &spec, "test"));
        assert!(a.find("\"alpha\"").unwrap() < a.find("\"zeta\"").unwrap());
        assert!(a.find("\"command\"").unwrap() < a.find("\"config\"").unwrap());
    }
}
