//! CSV tables and the JSON summary written per command.

use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};

use anyhow::{Context, Result};
use serde::{Deserialize, Serialize};
use serde_json::Value;

use crate::config::RunConfig;

/// A CSV table with a fixed header.
#[derive(Clone, Debug, PartialEq)]
pub struct Table {
    pub name: String,
    pub header: Vec<String>,
    pub rows: Vec<Vec<String>>,
}

impl Table {
    pub fn new(name: impl Into<String>, header: &[&str]) -> Self {
        Self { name: name.into(), header: header.iter().map(|h| h.to_string()).collect(), rows: vec![] }
    }

    pub fn push(&mut self, row: impl IntoIterator<Item = f64>) {
        self.rows.push(row.into_iter().map(fmt_float).collect());
    }

    pub fn push_raw(&mut self, row: Vec<String>) {
        self.rows.push(row);
    }
}

/// Shortest round-trip decimal: `.` separator, no grouping, no locale.
pub fn fmt_float(x: f64) -> String {
    if x.is_finite() {
        format!("{x:e}")
    } else if x.is_nan() {
        "nan".into()
    } else if x > 0.0 {
        "inf".into()
    } else {
        "-inf".into()
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Summary {
    pub command: String,
    pub config_echo: RunConfig,
    pub metrics: BTreeMap<String, Value>,
    pub pass_flags: BTreeMap<String, bool>,
    pub versions: BTreeMap<String, String>,
    pub seed: u64,
}

impl Summary {
    pub fn new(command: &str, config: &RunConfig) -> Self {
        let versions = [("krflab", krflab::VERSION), ("krflab-cli", env!("CARGO_PKG_VERSION"))]
            .into_iter()
            .map(|(k, v)| (k.to_string(), v.to_string()))
            .collect();
        Self {
            command: command.into(),
            config_echo: config.clone(),
            metrics: BTreeMap::new(),
            pass_flags: BTreeMap::new(),
            versions,
            seed: config.seed,
        }
    }

    pub fn metric(&mut self, key: &str, value: impl Serialize) -> Result<()> {
        self.metrics.insert(key.into(), serde_json::to_value(value).with_context(|| format!("serializing {key}"))?);
        Ok(())
    }

    pub fn flag(&mut self, key: &str, pass: bool) {
        self.pass_flags.insert(key.into(), pass);
    }

    pub fn all_pass(&self) -> bool {
        self.pass_flags.values().all(|&p| p)
    }
}

/// Writes `<command>.json` and one `<command>_<table>.csv` per table; returns the paths.
pub fn emit_reports(summary: &Summary, tables: &[Table], out: &Path) -> Result<Vec<PathBuf>> {
    fs::create_dir_all(out).with_context(|| format!("creating {}", out.display()))?;
    let mut written = vec![];
    for table in tables {
        let path = out.join(format!("{}_{}.csv", summary.command, table.name));
        let mut w = csv::WriterBuilder::new()
            .terminator(csv::Terminator::Any(b'\n'))
            .from_path(&path)
            .with_context(|| format!("opening {}", path.display()))?;
        w.write_record(&table.header).with_context(|| format!("writing {}", path.display()))?;
        for row in &table.rows {
            w.write_record(row).with_context(|| format!("writing {}", path.display()))?;
        }
        w.flush().with_context(|| format!("writing {}", path.display()))?;
        written.push(path);
    }
    let path = out.join(format!("{}.json", summary.command));
    let mut text = serde_json::to_string_pretty(summary).context("serializing summary")?;
    text.push('\n');
    fs::write(&path, text).with_context(|| format!("writing {}", path.display()))?;
    written.push(path);
    Ok(written)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn floats_are_plain() {
        assert_eq!(fmt_float(1234567.5), "1.2345675e6");
        assert_eq!(fmt_float(-0.001), "-1e-3");
        assert_eq!(fmt_float(f64::INFINITY), "inf");
        let x = 0.1 + 0.2;
        assert_eq!(fmt_float(x).parse::<f64>().unwrap(), x);
    }

    #[test]
    fn empty_summary_round_trips() {
        let s = Summary::new("empty", &RunConfig::default());
        let text = serde_json::to_string(&s).unwrap();
        let back: Summary = serde_json::from_str(&text).unwrap();
        assert_eq!(back, s);
        assert!(back.metrics.is_empty() && back.all_pass());
    }
}
