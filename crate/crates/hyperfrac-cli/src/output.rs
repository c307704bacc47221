//! Run artifacts: data files plus a `summary.json` with a shared envelope.

use std::path::{Path, PathBuf};

use hyperfrac::io::{to_json_pretty, write_atomic, Table};
use serde::Serialize;
use serde_json::Value;

use crate::config::{ExperimentConfig, Kind};
use crate::error::CliError;

pub const SUMMARY_SCHEMA: &str = "hyperfrac-summary/1";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum Relation {
    #[serde(rename = "<")]
    Less,
    #[serde(rename = "<=")]
    AtMost,
    #[serde(rename = ">")]
    Greater,
}

/// One declared tolerance and whether the run met it.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Check {
    pub name: String,
    pub value: f64,
    pub relation: Relation,
    pub threshold: f64,
    pub pass: bool,
}

impl Check {
    pub fn new(name: impl Into<String>, value: f64, relation: Relation, threshold: f64) -> Self {
        let pass = match relation {
            Relation::Less => value < threshold,
            Relation::AtMost => value <= threshold,
            Relation::Greater => value > threshold,
        };
        Self {
            name: name.into(),
            value,
            relation,
            threshold,
            pass,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct FileEntry {
    pub path: String,
    pub format: &'static str,
    pub columns: Vec<String>,
}

/// Collects checks, data files and the kind payload of a run.
pub struct Outputs {
    dir: PathBuf,
    pub checks: Vec<Check>,
    pub files: Vec<FileEntry>,
    pub payload: Value,
}

impl Outputs {
    pub fn new(dir: &Path) -> Self {
        Self {
            dir: dir.to_path_buf(),
            checks: Vec::new(),
            files: Vec::new(),
            payload: Value::Null,
        }
    }

    pub fn check(&mut self, c: Check) {
        self.checks.push(c);
    }

    pub fn table(&mut self, name: &str, t: &Table) -> Result<(), CliError> {
        t.write(&self.dir.join(name))?;
        self.files.push(FileEntry {
            path: name.to_string(),
            format: "csv",
            columns: t.columns.clone(),
        });
        Ok(())
    }

    pub fn json<T: Serialize>(&mut self, name: &str, v: &T, columns: &[&str]) -> Result<(), CliError> {
        write_atomic(&self.dir.join(name), to_json_pretty(v)?.as_bytes())?;
        self.files.push(FileEntry {
            path: name.to_string(),
            format: "json",
            columns: columns.iter().map(|c| c.to_string()).collect(),
        });
        Ok(())
    }

    pub fn lines(&mut self, name: &str, bytes: &[u8], columns: &[&str]) -> Result<(), CliError> {
        write_atomic(&self.dir.join(name), bytes)?;
        self.files.push(FileEntry {
            path: name.to_string(),
            format: "jsonl",
            columns: columns.iter().map(|c| c.to_string()).collect(),
        });
        Ok(())
    }

    pub fn failures(&self) -> usize {
        self.checks.iter().filter(|c| !c.pass).count()
    }

    /// Writes `summary.json`; called last so that a present summary implies complete data files.
    pub fn finish(self, cfg: &ExperimentConfig) -> Result<usize, CliError> {
        let failures = self.failures();
        let summary = Summary {
            schema: SUMMARY_SCHEMA,
            kind: cfg.kind,
            version: env!("CARGO_PKG_VERSION"),
            seed: cfg.seed,
            status: if failures == 0 { "pass" } else { "fail" },
            checks: &self.checks,
            files: &self.files,
            config: cfg,
            payload: &self.payload,
        };
        write_atomic(&self.dir.join("summary.json"), to_json_pretty(&summary)?.as_bytes())?;
        Ok(failures)
    }
}

#[derive(Serialize)]
struct Summary<'a> {
    schema: &'static str,
    kind: Kind,
    version: &'static str,
    seed: u64,
    status: &'static str,
    checks: &'a [Check],
    files: &'a [FileEntry],
    config: &'a ExperimentConfig,
    payload: &'a Value,
}
