//! Report JSON and raw-functional CSV.

use std::collections::BTreeMap;
use std::io::{self, Write};

use serde::Serialize;

use crate::checks::Functional;
use crate::scenario::CheckName;

pub const REPORT_VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CheckRecord {
    pub check: CheckName,
    pub property: String,
    pub statistic: f64,
    pub threshold: f64,
    pub pass: bool,
    pub runtime_ms: f64,
    pub trials: usize,
    pub details: BTreeMap<String, f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub error: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Report {
    pub report_version: u32,
    pub scenario: String,
    pub master_seed: u64,
    pub trials: usize,
    pub significance: f64,
    pub pass: bool,
    pub checks: Vec<CheckRecord>,
    #[serde(skip)]
    pub functionals: Vec<(CheckName, Functional)>,
}

impl Report {
    pub fn record(&self, check: CheckName) -> Option<&CheckRecord> {
        self.checks.iter().find(|r| r.check == check)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("report is serializable")
    }

    /// `trial,functional,value`, in check order, then functional, then trial.
    pub fn write_csv<W: Write>(&self, mut out: W) -> io::Result<()> {
        writeln!(out, "trial,functional,value")?;
        for (_, f) in &self.functionals {
            writeln!(out, "{},{},{:e}", f.trial, f.name, f.value)?;
        }
        Ok(())
    }

    pub fn csv_string(&self) -> String {
        let mut buf = Vec::new();
        self.write_csv(&mut buf).expect("writing to memory");
        String::from_utf8(buf).expect("csv is ascii")
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn csv_uses_exponent_notation() {
        let report = Report {
            report_version: REPORT_VERSION,
            scenario: "x".into(),
            master_seed: 1,
            trials: 1,
            significance: 0.01,
            pass: true,
            checks: vec![],
            functionals: vec![(
                CheckName::Rank,
                Functional { trial: 3, name: "rank.rank_Ta".into(), value: 0.5 },
            )],
        };
        assert_eq!(report.csv_string(), "trial,functional,value\n3,rank.rank_Ta,5e-1\n");
        assert!(report.to_json().contains("\"report_version\": 1"));
    }
}
