//! Report files. The JSON report carries the schema version, command,
//! full configuration, every check, seed and versions. Wall-clock time and
//! thread count sit in a separate `runtime` block, so two runs with the
//! same seed agree everywhere else.

use std::io::Write;
use std::path::Path;

use anyhow::Context;
use mgig_core::campaign::{Check, VerificationReport};
use serde::{Deserialize, Serialize};
use serde_json::Value;

pub const SCHEMA: u32 = 1;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Versions {
    pub mgig: String,
    pub mgig_core: String,
}

impl Default for Versions {
    fn default() -> Self {
        Versions {
            mgig: env!("CARGO_PKG_VERSION").into(),
            mgig_core: mgig_core::VERSION.into(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Runtime {
    pub wall_seconds: f64,
    pub threads: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Report {
    pub schema: u32,
    pub command: String,
    pub config: Value,
    pub seed: u64,
    pub passed: bool,
    pub results: Vec<Check>,
    pub failures: Vec<String>,
    pub details: Value,
    pub versions: Versions,
    pub runtime: Runtime,
}

impl Report {
    pub fn new(command: &str, config: Value, seed: u64, checks: VerificationReport, details: Value) -> Report {
        Report {
            schema: SCHEMA,
            command: command.into(),
            config,
            seed,
            passed: checks.passed(),
            results: checks.checks,
            failures: checks.failures,
            details,
            versions: Versions::default(),
            runtime: Runtime {
                wall_seconds: 0.0,
                threads: 1,
            },
        }
    }

    pub fn to_json(&self) -> anyhow::Result<String> {
        let mut s = serde_json::to_string_pretty(self)?;
        s.push('\n');
        Ok(s)
    }

    /// Everything but the `runtime` block.
    pub fn numerical_part(&self) -> Value {
        let mut v = serde_json::to_value(self).expect("report serializes");
        if let Value::Object(m) = &mut v {
            m.remove("runtime");
        }
        v
    }

    /// `name,value,tolerance,bound,pass` per check.
    pub fn results_csv(&self) -> anyhow::Result<String> {
        let mut w = csv_writer(Vec::new());
        w.write_record(["name", "value", "tolerance", "bound", "pass"])?;
        for c in &self.results {
            let bound = match c.bound {
                mgig_core::campaign::Bound::AtMost => "at_most",
                mgig_core::campaign::Bound::Above => "above",
                mgig_core::campaign::Bound::Below => "below",
            };
            w.write_record([
                c.name.clone(),
                format!("{:e}", c.value),
                format!("{:e}", c.tolerance),
                bound.to_string(),
                c.pass.to_string(),
            ])?;
        }
        Ok(String::from_utf8(w.into_inner()?)?)
    }
}

pub fn csv_writer<W: Write>(w: W) -> csv::Writer<W> {
    csv::WriterBuilder::new()
        .terminator(csv::Terminator::Any(b'\n'))
        .from_writer(w)
}

pub fn write_file(path: &Path, contents: &str) -> anyhow::Result<()> {
    std::fs::write(path, contents).with_context(|| format!("writing {}", path.display()))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn sample() -> Report {
        let mut checks = VerificationReport::new();
        checks.push(Check::at_most("a/residual", 1e-12, 1e-10));
        checks.push(Check::above("b/control", 0.5, 1e-2));
        Report::new("verify-x", serde_json::json!({"dim": [1]}), 7, checks, Value::Null)
    }

    #[test]
    fn json_round_trip() {
        let r = sample();
        let back: Report = serde_json::from_str(&r.to_json().unwrap()).unwrap();
        assert_eq!(back, r);
        assert_eq!(back.schema, 1);
        assert!(back.passed);
    }

    #[test]
    fn runtime_is_isolated() {
        let a = sample();
        let mut b = sample();
        b.runtime.threads = 8;
        b.runtime.wall_seconds = 3.0;
        assert_ne!(a, b);
        assert_eq!(a.numerical_part(), b.numerical_part());
    }

    #[test]
    fn csv_uses_lf() {
        let s = sample().results_csv().unwrap();
        assert!(!s.contains('\r'));
        let lines: Vec<&str> = s.lines().collect();
        assert_eq!(lines[0], "name,value,tolerance,bound,pass");
        assert_eq!(lines.len(), 3);
        assert!(lines[1].starts_with("a/residual,1e-12,"));
    }
}
