//! Output files. Every file carries the config hash and master seed: CSV files
//! in a leading `#` line, JSON files as top-level fields. Wall-clock timings
//! go to `timings.json` only, so all other files are reproducible byte for byte.

use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use serde::Serialize;
use serde_json::{json, Value};
use trimtree::trim::CouplingReport;

use crate::config::{Config, Format};
use crate::CliError;

pub struct Writer {
    dir: PathBuf,
    hash: String,
    seed: u64,
    pub format: Format,
    pub files: Vec<PathBuf>,
}

/// Shortest round-trip form; infinities as `inf`, NaN as `NA`.
pub fn num(v: f64) -> String {
    if v.is_nan() {
        "NA".into()
    } else if v.is_infinite() {
        if v > 0.0 { "inf" } else { "-inf" }.into()
    } else if v != 0.0 && (v.abs() < 1e-4 || v.abs() >= 1e15) {
        format!("{v:e}")
    } else {
        format!("{v}")
    }
}

fn json_num(v: f64) -> Value {
    if v.is_finite() {
        json!(v)
    } else {
        json!(num(v))
    }
}

impl Writer {
    pub fn new(cfg: &Config) -> Result<Self, CliError> {
        let dir = PathBuf::from(&cfg.output.dir);
        std::fs::create_dir_all(&dir).map_err(|source| CliError::Output { path: dir.clone(), source })?;
        Ok(Self {
            dir,
            hash: cfg.hash(),
            seed: cfg.seed(),
            format: cfg.output.format,
            files: Vec::new(),
        })
    }

    pub fn dir(&self) -> &Path {
        &self.dir
    }

    fn write(&mut self, name: &str, content: &str) -> Result<(), CliError> {
        let path = self.dir.join(name);
        std::fs::write(&path, content).map_err(|source| CliError::Output { path: path.clone(), source })?;
        self.files.push(path);
        Ok(())
    }

    fn stamp(&self) -> String {
        format!("# config_hash={} seed={}\n", self.hash, self.seed)
    }

    pub fn csv(&mut self, name: &str, header: &[&str], rows: &[Vec<String>]) -> Result<(), CliError> {
        let mut s = self.stamp();
        s.push_str(&header.join(","));
        s.push('\n');
        for r in rows {
            s.push_str(&r.join(","));
            s.push('\n');
        }
        self.write(name, &s)
    }

    /// Raw text after the stamp line (used for event logs, which carry their own header).
    pub fn text(&mut self, name: &str, body: &str) -> Result<(), CliError> {
        let s = format!("{}{body}", self.stamp());
        self.write(name, &s)
    }

    pub fn json(&mut self, name: &str, data: impl Serialize) -> Result<(), CliError> {
        let v = json!({"config_hash": self.hash, "seed": self.seed, "data": data});
        let mut s = serde_json::to_string_pretty(&v).expect("value serializes");
        s.push('\n');
        self.write(name, &s)
    }

    /// A table in the configured format: `<stem>.csv` or `<stem>.json` (list of records).
    pub fn table(&mut self, stem: &str, header: &[&str], rows: &[Vec<String>]) -> Result<(), CliError> {
        match self.format {
            Format::Csv => self.csv(&format!("{stem}.csv"), header, rows),
            Format::Json => {
                let records: Vec<Value> = rows
                    .iter()
                    .map(|r| {
                        let m: serde_json::Map<String, Value> = header
                            .iter()
                            .zip(r)
                            .map(|(h, v)| (h.to_string(), v.parse::<f64>().map(json_num).unwrap_or_else(|_| json!(v))))
                            .collect();
                        Value::Object(m)
                    })
                    .collect();
                self.json(&format!("{stem}.json"), records)
            }
        }
    }

    pub fn report(&mut self, scenario: &str, report: &CouplingReport) -> Result<(), CliError> {
        match self.format {
            Format::Csv => {
                let rows: Vec<Vec<String>> = report
                    .checks
                    .iter()
                    .map(|c| {
                        vec![
                            format!("\"{}\"", c.name.replace('"', "'")),
                            num(c.statistic),
                            c.p_value.map_or("NA".into(), num),
                            c.se.map_or("NA".into(), num),
                            c.reference.map_or("NA".into(), num),
                            num(c.threshold),
                            if c.passed { "pass" } else { "fail" }.into(),
                            c.seed.to_string(),
                            c.replicas.to_string(),
                        ]
                    })
                    .collect();
                self.csv(
                    "report.csv",
                    &["check", "statistic", "p_value", "se", "reference", "threshold", "verdict", "seed", "replicas"],
                    &rows,
                )?;
            }
            Format::Json => {
                self.json(
                    "report.json",
                    json!({"scenario": scenario, "passed": report.passed(), "report": report}),
                )?;
            }
        }
        let text = format!("{}{}", self.stamp(), report_text(scenario, report));
        self.write("report.txt", &text)
    }

    /// Lists the files written so far.
    pub fn manifest(&mut self, command: &str, scenario: Option<&str>) -> Result<(), CliError> {
        let files: Vec<String> = self
            .files
            .iter()
            .filter_map(|p| p.file_name().map(|n| n.to_string_lossy().into_owned()))
            .collect();
        let v = json!({
            "config_hash": self.hash,
            "seed": self.seed,
            "command": command,
            "scenario": scenario,
            "version": env!("CARGO_PKG_VERSION"),
            "files": files,
        });
        let s = serde_json::to_string_pretty(&v).expect("value serializes") + "\n";
        self.write("manifest.json", &s)
    }

    pub fn timings(&mut self, phases: &[(&str, f64)]) -> Result<(), CliError> {
        let m: serde_json::Map<String, Value> = phases.iter().map(|(k, v)| (k.to_string(), json!(v))).collect();
        let v = json!({"config_hash": self.hash, "seed": self.seed, "seconds": m});
        let s = serde_json::to_string_pretty(&v).expect("value serializes") + "\n";
        self.write("timings.json", &s)
    }
}

/// Human-readable report.
pub fn report_text(scenario: &str, report: &CouplingReport) -> String {
    let mut s = String::new();
    let verdict = if report.passed() { "PASS" } else { "FAIL" };
    let _ = writeln!(s, "scenario {scenario}: {verdict} (seed {}, {} checks)", report.seed, report.checks.len());
    for c in &report.checks {
        let mark = if c.passed { "ok  " } else { "FAIL" };
        let _ = write!(s, "  {mark} {}: statistic {}", c.name, num(c.statistic));
        if let Some(p) = c.p_value {
            let _ = write!(s, ", p {}", num(p));
        }
        if let Some(se) = c.se {
            let _ = write!(s, ", se {}", num(se));
        }
        if let Some(r) = c.reference {
            let _ = write!(s, ", reference {}", num(r));
        }
        let _ = writeln!(s, ", threshold {}, replicas {}", num(c.threshold), c.replicas);
    }
    s
}
